"""Mission-level autonomy for inspection robots.

The package splits into layers that only talk downward:

* geometry / pointcloud / kernels: math and cloud primitives
* topomap / navigation / icp / localization / changedetect: spatial skills
* clock / events / actions / mission / schedule / scheduler: behaviour
* sim / store / core / protocol / service / client / replay / cli: the system

Import the layer you need; `missioneer.core.AutonomyCore` is the seam that
wires everything together, and `missioneer.cli` is the operator entry point.
"""

__version__ = "0.1.0"

from .errors import MissioneerError

__all__ = ["MissioneerError", "__version__"]
