"""Build hooks for the optional compiled kernels.

The package is fully functional without the extension (a numpy/scipy
fallback is selected at import). Set MISSIONEER_SKIP_NATIVE=1 to force a
pure-Python build, e.g. on machines without a C++ toolchain.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("MISSIONEER_SKIP_NATIVE"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/missioneer/kernels/_native.pyx"],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
