"""Command-line entry points.

    missioneer serve --config ops.yaml --sim world.yaml [--time-scale 10]
    missioneer mission run round.json --map map.json --sim world.yaml
    missioneer map import-posegraph poses.txt --threshold 1.5 --out map.json
    missioneer changedetect --before a.pcd --after b.pcd --out report/
    missioneer replay b1
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import yaml

DATA_DIR_ENV = "MISSIONEER_DATA_DIR"


def _load_doc(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return yaml.safe_load(fh)
    except OSError as exc:
        raise SystemExit(f"cannot read {path}: {exc.strerror}")
    except yaml.YAMLError as exc:
        raise SystemExit(f"cannot parse {path}: {exc}")


def _data_dir(cli_value, config: dict | None = None) -> str:
    if cli_value:
        return cli_value
    if os.environ.get(DATA_DIR_ENV):
        return os.environ[DATA_DIR_ENV]
    if config and config.get("data_dir"):
        return str(config["data_dir"])
    return "data"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="missioneer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the operator service against a simulated robot")
    serve.add_argument("--config", required=True, help="service config (yaml)")
    serve.add_argument("--sim", required=True, help="simulated world description (yaml)")
    serve.add_argument("--time-scale", type=float, default=1.0)
    serve.add_argument("--seed", type=int, default=None)
    serve.add_argument("--data-dir", default=None)

    mission = sub.add_parser("mission", help="mission tools")
    mission_sub = mission.add_subparsers(dest="mission_command", required=True)
    run = mission_sub.add_parser("run", help="execute one mission headless and exit")
    run.add_argument("mission_file")
    run.add_argument("--map", required=True, dest="map_file")
    run.add_argument("--sim", required=True, dest="world_file")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--data-dir", default=None)

    map_cmd = sub.add_parser("map", help="map tools")
    map_sub = map_cmd.add_subparsers(dest="map_command", required=True)
    imp = map_sub.add_parser("import-posegraph", help="build a map from recorded poses")
    imp.add_argument("poses_file")
    imp.add_argument("--threshold", type=float, default=1.5)
    imp.add_argument("--out", default="map.json")

    change = sub.add_parser("changedetect", help="diff two point clouds into object changes")
    change.add_argument("--before", required=True)
    change.add_argument("--after", required=True)
    change.add_argument("--resolution", type=float, default=0.1)
    change.add_argument("--out", required=True, help="report directory")
    change.add_argument("--seed", type=int, default=0)

    replay = sub.add_parser("replay", help="run a bundled long-horizon deployment replay")
    replay.add_argument("scenario", choices=("b1", "jet"))
    replay.add_argument("--seed", type=int, default=0)
    replay.add_argument("--data-dir", default=None)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "mission":
            return _cmd_mission_run(args)
        if args.command == "map":
            return _cmd_import_posegraph(args)
        if args.command == "changedetect":
            return _cmd_changedetect(args)
        if args.command == "replay":
            return _cmd_replay(args)
    except SystemExit:
        raise
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


# -- serve -------------------------------------------------------------------


def _build_stack(world_doc_path, data_dir, *, clock, seed, timezone, battery_cfg=None):
    from .clock import Timeline
    from .core import AutonomyCore, CoreConfig
    from .events import EventLog
    from .geometry import Pose
    from .scheduler import BatteryMonitor
    from .sim.robot import SimRobot
    from .sim.world import SimWorld
    from .store import DataStore
    from .topomap import DOCK

    world_doc = _load_doc(world_doc_path) or {}
    world = SimWorld.from_document(world_doc, base_dir=Path(world_doc_path).parent)
    timeline = Timeline(clock)
    events = EventLog(timeline.now)
    store = DataStore(data_dir)

    core_box: list = []
    robot = SimRobot(
        world,
        map_provider=lambda: core_box[0].tmap,
        timeline=timeline,
        events=events,
        seed=seed,
        initial_pose=Pose(translation=tuple(world_doc.get("initial_position", (0.0, 0.0, 0.0)))),
    )
    battery_cfg = battery_cfg or {}
    monitor = BatteryMonitor(
        low=float(battery_cfg.get("low", 0.2)),
        resume=float(battery_cfg.get("resume", 0.9)),
        hard_floor=float(battery_cfg.get("hard_floor", 0.1)),
    )
    core = AutonomyCore(
        timeline,
        store,
        robot,
        events=events,
        config=CoreConfig(timezone=timezone, seed=seed),
        monitors=[monitor],
    )
    core_box.append(core)
    core.restore()
    if core.tmap.nodes and "initial_position" not in world_doc:
        docks = core.tmap.nodes_of_kind(DOCK)
        if docks:
            robot.teleport(Pose(translation=docks[0].position))
            robot.dock()
    return timeline, store, world, robot, core


def _cmd_serve(args) -> int:
    from .clock import PacedSimClock
    from .localization import Localizer
    from .service import OpsService

    config = _load_doc(args.config) or {}
    data_dir = _data_dir(args.data_dir, config)
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    clock = PacedSimClock(start=time.time(), rate=args.time_scale)
    timeline, store, world, robot, core = _build_stack(
        args.sim,
        data_dir,
        clock=clock,
        seed=seed,
        timezone=str(config.get("timezone", "UTC")),
        battery_cfg=config.get("battery"),
    )

    localizer = None
    if not world.prior_map.is_empty:
        localizer = Localizer(
            world.prior_map, robot, robot.current_pose(), events=core.events
        )

    service = OpsService(core, host=str(config.get("host", "127.0.0.1")), port=int(config.get("port", 8765)))
    core.start()
    if localizer is not None:
        localizer.start(timeline)
    service.start()
    print(f"listening on {service.url} (data dir: {data_dir})", flush=True)
    try:
        timeline.run()
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
        if localizer is not None:
            localizer.stop(timeline)
        core.stop()
        timeline.stop()
    return 0


# -- mission run ---------------------------------------------------------------


def _cmd_mission_run(args) -> int:
    from .clock import SimClock
    from .mission import COMPLETED, Mission
    from .topomap import map_from_document

    data_dir = args.data_dir or tempfile.mkdtemp(prefix="missioneer-run-")
    timeline_clock = SimClock(start=0.0)
    timeline, store, world, robot, core = _build_stack(
        args.world_file, data_dir, clock=timeline_clock, seed=args.seed, timezone="UTC"
    )
    core.set_map(map_from_document(_load_doc(args.map_file)))
    mission = Mission.from_document(_load_doc(args.mission_file))

    core.start()
    try:
        record = core.run_mission(mission, origin="cli")
    finally:
        core.stop()
    print(f"mission {mission.id}: {record.outcome}")
    for i, status in enumerate(record.task_statuses):
        label = mission.tasks[i].label or mission.tasks[i].node
        print(f"  task {i} [{label}]: {status}")
    print(f"distance walked: {record.distance_walked:.1f} m")
    return 0 if record.outcome == COMPLETED else 1


# -- map import ----------------------------------------------------------------


def _pose_positions(doc):
    # Accept a bare [[x,y,z], ...] array, or {"poses": [...]} whose items are
    # either triples or objects carrying a "position".
    if isinstance(doc, dict):
        doc = doc.get("poses", doc)
    if not isinstance(doc, list):
        raise SystemExit("error: poses file must hold a list of positions")
    return [p["position"] if isinstance(p, dict) else p for p in doc]


def _cmd_import_posegraph(args) -> int:
    from .store import atomic_write_json
    from .topomap import build_from_pose_graph, map_to_document

    text = Path(args.poses_file).read_text(encoding="utf-8")
    try:
        poses = _pose_positions(json.loads(text))
    except json.JSONDecodeError:
        poses = np.loadtxt(args.poses_file, ndmin=2)
    tmap = build_from_pose_graph(poses, args.threshold)
    atomic_write_json(Path(args.out), map_to_document(tmap))
    print(f"imported {len(tmap.nodes)} nodes, {len(tmap.edges)} edges -> {args.out}")
    return 0


# -- change detection ------------------------------------------------------------


def _cmd_changedetect(args) -> int:
    from .changedetect import ChangeParams, cluster_file_name, report_to_document, run_pipeline
    from .pointcloud import load_pcd, save_pcd
    from .store import atomic_write_json

    before = load_pcd(args.before)
    after = load_pcd(args.after)
    params = ChangeParams(resolution=args.resolution, seed=args.seed)
    report = run_pipeline(before, after, params)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_json(out / "report.json", report_to_document(report))
    for cluster in list(report.added) + list(report.removed):
        save_pcd(cluster.points, out / cluster_file_name(cluster))
    print(f"added: {len(report.added)}  removed: {len(report.removed)}")
    print(f"report -> {out / 'report.json'}")
    return 0


# -- replay ---------------------------------------------------------------------


def _cmd_replay(args) -> int:
    from .replay import format_table, run_replay

    data_dir = args.data_dir or tempfile.mkdtemp(prefix=f"missioneer-{args.scenario}-")
    result = run_replay(args.scenario, data_dir, seed=args.seed)
    print(format_table(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
