"""Command-line entry point: scenario runs, experiments, and artifacts.

Every command is headless and deterministic under --seed with the in-process
transport. Outputs (CSV tables, trajectory logs, PGM/PPM rasters, trained
policies, JSON run reports) land in the --out directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bridge, loops
from .reactive import ReactiveConfig
from .scenario import builtin_scenarios, load_scenario


@dataclasses.dataclass
class RunReport:
    scenario: str
    seed: int
    duration_s: float  # run-clock elapsed (virtual time for inproc transport)
    topic_counts: dict
    metrics: dict

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        return json.dumps(d, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        return cls(**d)


def _write_report(out_dir: Path, report: RunReport):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json())
    return out_dir / "report.json"


def _parse_num_list(text, cast=float):
    return [cast(v) for v in str(text).split(",") if v != ""]


def cmd_run(args):
    scenario = load_scenario(args.scenario)
    sim = loops.CoSim(scenario, seed=args.seed, compositor=args.compositor,
                      camera_shape=(args.camera_width, args.camera_height)
                      if args.compositor else None,
                      camera_period=1.0 / 15.0 if args.compositor else None,
                      dump_dir=Path(args.out) / "frames" if args.dump_frames else None)
    sim.run_for(args.duration_s)
    cm = sim.fire.costmap
    report = RunReport(
        scenario=scenario.name, seed=args.seed, duration_s=sim.now,
        topic_counts=sim.bus.publish_counts(),
        metrics={
            "fire_steps": sim.fire.step_count,
            "robot_ticks": sim.robot.tick_count,
            "costmap_max": int(cm.values.max()),
            "costmap_mean": float(cm.values.mean()),
            "truth_dose_kj_m2": sim.fire.truth_sensor.dose,
            "ledger": sim.fire.ledger_totals,
        })
    out = Path(args.out)
    _write_report(out, report)
    from . import costmap as costmap_mod
    (out / "costmap.csv").write_text(costmap_mod.to_csv(cm))
    (out / "costmap.pgm").write_bytes(costmap_mod.to_pgm(cm))
    print(f"run complete: t={sim.now:.2f}s, report at {out / 'report.json'}")
    return 0


def cmd_plan(args):
    weights = _parse_num_list(args.weights)
    res = loops.run_plan_experiment(args.scenario, weights=weights, seed=args.seed,
                                    warmup_s=args.warmup_s, out_dir=args.out)
    report = RunReport(
        scenario=args.scenario, seed=args.seed, duration_s=args.warmup_s,
        topic_counts={},
        metrics={
            "weights": list(weights),
            "distance_m": [p.length for p in res.paths],
            "dose_kj_m2": [r.dose for r in res.reports],
            "peak_kw_m2": [r.peak_irradiance for r in res.reports],
            "predicted_peak_kw_m2": list(res.predicted_peaks),
        })
    _write_report(Path(args.out), report)
    for w, p, r, pred in zip(weights, res.paths, res.reports, res.predicted_peaks):
        print(f"w={w:g}: distance {p.length:.2f} m, dose {r.dose:.2f} kJ/m^2, "
              f"peak {r.peak_irradiance:.2f} kW/m^2 (predicted {pred:.2f})")
    return 0


def cmd_reactive(args):
    cfg = ReactiveConfig(q_max=args.qmax)
    res = loops.run_reactive_experiment(args.scenario, cfg, seed=args.seed,
                                        delay_ms=args.delay_ms, out_dir=args.out,
                                        duration_limit=args.duration_s)
    report = RunReport(
        scenario=args.scenario, seed=args.seed, duration_s=res.time_to_goal,
        topic_counts={},
        metrics={
            "reached": res.reached,
            "peak_reading_kw_m2": res.peak_reading,
            "truth_dose_kj_m2": res.truth_dose,
            "fire_entry": res.fire_entry,
            "min_clearance_m": res.min_clearance,
            "delay_ms": args.delay_ms,
        })
    _write_report(Path(args.out), report)
    print(f"reactive: reached={res.reached} t={res.time_to_goal:.2f}s "
          f"dose={res.truth_dose:.2f} kJ/m^2")
    return 0 if res.reached else 1


def cmd_latency(args):
    delays = _parse_num_list(args.delays)
    cfg = ReactiveConfig(q_max=args.qmax)
    results = loops.run_latency_experiment(args.scenario, cfg, seed=args.seed,
                                           delays_ms=delays,
                                           duration_limit=args.duration_s)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["delay_ms,reached,dose_kj_m2,fire_entry,min_clearance_m"]
    for d, r in results:
        rows.append(f"{d:g},{int(r.reached)},{r.truth_dose:.10g},"
                    f"{int(r.fire_entry)},{r.min_clearance:.10g}")
    (out / "dose_vs_delay.csv").write_text("\n".join(rows) + "\n")
    report = RunReport(
        scenario=args.scenario, seed=args.seed, duration_s=0.0, topic_counts={},
        metrics={"delays_ms": list(delays),
                 "dose_kj_m2": [r.truth_dose for _, r in results],
                 "reached": [r.reached for _, r in results],
                 "fire_entry": [r.fire_entry for _, r in results]})
    _write_report(out, report)
    for d, r in results:
        print(f"delay {d:g} ms: reached={r.reached} dose={r.truth_dose:.2f} kJ/m^2 "
              f"fire_entry={r.fire_entry}")
    return 0


def cmd_bc(args):
    from . import bc as bc_mod
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.bc_command == "record":
        demos, _ = bc_mod.record_demos(n_per_side=args.demos_per_side, seed=args.seed,
                                       out_dir=out / "demos")
        valid = sum(1 for d in demos if d.valid)
        print(f"recorded {len(demos)} demos ({valid} valid) in {out / 'demos'}")
        return 0
    if args.bc_command == "train":
        demos = bc_mod.load_demo_dir(args.demo_dir or (out / "demos"))
        net, metrics = bc_mod.train(demos, seed=args.seed)
        bc_mod.save_policy(net, out / "policy.bin")
        (out / "training.json").write_text(json.dumps(
            {k: v for k, v in metrics.items() if k not in ("train_curve", "val_curve")},
            sort_keys=True, indent=2) + "\n")
        print(f"trained on {metrics['n_train']} samples; val MSE {metrics['val_mse']:.5f} "
              f"R2 {metrics['r2']:.3f}")
        return 0
    if args.bc_command == "rollout":
        net = bc_mod.load_policy(args.policy or (out / "policy.bin"))
        res = bc_mod.rollout(net, args.side, seed=args.seed)
        rows = ["t,x,y"] + [f"{t:.10g},{x:.10g},{y:.10g}" for t, x, y in res.trajectory]
        (out / f"rollout_{args.side}.csv").write_text("\n".join(rows) + "\n")
        print(f"rollout ({args.side}): reached={res.reached} "
              f"clearance={res.min_clearance:.2f} m dose={res.dose:.2f} kJ/m^2")
        return 0 if res.reached else 1
    raise SystemExit(f"unknown bc subcommand {args.bc_command!r}")


def cmd_roundtrip(args):
    scenario = load_scenario(args.scenario)
    sim = loops.CoSim(scenario, seed=args.seed, compositor=True,
                      camera_shape=(args.camera_width, args.camera_height))
    sim.run_for(1.0)
    if args.delay_ms:
        bridge.inject_delay(sim.bus, "both", args.delay_ms)
    mean, std = bridge.measure_roundtrip(sim, args.samples)
    print(f"roundtrip over {args.samples} samples: mean {mean * 1e3:.1f} ms, "
          f"stddev {std * 1e3:.1f} ms")
    return 0


def cmd_teleop_server(args):
    from .teleop import serve

    serve(scenario_name=args.scenario, host=args.host, port=args.port,
          seed=args.seed, out_dir=Path(args.out))
    return 0


def cmd_scenarios(args):
    for name, scn in builtin_scenarios().items():
        print(f"{name}: domain {scn.domain_size}, {len(scn.fires)} fires, "
              f"start {scn.robot_start} goal {scn.robot_goal}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="firecosim",
                                description="fire/robot co-simulation experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario_default):
        sp.add_argument("--scenario", default=scenario_default,
                        help="builtin name or scenario file path")
        sp.add_argument("--seed", type=int, default=7)
        sp.add_argument("--out", default="out")

    sp = sub.add_parser("run", help="free run of the co-simulation")
    common(sp, "three_fires")
    sp.add_argument("--duration-s", type=float, default=10.0)
    sp.add_argument("--transport", choices=["inproc", "tcp"], default="inproc")
    sp.add_argument("--dump-frames", action="store_true")
    sp.add_argument("--compositor", action="store_true")
    sp.add_argument("--camera-width", type=int, default=160)
    sp.add_argument("--camera-height", type=int, default=120)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("plan", help="thermally weighted planning + sensor walks")
    common(sp, "three_fires")
    sp.add_argument("--weights", default="0,5,30")
    sp.add_argument("--warmup-s", type=float, default=30.0)
    sp.set_defaults(fn=cmd_plan)

    sp = sub.add_parser("reactive", help="reactive avoidance experiment")
    common(sp, "reactive_line")
    sp.add_argument("--qmax", type=float, default=5.0)
    sp.add_argument("--delay-ms", type=float, default=0.0)
    sp.add_argument("--duration-s", type=float, default=60.0)
    sp.set_defaults(fn=cmd_reactive)

    sp = sub.add_parser("latency", help="dose vs injected delay sweep")
    common(sp, "reactive_line")
    sp.add_argument("--delays", default="0,500,1000,2000")
    sp.add_argument("--qmax", type=float, default=5.0)
    sp.add_argument("--duration-s", type=float, default=60.0)
    sp.set_defaults(fn=cmd_latency)

    sp = sub.add_parser("bc", help="behavioral cloning pipeline")
    sp.add_argument("bc_command", choices=["record", "train", "rollout"])
    common(sp, "bc_corridor")
    sp.add_argument("--demos-per-side", type=int, default=10)
    sp.add_argument("--demo-dir", default=None)
    sp.add_argument("--policy", default=None)
    sp.add_argument("--side", choices=["left", "right"], default="left")
    sp.set_defaults(fn=cmd_bc)

    sp = sub.add_parser("roundtrip", help="measure triplet->composite latency")
    common(sp, "reactive_line")
    sp.add_argument("--samples", type=int, default=20)
    sp.add_argument("--delay-ms", type=float, default=0.0)
    sp.add_argument("--camera-width", type=int, default=64)
    sp.add_argument("--camera-height", type=int, default=48)
    sp.set_defaults(fn=cmd_roundtrip)

    sp = sub.add_parser("teleop-server", help="real-time sim + websocket teleop")
    common(sp, "bc_corridor")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8765)
    sp.set_defaults(fn=cmd_teleop_server)

    sp = sub.add_parser("scenarios", help="list builtin scenarios")
    sp.set_defaults(fn=cmd_scenarios)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        rc = args.fn(args)
    except Exception as e:  # surface clean errors, nonzero exit
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"[{time.perf_counter() - t0:.1f}s wall]", file=sys.stderr)
    return rc


if __name__ == "__main__":
    sys.exit(main())
