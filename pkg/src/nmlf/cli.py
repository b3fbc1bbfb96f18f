"""Command-line driver.

Subcommands: train (CEGIS synthesis), verify (re-check saved weights),
export-grid (per-mode value surfaces for plotting), simulate (trajectories
plus a practical-stability report).

Exit codes are a stable scripting contract: 0 success/certified, 1 honest
negative (exhausted, violated, unstable), 2 usage or validation error. All
randomness flows from --seed; single-threaded runs with equal flags are
byte-reproducible. NMLF_LOG in {quiet, info, trace} sets verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys as _sys
from pathlib import Path

import numpy as np

from . import sim
from .benchmarks import BENCHMARKS, resolve_config
from .loss import LossConfig
from .model import ConfigError, SwitchedSystem, load_config, with_arbitrary_switching
from .net import decode_weights, encode_weights
from .train import TrainConfig, TrainingError, cegis
from .verify import VerifyConfig, certify

log = logging.getLogger("nmlf")

_LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "trace": logging.DEBUG}


def _setup_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("NMLF_LOG", "info"), logging.INFO)
    logging.basicConfig(level=level, format="%(message)s", stream=_sys.stderr)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="root seed for all randomness")
    p.add_argument("--workers", type=int, default=1, help="certifier worker threads")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=None, help="loss margin")
    p.add_argument("--alpha", type=float, default=None, help="positivity weight")
    p.add_argument("--beta", type=float, default=None, help="switching weight")
    p.add_argument("--delta", type=float, default=None, help="certifier resolution")
    p.add_argument("--hidden", type=str, default=None, help="hidden widths, e.g. 16,16")
    p.add_argument("--lr", type=float, default=None, help="learning rate")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default=None)
    p.add_argument("--steps-per-round", type=int, default=None)
    p.add_argument("--max-rounds", type=int, default=None)
    p.add_argument("--retries", type=int, default=None, help="total attempts (fresh seeds)")
    p.add_argument("--samples", type=int, default=None, help="domain sample count")
    p.add_argument("--switch-samples", type=int, default=None, help="samples per switching region")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nmlf",
        description="Synthesize and certify neural multiple Lyapunov functions "
                    "for state-dependent switched systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run CEGIS synthesis on a system config")
    t.add_argument("config", help=f"config path or benchmark name ({', '.join(BENCHMARKS)})")
    t.add_argument("--out", default="weights.json", help="weight file to write")
    t.add_argument("--report", default=None, help="CEGIS report path (default <out>.report.json)")
    _add_common(t)
    _add_train_flags(t)

    v = sub.add_parser("verify", help="certify saved weights against a config")
    v.add_argument("config")
    v.add_argument("weights")
    v.add_argument("--out", default=None, help="outcome JSON path (default stdout)")
    v.add_argument("--delta", type=float, default=None)
    _add_common(v)

    g = sub.add_parser("export-grid", help="export per-mode value surfaces on a lattice")
    g.add_argument("config")
    g.add_argument("weights")
    g.add_argument("--resolution", type=int, default=201)
    g.add_argument("--out", default="grid", help="output directory")
    _add_common(g)

    s = sub.add_parser("simulate", help="simulate trajectories under a switching policy")
    s.add_argument("config")
    s.add_argument("--policy", choices=sim.POLICY_KINDS, default="random")
    s.add_argument("--switch-prob", type=float, default=0.5, help="random policy probability")
    s.add_argument("--inits", type=int, default=20)
    s.add_argument("--horizon", type=float, default=200.0,
                   help="time span (continuous) or step count (discrete)")
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--out", default="trajectories", help="output directory")
    s.add_argument("--arbitrary-switching", action="store_true",
                   help="replace all switching regions by the whole domain")
    _add_common(s)

    return parser


def _train_config(args) -> TrainConfig:
    base = TrainConfig(seed=args.seed, workers=args.workers)
    overrides = {}
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.optimizer is not None:
        overrides["optimizer"] = args.optimizer
    if args.steps_per_round is not None:
        overrides["steps_per_round"] = args.steps_per_round
    if args.max_rounds is not None:
        overrides["max_rounds"] = args.max_rounds
    if args.retries is not None:
        overrides["retries"] = args.retries
    if args.delta is not None:
        overrides["delta"] = args.delta
    if args.samples is not None:
        overrides["n_samples"] = args.samples
    if args.switch_samples is not None:
        overrides["n_switch_samples"] = args.switch_samples
    if args.hidden is not None:
        overrides["hidden"] = tuple(int(w) for w in args.hidden.split(","))
    if overrides:
        base = TrainConfig(**{**base.__dict__, **overrides})
    return base


def _loss_config(args) -> LossConfig:
    kw = {}
    if args.epsilon is not None:
        kw["epsilon"] = args.epsilon
    if args.alpha is not None:
        kw["alpha"] = args.alpha
    if args.beta is not None:
        kw["beta"] = args.beta
    return LossConfig(**kw)


def _load(args) -> SwitchedSystem:
    return load_config(resolve_config(args.config))


def cmd_train(args) -> int:
    system = _load(args)
    tcfg = _train_config(args)
    lcfg = _loss_config(args)
    bundle, report = cegis(system, tcfg, lcfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(encode_weights(bundle), encoding="utf-8")
    report_path = Path(args.report) if args.report else out.with_suffix(out.suffix + ".report.json")
    report_path.write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True), encoding="utf-8")
    log.info("outcome=%s rounds=%d attempts=%d -> %s", report.outcome, report.rounds,
             report.attempts, out)
    return 0 if report.outcome == "certified" else 1


def cmd_verify(args) -> int:
    system = _load(args)
    bundle = decode_weights(Path(args.weights).read_text(encoding="utf-8"))
    if set(bundle.mode_ids) != set(system.mode_ids):
        raise ConfigError("/modes", f"weight modes {list(bundle.mode_ids)} do not match "
                                    f"system modes {list(system.mode_ids)}")
    vcfg = VerifyConfig(workers=args.workers, **({"delta": args.delta} if args.delta else {}))
    outcome = certify(bundle, system, vcfg)
    doc = json.dumps(outcome.to_dict(), indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(doc, encoding="utf-8")
    else:
        print(doc)
    return 0 if outcome.certified else 1


def cmd_export_grid(args) -> int:
    system = _load(args)
    if system.dim != 2:
        raise ConfigError("/state", "grid export supports 2-D systems only")
    bundle = decode_weights(Path(args.weights).read_text(encoding="utf-8"))
    if set(bundle.mode_ids) != set(system.mode_ids):
        raise ConfigError("/modes", "weight modes do not match system modes")
    res = args.resolution
    bbox = system.domain.bounding_box()
    axes = [np.linspace(b.lo, b.hi, res) for b in bbox.intervals]
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=-1)
    in_domain = system.domain.contains_batch(X)
    in_dv = system.in_verification_region_batch(X)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    mode_files = {}
    for mid in system.mode_ids:
        values = bundle[mid].value_batch(X)
        rows = []
        for r in range(res):
            cells = []
            for c in range(res):
                k = r * res + c
                cells.append(repr(float(values[k])) if in_domain[k] else "")
            rows.append(",".join(cells))
        fname = f"V_mode_{mid}.csv"
        (out_dir / fname).write_text("\n".join(rows) + "\n", encoding="utf-8")
        mode_files[str(mid)] = fname
    mask_rows = [
        ",".join(str(int(in_dv[r * res + c])) for c in range(res)) for r in range(res)
    ]
    (out_dir / "mask.csv").write_text("\n".join(mask_rows) + "\n", encoding="utf-8")
    manifest = {
        "resolution": res,
        "axes": [
            {"name": name, "min": b.lo, "max": b.hi}
            for name, b in zip(system.state_vars, bbox.intervals)
        ],
        "modes": mode_files,
        "mask": "mask.csv",
        "switch_regions": [
            {"from": i, "to": j, "box": box.to_flat()}
            for (i, j), box in system.switch_regions
        ],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True),
                                           encoding="utf-8")
    log.info("wrote %d mode grids at %dx%d to %s", len(mode_files), res, res, out_dir)
    return 0


def cmd_simulate(args) -> int:
    system = _load(args)
    if args.arbitrary_switching:
        system = with_arbitrary_switching(system)
    if args.policy == sim.RANDOM:
        policy = sim.SwitchPolicy.random(args.switch_prob, seed=args.seed)
    else:
        policy = sim.SwitchPolicy(args.policy)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    X0 = sim.sample_initial_states(system, args.inits, args.seed)
    trajectories = sim.simulate_many(system, X0, policy, args.horizon, dt=args.dt)
    report = sim.stability_from_trajectories(system, trajectories, args.horizon, args.dt, policy)
    for k, traj in enumerate(trajectories):
        sim.save_trajectory_csv(traj, out_dir / f"trajectory_{k:03d}.csv")
        sim.save_events_json(traj, out_dir / f"trajectory_{k:03d}.events.json")
    (out_dir / "stability_report.json").write_text(
        json.dumps(report.to_dict(), indent=1, sort_keys=True), encoding="utf-8"
    )
    log.info("policy=%s fraction=%.3f -> %s", policy.kind, report.fraction, out_dir)
    return 0 if report.fraction == 1.0 else 1


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "train": cmd_train,
        "verify": cmd_verify,
        "export-grid": cmd_export_grid,
        "simulate": cmd_simulate,
    }
    try:
        return handlers[args.command](args)
    except TrainingError as err:
        print(f"training aborted: {err}", file=_sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, KeyError) as err:
        # covers ConfigError, ExprError, WeightFormatError and bad flag values
        print(f"error: {err}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
