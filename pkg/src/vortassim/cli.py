"""Command-line front end: simulate, observe, assimilate, verify, sweep.

Exit codes: 0 success, 1 validation/input error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig, load_config
from .dynamics import simulate_truth
from .exceptions import FilterAborted, NumericalError, ValidationError
from .filtering import FilterConfig, run_filter
from .observation import RNG_ALGORITHM, generate_observations
from .spectral import evaluate_field

logger = logging.getLogger("vortassim")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

TRUTH_DIR, OBS_DIR, ASSIM_DIR = "truth", "observations", "assimilation"


def _snapshot_indices(times, requested):
    out = []
    for t in requested:
        k = int(np.argmin(np.abs(times - t)))
        if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValidationError(f"snapshot time {t} is not on the time grid")
        out.append(k)
    return out


def _write_snapshots(directory, prefix, times, states, grid, requested, resolution):
    files = []
    for k in _snapshot_indices(times, requested):
        field_ = evaluate_field(states[k], grid, resolution)
        files.append(io.write_field(Path(directory) / "snapshots" / io.snapshot_name(prefix, times[k]), field_))
    return files


def cmd_simulate(cfg: ExperimentConfig, out: Path):
    t0 = time.perf_counter()
    grid = cfg.grid
    forcing = cfg.forcing(grid)
    traj = simulate_truth(cfg.initial_condition(grid), forcing, cfg.nu, grid, cfg.dt, cfg.T)
    elapsed = time.perf_counter() - t0
    d = out / TRUTH_DIR
    files = [io.write_trajectory(d / "trajectory.csv", traj, grid)]
    files += _write_snapshots(d, "truth", traj.times, traj.states, grid, cfg.snapshot_times, cfg.snapshot_resolution)
    io.write_manifest(
        d,
        config_hash=cfg.hash,
        stage_hash=cfg.stage_hash("simulate"),
        files=files,
        timings={"simulate": elapsed},
        extra={"metadata": _jsonable(traj.metadata)},
    )
    print(f"simulate: {len(traj)} time points, N={grid.N}, wrote {d}")
    return traj


def _load_truth(cfg, out):
    d = out / TRUTH_DIR
    io.verify_manifest(d, cfg.stage_hash("simulate"))
    return io.read_trajectory(d / "trajectory.csv", cfg.grid)


def cmd_observe(cfg: ExperimentConfig, out: Path):
    grid = cfg.grid
    traj = _load_truth(cfg, out)
    model = cfg.observation_model(grid)
    t0 = time.perf_counter()
    obs = generate_observations(traj, model, cfg.noise_amplitude, cfg.seed, literal_interval=cfg.literal_interval)
    d = out / OBS_DIR
    f = io.write_observations(d / "observations.csv", obs, grid)
    io.write_manifest(
        d,
        config_hash=cfg.hash,
        stage_hash=cfg.stage_hash("observe"),
        files=[f],
        seeds={"noise": cfg.seed, "rng": RNG_ALGORITHM},
        timings={"observe": time.perf_counter() - t0},
        extra={"noise": obs.noise, "observed_indices": [int(k) for k in obs.observed]},
    )
    print(f"observe: {obs.y.shape[0]} x {obs.y.shape[1]} observations, wrote {d}")
    return obs


def _filter_config(cfg, grid, model, assimilate):
    Q, q = cfg.bounds(grid)
    return FilterConfig(grid, cfg.diffusion(grid), model, q, Q=Q, D=cfg.forcing(grid).D,
                        assimilate=assimilate, **cfg.filter_options)


def cmd_assimilate(cfg: ExperimentConfig, out: Path, *, twin=True, assimilate=None, subdir=ASSIM_DIR):
    grid = cfg.grid
    model = cfg.observation_model(grid)
    d_obs = out / OBS_DIR
    io.verify_manifest(d_obs, cfg.stage_hash("observe"))
    obs = io.read_observations(d_obs / "observations.csv", model.observed)
    truth = _load_truth(cfg, out) if twin else None
    assimilate = cfg.assimilate if assimilate is None else assimilate
    fcfg = _filter_config(cfg, grid, model, assimilate)
    d = out / subdir
    try:
        run = run_filter(obs, fcfg, truth)
    except FilterAborted as exc:
        io.write_filter_run(d / "filter_partial.csv", exc.partial)
        raise
    files = [io.write_filter_run(d / "filter.csv", run)]
    files += _write_snapshots(d, "estimate", run.times, run.estimates, grid, cfg.snapshot_times,
                              cfg.snapshot_resolution)
    summary = _summary(run)
    io.write_manifest(
        d,
        config_hash=cfg.hash,
        stage_hash=cfg.stage_hash("assimilate"),
        files=files,
        timings={"assimilate": run.metadata.get("wall_time_s")},
        extra={"summary": summary, "filter": _jsonable(run.metadata), "Q": fcfg.Q, "q": fcfg.q},
    )
    print(
        "assimilate: final rel.err={final_rel_error:.4f} (observed modes {final_rel_error_observed:.4f}), "
        "detectability pass {detectability_pass_pct:.1f}% of checked steps, wrote {out}".format(**summary, out=d)
    )
    return run


def _summary(run):
    def last(a):
        a = a[~np.isnan(a)]
        return float(a[-1]) if a.size else float("nan")

    frac = run.detectability_pass_fraction()
    return {
        "final_rel_error": last(run.rel_error),
        "final_rel_error_observed": last(run.rel_error_observed),
        "detectability_pass_pct": 100.0 * frac if frac == frac else float("nan"),
        "steps": int(len(run.times) - 1),
    }


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)))


def cmd_verify(out: Path = None, names=None):
    from .verify import report, run_all

    results = run_all(names)
    for r in results:
        print(r.line())
    rep = _jsonable(report(results))
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "verification.json").write_text(json.dumps(rep, indent=2) + "\n", encoding="utf-8")
    return rep["passed"]


def cmd_sweep(cfg: ExperimentConfig, out: Path, param, values):
    if not (out / TRUTH_DIR / io.MANIFEST).exists():
        cmd_simulate(cfg, out)
    if not (out / OBS_DIR / io.MANIFEST).exists():
        cmd_observe(cfg, out)
    if not param.startswith("filter."):
        raise ValidationError("sweep only varies filter.* parameters (truth and observations are shared)")
    rows = []
    for v in values:
        sub = cfg.with_overrides(**{param: v})
        run = cmd_assimilate(sub, out, subdir=f"sweep/{param}={v}")
        rows.append({"param": param, "value": v, **_summary(run)})
    (out / "sweep").mkdir(parents=True, exist_ok=True)
    (out / "sweep" / "summary.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    return rows


def _parse_value(s):
    try:
        return json.loads(s)
    except json.JSONDecodeError:
        return s


def build_parser():
    p = argparse.ArgumentParser(prog="vortassim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp_, need_config=True):
        sp_.add_argument("--config", type=Path, required=need_config, help="JSON experiment config")
        sp_.add_argument("--out", type=Path, required=need_config, help="output directory")
        sp_.add_argument("--seed", type=int, help="override noise.seed")
        sp_.add_argument("--snapshot-times", type=lambda s: [float(x) for x in s.split(",") if x],
                         help="comma-separated snapshot times")

    common(sub.add_parser("simulate", help="integrate the truth trajectory"))
    common(sub.add_parser("observe", help="generate noisy partial observations from the truth"))
    a = sub.add_parser("assimilate", help="run the filter on the observations")
    common(a)
    a.add_argument("--no-assimilation", action="store_true", help="zero gain (free-running control run)")
    a.add_argument("--no-truth", action="store_true", help="do not load the truth for error metrics")
    v = sub.add_parser("verify", help="run the invariant suites")
    common(v, need_config=False)
    v.add_argument("--suite", action="append", help="run only the named suite(s)")
    s = sub.add_parser("sweep", help="assimilate for several values of one filter parameter")
    common(s)
    s.add_argument("--param", required=True, help="dotted config key, e.g. filter.q_value")
    s.add_argument("--values", required=True, help="comma-separated values")
    return p


def _load(args):
    cfg = load_config(args.config)
    over = {}
    if args.seed is not None:
        over["noise.seed"] = args.seed
    if args.snapshot_times is not None:
        over["output.snapshot_times"] = args.snapshot_times
    return cfg.with_overrides(**over) if over else cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        if args.command == "verify":
            ok = cmd_verify(args.out, args.suite)
            return EXIT_OK if ok else EXIT_VERIFY
        cfg = _load(args)
        if args.command == "simulate":
            cmd_simulate(cfg, args.out)
        elif args.command == "observe":
            cmd_observe(cfg, args.out)
        elif args.command == "assimilate":
            cmd_assimilate(cfg, args.out, twin=not args.no_truth,
                           assimilate=False if args.no_assimilation else None)
        elif args.command == "sweep":
            values = [_parse_value(x) for x in args.values.split(",") if x]
            cmd_sweep(cfg, args.out, args.param, values)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, FilterAborted) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
