"""Command line entry point.

Exit status: 0 on success, 2 when a run finishes but an acceptance threshold
fails, 1 on errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, RunManifest, config_hash, dump_config, parse_config
from .errors import JumpCtlError

OK, ERROR, FAILED = 0, 1, 2
DEFAULT_VALUES = {"T": (0.25, 0.5, 1.0, 1.5, 2.0), "lambda": (0.5, 1.0, 2.0, 4.0), "tau": (0.25, 0.5, 1.0)}


def _floats(text: str):
    return tuple(float(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jumpctl", description="Jump-diffusion control toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--out", type=Path, help="output directory (overrides the config)")
    common.add_argument("--seed", type=int)
    common.add_argument("--n-paths", type=int, dest="n_paths")
    common.add_argument("--dt", type=float)
    common.add_argument("--threads", type=int, help="worker threads; JUMPCTL_THREADS takes precedence")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a bundle and export it")
    s.add_argument("--policy", default="sign")
    s.add_argument("--T", type=float)
    s.add_argument("--csv", action="store_true", help="also write the node table as CSV")

    s = sub.add_parser("sweep", parents=[common], help="second-moment sweeps over T, lambda or tau")
    s.add_argument("--axis", choices=("T", "lambda", "tau"))
    s.add_argument("--values", type=_floats)
    s.add_argument("--policies", type=lambda v: tuple(x for x in v.split(",") if x))

    s = sub.add_parser("smp-check", parents=[common], help="maximum-principle checks")
    s.add_argument("--outer-paths", type=int, dest="outer_paths")
    s.add_argument("--inner-paths", type=int, dest="inner_paths")
    s.add_argument("--probes", type=int, default=0, help="regression paths for the adjoint probe table")

    s = sub.add_parser("mollify-check", parents=[common], help="mollification convergence")
    s.add_argument("--n-values", type=lambda v: tuple(int(x) for x in v.split(",")), dest="n_values")
    s.add_argument("--policy", default="zero")

    sub.add_parser("transform-check", parents=[common], help="transform diagnostics")

    s = sub.add_parser("diagnostics", parents=[common], help="density scan and Beta identity")
    s.add_argument("--beta-check", nargs="*", dest="beta_check", metavar="KEY=VALUE",
                   help="e.g. n=1 t=4; runs only the gap-moment check")
    s.add_argument("--policy", default="zero")
    s.add_argument("--times", type=_floats)
    return p


def load_config(args) -> RunConfig:
    cfg = parse_config(args.config.read_text()) if args.config else RunConfig()
    sim = cfg.sim
    if args.seed is not None:
        sim = replace(sim, seed=args.seed)
    if args.n_paths is not None:
        sim = replace(sim, n_paths=args.n_paths)
    if args.dt is not None:
        sim = replace(sim, dt=args.dt)
    cfg = replace(cfg, sim=sim)
    if args.out is not None:
        cfg = replace(cfg, output=replace(cfg.output, directory=str(args.out)))
    # re-validate after overrides
    return parse_config(dump_config(cfg))


def _threads(args):
    env = os.environ.get("JUMPCTL_THREADS")
    if env:
        return int(env)
    return args.threads


def _write_csv(path: Path, rows, header):
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})


def cmd_simulate(args, cfg, out, threads):
    from .experiments import policy_by_name
    from .io import write_bundle_binary, write_bundle_csv
    from .simulate import simulate_bundle

    model = cfg.model.surplus()
    T = args.T if args.T is not None else cfg.sim.T
    sim = cfg.sim_config(T=T, dt=min(cfg.sim.dt, T))
    policy = policy_by_name(model, args.policy)
    b = simulate_bundle(model.drift(), policy, model.jumps(), sim, model.x0, workers=threads)
    h = config_hash(cfg)
    write_bundle_binary(b, out / "bundle.bin", h)
    if args.csv:
        write_bundle_csv(b, out / "bundle.csv")
    from .stats import MonteCarloEstimate

    m1, m2 = MonteCarloEstimate.from_samples(b.x_T), MonteCarloEstimate.from_samples(b.x_T ** 2)
    summary = {"policy": policy.name, "T": T, "n_paths": b.n_paths, "mean_x_T": m1.mean, "mean_x_T_se": m1.std_err,
               "second_moment": m2.mean, "second_moment_se": m2.std_err}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return OK, {"simulate": sim.seed}


def cmd_sweep(args, cfg, out, threads):
    from .experiments import non_decreasing_within_ci, policy_by_name, separated_below
    from .insurance import sweep_lambda, sweep_T, sweep_tau
    from .svg import emit_svg

    e = cfg.experiment
    axis = args.axis or e.get("axis", "T")
    values = args.values or e.get("values") or DEFAULT_VALUES[axis]
    names = args.policies or e.get("policies") or (("sign", "linear", "threshold") if axis == "T" else ("sign",))
    model = cfg.model.surplus()
    policies = [policy_by_name(model, n, e.get("convention", "stabilizing")) for n in names]
    sim = cfg.sim_config(T=max(max(values), cfg.sim.dt) if axis == "T" else cfg.sim.T)
    if axis == "T":
        res = sweep_T(model, policies, values, sim, workers=threads)
    elif axis == "lambda":
        res = sweep_lambda(model, policies[0], values, sim, T=cfg.sim.T, workers=threads)
    else:
        res = sweep_tau(model, policies[0], values, sim, T=cfg.sim.T, workers=threads)
    _write_csv(out / f"sweep_{axis}.csv", res.rows(), ["axis_value", "policy", "mean", "ci95", "n"])
    series = res.series()
    emit_svg([[(v, est.mean, est.ci95) for v, est in pts] for pts in series.values()], list(series),
             out / f"sweep_{axis}.svg", title=f"E[X_T^2] against {axis}", xlabel=axis, ylabel="E[X_T^2]")
    status = OK
    if axis == "T" and {"sign", "linear", "threshold"} <= set(names):
        Tm = max(values)
        s, lin, thr = (res.estimate(Tm, n) for n in ("sign", "linear", "threshold"))
        status = OK if separated_below(s, lin) and separated_below(lin, thr) else FAILED
    elif axis != "T":
        status = OK if non_decreasing_within_ci([est for _, est in series[names[0]]]) else FAILED
    for r in res.rows():
        print(f"{axis}={r['axis_value']:g} {r['policy']}: {r['mean']:.6g} ± {r['ci95']:.2g}")
    return status, {"sweep": sim.seed}


def cmd_smp_check(args, cfg, out, threads):
    from .experiments import smp_check

    e = cfg.experiment
    model = cfg.model.surplus()
    rep = smp_check(model, T=cfg.sim.T, dt=cfg.sim.dt, outer_paths=args.outer_paths or e.get("outer_paths", 200),
                    inner_paths=args.inner_paths or e.get("inner_paths", 500), times=e.get("times"),
                    band=e.get("band", 0.05), seed=cfg.sim.seed, regression_paths=args.probes)
    (out / "smp_check.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    _write_csv(out / "smp_check.csv", rep.per_time,
               ["t", "n", "mean_abs_p", "mean_se", "violation_fraction", "sign_frequency", "sign_n",
                "raw_sign_frequency"])
    print(json.dumps({k: v for k, v in rep.to_dict().items() if k != "adjoint_probe_table"}, sort_keys=True))
    return (OK if rep.passed() else FAILED), {"outer": cfg.sim.seed, "inner": cfg.sim.seed + 1}


def cmd_mollify_check(args, cfg, out, threads):
    from .experiments import mollify_check, policy_by_name

    model = cfg.model.surplus()
    n_values = args.n_values or tuple(cfg.experiment.get("n_values", (4, 16, 64, 256)))
    rep = mollify_check(model, policy_by_name(model, args.policy), cfg.sim_config(), n_values)
    _write_csv(out / "mollify_check.csv", rep.rows(), ["n", "coupling_error", "drift_error_integral", "ci95",
                                                       "drift_ci95"])
    for r in rep.rows():
        print(f"n={r['n']}: coupling {r['coupling_error']:.4g}, drift error {r['drift_error_integral']:.4g}")
    ok = rep.coupling_non_increasing and (16 not in n_values or 64 not in n_values or rep.drift_error_decreases())
    return (OK if ok else FAILED), {"coupling": cfg.sim.seed, "bundle": cfg.sim.seed + 1}


def cmd_transform_check(args, cfg, out, threads):
    from .experiments import transform_check

    row = transform_check(cfg.model.surplus())
    flat = {"model": cfg.model.kind, "xi": " ".join(f"{v:g}" for v in row["xi"]),
            "alpha": " ".join(f"{v:g}" for v in row["alpha"]), "c": row["c"], "min_gprime": row["min_gprime"],
            "roundtrip_error": row["roundtrip_error"]}
    _write_csv(out / "transform_check.csv", [flat], list(flat))
    print(",".join(str(v) for v in flat.values()))
    ok = row["min_gprime"] > 0 and row["roundtrip_error"] < 1e-10
    return (OK if ok else FAILED), {}


def _beta_pairs(tokens):
    if not tokens:
        return [(1, 4.0), (2, 1.0), (3, 1.0)]
    kv = dict(tok.split("=", 1) for tok in tokens)
    unknown = set(kv) - {"n", "t"}
    if unknown:
        raise ValueError(f"unknown --beta-check key {sorted(unknown)[0]!r}")
    return [(int(kv.get("n", 1)), float(kv.get("t", 1.0)))]


def cmd_diagnostics(args, cfg, out, threads):
    from .diagnostics import density_sup_scan, last_jump_gap_moment, snapshot_states
    from .experiments import policy_by_name
    from .rng import Stream

    e = cfg.experiment
    pairs = _beta_pairs(args.beta_check)
    n_mc = int(e.get("n_mc", 100_000))
    model = cfg.model.surplus()
    rows = []
    ok = True
    for i, (n, t) in enumerate(pairs):
        # given N_t = n the epochs do not depend on the intensity
        chk = last_jump_gap_moment(1.0, t, n, n_mc, Stream(cfg.sim.seed, i))
        rows.append({"n": n, "t": t, "mc": chk.mc_estimate.mean, "analytic": chk.analytic,
                     "se": chk.mc_estimate.std_err})
        ok &= chk.passed
        print(f"n={n} t={t:g}: mc {chk.mc_estimate.mean:.6g} (se {chk.mc_estimate.std_err:.2g}), "
              f"analytic {chk.analytic:.6g}")
    _write_csv(out / "beta_check.csv", rows, ["n", "t", "mc", "analytic", "se"])
    seeds = {"beta": cfg.sim.seed}
    if args.beta_check is None:
        times = args.times or e.get("times") or (0.05, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0)
        sim = cfg.sim_config(T=max(times), dt=min(cfg.sim.dt, min(times)))
        snaps = snapshot_states(model.drift(), policy_by_name(model, args.policy), model.jumps(), sim, model.x0,
                                times, workers=threads)
        scan = density_sup_scan(snaps, times)
        _write_csv(out / "density_scan.csv", scan.rows(), ["t", "sup_density", "scaled", "bandwidth"])
        print(f"density band ratio {scan.band_ratio:.3f}")
        ok &= scan.band_ratio <= 5.0
        seeds["density"] = sim.seed
    return (OK if ok else FAILED), seeds


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "smp-check": cmd_smp_check,
    "mollify-check": cmd_mollify_check,
    "transform-check": cmd_transform_check,
    "diagnostics": cmd_diagnostics,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = load_config(args)
        out = Path(cfg.output.directory)
        out.mkdir(parents=True, exist_ok=True)
        threads = _threads(args)
        status, seeds = COMMANDS[args.command](args, cfg, out, threads)
        manifest = RunManifest(config_hash(cfg), __version__, round(time.perf_counter() - start, 3), seeds,
                               args.command)
        (out / "manifest.json").write_text(manifest.to_json() + "\n")
        (out / "config.toml").write_text(dump_config(cfg))
        return status
    except (JumpCtlError, ValueError, OSError) as exc:
        module = type(exc).__module__.replace("jumpctl.", "")
        print(f"jumpctl {args.command}: {module}.{type(exc).__name__}: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
