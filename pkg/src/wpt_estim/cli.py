"""Command-line entry point: ``wpt-estim run | presets | solve``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import InfeasibleError, InvalidArgumentError
from .joint import algorithm1, algorithm2, verify_certificates
from .model import watts_to_dbm
from .sim.runner import run_experiment, trial_channels
from .sim.spec import PRESETS, ExperimentSpec, load_spec, preset


def _resolve_spec(arg: str) -> ExperimentSpec:
    path = Path(arg)
    if path.exists():
        return load_spec(path)
    if arg in PRESETS:
        return preset(arg)
    raise InvalidArgumentError(f"{arg!r} is neither a spec file nor a preset ({', '.join(PRESETS)})")


def _cmd_run(args) -> int:
    spec = _resolve_spec(args.spec)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if changes:
        spec = spec.with_(**changes)
    result = run_experiment(spec, threads=args.threads)
    csv_path, meta_path = result.write(args.out)
    bad = [r for r in result.rows if r["row_type"] == "trial" and r["status"] != "ok"]
    print(f"wrote {csv_path} and {meta_path}")
    if bad:
        print(f"{len(bad)} trial rows did not finish cleanly (see the status column)")
    return 0


def _cmd_presets(args) -> int:
    for name, spec in PRESETS.items():
        sweep = ", ".join(str(v) for v in spec.sweep)
        net = " ".join(f"{k}={v}" for k, v in spec.network.items())
        print(f"{name:10s} {spec.kind:20s} {spec.sweep_field}=[{sweep}] {net} trials={spec.trials}")
    return 0


def _print_report(rep) -> None:
    print(f"  certificates ({rep.which}): {'ok' if rep.ok else 'FAILED'}")
    if rep.nu is not None:
        print(f"    nu                 {rep.nu:.6g}")
    print(f"    beta               {rep.beta:.6g}")
    print(f"    lambdas            {np.array2string(np.asarray(rep.lambdas), precision=4)}")
    print(f"    rank W / bound     {rep.w_rank} / {rep.w_rank_bound}")
    print(f"    Q rank-1 residual  {rep.q_rank_residual:.3e}")
    print(f"    complementarity    {rep.complementarity:.3e}")
    print(f"    duality gap        {rep.gap:.3e}")
    if rep.power_tightness is not None:
        print(f"    power tightness    {rep.power_tightness:.3e}")
    print(f"    inactive sensors   {list(rep.inactive_sensors)}")


def _cmd_solve(args) -> int:
    spec = ExperimentSpec("solve", "custom", (args.nr,), trials=1, seed=args.seed,
                          network={"n_s": args.ns, "sensing_vars": args.sensing_var})
    cfg = spec.network_config(args.nr)
    ch = trial_channels(spec, cfg, 0)
    if args.problem == "mse":
        tr = algorithm1(cfg, ch, n_starts=args.starts)
        which = "sdr1"
    else:
        tr = algorithm2(cfg, ch, 1.0 / args.gamma_inv, n_starts=args.starts)
        which = "sdr2"
    print(f"{tr.algorithm}: status={tr.status} iterations={tr.iterations} converged={tr.converged}")
    if tr.design is None:
        return 1
    print(f"  mse                {tr.mse:.9g}")
    print(f"  fc power           {tr.fc_power:.9g} W ({watts_to_dbm(tr.fc_power):.4f} dBm)")
    for k, (h, t) in enumerate(zip(tr.harvested_power, tr.transmit_power)):
        print(f"  sensor {k + 1:2d}  harvested {watts_to_dbm(h):9.4f} dBm  transmit {watts_to_dbm(t):9.4f} dBm")
    sol = tr.last_solution
    if sol is not None and sol.optimal:
        _print_report(verify_certificates(sol, which))
        if args.dump:
            from .sdp import io
            io.dump(args.dump, sol.problem, sol)
            print(f"  relaxation written to {args.dump}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wpt-estim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a spec file or preset name")
    r.add_argument("spec", help="path to a .toml/.json spec, or a preset name")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--threads", type=int, default=1, help="worker processes")
    r.set_defaults(func=_cmd_run)

    ps = sub.add_parser("presets", help="list the built-in experiments")
    ps.set_defaults(func=_cmd_presets)

    s = sub.add_parser("solve", help="solve one seeded instance and print its certificates")
    s.add_argument("--problem", choices=("mse", "power"), default="mse")
    s.add_argument("--ns", type=int, default=5)
    s.add_argument("--nr", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sensing-var", type=float, default=0.1)
    s.add_argument("--gamma-inv", type=float, default=0.03, help="MSE target for --problem power")
    s.add_argument("--starts", type=int, default=1)
    s.add_argument("--dump", help="write the last relaxation and its solution as JSON")
    s.set_defaults(func=_cmd_solve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidArgumentError, InfeasibleError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
