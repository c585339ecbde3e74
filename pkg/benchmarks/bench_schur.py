"""Compare the compiled and numpy Schur-complement kernels.

Kernel timings use the constraint stacks that the MSE relaxation actually
produces (real-embedded, so blocks are 2n x 2n). The end-to-end timing runs
``algorithm1`` in two subprocesses, one with ``WPT_ESTIM_PURE_PYTHON=1``.

    python3 benchmarks/bench_schur.py [--repeat 200] [--no-e2e]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from wpt_estim.joint import build_sdr1
from wpt_estim.model import NetworkConfig, optimal_filter
from wpt_estim.sdp import _schur_py
from wpt_estim.sdp.kernels import sparsity_pattern
from wpt_estim.sdp.problem import realify
from wpt_estim.sim.geometry import draw_channels, sample_geometry, trial_rng

try:
    from wpt_estim.sdp import _schur
except ImportError:
    _schur = None

E2E = """
import time
from wpt_estim.joint import algorithm1
from wpt_estim.model import NetworkConfig
from wpt_estim.sdp import BACKEND
from wpt_estim.sim.geometry import draw_channels, sample_geometry, trial_rng
from wpt_estim.sim.spec import TABLE_I
t = time.perf_counter()
for trial in range({trials}):
    rng = trial_rng(0, trial)
    cfg = NetworkConfig(n_s={ns}, n_r={nr}, **TABLE_I)
    ch = draw_channels(cfg.n_r, sample_geometry(cfg.n_s, rng), rng)
    algorithm1(cfg, ch)
print(BACKEND, (time.perf_counter() - t) / {trials})
"""


def block_stacks(ns, nr):
    rng = trial_rng(0, 0)
    cfg = NetworkConfig(n_s=ns, n_r=nr, sensing_vars=0.1)
    ch = draw_channels(nr, sample_geometry(ns, rng), rng)
    prob = build_sdr1(cfg, ch, optimal_filter(cfg, ch, np.ones(ns)))
    out = {}
    for b in prob.blocks:
        mats = []
        for c in prob.constraints:
            C = c.coeffs.get(b.name)
            mats.append(realify(np.asarray(C)) if C is not None else np.zeros((2 * b.dim, 2 * b.dim)))
        A = np.ascontiguousarray(np.stack(mats))
        # a well-conditioned symmetric positive definite scaling point
        X = rng.standard_normal(A.shape[1:])
        W = np.ascontiguousarray(X @ X.T / A.shape[1] + np.eye(A.shape[1]))
        out[b.name] = (A, W)
    return out


def bench_kernels(repeat):
    print(f"{'case':24s} {'block':>5s} {'m x n':>9s} {'compiled us':>12s} {'numpy us':>10s} {'speedup':>8s}")
    for ns, nr in [(2, 2), (5, 5), (7, 2), (5, 20), (10, 5), (20, 20)]:
        for name, (A, W) in block_stacks(ns, nr).items():
            pat = sparsity_pattern(A)
            M1 = np.zeros((A.shape[0],) * 2)
            M2 = np.zeros_like(M1)
            t_py = min(timeit.repeat(lambda: _schur_py.schur_block(A, pat, W, M2), number=repeat, repeat=3))
            line = f"n_s={ns:2d} n_r={nr:2d}{'':11s} {name:>5s} {A.shape[0]:3d}x{A.shape[1]:<5d}"
            if _schur is None:
                print(line, f"{'n/a':>12s} {1e6 * t_py / repeat:10.1f}")
                continue
            t_c = min(timeit.repeat(lambda: _schur.schur_block(A, pat, W, M1), number=repeat, repeat=3))
            # both accumulate the same number of times, so the sums must agree
            assert np.allclose(M1, M2, rtol=1e-10, atol=1e-12 * np.abs(M2).max())
            print(line, f"{1e6 * t_c / repeat:12.1f} {1e6 * t_py / repeat:10.1f} {t_py / t_c:8.2f}")


def bench_e2e(ns, nr, trials):
    print(f"\nalgorithm1 end to end, n_s={ns} n_r={nr}, mean seconds over {trials} seeded runs")
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("WPT_ESTIM_PURE_PYTHON", None)
        if pure:
            env["WPT_ESTIM_PURE_PYTHON"] = "1"
        out = subprocess.run([sys.executable, "-c", E2E.format(ns=ns, nr=nr, trials=trials)],
                             env=env, capture_output=True, text=True, check=True)
        print("  " + out.stdout.strip())


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--repeat", type=int, default=200)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--no-e2e", action="store_true")
    args = p.parse_args(argv)
    bench_kernels(args.repeat)
    if not args.no_e2e:
        for ns, nr in [(5, 5), (10, 20)]:
            bench_e2e(ns, nr, args.trials)


if __name__ == "__main__":
    main()
