#!/usr/bin/env python3
"""Benchmark the hierarchy right-hand side: numba kernel vs numpy twin.

Run:  python benchmarks/bench_rhs.py [--depth 6] [--n-exp 4] [--repeat 20]

The numba path is what `SB2Q_FORCE_NUMPY` turns off; both paths are timed
here on identical inputs and cross-checked for agreement.
"""

import argparse
import time

import numpy as np

from spinboson2q._kernels import _rhs_numba, _rhs_numpy
from spinboson2q.accel import HAS_NUMBA
from spinboson2q.bath import BathSpec, correlation_expansion
from spinboson2q.config import build_config
from spinboson2q.heom import _mode_factors, _qdiag_by_mode
from spinboson2q.hierarchy import build_hierarchy
from spinboson2q.qops import build_system_hamiltonian


def timeit(fn, repeat):
    fn()  # warm-up / compile
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--depth", type=int, default=6)
    parser.add_argument("--n-exp", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    cfg = build_config(preset="WWW")
    h_sys = build_system_hamiltonian(cfg).astype(complex)
    exp1 = correlation_expansion(cfg.bath1, args.n_exp, "pade")
    exp2 = correlation_expansion(cfg.bath2, args.n_exp, "pade")
    h = build_hierarchy(exp1, exp2, args.depth)
    print(f"hierarchy: {h.n_ados} auxiliary operators "
          f"({h.n_modes} modes, depth {args.depth})")

    rng = np.random.default_rng(0)
    y = rng.standard_normal((h.n_ados, 4, 4)) + 1j * rng.standard_normal((h.n_ados, 4, 4))
    y = np.ascontiguousarray(y)
    out_a = np.empty_like(y)
    out_b = np.empty_like(y)
    upf, dnf = _mode_factors(h, False)
    common = (y, h_sys, _qdiag_by_mode(h), h.coefficients, h.up, h.down, upf, dnf, h.damping)

    t_numpy = timeit(lambda: _rhs_numpy(out_b, *common), args.repeat)
    print(f"numpy : {t_numpy * 1e3:8.2f} ms per evaluation")
    if HAS_NUMBA:
        t_numba = timeit(lambda: _rhs_numba(out_a, *common), args.repeat)
        print(f"numba : {t_numba * 1e3:8.2f} ms per evaluation  "
              f"(speedup {t_numpy / t_numba:.2f}x)")
        scale = np.max(np.abs(out_a))
        print(f"agreement: max|numba - numpy| = {np.max(np.abs(out_a - out_b)) / scale:.2e} (relative)")
    else:
        print("numba unavailable or disabled (SB2Q_FORCE_NUMPY); numpy path only")


if __name__ == "__main__":
    main()
