"""Compare the compiled and numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--sizes 32 64 128] [--k 3] [--dim 2]

Prints the mean time per call of every kernel under both backends and the
speed-up of the compiled one.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from bosd.kernels import get_backend


def _cases(backend, d_max: int, k: int, dim: int, rng):
    log_gamma1 = np.log(rng.dirichlet(np.ones(d_max)))
    log_h = np.log(np.full(d_max, 0.05))
    log_1mh = np.log1p(-np.full(d_max, 0.05))
    log_pi1 = rng.normal(size=d_max)
    out1 = np.empty(d_max)

    joint = rng.random((k, d_max, d_max))
    joint *= np.tril(np.ones((d_max, d_max)))
    joint /= joint.sum()
    with np.errstate(divide="ignore"):
        log_gamma3 = np.log(joint)
    log_pi2 = rng.normal(size=(k, d_max))
    log_pi3 = rng.normal(size=(k, d_max, d_max))
    a = rng.dirichlet(np.ones(k), size=k)
    log_a, log_dur = np.log(a), np.log(rng.dirichlet(np.ones(d_max), size=k))
    log_init = np.log(np.full(k, 1.0 / k))
    out3, rl, res, st = np.empty((k, d_max, d_max)), np.empty(d_max), np.empty(d_max), np.empty(k)

    kappa = np.ascontiguousarray(1.0 + np.arange(d_max) * np.ones((k, 1)))
    nu = kappa + dim + 1.0
    mu = rng.normal(size=(k, d_max, dim))
    psi = np.ascontiguousarray(np.broadcast_to(np.eye(dim), (k, d_max, dim, dim)))
    prior = (np.ones(k), np.full(k, dim + 2.0), np.zeros((k, dim)), np.ascontiguousarray(np.broadcast_to(np.eye(dim), (k, dim, dim))))
    y = rng.normal(size=dim)
    out_kn = np.empty((k, d_max))
    stepper = backend.NiwRunLength(log_h, log_1mh, log_gamma1, kappa[:1].copy(), nu[:1].copy(),
                                   mu[:1].copy(), psi[:1].copy(), prior[0][:1], prior[1][:1],
                                   prior[2][:1], prior[3][:1])
    return {
        "bocpd_recursion": lambda: backend.bocpd_recursion(log_pi1, log_gamma1, log_h, log_1mh, False, out1),
        "bosd_recursion_shared": lambda: backend.bosd_recursion_shared(
            log_gamma3, log_pi2, log_a, log_dur, log_init, False, out3, rl, res, st),
        "bosd_recursion": lambda: backend.bosd_recursion(
            log_gamma3, log_pi3, log_a, log_dur, log_init, False, out3, rl, res, st),
        "niw_logpdf": lambda: backend.niw_logpdf(y, kappa, nu, mu, psi, out_kn),
        "niw_update": lambda: backend.niw_update(y, kappa.copy(), nu.copy(), mu.copy(), psi.copy(), *prior),
        "NiwRunLength.predict": lambda: stepper.predict(y, False),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    parser.add_argument("--k", type=int, default=3)
    parser.add_argument("--dim", type=int, default=2)
    parser.add_argument("--number", type=int, default=200)
    args = parser.parse_args(argv)
    compiled, python = get_backend("compiled"), get_backend("python")
    print(f"{'kernel':<24}{'D_max':>6}{'compiled us':>14}{'python us':>12}{'speed-up':>10}")
    for d_max in args.sizes:
        cases = [_cases(b, d_max, args.k, args.dim, np.random.default_rng(0)) for b in (compiled, python)]
        for name in cases[0]:
            t = [min(timeit.repeat(c[name], number=args.number, repeat=3)) / args.number * 1e6 for c in cases]
            print(f"{name:<24}{d_max:>6}{t[0]:>14.2f}{t[1]:>12.2f}{t[1] / t[0]:>10.1f}")


if __name__ == "__main__":
    main()
