"""Benchmark the compiled kernels against the pure-Python fallback.

Run with ``python -m semalg.benchmark``.  Times three workloads: canonical
codes over all 4-node graphs, exact integer ranks of Jacobian draws, and
RICF fits on a fixed problem.
"""
from __future__ import annotations

import random
import time

import numpy as np

from ._kernels import _pure, compiled_available
from .graphs import MixedGraph, _perm_tables, enumerate_acyclic_digits, graph_from_digits
from .equivalence import jacobian_at
from .halftrek import ParamPair, draw_integer_params, exact_sigma
from .fitting import sample_cov_from_data, sample_data


def _time(fn, *args) -> float:
    t0 = time.perf_counter()
    fn(*args)
    return time.perf_counter() - t0


def _codes_workload(impl, digit_list, src, flip):
    for d in digit_list:
        impl.min_code_over_perms(d, src, flip)


def _rank_workload(impl, mats):
    for m in mats:
        impl.bareiss_rank(m)


def _ricf_workload(impl, problem, repeats):
    s, n_samples, pa, sib, lam0, om0 = problem
    for _ in range(repeats):
        impl.ricf_core(s, n_samples, pa, sib, lam0, om0, 1e-8, 1000, False)


def main() -> int:
    impls = [("python", _pure)]
    if compiled_available():
        from ._kernels import _core

        impls.append(("compiled", _core))
    else:
        print("compiled extension not built; benchmarking fallback only")

    digit_list = list(enumerate_acyclic_digits(4))
    src, flip = _perm_tables(4)

    rng = random.Random(0)
    mats = []
    for d in digit_list[:4000]:
        g = graph_from_digits(4, d)
        if not g.directed:
            continue
        lam, om = draw_integer_params(g, rng)
        sigma = exact_sigma(g, lam, om)
        mats.append(jacobian_at(g, lam, sigma))

    inst = MixedGraph.from_edges(4, directed=[(0, 1), (1, 2), (2, 3)], bidirected=[(1, 2), (0, 3)])
    lam = np.zeros((4, 4))
    for (u, v) in inst.directed:
        lam[u, v] = 0.6
    om = np.eye(4)
    for (u, v) in inst.bidirected:
        om[u, v] = om[v, u] = 0.3
        om[u, u] = om[v, v] = 1.3
    data = sample_data(inst, ParamPair(lam, om), 5000, seed=1)
    cov = sample_cov_from_data(data, "abcd")
    pa = [sorted(inst.parents(v)) for v in range(4)]
    sib = [sorted(inst.siblings(v)) for v in range(4)]
    problem = (cov.s, 5000, pa, sib, np.zeros((4, 4)), np.diag(np.diag(cov.s)))

    workloads = [
        (f"canonical codes ({len(digit_list)} graphs)", _codes_workload, (digit_list, src, flip)),
        (f"integer rank ({len(mats)} matrices)", _rank_workload, (mats,)),
        ("ricf fits (200 repeats)", _ricf_workload, (problem, 200)),
    ]

    print(f"{'workload':<36} " + " ".join(f"{name:>12}" for name, _ in impls) + "  speedup")
    for label, fn, args in workloads:
        times = []
        for _, impl in impls:
            times.append(_time(fn, impl, *args))
        cells = " ".join(f"{t:>11.3f}s" for t in times)
        speedup = f"{times[0] / times[-1]:.1f}x" if len(times) > 1 else "-"
        print(f"{label:<36} {cells}  {speedup}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
