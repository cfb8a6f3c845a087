"""Compare the compiled and pure-Python kernels on PGSR-sized workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from pgsrhb._backend import available
from pgsrhb.fourier import build_design, enumerate_basis, group_columns
from pgsrhb.lasso import GroupedProblem, solve
from pgsrhb.objectives import random_sparse
from pgsrhb.space import NumericCategory, SearchSpace, random_config


def lasso_problem(n_obs=300, seed=0):
    sp = SearchSpace(tuple(NumericCategory(f"h{i}", 3, 2, -4) for i in range(4)))
    obj = random_sparse(sp.total_bits, 10, 2, seed, noise=0.5)
    r = np.random.default_rng(seed)
    X = np.array([random_config(sp, r) for _ in range(n_obs)])
    y = np.array([obj(x, 1.0) for x in X])
    basis = enumerate_basis(sp.total_bits, 2)
    dm = build_design(list(X), basis)
    dm.column_groups = group_columns(basis, sp.index_groups())
    return GroupedProblem.from_design(dm, y, 1.0)


def parity_problem(nbits=20, terms=10, seed=0):
    r = np.random.default_rng(seed)
    masks = np.array([(1 << int(a)) | (1 << int(b))
                      for a, b in r.integers(0, nbits, size=(terms, 2))], dtype=np.uint64)
    return masks, r.normal(size=terms), nbits


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    impls = available()
    prob = lasso_problem()
    masks, coefs, nbits = parity_problem()
    rows = []
    for name, k in sorted(impls.items()):
        t_bcd = min(timeit.repeat(lambda: solve(prob, kernels=k), number=1,
                                  repeat=args.repeat))
        t_min = min(timeit.repeat(lambda: k.minimize_parity_poly(masks, coefs, nbits),
                                  number=1, repeat=args.repeat))
        rows.append((name, t_bcd, t_min))
    print(f"group lasso: {prob.design.shape[0]} x {prob.design.shape[1]} design, "
          f"{len(prob.groups)} blocks; parity minimization over 2^{nbits} assignments")
    print(f"{'backend':<8} {'bcd_solve (s)':>14} {'minimize (s)':>13}")
    for name, a, b in rows:
        print(f"{name:<8} {a:>14.4f} {b:>13.4f}")
    if len(rows) == 2:
        (_, ca, cb), (_, pa, pb) = rows
        print(f"speedup  {pa / ca:>13.1f}x {pb / cb:>12.1f}x")


if __name__ == "__main__":
    main()
