import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_minimizer
from pgsrhb.fourier import Surrogate, build_design, enumerate_basis
from pgsrhb.lasso import solve_lasso
from pgsrhb.pgsr import (MAX_FIXED, Guidance, GuidanceError, History, PgsrSampler,
                         PgsrSettings, UniformSampler, fit_guidance, minimize_on,
                         reduced_ranges, select_history, top_terms)
from pgsrhb.space import CategoricalCategory, NumericCategory, SearchSpace, random_config


def flat_space(n):
    return SearchSpace(tuple(CategoricalCategory(f"b{i}", (0, 1)) for i in range(n)))


def filled_history(sizes, n=4, seed=0):
    r = np.random.default_rng(seed)
    h = History()
    for res, k in sizes.items():
        for _ in range(k):
            h.add(res, 2 * r.integers(0, 2, n) - 1, float(r.normal()))
    return h


class TestHistory:
    def test_rejects_non_finite(self):
        h = History()
        for bad in (math.inf, math.nan):
            with pytest.raises(ValueError):
                h.add(1, [1, -1], bad)

    def test_snapshot_and_counts(self):
        h = History()
        h.add(3, [1, -1], 0.5)
        h.add(1, [-1, -1], 0.1)
        h.add(3, [1, 1], 0.7)
        assert h.counts() == {1.0: 1, 3.0: 2}
        X, y = h.snapshot(3)
        assert X.tolist() == [[1, -1], [1, 1]] and y.tolist() == [0.5, 0.7]
        assert len(h) == 3

    def test_concurrent_appends(self):
        h = History()

        def worker(k):
            for i in range(500):
                h.add(k % 3, [1, -1], float(i))
        threads = [threading.Thread(target=worker, args=(k,)) for k in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(h) == 4000


class TestSelectHistory:
    def test_examples(self):
        h = filled_history({1: 50, 3: 20, 9: 5})
        assert select_history(h, 10)[0] == 3
        assert select_history(History(), 1) is None
        assert select_history(h, 1)[0] == 9

    @settings(max_examples=40, deadline=None)
    @given(st.dictionaries(st.sampled_from([1, 3, 9, 27, 81]), st.integers(0, 12)),
           st.integers(1, 12))
    def test_linear_scan(self, sizes, T):
        h = filled_history({r: k for r, k in sizes.items() if k})
        ok = [r for r, k in sizes.items() if k >= T]
        got = select_history(h, T)
        assert (got is None) if not ok else got[0] == max(ok)


class TestMinimizer:
    def test_example(self, kernels):
        g = Surrogate((((0, 1), -2.0), ((2,), 0.5)))
        z, val = minimize_on(g, [0, 1, 2], kernels)
        assert z == (-1, -1, -1) and val == -2.5

    def test_cap(self):
        g = Surrogate(tuple(((i,), 1.0) for i in range(MAX_FIXED + 1)))
        with pytest.raises(GuidanceError):
            minimize_on(g, g.variables)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 2 ** 31), st.booleans())
    def test_global_lexicographic_minimizer(self, nJ, seed, integer_coefs):
        from pgsrhb._backend import available
        r = np.random.default_rng(seed)
        J = sorted(r.choice(30, size=nJ, replace=False).tolist())
        basis = [S for S in enumerate_basis(nJ, min(3, nJ))]
        pick = r.choice(len(basis), size=min(len(basis), 6), replace=False)
        # small integer coefficients create ties
        coef = (r.integers(-2, 3, len(pick)) if integer_coefs else r.normal(size=len(pick)))
        terms = tuple((tuple(J[i] for i in basis[j]), float(c)) for j, c in zip(pick, coef))
        z_ref, v_ref = brute_force_minimizer(terms, J)
        for k in available().values():
            z, v = minimize_on(Surrogate(terms), J, k)
            assert z == z_ref and v == pytest.approx(v_ref, abs=1e-12)


class TestFitGuidance:
    def test_planted_recovery(self):
        sp = flat_space(6)
        r = np.random.default_rng(1)
        X = np.array([random_config(sp, r) for _ in range(100)])
        y = 3 * X[:, 0] * X[:, 1] - X[:, 2]
        g = fit_guidance(X, y, sp, PgsrSettings(sparsity=2, degree=2, lam=0.5))
        assert set(g.surrogate.support) == {(0, 1), (2,)}
        assert g.J == (0, 1, 2) and len(g.z) == 3
        assert g.z[0] * g.z[1] == -1 and g.z[2] == 1

    def test_zero_fit_gives_empty_guidance(self):
        sp = flat_space(4)
        X = np.array([random_config(sp, np.random.default_rng(i)) for i in range(20)])
        g = fit_guidance(X, np.full(20, 2.0), sp, PgsrSettings())
        assert g.J == () and g.surrogate.terms == () and g.surrogate.intercept == 2.0

    def test_top_terms(self):
        basis = [(0,), (1,), (2,), (0, 1)]
        assert top_terms(basis, [1.0, -3.0, 0.0, 1.0], 3) == [1, 0, 3]
        assert top_terms(basis, [0.0, 0.5, 0.0, 0.0], 3) == [1]

    @pytest.mark.parametrize("seed", range(5))
    def test_invariants(self, seed):
        sp = SearchSpace((NumericCategory("a", 2, 2, -3), NumericCategory("b", 2, 1, -2),
                          CategoricalCategory("c", ("x", "y", "z"))))
        r = np.random.default_rng(seed)
        X = np.array([random_config(sp, r) for _ in range(80)])
        y = X[:, 0] - 2 * X[:, 1] * X[:, 4] + 0.3 * r.normal(size=80)
        g = fit_guidance(X, y, sp, PgsrSettings(sparsity=4, lam=0.5))
        assert set(g.J) == set(i for S in g.surrogate.support for i in S)
        if g.J:
            z_ref, _ = brute_force_minimizer(g.surrogate.terms, list(g.J))
            assert g.z == z_ref

    def test_psr_equivalence_with_singleton_groups(self):
        sp = flat_space(8)
        r = np.random.default_rng(3)
        X = np.array([random_config(sp, r) for _ in range(60)])
        y = 2 * X[:, 0] * X[:, 3] - X[:, 5] + 0.2 * r.normal(size=60)
        # with d=1 every column is its own group; at d=2 each pair has its own signature
        for d in (1, 2):
            st_ = PgsrSettings(sparsity=1000, degree=d, lam=0.3)
            a = fit_guidance(X, y, sp, st_, "pgsr")
            b = fit_guidance(X, y, sp, st_, "psr")
            sol = solve_lasso(y, build_design(list(X), enumerate_basis(8, d)).matrix, 0.3)
            ref = {S: c for S, c in zip(enumerate_basis(8, d), sol.coefficients) if c != 0}
            for g in (a, b):
                got = dict(g.surrogate.terms)
                assert got.keys() == ref.keys()
                assert max(abs(got[S] - ref[S]) for S in ref) <= 1e-12
            assert a.J == b.J and a.z == b.z

    def test_unknown_method(self):
        sp = flat_space(2)
        with pytest.raises(ValueError):
            fit_guidance([[1, 1]], [1.0], sp, PgsrSettings(), method="ridge")


class TestReducedRanges:
    space = SearchSpace((NumericCategory("lr", 3, 1, -6),))

    def ranges(self, J, z):
        g = Guidance(J, z, Surrogate())
        return reduced_ranges(g, self.space)["lr"]

    def test_no_fixed_bits(self):
        rg = self.ranges((), ())
        assert rg["low"] == 0.5e-6 and rg["high"] == 10.0 and rg["fixed_bits"] == 0

    def test_exponent_fixed(self):
        # exponent index 3 -> 10**-3
        rg = self.ranges((0, 1, 2), (-1, 1, 1))
        assert rg["low"] == pytest.approx(0.5e-3) and rg["high"] == pytest.approx(1e-3)

    def test_top_exponent_bit(self):
        rg = self.ranges((0,), (-1,))
        assert rg["low"] == pytest.approx(0.5e-6) and rg["high"] == pytest.approx(1e-3)

    def test_categorical(self):
        sp = SearchSpace((CategoricalCategory("c", ("a", "b", "c")),))
        g = Guidance((1,), (1,), Surrogate())
        # patterns 01 -> b and 11 -> 3 mod 3 -> a
        assert reduced_ranges(g, sp)["c"]["choices"] == ["b", "a"]


class TestSettings:
    @pytest.mark.parametrize("kw", [dict(sparsity=0), dict(degree=0), dict(reset_prob=1.5),
                                    dict(lam=0.0), dict(min_observations=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PgsrSettings(**kw)


class TestSampler:
    def fixed(self, sp, settings, J, z):
        s = PgsrSampler(sp, settings)
        g = Guidance(tuple(J), tuple(z), Surrogate())
        s.guidance = lambda history: g
        return s

    def test_uniform_without_history(self, rng):
        s = PgsrSampler(flat_space(5), PgsrSettings(min_observations=3))
        cfg, tag = s.sample(History(), rng)
        assert tag == "uniform" and cfg.shape == (5,) and s.draws == 1

    def test_reset_always(self, rng):
        sp = flat_space(6)
        s = self.fixed(sp, PgsrSettings(reset_prob=1.0), range(6), [1] * 6)
        draws = [s.sample(History(), rng) for _ in range(4000)]
        assert {t for _, t in draws} == {"pgsr-reset"}
        X = np.array([c for c, _ in draws])
        assert np.all(np.abs(X.mean(axis=0)) < 0.05)

    def test_full_restriction(self, rng):
        sp = flat_space(5)
        z = (1, -1, 1, 1, -1)
        s = self.fixed(sp, PgsrSettings(reset_prob=0.0), range(5), z)
        for _ in range(200):
            cfg, tag = s.sample(History(), rng)
            assert tuple(cfg) == z and tag == "pgsr-restricted"

    def test_reset_fraction(self):
        sp = flat_space(8)
        J, z = (1, 4, 6), (1, -1, 1)
        s = self.fixed(sp, PgsrSettings(reset_prob=0.3), J, z)
        rng = np.random.default_rng(8)
        mismatched = 0
        for _ in range(10_000):
            cfg, _ = s.sample(History(), rng)
            mismatched += any(cfg[j] != v for j, v in zip(J, z))
        frac = mismatched / 10_000
        assert 0.25 * (1 - 2 ** -len(J)) * 0.9 < frac < 0.35

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 10), st.integers(0, 1000))
    def test_restricted_agree_with_z(self, n, seed):
        r = np.random.default_rng(seed)
        J = sorted(r.choice(n, size=int(r.integers(1, n + 1)), replace=False).tolist())
        z = [int(v) for v in 2 * r.integers(0, 2, len(J)) - 1]
        s = self.fixed(flat_space(n), PgsrSettings(reset_prob=0.0), J, z)
        for _ in range(30):
            cfg, _ = s.sample(History(), r)
            assert [int(cfg[j]) for j in J] == z

    def test_caching(self, rng):
        sp = flat_space(4)
        s = PgsrSampler(sp, PgsrSettings(min_observations=10, sparsity=2))
        h = filled_history({1: 10}, n=4)
        for _ in range(5):
            s.sample(h, rng)
        assert s.fits == 1
        h.add(1, [1, 1, 1, 1], 0.0)
        s.sample(h, rng)
        assert s.fits == 2
        filled = filled_history({1: 11, 3: 10}, n=4)
        s.sample(filled, rng)
        assert s.fits == 3 and s._key == (3.0, 10)

    def test_guidance_error_falls_back(self, rng, monkeypatch):
        import pgsrhb.pgsr as mod

        def boom(*a, **k):
            raise GuidanceError("too many fixed variables")
        monkeypatch.setattr(mod, "fit_guidance", boom)
        s = PgsrSampler(flat_space(3), PgsrSettings(min_observations=2))
        cfg, tag = s.sample(filled_history({1: 3}, n=3), rng)
        assert tag == "uniform" and len(s.warnings) == 1

    def test_uniform_sampler(self):
        a = UniformSampler(flat_space(7)).sample(History(), np.random.default_rng(2))[0]
        b = random_config(flat_space(7), np.random.default_rng(2))
        assert np.array_equal(a, b)
