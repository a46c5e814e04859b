import io
import random

import numpy as np
import pytest

from ratnets.fields import COMPLEX
from ratnets.geometry import (build_moment_matrix,
                              census, census_to_csv, enumerate_architectures,
                              expected_dim, fiber_upper_bound, filling_binary,
                              filling_shallow, gf_rank, jacobian_rank_float,
                              jacobian_rank_mod_p, numerical_rank,
                              rank_test_membership)
from ratnets.network import (Architecture, Weights, ambient_dim, forward_recursive,
                             param_count)
from ratnets.poly import HomPoly, monomials


class TestGfRank:
    def test_small_known_ranks(self):
        p = 101
        assert gf_rank([[1, 2], [2, 4]], p) == 1
        assert gf_rank([[1, 0], [0, 1]], p) == 2
        assert gf_rank([], p) == 0
        assert gf_rank([[0, 0, 0]], p) == 0

    def test_random_rank_matches_float(self):
        rng = np.random.default_rng(0)
        p = 2147483647
        for _ in range(10):
            r = rng.integers(1, 5)
            a = rng.integers(0, 50, size=(6, r)) @ rng.integers(0, 50, size=(r, 7))
            assert gf_rank([[int(v) for v in row] for row in a], p) == np.linalg.matrix_rank(a)


class TestExpectedDim:
    @pytest.mark.parametrize("dims,want", [((3, 3, 3, 3), 22), ((2, 3, 4, 3), 24),
                                           ((4, 3, 2, 2, 3), 22), ((2, 2, 2, 3, 2, 1), 14),
                                           ((2, 2, 4, 2, 2, 1), 17), ((2, 2, 1), 5)])
    def test_reference_rows(self, dims, want):
        assert expected_dim(Architecture(dims)) == want

    def test_clamp_and_boundary(self):
        arch = Architecture((2, 2, 2, 3, 2, 1))
        assert fiber_upper_bound(arch) == 14
        assert ambient_dim(arch) == 15
        assert expected_dim(arch) == 14
        # at the filling boundary the two quantities coincide exactly
        arch2 = Architecture((2, 5, 1))
        assert fiber_upper_bound(arch2) == ambient_dim(arch2) == expected_dim(arch2) == 11


class TestJacobianRank:
    def test_tiny_filling_case(self):
        rep = jacobian_rank_mod_p(Architecture((2, 2, 1)), seed=3)
        assert rep.jacobian_rank == 5
        assert rep.ambient_dim == 5
        assert rep.param_count == 6

    def test_matches_float_svd_on_small_archs(self):
        for dims in [(2, 2, 1), (3, 3, 1), (2, 2, 2, 1)]:
            a = Architecture(dims)
            assert jacobian_rank_mod_p(a, seed=1).jacobian_rank == jacobian_rank_float(a, seed=1)

    def test_rank_bounded_by_fiber_dimension(self):
        rng = random.Random(5)
        for dims in [(2, 3, 2), (3, 2, 2, 1), (2, 2, 3, 2)]:
            a = Architecture(dims)
            rep = jacobian_rank_mod_p(a, seed=rng.randrange(10000))
            assert rep.jacobian_rank <= fiber_upper_bound(a)
            assert rep.jacobian_rank <= min(param_count(a), ambient_dim(a))

    def test_resampling_stability(self):
        a = Architecture((2, 3, 2, 1))
        r1 = jacobian_rank_mod_p(a, seed=11, samples=1).jacobian_rank
        r2 = jacobian_rank_mod_p(a, seed=999, samples=1).jacobian_rank
        assert r1 == r2

    def test_prime_validation(self):
        with pytest.raises(ValueError):
            jacobian_rank_mod_p(Architecture((2, 2, 1)), p=1009)  # too small
        with pytest.raises(ValueError):
            jacobian_rank_mod_p(Architecture((2, 2, 1)), p=2 ** 31)  # composite


class TestFilling:
    def test_shallow_cases(self):
        assert filling_shallow(2, 5, 1) == type(filling_shallow(2, 5, 1))(True, True, False)
        f = filling_shallow(3, 3, 1)
        assert (f.params_feasible, f.variety_filling, f.manifold_filling) == (False, False, False)
        assert param_count(Architecture((3, 3, 1))) == 12
        assert ambient_dim(Architecture((3, 3, 1))) == 16
        t = filling_shallow(1, 4, 2)
        assert (t.params_feasible, t.variety_filling, t.manifold_filling) == (True, True, True)

    def test_binary_cases(self):
        f = filling_binary(4, 3)
        assert (f.params_feasible, f.variety_filling) == (True, False)
        f = filling_binary(5, 1)
        assert (f.params_feasible, f.variety_filling) == (True, True)
        f = filling_binary(3, 3)
        assert (f.params_feasible, f.variety_filling) == (False, False)
        f = filling_binary(2, 7)
        assert (f.params_feasible, f.variety_filling) == (True, True)


def on_model_tuple(d0, d2, seed):
    w = Weights.random(Architecture((d0, 2, d2)), COMPLEX, seed=seed)
    t = forward_recursive(w)
    return list(t.numerators), t.denominator


def random_ambient_tuple(d0, d1, d2, rng):
    nums = [HomPoly(COMPLEX, d0, d1 - 1,
                    {e: complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
                     for e in monomials(d0, d1 - 1)}) for _ in range(d2)]
    den = HomPoly(COMPLEX, d0, d1,
                  {e: complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
                   for e in monomials(d0, d1)})
    return nums, den


class TestMomentMatrix:
    def test_layout_matches_stated_pattern(self):
        # (3,2,1): first column numerator coefficients, then the symmetric
        # block with doubled diagonal
        rng = random.Random(7)
        nums, den = random_ambient_tuple(3, 2, 1, rng)
        mm = build_moment_matrix(nums, den, (3, 2, 1))
        assert mm.array.shape == (3, 4)
        for i in range(3):
            e_i = tuple(1 if t == i else 0 for t in range(3))
            assert mm.array[i, 0] == complex(nums[0].coefficient(e_i))
            for j in range(3):
                e = [0, 0, 0]
                e[i] += 1
                e[j] += 1
                mult = 2 if i == j else 1
                assert mm.array[i, 1 + j] == mult * complex(den.coefficient(tuple(e)))

    def test_on_model_rank_two(self):
        for seed in range(10):
            nums, den = on_model_tuple(4, 3, seed)
            mm = build_moment_matrix(nums, den, (4, 2, 3))
            assert numerical_rank(mm.array) == 2

    def test_ambient_rank_exceeds_two(self):
        rng = random.Random(8)
        for _ in range(10):
            nums, den = random_ambient_tuple(4, 2, 3, rng)
            mm = build_moment_matrix(nums, den, (4, 2, 3))
            assert numerical_rank(mm.array) >= 3

    def test_perturbed_on_model_rejected(self):
        nums, den = on_model_tuple(5, 2, 3)
        bumped = dict(den.terms)
        key = next(iter(bumped))
        bumped[key] = bumped[key] + 1e-2
        den2 = HomPoly(COMPLEX, 5, 2, bumped)
        assert rank_test_membership(nums, den, (5, 2, 2)).ok
        assert not rank_test_membership(nums, den2, (5, 2, 2)).ok

    def test_wide_hidden_flagged_necessary_only(self):
        w = Weights.random(Architecture((3, 3, 1)), COMPLEX, seed=2)
        t = forward_recursive(w)
        res = rank_test_membership(list(t.numerators), t.denominator, (3, 3, 1))
        assert res.ok
        assert res.necessary_only
        assert bool(res)

    def test_factorization_reproduces_matrix(self):
        # on-model matrix equals (column-swapped W1^T) @ [W2^T | W1]
        w = Weights.random(Architecture((4, 2, 3)), COMPLEX, seed=9)
        nums, den = list(forward_recursive(w).numerators), forward_recursive(w).denominator
        mm = build_moment_matrix(nums, den, (4, 2, 3))
        W1 = np.array(w.mats[0], dtype=complex)
        W2 = np.array(w.mats[1], dtype=complex)
        left = np.stack([W1[1], W1[0]], axis=1)       # rows (a_2i, a_1i)
        right = np.concatenate([W2.T, W1], axis=1)    # 2 x (d2 + d0)
        assert np.max(np.abs(mm.array - left @ right)) < 1e-10

    def test_dimension_claim_for_width_two(self):
        for (n, m) in [(2, 2), (3, 1), (3, 3)]:
            rep = jacobian_rank_mod_p(Architecture((n, 2, m)), seed=5)
            assert rep.jacobian_rank == 2 * (n + m) - 1


class TestCensus:
    def test_enumeration_722(self):
        assert len(enumerate_architectures(30, 5)) == 722

    def test_enumeration_order_and_membership(self):
        archs = enumerate_architectures(8, 2)
        dims = [a.dims for a in archs]
        assert dims == sorted(dims, key=lambda d: (len(d), d))
        assert (2, 2, 1) in dims
        assert all(sum(d[i] * d[i + 1] for i in range(len(d) - 1)) <= 8 for d in dims)

    def test_small_census_rows(self):
        reports = census(8, 2, seed=0)
        by_arch = {r.arch: r for r in reports}
        assert by_arch[(2, 2, 1)].jacobian_rank == 5
        assert all(r.status == "ok" for r in reports)
        assert all(r.match for r in reports)

    def test_workers_do_not_change_output(self):
        a = io.StringIO()
        b = io.StringIO()
        census_to_csv(census(8, 2, seed=3, workers=1), a)
        census_to_csv(census(8, 2, seed=3, workers=2), b)

        def strip_runtime(text):
            # every field except wall-clock runtime is deterministic
            import csv as _csv
            return [row[:6] + row[7:] for row in _csv.reader(io.StringIO(text))]

        assert strip_runtime(a.getvalue()) == strip_runtime(b.getvalue())

    def test_timeout_is_recorded_not_fatal(self):
        reports = census(12, 3, seed=0, timeout_s=1e-9)
        assert all(r.status == "timeout" and r.jacobian_rank is None for r in reports)

    def test_csv_columns(self):
        buf = io.StringIO()
        census_to_csv(census(6, 2, seed=0), buf)
        header = buf.getvalue().splitlines()[0]
        assert header == "arch,jacobian_rank,ambient_dim,param_count,conjectured_dim,match,runtime_s,status"
