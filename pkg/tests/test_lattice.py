"""Polynomial lattice point sets, figures of merit, and vector search."""

import itertools
from fractions import Fraction

import numpy as np
import pytest

from cdquad.gfpoly import FieldBase, poly_from_int
from cdquad.lattice import (
    DualWeightedMerit,
    GeneratingVector,
    dual_merit_bruteforce,
    irreducible_modulus,
    plr_points,
    scramble_variance,
    search_generating_vector,
    _first_nonzero_digit_pos,
    _scramble_rho_table,
)
from cdquad.quadrature import RuleSpec, empirical_variance
from cdquad.weights import ProductWeights

F2 = FieldBase(2)
F3 = FieldBase(3)


def gv_for(b, m, q_encs):
    base = FieldBase(b)
    p = irreducible_modulus(b, m)
    return GeneratingVector(base, m, p, tuple(poly_from_int(e, base) for e in q_encs))


class TestGeneratingVector:
    def test_wrong_modulus_degree(self):
        with pytest.raises(ValueError):
            GeneratingVector(F2, 2, poly_from_int(3, F2), (poly_from_int(1, F2),))

    def test_reducible_modulus(self):
        with pytest.raises(ValueError):
            GeneratingVector(F2, 2, poly_from_int(5, F2), (poly_from_int(1, F2),))

    def test_zero_component(self):
        p = irreducible_modulus(2, 2)
        with pytest.raises(ValueError):
            GeneratingVector(F2, 2, p, (poly_from_int(0, F2),))


class TestPlrPoints:
    def test_worked_example(self):
        # b=2, m=2, p=x^2+x+1, q=(1): points 0, 1/4, 3/4, 1/2
        ps = plr_points(gv_for(2, 2, [1]))
        vals = [Fraction(int(v), 4) for v in ps.coords[:, 0]]
        assert vals == [Fraction(0), Fraction(1, 4), Fraction(3, 4), Fraction(1, 2)]

    def test_row_zero_is_origin(self):
        for b, m, q in [(2, 3, [3, 5]), (3, 2, [2, 4])]:
            ps = plr_points(gv_for(b, m, q))
            assert not ps.coords[0].any()

    @pytest.mark.parametrize("b", [2, 3])
    @pytest.mark.parametrize("m", [1, 2, 3, 4, 5, 6])
    def test_projection_regularity(self, b, m):
        # every 1-d projection is exactly {0, 1/b^m, ..., (b^m-1)/b^m}
        q = [1, min(b**m - 1, 3)] if b**m > 3 else [1]
        ps = plr_points(gv_for(b, m, q))
        for j in range(ps.s):
            assert sorted(ps.coords[:, j]) == list(range(b**m))

    @pytest.mark.parametrize("b,m", [(2, 2), (2, 3), (2, 4), (3, 2), (3, 3)])
    def test_digital_net_closure(self, b, m):
        # closed under digitwise addition mod b of coordinates
        ps = plr_points(gv_for(b, m, [1, b**m - 1]))
        rows = {tuple(int(v) for v in row) for row in ps.coords}

        def digit_add(x, y):
            out, mult = 0, 1
            for _ in range(m):
                out += ((x + y) % b) * mult
                x, y, mult = x // b, y // b, mult * b
            return out

        for r1, r2 in itertools.product(rows, repeat=2):
            assert tuple(digit_add(a, c) for a, c in zip(r1, r2)) in rows

    def test_values_match_numerators(self):
        ps = plr_points(gv_for(2, 3, [5]))
        assert np.allclose(ps.values(), ps.coords.astype(float) / 8)


class TestFirstNonzeroDigitPos:
    @pytest.mark.parametrize("b,m", [(2, 4), (3, 3)])
    def test_matches_direct_expansion(self, b, m):
        coords = np.arange(b**m, dtype=np.uint64)
        pos = _first_nonzero_digit_pos(coords, b, m)
        for v, p in zip(coords, pos):
            digs = [(int(v) // b**(m - 1 - t)) % b for t in range(m)]
            expect = next((t + 1 for t, d in enumerate(digs) if d), 0)
            assert p == expect


class TestDualWeightedMerit:
    @pytest.mark.parametrize("b,m,q", [(2, 3, [1, 5]), (2, 4, [3, 9]), (3, 2, [1, 4])])
    def test_matches_bruteforce(self, b, m, q):
        gv = gv_for(b, m, q)
        w = [0.9, 0.4]
        merit = DualWeightedMerit(b, m, w)
        running = merit.start(b**m)
        cols = plr_points(gv).coords
        for j in range(2):
            running = merit.extend(running, cols[:, j], j)
        assert float(np.mean(running) - 1.0) == pytest.approx(
            dual_merit_bruteforce(gv, w), rel=1e-10
        )


class TestSearch:
    def test_one_dim_tie_breaks_to_one(self):
        gv = search_generating_vector(1, 2, F2)
        assert gv.q[0].encode() == 1

    def test_budget_zero_all_ones(self):
        gv = search_generating_vector(3, 4, F2, budget=0)
        assert [q.encode() for q in gv.q] == [1, 1, 1]

    def test_deterministic(self):
        a = search_generating_vector(2, 5, F2, weights=ProductWeights.polynomial(2.0))
        b = search_generating_vector(2, 5, F2, weights=ProductWeights.polynomial(2.0))
        assert [q.encode() for q in a.q] == [q.encode() for q in b.q]

    def test_cbc_beats_all_ones_merit(self):
        w = [1.0, 1.0]
        gv = search_generating_vector(2, 4, F2)
        assert dual_merit_bruteforce(gv, w) <= dual_merit_bruteforce(
            gv_for(2, 4, [1, 1]), w
        ) + 1e-12

    def test_cbc_fast_agrees_with_slow_path(self):
        # the FFT correlation path must pick the same vector as the direct
        # candidate loop under the same merit
        w = ProductWeights.polynomial(2.0)
        fast = search_generating_vector(2, 4, F2, weights=w)
        cw = [max(w.singleton(j + 1), 1e-12) for j in range(2)]
        slow = search_generating_vector(
            2, 4, F2, merit=DualWeightedMerit(2, 4, cw, rates=[2.0, 2.0])
        )
        assert [q.encode() for q in fast.q] == [q.encode() for q in slow.q]


class TestScrambleVariance:
    def test_rho_table_diagonal_is_b2_variance(self):
        for alpha in (1, 2):
            tab = _scramble_rho_table(4, alpha)
            full = tab[(4,) * alpha]
            assert full == pytest.approx(1 / 180, rel=1e-12)

    def test_model_matches_empirical(self):
        # the exact covariance model must predict the measured scrambled-rule
        # variance of B2 on the same net
        m, alpha = 8, 2
        gv = search_generating_vector(alpha, m, F2, alpha=alpha)
        model = scramble_variance(gv, alpha)
        spec = RuleSpec(kind="plr", u=(1,), n=2**m, seed=5, alpha=alpha, gv=gv)
        est = empirical_variance(
            spec, lambda x: x[..., 0] ** 2 - x[..., 0] + 1 / 6, 800
        )
        assert abs(model - est.variance) <= 5 * est.stderr_variance

    def test_search_beats_all_ones(self):
        m, alpha = 6, 2
        chosen = search_generating_vector(alpha, m, F2, alpha=alpha)
        ones = gv_for(2, m, [1] * alpha)
        assert scramble_variance(chosen, alpha) <= scramble_variance(ones, alpha)

    def test_nonnegative(self):
        # the merit is an exact variance, so it can never go negative
        for enc in (1, 3, 7, 11):
            gv = gv_for(2, 4, [enc, (enc * 5) % 15 + 1])
            assert scramble_variance(gv, 2) >= -1e-18

    def test_weights_scale_single_coordinate(self):
        gv = gv_for(2, 5, [3, 9])
        v1 = scramble_variance(gv, 2, [1.0])
        v4 = scramble_variance(gv, 2, [4.0])
        # one output coordinate: variance of sqrt(g) * B2-rule is linear in g
        assert v4 == pytest.approx(4 * v1, rel=1e-9)

    def test_base3_rejected(self):
        gv = gv_for(3, 2, [1, 2])
        with pytest.raises(ValueError):
            scramble_variance(gv, 2)


class TestIrreducibleModulus:
    def test_degree_and_irreducibility(self):
        from cdquad.gfpoly import is_irreducible

        for b in (2, 3):
            for m in range(1, 8):
                p = irreducible_modulus(b, m)
                assert p.degree == m
                assert is_irreducible(p)
