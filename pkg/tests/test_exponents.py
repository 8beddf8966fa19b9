from fractions import Fraction as F

import pytest

from nlscontrol.exponents import (
    TABLE_PAIRS,
    critical_exponents,
    exponent_plan,
    table_rows,
)

# frozen threshold table for the four pairs where s_b > s_c
TABLE1 = {
    (2, 3): (F(3, 4), F(5, 8), F(1, 2)),
    (2, 4): (F(3, 2), F(7, 6), F(1)),
    (2, 5): (F(5, 3), F(27, 16), F(3, 2)),
    (3, 4): (F(3, 2), F(4, 3), F(4, 3)),
}


class TestCriticalExponents:
    @pytest.mark.parametrize("pair", TABLE_PAIRS)
    def test_table_values(self, pair):
        s_an, s_b, s_c = critical_exponents(*pair)
        assert (s_b, s_an, s_c) == TABLE1[pair]

    def test_three_case_formula(self):
        for n in range(1, 7):
            assert critical_exponents(1, n)[0] == F(n, 2) - 1
            for alpha in range(3, 7):
                assert critical_exponents(alpha, n)[0] == F(n, 2) - F(2, alpha)
        for n in range(2, 7):
            assert critical_exponents(2, n)[0] == F(n, 2) - F(3, 4) - F(1, 4 * (n - 1))

    def test_scaling_index(self):
        for alpha in range(1, 7):
            for n in range(1, 7):
                assert critical_exponents(alpha, n)[2] == F(n, 2) - F(2, alpha)

    def test_threshold_vs_scaling(self):
        # s_{alpha,n} = s_c for alpha >= 3, strictly above for alpha in {1,2}
        for n in range(2, 7):
            for alpha in range(3, 7):
                s_an, _, s_c = critical_exponents(alpha, n)
                assert s_an == s_c
            s1, _, c1 = critical_exponents(1, n)
            assert s1 > c1
            s2, _, c2 = critical_exponents(2, n)
            if n == 2:
                assert s2 == c2  # the quadratic 2-D case is scaling-critical
            else:
                assert s2 > c2

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            critical_exponents(0, 2)
        with pytest.raises(ValueError):
            critical_exponents(2, 0)

    def test_rows_helper(self):
        rows = table_rows()
        assert len(rows) == 4
        assert rows[0]["s_b"] == F(3, 4)


class TestExponentPlan:
    def test_quadratic_case(self):
        p = exponent_plan(2, 3)
        assert p.q1 == 3 * (1 + F(1, 4 * 3 - 5)) == F(24, 7)
        assert p.p1 == 4 and p.q2 == 8
        assert p.sigma2 == F(5, 8) == p.s_alpha_n
        assert 3 * p.sigma1 == p.sigma2

    def test_high_degree_case(self):
        p = exponent_plan(3, 2)
        assert p.p1 == 6
        assert p.r2 == F(3, 2)
        assert p.sigma2 == F(1, 3) == p.s_c
        assert 3 * p.sigma1 == p.sigma2

    def test_linear_case(self):
        p = exponent_plan(1, 2)
        assert p.p1 == p.q1 == 3
        assert p.sigma1 == 0
        assert F(1, 3) < p.b_hint < F(1, 2)

    @pytest.mark.parametrize("alpha", range(1, 7))
    @pytest.mark.parametrize("n", range(2, 7))
    def test_exact_coupling_relations(self, alpha, n):
        p = exponent_plan(alpha, n)
        assert p.verify()
        if alpha >= 2:
            assert 3 / p.p1 + (alpha - 1) / p.p2 == 1
            assert 3 / p.q1 + (alpha - 1) / p.q2 == 1
            assert 3 / p.r1 + (alpha - 1) / p.r2 == n + 2

    def test_threshold_consistency(self):
        # the balanced value sigma2 equals the regularity threshold
        for alpha in range(1, 7):
            for n in range(2, 7):
                p = exponent_plan(alpha, n)
                assert p.sigma2 == p.s_alpha_n

    def test_rejects_dimension_one(self):
        with pytest.raises(ValueError):
            exponent_plan(2, 1)
