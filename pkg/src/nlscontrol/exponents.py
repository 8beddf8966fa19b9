"""Critical-regularity exponents and Holder-exponent plans, in exact rationals.

For nonlinearity degree ``alpha + 1`` in dimension ``n`` the regularity
threshold splits into three cases (quadratic, cubic-type, high degree); the
scaling-critical index is ``s_c = n/2 - 2/alpha``.  The plan data selects
Holder exponents ``(p1, q1, p2, q2)`` satisfying the coupling relations

    3/p1 + (alpha-1)/p2 = 1,   3/q1 + (alpha-1)/q2 = 1,

and the balanced choice makes ``3*sigma1 = sigma2`` equal to the threshold.
Everything is validated in fraction arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "critical_exponents",
    "exponent_plan",
    "ExponentPlan",
    "table_rows",
    "TABLE_PAIRS",
]

TABLE_PAIRS = ((2, 3), (2, 4), (2, 5), (3, 4))


def _s_threshold(alpha: int, n: int) -> Fraction:
    if alpha == 1:
        return Fraction(n, 2) - 1
    if alpha == 2:
        if n == 1:
            # the quadratic-case formula needs n >= 2; in one dimension the
            # scaling index is negative and the usable threshold is 0
            return max(Fraction(n, 2) - Fraction(2, alpha), Fraction(0))
        return Fraction(n, 2) - Fraction(3, 4) - Fraction(1, 4 * (n - 1))
    return Fraction(n, 2) - Fraction(2, alpha)


def _s_besov(alpha: int, n: int, s_c: Fraction) -> Fraction:
    if n == 1:
        return max(s_c, Fraction(0))
    if n == 2:
        return s_c
    if n == 3:
        return max(s_c, Fraction(3, 4))
    return max(s_c, Fraction(3 * n, n + 4))


def critical_exponents(alpha: int, n: int):
    """Return ``(s_alpha_n, s_b, s_c)`` as exact fractions."""
    if alpha < 1 or n < 1:
        raise ValueError("need alpha >= 1 and n >= 1")
    s_c = Fraction(n, 2) - Fraction(2, alpha)
    return _s_threshold(alpha, n), _s_besov(alpha, n, s_c), s_c


@dataclass(frozen=True)
class ExponentPlan:
    alpha: int
    n: int
    s_alpha_n: Fraction
    s_b: Fraction
    s_c: Fraction
    p1: Fraction
    q1: Fraction
    p2: Fraction
    q2: Fraction
    sigma1: Fraction
    sigma2: Fraction
    r1: Fraction
    r2: Fraction
    b_hint: Fraction

    def verify(self):
        """Exact constraint checks; raises AssertionError on violation."""
        a, n = self.alpha, self.n
        if a >= 2:
            assert 3 / self.p1 + (a - 1) / self.p2 == 1
            assert 3 / self.q1 + (a - 1) / self.q2 == 1
            assert 3 / self.r1 + (a - 1) / self.r2 == n + 2
        else:
            assert 3 / self.p1 == 1 and 3 / self.q1 == 1
        assert Fraction(0) < self.b_hint < Fraction(1, 2)
        if a >= 3:
            # admissibility window of the high-degree case
            assert self.p1 >= 4 and self.p2 >= 4
            assert 0 < 1 / self.q1 <= Fraction(1, 2) - 1 / self.p1
            assert 0 < 1 / self.q2 <= Fraction(1, 2) - 1 / self.p2
            if a <= 4:
                assert self.p1 <= 3 / (1 - Fraction(a - 1, 4))
            assert self.p1 < 3 * a
            assert 3 * self.sigma1 == self.sigma2 == self.s_c
        elif a == 2:
            assert 0 < 1 / self.p1 <= 1 / self.q1 <= Fraction(1, 2)
            assert Fraction(1, 2) <= 1 / self.p1 + 1 / self.q1 <= 1
            assert 0 < 1 / self.p2 <= Fraction(1, 4)
            assert 0 <= 1 / self.q2 <= Fraction(1, 2) - 1 / self.p2
            assert 3 * self.sigma1 == self.sigma2 == self.s_alpha_n
        else:
            assert self.sigma1 == Fraction(n - 2, 6)
            assert self.sigma2 == 3 * self.sigma1 == self.s_alpha_n
        return True


def exponent_plan(alpha: int, n: int) -> ExponentPlan:
    """Balanced Holder-exponent selection for the multilinear estimate."""
    if alpha < 1 or n < 2:
        raise ValueError("need alpha >= 1 and n >= 2")
    s_an, s_b, s_c = critical_exponents(alpha, n)
    if alpha >= 3:
        p1 = Fraction(6)
        p2 = Fraction(2 * (alpha - 1))
        q1_inv = Fraction(1, 3) * (1 + Fraction(2, n * alpha)) - Fraction(1, 3 * n)
        q1 = 1 / q1_inv
        q2_inv = Fraction(2, n * (alpha - 1)) * (Fraction(1, 2) - Fraction(1, alpha))
        q2 = 1 / q2_inv
        r2 = Fraction(alpha, 2)
        r1 = 1 / (2 / p1 + n / q1)
        sigma2 = s_c
        sigma1 = sigma2 / 3
        lower = Fraction(0)
    elif alpha == 2:
        p1 = Fraction(4)
        p2 = Fraction(4)
        q1 = 3 * (1 + Fraction(1, 4 * n - 5))
        q2 = Fraction(4 * (n - 1))
        r1 = 1 / (2 / p1 + n / q1)
        r2 = 1 / (2 / p2 + n / q2)
        sigma1 = (n - 2) * (Fraction(1, 2) - 1 / q1)
        sigma2 = Fraction(n, 2) - Fraction(3, 4) - Fraction(1, 4 * (n - 1))
        # n = 2 degenerates to the balanced p = q = 4 choice, where the
        # first interpolation branch applies and any b in (0, 1/2) works
        lower = Fraction(0) if n == 2 else 1 - 1 / p1 - 1 / q1
    else:
        p1 = q1 = Fraction(3)
        p2 = q2 = Fraction(4)  # inert: the (alpha-1) couplings vanish
        r1 = 1 / (2 / p1 + n / q1)
        r2 = Fraction(alpha, 2)
        sigma1 = Fraction(n - 2, 6)
        sigma2 = 3 * sigma1
        lower = Fraction(1, 3)
    b_hint = (lower + Fraction(1, 2)) / 2
    plan = ExponentPlan(
        alpha=alpha,
        n=n,
        s_alpha_n=s_an,
        s_b=s_b,
        s_c=s_c,
        p1=p1,
        q1=q1,
        p2=p2,
        q2=q2,
        sigma1=sigma1,
        sigma2=sigma2,
        r1=r1,
        r2=r2,
        b_hint=b_hint,
    )
    plan.verify()
    return plan


def table_rows():
    """The four (alpha, n) rows where the Besov threshold exceeds scaling."""
    rows = []
    for alpha, n in TABLE_PAIRS:
        s_an, s_b, s_c = critical_exponents(alpha, n)
        rows.append({"alpha": alpha, "n": n, "s_b": s_b, "s_alpha_n": s_an, "s_c": s_c})
    return rows
