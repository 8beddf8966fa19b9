"""Dirichlet boundary control on the rectangle by the explicit moment method.

The boundary-controlled solution with control trace equal to the normal
derivative of a backward Dirichlet free wave has explicit sine moments:

    u_q(t) = -(2/pi)^n sum_p v_p Phi_t(|p|^2, |q|^2) I(g, p, q),
    Phi_t(a, b) = (exp(-i a t) - exp(-i b t)) / (b - a),  Phi_t(a,a) = i t e^{-iat},

where ``I(g,p,q)`` integrates the smooth controller ``g`` against the two
normal-derivative traces over the boundary.  The time-T snapshot of this
map is the moment operator ``S``; steering ``0 -> u_T`` amounts to a dense
solve ``S v0 = u_T`` followed by the trace synthesis of ``h``.

The smooth controller is a product of one-axis cutoffs ``rho`` stored as a
finite cosine series, so every boundary integral reduces to closed-form
overlaps (no quadrature anywhere in the assembly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lattice import (
    LatticeError,
    ModeLattice,
    SpectralField,
    sobolev_norm,
    unimodular_phases,
)
from .signals import BoundaryTraceSignal, FaceTrace, face_id

__all__ = [
    "SmoothController",
    "SMatrix",
    "MomentPropagator",
    "IllConditionedSystemError",
    "build_smooth_controller",
    "face_integral",
    "assemble_S",
    "evolve_moments",
    "dirichlet_control",
    "convex_weight",
    "PolynomialVectorField",
    "linear_multiplier",
    "convex_multiplier",
    "multiplier_identity_residual",
    "isomorphism_ratio_table",
    "moment_time_kernel",
]


class IllConditionedSystemError(RuntimeError):
    def __init__(self, cond: float):
        super().__init__(f"moment operator numerically singular: cond={cond:.3e}")
        self.cond = cond


# ---------------------------------------------------------------------------
# smooth Dirichlet controller
# ---------------------------------------------------------------------------


def _smoothstep_coeffs(order: int) -> np.ndarray:
    """Polynomial S(x) with S(0)=0, S(1)=1 and `order` flat derivatives."""
    m = order
    coeffs = np.zeros(2 * m + 2)
    for k in range(m + 1):
        c = math.comb(m + k, k) * math.comb(2 * m + 1, m - k) * (-1.0) ** k
        coeffs[m + 1 + k] = c
    return coeffs  # ascending powers


def _cos_poly_integral(poly: np.ndarray, a: float, b: float, m: int) -> float:
    """Exact integral of ``P(t) cos(m t)`` over ``[a, b]`` (ascending coeffs)."""
    if m == 0:
        p = np.polynomial.Polynomial(poly).integ()
        return float(p(b) - p(a))
    # I_c(e) = int t^e cos(mt), I_s(e) = int t^e sin(mt), by parts
    emax = len(poly) - 1
    Ic = np.zeros(emax + 1)
    Is = np.zeros(emax + 1)
    sa, ca = math.sin(m * a), math.cos(m * a)
    sb, cb = math.sin(m * b), math.cos(m * b)
    Ic[0] = (sb - sa) / m
    Is[0] = (ca - cb) / m
    for e in range(1, emax + 1):
        Ic[e] = (b**e * sb - a**e * sa) / m - (e / m) * Is[e - 1]
        Is[e] = (a**e * ca - b**e * cb) / m + (e / m) * Ic[e - 1]
    return float(np.dot(poly, Ic))


@dataclass
class SmoothController:
    """Product cutoff g(x) = prod_i rho(x_i) with rho a finite cosine series.

    ``rho`` equals 1 on ``[0, eps/4]``, falls to 0 across ``[eps/4, eps/2]``
    along a smoothstep of the stated order and vanishes beyond.  The cosine
    representation makes every odd derivative vanish at the face edges
    exactly, and makes the boundary overlaps closed-form.
    """

    epsilon: float
    order: int
    cosine_coeffs: np.ndarray
    faces: tuple = ()  # faces where g > 0, as (axis, side) pairs

    def rho(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        m = np.arange(len(self.cosine_coeffs))
        return np.cos(np.multiply.outer(t, m)) @ self.cosine_coeffs

    def rho_exact(self, t) -> np.ndarray:
        """Piecewise reference cutoff (plateau / smoothstep / zero)."""
        t = np.asarray(t, dtype=float)
        lo, hi = self.epsilon / 4.0, self.epsilon / 2.0
        sigma = np.clip((t - lo) / (hi - lo), 0.0, 1.0)
        step = np.polynomial.Polynomial(_smoothstep_coeffs(self.order))(sigma)
        return 1.0 - step

    def weighted_cos_integral(self, ell: int) -> float:
        """Exact ``int_0^pi rho(t) cos(ell t) dt`` from the cosine series."""
        r = self.cosine_coeffs
        if ell >= len(r):
            return 0.0
        return math.pi * float(r[ell]) * (1.0 if ell == 0 else 0.5)

    def sine_overlap_matrix(self, N: int) -> np.ndarray:
        """W[p-1, q-1] = int_0^pi rho sin(p x) sin(q x) dx, p,q = 1..N."""
        W = np.empty((N, N))
        for p in range(1, N + 1):
            for q in range(p, N + 1):
                val = 0.5 * (
                    self.weighted_cos_integral(q - p)
                    - self.weighted_cos_integral(q + p)
                )
                W[p - 1, q - 1] = W[q - 1, p - 1] = val
        return W

    @classmethod
    def constant(cls, dimension: int) -> "SmoothController":
        """g identically 1 on the whole boundary (test controller)."""
        all_faces = tuple((ax, side) for ax in range(dimension) for side in (0, 1))
        return cls(
            epsilon=math.pi,
            order=0,
            cosine_coeffs=np.array([1.0]),
            faces=all_faces,
        )


def build_smooth_controller(
    epsilon: float,
    transition: int = 3,
    dimension: int = 1,
    tol: float = 1e-9,
    max_modes: int = 2048,
) -> SmoothController:
    """Cosine-series cutoff matching the plateau and vanishing conditions.

    The number of cosine modes is grown until the series tracks the exact
    piecewise smoothstep within ``tol`` in the sup norm; the plateau checks
    of the definition then hold to better than 1e-8.
    """
    if not 0.0 < epsilon < math.pi:
        raise ValueError(f"epsilon must lie in (0, pi), got {epsilon}")
    if transition < 1:
        raise ValueError("transition order must be >= 1")
    lo, hi = epsilon / 4.0, epsilon / 2.0
    step = _smoothstep_coeffs(transition)
    # polynomial rho on [lo, hi] in the physical variable t
    width = hi - lo
    comp = np.polynomial.Polynomial([-lo / width, 1.0 / width])
    rho_poly = 1.0 - np.polynomial.Polynomial(step)(comp)

    R = 64
    probe = np.linspace(0.0, math.pi, 4097)
    while True:
        coeffs = np.zeros(R + 1)
        for m in range(R + 1):
            plateau = math.sin(m * lo) / m if m else lo
            trans = _cos_poly_integral(rho_poly.coef, lo, hi, m)
            total = plateau + trans
            coeffs[m] = total / math.pi * (1.0 if m == 0 else 2.0)
        ctrl = SmoothController(
            epsilon=epsilon,
            order=transition,
            cosine_coeffs=coeffs,
            faces=tuple((ax, 0) for ax in range(dimension)),
        )
        err = float(np.max(np.abs(ctrl.rho(probe) - ctrl.rho_exact(probe))))
        if err < tol or R >= max_modes:
            return ctrl
        R *= 2


# ---------------------------------------------------------------------------
# boundary overlaps and the moment operator
# ---------------------------------------------------------------------------

_FACE_SIDES = {"0": 0, "pi": 1}


def parse_face_id(face: str) -> tuple:
    try:
        coord, side = face.split("=")
        axis = int(coord.lstrip("x")) - 1
        return axis, _FACE_SIDES[side]
    except (ValueError, KeyError):
        raise LatticeError(f"unknown face id {face!r}") from None


def _normal_derivative_sign(p_i: int, side: int) -> float:
    """Value of d/dnu applied to sin(p_i x_i) at the face, transverse part split off."""
    if side == 0:
        return -float(p_i)
    return float(p_i) * (-1.0) ** p_i


def face_integral(g: SmoothController, p, q, face: str) -> float:
    """I_face(g, p, q) over one face; real by construction."""
    p = tuple(int(v) for v in np.atleast_1d(p))
    q = tuple(int(v) for v in np.atleast_1d(q))
    if len(p) != len(q):
        raise LatticeError("p and q must have the same dimension")
    axis, side = parse_face_id(face)
    n = len(p)
    if not 0 <= axis < n:
        raise LatticeError(f"face {face!r} does not exist in dimension {n}")
    rho_at = float(g.rho(0.0 if side == 0 else math.pi))
    val = (
        _normal_derivative_sign(p[axis], side)
        * _normal_derivative_sign(q[axis], side)
        * rho_at
    )
    for j in range(n):
        if j == axis:
            continue
        val *= 0.5 * (
            g.weighted_cos_integral(abs(p[j] - q[j]))
            - g.weighted_cos_integral(p[j] + q[j])
        )
    return val


def moment_time_kernel(psq, qsq, t: float) -> np.ndarray:
    """Phi_t(|p|^2, |q|^2), the closed-form time integral of the moments.

    Uses the diagonal-shell convention ``i t exp(-i a t)`` on ``|p| = |q|``
    and a series branch for nearly-equal real arguments.
    """
    a = np.asarray(psq, dtype=float)
    b = np.asarray(qsq, dtype=float)
    theta = b - a
    out = np.empty(np.broadcast(a, b).shape, dtype=np.complex128)
    integral = (
        np.array_equal(a, np.round(a))
        and np.array_equal(b, np.round(b))
    )
    if integral:
        phase_a = unimodular_phases(np.broadcast_to(np.round(a).astype(np.int64), out.shape), t)
        phase_b = unimodular_phases(np.broadcast_to(np.round(b).astype(np.int64), out.shape), t)
    else:
        phase_a = np.exp(-1j * a * t)
        phase_b = np.exp(-1j * b * t)
    phase_a = np.broadcast_to(phase_a, out.shape)
    phase_b = np.broadcast_to(phase_b, out.shape)
    theta = np.broadcast_to(theta, out.shape)
    small = np.abs(theta * t) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(small, 0.0, (phase_a - phase_b) / np.where(small, 1.0, theta))
    if np.any(small):
        # (1 - e^{-iz}) / theta = t (i + z/2 - i z^2/6 - ...), z = theta t
        z = np.broadcast_to(theta * t, out.shape)[small]
        corr = phase_a[small] * t * (1j + z / 2.0 - 1j * z**2 / 6.0)
        out = out.copy()
        out[small] = corr
    return out


@dataclass
class SMatrix:
    """Moment operator over the sine lattice, rows q, columns p."""

    matrix: np.ndarray
    T: float
    lattice: ModeLattice
    controller: SmoothController


class MomentPropagator:
    """Caches I(g, p, q) for a lattice; evolves moments at any time."""

    def __init__(self, g: SmoothController, lattice: ModeLattice):
        if lattice.basis != "sine":
            raise LatticeError("the moment method lives on the sine lattice")
        self.g = g
        self.lattice = lattice
        self.overlap = self._assemble_overlap()

    def _assemble_overlap(self) -> np.ndarray:
        lat = self.lattice
        n, N = lat.dimension, lat.truncation
        idx = lat.indices
        W = self.g.sine_overlap_matrix(N)
        rho0 = float(self.g.rho(0.0))
        rho_pi = float(self.g.rho(math.pi))
        total = np.zeros((lat.size, lat.size))
        for axis, side in self.g.faces:
            rho_at = rho0 if side == 0 else rho_pi
            if rho_at == 0.0:
                continue
            ki = idx[:, axis].astype(float)
            if side == 0:
                sgn = -ki
            else:
                sgn = ki * (-1.0) ** idx[:, axis]
            contrib = np.outer(sgn, sgn) * rho_at
            for j in range(n):
                if j == axis:
                    continue
                contrib = contrib * W[np.ix_(idx[:, j] - 1, idx[:, j] - 1)]
            total += contrib
        return total  # total[q_row? ] symmetric in (p, q)

    def s_matrix(self, T: float) -> SMatrix:
        lat = self.lattice
        phi = moment_time_kernel(lat.ksq[None, :], lat.ksq[:, None], T)
        mat = -((2.0 / math.pi) ** lat.dimension) * phi * self.overlap
        return SMatrix(mat, T, lat, self.g)

    def evolve(self, v0: SpectralField, t: float) -> SpectralField:
        if v0.lattice != self.lattice:
            raise LatticeError("state lives on a different lattice")
        if t == 0.0:
            return SpectralField.zeros(self.lattice)
        return SpectralField(self.lattice, self.s_matrix(t).matrix @ v0.coeffs)


def assemble_S(g: SmoothController, T: float, lattice: ModeLattice) -> SMatrix:
    if T <= 0:
        raise ValueError("T must be positive")
    return MomentPropagator(g, lattice).s_matrix(T)


def evolve_moments(
    v0: SpectralField,
    g: SmoothController,
    t: float,
    propagator: MomentPropagator | None = None,
) -> SpectralField:
    if propagator is None:
        propagator = MomentPropagator(g, v0.lattice)
    return propagator.evolve(v0, t)


# ---------------------------------------------------------------------------
# control trace and the dense solve
# ---------------------------------------------------------------------------


class DirichletTraceGenerator:
    """Closed-form control trace h = normal derivative of the backward wave."""

    def __init__(self, v0: SpectralField, controller: SmoothController):
        self.v0 = v0
        self.controller = controller

    def face_values(self, face: str, points: np.ndarray, t: float) -> np.ndarray:
        """Trace values on one face at transverse points (shape (pts, n-1))."""
        lat = self.v0.lattice
        axis, side = parse_face_id(face)
        idx = lat.indices
        phases = unimodular_phases(lat.ksq, t)
        amp = self.v0.coeffs * phases
        sgn = np.array(
            [_normal_derivative_sign(int(k[axis]), side) for k in idx]
        )
        vals = amp * sgn
        pts = np.atleast_2d(points)
        if pts.size == 0:
            return np.array([np.sum(vals)])
        trans_axes = [j for j in range(lat.dimension) if j != axis]
        prod = np.ones((pts.shape[0], lat.size))
        for col, j in enumerate(trans_axes):
            prod *= np.sin(np.outer(pts[:, col], idx[:, j].astype(float)))
        return prod @ vals


def dirichlet_control(
    u_T: SpectralField,
    S: SMatrix,
    g: SmoothController,
    T: float,
    s: float | None = None,
    samples_per_unit: int = 256,
    cond_limit: float = 1e12,
):
    """Steer 0 -> u_T with the boundary trace of a backward Dirichlet wave.

    Returns ``(v0, trace_signal, achieved, residual)``; the paper-side
    regularity guarantee applies for s in [-1, 1/2), recorded as metadata
    only (the truncated solve works for any s).
    """
    if u_T.lattice != S.lattice:
        raise LatticeError("target lives on a different lattice than S")
    if abs(T - S.T) > 1e-12:
        raise ValueError("time horizon does not match the assembled S matrix")
    cond = np.linalg.cond(S.matrix)
    if not np.isfinite(cond) or cond > cond_limit:
        raise IllConditionedSystemError(float(cond))
    v0 = SpectralField(S.lattice, np.linalg.solve(S.matrix, u_T.coeffs))

    gen = DirichletTraceGenerator(v0, g)
    steps = max(2, int(round(samples_per_unit * T)))
    tg = np.linspace(0.0, T, steps + 1)
    lat = S.lattice
    faces = []
    for axis, side in g.faces:
        fid = face_id(axis, side)
        if lat.dimension == 1:
            pts = np.empty((1, 0))
        else:
            G = 2 * lat.truncation + 2
            line = np.linspace(0.0, math.pi, G + 1)
            mesh = np.meshgrid(*([line] * (lat.dimension - 1)), indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.array([gen.face_values(fid, pts, t) for t in tg])
        faces.append(FaceTrace(fid, pts, tg, vals))
    signal = BoundaryTraceSignal("dirichlet_trace", faces)
    signal.generator = gen

    prop = MomentPropagator(g, S.lattice)
    achieved = prop.evolve(v0, T)
    err = sobolev_norm(achieved - u_T, 0.0)
    ref = sobolev_norm(u_T, 0.0)
    residual = err / ref if ref > 0 else err
    meta_s = s if s is not None else 0.0
    signal.metadata = {"s": meta_s, "T": T}
    return v0, signal, achieved, residual


def isomorphism_ratio_table(
    g: SmoothController, lattice: ModeLattice, T: float, s_values, seed: int = 0
):
    """Measured ||v0||_{s+2} / ||u_T||_s ratios (Dirichlet |k|^{2s} weights)."""
    prop = MomentPropagator(g, lattice)
    S = prop.s_matrix(T)
    rng = np.random.default_rng(seed)
    u = rng.normal(size=lattice.size) + 1j * rng.normal(size=lattice.size)
    u_T = SpectralField(lattice, u)
    v0 = SpectralField(lattice, np.linalg.solve(S.matrix, u_T.coeffs))
    rows = []
    for s in s_values:
        num = sobolev_norm(v0, s + 2.0, weight="dirichlet")
        den = sobolev_norm(u_T, s, weight="dirichlet")
        rows.append((float(s), num / den))
    return rows


# ---------------------------------------------------------------------------
# convex multiplier weight (vertex observability machinery)
# ---------------------------------------------------------------------------


def convex_weight(x, delta: float, n: int):
    """theta(x) = (x1+)^4 (1 + delta sum_{j>=2} (xj+)^4), value/grad/Hessian.

    Exact polynomial evaluation; identically zero (with derivatives) on
    ``x1 <= 0``.  The Hessian is positive definite on ``(0, inf)^n cap B_1``
    whenever ``delta < (6/13)/(n-1)``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"point must have shape ({n},)")
    xp = np.maximum(x, 0.0)
    tail = float(np.sum(xp[1:] ** 4)) if n > 1 else 0.0
    s = 1.0 + delta * tail
    x1 = xp[0]
    theta = x1**4 * s
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    grad[0] = 4.0 * x1**3 * s
    hess[0, 0] = 12.0 * x1**2 * s
    for j in range(1, n):
        xj = xp[j]
        grad[j] = 4.0 * delta * x1**4 * xj**3
        hess[0, j] = hess[j, 0] = 16.0 * delta * x1**3 * xj**3
        hess[j, j] = 12.0 * delta * x1**4 * xj**2
    return theta, grad, hess


# ---------------------------------------------------------------------------
# multiplier identity (Rellich-type) as a numeric check
# ---------------------------------------------------------------------------


@dataclass
class PolynomialVectorField:
    """Vector field with polynomial components given as monomial sums.

    ``components[k]`` is a list of ``(coef, exponents)`` pairs; ``jacobian``
    and ``grad_div`` hold the exact derived monomial sums.
    """

    dimension: int
    components: list
    jacobian: list  # jacobian[k][j] = d q_k / d x_j
    grad_div: list  # grad_div[k] = d (div q) / d x_k


def _mono_derivative(monomials, axis):
    out = []
    for coef, exps in monomials:
        e = exps[axis]
        if e == 0:
            continue
        new = list(exps)
        new[axis] = e - 1
        out.append((coef * e, tuple(new)))
    return out


def _build_field(components, n) -> PolynomialVectorField:
    jac = [[_mono_derivative(components[k], j) for j in range(n)] for k in range(n)]
    div = []
    for k in range(n):
        div.extend(jac[k][k])
    grad_div = [_mono_derivative(div, k) for k in range(n)]
    return PolynomialVectorField(n, components, jac, grad_div)


def linear_multiplier(n: int) -> PolynomialVectorField:
    """q(x) = x (identity Jacobian, vanishing grad div)."""
    comps = []
    for k in range(n):
        e = [0] * n
        e[k] = 1
        comps.append([(1.0, tuple(e))])
    return _build_field(comps, n)


def convex_multiplier(delta: float, n: int) -> PolynomialVectorField:
    """q = grad theta for the convex vertex weight (monomials on (0,pi)^n)."""
    comps = []
    # q_1 = 4 x1^3 + 4 delta sum_j x1^3 xj^4
    q1 = [(4.0, tuple([3] + [0] * (n - 1)))]
    for j in range(1, n):
        e = [3] + [0] * (n - 1)
        e[j] = 4
        q1.append((4.0 * delta, tuple(e)))
    comps.append(q1)
    for k in range(1, n):
        e = [4] + [0] * (n - 1)
        e[k] = 3
        comps.append([(4.0 * delta, tuple(e))])
    return _build_field(comps, n)


class _TrigMomentTable:
    """Exact integrals over (0, pi): x^e sin(px)sin(qx) and sin(px)cos(qx)."""

    def __init__(self, emax: int, mmax: int):
        self.Ic = np.zeros((emax + 1, mmax + 1))
        self.Is = np.zeros((emax + 1, mmax + 1))
        for m in range(mmax + 1):
            if m == 0:
                for e in range(emax + 1):
                    self.Ic[e, 0] = math.pi ** (e + 1) / (e + 1)
                    self.Is[e, 0] = 0.0
                continue
            sgn = (-1.0) ** m
            self.Ic[0, m] = 0.0
            self.Is[0, m] = (1.0 - sgn) / m
            for e in range(1, emax + 1):
                self.Ic[e, m] = -(e / m) * self.Is[e - 1, m]
                self.Is[e, m] = -(math.pi**e) * sgn / m + (e / m) * self.Ic[e - 1, m]

    def cos_int(self, e: int, m: int) -> float:
        return self.Ic[e, abs(m)]

    def sin_int(self, e: int, m: int) -> float:
        return math.copysign(1.0, m) * self.Is[e, abs(m)] if m else 0.0

    def ss(self, e: int, p: int, q: int) -> float:
        return 0.5 * (self.cos_int(e, p - q) - self.cos_int(e, p + q))

    def sc(self, e: int, p: int, q: int) -> float:
        # int x^e sin(px) cos(qx) = (1/2)[I_s(e, p+q) + I_s(e, p-q)]
        return 0.5 * (self.sin_int(e, p + q) + self.sin_int(e, p - q))


def _mono_volume_matrix(monos, table, idx, deriv_left=None, deriv_right=None):
    """sum_monomials int_Omega x^e A_p(x) B_q(x) dx as a (size,size) matrix.

    ``A_p`` is the sine product (or its ``deriv_left`` derivative) for row
    mode p, ``B_q`` the same for column mode q.
    """
    size, n = idx.shape
    total = np.zeros((size, size))
    for coef, exps in monos:
        contrib = np.full((size, size), coef)
        for ax in range(n):
            pax = idx[:, ax]
            qax = idx[:, ax]
            e = exps[ax]
            fac = np.empty((len(pax), len(qax)))
            for i, p in enumerate(pax):
                for j, q in enumerate(qax):
                    left_d = deriv_left == ax
                    right_d = deriv_right == ax
                    if not left_d and not right_d:
                        fac[i, j] = table.ss(e, int(p), int(q))
                    elif left_d and not right_d:
                        # d/dx sin(px) = p cos(px)
                        fac[i, j] = p * table.sc(e, int(q), int(p))
                    elif right_d and not left_d:
                        fac[i, j] = q * table.sc(e, int(p), int(q))
                    else:
                        # cos cos = int x^e cos(px)cos(qx)
                        fac[i, j] = (
                            p
                            * q
                            * 0.5
                            * (table.cos_int(e, int(p) - int(q)) + table.cos_int(e, int(p) + int(q)))
                        )
            contrib = contrib * fac
        total += contrib
    return total


def _face_monomial_matrix(monos, table, idx, axis, side):
    """Boundary matrix: int_face x'^e (dnu sin_p)(dnu sin_q) with x_axis fixed."""
    size, n = idx.shape
    total = np.zeros((size, size))
    xi = 0.0 if side == 0 else math.pi
    for coef, exps in monos:
        if xi == 0.0 and exps[axis] > 0:
            continue
        c = coef * (xi ** exps[axis] if exps[axis] else 1.0)
        kax = idx[:, axis].astype(float)
        if side == 0:
            sgn = -kax
        else:
            sgn = kax * (-1.0) ** idx[:, axis]
        contrib = np.outer(sgn, sgn) * c
        for ax in range(n):
            if ax == axis:
                continue
            e = exps[ax]
            fac = np.empty((size, size))
            pax, qax = idx[:, ax], idx[:, ax]
            for i, p in enumerate(pax):
                for j, q in enumerate(qax):
                    fac[i, j] = table.ss(e, int(p), int(q))
            contrib = contrib * fac
        total += contrib
    return total


def multiplier_identity_residual(
    v0: SpectralField,
    qfield: PolynomialVectorField,
    T: float,
    panels: int = 16,
    nodes_per_panel: int = 4,
) -> float:
    """Relative defect of the Rellich-type boundary identity.

    All spatial integrals are exact monomial-trig moments; the time
    integrals on both sides use composite Gauss-Legendre with the stated
    panel count, so the residual tracks pure time-quadrature error and
    falls at least twofold under panel doubling until the rounding floor.
    """
    lat = v0.lattice
    if lat.basis != "sine":
        raise LatticeError("the multiplier identity concerns Dirichlet waves")
    n = lat.dimension
    if qfield.dimension != n:
        raise LatticeError("multiplier dimension mismatch")
    idx = lat.indices
    emax = max(
        [max(e) for mono in qfield.components for _, e in mono]
        + [max(e) for row in qfield.jacobian for mono in row for _, e in mono if e]
        + [max(e) for mono in qfield.grad_div for _, e in mono if e]
        + [1]
    )
    table = _TrigMomentTable(emax, 2 * lat.truncation + 1)

    # boundary term matrix: (1/2) (q.nu) |dnu v|^2 over all faces
    A = np.zeros((lat.size, lat.size))
    for axis in range(n):
        for side in (0, 1):
            nu_sign = -1.0 if side == 0 else 1.0
            A += 0.5 * nu_sign * _face_monomial_matrix(
                qfield.components[axis], table, idx, axis, side
            )

    # volume matrices
    B = np.zeros((lat.size, lat.size))  # v q . grad(conj v)
    for k in range(n):
        B += _mono_volume_matrix(qfield.components[k], table, idx, deriv_right=k)
    C = np.zeros((lat.size, lat.size))  # v grad(div q) . grad(conj v)
    for k in range(n):
        C += _mono_volume_matrix(qfield.grad_div[k], table, idx, deriv_right=k)
    D = np.zeros((lat.size, lat.size))  # dq_k/dx_j d(conj v)/dx_k dv/dx_j
    for k in range(n):
        for j in range(n):
            monos = qfield.jacobian[k][j]
            if monos:
                D += _mono_volume_matrix(monos, table, idx, deriv_left=j, deriv_right=k)

    # time factors: Q[p, p'] ~ integral of e^{-i(w_p - w_p') t}
    x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    taus, wts = [], []
    hp = T / panels
    for pan in range(panels):
        taus.extend((pan + 0.5) * hp + 0.5 * hp * x)
        wts.extend(0.5 * hp * w)
    taus = np.array(taus)
    wts = np.array(wts)
    dw = lat.ksq[:, None] - lat.ksq[None, :]
    Q = np.exp(-1j * np.multiply.outer(dw, taus)) @ wts

    vp = v0.coeffs
    pair = np.outer(vp, np.conj(vp))

    lhs = np.sum(pair * A * Q)
    # endpoint term (1/2) Im int v q.grad conj(v) |_0^T
    phase_T = np.exp(-1j * dw * T)
    endpoint = 0.5 * np.imag(np.sum(pair * B * (phase_T - 1.0)))
    r2 = 0.5 * np.real(np.sum(pair * C * Q))
    r3 = np.real(np.sum(pair * D * Q))
    rhs = endpoint + r2 + r3
    lhs = np.real(lhs)
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-30)
