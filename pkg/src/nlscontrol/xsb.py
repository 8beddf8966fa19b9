"""Discrete dispersive space-time norms and numerical estimate probes.

A :class:`SpaceTimeField` stores coefficients ``c(k, m)`` of

    u(x, t) = sum_k sum_{|m| <= M} c(k, m) exp(i k.x) exp(i tau_m t),
    tau_m = 2 pi m / time_window,

over a spatial mode lattice and a truncated time-frequency grid.  The
weighted norm

    ||u||_{s,b}^2 = sum <tau_m +- |k|^2>^{2b} <k>^{2s} |c(k,m)|^2

is the discrete dispersive norm (the minus sign selects the conjugate
flavor).  Restriction norms over a window ``[0, T]`` are replaced by the
canonical-extension surrogate: multiply by a fixed taper that is 1 on
``[0, T]`` and supported on ``[-T/4, 5T/4]``, so every reported value is a
deterministic upper bound of the true restriction norm.

The probe functions measure estimate ratios over seeded random samples
and report maxima, medians, scale invariance and refinement stability;
no analytic constant is asserted (none is available), only finiteness and
stability of the measured values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exponents import critical_exponents, exponent_plan
from .lattice import (
    LatticeError,
    ModeLattice,
    SpectralField,
    sobolev_norm,
    sobolev_weights,
)

__all__ = [
    "SpaceTimeField",
    "CanonicalWindow",
    "default_time_window",
    "xsb_norm",
    "windowed_free_flow",
    "windowed_duhamel",
    "random_spacetime_field",
    "spacetime_product",
    "odd_extend_spacetime",
    "suggest_time_modes",
    "RatioStats",
    "linear_estimate_probe",
    "multilinear_ratio_probe",
    "conjugate_bilinear_probe",
    "claim3_sum",
    "claim4_sum",
    "claim5_sum",
]


# ---------------------------------------------------------------------------
# canonical window
# ---------------------------------------------------------------------------


def _interval_exp_integral(a: float, b: float, w) -> np.ndarray:
    """int_a^b exp(i w t) dt, vectorized over w with the w = 0 limit."""
    w = np.asarray(w, dtype=float)
    out = np.empty(w.shape, dtype=np.complex128)
    zero = np.abs(w) < 1e-300
    out[zero] = b - a
    nz = ~zero
    wn = w[nz]
    out[nz] = (np.exp(1j * wn * b) - np.exp(1j * wn * a)) / (1j * wn)
    return out


def _interval_texp_integral(a: float, b: float, w) -> np.ndarray:
    """int_a^b t exp(i w t) dt, vectorized with the w = 0 limit."""
    w = np.asarray(w, dtype=float)
    out = np.empty(w.shape, dtype=np.complex128)
    zero = np.abs(w) < 1e-300
    out[zero] = 0.5 * (b * b - a * a)
    nz = ~zero
    wn = w[nz]
    eb, ea = np.exp(1j * wn * b), np.exp(1j * wn * a)
    out[nz] = (b * eb - a * ea) / (1j * wn) - (eb - ea) / (1j * wn) ** 2
    return out


@dataclass
class CanonicalWindow:
    """Taper flat on [0, T], supported on [-T/4, 5T/4], raised-cosine edges.

    ``order`` powers of the raised cosine give a C^(2*order - 1) taper; each
    piece is stored as a finite complex-exponential sum so that windowed
    transforms are closed-form.
    """

    T: float
    order: int = 1
    pieces: list = field(init=False, repr=False)

    def __post_init__(self):
        T, m = self.T, self.order
        w = T / 4.0
        # sin^{2m}(x/2) and cos^{2m}(x/2) as sums over exp(i l x)
        ls = np.arange(-m, m + 1)
        binoms = np.array([math.comb(2 * m, m - l) for l in ls], dtype=float)
        rise = binoms * (-1.0) ** ls / 4.0**m  # ((1 - cos x)/2)^m
        fall = binoms / 4.0**m  # ((1 + cos x)/2)^m
        pieces = []
        # rising edge on [-w, 0]: x = pi (t + w) / w
        terms = [
            (rise[i], ls[i] * math.pi / w, ls[i] * math.pi) for i in range(len(ls))
        ]
        pieces.append((-w, 0.0, terms))
        pieces.append((0.0, T, [(1.0, 0.0, 0.0)]))
        # falling edge on [T, T + w]: x = pi (t - T) / w
        terms = [
            (fall[i], ls[i] * math.pi / w, -ls[i] * math.pi * T / w)
            for i in range(len(ls))
        ]
        pieces.append((T, T + w, terms))
        self.pieces = pieces

    @property
    def span(self) -> float:
        return 1.5 * self.T

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for a, b, terms in self.pieces:
            mask = (t >= a) & (t <= b)
            if not np.any(mask):
                continue
            acc = np.zeros(np.count_nonzero(mask), dtype=np.complex128)
            for c, w, phase in terms:
                acc += c * np.exp(1j * (w * t[mask] + phase))
            out[mask] = acc.real
        return out

    def transform(self, sigma, period: float) -> np.ndarray:
        """(1/L) int eta(t) exp(-i sigma t) dt over the support."""
        sigma = np.asarray(sigma, dtype=float)
        acc = np.zeros(sigma.shape, dtype=np.complex128)
        for a, b, terms in self.pieces:
            for c, w, phase in terms:
                acc += c * np.exp(1j * phase) * _interval_exp_integral(a, b, w - sigma)
        return acc / period

    def t_transform(self, sigma, period: float) -> np.ndarray:
        """(1/L) int t eta(t) exp(-i sigma t) dt over the support."""
        sigma = np.asarray(sigma, dtype=float)
        acc = np.zeros(sigma.shape, dtype=np.complex128)
        for a, b, terms in self.pieces:
            for c, w, phase in terms:
                acc += c * np.exp(1j * phase) * _interval_texp_integral(a, b, w - sigma)
        return acc / period

    def squared_integral(self) -> float:
        """Closed-form ``int eta(t)^2 dt``."""
        total = 0.0
        for a, b, terms in self.pieces:
            for c1, w1, p1 in terms:
                for c2, w2, p2 in terms:
                    val = c1 * c2 * np.exp(1j * (p1 + p2)) * _interval_exp_integral(
                        a, b, np.array(w1 + w2)
                    )
                    total += float(np.real(val))
        return total


def default_time_window(T: float) -> float:
    """Smallest multiple of 2*pi containing the canonical window span.

    A 2*pi-multiple period puts the integer dispersion shifts ``|k|^2`` on
    the discrete time-frequency grid.
    """
    return math.tau * max(1, math.ceil(1.5 * T / math.tau))


def suggest_time_modes(lattice: ModeLattice, period: float, tail: int = 160) -> int:
    """Time-frequency truncation covering all dispersion shifts plus a tail."""
    kmax = int(np.max(lattice.ksq))
    return int(math.ceil((kmax + tail) * period / math.tau))


# ---------------------------------------------------------------------------
# space-time fields
# ---------------------------------------------------------------------------


@dataclass
class SpaceTimeField:
    lattice: ModeLattice
    time_window: float
    M: int
    coeffs: np.ndarray  # (lattice.size, 2M + 1), column j -> m = j - M
    window_norm: float = 0.0  # int eta^2 of the generating window, if any

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != (self.lattice.size, 2 * self.M + 1):
            raise LatticeError(
                f"coefficient array shape {self.coeffs.shape} does not match "
                f"(lattice {self.lattice.size}, 2M+1 = {2 * self.M + 1})"
            )

    @property
    def tau(self) -> np.ndarray:
        return math.tau * np.arange(-self.M, self.M + 1) / self.time_window

    def conjugate(self) -> "SpaceTimeField":
        """Coefficients of the complex conjugate field."""
        lat = self.lattice
        if lat.basis == "exponential":
            t = np.conj(self.coeffs.reshape(lat.shape + (-1,)))
            for ax in range(lat.dimension):
                t = np.flip(t, axis=ax)
            t = np.flip(t, axis=-1)
            c = t.reshape(lat.size, -1)
        else:
            c = np.flip(np.conj(self.coeffs), axis=1)
        return SpaceTimeField(lat, self.time_window, self.M, c, self.window_norm)

    def scaled(self, lam: float) -> "SpaceTimeField":
        return SpaceTimeField(
            self.lattice, self.time_window, self.M, lam * self.coeffs, self.window_norm
        )

    def padded(self, M_new: int) -> "SpaceTimeField":
        """Zero-pad the time-frequency axis to a larger truncation."""
        if M_new < self.M:
            raise ValueError("padding cannot shrink the truncation")
        out = np.zeros((self.lattice.size, 2 * M_new + 1), dtype=np.complex128)
        out[:, M_new - self.M : M_new + self.M + 1] = self.coeffs
        return SpaceTimeField(self.lattice, self.time_window, M_new, out, self.window_norm)


def xsb_norm(f: SpaceTimeField, s: float, b: float, sign: str = "+") -> float:
    """Discrete weighted l2 norm with weights <tau +- |k|^2>^2b <k>^2s."""
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    ksq = f.lattice.ksq.astype(float)
    tau = f.tau
    disp = tau[None, :] + (ksq[:, None] if sign == "+" else -ksq[:, None])
    wt = (1.0 + disp**2) ** b
    wk = sobolev_weights(f.lattice, s)
    return float(np.sqrt(np.sum(wk[:, None] * wt * np.abs(f.coeffs) ** 2)))


def windowed_free_flow(
    phi: SpectralField, T: float, M: int, order: int = 1, period: float | None = None
) -> SpaceTimeField:
    """Canonical extension of ``W(t) phi``: closed-form windowed transform."""
    if period is None:
        period = default_time_window(T)
    win = CanonicalWindow(T, order)
    lat = phi.lattice
    tau = math.tau * np.arange(-M, M + 1) / period
    sig = tau[None, :] + lat.ksq.astype(float)[:, None]
    coeffs = phi.coeffs[:, None] * win.transform(sig, period)
    return SpaceTimeField(lat, period, M, coeffs, win.squared_integral())


def windowed_duhamel(
    f: SpaceTimeField, T: float, M_out: int | None = None, order: int = 1
) -> SpaceTimeField:
    """Canonical extension of ``t -> int_0^t W(t - tau) f(tau) dtau``.

    The source is the globally defined truncated series; resonant source
    frequencies ``tau_m = -|k|^2`` pick up the secular ``t exp(i tau_m t)``
    branch of the integral.
    """
    if M_out is None:
        M_out = f.M
    lat = f.lattice
    L = f.time_window
    win = CanonicalWindow(T, order)
    tau_in = f.tau
    tau_out = math.tau * np.arange(-M_out, M_out + 1) / L
    coeffs = np.zeros((lat.size, 2 * M_out + 1), dtype=np.complex128)
    ksq = lat.ksq.astype(float)
    Wt_out_cache = {}
    for i in range(lat.size):
        row = f.coeffs[i]
        if not np.any(row):
            continue
        denom = tau_in + ksq[i]
        resonant = np.abs(denom) < 1e-12
        regular = ~resonant
        if np.any(regular):
            amp = row[regular] / (1j * denom[regular])
            # exp(i tau_m t) part: shifts of the window transform
            sig = tau_out[:, None] - tau_in[None, regular]
            coeffs[i] += (win.transform(sig, L) * amp[None, :]).sum(axis=1)
            # -exp(-i |k|^2 t) part: single shifted transform
            key = float(ksq[i])
            if key not in Wt_out_cache:
                Wt_out_cache[key] = win.transform(tau_out + ksq[i], L)
            coeffs[i] -= Wt_out_cache[key] * np.sum(amp)
        if np.any(resonant):
            for j in np.where(resonant)[0]:
                sig = tau_out - tau_in[j]
                coeffs[i] += row[j] * win.t_transform(sig, L)
    return SpaceTimeField(lat, L, M_out, coeffs, win.squared_integral())


def random_spacetime_field(
    lattice: ModeLattice,
    period: float,
    M: int,
    rng: np.random.Generator,
    normalize: tuple | None = None,
) -> SpaceTimeField:
    """Random coefficients, optionally normalized to unit (s, b, sign) norm."""
    shape = (lattice.size, 2 * M + 1)
    c = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    f = SpaceTimeField(lattice, period, M, c)
    if normalize is not None:
        s, b, sign = normalize
        nrm = xsb_norm(f, s, b, sign)
        f = f.scaled(1.0 / nrm)
    return f


# ---------------------------------------------------------------------------
# products and extensions
# ---------------------------------------------------------------------------


def _exp_axis_matrices(points: int, modes: np.ndarray, length: float):
    x = length * np.arange(points) / points
    E = np.exp(1j * np.outer(x, modes))
    A = np.exp(-1j * np.outer(modes, x)) / points
    return E, A


def _to_grid(f: SpaceTimeField, Gx: int, Gt: int) -> np.ndarray:
    lat = f.lattice
    if lat.basis != "exponential":
        raise LatticeError("space-time products need exponential lattices")
    vals = f.coeffs.reshape(lat.shape + (2 * f.M + 1,))
    Ex, _ = _exp_axis_matrices(Gx, lat.axis_indices(), math.tau)
    Et, _ = _exp_axis_matrices(Gt, np.arange(-f.M, f.M + 1), f.time_window)
    for _ in range(lat.dimension):
        vals = np.tensordot(Ex, vals, axes=(1, 0))
        vals = np.moveaxis(vals, 0, -1)
    # time axis is leading after the cycle; contract it last
    vals = np.tensordot(Et, vals, axes=(1, 0))
    vals = np.moveaxis(vals, 0, -1)
    return vals  # axes: (x1..xn, t)


def _from_grid(
    vals: np.ndarray, n: int, N_out: int, M_out: int, period: float
) -> SpaceTimeField:
    lat = ModeLattice(n, N_out, "exponential")
    Gx = vals.shape[0]
    Gt = vals.shape[-1]
    _, Ax = _exp_axis_matrices(Gx, lat.axis_indices(), math.tau)
    _, At = _exp_axis_matrices(Gt, np.arange(-M_out, M_out + 1), period)
    for _ in range(n):
        vals = np.tensordot(Ax, vals, axes=(1, 0))
        vals = np.moveaxis(vals, 0, -1)
    vals = np.tensordot(At, vals, axes=(1, 0))
    vals = np.moveaxis(vals, 0, -1)
    return SpaceTimeField(lat, period, M_out, vals.reshape(lat.size, 2 * M_out + 1))


def spacetime_product(fields, conj_flags=None) -> SpaceTimeField:
    """Exact pointwise product of space-time fields on the full lattice.

    All factors must share the dimension and time window; the output keeps
    every product mode (space truncation sum(N_i), time sum(M_i)), so no
    aliasing error enters.
    """
    if conj_flags is None:
        conj_flags = [False] * len(fields)
    n = fields[0].lattice.dimension
    L = fields[0].time_window
    for f in fields:
        if f.lattice.dimension != n or abs(f.time_window - L) > 1e-12:
            raise LatticeError("incompatible space-time factors")
    N_out = sum(f.lattice.truncation for f in fields)
    M_out = sum(f.M for f in fields)
    Gx = 2 * N_out + 2
    Gt = 2 * M_out + 2
    prod = None
    for f, cj in zip(fields, conj_flags):
        vals = _to_grid(f, Gx, Gt)
        if cj:
            vals = np.conj(vals)
        prod = vals if prod is None else prod * vals
    return _from_grid(prod, n, N_out, M_out, L)


def odd_extend_spacetime(f: SpaceTimeField) -> SpaceTimeField:
    """Column-wise odd extension of a sine-lattice space-time field."""
    from .lattice import odd_extend

    lat = f.lattice
    if lat.basis != "sine":
        raise LatticeError("odd extension expects a sine-lattice field")
    out_lat = ModeLattice(lat.dimension, lat.truncation, "exponential")
    out = np.empty((out_lat.size, 2 * f.M + 1), dtype=np.complex128)
    for j in range(2 * f.M + 1):
        out[:, j] = odd_extend(SpectralField(lat, f.coeffs[:, j])).coeffs
    return SpaceTimeField(out_lat, f.time_window, f.M, out, f.window_norm)


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------


@dataclass
class RatioStats:
    ratios: np.ndarray
    refinement_delta: float = float("nan")

    @property
    def max(self) -> float:
        return float(np.max(self.ratios))

    @property
    def median(self) -> float:
        return float(np.median(self.ratios))

    def summary(self) -> dict:
        return {
            "max": self.max,
            "median": self.median,
            "count": int(len(self.ratios)),
            "refinement_delta": self.refinement_delta,
        }


def linear_estimate_probe(
    kind: str,
    samples: int,
    s: float,
    b: float,
    T: float,
    lattice: ModeLattice,
    M: int | None = None,
    seed: int = 0,
    order: int = 1,
    refine: bool = True,
) -> RatioStats:
    """Measured homogeneous / Duhamel linear-estimate ratios.

    ``kind='homogeneous'`` measures ``||eta W(t) phi|| / ||phi||_s`` over
    random data; ``kind='duhamel'`` (requires ``b > 1/2``) measures the
    source-to-solution ratio against the ``(s, b-1)`` norm of the source.
    """
    if kind not in ("homogeneous", "duhamel"):
        raise ValueError(f"unknown probe kind {kind!r}")
    if kind == "duhamel" and not 0.5 < b < 1.0:
        raise ValueError("the Duhamel estimate needs b in (1/2, 1)")
    period = default_time_window(T)
    if M is None:
        M = suggest_time_modes(lattice, period)
    rng = np.random.default_rng(seed)
    ratios = np.empty(samples)
    ratios2 = np.empty(samples)
    for i in range(samples):
        if kind == "homogeneous":
            phi = SpectralField(
                lattice,
                rng.normal(size=lattice.size) + 1j * rng.normal(size=lattice.size),
            )
            fld = windowed_free_flow(phi, T, 2 * M if refine else M, order, period)
            den = sobolev_norm(phi, s)
            full = SpaceTimeField(lattice, period, 2 * M if refine else M, fld.coeffs)
        else:
            M_sig = max(8, M // 8)
            src = random_spacetime_field(
                lattice, period, M_sig, rng, normalize=(s, b - 1.0, "+")
            )
            full = windowed_duhamel(src, T, 2 * M if refine else M, order)
            den = xsb_norm(src, s, b - 1.0)
        num_fine = xsb_norm(full, s, b)
        ratios2[i] = num_fine / den
        if refine:
            sl = full.coeffs[:, full.M - M : full.M + M + 1]
            coarse = SpaceTimeField(lattice, period, M, sl)
            ratios[i] = xsb_norm(coarse, s, b) / den
        else:
            ratios[i] = ratios2[i]
    stats = RatioStats(ratios)
    if refine:
        stats.refinement_delta = float(
            np.max(np.abs(ratios2 - ratios) / np.maximum(ratios, 1e-300))
        )
    return stats


def multilinear_ratio_probe(
    alpha: int,
    n: int,
    s: float,
    samples: int,
    N: int = 6,
    M_signal: int = 16,
    b: float | None = None,
    seed: int = 0,
    T: float = 1.0,
    conj_pattern: tuple | None = None,
) -> RatioStats:
    """Measured multilinear product ratios ``||prod u~_i|| / prod ||u_i||``.

    Inputs are random unit-norm fields on the stated truncations; the
    product is computed exactly on the full product lattice, so the only
    refinement knob is the zero-padding of the inputs (an exact invariance,
    reported as the refinement delta).
    """
    if b is None:
        b = float(exponent_plan(alpha, n).b_hint)
    lattice = ModeLattice(n, N, "exponential")
    period = default_time_window(T)
    if conj_pattern is None:
        conj_pattern = tuple(i % 2 == 1 for i in range(alpha + 1))
    rng = np.random.default_rng(seed)
    ratios = np.empty(samples)
    pad_delta = 0.0
    for i in range(samples):
        us = [
            random_spacetime_field(lattice, period, M_signal, rng, normalize=(s, b, "+"))
            for _ in range(alpha + 1)
        ]
        prod = spacetime_product(us, conj_pattern)
        num = xsb_norm(prod, s, -b)
        den = 1.0
        for u in us:
            den *= xsb_norm(u, s, b)
        ratios[i] = num / den
        if i == 0:
            padded = [u.padded(2 * M_signal) for u in us]
            prod2 = spacetime_product(padded, conj_pattern)
            num2 = xsb_norm(prod2, s, -b)
            pad_delta = abs(num2 - num) / max(num, 1e-300)
    stats = RatioStats(ratios)
    stats.refinement_delta = pad_delta
    return stats


def conjugate_bilinear_probe(
    s: float,
    b: float,
    samples: int,
    bprime: float = -5.0 / 12.0 - 1.0 / 30.0,
    N: int = 6,
    M_signal: int = 16,
    seed: int = 0,
    T: float = 1.0,
    domain: str = "torus",
) -> RatioStats:
    """Measured conjugate-bilinear ratios on T^2 or the square (via odd
    extension); parameter ranges follow the bilinear estimate hypotheses."""
    if not (-3.0 / 8.0 < s < -1.0 / 3.0):
        raise ValueError("s must lie in (-3/8, -1/3)")
    if not (3.0 / 8.0 < b < 0.5) or s + 2 * b >= 0.5:
        raise ValueError("need b in (3/8, 1/2) with s + 2b < 1/2")
    if not (-0.5 < bprime < -5.0 / 12.0):
        raise ValueError("bprime must lie in (-1/2, -5/12)")
    if domain not in ("torus", "rectangle"):
        raise ValueError(f"unknown domain {domain!r}")
    period = default_time_window(T)
    rng = np.random.default_rng(seed)
    basis = "exponential" if domain == "torus" else "sine"
    lattice = ModeLattice(2, N, basis)
    ratios = np.empty(samples)
    for i in range(samples):
        vs = [
            random_spacetime_field(lattice, period, M_signal, rng, normalize=(s, b, "+"))
            for _ in range(2)
        ]
        if domain == "torus":
            prod = spacetime_product(vs, (True, True))
        else:
            ext = [odd_extend_spacetime(v) for v in vs]
            prod = spacetime_product(ext, (True, True))
        num = xsb_norm(prod, s, bprime)
        ratios[i] = num / (xsb_norm(vs[0], s, b) * xsb_norm(vs[1], s, b))
    return RatioStats(ratios)


# ---------------------------------------------------------------------------
# claim sums
# ---------------------------------------------------------------------------


def claim3_sum(gamma: float, lambdas, K: int = 10_000):
    """sup over lambda of ``sum_{|k| <= K} <lambda^2 - k^2>^(-gamma)``."""
    if gamma <= 0.5:
        raise ValueError("need gamma > 1/2")
    k = np.arange(-K, K + 1, dtype=float)
    values = []
    for lam in lambdas:
        diff = lam * lam - k * k
        values.append(float(np.sum((1.0 + diff * diff) ** (-gamma / 2.0))))
    return max(values), np.array(values)


def claim4_sum(s: float, delta: float, k: int, n: int, p, Q: int = 160) -> float:
    """Truncated ``S(p)`` of the shell-interaction bound, one point ``p``."""
    if not (s >= -1 and 0 < delta < 1 and s + 2 * delta < 0.5 and k > 1 + 2 * (s + 1)):
        raise ValueError("claim-4 parameter ranges violated")
    p = tuple(int(v) for v in np.atleast_1d(p))
    axes = [np.arange(1, Q + 1)] * n
    grids = np.meshgrid(*axes, indexing="ij")
    qsq = sum(g.astype(float) ** 2 for g in grids)
    psq = float(sum(v * v for v in p))
    mask = qsq != psq
    qn = grids[-1].astype(float)
    denom = np.abs(qsq - psq) ** (2.0 * (1.0 - delta))
    term = np.where(mask, qn ** (2.0 * s + 2.0) / np.where(mask, denom, 1.0), 0.0)
    for j in range(n - 1):
        d = grids[j].astype(float) - p[j]
        term = term * (1.0 + d * d) ** (-k / 2.0)
    return float(np.sum(term))


def claim5_sum(sigma: float, k: float, n_values, M_max: int = 100_000):
    """``sum_{m >= 1} <m+n>^sigma <m-n>^(-k)`` with its fitted ``C``.

    Returns ``(C_fit, ratios)`` with ``ratios[n] = sum / n^sigma``.
    """
    if sigma < 0 or k <= sigma + 1:
        raise ValueError("need sigma >= 0 and k > sigma + 1")
    m = np.arange(1, M_max + 1, dtype=float)
    ratios = []
    for n in n_values:
        plus = (1.0 + (m + n) ** 2) ** (sigma / 2.0)
        minus = (1.0 + (m - n) ** 2) ** (-k / 2.0)
        ratios.append(float(np.sum(plus * minus)) / float(n) ** sigma)
    ratios = np.array(ratios)
    return float(np.max(ratios)), ratios
