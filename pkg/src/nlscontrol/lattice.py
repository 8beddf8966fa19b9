"""Mode lattices, spectral fields and the basic spectral calculus.

Three bases are supported on tensor-product domains:

* ``exponential`` -- complex exponentials ``exp(i k.x)`` with
  ``k in (Z ^ [-N, N])^n`` on the torus ``(-pi, pi)^n`` (period ``2*pi``),
* ``sine`` -- ``prod_i sin(k_i x_i)`` with ``k in {1..N}^n`` on ``(0, pi)^n``
  (homogeneous Dirichlet conditions),
* ``cosine`` -- ``prod_i cos(k_i x_i)`` with ``k in {0..N}^n`` on
  ``(0, pi)^n`` (homogeneous Neumann conditions).

All Sobolev norms are weighted l2 norms of the coefficient array (no basis
normalization constants); physical-space integrals carry the actual
``L^2`` constants and are handled where they are needed.

Phase factors ``exp(-i|k|^2 t)`` are always produced from the integer
``|k|^2`` table through :func:`unimodular_phases`, which reduces the phase
in extended precision and treats a ``t`` that is an exact float multiple of
``math.tau`` as the mathematical multiple of ``2*pi`` (so the free flow at
``t = 2*pi`` is exactly the identity).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModeLattice",
    "SpectralField",
    "LatticeError",
    "ParityError",
    "make_lattice",
    "to_physical",
    "to_spectral",
    "physical_grid",
    "quadrature_weights",
    "dealiased_grid_size",
    "sobolev_norm",
    "sobolev_weights",
    "free_propagate",
    "unimodular_phases",
    "resonance_integral",
    "pointwise_product",
    "power_product",
    "odd_extend",
    "even_extend",
    "restrict",
    "save_field",
    "load_field",
]

BASES = ("exponential", "sine", "cosine")

# 2*pi with extended precision headroom for phase reduction.
_TAU_LD = np.longdouble("6.283185307179586476925286766559005768394")


class LatticeError(ValueError):
    """Raised for invalid lattice parameters or incompatible lattices."""


class ParityError(ValueError):
    """Raised when a field does not have the parity required by restrict."""

    def __init__(self, message: str, asymmetry: float):
        super().__init__(f"{message} (measured asymmetry {asymmetry:.3e})")
        self.asymmetry = asymmetry


@dataclass(frozen=True)
class ModeLattice:
    """Truncated index set for one of the three spectral bases.

    The index set is the Cartesian product of the per-axis index ranges in
    row-major order; ``indices`` has shape ``(size, dimension)`` and ``ksq``
    holds the exact integer ``|k|^2`` values.
    """

    dimension: int
    truncation: int
    basis: str
    indices: np.ndarray = field(init=False, repr=False, compare=False)
    ksq: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise LatticeError(f"dimension must be >= 1, got {self.dimension}")
        if self.truncation < 1:
            raise LatticeError(f"truncation must be >= 1, got {self.truncation}")
        if self.basis not in BASES:
            raise LatticeError(f"unknown basis {self.basis!r}")
        axis = self.axis_indices()
        idx = np.array(
            list(itertools.product(axis, repeat=self.dimension)), dtype=np.int64
        )
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "ksq", np.sum(idx * idx, axis=1))

    def axis_indices(self) -> np.ndarray:
        N = self.truncation
        if self.basis == "exponential":
            return np.arange(-N, N + 1, dtype=np.int64)
        if self.basis == "sine":
            return np.arange(1, N + 1, dtype=np.int64)
        return np.arange(0, N + 1, dtype=np.int64)

    @property
    def axis_length(self) -> float:
        """Length of one side of the domain (2*pi torus, pi rectangle)."""
        return math.tau if self.basis == "exponential" else math.pi

    @property
    def modes_per_axis(self) -> int:
        return len(self.axis_indices())

    @property
    def size(self) -> int:
        return self.modes_per_axis**self.dimension

    @property
    def shape(self) -> tuple:
        return (self.modes_per_axis,) * self.dimension

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ModeLattice)
            and self.dimension == other.dimension
            and self.truncation == other.truncation
            and self.basis == other.basis
        )

    def __hash__(self):
        return hash((self.dimension, self.truncation, self.basis))

    def flat_index(self, k) -> int:
        """Flat position of multi-index ``k`` in row-major lattice order."""
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        axis = self.axis_indices()
        lo, m = axis[0], len(axis)
        pos = 0
        for ki in k:
            if ki < axis[0] or ki > axis[-1]:
                raise LatticeError(f"mode {tuple(k)} outside lattice")
            pos = pos * m + int(ki - lo)
        return pos


@dataclass
class SpectralField:
    """Complex coefficient array over a mode lattice."""

    lattice: ModeLattice
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != (self.lattice.size,):
            raise LatticeError(
                f"coefficient array has shape {self.coeffs.shape}, "
                f"lattice holds {self.lattice.size} modes"
            )

    @classmethod
    def zeros(cls, lattice: ModeLattice) -> "SpectralField":
        return cls(lattice, np.zeros(lattice.size, dtype=np.complex128))

    @classmethod
    def single_mode(cls, lattice: ModeLattice, k, amplitude=1.0) -> "SpectralField":
        f = cls.zeros(lattice)
        f.coeffs[lattice.flat_index(k)] = amplitude
        return f

    def copy(self) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs.copy())

    def tensor(self) -> np.ndarray:
        return self.coeffs.reshape(self.lattice.shape)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _require_same_lattice(self, other)
        return SpectralField(self.lattice, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _require_same_lattice(self, other)
        return SpectralField(self.lattice, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs * scalar)

    __rmul__ = __mul__

    def conjugate_reflect(self) -> "SpectralField":
        """Coefficients of the complex conjugate field (reflect k -> -k)."""
        if self.lattice.basis == "exponential":
            t = np.conj(self.tensor())
            for ax in range(self.lattice.dimension):
                t = np.flip(t, axis=ax)
            return SpectralField(self.lattice, t.reshape(-1))
        # sine/cosine basis functions are real: conjugate coefficients.
        return SpectralField(self.lattice, np.conj(self.coeffs))


def _require_same_lattice(f: SpectralField, g: SpectralField):
    if f.lattice != g.lattice:
        raise LatticeError("fields live on different lattices")


def make_lattice(n: int, N: int, basis: str) -> ModeLattice:
    """Build the truncated lattice for ``basis`` in dimension ``n``."""
    return ModeLattice(dimension=n, truncation=N, basis=basis)


# ---------------------------------------------------------------------------
# physical grids and transforms
# ---------------------------------------------------------------------------


def physical_grid(basis: str, grid_size: int) -> np.ndarray:
    """1-D physical grid points for one axis.

    For the torus: ``grid_size`` equispaced points ``-pi + 2*pi*j/G``.
    For the rectangle bases: ``grid_size + 1`` points ``pi*j/G`` including
    both endpoints (trapezoid nodes).
    """
    if basis == "exponential":
        j = np.arange(grid_size)
        return -math.pi + math.tau * j / grid_size
    j = np.arange(grid_size + 1)
    return math.pi * j / grid_size


def quadrature_weights(basis: str, grid_size: int) -> np.ndarray:
    """Quadrature weights matching :func:`physical_grid`.

    Exact for trigonometric polynomials of degree < ``grid_size`` (torus)
    resp. degree < ``2*grid_size`` (rectangle, trapezoid on half period).
    """
    if basis == "exponential":
        return np.full(grid_size, math.tau / grid_size)
    w = np.full(grid_size + 1, math.pi / grid_size)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


_MATRIX_CACHE: dict = {}


def _eval_matrix(basis: str, axis_indices: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Per-axis evaluation matrix, shape (len(x), modes)."""
    kx = np.outer(x, axis_indices)
    if basis == "exponential":
        return np.exp(1j * kx)
    if basis == "sine":
        return np.sin(kx).astype(np.complex128)
    return np.cos(kx).astype(np.complex128)


def _eval_matrix_cached(basis: str, axis_indices: np.ndarray, grid_size: int):
    key = ("eval", basis, int(axis_indices[0]), int(axis_indices[-1]), grid_size)
    mat = _MATRIX_CACHE.get(key)
    if mat is None:
        mat = _eval_matrix(basis, axis_indices, physical_grid(basis, grid_size))
        _MATRIX_CACHE[key] = mat
    return mat


def _analysis_matrix(basis: str, axis_indices: np.ndarray, grid_size: int) -> np.ndarray:
    """Per-axis quadrature analysis matrix, shape (modes, len(x))."""
    key = ("ana", basis, int(axis_indices[0]), int(axis_indices[-1]), grid_size)
    cached = _MATRIX_CACHE.get(key)
    if cached is not None:
        return cached
    x = physical_grid(basis, grid_size)
    w = quadrature_weights(basis, grid_size)
    if basis == "exponential":
        # (1/2pi) integral f exp(-ikx)
        mat = np.exp(-1j * np.outer(axis_indices, x)) * (w / math.tau)
    elif basis == "sine":
        mat = np.sin(np.outer(axis_indices, x)) * (2.0 * w / math.pi)
    else:
        mat = np.cos(np.outer(axis_indices, x)) * (2.0 * w / math.pi)
        mat[axis_indices == 0] *= 0.5
    _MATRIX_CACHE[key] = mat
    return mat


def _min_grid(lattice: ModeLattice) -> int:
    return 2 * lattice.truncation + 2


def to_physical(f: SpectralField, grid_size: int) -> np.ndarray:
    """Sample the field on the tensor grid; returns an n-dim complex array."""
    lat = f.lattice
    if grid_size < _min_grid(lat):
        raise LatticeError(
            f"grid size {grid_size} too small for N={lat.truncation} "
            f"(need >= {_min_grid(lat)})"
        )
    E = _eval_matrix_cached(lat.basis, lat.axis_indices(), grid_size)
    vals = f.tensor()
    for _ in range(lat.dimension):
        # contract the leading mode axis, cycling axes
        vals = np.tensordot(E, vals, axes=(1, 0))
        vals = np.moveaxis(vals, 0, -1)
    return vals


def to_spectral(samples: np.ndarray, lattice: ModeLattice) -> SpectralField:
    """Project grid samples onto the lattice by exact quadrature."""
    samples = np.asarray(samples, dtype=np.complex128)
    if samples.ndim != lattice.dimension:
        raise LatticeError(
            f"samples have {samples.ndim} axes, lattice dimension is "
            f"{lattice.dimension}"
        )
    pts = samples.shape[0]
    grid_size = pts if lattice.basis == "exponential" else pts - 1
    if any(s != pts for s in samples.shape):
        raise LatticeError("samples must live on a square tensor grid")
    if grid_size < _min_grid(lattice):
        raise LatticeError(
            f"grid size {grid_size} too small for N={lattice.truncation} "
            f"(need >= {_min_grid(lattice)})"
        )
    A = _analysis_matrix(lattice.basis, lattice.axis_indices(), grid_size)
    vals = samples
    for _ in range(lattice.dimension):
        vals = np.tensordot(A, vals, axes=(1, 0))
        vals = np.moveaxis(vals, 0, -1)
    return SpectralField(lattice, vals.reshape(-1))


def dealiased_grid_size(out_truncation: int, factor_truncations) -> int:
    """Smallest grid exact for a pointwise product.

    A product of fields with truncations ``factor_truncations`` projected
    onto modes ``<= out_truncation`` is alias-free on the returned grid.
    """
    return out_truncation + int(sum(factor_truncations)) + 1


# ---------------------------------------------------------------------------
# norms and propagation
# ---------------------------------------------------------------------------


def sobolev_weights(lattice: ModeLattice, s: float, weight: str = "bessel") -> np.ndarray:
    """Weights ``<k>^(2s)``; ``weight='dirichlet'`` uses ``|k|^(2s)``."""
    if weight == "bessel":
        base = 1.0 + lattice.ksq.astype(np.float64)
    elif weight == "dirichlet":
        if lattice.basis != "sine" and np.any(lattice.ksq == 0):
            raise LatticeError("dirichlet weight needs |k| >= 1 on the lattice")
        base = lattice.ksq.astype(np.float64)
    else:
        raise LatticeError(f"unknown weight {weight!r}")
    return base**s


def sobolev_norm(f: SpectralField, s: float, weight: str = "bessel") -> float:
    """Discrete H^s norm ``(sum <k>^(2s) |c_k|^2)^(1/2)``."""
    w = sobolev_weights(f.lattice, s, weight)
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def unimodular_phases(ksq: np.ndarray, t: float, sign: float = -1.0) -> np.ndarray:
    """``exp(sign * i * ksq * t)`` with extended-precision phase reduction.

    ``ksq`` must be integer valued.  When ``t`` is an exact float multiple of
    ``math.tau`` the result is exactly 1 (integer phases).
    """
    m = t / math.tau
    if m == round(m):
        return np.ones(np.shape(ksq), dtype=np.complex128)
    phase = np.mod(np.asarray(ksq, dtype=np.longdouble) * np.longdouble(t), _TAU_LD)
    return np.exp(1j * sign * phase.astype(np.float64))


def free_propagate(f: SpectralField, t: float) -> SpectralField:
    """Apply the free group: ``c_k -> exp(-i |k|^2 t) c_k`` (any basis)."""
    return SpectralField(f.lattice, f.coeffs * unimodular_phases(f.lattice.ksq, t))


def resonance_integral(theta, T: float) -> np.ndarray:
    """``E(theta, T) = (exp(i theta T) - 1) / (i theta)``, ``E(0, T) = T``.

    ``theta`` should be integer valued (mode-frequency differences); the
    value is exactly ``0`` for ``theta != 0`` when ``T`` is a float multiple
    of ``math.tau``.
    """
    theta = np.asarray(theta)
    out = np.empty(theta.shape, dtype=np.complex128)
    zero = theta == 0
    out[zero] = T
    nz = ~zero
    if np.any(nz):
        th = theta[nz]
        num = unimodular_phases(th, T, sign=+1.0) - 1.0
        out[nz] = num / (1j * th.astype(np.float64))
    return out


# ---------------------------------------------------------------------------
# pointwise products
# ---------------------------------------------------------------------------


def _parity_sign(basis: str) -> int:
    return -1 if basis == "sine" else +1


def pointwise_product(
    f: SpectralField,
    g: SpectralField,
    conjugate_flags=(False, False),
    out_truncation: int | None = None,
    grid_size: int | None = None,
) -> SpectralField:
    """Dealiased spectral coefficients of the pointwise product ``f * g``.

    ``conjugate_flags`` selects complex conjugation of either factor.  The
    output lattice keeps ``out_truncation`` modes per axis (default: the
    larger input truncation); the default grid makes every represented
    output mode exact.
    """
    lf, lg = f.lattice, g.lattice
    if lf.dimension != lg.dimension:
        raise LatticeError("factors have different dimensions")
    exp_f = lf.basis == "exponential"
    exp_g = lg.basis == "exponential"
    if exp_f != exp_g:
        raise LatticeError("cannot mix torus and rectangle bases in a product")
    if out_truncation is None:
        out_truncation = max(lf.truncation, lg.truncation)
    if grid_size is None:
        grid_size = max(
            dealiased_grid_size(out_truncation, (lf.truncation, lg.truncation)),
            _min_grid(lf),
            _min_grid(lg),
            2 * out_truncation + 2,
        )
    a = to_physical(f, grid_size)
    b = to_physical(g, grid_size)
    if conjugate_flags[0]:
        a = np.conj(a)
    if conjugate_flags[1]:
        b = np.conj(b)
    prod = a * b
    if exp_f:
        out = ModeLattice(lf.dimension, out_truncation, "exponential")
    else:
        sign = _parity_sign(lf.basis) * _parity_sign(lg.basis)
        out = ModeLattice(lf.dimension, out_truncation, "sine" if sign < 0 else "cosine")
    return to_spectral(prod, out)


def power_product(
    u: SpectralField,
    power: int,
    conj_power: int,
    out_truncation: int | None = None,
    out_basis: str | None = None,
) -> SpectralField:
    """Dealiased ``u^power * conj(u)^conj_power``, projected onto a lattice.

    ``out_basis=None`` keeps the torus basis resp. follows parity for the
    rectangle bases (an odd number of sine factors is odd again).  Passing
    an explicit rectangle basis performs the Galerkin projection of the
    pointwise product onto that basis instead, which is exact because the
    quadrature grid resolves the full product degree.
    """
    if power < 0 or conj_power < 0 or power + conj_power < 1:
        raise ValueError("need a positive total power")
    total = power + conj_power
    lat = u.lattice
    if out_truncation is None:
        out_truncation = lat.truncation
    grid_size = max(
        dealiased_grid_size(out_truncation, (lat.truncation,) * total),
        _min_grid(lat),
        2 * out_truncation + 2,
    )
    vals = to_physical(u, grid_size)
    prod = np.ones_like(vals)
    if power:
        prod = vals**power
    if conj_power:
        prod = prod * np.conj(vals) ** conj_power
    if out_basis is None:
        if lat.basis == "exponential":
            out_basis = "exponential"
        elif lat.basis == "sine":
            out_basis = "sine" if total % 2 else "cosine"
        else:
            out_basis = "cosine"
    elif (out_basis == "exponential") != (lat.basis == "exponential"):
        raise LatticeError("cannot project between torus and rectangle bases")
    out = ModeLattice(lat.dimension, out_truncation, out_basis)
    return to_spectral(prod, out)


def convolution_matrix(
    multiplier: SpectralField,
    in_lattice: ModeLattice,
    out_lattice: ModeLattice,
) -> np.ndarray:
    """Exact matrix of pointwise multiplication by an exponential-basis field.

    ``(m f)_k = sum_k' mhat(k - k') f_k'`` for ``k`` in the output lattice;
    offsets outside the multiplier's truncation contribute zero.  Equals the
    fully dealiased pointwise product restricted to the output lattice.
    """
    for lat in (multiplier.lattice, in_lattice, out_lattice):
        if lat.basis != "exponential":
            raise LatticeError("convolution matrices need exponential bases")
    if not (multiplier.lattice.dimension == in_lattice.dimension == out_lattice.dimension):
        raise LatticeError("dimension mismatch")
    n = in_lattice.dimension
    Nm = multiplier.lattice.truncation
    span = out_lattice.truncation + in_lattice.truncation
    width = 2 * span + 1
    table = np.zeros((width,) * n, dtype=np.complex128)
    m_tensor = multiplier.tensor()
    if Nm > span:
        # offsets beyond k_out - k_in range never contribute
        m_tensor = m_tensor[tuple(slice(Nm - span, Nm + span + 1) for _ in range(n))]
        Nm = span
    sl = tuple(slice(span - Nm, span + Nm + 1) for _ in range(n))
    table[sl] = m_tensor
    out_idx = out_lattice.indices
    in_idx = in_lattice.indices
    pos = out_idx[:, None, 0] - in_idx[None, :, 0] + span
    for ax in range(1, n):
        d = out_idx[:, None, ax] - in_idx[None, :, ax] + span
        pos = pos * width + d
    return table.reshape(-1)[pos]


# ---------------------------------------------------------------------------
# odd / even extension between the rectangle and the torus
# ---------------------------------------------------------------------------


def _sign_patterns(n: int):
    return itertools.product((1, -1), repeat=n)


def _signed_slice(N: int, e: int, with_zero: bool) -> slice:
    """View of the torus mode axis at positions N + e*k.

    ``k`` runs over ``1..N`` (``with_zero=False``) or ``0..N``; view index
    ``j`` maps to torus position ``N + e*(j + 1 - with_zero)``.
    """
    start = N if with_zero else N + e
    if e > 0:
        return slice(start, 2 * N + 1, 1)
    return slice(start, None, -1)


def odd_extend(f: SpectralField) -> SpectralField:
    """Odd extension of a sine-basis field to the exponential basis.

    ``prod sin(p_i x_i) = sum_eps (prod eps_i) exp(i (eps.p).x) / (2i)^n``.
    """
    lat = f.lattice
    if lat.basis != "sine":
        raise LatticeError("odd_extend expects a sine-basis field")
    out = ModeLattice(lat.dimension, lat.truncation, "exponential")
    coeffs = np.zeros(out.size, dtype=np.complex128)
    scale = (2.0j) ** (-lat.dimension)
    t_out = coeffs.reshape(out.shape)
    N = lat.truncation
    src = f.tensor()
    for eps in _sign_patterns(lat.dimension):
        sgn = int(np.prod(eps))
        sl = tuple(_signed_slice(N, e, with_zero=False) for e in eps)
        t_out[sl] += sgn * scale * src
    return SpectralField(out, coeffs)


def even_extend(f: SpectralField) -> SpectralField:
    """Even extension of a cosine-basis field to the exponential basis."""
    lat = f.lattice
    if lat.basis != "cosine":
        raise LatticeError("even_extend expects a cosine-basis field")
    out = ModeLattice(lat.dimension, lat.truncation, "exponential")
    coeffs = np.zeros(out.size, dtype=np.complex128)
    t_out = coeffs.reshape(out.shape)
    N = lat.truncation
    src = f.tensor()
    # halve once per axis where k_i != 0, then add to both sign copies
    halved = src.copy()
    for ax in range(lat.dimension):
        sl = [slice(None)] * lat.dimension
        sl[ax] = slice(1, None)
        halved[tuple(sl)] *= 0.5
    for eps in _sign_patterns(lat.dimension):
        sl = tuple(_signed_slice(N, e, with_zero=True) for e in eps)
        # k_i = 0 plane is shared between eps_i = +-1; add it only once
        contrib = halved.copy()
        for ax, e in enumerate(eps):
            if e < 0:
                d = [slice(None)] * lat.dimension
                d[ax] = slice(0, 1)
                contrib[tuple(d)] = 0.0
        t_out[sl] += contrib
    return SpectralField(out, coeffs)


def restrict(f: SpectralField, parity: str, tol: float = 1e-10) -> SpectralField:
    """Restrict an exponential-basis field back to the rectangle.

    ``parity='odd'`` returns a sine field, ``parity='even'`` a cosine field.
    The field must have the stated parity within relative tolerance ``tol``.
    """
    lat = f.lattice
    if lat.basis != "exponential":
        raise LatticeError("restrict expects an exponential-basis field")
    if parity not in ("odd", "even"):
        raise LatticeError(f"unknown parity {parity!r}")
    n, N = lat.dimension, lat.truncation
    t = f.tensor()
    scale = float(np.max(np.abs(t))) or 1.0
    sgn_parity = -1 if parity == "odd" else +1
    # parity check axis by axis
    worst = 0.0
    for ax in range(n):
        flipped = np.flip(t, axis=ax)
        worst = max(worst, float(np.max(np.abs(t - sgn_parity * flipped))))
    if worst > tol * scale:
        raise ParityError(f"field is not {parity} within tolerance", worst / scale)
    if parity == "odd":
        out = ModeLattice(n, N, "sine")
        acc = np.zeros(out.shape, dtype=np.complex128)
        for eps in _sign_patterns(n):
            sgn = int(np.prod(eps))
            sl = tuple(_signed_slice(N, e, with_zero=False) for e in eps)
            acc = acc + sgn * t[sl]
        acc *= 1j**n
        return SpectralField(out, acc.reshape(-1))
    out = ModeLattice(n, N, "cosine")
    acc = np.zeros(out.shape, dtype=np.complex128)
    for eps in _sign_patterns(n):
        sl = tuple(_signed_slice(N, e, with_zero=True) for e in eps)
        contrib = t[sl].copy()
        for ax, e in enumerate(eps):
            if e < 0:
                d = [slice(None)] * n
                d[ax] = slice(0, 1)
                contrib[tuple(d)] = 0.0
        acc = acc + contrib
    return SpectralField(out, acc.reshape(-1))


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


def save_field(f: SpectralField) -> dict:
    """JSON-ready snapshot {basis, n, N, coeffs: [[re, im], ...]}."""
    return {
        "basis": f.lattice.basis,
        "n": f.lattice.dimension,
        "N": f.lattice.truncation,
        "coeffs": [[float(c.real), float(c.imag)] for c in f.coeffs],
    }


def load_field(doc: dict) -> SpectralField:
    lat = ModeLattice(int(doc["n"]), int(doc["N"]), str(doc["basis"]))
    arr = np.array([complex(re, im) for re, im in doc["coeffs"]])
    return SpectralField(lat, arr)


def field_to_json(f: SpectralField) -> str:
    return json.dumps(save_field(f))


def field_from_json(text: str) -> SpectralField:
    return load_field(json.loads(text))
