"""Control signal containers and their JSON wire formats.

Two kinds of signals are produced by the controllers:

* internal controls ``h(x, t)``: spectral in space, sampled on a uniform
  time grid, serialized as ``{kind: "internal", time_grid, spectral_frames}``;
* boundary traces ``h(x', t)`` on a set of faces, serialized as
  ``{kind: "dirichlet_trace" | "neumann_trace", faces: [...]}`` where each
  face carries its transverse grid, time grid and sampled values.

Signals built by the controllers also keep their closed-form generator so
that replay integrators can evaluate them exactly at arbitrary times;
signals loaded back from JSON only carry the sampled frames.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import ModeLattice, SpectralField, unimodular_phases

__all__ = ["InternalSignal", "FaceTrace", "BoundaryTraceSignal", "face_id"]


def face_id(axis: int, side: int) -> str:
    """Readable face identifier; axes are 1-based, side 0 or 1 (x=0 or pi)."""
    return f"x{axis + 1}={'pi' if side else '0'}"


def _complex_list(arr: np.ndarray):
    return [[float(c.real), float(c.imag)] for c in np.asarray(arr).ravel()]


@dataclass
class InternalSignal:
    """Internal control h(x,t), spectral in space, sampled in time."""

    lattice: ModeLattice
    time_grid: np.ndarray
    frames: np.ndarray  # shape (len(time_grid), lattice.size)
    generator: object | None = field(default=None, repr=False)

    def at(self, t: float) -> SpectralField:
        """Exact evaluation at time ``t`` (requires the generator)."""
        if self.generator is None:
            raise ValueError("signal was loaded from frames only; cannot evaluate")
        return self.generator(t)

    def squared_l2_h_s(self, s: float, weights: np.ndarray) -> float:
        """Trapezoid estimate of the L^2(0,T;H^s)-type control cost."""
        w = np.sum(weights * np.abs(self.frames) ** 2, axis=1)
        return float(np.trapezoid(w, self.time_grid))

    def to_json_dict(self) -> dict:
        return {
            "kind": "internal",
            "basis": self.lattice.basis,
            "n": self.lattice.dimension,
            "N": self.lattice.truncation,
            "time_grid": [float(t) for t in self.time_grid],
            "spectral_frames": [_complex_list(row) for row in self.frames],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "InternalSignal":
        lat = ModeLattice(int(doc["n"]), int(doc["N"]), str(doc["basis"]))
        tg = np.array(doc["time_grid"], dtype=float)
        frames = np.array(
            [[complex(re, im) for re, im in row] for row in doc["spectral_frames"]]
        )
        return cls(lat, tg, frames)


@dataclass
class FaceTrace:
    """Sampled control trace on one face of the rectangle."""

    face: str
    grid: np.ndarray  # transverse points, shape (points, n-1) (empty for n=1)
    time_grid: np.ndarray
    values: np.ndarray  # shape (len(time_grid), points)

    def to_json_dict(self) -> dict:
        return {
            "face_id": self.face,
            "grid": [list(map(float, p)) for p in np.atleast_2d(self.grid)],
            "time_grid": [float(t) for t in self.time_grid],
            "values": [_complex_list(row) for row in self.values],
        }


@dataclass
class BoundaryTraceSignal:
    """Boundary control trace on a set of faces."""

    kind: str  # "dirichlet_trace" or "neumann_trace"
    faces: list

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "faces": [f.to_json_dict() for f in self.faces],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


class AdjointTraceGenerator:
    """Closed-form internal control h(t) = profile * W(t - T) chi.

    ``profile_times`` is a callable mapping a SpectralField to the
    (dealiased, truncated) product with the control profile.
    """

    def __init__(self, chi: SpectralField, T: float, profile_times):
        self.chi = chi
        self.T = T
        self.profile_times = profile_times

    def __call__(self, t: float) -> SpectralField:
        lat = self.chi.lattice
        phases = unimodular_phases(lat.ksq, t - self.T)
        adj = SpectralField(lat, self.chi.coeffs * phases)
        return self.profile_times(adj)
