"""Weighted-L2 Hermite machinery: basis, quadrature, cutoff, mode decomposition.

The linearized operator L = Lap - y.grad/2 + Id is self-adjoint in L2 with
Gaussian weight rho(y) = e^{-|y|^2/4} / (4 pi)^{n/2}; its eigenfunctions are
the Hermite polynomials h_m with L h_m = (1 - m/2) h_m.  A state q is split
into q = q_b + q_e by a smooth cutoff at |y| ~ K sqrt(s), and q_b into modes
(q0, q1, q2) plus the degree >= 3 remainder q_-.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .scaling import ProblemParams

__all__ = [
    "HermiteBasis",
    "ModeDecomposition",
    "ShrinkingSetSpec",
    "MembershipReport",
    "hermite_poly",
    "cutoff_chi",
    "decompose",
    "in_shrinking_set",
]

COMPONENTS = ("q0", "q1", "q2", "qminus", "qe")


def hermite_poly(m: int, y: np.ndarray) -> np.ndarray:
    """Hermite polynomial h_m(y) = sum_j (-1)^j m! y^{m-2j} / (j! (m-2j)!)."""
    out = np.zeros_like(np.asarray(y, dtype=float))
    for j in range(m // 2 + 1):
        coef = (-1) ** j * math.factorial(m) / (
            math.factorial(j) * math.factorial(m - 2 * j)
        )
        out += coef * np.asarray(y, dtype=float) ** (m - 2 * j)
    return out


def _smoothstep(t: np.ndarray) -> np.ndarray:
    # quintic bridge: 0 at t=0, 1 at t=1, two continuous derivatives
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


def cutoff_chi(y, s: float, K: float):
    """Smooth cutoff chi0(|y| / (K sqrt(s))): 1 on [0,1], 0 on [2,inf)."""
    if s < 1.0 or K < 1.0:
        raise ValueError("cutoff requires s >= 1 and K >= 1")
    x = np.abs(np.asarray(y, dtype=float)) / (K * math.sqrt(s))
    return _smoothstep(2.0 - x)


class GridTooCoarse(RuntimeError):
    """Quadrature self-test failed: the grid cannot support the projections."""


@dataclass
class HermiteBasis:
    """Hermite values and rho-weighted quadrature on a fixed radial grid.

    For n = 1 the grid spans [-y_max, y_max] and quadrature is composite
    Simpson; the Gaussian decay of the integrands makes any uniform rule at
    this spacing accurate far beyond the 1e-8 orthogonality requirement.
    For n >= 2 the grid is the radius [0, y_max] and the weight carries the
    surface factor r^{n-1}.
    """

    y: np.ndarray
    ndim: int
    max_degree: int = 6

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        # full-span estimate: adjacent differences of large grid values carry
        # cancellation noise that the absolute orthogonality tolerance feels
        dy = float((y[-1] - y[0]) / (len(y) - 1))
        npts = len(y)
        if self.ndim == 1:
            rho = np.exp(-y * y / 4.0) / math.sqrt(4.0 * math.pi)
        else:
            surf = 2.0 * math.pi ** (self.ndim / 2.0) / math.gamma(self.ndim / 2.0)
            rho = (
                surf
                * np.abs(y) ** (self.ndim - 1)
                * np.exp(-y * y / 4.0)
                / (4.0 * math.pi) ** (self.ndim / 2.0)
            )
        w = np.ones(npts)
        if npts % 2 == 1:
            w[1:-1:2] = 4.0
            w[2:-1:2] = 2.0
            w *= dy / 3.0
        else:
            # even interval count unavailable: fall back to trapezoid
            w *= dy
            w[0] = w[-1] = dy / 2.0
        self.weights = w * rho
        self.rho = rho
        self.dy = dy
        self.herm = np.stack([hermite_poly(m, y) for m in range(self.max_degree + 1)])
        self._self_test()

    def _self_test(self):
        if self.ndim == 1:
            gram = self.gram_matrix()
            exact = np.diag([math.factorial(m) * 2.0**m for m in range(self.max_degree + 1)])
            err = np.max(np.abs(gram - exact))
        else:
            # radial checks: mass, <|y|^2> = 2n, and the degree-2 norm 8n
            n = self.ndim
            mass = self.integrate(np.ones_like(self.y))
            m2 = self.integrate(self.y**2) - 2.0 * n
            r2 = self.y**2 - 2.0 * n
            m4 = self.integrate(r2 * r2) - 8.0 * n
            err = max(abs(mass - 1.0), abs(m2), abs(m4))
        self.orthogonality_error = float(err)
        if err > 1e-8:
            raise GridTooCoarse(
                f"quadrature self-test error {err:.3e} exceeds 1e-8; refine the grid"
            )

    def integrate(self, values: np.ndarray) -> float:
        """rho-weighted integral over R^n of a radial profile.

        Exactly-rounded summation: the orthogonality contract is absolute
        (1e-8 on entries up to 6! 2^6), which plain dot-product roundoff
        misses once the grid grows past a few thousand nodes.
        """
        return math.fsum(self.weights * values)

    def gram_matrix(self) -> np.ndarray:
        out = np.empty((self.max_degree + 1, self.max_degree + 1))
        for i in range(self.max_degree + 1):
            for j in range(i, self.max_degree + 1):
                out[i, j] = out[j, i] = self.integrate(self.herm[i] * self.herm[j])
        return out


@dataclass(frozen=True)
class ModeDecomposition:
    """Components of q at one similarity time (radial: q1, q2 stored as scalars)."""

    s: float
    q0: float
    q1: float
    q2: float
    qminus_norm: float
    qe_norm: float

    def csv_row(self, member: Optional[bool] = None, violator: str = "") -> str:
        flag = "" if member is None else str(int(member))
        return (
            f"{self.s:.6f},{self.q0:.12e},{self.q1:.12e},{self.q2:.12e},"
            f"{self.qminus_norm:.12e},{self.qe_norm:.12e},{flag},{violator}"
        )

    @staticmethod
    def csv_header() -> str:
        return "s,q0,q1,q2,qminus_norm,qe_norm,member_flag,violator"


def decompose(
    q_values: np.ndarray,
    s: float,
    params: ProblemParams,
    basis: HermiteBasis,
) -> ModeDecomposition:
    """Split q into (q0, q1, q2, q_-, q_e) with the Def. of the shrinking set norms.

    q_b = chi q carries the modes; the projections are against the rho-weighted
    basis on the same grid used for time stepping.
    """
    y = basis.y
    chi = cutoff_chi(y, s, params.K)
    qb = chi * q_values
    qe = (1.0 - chi) * q_values
    q0 = basis.integrate(qb)
    if basis.ndim == 1:
        q1 = basis.integrate(qb * y) / 2.0
        q2 = basis.integrate(qb * (y * y - 2.0)) / 4.0
        qminus = qb - q0 - q1 * y - (q2 / 2.0) * (y * y - 2.0)
    else:
        nd = basis.ndim
        q1 = 0.0
        q2 = basis.integrate(qb * (y * y - 2.0 * nd)) / (4.0 * nd)
        qminus = qb - q0 - (q2 / 2.0) * (y * y - 2.0 * nd)
    qminus_norm = float(np.max(np.abs(qminus) / (1.0 + np.abs(y) ** 3)))
    qe_norm = float(np.max(np.abs(qe)))
    return ModeDecomposition(
        s=float(s), q0=float(q0), q1=float(q1), q2=float(q2),
        qminus_norm=qminus_norm, qe_norm=qe_norm,
    )


def hermite_coefficient(values: np.ndarray, m: int, basis: HermiteBasis) -> float:
    """Raw (cutoff-free) coefficient of h_m in the L2_rho expansion of values."""
    if basis.ndim != 1:
        raise ValueError("raw Hermite coefficients are only defined on the 1D grid")
    norm = math.factorial(m) * 2.0**m
    return basis.integrate(values * basis.herm[m]) / norm


def reconstruct(dec: ModeDecomposition, basis: HermiteBasis) -> np.ndarray:
    """Finite part of the decomposition back on the grid (q_- and q_e excluded)."""
    y = basis.y
    if basis.ndim == 1:
        return dec.q0 + dec.q1 * y + (dec.q2 / 2.0) * (y * y - 2.0)
    return dec.q0 + (dec.q2 / 2.0) * (y * y - 2.0 * basis.ndim)


@dataclass(frozen=True)
class ShrinkingSetSpec:
    """Time-dependent bounds box S_A(s) on the five components of q."""

    A: float

    def bounds(self, s: float):
        A = self.A
        return (
            A / s**2,
            A / s**2,
            A * A * math.log(s) ** 2 / s**2,
            A / s**2,
            A * A / math.sqrt(s),
        )


@dataclass(frozen=True)
class MembershipReport:
    """Per-component saturation ratios against S_A(s); membership is all <= 1."""

    s: float
    ratios: tuple
    member: bool
    violator: str
    sign: float

    @classmethod
    def from_decomposition(
        cls, dec: ModeDecomposition, sset: ShrinkingSetSpec
    ) -> "MembershipReport":
        b = sset.bounds(dec.s)
        vals = (dec.q0, dec.q1, dec.q2, dec.qminus_norm, dec.qe_norm)
        ratios = tuple(abs(v) / bi for v, bi in zip(vals, b))
        member = all(r <= 1.0 for r in ratios)
        if member:
            violator, sign = "", 0.0
        else:
            worst = int(np.argmax(ratios))
            violator = COMPONENTS[worst]
            sign = math.copysign(1.0, vals[worst]) if worst < 3 else 1.0
        return cls(s=dec.s, ratios=ratios, member=member, violator=violator, sign=sign)


def in_shrinking_set(dec: ModeDecomposition, sset: ShrinkingSetSpec) -> MembershipReport:
    """Membership test with saturation ratios (the set is treated as closed)."""
    return MembershipReport.from_decomposition(dec, sset)
