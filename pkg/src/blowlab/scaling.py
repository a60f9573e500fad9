"""Blowup-rate machinery: the rate ODE, its similarity-time tabulation, and h(s).

The rate psi(t) solves psi' = psi^p * ln^alpha(psi^2 + 2) and diverges at the
blowup time T.  Everything here works with ell(s) = ln psi1(s), where
psi1(s) = psi(T - e^{-s}); psi1 itself grows like e^{s/(p-1)} and would
overflow long before the interesting range of s.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

__all__ = [
    "ProblemParams",
    "ScalingMap",
    "kappa_alpha",
    "tail_time_integral",
    "log_tail_time_integral",
    "anchor_ell",
    "build_scaling_map",
    "h_expansion",
    "ln_psi1_expansion",
]


class InvalidParameter(ValueError):
    """Raised when a physical or construction parameter is out of range."""


@dataclass(frozen=True)
class ProblemParams:
    """Physical and construction parameters (p, alpha, n, A, K, s0)."""

    p: float
    alpha: float
    n: int = 1
    A: float = 20.0
    K: float = 10.0
    s0: float = 20.0

    def __post_init__(self):
        if not self.p > 1:
            raise InvalidParameter(f"p must be > 1, got {self.p}")
        if self.n < 1 or int(self.n) != self.n:
            raise InvalidParameter(f"n must be a positive integer, got {self.n}")
        if self.A < 1:
            raise InvalidParameter(f"A must be >= 1, got {self.A}")
        if self.K < 1:
            raise InvalidParameter(f"K must be >= 1, got {self.K}")
        if self.s0 < 1:
            raise InvalidParameter(f"s0 must be >= 1, got {self.s0}")


def kappa_alpha(params: ProblemParams) -> float:
    """Limit constant kappa_alpha = (p-1)^{-1/(p-1)} ((p-1)/2)^{alpha/(p-1)}."""
    p, a = params.p, params.alpha
    return (p - 1.0) ** (-1.0 / (p - 1.0)) * ((p - 1.0) / 2.0) ** (a / (p - 1.0))


def _log_factor(v: float) -> float:
    # ln(e^{2v} + 2), overflow-free for any v
    return 2.0 * v + math.log1p(2.0 * math.exp(-2.0 * v)) if v > -300.0 else math.log(
        math.exp(2.0 * v) + 2.0
    )


def _ln_tail_integral(ell: float, params: ProblemParams) -> float:
    """ln of int_{e^ell}^inf du / (u^p ln^alpha(u^2+2)).

    Works in v = ln u with the e^{(1-p) ell} prefactor factored out, so the
    result is finite even when the tail value itself underflows (huge s).
    The quadrature covers [ell, ell + span]; the remainder beyond is the
    integration-by-parts expansion truncated at second order, whose relative
    weight in the total is ~e^{-(p-1) span} and therefore negligible.
    """
    p, a = params.p, params.alpha
    if a == 0.0:
        # closed form keeps the alpha = 0 branch of the module exact
        return (1.0 - p) * ell - math.log(p - 1.0)
    span = 16.0 / (p - 1.0) + 6.0

    def integrand(v):
        return math.exp((1.0 - p) * (v - ell)) * _log_factor(v) ** (-a)

    val, _ = quad(integrand, ell, ell + span, epsabs=0.0, epsrel=1e-12, limit=400)
    big_log = _log_factor(ell + span)
    remainder = (
        math.exp((1.0 - p) * span)
        * big_log ** (-a)
        * (1.0 / (p - 1.0) - 2.0 * a / ((p - 1.0) ** 2 * big_log))
    )
    return (1.0 - p) * ell + math.log(val + remainder)


def log_tail_time_integral(ell: float, params: ProblemParams) -> float:
    """Tail integral with log-domain lower endpoint e^ell (may underflow for huge ell)."""
    return math.exp(_ln_tail_integral(ell, params))


def tail_time_integral(Psi: float, params: ProblemParams) -> float:
    """T - t as a function of the current rate value Psi = psi(t) (Psi > 1)."""
    if params.p <= 1:
        raise InvalidParameter("tail integral diverges for p <= 1")
    if Psi <= 1.0:
        raise ValueError(f"Psi must be > 1, got {Psi}")
    return log_tail_time_integral(math.log(Psi), params)


def anchor_ell(s_at: float, params: ProblemParams) -> float:
    """Solve tail_time_integral(e^ell) = e^{-s_at} for ell = ln psi1(s_at).

    This is the normalization that pins T: with it, s = -ln(T - t) exactly.
    """
    p, a = params.p, params.alpha
    if a == 0.0:
        return (s_at - math.log(p - 1.0)) / (p - 1.0)
    guess = (
        s_at / (p - 1.0)
        - a * math.log(max(s_at, 2.0)) / (p - 1.0)
        + math.log(kappa_alpha(params))
    )

    def g(ell):
        return _ln_tail_integral(ell, params) + s_at

    lo, hi = guess - 4.0, guess + 4.0
    glo, ghi = g(lo), g(hi)
    widen = 0
    while glo * ghi > 0.0:
        lo -= 4.0
        hi += 4.0
        glo, ghi = g(lo), g(hi)
        widen += 1
        if widen > 8:
            raise RuntimeError(
                f"anchor bracket failure at s={s_at}: g({lo})={glo}, g({hi})={ghi}"
            )
    return brentq(g, lo, hi, xtol=1e-14, rtol=8.9e-16)


def _h_of(s: float, ell: float, p: float, a: float) -> float:
    # h(s) = e^{-s} psi1^{p-1} ln^alpha(psi1^2 + 2), all in log domain
    return math.exp(-s + (p - 1.0) * ell) * _log_factor(ell) ** a


@dataclass
class ScalingMap:
    """Tabulated ell(s) = ln psi1(s) and h(s) on a uniform s grid.

    Immutable after construction; share freely across threads.
    """

    params: ProblemParams
    s_grid: np.ndarray
    ell: np.ndarray
    h: np.ndarray
    ds_table: float = field(default=1e-3)

    @property
    def s_min(self) -> float:
        return float(self.s_grid[0])

    @property
    def s_max(self) -> float:
        return float(self.s_grid[-1])

    def _index(self, s):
        x = (np.asarray(s, dtype=float) - self.s_grid[0]) / self.ds_table
        i = np.clip(x.astype(int), 0, len(self.s_grid) - 2)
        return i, x - i

    def ell_at(self, s):
        """Linear interpolation of ell on the table."""
        i, f = self._index(s)
        return (1.0 - f) * self.ell[i] + f * self.ell[i + 1]

    def h_at(self, s):
        i, f = self._index(s)
        return (1.0 - f) * self.h[i] + f * self.h[i + 1]

    def ratio_to_kappa(self, s) -> np.ndarray:
        """psi1(s) e^{-s/(p-1)} s^{alpha/(p-1)} / kappa_alpha, evaluated in logs."""
        p, a = self.params.p, self.params.alpha
        lr = (
            self.ell_at(s)
            - np.asarray(s) / (p - 1.0)
            + (a / (p - 1.0)) * np.log(s)
            - math.log(kappa_alpha(self.params))
        )
        return np.exp(lr)

    def to_json(self) -> str:
        return json.dumps(
            {
                "p": self.params.p,
                "alpha": self.params.alpha,
                "n": self.params.n,
                "A": self.params.A,
                "K": self.params.K,
                "s0": self.params.s0,
                "s": self.s_grid.tolist(),
                "ell": self.ell.tolist(),
                "h": self.h.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ScalingMap":
        d = json.loads(text)
        params = ProblemParams(
            p=d["p"], alpha=d["alpha"], n=d["n"], A=d["A"], K=d["K"], s0=d["s0"]
        )
        s = np.asarray(d["s"])
        return cls(
            params=params,
            s_grid=s,
            ell=np.asarray(d["ell"]),
            h=np.asarray(d["h"]),
            ds_table=float(s[1] - s[0]),
        )


def build_scaling_map(
    params: ProblemParams,
    s_max: float,
    ds: float = 1e-3,
    store_stride: int = 1,
    validate: bool = True,
) -> ScalingMap:
    """Tabulate ell and h on [s0, s_max] with RK4 at step ds.

    The ODE d ell/ds = h(s, ell) is anchored through the tail-integral
    identity and integrated in the contracting direction: anchoring at s_max
    and sweeping backward.  Forward integration from s0 is exponentially
    unstable (anchor error grows like e^{s - s0}, the usual blowup-time
    sensitivity), so the table is built backward and then checked against an
    independent anchor at s0.
    """
    s0 = params.s0
    if not s_max > s0:
        raise InvalidParameter(f"s_max must exceed s0={s0}, got {s_max}")
    p, a = params.p, params.alpha
    n_steps = int(math.ceil((s_max - s0) / ds - 1e-9))
    # keep the stored grid uniform: interpolation assumes constant spacing
    n_steps += (-n_steps) % store_stride
    s_hi = s0 + n_steps * ds

    from .kernels import ell_backward_sweep

    ell_full = ell_backward_sweep(anchor_ell(s_hi, params), s0, ds, n_steps, p, a)

    if validate:
        mismatch = abs(ell_full[0] - anchor_ell(s0, params))
        if mismatch > 1e-9:
            raise RuntimeError(
                f"scaling map failed anchor cross-check at s0: |d ell| = {mismatch:.3e}"
            )

    idx = np.arange(0, n_steps + 1, store_stride)
    s_grid = s0 + idx * ds
    ell_t = ell_full[idx]
    h_t = np.array([_h_of(s_grid[i], ell_t[i], p, a) for i in range(len(idx))])

    if not np.all(np.diff(ell_t) > 0.0):
        raise RuntimeError("scaling map violates monotonicity of ell")
    if not np.all(h_t > 0.0):
        raise RuntimeError("scaling map produced non-positive h")

    return ScalingMap(
        params=params,
        s_grid=s_grid,
        ell=ell_t,
        h=h_t,
        ds_table=ds * store_stride,
    )


def h_expansion(s, params: ProblemParams):
    """Asymptotic form (1/(p-1)) (1 - alpha/s - alpha^2 ln s / s^2)."""
    p, a = params.p, params.alpha
    s = np.asarray(s, dtype=float)
    return (1.0 / (p - 1.0)) * (1.0 - a / s - a * a * np.log(s) / s**2)


def ln_psi1_expansion(s, params: ProblemParams):
    """Asymptotic form s/(p-1) - alpha ln(s)/(p-1)."""
    p, a = params.p, params.alpha
    s = np.asarray(s, dtype=float)
    return s / (p - 1.0) - a * np.log(s) / (p - 1.0)
