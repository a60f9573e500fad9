"""Analytic terms of the similarity-variable dynamics.

Profiles f0 and varphi with closed-form derivatives, the potential V, the
nonlinear terms B, D (split as D1 + D2), L, N, and the remainder R.  The
log-ratio ln^alpha(psi1^2 z^2 + 2) / ln^alpha(psi1^2 + 2) is evaluated through
ell = ln psi1 and never forms psi1 itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scaling import ProblemParams, ScalingMap

__all__ = [
    "TermContext",
    "f0",
    "f0_prime",
    "f0_second",
    "varphi",
    "varphi_ds",
    "stable_log_ratio",
    "potential_V",
    "term_B",
    "term_L",
    "term_D",
    "term_R",
    "term_N",
    "signed_power",
]

LN2 = math.log(2.0)


@dataclass(frozen=True)
class TermContext:
    """Problem parameters plus the scaling map the term formulas read h and ell from."""

    params: ProblemParams
    scaling: ScalingMap

    def h(self, s):
        return self.scaling.h_at(s)

    def ell(self, s):
        return self.scaling.ell_at(s)


# ---------------------------------------------------------------------------
# profiles

def f0(z, params: ProblemParams):
    """Blowup profile (1 + (p-1)|z|^2 / 4p)^{-1/(p-1)}."""
    p = params.p
    c = (p - 1.0) / (4.0 * p)
    return (1.0 + c * np.asarray(z, dtype=float) ** 2) ** (-1.0 / (p - 1.0))


def f0_prime(z, params: ProblemParams):
    p = params.p
    c = (p - 1.0) / (4.0 * p)
    z = np.asarray(z, dtype=float)
    base = 1.0 + c * z * z
    return -(2.0 * c / (p - 1.0)) * z * base ** (-1.0 / (p - 1.0) - 1.0)


def f0_second(z, params: ProblemParams):
    p = params.p
    c = (p - 1.0) / (4.0 * p)
    z = np.asarray(z, dtype=float)
    base = 1.0 + c * z * z
    e = -1.0 / (p - 1.0)
    return (
        -(2.0 * c / (p - 1.0)) * base ** (e - 1.0)
        - (2.0 * c / (p - 1.0)) * z * (e - 1.0) * base ** (e - 2.0) * 2.0 * c * z
    )


def varphi(y, s, params: ProblemParams):
    """Asymptotic profile f0(y/sqrt(s)) + n/(2ps)."""
    return f0(np.asarray(y) / math.sqrt(s), params) + params.n / (2.0 * params.p * s)


def varphi_ds(y, s, params: ProblemParams):
    """Closed-form d/ds of varphi at fixed y."""
    z = np.asarray(y, dtype=float) / math.sqrt(s)
    return -z * f0_prime(z, params) / (2.0 * s) - params.n / (2.0 * params.p * s * s)


def varphi_laplacian(y, s, params: ProblemParams):
    """Radial Laplacian of varphi in n dimensions."""
    n = params.n
    z = np.asarray(y, dtype=float) / math.sqrt(s)
    fpp = f0_second(z, params)
    if n == 1:
        return fpp / s
    fp = f0_prime(z, params)
    with np.errstate(divide="ignore", invalid="ignore"):
        rad = np.where(z != 0.0, fp / np.where(z != 0.0, z, 1.0), fpp)
    return (fpp + (n - 1) * rad) / s


# ---------------------------------------------------------------------------
# stable log arithmetic

def _log_of_lnarg(z, ell):
    """ln(psi1^2 z^2 + 2) = logaddexp(2(ell + ln|z|), ln 2), total in z."""
    z = np.asarray(z, dtype=float)
    out = np.full(z.shape, LN2)
    nz = z != 0.0
    if np.any(nz):
        out = np.where(nz, np.logaddexp(2.0 * (ell + np.log(np.abs(np.where(nz, z, 1.0)))), LN2), out)
    return out


def stable_log_ratio(z, s, ctx: TermContext):
    """ln^alpha(psi1^2 z^2 + 2) / ln^alpha(psi1^2 + 2), no overflow for any ell.

    The numerator and denominator logs are both >= ln 2, so the ratio is a
    positive power of a positive number; alpha = 0 returns exactly 1.
    """
    a = ctx.params.alpha
    if a == 0.0:
        return np.ones_like(np.asarray(z, dtype=float))
    ell = ctx.ell(s)
    num = _log_of_lnarg(z, ell)
    den = np.logaddexp(2.0 * ell, LN2)
    if a == 1.0:
        return num / den
    return np.exp(a * (np.log(num) - np.log(den)))


def signed_power(v, p: float):
    """|v|^{p-1} v with v = 0 mapped to 0, valid for non-integer p."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.abs(v) ** p


# ---------------------------------------------------------------------------
# terms of the q equation

def potential_V(y, s, ctx: TermContext):
    """V = p/(p-1) (varphi^{p-1} - 1)."""
    p = ctx.params.p
    ph = varphi(y, s, ctx.params)
    return (p / (p - 1.0)) * (ph ** (p - 1.0) - 1.0)


def term_B(q, y, s, ctx: TermContext):
    """B = (|q+phi|^{p-1}(q+phi) - phi^p - p phi^{p-1} q) / (p-1)."""
    p = ctx.params.p
    ph = varphi(y, s, ctx.params)
    v = np.asarray(q, dtype=float) + ph
    return (signed_power(v, p) - ph**p - p * ph ** (p - 1.0) * q) / (p - 1.0)


def term_L(v, s, ctx: TermContext):
    """L(v, s) = stable_log_ratio(v, s) - 1."""
    return stable_log_ratio(v, s, ctx) - 1.0


def term_D(q, y, s, ctx: TermContext, v_cap: float = 1e3):
    """D = D1 + D2 with D1 = (h - 1/(p-1)) (|v|^{p-1} v - v), D2 = h |v|^{p-1} v L(v).

    This is the decomposition under which the q equation is exactly equivalent
    to the w equation; identically zero when alpha = 0.
    """
    p = ctx.params.p
    if ctx.params.alpha == 0.0:
        return np.zeros_like(np.asarray(q, dtype=float))
    ph = varphi(y, s, ctx.params)
    v = np.asarray(q, dtype=float) + ph
    if np.max(np.abs(v)) > v_cap:
        raise ValueError(f"state escaped the physical regime: max|q+phi| > {v_cap}")
    h = ctx.h(s)
    vp = signed_power(v, p)
    d1 = (h - 1.0 / (p - 1.0)) * (vp - v)
    d2 = h * vp * term_L(v, s, ctx)
    return d1 + d2


def term_R(y, s, ctx: TermContext):
    """R = Lap phi - y.grad phi / 2 - phi/(p-1) + phi^p/(p-1) - d_s phi (closed forms)."""
    params = ctx.params
    p = params.p
    y = np.asarray(y, dtype=float)
    z = y / math.sqrt(s)
    ph = varphi(y, s, params)
    lap = varphi_laplacian(y, s, params)
    ygrad = 0.5 * z * f0_prime(z, params)
    return lap - ygrad - ph / (p - 1.0) + ph**p / (p - 1.0) - varphi_ds(y, s, params)


def term_N(wbar, s, ctx: TermContext):
    """N = h |w+1|^{p-1}(w+1) stable_log_ratio(w+1, s) - h (w+1) - w for w = wbar."""
    p = ctx.params.p
    wbar = np.asarray(wbar, dtype=float)
    h = ctx.h(s)
    v = wbar + 1.0
    return h * signed_power(v, p) * stable_log_ratio(v, s, ctx) - h * v - wbar
