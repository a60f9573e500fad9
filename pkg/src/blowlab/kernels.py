"""Time-stepping kernels: numba-jitted hot path with a pure-numpy twin.

Both backends implement the same contract:

    rhs(w, y, dy, ndim, s, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab)
    advance(w, y, dy, ndim, s, ds, n_steps, mode, ...) -> (w_new, finite_flag)

modes: 0 full w equation, 1 pure linearized operator L, 2 L + V, 3 full q
equation (terms V, B, R, D inlined from their closed forms).

Backend selection: numba when importable, unless the environment variable
BLOWLAB_NUMPY is set to a truthy value, which forces the vectorized numpy
path (the benchmark CLI compares the two).

The in-kernel log-ratio uses ln(psi1^2 w^2 + 2) = 2 ell + ln(w^2 + 2 e^{-2 ell}),
exact while 2 e^{-2 ell} stays representable; run setup enforces ell < 300.
"""

from __future__ import annotations

import math
import os

import numpy as np

MODE_FULL_W = 0
MODE_PURE_L = 1
MODE_L_PLUS_V = 2
MODE_FULL_Q = 3

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


def numpy_forced() -> bool:
    return os.environ.get("BLOWLAB_NUMPY", "").lower() in ("1", "true", "yes")


def backend_name() -> str:
    return "numpy" if (numpy_forced() or not NUMBA_AVAILABLE) else "numba"


# ---------------------------------------------------------------------------
# numba backend: scalar loops

@njit(cache=True)
def _interp_tables(s, tab_s0, tab_ds, ell_tab, h_tab):
    x = (s - tab_s0) / tab_ds
    i = int(x)
    if i < 0:
        i = 0
    if i > len(ell_tab) - 2:
        i = len(ell_tab) - 2
    f = x - i
    ell = (1.0 - f) * ell_tab[i] + f * ell_tab[i + 1]
    h = (1.0 - f) * h_tab[i] + f * h_tab[i + 1]
    return ell, h


@njit(cache=True)
def _rhs_nb(w, y, dy, ndim, s, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab, out):
    n = len(w)
    inv_dy2 = 1.0 / (dy * dy)
    inv_2dy = 0.5 / dy

    ell = 0.0
    h = 0.0
    c = 0.0
    den = 1.0
    if mode == MODE_FULL_W or mode == MODE_FULL_Q:
        ell, h = _interp_tables(s, tab_s0, tab_ds, ell_tab, h_tab)
        c = 2.0 * math.exp(-2.0 * ell)
        den = 2.0 * ell + math.log1p(c)

    prof_c = (p - 1.0) / (4.0 * p)
    prof_e = -1.0 / (p - 1.0)
    shift = ndim / (2.0 * p * s)
    sqrt_s = math.sqrt(s)

    for i in range(n):
        # second-order stencils; outer boundary: zero curvature + one-sided advection
        if i == 0:
            if ndim == 1:
                lap = 0.0
                adv = -0.5 * y[0] * (w[1] - w[0]) / dy
            else:
                lap = 2.0 * ndim * (w[1] - w[0]) * inv_dy2
                adv = 0.0
        elif i == n - 1:
            lap = 0.0
            adv = -0.5 * y[i] * (w[i] - w[i - 1]) / dy
        else:
            lap = (w[i + 1] - 2.0 * w[i] + w[i - 1]) * inv_dy2
            grad = (w[i + 1] - w[i - 1]) * inv_2dy
            if ndim > 1:
                lap += (ndim - 1) * grad / y[i]
            adv = -0.5 * y[i] * grad

        wi = w[i]

        if mode == MODE_PURE_L:
            out[i] = lap + adv + wi
            continue

        if mode == MODE_L_PLUS_V or mode == MODE_FULL_Q:
            z = y[i] / sqrt_s
            base = 1.0 + prof_c * z * z
            if p == 3.0:
                f0v = 1.0 / math.sqrt(base)
            elif p == 2.0:
                f0v = 1.0 / base
            else:
                f0v = base**prof_e
            phi = f0v + shift
            if p == 3.0:
                php1 = phi * phi
            elif p == 2.0:
                php1 = phi
            else:
                php1 = abs(phi) ** (p - 1.0)
            V = (p / (p - 1.0)) * (php1 - 1.0)
            if mode == MODE_L_PLUS_V:
                out[i] = lap + adv + wi + V * wi
                continue

            # full q equation: L q + V q + B + R + D
            php = php1 * phi
            f0p = -(2.0 * prof_c / (p - 1.0)) * z * (f0v / base)
            f0pp = -(2.0 * prof_c / (p - 1.0)) * (
                f0v / base + z * (prof_e - 1.0) * (f0v / (base * base)) * 2.0 * prof_c * z
            )
            if ndim == 1:
                lap_phi = f0pp / s
            else:
                if z != 0.0:
                    lap_phi = (f0pp + (ndim - 1) * f0p / z) / s
                else:
                    lap_phi = ndim * f0pp / s
            dphi_ds = -z * f0p / (2.0 * s) - ndim / (2.0 * p * s * s)
            R = (
                lap_phi
                - 0.5 * z * f0p
                - phi / (p - 1.0)
                + php / (p - 1.0)
                - dphi_ds
            )
            v = wi + phi
            if p == 3.0:
                vp = v * v * v
            elif p == 2.0:
                vp = v * abs(v)
            else:
                vp = math.copysign(abs(v) ** p, v) if v != 0.0 else 0.0
            B = (vp - php - p * php1 * wi) / (p - 1.0)
            if alpha == 0.0:
                D = 0.0
            else:
                num = 2.0 * ell + math.log(v * v + c)
                r = num / den
                if alpha == 1.0:
                    lam = r
                elif alpha == -1.0:
                    lam = 1.0 / r
                else:
                    lam = r**alpha
                D = (h - 1.0 / (p - 1.0)) * (vp - v) + h * vp * (lam - 1.0)
            out[i] = lap + adv + wi + V * wi + B + R + D
            continue

        # full w equation: -h w + h |w|^{p-1} w * log-ratio^alpha
        if p == 3.0:
            wp = wi * wi * wi
        elif p == 2.0:
            wp = wi * abs(wi)
        else:
            wp = math.copysign(abs(wi) ** p, wi) if wi != 0.0 else 0.0
        if alpha == 0.0:
            lam = 1.0
        else:
            num = 2.0 * ell + math.log(wi * wi + c)
            r = num / den
            if alpha == 1.0:
                lam = r
            elif alpha == -1.0:
                lam = 1.0 / r
            else:
                lam = r**alpha
        out[i] = lap + adv - h * wi + h * wp * lam


@njit(cache=True)
def _advance_nb(w, y, dy, ndim, s, ds, n_steps, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab):
    n = len(w)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    wt = np.empty(n)
    for step in range(n_steps):
        sc = s + step * ds
        _rhs_nb(w, y, dy, ndim, sc, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab, k1)
        for i in range(n):
            wt[i] = w[i] + 0.5 * ds * k1[i]
        _rhs_nb(wt, y, dy, ndim, sc + 0.5 * ds, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab, k2)
        for i in range(n):
            wt[i] = w[i] + 0.5 * ds * k2[i]
        _rhs_nb(wt, y, dy, ndim, sc + 0.5 * ds, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab, k3)
        for i in range(n):
            wt[i] = w[i] + ds * k3[i]
        _rhs_nb(wt, y, dy, ndim, sc + ds, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab, k4)
        for i in range(n):
            w[i] = w[i] + (ds / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    ok = True
    for i in range(n):
        if not np.isfinite(w[i]):
            ok = False
            break
    return ok


@njit(cache=True)
def _ell_backward_sweep_nb(ell_end, s0, ds, n_steps, p, alpha):
    ell = np.empty(n_steps + 1)
    ell[n_steps] = ell_end
    e = ell_end
    half = 0.5 * ds
    for k in range(n_steps, 0, -1):
        s = s0 + k * ds
        k1 = math.exp(-s + (p - 1.0) * e) * (2.0 * e + math.log1p(2.0 * math.exp(-2.0 * e))) ** alpha
        e2 = e - half * k1
        k2 = math.exp(-(s - half) + (p - 1.0) * e2) * (2.0 * e2 + math.log1p(2.0 * math.exp(-2.0 * e2))) ** alpha
        e3 = e - half * k2
        k3 = math.exp(-(s - half) + (p - 1.0) * e3) * (2.0 * e3 + math.log1p(2.0 * math.exp(-2.0 * e3))) ** alpha
        e4 = e - ds * k3
        k4 = math.exp(-(s - ds) + (p - 1.0) * e4) * (2.0 * e4 + math.log1p(2.0 * math.exp(-2.0 * e4))) ** alpha
        e -= (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ell[k - 1] = e
    return ell


def _ell_backward_sweep_py(ell_end, s0, ds, n_steps, p, alpha):
    def f(s, e):
        return math.exp(-s + (p - 1.0) * e) * (
            2.0 * e + math.log1p(2.0 * math.exp(-2.0 * e))
        ) ** alpha

    ell = np.empty(n_steps + 1)
    ell[n_steps] = ell_end
    e = ell_end
    half = 0.5 * ds
    for k in range(n_steps, 0, -1):
        s = s0 + k * ds
        k1 = f(s, e)
        k2 = f(s - half, e - half * k1)
        k3 = f(s - half, e - half * k2)
        k4 = f(s - ds, e - ds * k3)
        e -= (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ell[k - 1] = e
    return ell


def ell_backward_sweep(ell_end, s0, ds, n_steps, p, alpha):
    """RK4 sweep of d ell/ds = h(s, ell) from s0 + n ds down to s0."""
    if backend_name() == "numba":
        return _ell_backward_sweep_nb(ell_end, s0, ds, n_steps, p, alpha)
    return _ell_backward_sweep_py(ell_end, s0, ds, n_steps, p, alpha)


# ---------------------------------------------------------------------------
# numpy backend: vectorized twin

def _interp_tables_np(s, tab_s0, tab_ds, ell_tab, h_tab):
    x = (s - tab_s0) / tab_ds
    i = min(max(int(x), 0), len(ell_tab) - 2)
    f = x - i
    return (
        (1.0 - f) * ell_tab[i] + f * ell_tab[i + 1],
        (1.0 - f) * h_tab[i] + f * h_tab[i + 1],
    )


def _signed_pow_np(v, p):
    if p == 3.0:
        return v * v * v
    if p == 2.0:
        return v * np.abs(v)
    return np.sign(v) * np.abs(v) ** p


def _stencils_np(w, y, dy, ndim):
    lap = np.empty_like(w)
    adv = np.empty_like(w)
    grad = (w[2:] - w[:-2]) / (2.0 * dy)
    lap[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / (dy * dy)
    if ndim > 1:
        lap[1:-1] += (ndim - 1) * grad / y[1:-1]
    adv[1:-1] = -0.5 * y[1:-1] * grad
    if ndim == 1:
        lap[0] = 0.0
        adv[0] = -0.5 * y[0] * (w[1] - w[0]) / dy
    else:
        lap[0] = 2.0 * ndim * (w[1] - w[0]) / (dy * dy)
        adv[0] = 0.0
    lap[-1] = 0.0
    adv[-1] = -0.5 * y[-1] * (w[-1] - w[-2]) / dy
    return lap, adv


def _profile_np(y, s, ndim, p):
    prof_c = (p - 1.0) / (4.0 * p)
    z = y / math.sqrt(s)
    base = 1.0 + prof_c * z * z
    f0v = base ** (-1.0 / (p - 1.0))
    return z, base, f0v, f0v + ndim / (2.0 * p * s)


def _log_ratio_np(v, ell, c, den, alpha):
    num = 2.0 * ell + np.log(v * v + c)
    r = num / den
    if alpha == 1.0:
        return r
    if alpha == -1.0:
        return 1.0 / r
    return r**alpha


def _rhs_np(w, y, dy, ndim, s, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab):
    lap, adv = _stencils_np(w, y, dy, ndim)
    if mode == MODE_PURE_L:
        return lap + adv + w

    if mode == MODE_L_PLUS_V or mode == MODE_FULL_Q:
        z, base, f0v, phi = _profile_np(y, s, ndim, p)
        php1 = np.abs(phi) ** (p - 1.0)
        V = (p / (p - 1.0)) * (php1 - 1.0)
        if mode == MODE_L_PLUS_V:
            return lap + adv + w + V * w
        ell, h = _interp_tables_np(s, tab_s0, tab_ds, ell_tab, h_tab)
        c = 2.0 * math.exp(-2.0 * ell)
        den = 2.0 * ell + math.log1p(c)
        prof_c = (p - 1.0) / (4.0 * p)
        prof_e = -1.0 / (p - 1.0)
        php = php1 * phi
        f0p = -(2.0 * prof_c / (p - 1.0)) * z * (f0v / base)
        f0pp = -(2.0 * prof_c / (p - 1.0)) * (
            f0v / base + z * (prof_e - 1.0) * (f0v / (base * base)) * 2.0 * prof_c * z
        )
        if ndim == 1:
            lap_phi = f0pp / s
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                rad = np.where(z != 0.0, f0p / np.where(z != 0.0, z, 1.0), f0pp)
            lap_phi = (f0pp + (ndim - 1) * rad) / s
        dphi_ds = -z * f0p / (2.0 * s) - ndim / (2.0 * p * s * s)
        R = lap_phi - 0.5 * z * f0p - phi / (p - 1.0) + php / (p - 1.0) - dphi_ds
        v = w + phi
        vp = _signed_pow_np(v, p)
        B = (vp - php - p * php1 * w) / (p - 1.0)
        if alpha == 0.0:
            D = 0.0
        else:
            lam = _log_ratio_np(v, ell, c, den, alpha)
            D = (h - 1.0 / (p - 1.0)) * (vp - v) + h * vp * (lam - 1.0)
        return lap + adv + w + V * w + B + R + D

    ell, h = _interp_tables_np(s, tab_s0, tab_ds, ell_tab, h_tab)
    wp = _signed_pow_np(w, p)
    if alpha == 0.0:
        lam = 1.0
    else:
        c = 2.0 * math.exp(-2.0 * ell)
        den = 2.0 * ell + math.log1p(c)
        lam = _log_ratio_np(w, ell, c, den, alpha)
    return lap + adv - h * w + h * wp * lam


def _advance_np(w, y, dy, ndim, s, ds, n_steps, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab):
    args = (y, dy, ndim)
    for step in range(n_steps):
        sc = s + step * ds
        k1 = _rhs_np(w, *args, sc, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab)
        k2 = _rhs_np(w + 0.5 * ds * k1, *args, sc + 0.5 * ds, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab)
        k3 = _rhs_np(w + 0.5 * ds * k2, *args, sc + 0.5 * ds, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab)
        k4 = _rhs_np(w + ds * k3, *args, sc + ds, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab)
        w = w + (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return w, bool(np.all(np.isfinite(w)))


# ---------------------------------------------------------------------------
# public dispatch

_EMPTY = np.zeros(2)


def _require_tables(mode, ell_tab):
    if mode in (MODE_FULL_W, MODE_FULL_Q) and ell_tab is None:
        raise ValueError("modes 0 and 3 need the scaling tables (ell, h)")


def rhs(w, y, dy, ndim, s, mode, p, alpha, tab_s0=0.0, tab_ds=1.0, ell_tab=None, h_tab=None):
    """Single right-hand-side evaluation on the active backend."""
    _require_tables(mode, ell_tab)
    ell_tab = _EMPTY if ell_tab is None else ell_tab
    h_tab = _EMPTY if h_tab is None else h_tab
    if backend_name() == "numba":
        out = np.empty_like(w)
        _rhs_nb(
            np.ascontiguousarray(w), np.ascontiguousarray(y), dy, ndim, s, mode,
            p, alpha, tab_s0, tab_ds,
            np.ascontiguousarray(ell_tab), np.ascontiguousarray(h_tab), out,
        )
        return out
    return _rhs_np(w, y, dy, ndim, s, mode, p, alpha, tab_s0, tab_ds, ell_tab, h_tab)


def advance(w, y, dy, ndim, s, ds, n_steps, mode, p, alpha,
            tab_s0=0.0, tab_ds=1.0, ell_tab=None, h_tab=None):
    """March n_steps RK4 steps from similarity time s; returns (w, finite_flag)."""
    _require_tables(mode, ell_tab)
    ell_tab = _EMPTY if ell_tab is None else ell_tab
    h_tab = _EMPTY if h_tab is None else h_tab
    if backend_name() == "numba":
        w = np.array(w, dtype=float)
        ok = _advance_nb(
            w, np.ascontiguousarray(y), dy, ndim, s, ds, n_steps, mode, p, alpha,
            tab_s0, tab_ds, np.ascontiguousarray(ell_tab), np.ascontiguousarray(h_tab),
        )
        return w, bool(ok)
    return _advance_np(
        np.array(w, dtype=float), y, dy, ndim, s, ds, n_steps, mode, p, alpha,
        tab_s0, tab_ds, ell_tab, h_tab,
    )
