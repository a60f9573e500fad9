"""Shared sweep predicates for the appendix-lemma bounds.

Each sweep returns measured scaled quantities; the callers assert boundedness
or stability.  Kept out of the package: these are verification harnesses, not
solver functionality.
"""

import math

import numpy as np

from blowlab.terms import (
    TermContext,
    potential_V,
    signed_power,
    stable_log_ratio,
    term_B,
    term_D,
    term_N,
    term_R,
)


def sweep_N_remainder(ctx: TermContext, w_vals, s_vals):
    """max |N - p wbar^2 / 2| / (|w| ln s / s^2 + w^2 / s + |w|^3) over the sweep."""
    p = ctx.params.p
    worst = 0.0
    for s in s_vals:
        for w in w_vals:
            n_val = float(term_N(w, s, ctx))
            envelope = (
                abs(w) * math.log(s) / s**2 + w * w / s + abs(w) ** 3
            )
            worst = max(worst, abs(n_val - p * w * w / 2.0) / envelope)
    return worst


def sweep_log_ratio_bound(ctx: TermContext, K1: float, s_vals):
    """s * sup_{|z|<=K1} |h z^{p-1} z ratio - z^{p-1} z/(p-1)| for each s."""
    p = ctx.params.p
    z = np.linspace(-K1, K1, 801)
    out = []
    for s in s_vals:
        h = float(ctx.h(s))
        val = h * signed_power(z, p) * stable_log_ratio(z, s, ctx) - signed_power(z, p) / (
            p - 1.0
        )
        out.append(s * float(np.max(np.abs(val))))
    return np.array(out)


def sweep_D_interior(ctx: TermContext, s_vals):
    """|D(q=0, y=0, s)| * s^3 / ln s for each s (Lemma-interior scaling)."""
    out = []
    for s in s_vals:
        d = float(term_D(np.zeros(1), np.zeros(1), s, ctx)[0])
        out.append(abs(d) * s**3 / math.log(s))
    return np.array(out)


def sweep_D_global(ctx: TermContext, y, s_vals):
    """max_y |D(q=0, y, s)| * s for each s (global 1/s bound)."""
    q = np.zeros_like(y)
    return np.array(
        [s * float(np.max(np.abs(term_D(q, y, s, ctx)))) for s in s_vals]
    )


def sweep_V_bounds(ctx: TermContext, y, s_vals):
    """(global |V| s/(1+y^2), inner expansion residual * s^2/(1+y^4)) per s."""
    n = ctx.params.n
    glob, inner = [], []
    for s in s_vals:
        V = potential_V(y, s, ctx)
        glob.append(float(np.max(np.abs(V) * s / (1.0 + y**2))))
        mask = np.abs(y) <= ctx.params.K * math.sqrt(s)
        resid = V[mask] + (y[mask] ** 2 - 2.0 * n) / (4.0 * s)
        inner.append(float(np.max(np.abs(resid) * s**2 / (1.0 + y[mask] ** 4))))
    return np.array(glob), np.array(inner)


def sweep_R_bounds(ctx: TermContext, y, s_vals):
    """(sup_y |R| * s per s, s^2 R(0, s) per s)."""
    sup_scaled, center = [], []
    for s in s_vals:
        R = term_R(y, s, ctx)
        sup_scaled.append(s * float(np.max(np.abs(R))))
        center.append(s * s * float(term_R(np.zeros(1), s, ctx)[0]))
    return np.array(sup_scaled), np.array(center)


def sweep_B_constant(ctx: TermContext, y, s: float, q_vals):
    """max |B| / |q|^{min(p,2)} over the sweep."""
    pbar = min(ctx.params.p, 2.0)
    worst = 0.0
    for q in q_vals:
        if abs(q) < 1e-12:
            continue
        b = term_B(np.full_like(y, q), y, s, ctx)
        worst = max(worst, float(np.max(np.abs(b))) / abs(q) ** pbar)
    return worst
