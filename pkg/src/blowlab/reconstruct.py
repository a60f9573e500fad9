"""Back to physical variables: profile convergence and final-profile diagnostics.

The similarity map is u(x, t) = psi(t) w(y, s) with y = x / sqrt(T - t) and
s = -ln(T - t); the tail-integral anchor pins T, so T - t = e^{-s} exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .integrator import TrajectoryRecord
from .terms import TermContext

__all__ = [
    "PhysicalSnapshot",
    "ProfileSample",
    "ProfileSummary",
    "to_physical",
    "to_similarity",
    "physical_snapshot",
    "theorem_residual",
    "final_profile_formula_log",
    "final_profile",
    "center_tracking",
]


def to_physical(y, s: float):
    """(y, s) -> x via the shared factor e^{-s/2}.

    The pair round-trips to within one ulp: both directions use the same
    factor, but a multiply-divide cycle through a transcendental scale can
    still re-round the last bit.
    """
    return np.asarray(y) * math.exp(-0.5 * s)


def to_similarity(x, s: float):
    return np.asarray(x) / math.exp(-0.5 * s)


@dataclass
class PhysicalSnapshot:
    """u on physical nodes at the time t = T - e^{-s} (T = 0 by the anchor)."""

    t: float
    x_nodes: np.ndarray
    u_values: np.ndarray
    s: float


def physical_snapshot(w_values: np.ndarray, y: np.ndarray, s: float, ctx: TermContext) -> PhysicalSnapshot:
    psi1 = math.exp(float(ctx.ell(s)))
    return PhysicalSnapshot(
        t=-math.exp(-s), x_nodes=to_physical(y, s), u_values=psi1 * w_values, s=s
    )


def theorem_residual(traj: TrajectoryRecord, ctx: TermContext) -> Tuple[np.ndarray, np.ndarray]:
    """Series of sqrt(s) * sup_y |w - f0(y/sqrt(s))| along a survived trajectory."""
    if not traj.survived and traj.s_obs[-1] < traj.params.s0 + 5.0:
        raise ValueError("trajectory did not survive past s0 + 5")
    s = traj.s_obs
    res = np.asarray(traj.residual_sup)
    return s, np.sqrt(s) * res


def final_profile_formula_log(x: float, params) -> float:
    """ln of the final-profile law [(p-1)^2 x^2 / (8p |ln x|)]^{-1/(p-1)} (4|ln x|/(p-1))^{-a/(p-1)}."""
    p, a = params.p, params.alpha
    lx = abs(math.log(abs(x)))
    main = -(1.0 / (p - 1.0)) * (
        2.0 * math.log(p - 1.0) + 2.0 * math.log(abs(x)) - math.log(8.0 * p * lx)
    )
    corr = -(a / (p - 1.0)) * math.log(4.0 * lx / (p - 1.0))
    return main + corr


@dataclass
class ProfileSample:
    x: float
    u_star: Optional[float]
    ln_u_star: Optional[float]
    formula_ratio: Optional[float]
    s_read: Optional[float]
    z_read: Optional[float]
    skipped: str = ""


@dataclass
class ProfileSummary:
    samples: List[ProfileSample]
    fitted_slope: Optional[float]
    expected_slope: float
    dyadic_ratios: List[Tuple[float, float, float]]  # (x, measured, predicted)

    @property
    def accepted(self) -> List[ProfileSample]:
        return [s for s in self.samples if not s.skipped]


def final_profile(
    traj: TrajectoryRecord,
    ctx: TermContext,
    x_samples: Optional[Sequence[float]] = None,
    y_budget_frac: float = 0.9,
    z_freeze: float = 4.0,
) -> ProfileSummary:
    """Approximate u*(x) from stored snapshots and compare to the profile law.

    Each sample is read at the last computed time at which its similarity
    coordinate y = x e^{s/2} is still on the trusted part of the grid; samples
    whose freeze time falls outside the computed s range are skipped with a
    reason.  No extrapolation toward t = T is performed.
    """
    if not traj.snapshots:
        raise ValueError("trajectory carries no snapshots")
    params = traj.params
    y = traj.final_state.y_nodes
    y_budget = y_budget_frac * float(np.abs(y).max())
    snaps = traj.snapshots
    s_vals = np.array([s for s, _ in snaps])

    if x_samples is None:
        x_top = y_budget * math.exp(-0.5 * s_vals[0])
        n_levels = int(math.floor(2.0 * math.log(
            y_budget * math.exp(-0.5 * s_vals[0]) / (z_freeze * math.sqrt(s_vals[-1]) * math.exp(-0.5 * s_vals[-1]))
        ) / math.log(2.0)))
        x_samples = [x_top * 2.0 ** (-j / 2.0) for j in range(max(n_levels, 1))]

    samples: List[ProfileSample] = []
    for x in x_samples:
        s_limit = 2.0 * math.log(y_budget / x)
        if s_limit < s_vals[0]:
            samples.append(ProfileSample(x, None, None, None, None, None,
                                         skipped="outside grid for all computed times"))
            continue
        idx = int(np.searchsorted(s_vals, s_limit, side="right") - 1)
        s_read = float(s_vals[idx])
        y_x = x * math.exp(0.5 * s_read)
        z_read = y_x / math.sqrt(s_read)
        if z_read < z_freeze:
            samples.append(ProfileSample(x, None, None, None, s_read, z_read,
                                         skipped="not frozen within the computed s range"))
            continue
        w_snap = snaps[idx][1]
        w_val = float(np.interp(y_x, y, w_snap))
        if w_val <= 0.0:
            samples.append(ProfileSample(x, None, None, None, s_read, z_read,
                                         skipped="non-positive w at read point"))
            continue
        ln_u = float(ctx.ell(s_read)) + math.log(w_val)
        ln_f = final_profile_formula_log(x, params)
        u_star = math.exp(ln_u) if ln_u < 700.0 else float("inf")
        samples.append(ProfileSample(
            x=x, u_star=u_star, ln_u_star=ln_u,
            formula_ratio=math.exp(ln_u - ln_f), s_read=s_read, z_read=z_read,
        ))

    acc = [s for s in samples if not s.skipped]
    slope = None
    if len(acc) >= 2:
        lx = np.log([s.x for s in acc])
        lu = np.array([s.ln_u_star for s in acc])
        slope = float(np.polyfit(lx, lu, 1)[0])

    by_x = {s.x: s for s in acc}
    dyadic = []
    for s in acc:
        partner = None
        for cand in acc:
            if abs(cand.x - 2.0 * s.x) < 1e-12 * s.x:
                partner = cand
                break
        if partner is not None:
            measured = math.exp(s.ln_u_star - partner.ln_u_star)
            predicted = math.exp(
                final_profile_formula_log(s.x, params)
                - final_profile_formula_log(partner.x, params)
            )
            dyadic.append((s.x, measured, predicted))

    return ProfileSummary(
        samples=samples, fitted_slope=slope,
        expected_slope=-2.0 / (params.p - 1.0), dyadic_ratios=dyadic,
    )


def center_tracking(traj: TrajectoryRecord) -> Tuple[np.ndarray, np.ndarray]:
    """|u(0,t)/psi(t) - 1| = |w(0,s) - 1| along the trajectory."""
    return traj.s_obs, np.abs(np.asarray(traj.center_w) - 1.0)
