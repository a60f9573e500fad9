"""Topological shooting realized as sign-driven bisection.

Initial data q(y, s0) = (A/s0^2)(d0 + d1 y) chi(2y, s0) is launched through
the w equation; trajectories are classified by how they exit the shrinking
set.  The unstable q0 mode (rate 1) makes the radial case a textbook
bisection: exits with q0 sign + and - bracket the surviving parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .integrator import GridState, TrajectoryRecord, make_grid, run
from .scaling import ProblemParams, build_scaling_map
from .spectral import HermiteBasis, ShrinkingSetSpec, cutoff_chi
from .terms import TermContext, varphi

__all__ = [
    "ShotConfig",
    "ExitReport",
    "BracketError",
    "ShootingSession",
    "initial_data",
    "shoot",
    "search",
]

DOMAIN_HALF_WIDTH = 2.0  # the parameter box is [-2, 2]^{1+n}
TRANSIENT_WINDOW = 2.0  # exits later than s0 + this should come from (q0, q1)


class BracketError(RuntimeError):
    """No sign change across the parameter box; carries both endpoint reports."""

    def __init__(self, message, low_report=None, high_report=None):
        super().__init__(message)
        self.low_report = low_report
        self.high_report = high_report


@dataclass(frozen=True)
class ShotConfig:
    """One (d0, d1) probe; radial mode forces d1 = 0."""

    d0: float
    d1: float
    params: ProblemParams

    def __post_init__(self):
        if abs(self.d0) > DOMAIN_HALF_WIDTH or abs(self.d1) > DOMAIN_HALF_WIDTH:
            raise ValueError(f"(d0, d1)=({self.d0}, {self.d1}) outside the [-2, 2] box")


@dataclass
class ExitReport:
    """Exit classification of one shot."""

    d0: float
    d1: float
    exit_s: Optional[float]
    violator: str
    sign: float
    max_ratio_history: np.ndarray
    anomaly: bool = False
    record: Optional[TrajectoryRecord] = None

    @property
    def survived(self) -> bool:
        return self.exit_s is None


class ShootingSession:
    """Shared scaling map, grid and basis for a family of probes."""

    def __init__(
        self,
        params: ProblemParams,
        s_target: float,
        dy: float = 0.05,
        observe_every: float = 0.1,
        ds: Optional[float] = None,
        margin: float = 5.0,
        map_ds: float = 1e-3,
    ):
        self.params = params
        self.s_target = s_target
        self.dy = dy
        self.observe_every = observe_every
        self.ds = ds
        scaling = build_scaling_map(params, s_target + 1.0, ds=map_ds)
        self.ctx = TermContext(params=params, scaling=scaling)
        self.y = make_grid(params, s_target, dy=dy, margin=margin)
        self.basis = HermiteBasis(self.y, params.n)
        self.sset = ShrinkingSetSpec(A=params.A)

    def initial_data(self, shot: ShotConfig) -> GridState:
        """w(y, s0) = varphi(y, s0) + (A/s0^2)(d0 + d1 y) chi(2y, s0)."""
        p = self.params
        y = self.y
        q = (p.A / p.s0**2) * (shot.d0 + shot.d1 * y) * cutoff_chi(2.0 * y, p.s0, p.K)
        w = varphi(y, p.s0, p) + q
        return GridState(
            s=p.s0, y_nodes=y, w_values=w, dy=self.dy,
            y_max=float(np.abs(y).max()), params=p,
        )

    def shoot(
        self,
        shot: ShotConfig,
        s_max: Optional[float] = None,
        store_record: bool = False,
        store_snapshots: bool = False,
    ) -> ExitReport:
        s_max = self.s_target if s_max is None else s_max
        rec = run(
            self.initial_data(shot), self.ctx, s_max, sset=self.sset,
            observe_every=self.observe_every, ds=self.ds, basis=self.basis,
            store_snapshots=store_snapshots,
        )
        sign = rec.exit_sign
        violator = rec.exit_violator
        anomaly = False
        if rec.exit_s is not None and violator not in ("q0", "q1"):
            anomaly = rec.exit_s > self.params.s0 + TRANSIENT_WINDOW
            # bisection still needs a direction: fall back to the q0 sign
            sign = math.copysign(1.0, rec.decs[-1].q0) if rec.decs else 0.0
        return ExitReport(
            d0=shot.d0, d1=shot.d1, exit_s=rec.exit_s, violator=violator,
            sign=sign, max_ratio_history=rec.max_ratio_series(),
            anomaly=anomaly, record=rec if store_record else None,
        )

    def _probe(self, d0, d1, history) -> ExitReport:
        rep = self.shoot(ShotConfig(d0=d0, d1=d1, params=self.params))
        history.append(rep)
        return rep

    def search_radial(
        self,
        tol: float = 1e-12,
        max_probes: int = 200,
        bracket: Optional[Tuple[float, float]] = None,
    ) -> Tuple[ShotConfig, ExitReport, List[ExitReport]]:
        """Bisection on d0 driven by the q0 exit sign.

        An explicit bracket (e.g. around a winner found on a coarser grid)
        is widened automatically until it straddles the sign change, then
        refined as usual.
        """
        history: List[ExitReport] = []
        lo, hi = bracket if bracket else (-DOMAIN_HALF_WIDTH, DOMAIN_HALF_WIDTH)
        lo = max(lo, -DOMAIN_HALF_WIDTH)
        hi = min(hi, DOMAIN_HALF_WIDTH)
        rep_lo = self._probe(lo, 0.0, history)
        rep_hi = self._probe(hi, 0.0, history)
        while not (rep_lo.survived or rep_hi.survived or rep_lo.sign < 0 < rep_hi.sign):
            if lo <= -DOMAIN_HALF_WIDTH and hi >= DOMAIN_HALF_WIDTH:
                break
            width = hi - lo
            lo = max(lo - width, -DOMAIN_HALF_WIDTH)
            hi = min(hi + width, DOMAIN_HALF_WIDTH)
            rep_lo = self._probe(lo, 0.0, history)
            rep_hi = self._probe(hi, 0.0, history)
        if rep_lo.survived:
            return self._finish(lo, 0.0, history)
        if rep_hi.survived:
            return self._finish(hi, 0.0, history)
        if not (rep_lo.sign < 0 < rep_hi.sign):
            raise BracketError(
                f"no admissible bracket on [{lo}, {hi}]: end signs "
                f"({rep_lo.sign}, {rep_hi.sign})",
                low_report=rep_lo, high_report=rep_hi,
            )
        best = max(rep_lo, rep_hi, key=lambda r: r.exit_s)
        for _ in range(max_probes):
            if hi - lo < tol:
                break
            mid = 0.5 * (lo + hi)
            rep = self._probe(mid, 0.0, history)
            if rep.survived:
                return self._finish(mid, 0.0, history)
            if rep.exit_s > best.exit_s:
                best = rep
            if rep.sign > 0:
                hi = mid
            else:
                lo = mid
        return self._finish(best.d0, 0.0, history)

    def search_general(
        self, tol: float = 1e-12, max_probes: int = 400
    ) -> Tuple[ShotConfig, ExitReport, List[ExitReport]]:
        """Alternating coordinate bisection on (d0, d1) via (q0, q1) exit signs."""
        history: List[ExitReport] = []
        lo0, hi0 = -DOMAIN_HALF_WIDTH, DOMAIN_HALF_WIDTH
        lo1, hi1 = -DOMAIN_HALF_WIDTH, DOMAIN_HALF_WIDTH
        best = None
        for _ in range(max_probes):
            d0 = 0.5 * (lo0 + hi0)
            d1 = 0.5 * (lo1 + hi1)
            rep = self._probe(d0, d1, history)
            if rep.survived:
                return self._finish(d0, d1, history)
            if best is None or rep.exit_s > best.exit_s:
                best = rep
            if rep.violator == "q1":
                if rep.sign > 0:
                    hi1 = d1
                else:
                    lo1 = d1
            else:
                if rep.sign > 0:
                    hi0 = d0
                else:
                    lo0 = d0
            if hi0 - lo0 < tol and hi1 - lo1 < tol:
                break
        return self._finish(best.d0, best.d1, history)

    def _finish(self, d0, d1, history):
        shot = ShotConfig(d0=d0, d1=d1, params=self.params)
        rep = self.shoot(shot, store_record=True, store_snapshots=True)
        return shot, rep, history


def initial_data(shot: ShotConfig, session: ShootingSession) -> GridState:
    return session.initial_data(shot)


def shoot(shot: ShotConfig, s_max: float, session: ShootingSession, **kw) -> ExitReport:
    return session.shoot(shot, s_max=s_max, **kw)


def search(
    params: ProblemParams,
    s_target: float,
    radial: bool = True,
    bracket: Optional[Tuple[float, float]] = None,
    **session_kw,
) -> Tuple[ShotConfig, ExitReport, List[ExitReport]]:
    """Find (d0, d1) whose trajectory stays in S_A(s) up to s_target.

    Radial mode is a 1D bisection on d0; otherwise alternating bisection on
    (d0, d1).  Returns the winning shot, its report (with stored trajectory
    and snapshots), and the full bracket history.
    """
    session = ShootingSession(params, s_target, **session_kw)
    if s_target <= params.s0:
        shot = ShotConfig(d0=0.0, d1=0.0, params=params)
        return shot, session.shoot(shot, s_max=params.s0, store_record=True), []
    if radial or params.n > 1:
        return session.search_radial(bracket=bracket)
    return session.search_general()
