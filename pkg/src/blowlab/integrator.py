"""Time marching of the similarity-variable dynamics on a radial grid.

Primary route evolves the w equation; the q equation (mode FULL_Q) is kept as
a cross-check route.  Explicit RK4 with the diffusion-limited step
ds <= 0.4 dy^2; fixed uniform grid sized so the cutoff support stays inside.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import kernels
from .kernels import MODE_FULL_Q, MODE_FULL_W, MODE_L_PLUS_V, MODE_PURE_L
from .scaling import ProblemParams
from .spectral import (
    HermiteBasis,
    MembershipReport,
    ModeDecomposition,
    ShrinkingSetSpec,
    decompose,
)
from .terms import TermContext, f0, varphi

__all__ = [
    "GridState",
    "TrajectoryRecord",
    "ConfigError",
    "PoisonedState",
    "make_grid",
    "cfl_step",
    "rhs_w",
    "step",
    "run",
    "verify_kernel_bounds",
]

CFL_COEFF = 0.4


class ConfigError(ValueError):
    """Grid/step configuration violates a stability or coverage requirement."""


class PoisonedState(RuntimeError):
    """Non-finite values appeared in the state; carries the partial record."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


@dataclass
class GridState:
    """Radial grid with w values at one similarity time."""

    s: float
    y_nodes: np.ndarray
    w_values: np.ndarray
    dy: float
    y_max: float
    params: ProblemParams

    def __post_init__(self):
        if not np.all(np.isfinite(self.w_values)):
            raise PoisonedState(f"non-finite w values at s={self.s}")

    def copy(self) -> "GridState":
        return GridState(
            s=self.s,
            y_nodes=self.y_nodes,
            w_values=self.w_values.copy(),
            dy=self.dy,
            y_max=self.y_max,
            params=self.params,
        )

    def checkpoint_json(self) -> str:
        return json.dumps(
            {
                "s": self.s,
                "y_nodes": self.y_nodes.tolist(),
                "w_values": self.w_values.tolist(),
            }
        )


def make_grid(params: ProblemParams, s_max: float, dy: float = 0.05, margin: float = 5.0):
    """Uniform nodes with y_max >= 2 K sqrt(s_max) + margin.

    n = 1: symmetric grid on [-y_max, y_max]; n >= 2: radius [0, y_max].
    Node counts are kept odd so composite Simpson weights apply.
    """
    y_need = 2.0 * params.K * math.sqrt(s_max) + margin
    m = int(math.ceil(y_need / dy))
    if params.n == 1:
        # nodes as k*dy keep relative accuracy; a -y_max + k*dy form would
        # smear an absolute y_max*eps offset over every node
        return dy * np.arange(-m, m + 1)
    if m % 2 == 1:
        m += 1
    return dy * np.arange(m + 1)


def cfl_step(dy: float) -> float:
    return CFL_COEFF * dy * dy


def _check_step(ds: float, dy: float, y_max: float):
    if ds > cfl_step(dy) * (1.0 + 1e-12):
        raise ConfigError(f"ds={ds} violates the diffusive bound {cfl_step(dy)}")
    # explicit RK4 also needs the advection eigenvalue y_max/(2 dy) inside its
    # imaginary-axis stability region
    if ds * y_max / (2.0 * dy) > 2.7:
        raise ConfigError(
            f"ds={ds} violates the advective bound {2.7 * 2.0 * dy / y_max:.3e}"
        )


def _scaling_args(ctx: Optional[TermContext], mode: int):
    if mode in (MODE_PURE_L, MODE_L_PLUS_V) or ctx is None:
        return 0.0, 1.0, None, None
    sm = ctx.scaling
    return sm.s_min, sm.ds_table, sm.ell, sm.h


def rhs_w(state: GridState, ctx: TermContext, mode: int = MODE_FULL_W) -> np.ndarray:
    """One right-hand-side evaluation of the active equation on the grid."""
    t0, tds, ell_tab, h_tab = _scaling_args(ctx, mode)
    return kernels.rhs(
        state.w_values, state.y_nodes, state.dy, state.params.n, state.s, mode,
        state.params.p, state.params.alpha, t0, tds, ell_tab, h_tab,
    )


def step(state: GridState, ds: float, ctx: TermContext, mode: int = MODE_FULL_W) -> GridState:
    """Single RK4 step (mostly for tests; run() batches steps per observation)."""
    _check_step(ds, state.dy, state.y_max)
    t0, tds, ell_tab, h_tab = _scaling_args(ctx, mode)
    w, ok = kernels.advance(
        state.w_values, state.y_nodes, state.dy, state.params.n, state.s, ds, 1,
        mode, state.params.p, state.params.alpha, t0, tds, ell_tab, h_tab,
    )
    if not ok:
        raise PoisonedState(f"non-finite state after step from s={state.s}")
    return GridState(
        s=state.s + ds, y_nodes=state.y_nodes, w_values=w,
        dy=state.dy, y_max=state.y_max, params=state.params,
    )


@dataclass
class TrajectoryRecord:
    """Decomposition time series with membership reports and exit classification."""

    params: ProblemParams
    mode: int
    dy: float
    observe_every: float
    s_obs: np.ndarray = field(default_factory=lambda: np.empty(0))
    decs: List[ModeDecomposition] = field(default_factory=list)
    reports: List[Optional[MembershipReport]] = field(default_factory=list)
    residual_sup: List[float] = field(default_factory=list)
    center_w: List[float] = field(default_factory=list)
    exit_s: Optional[float] = None
    exit_violator: str = ""
    exit_sign: float = 0.0
    snapshots: List[Tuple[float, np.ndarray]] = field(default_factory=list)
    final_state: Optional[GridState] = None

    @property
    def survived(self) -> bool:
        return self.exit_s is None

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(d, name) for d in self.decs])

    def max_ratio_series(self) -> np.ndarray:
        return np.array([max(r.ratios) if r else 0.0 for r in self.reports])

    def mode_derivative(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        """Central-difference d/ds of a stored mode series at interior times."""
        vals = self.series(name)
        ds = self.observe_every
        return self.s_obs[1:-1], (vals[2:] - vals[:-2]) / (2.0 * ds)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(ModeDecomposition.csv_header() + ",max_ratio,residual_sup\n")
            for dec, rep, res in zip(self.decs, self.reports, self.residual_sup):
                member = rep.member if rep else None
                viol = rep.violator if rep else ""
                mr = max(rep.ratios) if rep else 0.0
                fh.write(dec.csv_row(member, viol) + f",{mr:.6e},{res:.12e}\n")

    def fitted_mode_constants(self, s_lo: Optional[float] = None) -> dict:
        """Fitted constants of the mode ODEs along the stored trajectory.

        C0: max s^2 |q0' - q0|, C1: max s^2 |q1' - q1/2|,
        C2: max s^3/ln s |q2' + (2/s) q2|, over interior observation times.
        """
        if len(self.s_obs) < 5:
            return {}
        s_lo = self.s_obs[0] if s_lo is None else s_lo
        out = {}
        for name, key in (("q0", "C0"), ("q1", "C1"), ("q2", "C2")):
            s_mid, dv = self.mode_derivative(name)
            v_mid = self.series(name)[1:-1]
            mask = s_mid >= s_lo
            if name == "q0":
                resid = np.abs(dv - v_mid) * s_mid**2
            elif name == "q1":
                resid = np.abs(dv - 0.5 * v_mid) * s_mid**2
            else:
                resid = np.abs(dv + (2.0 / s_mid) * v_mid) * s_mid**3 / np.log(s_mid)
            out[key] = float(np.max(resid[mask]))
        return out

    def summary(self) -> dict:
        return {
            "survived": self.survived,
            "exit_s": self.exit_s,
            "exit_violator": self.exit_violator,
            "exit_sign": self.exit_sign,
            "s_first": float(self.s_obs[0]) if len(self.s_obs) else None,
            "s_last": float(self.s_obs[-1]) if len(self.s_obs) else None,
            "max_ratio_last": float(self.max_ratio_series()[-1]) if self.decs else None,
            "fitted_mode_constants": self.fitted_mode_constants(),
        }


def run(
    initial: GridState,
    ctx: TermContext,
    s_max: float,
    sset: Optional[ShrinkingSetSpec] = None,
    observe_every: float = 0.1,
    ds: Optional[float] = None,
    mode: int = MODE_FULL_W,
    stop_on_exit: bool = True,
    store_snapshots: bool = False,
    basis: Optional[HermiteBasis] = None,
) -> TrajectoryRecord:
    """March to s_max, decomposing q at each observation time.

    For mode FULL_W the decomposed field is q = w - varphi; for FULL_Q the
    state itself is q.  Stops at the first shrinking-set exit when sset is
    given and stop_on_exit holds.  Deterministic given (initial, ds, grid).
    """
    params = initial.params
    dy = initial.dy
    if ds is None:
        ds = cfl_step(dy)
    _check_step(ds, dy, initial.y_max)
    if initial.y_max < 2.0 * params.K * math.sqrt(s_max):
        raise ConfigError(
            f"grid y_max={initial.y_max} does not cover 2K sqrt(s_max)="
            f"{2.0 * params.K * math.sqrt(s_max):.2f}"
        )
    if mode in (MODE_FULL_W, MODE_FULL_Q):
        if ctx.scaling.s_max < s_max - 1e-9:
            raise ConfigError("scaling map does not reach s_max")
        if ctx.scaling.ell_at(s_max) > 300.0:
            raise ConfigError("ell(s_max) > 300: beyond the kernel's log-window")
    if basis is None:
        basis = HermiteBasis(initial.y_nodes, params.n)
    n_sub = max(1, int(math.ceil(observe_every / ds - 1e-9)))
    ds_eff = observe_every / n_sub
    _check_step(ds_eff, dy, initial.y_max)

    t0, tds, ell_tab, h_tab = _scaling_args(ctx, mode)
    rec = TrajectoryRecord(params=params, mode=mode, dy=dy, observe_every=observe_every)
    y = initial.y_nodes
    center = int(np.argmin(np.abs(y)))
    w = initial.w_values.copy()
    s = initial.s
    s_list = []

    def observe(scur, wcur) -> bool:
        if mode == MODE_FULL_W:
            q = wcur - varphi(y, scur, params)
            wfield = wcur
        else:
            q = wcur
            wfield = wcur + varphi(y, scur, params) if mode == MODE_FULL_Q else wcur
        dec = decompose(q, scur, params, basis)
        rep = MembershipReport.from_decomposition(dec, sset) if sset else None
        rec.decs.append(dec)
        rec.reports.append(rep)
        rec.residual_sup.append(
            float(np.max(np.abs(wfield - f0(y / math.sqrt(scur), params))))
        )
        rec.center_w.append(float(wfield[center]))
        s_list.append(scur)
        if store_snapshots:
            rec.snapshots.append((scur, wcur.copy()))
        if rep is not None and not rep.member:
            rec.exit_s = scur
            rec.exit_violator = rep.violator
            rec.exit_sign = rep.sign
            return False
        return True

    alive = observe(s, w)
    n_obs = int(round((s_max - s) / observe_every))
    for k in range(1, n_obs + 1):
        if not alive and stop_on_exit:
            break
        w, ok = kernels.advance(
            w, y, dy, params.n, s, ds_eff, n_sub, mode,
            params.p, params.alpha, t0, tds, ell_tab, h_tab,
        )
        s = initial.s + k * observe_every
        if not ok:
            rec.s_obs = np.array(s_list)
            rec.exit_s = s
            rec.exit_violator = "nan"
            rec.exit_sign = 0.0
            raise PoisonedState(f"non-finite state at s={s}", record=rec)
        alive = observe(s, w) and alive

    rec.s_obs = np.array(s_list)
    rec.final_state = GridState(
        s=s, y_nodes=y, w_values=w, dy=dy, y_max=initial.y_max, params=params
    )
    return rec


@dataclass
class KernelBoundReport:
    """Measured weighted norms of theta = K(s, sigma) v against the bound templates."""

    sigma: float
    s_obs: np.ndarray
    minus_norms: np.ndarray
    e_norms: np.ndarray
    template_minus: np.ndarray
    template_e: np.ndarray
    fitted_C_minus: float
    fitted_C_e: float
    initial: ModeDecomposition


def verify_kernel_bounds(
    v_values: np.ndarray,
    sigma: float,
    rho_star: float,
    ctx: TermContext,
    grid: np.ndarray,
    observe_every: float = 0.1,
    ds: Optional[float] = None,
) -> KernelBoundReport:
    """Propagate v under d theta/ds = (L + V) theta and fit the a priori bounds.

    Templates follow the linearized-kernel estimates: the q_- norm is driven by
    e^{s-sigma}((s-sigma)^2+1)/s acting on the low modes plus decaying
    contributions of v_- and v_e; the outer norm by e^{s-sigma} on the inner
    data plus e^{-(s-sigma)/p} on v_e.
    """
    if rho_star > 3.0:
        raise ValueError("rho_star is capped at 3 at desk scale")
    params = ctx.params
    dy = float((grid[-1] - grid[0]) / (len(grid) - 1))
    state = GridState(
        s=sigma, y_nodes=grid, w_values=np.asarray(v_values, dtype=float),
        dy=dy, y_max=float(abs(grid).max()), params=params,
    )
    basis = HermiteBasis(grid, params.n)
    v0 = decompose(state.w_values, sigma, params, basis)
    rec = run(
        state, ctx, sigma + rho_star, sset=None, observe_every=observe_every,
        ds=ds, mode=MODE_L_PLUS_V, basis=basis,
    )
    s_obs = rec.s_obs
    minus_norms = rec.series("qminus_norm")
    e_norms = rec.series("qe_norm")
    tau = s_obs - sigma
    low = abs(v0.q0) + abs(v0.q1) + np.sqrt(s_obs) * abs(v0.q2)
    t_minus = (
        np.exp(tau) * (tau**2 + 1.0) / s_obs * low
        + np.exp(-tau / 2.0) * v0.qminus_norm
        + np.exp(-(tau**2)) / s_obs**1.5 * v0.qe_norm
    )
    t_e = (
        np.exp(tau)
        * (
            abs(v0.q0)
            + np.sqrt(s_obs) * abs(v0.q1)
            + s_obs * abs(v0.q2)
            + s_obs**1.5 * v0.qminus_norm
        )
        + np.exp(-tau / params.p) * v0.qe_norm
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        c_minus = float(np.nanmax(np.where(t_minus > 0, minus_norms / t_minus, 0.0)))
        c_e = float(np.nanmax(np.where(t_e > 0, e_norms / t_e, 0.0)))
    return KernelBoundReport(
        sigma=sigma, s_obs=s_obs, minus_norms=minus_norms, e_norms=e_norms,
        template_minus=t_minus, template_e=t_e,
        fitted_C_minus=c_minus, fitted_C_e=c_e, initial=v0,
    )
