"""blowlab: numerical laboratory for single-point blowup in the equation
u_t = Lap u + |u|^{p-1} u ln^alpha(u^2 + 2)."""

from .scaling import (
    ProblemParams,
    ScalingMap,
    build_scaling_map,
    h_expansion,
    kappa_alpha,
    ln_psi1_expansion,
    tail_time_integral,
)
from .spectral import (
    HermiteBasis,
    MembershipReport,
    ModeDecomposition,
    ShrinkingSetSpec,
    cutoff_chi,
    decompose,
    in_shrinking_set,
)
from .terms import (
    TermContext,
    f0,
    potential_V,
    stable_log_ratio,
    term_B,
    term_D,
    term_L,
    term_N,
    term_R,
    varphi,
)
from .integrator import (
    GridState,
    TrajectoryRecord,
    make_grid,
    rhs_w,
    run,
    step,
    verify_kernel_bounds,
)
from .shooting import ExitReport, ShootingSession, ShotConfig, search, shoot
from .reconstruct import final_profile, physical_snapshot, theorem_residual

__version__ = "0.1.0"
