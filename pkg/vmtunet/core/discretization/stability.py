"""Monitor for the discrete energy estimate of the explicit scheme.

With norms ||u||^2 = h^2 sum(u^2) and Lipschitz bound L of W' over the
observed range, each step is checked against

    A ||u^{n+1}||^2 + B ||Lap u^{n+1}||^2 <= D (||u^n||^2 + ||Lap u^n||^2) + C
"""

from typing import Optional, Tuple

import numpy as np

from vmtunet.core.discretization.schemes import EvolutionTrace
from vmtunet.core.errors import BadMultipliers
from vmtunet.core.field.field import discrete_norm_sq, double_well_second, fdm_laplacian_array
from vmtunet.core.models.models import CHParams, StabilityReport, StabilityStep

_L_FLOOR = 1e-12


def max_abs_w_second(lo: float, hi: float) -> float:
    """max |12u^2 - 12u + 2| over [lo, hi]; the parabola's vertex sits at u = 1/2."""
    candidates = [abs(double_well_second(lo)), abs(double_well_second(hi))]
    if lo <= 0.5 <= hi:
        candidates.append(abs(double_well_second(0.5)))
    return float(max(candidates))


def default_multipliers(p: CHParams, L: float) -> Tuple[float, float]:
    return 2.0 * p.tau, 2.0 * max(L, _L_FLOOR) / (p.eps1 * p.eps2)


def stability_coefficients(
    p: CHParams, L: float, delta: float, gamma: float, M_F: float, C_delta: float
) -> Tuple[float, float, float, float]:
    if delta <= p.tau:
        raise BadMultipliers(f"delta={delta} must exceed tau={p.tau}")
    if gamma <= L / (p.eps1 * p.eps2):
        raise BadMultipliers(f"gamma={gamma} must exceed L/(eps1*eps2)={L / (p.eps1 * p.eps2)}")
    tau = p.tau
    A = 0.5 - tau / (2.0 * delta)
    B = tau * p.eps1 / 2.0 - tau * L / (2.0 * p.eps2 * gamma)
    D = 0.5 + tau * L * gamma / (2.0 * p.eps2)
    C = (
        tau * L * gamma / (2.0 * p.eps2)
        + tau * p.eps1 * C_delta / 2.0
        + tau * delta * M_F**2 / 2.0
    )
    return A, B, C, D


def stability_constants(
    trace: EvolutionTrace,
    p: CHParams,
    delta: Optional[float] = None,
    gamma: Optional[float] = None,
) -> StabilityReport:
    snapshots = trace.u
    lo = min(float(u.min()) for u in snapshots)
    hi = max(float(u.max()) for u in snapshots)
    L = max_abs_w_second(lo, hi)
    d_default, g_default = default_multipliers(p, L)
    delta = d_default if delta is None else delta
    gamma = g_default if gamma is None else gamma

    laps = [fdm_laplacian_array(u, trace.h, trace.bc) for u in snapshots]
    norm_u = [discrete_norm_sq(u, trace.h) for u in snapshots]
    norm_lap = [discrete_norm_sq(lap, trace.h) for lap in laps]
    C_delta = max(
        (discrete_norm_sq(laps[n + 1] - laps[n], trace.h) for n in range(len(laps) - 1)),
        default=0.0,
    )
    M_F = max((np.sqrt(discrete_norm_sq(F, trace.h)) for F in trace.forces), default=0.0)

    A, B, C, D = stability_coefficients(p, L, delta, gamma, float(M_F), C_delta)
    steps = []
    for n in range(len(snapshots) - 1):
        lhs = A * norm_u[n + 1] + B * norm_lap[n + 1]
        rhs = D * (norm_u[n] + norm_lap[n]) + C
        steps.append(
            StabilityStep(
                step=n + 1,
                norm_u=norm_u[n + 1],
                norm_lap_u=norm_lap[n + 1],
                lhs=lhs,
                rhs=rhs,
                holds=bool(lhs <= rhs + 1e-12 * max(1.0, abs(rhs))),
            )
        )
    return StabilityReport(
        steps=steps,
        A=A,
        B=B,
        C=C,
        D=D,
        delta=delta,
        gamma=gamma,
        L=L,
        M_F=float(M_F),
        C_delta=C_delta,
    )
