from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from vmtunet.config.config import DIVERGENCE_LIMIT
from vmtunet.core.errors import Diverged, ShapeMismatch
from vmtunet.core.field.field import (
    PadKind,
    ScalarField,
    double_well_prime,
    fdm_laplacian_array,
    laplacian_fdm,
    neighbor_sum,
)
from vmtunet.core.models.models import BoundaryKind, CHParams, Scheme, StabilityReport
from vmtunet.utils.logger import logger

ForceProvider = Callable[[int, ScalarField], ScalarField]


@dataclass
class EvolutionTrace:
    """Snapshots u^0..u^K and the forces F^0..F^{K-1} that produced them."""

    h: float
    bc: BoundaryKind
    u: List[np.ndarray] = field(default_factory=list)
    forces: List[np.ndarray] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.u) - 1


def tfpm_lambda_c0(u_ij, eps1: float, eps2: float):
    q = 4.0 * np.square(u_ij) + 2.0
    lam = np.sqrt(q / (eps1 * eps2))
    c0 = 6.0 * np.square(u_ij) / q
    return lam, c0


def sech2_quarter(a):
    """1 / (4 cosh^2(a)) for a >= 0, written to stay finite for large a."""
    e = np.exp(-2.0 * a)
    return e / (1.0 + e) ** 2


def tfpm_laplacian_array(
    values: np.ndarray, eps1: float, eps2: float, h: float, kind: PadKind
) -> np.ndarray:
    lam, c0 = tfpm_lambda_c0(values, eps1, eps2)
    s = neighbor_sum(values, kind)
    return lam**2 * (s - 4.0 * c0) * sech2_quarter(0.5 * lam * h)


def tfpm_laplacian(u: ScalarField, eps1: float, eps2: float, h: float) -> ScalarField:
    if eps1 <= 0 or eps2 <= 0 or h <= 0:
        raise ValueError("eps1, eps2 and h must be positive")
    return u.with_values(tfpm_laplacian_array(u.values, eps1, eps2, h, u.bc))


def v_step(u: ScalarField, p: CHParams, scheme: Scheme = Scheme.TFPM) -> ScalarField:
    if scheme == Scheme.TFPM:
        lap = tfpm_laplacian_array(u.values, p.eps1, p.eps2, p.h, u.bc)
    else:
        lap = fdm_laplacian_array(u.values, p.h, u.bc)
    return u.with_values(p.eps1 * lap - (1.0 / p.eps2) * double_well_prime(u.values))


def _u_step_array(u: np.ndarray, v: ScalarField, force: np.ndarray, p: CHParams) -> np.ndarray:
    return u - p.tau * laplacian_fdm(v, p.h).values - p.tau * force


def u_step(u: ScalarField, v: ScalarField, F: ScalarField, p: CHParams) -> ScalarField:
    if u.shape != v.shape or u.shape != F.shape:
        raise ShapeMismatch(f"shape mismatch: u {u.shape}, v {v.shape}, F {F.shape}")
    return u.with_values(_u_step_array(u.values, v, F.values, p))


def _as_provider(force: Union[None, ScalarField, ForceProvider], like: ScalarField) -> ForceProvider:
    if force is None:
        zero = like.with_values(np.zeros(like.shape))
        return lambda step, u: zero
    if isinstance(force, ScalarField):
        return lambda step, u: force
    return force


def run_scheme(
    u0: ScalarField,
    force: Union[None, ScalarField, ForceProvider],
    p: CHParams,
    scheme: Scheme = Scheme.TFPM,
    steady_tol: Optional[float] = None,
) -> Tuple[ScalarField, EvolutionTrace]:
    """Iterate v_step then u_step ``p.M`` times (fewer when ``steady_tol`` is met)."""
    provider = _as_provider(force, u0)
    trace = EvolutionTrace(h=p.h, bc=u0.bc, u=[u0.values])
    u = u0
    for n in range(p.M):
        F = provider(n, u)
        v = v_step(u, p, scheme)
        nxt = _u_step_array(u.values, v, F.values, p)
        peak = float(np.max(np.abs(nxt))) if np.all(np.isfinite(nxt)) else float("inf")
        if peak > DIVERGENCE_LIMIT:
            raise Diverged(step=n + 1, value=peak, where="evolve")
        trace.forces.append(F.values)
        trace.u.append(nxt)
        change = float(np.max(np.abs(nxt - u.values)))
        u = u.with_values(nxt)
        if steady_tol is not None and change < steady_tol:
            logger.debug(f"steady state after {n + 1} steps (max change {change:.2e})")
            break
    return u, trace


def evolve(
    u0: ScalarField,
    force: Union[None, ScalarField, ForceProvider],
    p: CHParams,
    scheme: Scheme = Scheme.TFPM,
    delta: Optional[float] = None,
    gamma: Optional[float] = None,
    steady_tol: Optional[float] = None,
) -> Tuple[ScalarField, StabilityReport]:
    from vmtunet.core.discretization.stability import stability_constants

    u, trace = run_scheme(u0, force, p, scheme, steady_tol=steady_tol)
    report = stability_constants(trace, p, delta, gamma)
    if not report.holds:
        logger.warning(f"stability inequality violated at steps {report.violations}")
    return u, report
