"""Classical modified Cahn-Hilliard segmentation: inner CH evolution, outer c1/c2 updates."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import trange

from vmtunet.config.config import REGION_EPS
from vmtunet.core.chan_vese.chan_vese import initial_level_set, luminance
from vmtunet.core.discretization.schemes import run_scheme
from vmtunet.core.discretization.stability import stability_constants
from vmtunet.core.errors import EmptyRegion, ShapeMismatch
from vmtunet.core.field.field import ImageTensor, ScalarField, gl_energy
from vmtunet.core.models.models import (
    BoundaryKind,
    Circle,
    CHParams,
    ForceState,
    InitKind,
    Scheme,
    StabilityReport,
)
from vmtunet.utils.logger import logger

STEADY_TOL = 1e-6


def phase_weights(u, eps3: float):
    """Smoothed indicators of {u >= 1/2} and {u < 1/2}; they sum to one cellwise."""
    w1 = 0.5 + np.arctan((u - 0.5) / eps3) / np.pi
    return w1, 1.0 - w1


def _gray(f: Union[ImageTensor, np.ndarray]) -> np.ndarray:
    return luminance(f) if isinstance(f, ImageTensor) else np.asarray(f, dtype=np.float64)


def ch_force_array(g: np.ndarray, u: np.ndarray, s: ForceState, p: CHParams) -> np.ndarray:
    bracket = p.lambda1 * (g - s.c1) ** 2 - p.lambda2 * (g - s.c2) ** 2
    return bracket * p.eps3 / (np.pi * (p.eps3**2 + (u - 0.5) ** 2))


def ch_force(f: ImageTensor, u: ScalarField, s: ForceState, p: CHParams) -> ScalarField:
    g = _gray(f)
    if g.shape != u.shape:
        raise ShapeMismatch(f"image {g.shape} and field {u.shape} differ")
    return u.with_values(ch_force_array(g, u.values, s, p))


def update_c(f: ImageTensor, u: ScalarField, eps3: float) -> ForceState:
    g = _gray(f)
    w1, w2 = phase_weights(u.values, eps3)
    d1, d2 = float(w1.sum()), float(w2.sum())
    if d1 < REGION_EPS:
        raise EmptyRegion("u >= 1/2", d1)
    if d2 < REGION_EPS:
        raise EmptyRegion("u < 1/2", d2)
    return ForceState(c1=float((w1 * g).sum() / d1), c2=float((w2 * g).sum() / d2))


def ch_energy(u: ScalarField, f: ImageTensor, state: ForceState, p: CHParams) -> float:
    """Ginzburg-Landau energy plus the phase-weighted fidelity terms."""
    g = _gray(f)
    w1, w2 = phase_weights(u.values, p.eps3)
    fidelity = p.lambda1 * (g - state.c1) ** 2 * w1 + p.lambda2 * (g - state.c2) ** 2 * w2
    return gl_energy(u, p.eps1, p.eps2, p.h) + float(fidelity.sum() * p.h**2)


def initial_phase(
    g: np.ndarray, init: Union[InitKind, Circle], circle: Optional[Circle] = None
) -> np.ndarray:
    if init == InitKind.FROM_IMAGE:
        return g.copy()
    return 0.5 + 0.5 * np.clip(initial_level_set(g.shape, init, circle), -1.0, 1.0)


@dataclass
class CHSolution:
    """Final phase field of ``ch_solve`` with its trace and per-run stability reports."""

    u: ScalarField
    trace: pd.DataFrame
    reports: List[StabilityReport] = field(default_factory=list)

    @property
    def mask(self) -> ScalarField:
        return self.u.with_values((self.u.values >= 0.5).astype(np.float64))

    @property
    def stability_violations(self) -> int:
        return sum(len(r.violations) for r in self.reports)


def _accept(
    start: ScalarField, snapshots: List[np.ndarray], g: np.ndarray, state: ForceState, p: CHParams
) -> int:
    """Index of the latest inner state whose energy does not exceed the starting one."""
    e0 = ch_energy(start, g, state, p)
    for j in range(len(snapshots) - 1, 0, -1):
        if ch_energy(start.with_values(snapshots[j]), g, state, p) <= e0:
            return j
    return 0


def ch_solve(
    f: ImageTensor,
    p: CHParams,
    init: Union[InitKind, Circle] = InitKind.FROM_IMAGE,
    outer_iters: int = 30,
    scheme: Scheme = Scheme.TFPM,
    bc: BoundaryKind = BoundaryKind.NEUMANN,
    steady_tol: Optional[float] = STEADY_TOL,
    disable_tqdm: bool = True,
) -> CHSolution:
    """
    Solve the modified Cahn-Hilliard problem by alternating evolution and c-updates.

    The inner evolution is not a gradient flow of the energy, so each inner run
    keeps its latest state that does not raise E(u; c1, c2) for the current c1, c2.
    With the c-update an exact minimizer for fixed u, the traced energy never
    increases from one outer iteration to the next.

    Args:
        f: grayscale (or color, reduced to luminance) image in [0, 1].
        p: solver parameters; ``p.M`` caps the inner steps per outer iteration.
        init: FROM_IMAGE starts from u = f; CIRCLE and CHECKERBOARD map the level-set
            initializations onto [0, 1].
        outer_iters: number of c1/c2 updates.
        scheme: Laplacian used inside v.
        bc: boundary condition of the evolution.
        steady_tol: inner loop stops once max |u^{n+1} - u^n| drops below it.

    Returns:
        A CHSolution whose trace has columns outer_iter, c1, c2, energy, max_delta_u.
    """
    if outer_iters < 1:
        raise ValueError("outer_iters must be >= 1")
    g = _gray(f)
    u = ScalarField(initial_phase(g, init), bc)
    state = ForceState(c1=1.0, c2=0.0)
    rows = [
        {
            "outer_iter": 0,
            "c1": state.c1,
            "c2": state.c2,
            "energy": ch_energy(u, g, state, p),
            "max_delta_u": float("nan"),
        }
    ]
    reports: List[StabilityReport] = []
    for k in trange(outer_iters, disable=disable_tqdm, desc="Cahn-Hilliard", leave=False):

        def force(step: int, current: ScalarField, state: ForceState = state) -> ScalarField:
            return current.with_values(ch_force_array(g, current.values, state, p))

        _, trace = run_scheme(u, force, p, scheme, steady_tol=steady_tol)
        report = stability_constants(trace, p)
        if not report.holds:
            logger.warning(f"outer {k + 1}: stability inequality violated at steps {report.violations}")
        reports.append(report)
        j = _accept(u, trace.u, g, state, p)
        if j < trace.steps:
            logger.debug(f"outer {k + 1}: kept inner step {j} of {trace.steps} (energy rose after it)")
        max_delta_u = float(np.max(np.abs(trace.u[j] - trace.u[j - 1]))) if j else 0.0
        u = u.with_values(trace.u[j])
        state = update_c(g, u, p.eps3)
        energy = ch_energy(u, g, state, p)
        rows.append(
            {
                "outer_iter": k + 1,
                "c1": state.c1,
                "c2": state.c2,
                "energy": energy,
                "max_delta_u": max_delta_u,
            }
        )
        logger.debug(
            f"ch outer {k + 1}: c1={state.c1:.4f} c2={state.c2:.4f} "
            f"energy={energy:.6f} inner_steps={trace.steps}"
        )
    frame = pd.DataFrame(rows, columns=["outer_iter", "c1", "c2", "energy", "max_delta_u"])
    return CHSolution(u=u, trace=frame, reports=reports)


def ch_segment(
    f: ImageTensor,
    p: CHParams,
    init: Union[InitKind, Circle] = InitKind.FROM_IMAGE,
    outer_iters: int = 30,
    scheme: Scheme = Scheme.TFPM,
    bc: BoundaryKind = BoundaryKind.NEUMANN,
    steady_tol: Optional[float] = STEADY_TOL,
    disable_tqdm: bool = True,
) -> Tuple[ScalarField, pd.DataFrame]:
    """``ch_solve`` thresholded at 1/2: the mask and the outer-iteration trace."""
    solution = ch_solve(f, p, init, outer_iters, scheme, bc, steady_tol, disable_tqdm)
    return solution.mask, solution.trace
