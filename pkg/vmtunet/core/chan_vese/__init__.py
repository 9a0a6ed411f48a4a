from vmtunet.core.chan_vese.chan_vese import (
    chan_vese_segment,
    curvature,
    cv_energy,
    cv_evolve_step,
    cv_rhs,
    delta_eps,
    heaviside_eps,
    initial_level_set,
    luminance,
    region_averages,
    reinitialize,
)

__all__ = [
    "chan_vese_segment",
    "curvature",
    "cv_energy",
    "cv_evolve_step",
    "cv_rhs",
    "delta_eps",
    "heaviside_eps",
    "initial_level_set",
    "luminance",
    "region_averages",
    "reinitialize",
]
