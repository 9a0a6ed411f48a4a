from vmtunet.core.discretization.schemes import (
    EvolutionTrace,
    evolve,
    run_scheme,
    tfpm_lambda_c0,
    tfpm_laplacian,
    u_step,
    v_step,
)
from vmtunet.core.discretization.stability import max_abs_w_second, stability_constants

__all__ = [
    "EvolutionTrace",
    "evolve",
    "max_abs_w_second",
    "run_scheme",
    "stability_constants",
    "tfpm_lambda_c0",
    "tfpm_laplacian",
    "u_step",
    "v_step",
]
