from vmtunet.core.cahn_hilliard.classical import (
    CHSolution,
    ch_energy,
    ch_force,
    ch_segment,
    ch_solve,
    phase_weights,
    update_c,
)

__all__ = [
    "CHSolution",
    "ch_energy",
    "ch_force",
    "ch_segment",
    "ch_solve",
    "phase_weights",
    "update_c",
]
