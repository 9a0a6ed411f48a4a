from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from vmtunet.core.autodiff.tape import Param


@dataclass
class AdamState:
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps_opt: float = 1e-8,
    t: Optional[int] = None,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One bias-corrected Adam update. Inputs are left untouched; new parameter
    arrays and a new state are returned. ``t`` defaults to ``state.t + 1``.
    """
    t = state.t + 1 if t is None else t
    if t < 1:
        raise ValueError("Adam step counter must be >= 1")
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(value)
        m = state.m.get(name, np.zeros_like(value))
        v = state.v.get(name, np.zeros_like(value))
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        new_params[name] = value - lr * m_hat / (np.sqrt(v_hat) + eps_opt)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(t=t, m=new_m, v=new_v)


class Adam:
    def __init__(
        self,
        params: Sequence[Param],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps_opt: float = 1e-8,
    ):
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps_opt = eps_opt
        self.state = AdamState()

    def step(self) -> None:
        values = {p.name: p.data for p in self.params}
        grads = {p.name: p.grad for p in self.params if p.grad is not None}
        updated, self.state = adam_step(
            values, grads, self.state, self.lr, self.beta1, self.beta2, self.eps_opt
        )
        for p in self.params:
            p.data = updated[p.name]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
