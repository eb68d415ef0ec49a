"""Bias-corrected Adam over the canonical parameter layout."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import AgentParams

__all__ = ["AdamState", "init_adam", "adam_step"]


@dataclass
class AdamState:
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def init_adam(params: AgentParams) -> AdamState:
    return AdamState(
        step=0,
        first_moment={k: np.zeros_like(v) for k, v in params.tensors.items()},
        second_moment={k: np.zeros_like(v) for k, v in params.tensors.items()},
    )


def adam_step(
    params: AgentParams,
    state: AdamState,
    grads: dict,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """One in-place update, iterating tensors in canonical order."""
    state.step += 1
    bc1 = 1.0 - beta1**state.step
    bc2 = 1.0 - beta2**state.step
    for name, tensor in params.tensors.items():
        g = grads[name]
        if g.shape != tensor.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        tensor -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return state
