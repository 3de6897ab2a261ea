"""
Optimization Utilities

Adam over a dictionary of named parameter arrays, and a central
finite-difference gradient checker used to validate every analytic
gradient path.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .errors import GradientCheckError, OptimizerError

logger = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]


@dataclass
class AdamState:
    """First/second moment accumulators keyed like the parameter set."""
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)


def adam_step(state: AdamState, params: Params, grads: Params, lr: float) -> Params:
    """
    One bias-corrected Adam update, applied in place to `params`.

    Only parameters named in `grads` move; anything else is treated as frozen.

    Raises:
        OptimizerError: unknown parameter name or shape mismatch
    """
    for name, grad in grads.items():
        if name not in params:
            raise OptimizerError(f"Gradient for unknown parameter '{name}'")
        if grad.shape != params[name].shape:
            raise OptimizerError(
                f"Gradient shape {grad.shape} does not match parameter '{name}' {params[name].shape}"
            )
        if name in state.m and state.m[name].shape != grad.shape:
            raise OptimizerError(f"Optimizer state for '{name}' has shape {state.m[name].shape}")

    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, grad in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * (grad * grad)
        params[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params


@dataclass
class LossGraph:
    """
    A scalar loss over named parameters, with its analytic gradient.

    Attributes:
        params: point at which gradients are checked (not modified)
        loss: params -> scalar loss
        gradients: params -> dict of analytic gradients (missing keys mean zero)
        active_set: optional params -> boolean array of active hinge/ReLU
            branches; samples whose +h and -h evaluations disagree are resampled
    """
    params: Params
    loss: Callable[[Params], float]
    gradients: Callable[[Params], Params]
    active_set: Optional[Callable[[Params], np.ndarray]] = None


def _shifted(params: Params, name: str, index, delta: float) -> Params:
    out = {key: value.copy() for key, value in params.items()}
    out[name][index] += delta
    return out


def grad_check(graph: LossGraph, sample_count: int = 20, rng_seed=0, h: float = 1e-5) -> float:
    """
    Maximum relative error between analytic and central-difference gradients.

    Each sample picks a parameter array uniformly, then an entry uniformly.
    Relative error is |g_a - g_fd| / max(1, |g_a|, |g_fd|).

    Raises:
        GradientCheckError: non-finite loss at a sample point, or too many samples
            landed on a kink
    """
    rng = np.random.default_rng(rng_seed)
    analytic = graph.gradients(graph.params)
    names = sorted(graph.params)
    worst = 0.0
    done, attempts = 0, 0
    while done < sample_count:
        attempts += 1
        if attempts > 50 * sample_count:
            raise GradientCheckError(f"Only {done} of {sample_count} samples avoided a kink")
        name = names[rng.integers(len(names))]
        index = tuple(int(rng.integers(n)) for n in graph.params[name].shape)
        plus = _shifted(graph.params, name, index, h)
        minus = _shifted(graph.params, name, index, -h)
        if graph.active_set is not None:
            if not np.array_equal(graph.active_set(plus), graph.active_set(minus)):
                continue
        f_plus, f_minus = graph.loss(plus), graph.loss(minus)
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise GradientCheckError(f"Non-finite loss evaluating {name}{list(index)}")
        fd = (f_plus - f_minus) / (2.0 * h)
        grad = analytic.get(name)
        g_a = float(grad[index]) if grad is not None else 0.0
        error = abs(g_a - fd) / max(1.0, abs(g_a), abs(fd))
        worst = max(worst, error)
        done += 1
    logger.debug(f"grad_check: {sample_count} samples, max relative error {worst:.3e}")
    return worst
