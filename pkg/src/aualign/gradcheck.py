"""Finite-difference verification of the analytic gradients.

``grad_check`` sweeps every coordinate of one input tensor with central
differences. ``grad_check_params`` does the same for a model-sized
parameter dict, sampling coordinates so a full forward/backward pair is
not needed per parameter entry.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .tensor import Tensor


def _relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))


def grad_check(scalar_function, point: Tensor, step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``scalar_function`` must map a Tensor to a scalar Tensor and be pure;
    it is re-evaluated twice per coordinate of ``point``.
    """
    probe = Tensor(point.data.copy(), requires_grad=True)
    out = scalar_function(probe)
    if not isinstance(out, Tensor) or out.data.size != 1:
        raise ContractError("grad_check: function must return a scalar tensor")
    out.backward()
    analytic = np.zeros_like(probe.data) if probe.grad is None else probe.grad
    analytic = analytic.reshape(-1)

    flat = probe.data.reshape(-1)
    worst = 0.0
    for k in range(flat.size):
        saved = flat[k]
        flat[k] = saved + step
        f_plus = scalar_function(Tensor(probe.data)).item()
        flat[k] = saved - step
        f_minus = scalar_function(Tensor(probe.data)).item()
        flat[k] = saved
        numeric = (f_plus - f_minus) / (2.0 * step)
        worst = max(worst, _relative_error(float(analytic[k]), numeric))
    return worst


def grad_check_params(
    loss_function,
    params: dict[str, Tensor],
    rng: np.random.Generator,
    coords_per_param: int = 3,
    step: float = 1e-5,
) -> float:
    """Sampled finite-difference check across a whole parameter dict.

    ``loss_function`` takes no arguments, reads ``params``, and returns a
    scalar Tensor; a fresh graph must be built on every call.
    """
    for p in params.values():
        p.zero_grad()
    loss = loss_function()
    if loss.data.size != 1:
        raise ContractError("grad_check_params: loss must be scalar")
    loss.backward()

    worst = 0.0
    for name, p in params.items():
        grad = p.grad
        if grad is None:
            raise ContractError(f"grad_check_params: no gradient reached {name}")
        flat = p.data.reshape(-1)
        gflat = grad.reshape(-1)
        count = min(coords_per_param, flat.size)
        picks = rng.choice(flat.size, size=count, replace=False)
        for k in picks:
            saved = flat[k]
            flat[k] = saved + step
            f_plus = loss_function().item()
            flat[k] = saved - step
            f_minus = loss_function().item()
            flat[k] = saved
            numeric = (f_plus - f_minus) / (2.0 * step)
            worst = max(worst, _relative_error(float(gflat[k]), numeric))
    return worst
