"""Central finite-difference gradient checking for the hand-written nets.

Every analytic gradient in the package is validated against the slow,
obviously-correct estimate (f(x + h) - f(x - h)) / 2h applied to each
parameter entry in turn.
"""

from __future__ import annotations

import numpy as np

from swarmcover import nets

FD_STEP = 1e-5
FD_RTOL = 1e-4


def numeric_grad(params: dict, cfg: nets.NetConfig, scalar_fn, step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of ``scalar_fn(params)`` over every entry."""
    vec = nets.flatten_params(params, cfg)
    out = np.zeros_like(vec)
    for i in range(vec.size):
        up = vec.copy()
        down = vec.copy()
        up[i] += step
        down[i] -= step
        f_up = scalar_fn(nets.unflatten_params(up, cfg))
        f_down = scalar_fn(nets.unflatten_params(down, cfg))
        out[i] = (f_up - f_down) / (2.0 * step)
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm of the difference, scaled by the larger of the two norms."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def assert_grad_close(analytic_grads: dict, params: dict, cfg: nets.NetConfig,
                      scalar_fn, rtol: float = FD_RTOL) -> None:
    analytic = nets.flatten_params(analytic_grads, cfg)
    numeric = numeric_grad(params, cfg, scalar_fn)
    err = relative_error(analytic, numeric)
    assert err < rtol, f"gradient mismatch: relative error {err:.2e} >= {rtol:.0e}"
