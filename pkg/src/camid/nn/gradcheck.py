"""Finite-difference gradient verification.

Central differences (f(x+h) - f(x-h)) / 2h per coordinate, compared to an
analytic gradient with relative error |a - n| / max(|a|, |n|, 1e-8). Meant
to run in 64-bit mode; callers pick coordinates (all of them for small
arrays, a seeded sample for full models).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def grad_check(
    fn: Callable[[], float],
    arrays: Sequence[np.ndarray],
    analytic_grads: Sequence[np.ndarray],
    h: float = 1e-5,
    max_coords_per_array: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error of analytic vs numeric gradient over probed coords.

    fn recomputes the scalar under test from the current array contents;
    arrays are perturbed in place and restored. When max_coords_per_array is
    set, that many coordinates per array are drawn with the supplied rng,
    otherwise every coordinate is probed.
    """
    worst = 0.0
    for arr, grad in zip(arrays, analytic_grads):
        flat = arr.reshape(-1)
        gflat = np.asarray(grad).reshape(-1)
        n = flat.size
        if max_coords_per_array is not None and n > max_coords_per_array:
            if rng is None:
                rng = np.random.default_rng(0)
            coords = rng.choice(n, size=max_coords_per_array, replace=False)
        else:
            coords = range(n)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = fn()
            flat[i] = orig - h
            f_minus = fn()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            worst = max(worst, relative_error(float(gflat[i]), numeric))
    return worst


def check_model_gradients(
    model,
    x: np.ndarray,
    onehot: np.ndarray,
    h: float = 1e-5,
    coords_per_param: int = 4,
    rng: np.random.Generator | None = None,
) -> float:
    """Probe every parameter of a model against finite differences."""
    loss, _, grads = model.loss_and_grads(x, onehot)

    def fn():
        l, _, _ = model.loss_and_grads(x, onehot)
        return l

    names = [name for name, _ in model.params()]
    arrays = [arr for _, arr in model.params()]
    analytic = [grads[name] for name in names]
    return grad_check(fn, arrays, analytic, h=h,
                      max_coords_per_array=coords_per_param, rng=rng)
