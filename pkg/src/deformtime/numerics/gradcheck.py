"""Central finite-difference check of tape gradients."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, no_grad, record_branches


def _coords(size: int, max_coords: int | None, rng: np.random.Generator | None):
    if max_coords is None or size <= max_coords:
        return np.arange(size)
    rng = rng or np.random.default_rng(0)
    return np.sort(rng.choice(size, size=max_coords, replace=False))


def grad_check(
    f: Callable[..., Tensor],
    x: Tensor | Sequence[Tensor],
    step: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
    exclude_kinks: bool = False,
    stats: dict | None = None,
) -> float:
    """Worst relative error between tape and central-difference gradients.

    ``f`` is called as ``f(x)`` and must return a scalar tensor. When ``x`` is
    a sequence, every tensor in it is checked and ``f`` receives the sequence.
    The relative error per coordinate is
    ``|a - n| / max(|a|, |n|, 1e-8)``. ``max_coords`` caps the number of
    coordinates probed per tensor (chosen by ``rng``).

    With ``exclude_kinks`` a probe is skipped when ``x + step`` and
    ``x - step`` land on different pieces of a piecewise kernel (another
    sampling cell or another ReLU sign), since the central difference then
    straddles a point where the function is not differentiable. ``stats``, if
    given, receives ``probed`` and ``skipped`` counts.
    """
    tensors = [x] if isinstance(x, Tensor) else list(x)
    for t in tensors:
        t.requires_grad = True
        t.grad = None
    backward(f(x))
    worst = 0.0
    probed = skipped = 0
    for t in tensors:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat = t.data.reshape(-1)
        for i in _coords(flat.size, max_coords, rng):
            orig = flat[i]
            with no_grad(), record_branches() as bp:
                flat[i] = orig + step
                fp = f(x).item()
            with no_grad(), record_branches() as bm:
                flat[i] = orig - step
                fm = f(x).item()
            flat[i] = orig
            probed += 1
            if exclude_kinks and not _same_piece(bp, bm):
                skipped += 1
                continue
            numeric = (fp - fm) / (2.0 * step)
            a = analytic.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    if stats is not None:
        stats.update(probed=probed, skipped=skipped)
    return worst


def _same_piece(a: list, b: list) -> bool:
    return len(a) == len(b) and all(np.array_equal(u, v) for u, v in zip(a, b))
