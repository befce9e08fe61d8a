"""Residual time (observations left in the current segment) from a run-length posterior."""
from __future__ import annotations

import numpy as np

from .bocpd import capped_hazard


def residual_kernel(hazard) -> np.ndarray:
    """Table ``g[l, r] = p(l_t = l | r_t = r)``.

    ``g[l, r] = H(r + l) * prod_{k=r}^{r+l-1} (1 - H(k))`` for ``r + l <= R``
    and zero beyond.  The hazard is capped at ``H(R) = 1`` so every column sums
    to one.
    """
    h = capped_hazard(hazard)
    n = h.size
    g = np.zeros((n, n))
    for r in range(n):
        tail = h[r:]
        alive = np.concatenate(([1.0], np.cumprod(1.0 - tail[:-1])))
        g[: n - r, r] = tail * alive
    return g


def residual_posterior(kernel: np.ndarray, rl_posterior) -> np.ndarray:
    """``p(l_t | Y) = sum_r g[l, r] p(r_t = r | Y)``."""
    p = np.asarray(rl_posterior, dtype=float)
    if p.shape[-1] != kernel.shape[1]:
        raise ValueError(f"run-length posterior has {p.shape[-1]} entries, kernel expects {kernel.shape[1]}")
    return p @ kernel.T


def residual_cdf_trace(posteriors) -> np.ndarray:
    """Row-wise CDFs of a (T, L) stack of pmfs, clipped to [0, 1]."""
    return np.clip(np.cumsum(np.atleast_2d(posteriors), axis=-1), 0.0, 1.0)
