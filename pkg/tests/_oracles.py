"""Independent reference computations used as test oracles.

Nothing here calls the package's filters or kernels; observation models are
only used through their scalar route or closed-form segment likelihoods.
"""
import itertools

import numpy as np
from scipy.special import logsumexp

from bosd.model import HsmmParams
from bosd.upm import (BasisParams, BasisUpm, ConjugateGaussianUpm, GaussianState, GaussianUpm, NiwPrior,
                      ScaledSineUpm, SineParams)


def hmm_forward(pi, a, log_b):
    """Textbook scaled forward filter; ``log_b`` is (T, K) emission log-likelihoods."""
    b = np.exp(log_b - log_b.max(axis=1, keepdims=True))
    alpha = pi * b[0]
    out = [alpha / alpha.sum()]
    for t in range(1, log_b.shape[0]):
        alpha = (out[-1] @ a) * b[t]
        out.append(alpha / alpha.sum())
    return np.array(out)


def bocpd_enumerate(hazard, upm, obs):
    """Run-length posteriors by enumerating every change-point configuration.

    The first observation opens a segment; each later step either continues
    the current run (probability ``1 - H(r)``) or starts a new one (``H(r)``).
    Returns the (T, len(hazard)) posteriors and ``log p(y_1..y_t)`` per step.
    """
    h = np.asarray(hazard, dtype=float)
    n = h.size
    obs = np.asarray(obs, dtype=float).reshape(len(obs), -1)
    posts, log_marg = [], []
    for t in range(1, len(obs) + 1):
        log_w = np.full(n, -np.inf)
        terms = [[] for _ in range(n)]
        for cps in itertools.product((0, 1), repeat=t - 1):
            r, logp, starts = 0, 0.0, [0]
            for i, c in enumerate(cps, start=1):
                p = h[r] if c else 1.0 - h[r]
                if p == 0:
                    logp = -np.inf
                    break
                logp += np.log(p)
                r = 0 if c else r + 1
                if c:
                    starts.append(i)
            if logp == -np.inf:
                continue
            bounds = starts + [t]
            for s, e in zip(bounds, bounds[1:]):
                logp += upm.segment_loglik(0, obs[s:e], e - s)
            terms[r].append(logp)
        for r in range(n):
            if terms[r]:
                log_w[r] = logsumexp(terms[r])
        z = logsumexp(log_w)
        posts.append(np.exp(log_w - z))
        log_marg.append(z)
    return np.array(posts), np.array(log_marg)


def naive_residual(hazard, rl_posterior):
    """Double loop over (l, r) of ``H(r + l) prod_{k=r}^{r+l-1} (1 - H(k))``."""
    h = np.array(hazard, dtype=float)
    h[-1] = 1.0
    n = h.size
    out = np.zeros(n)
    for r in range(n):
        for l in range(n - r):
            surv = 1.0
            for k in range(r, r + l):
                surv *= 1.0 - h[k]
            out[l] += h[r + l] * surv * rl_posterior[r]
    return out


def random_gaussian_upm(rng, k, dim=1):
    states = []
    for _ in range(k):
        m = rng.normal(size=(dim, dim))
        states.append(GaussianState(rng.normal(size=dim), m @ m.T + dim * np.eye(dim) * 0.5))
    return GaussianUpm(states)


def random_niw_upm(rng, k, dim=1):
    return ConjugateGaussianUpm([NiwPrior(rng.normal(size=dim), rng.uniform(0.5, 2.0), dim + rng.uniform(1.0, 4.0),
                                          np.eye(dim) * rng.uniform(0.5, 2.0)) for _ in range(k)])


def random_sine_upm(rng, k):
    return ScaledSineUpm([SineParams(rng.normal(), rng.normal(), rng.uniform(0.2, 1.0)) for _ in range(k)])


def random_basis_upm(rng, k, n_basis=3):
    states = []
    for _ in range(k):
        m = rng.normal(size=(n_basis, n_basis))
        states.append(BasisParams(rng.normal(size=n_basis), m @ m.T / n_basis + 0.1 * np.eye(n_basis),
                                  rng.uniform(0.2, 1.0)))
    return BasisUpm(states, n_basis)


def random_params(rng, k, d_max, upm, sparse=False):
    """Random model; ``sparse`` zeroes some duration and transition entries."""
    pi = rng.dirichlet(np.ones(k))
    a = rng.dirichlet(np.ones(k), size=k)
    d = rng.dirichlet(np.ones(d_max), size=k)
    if sparse:
        d = d * (rng.random(d.shape) < 0.7)
        d[:, -1] += 1e-3
        d /= d.sum(axis=1, keepdims=True)
    return HsmmParams(pi, a, d, upm)
