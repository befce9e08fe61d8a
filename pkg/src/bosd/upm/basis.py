"""Radial-basis trajectory model with a conjugate Gaussian weight prior.

Within a segment of state ``z`` and duration ``d`` the observation at run
length ``r`` is ``phi(r / d) @ w + N(0, sigma2_z)`` with a segment-level weight
vector ``w ~ N(mu_z, Sigma_z)``.  ``phi`` is a fixed set of evenly spaced
Gaussian bumps on [0, 1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .base import FitResult, Upm, UpmBank, check_hypothesis, check_observation
from .gaussian import _spd, regularized_covariance

MIN_VARIANCE = 1e-12
DEFAULT_RIDGE = 1e-6


class RadialBasis:
    """``n`` Gaussian bumps centred at ``(i + 0.5) / n`` with common ``width``."""

    def __init__(self, n: int, width: float | None = None):
        if n < 1:
            raise ValueError("need at least one basis function")
        self.n = int(n)
        self.width = float(width) if width is not None else 1.0 / n
        if not self.width > 0:
            raise ValueError("basis width must be positive")
        self.centers = (np.arange(self.n) + 0.5) / self.n

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * ((x[..., None] - self.centers) / self.width) ** 2)

    def design(self, n_obs: int, d: int) -> np.ndarray:
        return self(np.arange(n_obs) / d)


@dataclass(frozen=True)
class BasisParams:
    mu: np.ndarray
    sigma: np.ndarray
    sigma2: float


@dataclass(frozen=True)
class BasisStats:
    """Natural parameters of the weight posterior."""

    z: int
    r: int
    d: int
    precision: np.ndarray
    shift: np.ndarray


class BasisUpm(Upm):
    kind = "basis"
    duration_dependent = True

    def __init__(self, states, n_basis: int, width: float | None = None):
        self.basis = RadialBasis(n_basis, width)
        self.states = [BasisParams(np.asarray(s.mu, float).reshape(-1), np.atleast_2d(np.asarray(s.sigma, float)),
                                   float(s.sigma2)) for s in states]

    @property
    def n_states(self):
        return len(self.states)

    @property
    def dim(self):
        return 1

    def reset(self, z, d=1):
        s = self.states[z]
        prec = np.linalg.inv(s.sigma)
        return BasisStats(z, 0, d, prec, prec @ s.mu)

    def update(self, state, y):
        y = check_observation(y, 1)[0]
        f = self.basis(state.r / state.d)
        s2 = self.states[state.z].sigma2
        return BasisStats(state.z, state.r + 1, state.d,
                          state.precision + np.outer(f, f) / s2, state.shift + f * y / s2)

    def predictive_logpdf(self, y, r, d, z, state):
        check_hypothesis(r, d)
        y = check_observation(y, 1)[0]
        if state.r != r or state.d != d:
            raise ValueError(f"statistics absorbed {state.r} points of d={state.d}, asked for r={r}, d={d}")
        f = self.basis(r / d)
        cov = np.linalg.inv(state.precision)
        mean = f @ cov @ state.shift
        var = f @ cov @ f + self.states[z].sigma2
        return float(stats.norm.logpdf(y, mean, np.sqrt(var)))

    def segment_loglik(self, z, obs, d):
        """Batch marginal ``N(Phi mu, Phi Sigma Phi^T + sigma2 I)`` of the block."""
        obs = np.asarray(obs, dtype=float).reshape(-1)
        s = self.states[z]
        phi = self.basis.design(obs.shape[0], d)
        cov = phi @ s.sigma @ phi.T + s.sigma2 * np.eye(obs.shape[0])
        return float(stats.multivariate_normal(phi @ s.mu, cov).logpdf(obs))

    def sample_segment(self, z, d, rng):
        s = self.states[z]
        w = rng.multivariate_normal(s.mu, s.sigma)
        phi = self.basis.design(d, d)
        return (phi @ w + rng.normal(scale=np.sqrt(s.sigma2), size=d))[:, None]

    def make_bank(self, d_max):
        return BasisBank(self, d_max)

    def restrict(self, states):
        return BasisUpm([self.states[z] for z in states], self.basis.n, self.basis.width)

    def validate(self):
        problems = []
        n = self.basis.n
        for z, s in enumerate(self.states):
            if s.mu.shape != (n,) or not np.all(np.isfinite(s.mu)):
                problems.append(f"upm state {z}: mu must be a finite vector of length {n}")
            if s.sigma.shape != (n, n):
                problems.append(f"upm state {z}: sigma must be {n}x{n}")
            else:
                problems.extend(f"upm state {z}: {p}" for p in _spd(s.sigma, "sigma"))
            if not (np.isfinite(s.sigma2) and s.sigma2 > 0):
                problems.append(f"upm state {z}: sigma2 must be positive")
        return problems

    def to_dict(self):
        return {"kind": self.kind, "n_basis": self.basis.n, "width": self.basis.width,
                "states": [{"mu": s.mu.tolist(), "sigma": s.sigma.tolist(), "sigma2": s.sigma2}
                           for s in self.states]}

    @classmethod
    def from_dict(cls, block):
        states = [BasisParams(np.array(s["mu"], float), np.array(s["sigma"], float), s["sigma2"])
                  for s in block["states"]]
        return cls(states, block["n_basis"], block.get("width"))

    @classmethod
    def fit_mle(cls, segments, n_states, n_basis=8, width=None, ridge=DEFAULT_RIDGE, **options):
        """Per-segment ridge weights, moment-matched into ``(mu_z, Sigma_z)``,
        and the pooled residual variance per state.  Segments must be complete."""
        basis = RadialBasis(n_basis, width)
        warnings: list[str] = []
        weights = [[] for _ in range(n_states)]
        sq_resid = np.zeros(n_states)
        counts = np.zeros(n_states)
        for z, obs, d in segments:
            y = np.asarray(obs, dtype=float).reshape(-1)
            phi = basis.design(y.shape[0], d)
            w = np.linalg.solve(phi.T @ phi + ridge * np.eye(basis.n), phi.T @ y)
            weights[z].append(w)
            sq_resid[z] += np.sum((y - phi @ w) ** 2)
            counts[z] += y.shape[0]
        fitted = []
        for z in range(n_states):
            if not weights[z]:
                raise ValueError(f"no segments labelled with state {z}")
            ws = np.array(weights[z])
            sigma = regularized_covariance(ws, f"state {z} weights", warnings)
            sigma2 = sq_resid[z] / counts[z]
            if sigma2 < MIN_VARIANCE:
                warnings.append(f"state {z}: residual variance floored at {MIN_VARIANCE:g}")
                sigma2 = MIN_VARIANCE
            fitted.append(BasisParams(ws.mean(axis=0), sigma, float(sigma2)))
        return FitResult(cls(fitted, basis.n, basis.width), warnings)


class BasisBank(UpmBank):
    """Memoized predictive for every ``(z, d, r)`` hypothesis.

    The weight-posterior precision after ``r`` points of a duration-``d``
    segment does not depend on the observed values, so the gain vectors and
    predictive variances are tabulated once; per step only the data term
    ``sum_k phi(k / d) y_k / sigma2`` is carried, giving O(K D^2 N) work.
    """

    duration_dependent = True

    def __init__(self, upm: BasisUpm, d_max: int):
        k, n = upm.n_states, upm.basis.n
        d_idx, r = np.meshgrid(np.arange(d_max), np.arange(d_max), indexing="ij")
        self.valid = r <= d_idx
        phi = upm.basis(r / (d_idx + 1.0))                      # (D, D, N)
        self.phi = np.where(self.valid[..., None], phi, 0.0)
        outer = self.phi[..., :, None] * self.phi[..., None, :]
        # information from the r previous points: exclusive cumulative sum over r
        seen = np.cumsum(outer, axis=1) - outer
        self.gain = np.empty((k, d_max, d_max, n))
        self.prior_mean = np.empty((k, d_max, d_max))
        self.var = np.empty((k, d_max, d_max))
        self.obs_weight = np.empty((k, 1, 1, n))
        for z, s in enumerate(upm.states):
            prior_prec = np.linalg.inv(s.sigma)
            cov = np.linalg.inv(prior_prec + seen / s.sigma2)
            g = np.einsum("drij,drj->dri", cov, self.phi)
            self.gain[z] = g
            self.prior_mean[z] = g @ (prior_prec @ s.mu)
            self.var[z] = np.einsum("dri,dri->dr", g, self.phi) + s.sigma2
            self.obs_weight[z, 0, 0] = 1.0 / s.sigma2
        self.var[:, ~self.valid] = 1.0
        self.log_norm = -0.5 * np.log(2 * np.pi * self.var)
        self.data = np.zeros((k, d_max, d_max, n))

    def logpdf(self, y):
        mean = self.prior_mean + np.einsum("kdri,kdri->kdr", self.gain, self.data)
        return self.log_norm - 0.5 * (y[0] - mean) ** 2 / self.var

    def update(self, y):
        self.data[:, :, 1:] = self.data[:, :, :-1] + self.phi[None, :, :-1] * (y[0] * self.obs_weight)
        self.data[:, :, 0] = 0.0
