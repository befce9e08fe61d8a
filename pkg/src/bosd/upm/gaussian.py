"""Gaussian observation models (duration agnostic).

``GaussianUpm`` scores every observation with a fixed per-state normal
``N(y | mu_z, Sigma_z)``.  ``ConjugateGaussianUpm`` places a
normal-inverse-Wishart prior on the segment mean and covariance, so the
predictive is a multivariate Student-t whose statistics grow with the run
length.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.linalg import solve_triangular
from scipy.special import multigammaln

from .. import kernels
from .base import FitResult, StatelessBank, Upm, UpmBank, as_sequence, check_hypothesis, check_observation

logger = logging.getLogger(__name__)

JITTER = 1e-9
RIDGE_FALLBACK = 1e-3


def _spd(mat, label) -> list[str]:
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        return [f"{label} is not square"]
    if not np.all(np.isfinite(mat)) or not np.allclose(mat, mat.T, rtol=0, atol=1e-12 * max(1.0, np.abs(mat).max())):
        return [f"{label} is not symmetric"]
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return [f"{label} is not positive definite"]
    return []


def regularized_covariance(points: np.ndarray, label: str, warnings: list[str]) -> np.ndarray:
    """MLE covariance with trace-scaled jitter; ridge fallback when degenerate."""
    m = points.shape[1]
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / points.shape[0]
    scale = np.trace(cov) / m
    if not scale > 0:
        scale = 1.0
    cov = cov + JITTER * scale * np.eye(m)
    degenerate = points.shape[0] <= m
    if not degenerate:
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            degenerate = True
    if degenerate:
        warnings.append(f"{label}: singular covariance from {points.shape[0]} points, "
                        f"ridge {RIDGE_FALLBACK:g} * trace/M added")
        cov = cov + RIDGE_FALLBACK * scale * np.eye(m)
    return cov


def _group_points(segments, n_states):
    groups = [[] for _ in range(n_states)]
    for z, obs, _d in segments:
        groups[z].append(as_sequence(obs))
    return groups


@dataclass(frozen=True)
class GaussianState:
    mu: np.ndarray
    sigma: np.ndarray


class GaussianUpm(Upm):
    kind = "gaussian"
    mode = "fixed"

    def __init__(self, states):
        self.states = [GaussianState(np.asarray(s.mu, float).reshape(-1), np.atleast_2d(np.asarray(s.sigma, float)))
                       for s in states]
        self._chol = []
        for s in self.states:
            try:
                self._chol.append(np.linalg.cholesky(s.sigma))
            except np.linalg.LinAlgError:
                self._chol.append(None)

    @property
    def n_states(self):
        return len(self.states)

    @property
    def dim(self):
        return self.states[0].mu.shape[0]

    def logpdf(self, y, z: int) -> float:
        chol = self._chol[z]
        diff = solve_triangular(chol, y - self.states[z].mu, lower=True)
        m = y.shape[0]
        return float(-0.5 * diff @ diff - np.log(np.diag(chol)).sum() - 0.5 * m * np.log(2 * np.pi))

    def reset(self, z, d=1):
        return 0

    def update(self, state, y):
        check_observation(y, self.dim)
        return state + 1

    def predictive_logpdf(self, y, r, d, z, state):
        check_hypothesis(r, d)
        return self.logpdf(check_observation(y, self.dim), z)

    def segment_loglik(self, z, obs, d):
        obs = as_sequence(obs)
        return float(stats.multivariate_normal(self.states[z].mu, self.states[z].sigma).logpdf(obs).sum())

    def sample_segment(self, z, d, rng):
        s = self.states[z]
        return rng.multivariate_normal(s.mu, s.sigma, size=d)

    def make_bank(self, d_max):
        return _FixedGaussianBank(self, d_max)

    def restrict(self, states):
        return GaussianUpm([self.states[z] for z in states])

    def validate(self):
        problems = []
        m = self.dim
        for z, s in enumerate(self.states):
            if s.mu.shape != (m,) or not np.all(np.isfinite(s.mu)):
                problems.append(f"upm state {z}: mu must be a finite vector of length {m}")
            if s.sigma.shape != (m, m):
                problems.append(f"upm state {z}: sigma must be {m}x{m}")
            else:
                problems.extend(f"upm state {z}: {p}" for p in _spd(s.sigma, "sigma"))
        return problems

    def to_dict(self):
        return {"kind": self.kind, "mode": self.mode,
                "states": [{"mu": s.mu.tolist(), "sigma": s.sigma.tolist()} for s in self.states]}

    @classmethod
    def from_dict(cls, block):
        return cls([GaussianState(np.array(s["mu"], float), np.array(s["sigma"], float)) for s in block["states"]])

    @classmethod
    def fit_mle(cls, segments, n_states, **options):
        """Per-state empirical mean and (MLE) covariance of all labelled points."""
        warnings: list[str] = []
        fitted = []
        for z, blocks in enumerate(_group_points(segments, n_states)):
            if not blocks:
                raise ValueError(f"no segments labelled with state {z}")
            points = np.vstack(blocks)
            fitted.append(GaussianState(points.mean(axis=0), regularized_covariance(points, f"state {z}", warnings)))
        return FitResult(cls(fitted), warnings)


class _FixedGaussianBank(StatelessBank):
    def __init__(self, upm: GaussianUpm, d_max: int):
        self.upm = upm
        self.d_max = d_max

    def logpdf(self, y):
        per_state = np.array([self.upm.logpdf(y, z) for z in range(self.upm.n_states)])
        return np.repeat(per_state[:, None], self.d_max, axis=1)


@dataclass(frozen=True)
class NiwPrior:
    mu0: np.ndarray
    kappa0: float
    nu0: float
    psi0: np.ndarray


@dataclass(frozen=True)
class NiwStats:
    kappa: float
    nu: float
    mu: np.ndarray
    psi: np.ndarray


def niw_posterior(prior: NiwPrior, obs: np.ndarray) -> NiwStats:
    """Batch posterior of a normal-inverse-Wishart prior after ``obs`` (n, M)."""
    n = obs.shape[0]
    if n == 0:
        return NiwStats(prior.kappa0, prior.nu0, prior.mu0, prior.psi0)
    mean = obs.mean(axis=0)
    centered = obs - mean
    scatter = centered.T @ centered
    kappa = prior.kappa0 + n
    diff = mean - prior.mu0
    psi = prior.psi0 + scatter + (prior.kappa0 * n / kappa) * np.outer(diff, diff)
    return NiwStats(kappa, prior.nu0 + n, (prior.kappa0 * prior.mu0 + n * mean) / kappa, psi)


class ConjugateGaussianUpm(Upm):
    kind = "gaussian"
    mode = "conjugate"

    def __init__(self, priors):
        self.priors = [NiwPrior(np.asarray(p.mu0, float).reshape(-1), float(p.kappa0), float(p.nu0),
                                np.atleast_2d(np.asarray(p.psi0, float))) for p in priors]

    @property
    def n_states(self):
        return len(self.priors)

    @property
    def dim(self):
        return self.priors[0].mu0.shape[0]

    def reset(self, z, d=1):
        p = self.priors[z]
        return NiwStats(p.kappa0, p.nu0, p.mu0, p.psi0)

    def update(self, state, y):
        y = check_observation(y, self.dim)
        kappa = state.kappa + 1.0
        diff = y - state.mu
        return NiwStats(kappa, state.nu + 1.0, (state.kappa * state.mu + y) / kappa,
                        state.psi + (state.kappa / kappa) * np.outer(diff, diff))

    def predictive_logpdf(self, y, r, d, z, state):
        check_hypothesis(r, d)
        y = check_observation(y, self.dim)
        m = self.dim
        dof = state.nu - m + 1.0
        shape = state.psi * (state.kappa + 1.0) / (state.kappa * dof)
        return float(stats.multivariate_t(loc=state.mu, shape=shape, df=dof).logpdf(y))

    def segment_loglik(self, z, obs, d):
        """Closed-form marginal likelihood of the block (order independent)."""
        obs = as_sequence(obs)
        n, m = obs.shape
        prior = self.priors[z]
        post = niw_posterior(prior, obs)
        _, logdet0 = np.linalg.slogdet(prior.psi0)
        _, logdet_n = np.linalg.slogdet(post.psi)
        return float(-0.5 * n * m * np.log(np.pi)
                     + multigammaln(0.5 * post.nu, m) - multigammaln(0.5 * prior.nu0, m)
                     + 0.5 * prior.nu0 * logdet0 - 0.5 * post.nu * logdet_n
                     + 0.5 * m * (np.log(prior.kappa0) - np.log(post.kappa)))

    def sample_segment(self, z, d, rng):
        p = self.priors[z]
        cov = stats.invwishart(df=p.nu0, scale=p.psi0).rvs(random_state=rng)
        cov = np.atleast_2d(cov)
        mean = rng.multivariate_normal(p.mu0, cov / p.kappa0)
        return rng.multivariate_normal(mean, cov, size=d)

    def make_bank(self, d_max):
        return NiwBank(self, d_max)

    def restrict(self, states):
        return ConjugateGaussianUpm([self.priors[z] for z in states])

    def validate(self):
        problems = []
        m = self.dim
        for z, p in enumerate(self.priors):
            if p.mu0.shape != (m,) or not np.all(np.isfinite(p.mu0)):
                problems.append(f"upm state {z}: mu0 must be a finite vector of length {m}")
            if not p.kappa0 > 0:
                problems.append(f"upm state {z}: kappa0 must be positive")
            if not p.nu0 > m - 1:
                problems.append(f"upm state {z}: nu0 must exceed M - 1 = {m - 1}")
            if p.psi0.shape != (m, m):
                problems.append(f"upm state {z}: psi0 must be {m}x{m}")
            else:
                problems.extend(f"upm state {z}: {q}" for q in _spd(p.psi0, "psi0"))
        return problems

    def to_dict(self):
        return {"kind": self.kind, "mode": self.mode,
                "states": [{"mu0": p.mu0.tolist(), "kappa0": p.kappa0, "nu0": p.nu0, "psi0": p.psi0.tolist()}
                           for p in self.priors]}

    @classmethod
    def from_dict(cls, block):
        return cls([NiwPrior(np.array(s["mu0"], float), s["kappa0"], s["nu0"], np.array(s["psi0"], float))
                    for s in block["states"]])

    @classmethod
    def fit_mle(cls, segments, n_states, kappa0=1.0, **options):
        """Moment-matched prior: ``mu0`` is the mean of segment means, and
        ``psi0`` is set so the prior mean covariance equals the pooled
        within-segment covariance.  This is an empirical-Bayes estimate, not
        the marginal-likelihood maximizer (which has no closed form)."""
        warnings: list[str] = []
        priors = []
        per_state = [[] for _ in range(n_states)]
        for z, obs, _d in segments:
            per_state[z].append(as_sequence(obs))
        for z, blocks in enumerate(per_state):
            if not blocks:
                raise ValueError(f"no segments labelled with state {z}")
            m = blocks[0].shape[1]
            centered = np.vstack([b - b.mean(axis=0) for b in blocks])
            within = regularized_covariance(centered, f"state {z}", warnings)
            nu0 = m + 2.0
            priors.append(NiwPrior(np.mean([b.mean(axis=0) for b in blocks], axis=0), kappa0, nu0,
                                   within * (nu0 - m - 1.0)))
        return FitResult(cls(priors), warnings)


class NiwBank(UpmBank):
    """Student-t predictive for every ``(z, r)`` hypothesis, updated in place."""

    def __init__(self, upm: ConjugateGaussianUpm, d_max: int):
        k, m = upm.n_states, upm.dim
        self.kappa0 = np.array([p.kappa0 for p in upm.priors])
        self.nu0 = np.array([p.nu0 for p in upm.priors])
        self.mu0 = np.ascontiguousarray([p.mu0 for p in upm.priors], dtype=float)
        self.psi0 = np.ascontiguousarray([p.psi0 for p in upm.priors], dtype=float)
        self.kappa = np.repeat(self.kappa0[:, None], d_max, axis=1)
        self.nu = np.repeat(self.nu0[:, None], d_max, axis=1)
        self.mu = np.ascontiguousarray(np.repeat(self.mu0[:, None, :], d_max, axis=1))
        self.psi = np.ascontiguousarray(np.repeat(self.psi0[:, None, :, :], d_max, axis=1))
        self._out = np.empty((k, d_max))
        assert self.mu.shape == (k, d_max, m)

    def logpdf(self, y):
        kernels.niw_logpdf(y, self.kappa, self.nu, self.mu, self.psi, self._out)
        return self._out

    def update(self, y):
        kernels.niw_update(y, self.kappa, self.nu, self.mu, self.psi,
                           self.kappa0, self.nu0, self.mu0, self.psi0)

    def run_length_stepper(self, log_h, log_1mh, log_gamma):
        """Compiled single-call run-length step bound to this bank (one state only)."""
        if self.kappa.shape[0] != 1:
            raise ValueError("run-length stepping needs a single-state bank")
        return kernels.NiwRunLength(log_h, log_1mh, log_gamma, self.kappa, self.nu, self.mu, self.psi,
                                    self.kappa0, self.nu0, self.mu0, self.psi0)
