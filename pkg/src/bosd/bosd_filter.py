"""Online segment detection: joint filtering of run length, duration and state.

The posterior ``p(r_t, d_t, z_t | y_1..y_t)`` is stored in log space as a
(K, D_max, D_max) array indexed ``[z, d - 1, r]``; cells with ``r >= d`` hold
``-inf``.  Each step moves mass along two paths:

* growth: ``(r, d, z) -> (r + 1, d, z)`` while ``r < d - 1``;
* change point: segments that complete (``r = d - 1``) are pooled per state,
  mixed through the transition matrix and spread over new durations with the
  duration matrix, starting at ``r = 0``.

The first observation always opens a segment drawn from ``pi`` and ``D``.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import UnderflowError
from .model import HsmmParams, validate
from .upm.base import as_sequence, check_observation


@dataclass
class StepMarginals:
    """Marginals of the filtering posterior after one step."""

    run_length: np.ndarray
    residual: np.ndarray
    state: np.ndarray
    log_evidence: float


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=float))


class BosdFilter:
    def __init__(self, params: HsmmParams):
        report = validate(params)
        report.raise_if_invalid()
        self.params = params
        k, dm = params.k, params.d_max
        self.k, self.d_max = k, dm
        self._log_a = np.ascontiguousarray(_log(params.a))
        self._log_dur = np.ascontiguousarray(_log(params.d))
        self._log_init = np.ascontiguousarray(_log(params.pi))
        self.bank = params.upm.make_bank(dm)
        self.duration_dependent = bool(getattr(self.bank, "duration_dependent", False))
        self.log_gamma = np.full((k, dm, dm), -np.inf)
        self.log_gamma[:, :, 0] = self._log_init[:, None] + self._log_dur
        self.t = 0
        self.log_evidence = 0.0
        self._buffers = self._new_buffers()

    def _new_buffers(self):
        return (np.empty((self.k, self.d_max, self.d_max)), np.empty(self.d_max),
                np.empty(self.d_max), np.empty(self.k))

    @property
    def posterior(self) -> np.ndarray:
        """Joint posterior ``[z, d - 1, r]`` in the linear domain."""
        return np.exp(self.log_gamma)

    def marginals(self) -> StepMarginals:
        """Marginals of the current posterior (also valid before any step)."""
        p = self.posterior
        rl = p.sum(axis=(0, 1))
        per_dr = p.sum(axis=0)
        res = np.zeros(self.d_max)
        d_idx, r = np.nonzero(per_dr)
        np.add.at(res, d_idx - r, per_dr[d_idx, r])
        return StepMarginals(rl, res, p.sum(axis=(1, 2)), float("nan"))

    def _advance(self, y, buffers) -> float:
        out, rl, res, st = buffers
        log_pi = self.bank.logpdf(y)
        recursion = kernels.bosd_recursion if self.duration_dependent else kernels.bosd_recursion_shared
        return recursion(self.log_gamma, np.ascontiguousarray(log_pi), self._log_a, self._log_dur,
                         self._log_init, self.t == 0, out, rl, res, st)

    def step(self, y) -> StepMarginals:
        """Absorb one observation and return the new marginals.

        The returned arrays are fresh copies; the filter keeps its own buffers.
        """
        y = check_observation(y, self.params.upm.dim)
        log_e = self._advance(y, self._buffers)
        if not np.isfinite(log_e):
            raise UnderflowError(self.t + 1, "no (run length, duration, state) hypothesis explains the observation")
        out, rl, res, st = self._buffers
        self._buffers = (self.log_gamma, rl, res, st)
        self.log_gamma = out
        self.bank.update(y)
        self.t += 1
        self.log_evidence += log_e
        return StepMarginals(rl.copy(), res.copy(), st.copy(), float(log_e))

    def predict_logpdf(self, y) -> float:
        """``log p(y_{t+1} = y | y_1..y_t)``; the filter state is unchanged."""
        y = check_observation(y, self.params.upm.dim)
        return float(self._advance(y, self._new_buffers()))

    def predict(self):
        return self.copy().predict_logpdf

    def copy(self) -> BosdFilter:
        other = copy.copy(self)
        other.bank = self.bank.copy()
        other.log_gamma = self.log_gamma.copy()
        other._buffers = self._new_buffers()
        return other

    def run(self, observations):
        """Filter a sequence; returns the list of per-step marginals."""
        return [self.step(y) for y in as_sequence(observations)]


def map_state_sequence(state_marginals) -> np.ndarray:
    """Per-step argmax of ``p(z_t | y_1..y_t)``; ties go to the lowest index."""
    return np.argmax(np.atleast_2d(state_marginals), axis=1)
