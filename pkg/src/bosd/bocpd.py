"""Run-length filter for online change point detection.

The filter keeps ``log p(r_t | y_1..y_t)`` for ``r = 0 .. R`` with
``R = D_max - 1``.  The first observation always opens a segment (``r_1 = 0``),
which makes the filter agree exactly with a single-state segment filter
driven by the matching duration pmf.
"""
from __future__ import annotations

import copy
import logging
import math

import numpy as np

from . import kernels
from .errors import UnderflowError
from .upm.base import Upm, as_sequence, check_observation

logger = logging.getLogger(__name__)


def capped_hazard(hazard) -> np.ndarray:
    """Validate ``hazard`` and force a change point at the largest run length."""
    h = np.array(hazard, dtype=float).reshape(-1)
    if h.size == 0 or not np.all(np.isfinite(h)) or np.any(h < 0) or np.any(h > 1):
        raise ValueError("hazard values must lie in [0, 1]")
    if h[-1] < 1.0:
        logger.warning("hazard(%d) = %.3g < 1: run lengths beyond %d are folded into a change point",
                       h.size - 1, h[-1], h.size - 1)
        h[-1] = 1.0
    return h


class BocpdFilter:
    """Online run-length posterior with a duration-agnostic observation model.

    Parameters
    ----------
    hazard : array (D_max,)
        ``hazard[r]`` is the change probability after a run of length ``r``.
    upm : Upm
        Observation model; only hidden state ``state`` of it is used.
    """

    def __init__(self, hazard, upm: Upm, state: int = 0):
        if upm.duration_dependent:
            raise ValueError("run-length filtering needs a duration-agnostic observation model")
        h = capped_hazard(hazard)
        self.hazard = h
        self.d_max = h.size
        with np.errstate(divide="ignore"):
            self._log_h = np.log(h)
            self._log_1mh = np.log1p(-h)
        self.upm = upm if upm.n_states == 1 and state == 0 else upm.restrict([state])
        self.bank = self.upm.make_bank(self.d_max)
        log_gamma = np.full(self.d_max, -np.inf)
        log_gamma[0] = 0.0
        self._bind(log_gamma)
        self.t = 0
        self.log_evidence = 0.0

    def _bind(self, log_gamma):
        # banks that can run a whole step in one compiled call get a stepper
        make = getattr(self.bank, "run_length_stepper", None)
        self._stepper = None if make is None else make(self._log_h, self._log_1mh, log_gamma)
        self._log_gamma = None if self._stepper is not None else log_gamma
        self._out = np.empty(self.d_max)

    @property
    def log_gamma(self) -> np.ndarray:
        """``log p(r_t | y_1..y_t)`` over ``r = 0 .. R``."""
        return self._stepper.log_gamma if self._stepper is not None else self._log_gamma

    @property
    def posterior(self) -> np.ndarray:
        """``p(r_t | y_1..y_t)`` over ``r = 0 .. R``."""
        return np.exp(self.log_gamma)

    def _advance(self, y, out):
        log_pi = self.bank.logpdf(y)[0]
        return kernels.bocpd_recursion(log_pi, self._log_gamma, self._log_h, self._log_1mh,
                                       self.t == 0, out)

    def step(self, y) -> float:
        """Absorb one observation; returns ``log p(y_t | y_1..y_{t-1})``."""
        if self._stepper is not None:
            log_e = self._stepper.step(np.ascontiguousarray(y, dtype=float).reshape(-1), self.t == 0)
        else:
            y = check_observation(y, self.upm.dim)
            log_e = self._advance(y, self._out)
            if log_e != -np.inf:
                self._log_gamma, self._out = self._out, self._log_gamma
                self.bank.update(y)
        if not math.isfinite(log_e):
            raise UnderflowError(self.t + 1, "no run-length hypothesis explains the observation")
        self.t += 1
        self.log_evidence += log_e
        return log_e

    def predict_logpdf(self, y) -> float:
        """One-step-ahead predictive log density of ``y`` (state unchanged)."""
        y = check_observation(y, self.upm.dim)
        if self._stepper is not None:
            return self._stepper.predict(y, self.t == 0)
        return self._advance(y, np.empty(self.d_max))

    def predict(self):
        """Frozen one-step-ahead predictive as a callable ``y -> log density``."""
        return self.copy().predict_logpdf

    def copy(self) -> BocpdFilter:
        other = copy.copy(self)
        other.bank = self.bank.copy()
        other._bind(self.log_gamma.copy())
        return other

    def run(self, observations) -> np.ndarray:
        """Filter a whole sequence; returns the (T, D_max) posterior history."""
        rows = []
        for y in as_sequence(observations):
            self.step(y)
            rows.append(self.posterior)
        return np.array(rows)
