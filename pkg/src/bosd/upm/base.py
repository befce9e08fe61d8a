"""Observation-model (UPM) interface.

A :class:`Upm` holds the hyperparameters of every hidden state and exposes two
routes to the same predictive density ``p(y_t | r_t, d_t, z_t, Y^{r_t})``:

* a scalar route (:meth:`Upm.reset`, :meth:`Upm.update`,
  :meth:`Upm.predictive_logpdf`) working on one hypothesis at a time, and
* a bank route (:meth:`Upm.make_bank`) that scores and updates all run-length
  hypotheses of a filter at once.

The filters only use banks; the scalar route backs the enumeration oracle and
:class:`GenericBank`, so the two can be checked against each other.
"""
from __future__ import annotations

import copy
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np


@dataclass
class FitResult:
    upm: Upm
    warnings: list[str] = field(default_factory=list)


def check_observation(y, dim: int) -> np.ndarray:
    if type(y) is np.ndarray and y.shape == (dim,) and y.dtype == np.float64 and y.flags.c_contiguous:
        if not np.isfinite(y).all():
            raise ValueError("observation has non-finite entries")
        return y
    y = np.ascontiguousarray(y, dtype=float).reshape(-1)
    if y.shape[0] != dim:
        raise ValueError(f"observation has dimension {y.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(y)):
        raise ValueError("observation has non-finite entries")
    return y


def as_sequence(obs) -> np.ndarray:
    """Observations as a (T, M) float array; a 1-D input is a univariate series."""
    arr = np.asarray(obs, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"observation sequence must be (T, M), got shape {arr.shape}")
    return arr


def check_hypothesis(r: int, d: int) -> None:
    if r < 0 or d < 1 or r >= d:
        raise ValueError(f"run length {r} must satisfy 0 <= r < d = {d}")


class UpmBank(ABC):
    """Per-hypothesis statistics of one filter.

    Duration-agnostic banks score a (K, D_max) grid indexed ``[z, r]``;
    duration-dependent banks a (K, D_max, D_max) grid indexed ``[z, d - 1, r]``
    (entries with ``r >= d`` are ignored by the filters).
    """

    duration_dependent = False

    @abstractmethod
    def logpdf(self, y: np.ndarray) -> np.ndarray:
        """Log predictive density of ``y`` under every hypothesis."""

    @abstractmethod
    def update(self, y: np.ndarray) -> None:
        """Absorb ``y``: hypothesis ``r`` takes the statistics of ``r - 1`` plus ``y``."""

    def copy(self) -> UpmBank:
        return copy.deepcopy(self)


class StatelessBank(UpmBank):
    """Bank of a UPM whose predictive does not depend on past observations."""

    def update(self, y):
        pass

    def copy(self):
        return self


class Upm(ABC):
    kind: str = ""
    duration_dependent: bool = False

    @property
    @abstractmethod
    def n_states(self) -> int:
        ...

    @property
    @abstractmethod
    def dim(self) -> int:
        ...

    # scalar route

    @abstractmethod
    def reset(self, z: int, d: int = 1):
        """Prior statistics of state ``z`` for a segment of duration ``d``
        (``d`` is ignored by duration-agnostic models)."""

    @abstractmethod
    def update(self, state, y):
        """Statistics after absorbing one more observation."""

    @abstractmethod
    def predictive_logpdf(self, y, r: int, d: int, z: int, state) -> float:
        """``log p(y | r, d, z, Y^r)`` where ``state`` has absorbed the ``r`` previous observations."""

    def segment_loglik(self, z: int, obs, d: int) -> float:
        """Joint log density of the first ``len(obs)`` observations of a segment of duration ``d``."""
        obs = as_sequence(obs)
        state = self.reset(z, d)
        total = 0.0
        for r, y in enumerate(obs):
            total += self.predictive_logpdf(y, r, d, z, state)
            state = self.update(state, y)
        return total

    @abstractmethod
    def sample_segment(self, z: int, d: int, rng: np.random.Generator) -> np.ndarray:
        """Draw the ``d`` observations of one segment, shape (d, M)."""

    # bank route

    def make_bank(self, d_max: int) -> UpmBank:
        return GenericBank(self, d_max)

    # bookkeeping

    @abstractmethod
    def restrict(self, states) -> Upm:
        """UPM over the listed states only, in that order."""

    @abstractmethod
    def validate(self) -> list[str]:
        ...

    @abstractmethod
    def to_dict(self) -> dict:
        ...

    @classmethod
    @abstractmethod
    def from_dict(cls, block: dict) -> Upm:
        ...

    @classmethod
    @abstractmethod
    def fit_mle(cls, segments, n_states: int, **options) -> FitResult:
        """Maximum-likelihood hyperparameters from ``(z, obs, d)`` labelled segments."""


class GenericBank(UpmBank):
    """Bank built from the scalar route, one statistics object per hypothesis.

    Works for any :class:`Upm`; the per-step cost is a Python loop over all
    hypotheses, so it serves as a cross-check for the vectorized banks.
    """

    def __init__(self, upm: Upm, d_max: int):
        self.upm = upm
        self.d_max = d_max
        self.duration_dependent = upm.duration_dependent
        k = upm.n_states
        self.n_seen = 0
        if self.duration_dependent:
            self.states = [[[upm.reset(z, di + 1) for _ in range(d_max)] for di in range(d_max)]
                           for z in range(k)]
        else:
            self.states = [[upm.reset(z) for _ in range(d_max)] for z in range(k)]

    def logpdf(self, y):
        # run lengths beyond the number of absorbed points are unreachable and left at -inf
        upm, dm = self.upm, self.d_max
        reach = min(self.n_seen + 1, dm)
        if self.duration_dependent:
            out = np.full((upm.n_states, dm, dm), -np.inf)
            for z, per_d in enumerate(self.states):
                for di, row in enumerate(per_d):
                    for r in range(min(di + 1, reach)):
                        out[z, di, r] = upm.predictive_logpdf(y, r, di + 1, z, row[r])
            return out
        out = np.full((upm.n_states, dm), -np.inf)
        for z, row in enumerate(self.states):
            for r in range(reach):
                out[z, r] = upm.predictive_logpdf(y, r, r + 1, z, row[r])
        return out

    def update(self, y):
        upm = self.upm
        self.n_seen += 1

        def shifted(row, z, d=1):
            return [upm.reset(z, d)] + [upm.update(s, y) for s in row[:-1]]

        if self.duration_dependent:
            self.states = [[shifted(row, z, di + 1) for di, row in enumerate(per_d)]
                           for z, per_d in enumerate(self.states)]
        else:
            self.states = [shifted(row, z) for z, row in enumerate(self.states)]
