"""Generative model types and the hazard/duration duality.

Probabilities in this module are stored in the linear domain.  Durations are
1-based in the maths and 0-based in arrays: ``pmf[i]`` is ``P(d = i + 1)`` and
``hazard[r]`` is the probability that a segment which has run for ``r + 1``
observations ends there.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .upm.base import Upm

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-12
INPUT_TOL = 1e-9


def _as_pmf(pmf) -> np.ndarray:
    p = np.asarray(pmf, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("duration pmf must be a non-empty vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("duration pmf has negative or non-finite entries")
    if abs(p.sum() - 1.0) > INPUT_TOL:
        raise ValueError(f"duration pmf sums to {p.sum()!r}, expected 1")
    return p


def hazard_from_duration(pmf) -> np.ndarray:
    """Hazard ``H(r) = P(d = r+1) / P(d >= r+1)`` for ``r = 0 .. D_max-1``.

    Where no survival mass is left the hazard is 1.
    """
    p = _as_pmf(pmf)
    survival = np.cumsum(p[::-1])[::-1]
    h = np.ones_like(p)
    alive = survival > 0
    h[alive] = p[alive] / survival[alive]
    return np.clip(h, 0.0, 1.0)


def duration_from_hazard(hazard) -> np.ndarray:
    """Inverse of :func:`hazard_from_duration`.

    Survival mass left after the last hazard entry is assigned to
    ``d = D_max`` so the result is always normalized.
    """
    h = np.asarray(hazard, dtype=float)
    if h.ndim != 1 or h.size == 0:
        raise ValueError("hazard must be a non-empty vector")
    if not np.all(np.isfinite(h)) or np.any(h < 0) or np.any(h > 1):
        raise ValueError("hazard values must lie in [0, 1]")
    alive = np.concatenate(([1.0], np.cumprod(1.0 - h)))
    pmf = h * alive[:-1]
    tail = alive[-1]
    if tail > 0:
        logger.warning("hazard leaves survival mass %.3g past D_max; assigned to d = D_max", tail)
        pmf[-1] += tail
    return pmf


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    advisories: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_if_invalid(self) -> None:
        if self.errors:
            raise ValueError("invalid model: " + "; ".join(self.errors))


@dataclass(frozen=True, eq=False)
class HsmmParams:
    """Initial pmf ``pi`` (K,), transitions ``a`` (K, K), durations ``d`` (K, D_max)
    and the per-state observation model ``upm``."""

    pi: np.ndarray
    a: np.ndarray
    d: np.ndarray
    upm: Upm

    def __post_init__(self):
        for name in ("pi", "a", "d"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return self.pi.shape[0]

    @property
    def d_max(self) -> int:
        return self.d.shape[1]

    def hazard(self, state: int = 0) -> np.ndarray:
        return hazard_from_duration(self.d[state])

    def validate(self) -> ValidationReport:
        return validate(self)

    def replace(self, **changes) -> HsmmParams:
        fields = dict(pi=self.pi, a=self.a, d=self.d, upm=self.upm)
        fields.update(changes)
        return HsmmParams(**fields)


def _check_stochastic(arr, label, report, index_fmt):
    if not np.all(np.isfinite(arr)):
        report.errors.append(f"{label} has non-finite entries")
        return
    for idx in zip(*np.nonzero(arr < 0)):
        report.errors.append(f"{label} negative mass at {index_fmt(*idx)}")
    sums = arr.sum(axis=-1)
    for i, s in enumerate(np.atleast_1d(sums)):
        if abs(s - 1.0) > NORMALIZATION_TOL:
            where = f" row {i}" if arr.ndim == 2 else ""
            report.errors.append(f"{label}{where} sums to {s!r}")


def validate(params: HsmmParams) -> ValidationReport:
    """Collect every violated invariant of ``params``; an empty report means usable."""
    report = ValidationReport()
    k = params.pi.shape[0] if params.pi.ndim == 1 else -1
    if params.pi.ndim != 1 or k == 0:
        report.errors.append("pi must be a non-empty vector")
        return report
    if params.a.shape != (k, k):
        report.errors.append(f"a has shape {params.a.shape}, expected {(k, k)}")
    if params.d.ndim != 2 or params.d.shape[0] != k or params.d.shape[1] < 1:
        report.errors.append(f"d has shape {params.d.shape}, expected ({k}, D_max)")
    if report.errors:
        return report

    _check_stochastic(params.pi, "pi", report, lambda i: f"state {i}")
    _check_stochastic(params.a, "a", report, lambda i, j: f"({i}, {j})")
    _check_stochastic(params.d, "d", report, lambda i, j: f"(state {i}, duration {j + 1})")

    if k > 1:
        for i in np.nonzero(np.diag(params.a) > 0)[0]:
            report.advisories.append(
                f"a[{i}, {i}] > 0: self-transitions are confounded with longer durations")

    upm = params.upm
    if upm is None:
        report.errors.append("missing observation model")
    else:
        if upm.n_states != k:
            report.errors.append(f"upm has {upm.n_states} states, model has {k}")
        report.errors.extend(upm.validate())
    return report
