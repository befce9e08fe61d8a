"""Supervised estimation of an HSMM from labelled segmentations.

``pi``, ``A`` and ``D`` are normalized (optionally smoothed) counts of first
states, adjacent segment pairs and segment durations; the observation model is
fitted by its own ``fit_mle``.

Unsupervised EM would replace the hard counts by expectations of the segment
indicators under a forward-backward pass; that is not implemented here.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .model import HsmmParams
from .upm import upm_class
from .upm.base import Upm, as_sequence

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 1e-3


@dataclass(frozen=True)
class Segment:
    """One labelled segment; ``start`` is 0-based.

    ``truncated`` marks a final segment cut off by the end of the sequence, so
    ``duration`` is only a lower bound on its true duration.
    """

    state: int
    start: int
    duration: int
    truncated: bool = False

    @property
    def stop(self) -> int:
        return self.start + self.duration


@dataclass
class SegmentLabels:
    segments: list[Segment]

    def __iter__(self):
        return iter(self.segments)

    def __len__(self):
        return len(self.segments)

    @property
    def length(self) -> int:
        return self.segments[-1].stop if self.segments else 0

    def problems(self, n_obs: int | None = None, k: int | None = None,
                 d_max: int | None = None) -> list[str]:
        out = []
        pos = 0
        for i, s in enumerate(self.segments):
            where = f"segment {i} (start {s.start + 1})"
            if s.start != pos:
                out.append(f"{where}: expected start {pos + 1}, segments must tile the sequence")
            if s.duration < 1:
                out.append(f"{where}: duration {s.duration} < 1")
            if k is not None and not 0 <= s.state < k:
                out.append(f"{where}: state {s.state} outside [0, {k})")
            if d_max is not None and s.duration > d_max:
                out.append(f"{where}: duration {s.duration} exceeds D_max = {d_max}")
            if s.truncated and i != len(self.segments) - 1:
                out.append(f"{where}: only the last segment may be truncated")
            pos = s.start + s.duration
        if n_obs is not None and pos != n_obs:
            out.append(f"segments cover {pos} steps, sequence has {n_obs}")
        return out

    def check(self, n_obs=None, k=None, d_max=None, context: str = "") -> None:
        problems = self.problems(n_obs, k, d_max)
        if problems:
            prefix = f"{context}: " if context else ""
            raise ValueError(prefix + "; ".join(problems))

    def state_sequence(self) -> np.ndarray:
        """Per-step state labels."""
        return np.concatenate([np.full(s.duration, s.state, dtype=int) for s in self.segments]) \
            if self.segments else np.zeros(0, dtype=int)

    @classmethod
    def from_states(cls, states) -> SegmentLabels:
        """Run-length encode a per-step state sequence (no truncation flags)."""
        states = np.asarray(states, dtype=int)
        segs, start = [], 0
        for t in range(1, states.size + 1):
            if t == states.size or states[t] != states[start]:
                segs.append(Segment(int(states[start]), start, t - start))
                start = t
        return cls(segs)


@dataclass
class FitReport:
    params: HsmmParams
    pi_counts: np.ndarray
    a_counts: np.ndarray
    d_counts: np.ndarray
    alpha: float
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "pi_counts": self.pi_counts.tolist(),
                "a_counts": self.a_counts.tolist(), "d_counts": self.d_counts.tolist(),
                "warnings": list(self.warnings)}


def count_events(sequences, k: int, d_max: int):
    """Initial-state, transition and complete-duration counts.

    Truncated segments count towards ``pi`` and ``A`` but not ``D``.
    Returns ``(pi_counts, a_counts, d_counts, seen)`` where ``seen[z]`` is True
    when state ``z`` labels at least one segment.
    """
    pi_c = np.zeros(k)
    a_c = np.zeros((k, k))
    d_c = np.zeros((k, d_max))
    seen = np.zeros(k, dtype=bool)
    for n, (obs, labels) in enumerate(sequences):
        n_obs = None if obs is None else as_sequence(obs).shape[0]
        labels.check(n_obs, k, d_max, context=f"sequence {n}")
        segs = labels.segments
        if not segs:
            continue
        pi_c[segs[0].state] += 1
        for prev, nxt in zip(segs, segs[1:]):
            a_c[prev.state, nxt.state] += 1
        for s in segs:
            seen[s.state] = True
            if not s.truncated:
                d_c[s.state, s.duration - 1] += 1
    return pi_c, a_c, d_c, seen


def _normalize_rows(counts, alpha, seen, label, warnings, fallback):
    sm = counts + alpha
    out = np.empty_like(sm)
    for i, row in enumerate(np.atleast_2d(sm)):
        total = row.sum()
        if total > 0:
            out[i] = row / total
            continue
        if not seen[i]:
            raise ValueError(f"state {i} never appears in the labels and smoothing is 0")
        warnings.append(f"{label} row {i} has no counts; using {fallback.__name__.strip('_')} row")
        out[i] = fallback(i, row.size)
    return out


def _uniform(i, n):
    return np.full(n, 1.0 / n)


def _uniform_other(i, n):
    if n == 1:
        return np.ones(1)
    row = np.full(n, 1.0 / (n - 1))
    row[i] = 0.0
    return row


def fit_supervised(sequences, k: int, d_max: int, upm: str | Upm | type[Upm] = "gaussian",
                   alpha: float = DEFAULT_ALPHA, upm_mode: str | None = None,
                   **upm_options) -> FitReport:
    """Fit ``pi``, ``A``, ``D`` and the observation model from labelled data.

    ``sequences`` is a list of ``(observations, SegmentLabels)``.  ``upm`` is a
    kind name or :class:`Upm` subclass to fit, or a ready :class:`Upm`
    instance that is kept as is.  ``alpha`` is added to every count.
    """
    if alpha < 0:
        raise ValueError("smoothing alpha must be >= 0")
    sequences = list(sequences)
    pi_c, a_c, d_c, seen = count_events(sequences, k, d_max)
    warnings: list[str] = []

    if pi_c.sum() + k * alpha == 0:
        raise ValueError("no labelled segments and smoothing is 0")
    pi = _normalize_rows(pi_c[None, :], alpha, [True], "pi", warnings, _uniform)[0]
    a = _normalize_rows(a_c, alpha, seen, "A", warnings, _uniform_other)
    d = _normalize_rows(d_c, alpha, seen, "D", warnings, _uniform)

    if isinstance(upm, Upm):
        if upm.n_states != k:
            raise ValueError(f"observation model has {upm.n_states} states, expected {k}")
        fitted_upm = upm
    else:
        cls = upm_class(upm, upm_mode) if isinstance(upm, str) else upm
        segments = []
        for obs, labels in sequences:
            obs = as_sequence(obs)
            for s in labels:
                if s.truncated and cls.duration_dependent:
                    continue
                segments.append((s.state, obs[s.start:s.stop], s.duration))
        result = cls.fit_mle(segments, k, **upm_options)
        fitted_upm = result.upm
        warnings.extend(result.warnings)

    for w in warnings:
        logger.warning(w)
    params = HsmmParams(pi, a, d, fitted_upm)
    params.validate().raise_if_invalid()
    return FitReport(params, pi_c, a_c, d_c, alpha, warnings)


@dataclass
class LoglikBreakdown:
    """``log p(Y, S)`` split into its factors, with the location of every
    zero-probability event."""

    initial: float
    transitions: float
    durations: float
    observations: float
    problems: list[str] = field(default_factory=list)

    @property
    def labels(self) -> float:
        return self.initial + self.transitions + self.durations

    @property
    def total(self) -> float:
        return self.labels + self.observations


def _log(x) -> float:
    with np.errstate(divide="ignore"):
        return float(np.log(x))


def complete_data_loglik(params: HsmmParams, sequences) -> LoglikBreakdown:
    """Joint log density of observations and labels under ``params``.

    A truncated final segment of observed length ``n`` contributes
    ``log sum_{d >= n} D[z, d] p(y | z, d)``, split as the log survival
    ``log P(d >= n)`` plus the conditional observation term.
    """
    upm = params.upm
    out = LoglikBreakdown(0.0, 0.0, 0.0, 0.0)

    def add(attr, value, where):
        if value == -np.inf:
            out.problems.append(f"{where}: zero-probability {attr} term")
        setattr(out, attr, getattr(out, attr) + value)

    for n, (obs, labels) in enumerate(sequences):
        obs = as_sequence(obs)
        labels.check(obs.shape[0], params.k, params.d_max, context=f"sequence {n}")
        segs = labels.segments
        if not segs:
            continue
        add("initial", _log(params.pi[segs[0].state]), f"sequence {n}")
        for i, (prev, nxt) in enumerate(zip(segs, segs[1:])):
            add("transitions", _log(params.a[prev.state, nxt.state]), f"sequence {n} segment {i + 1}")
        for i, s in enumerate(segs):
            where = f"sequence {n} segment {i} (start {s.start + 1})"
            seg_obs = obs[s.start:s.stop]
            if not s.truncated:
                add("durations", _log(params.d[s.state, s.duration - 1]), where)
                add("observations", upm.segment_loglik(s.state, seg_obs, s.duration), where)
                continue
            tail = np.arange(s.duration, params.d_max + 1)
            with np.errstate(divide="ignore"):
                log_dur = np.log(params.d[s.state, tail - 1])
            log_surv = float(logsumexp(log_dur)) if np.any(np.isfinite(log_dur)) else -np.inf
            add("durations", log_surv, where)
            if log_surv == -np.inf:
                continue
            if upm.duration_dependent:
                joint = [ld + upm.segment_loglik(s.state, seg_obs, int(d))
                         for ld, d in zip(log_dur, tail) if np.isfinite(ld)]
                add("observations", float(logsumexp(joint)) - log_surv, where)
            else:
                add("observations", upm.segment_loglik(s.state, seg_obs, s.duration), where)
    return out
