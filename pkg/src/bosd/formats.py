"""File formats: sequence, label and trace CSVs and the model JSON.

* Sequence CSV: header ``t,y_1,...,y_M``; ``t`` counts from 1.
* Label CSV: header ``seq_id,state,start,duration[,truncated]``; ``start``
  counts from 1, ``truncated`` (0/1, optional) flags a final segment cut off by
  the end of the recording.
* Model JSON: keys ``k, d_max, pi, a, d, upm`` in that order, floats written
  with 17 significant digits so load/save round-trips byte for byte.
* Trace CSV: one row per step, see :class:`TraceWriter`.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .learning import Segment, SegmentLabels
from .model import HsmmParams
from .upm import upm_from_dict
from .upm.base import as_sequence


class InputError(ValueError):
    """Malformed input file; the message names the file and line."""


def _float(x) -> str:
    return format(float(x), ".17g")


# sequences

def write_sequence_csv(path, observations) -> None:
    obs = as_sequence(observations)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["t"] + [f"y_{j + 1}" for j in range(obs.shape[1])]) + "\n")
        for t, row in enumerate(obs, start=1):
            fh.write(",".join([str(t)] + [_float(v) for v in row]) + "\n")


def iter_sequence_csv(path):
    """Yield the observations of a sequence CSV one row at a time."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "t" or len(header) < 2:
            raise InputError(f"{path}:1: expected header t,y_1,...,y_M")
        m = len(header) - 1
        n = 0
        for line, row in enumerate(reader, start=2):
            if len(row) != m + 1:
                raise InputError(f"{path}:{line}: expected {m + 1} fields, got {len(row)}")
            try:
                t = int(row[0])
                y = np.array([float(v) for v in row[1:]])
            except ValueError as exc:
                raise InputError(f"{path}:{line}: {exc}") from exc
            if t != n + 1:
                raise InputError(f"{path}:{line}: t = {t}, expected {n + 1}")
            if not np.all(np.isfinite(y)):
                raise InputError(f"{path}:{line}: non-finite observation")
            n += 1
            yield y
        if n == 0:
            raise InputError(f"{path}: no observations")


def read_sequence_csv(path) -> np.ndarray:
    return np.array(list(iter_sequence_csv(path)))


# labels

LABEL_FIELDS = ("seq_id", "state", "start", "duration")


def write_labels_csv(path, labels_by_seq: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(LABEL_FIELDS + ("truncated",)) + "\n")
        for seq_id, labels in labels_by_seq.items():
            for s in labels:
                fh.write(f"{seq_id},{s.state},{s.start + 1},{s.duration},{int(s.truncated)}\n")


def read_labels_csv(path) -> dict[str, SegmentLabels]:
    """Labels grouped by ``seq_id`` in file order; segments sorted by start."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [f for f in LABEL_FIELDS if f not in header]
            if missing:
                raise InputError(f"{path}:1: missing columns {', '.join(missing)}")
            grouped: dict[str, list[Segment]] = {}
            for line, row in enumerate(reader, start=2):
                try:
                    seg = Segment(int(row["state"]), int(row["start"]) - 1, int(row["duration"]),
                                  bool(int(row.get("truncated") or 0)))
                except (TypeError, ValueError) as exc:
                    raise InputError(f"{path}:{line}: {exc}") from exc
                if seg.start < 0:
                    raise InputError(f"{path}:{line}: start must be >= 1")
                grouped.setdefault(row["seq_id"], []).append(seg)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    return {k: SegmentLabels(sorted(v, key=lambda s: s.start)) for k, v in grouped.items()}


# model JSON

def _encode(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        obj = list(obj)
        if any(isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[\n" + ",\n".join(pad + _encode(v, indent + 1) for v in obj) + "\n" + "  " * indent + "]"
        return "[" + ", ".join(_encode(v, indent) for v in obj) + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise ValueError("model JSON cannot hold non-finite numbers")
        return _float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot encode {type(obj).__name__}")


def model_to_dict(params: HsmmParams) -> dict:
    return {"k": params.k, "d_max": params.d_max, "pi": params.pi.tolist(), "a": params.a.tolist(),
            "d": params.d.tolist(), "upm": params.upm.to_dict()}


def model_from_dict(block: dict) -> HsmmParams:
    for key in ("k", "d_max", "pi", "a", "d", "upm"):
        if key not in block:
            raise InputError(f"model JSON lacks '{key}'")
    params = HsmmParams(np.array(block["pi"], float), np.array(block["a"], float),
                        np.array(block["d"], float), upm_from_dict(block["upm"]))
    if params.k != block["k"] or params.d_max != block["d_max"]:
        raise InputError("model JSON: k / d_max disagree with the array shapes")
    return params


def dumps_model(params: HsmmParams) -> str:
    return _encode(model_to_dict(params)) + "\n"


def save_model(path, params: HsmmParams) -> None:
    Path(path).write_text(dumps_model(params))


def load_model(path) -> HsmmParams:
    path = Path(path)
    try:
        block = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    try:
        params = model_from_dict(block)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    report = params.validate()
    if not report.ok:
        raise InputError(f"{path}: " + "; ".join(report.errors))
    return params


def save_json(path, obj) -> None:
    Path(path).write_text(_encode(obj) + "\n")


# traces

FULL_RESOLUTION = 256


def cdf_grid(size: int, full_resolution: int = FULL_RESOLUTION) -> np.ndarray:
    """Indices of the CDF columns kept in a trace: all of them up to
    ``full_resolution``, otherwise about that many evenly strided ones
    including the last."""
    if size <= full_resolution:
        return np.arange(size)
    stride = math.ceil(size / full_resolution)
    grid = np.arange(0, size, stride)
    return grid if grid[-1] == size - 1 else np.append(grid, size - 1)


class TraceWriter:
    """Streams one CSV row per filter step.

    Columns: ``t`` (from 1), ``log_e`` (log one-step evidence), ``map_state``,
    ``p_z<i>`` (state marginals), ``rl_cdf_<r>`` (run-length CDF at ``r``) and
    ``res_cdf_<l>`` (residual CDF at ``l``) on the grid from :func:`cdf_grid`.
    Residual columns are absent for run-length-only traces.
    """

    def __init__(self, path, k: int, d_max: int, residual: bool = True,
                 full_resolution: int = FULL_RESOLUTION):
        self.grid = cdf_grid(d_max, full_resolution)
        self.residual = residual
        self._fh = open(path, "w", newline="")
        cols = ["t", "log_e", "map_state"] + [f"p_z{i}" for i in range(k)]
        cols += [f"rl_cdf_{r}" for r in self.grid]
        if residual:
            cols += [f"res_cdf_{r}" for r in self.grid]
        self._fh.write(",".join(cols) + "\n")
        self.t = 0
        self.total_log_evidence = 0.0

    def write(self, log_e: float, state, run_length, residual=None) -> None:
        self.t += 1
        self.total_log_evidence += log_e
        state = np.atleast_1d(state)
        rl_cdf = np.clip(np.cumsum(run_length), 0.0, 1.0)[self.grid]
        fields = [str(self.t), _float(log_e), str(int(np.argmax(state)))]
        fields += [format(v, ".12g") for v in state]
        fields += [format(v, ".12g") for v in rl_cdf]
        if self.residual:
            res_cdf = np.clip(np.cumsum(residual), 0.0, 1.0)[self.grid]
            fields += [format(v, ".12g") for v in res_cdf]
        self._fh.write(",".join(fields) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trace_csv(path) -> dict[str, np.ndarray]:
    """Trace columns grouped as ``log_e``, ``map_state``, ``state``,
    ``rl_cdf`` and ``res_cdf`` (the last may be empty)."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    if not rows or rows[0][:3] != ["t", "log_e", "map_state"]:
        raise InputError(f"{path}:1: not a trace file")
    header = rows[0]
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]]).reshape(len(rows) - 1, len(header))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc

    def cols(prefix):
        idx = [i for i, h in enumerate(header) if h.startswith(prefix)]
        return data[:, idx]

    return {"log_e": data[:, 1], "map_state": data[:, 2].astype(int), "state": cols("p_z"),
            "rl_cdf": cols("rl_cdf_"), "res_cdf": cols("res_cdf_")}
