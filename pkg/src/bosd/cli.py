"""Command-line entry point: ``bosd {sample,fit,infer,eval,features}``.

Exit codes: 0 success, 1 numeric failure (posterior underflow), 2 input error.
Set ``BOSD_LOG`` (e.g. ``DEBUG``) to change the log level.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import formats
from .bocpd import BocpdFilter
from .bosd_filter import BosdFilter
from .errors import UnderflowError
from .formats import InputError
from .learning import DEFAULT_ALPHA, fit_supervised
from .metrics import evaluate
from .reference import FIXTURES
from .residual import residual_kernel, residual_posterior
from .sampling import SyntheticConfig, sample
from .upm import upm_class
from .upm.features import DEFAULT_BANDS, epoch_features

logger = logging.getLogger("bosd")


def _load_config(path) -> dict:
    if path is None:
        return {}
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise InputError(f"{path}: config must be a JSON object")
    return cfg


def _model_from_config(cfg: dict, base: Path | None):
    model = cfg.get("model")
    if model is None:
        synth = cfg.get("synthetic", {})
        return SyntheticConfig(**synth).params() if isinstance(synth, dict) else SyntheticConfig().params()
    if isinstance(model, str):
        path = Path(model)
        if base is not None and not path.is_absolute():
            path = base / path
        return formats.load_model(path)
    try:
        params = formats.model_from_dict(model)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"config model: {exc}") from exc
    params.validate().raise_if_invalid()
    return params


def cmd_sample(args) -> int:
    cfg = _load_config(args.config)
    base = Path(args.config).parent if args.config else None
    params = _model_from_config(cfg, base)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    length = int(cfg.get("length", cfg.get("synthetic", {}).get("length", 600)))
    n_seq = int(cfg.get("n_sequences", 1))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(seed).spawn(n_seq)
    labels = {}
    for i, ss in enumerate(seeds):
        smp = sample(params, length, np.random.default_rng(ss))
        seq_id = f"seq_{i:03d}"
        formats.write_sequence_csv(out / f"{seq_id}.csv", smp.observations)
        labels[seq_id] = smp.labels
    formats.write_labels_csv(out / "labels.csv", labels)
    formats.save_model(out / "model.json", params)
    print(f"wrote {n_seq} sequence(s) of length {length} to {out}")
    return 0


def _labels_for(labels_by_seq: dict, seq_path: Path, labels_path):
    stem = seq_path.stem
    if stem not in labels_by_seq:
        raise InputError(f"{labels_path}: no labels for seq_id '{stem}'")
    return labels_by_seq[stem]


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    labels_by_seq = formats.read_labels_csv(args.labels)
    sequences = []
    for p in map(Path, args.sequences):
        obs = formats.read_sequence_csv(p)
        labels = _labels_for(labels_by_seq, p, args.labels)
        problems = labels.problems(obs.shape[0])
        if problems:
            raise InputError(f"{args.labels} (seq_id {p.stem}): " + "; ".join(problems))
        sequences.append((obs, labels))
    states = [s.state for _, lab in sequences for s in lab]
    k = int(cfg.get("k", max(states) + 1 if states else 1))
    d_max = int(cfg.get("d_max", max(s.duration for _, lab in sequences for s in lab)))
    upm_cfg = dict(cfg.get("upm", {"kind": "gaussian"}))
    try:
        upm_cls = upm_class(upm_cfg.pop("kind", "gaussian"), upm_cfg.pop("mode", None))
    except ValueError as exc:
        raise InputError(f"{args.config}: {exc}") from exc
    try:
        report = fit_supervised(sequences, k, d_max, upm_cls, alpha=float(cfg.get("alpha", DEFAULT_ALPHA)),
                                **upm_cfg)
    except ValueError as exc:
        raise InputError(f"{args.labels}: {exc}") from exc
    out = Path(args.out)
    formats.save_model(out, report.params)
    formats.save_json(out.with_suffix(".report.json"), report.to_dict())
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote model (K = {k}, D_max = {d_max}) to {out}")
    return 0


def cmd_infer(args) -> int:
    params = formats.load_model(args.model)
    cfg = _load_config(args.config)
    full = int(cfg.get("trace_full_resolution", formats.FULL_RESOLUTION))
    if args.mode == "bocpd" and params.k != 1:
        raise InputError("bocpd mode needs a single-state model (K = 1)")
    # observations are streamed so memory does not grow with the sequence length
    with formats.TraceWriter(args.out, params.k, params.d_max, full_resolution=full) as writer:
        if args.mode == "bocpd":
            filt = BocpdFilter(params.hazard(0), params.upm)
            kernel = residual_kernel(filt.hazard)
        else:
            filt = BosdFilter(params)
        for t, y in enumerate(formats.iter_sequence_csv(args.sequence), start=1):
            if y.shape[0] != params.upm.dim:
                raise InputError(f"{args.sequence}:{t + 1}: observation has dimension {y.shape[0]}, "
                                 f"model expects {params.upm.dim}")
            if args.mode == "bocpd":
                log_e = filt.step(y)
                rl = filt.posterior
                writer.write(log_e, [1.0], rl, residual_posterior(kernel, rl))
            else:
                m = filt.step(y)
                writer.write(m.log_evidence, m.state, m.run_length, m.residual)
        total = writer.total_log_evidence
    print(f"log evidence: {total:.17g}")
    return 0


def cmd_eval(args) -> int:
    trace = formats.read_trace_csv(args.trace)
    labels_by_seq = formats.read_labels_csv(args.labels)
    seq_id = args.seq_id or (next(iter(labels_by_seq)) if len(labels_by_seq) == 1 else None)
    if seq_id is None or seq_id not in labels_by_seq:
        raise InputError(f"{args.labels}: choose a sequence with --seq-id ({', '.join(labels_by_seq)})")
    truth = labels_by_seq[seq_id].state_sequence()
    k = trace["state"].shape[1]
    if truth.size != trace["map_state"].size:
        raise InputError(f"trace has {trace['map_state'].size} steps, labels cover {truth.size}")
    names = args.names.split(",") if args.names else None
    if names is not None and len(names) != k:
        raise InputError(f"--names lists {len(names)} states, trace has {k}")
    report = evaluate(trace["map_state"], truth, k, names)
    result = report.to_dict()
    if args.reference:
        result["reference"] = {"fixture": args.reference, "comparison": report.compare(FIXTURES[args.reference])}
    text = json.dumps(result, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def cmd_features(args) -> int:
    cfg = _load_config(args.config)
    raw = formats.read_sequence_csv(args.raw)
    if "sample_rate" not in cfg or "epoch_seconds" not in cfg:
        raise InputError("features config needs 'sample_rate' and 'epoch_seconds'")
    bands = [tuple(b) for b in cfg.get("bands", DEFAULT_BANDS)]
    try:
        feats = epoch_features(raw, float(cfg["sample_rate"]), float(cfg["epoch_seconds"]), bands,
                               bool(cfg.get("log_amplitude", False)))
    except ValueError as exc:
        raise InputError(f"{args.raw}: {exc}") from exc
    formats.write_sequence_csv(args.out, feats)
    print(f"wrote {feats.shape[0]} epochs x {feats.shape[1]} features to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bosd", description="Online segment detection with HSMMs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample sequences, labels and the generating model")
    p.add_argument("--config", help="JSON config; without one the built-in synthetic model is used")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", help="supervised fit from labelled sequences")
    p.add_argument("sequences", nargs="+", help="sequence CSVs; seq_id is the file stem")
    p.add_argument("--labels", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, help="accepted for uniformity; fitting is deterministic")
    p.add_argument("--out", required=True, help="model JSON; a .report.json sidecar is written next to it")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("infer", help="filter a sequence and write its posterior trace")
    p.add_argument("sequence")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=("bosd", "bocpd"), default="bosd")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score a trace's MAP states against labels")
    p.add_argument("trace")
    p.add_argument("--labels", required=True)
    p.add_argument("--seq-id")
    p.add_argument("--names", help="comma-separated state names, e.g. wake,rem,nrem")
    p.add_argument("--reference", choices=sorted(FIXTURES), help="compare against published scores")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("features", help="band-amplitude features from a raw multichannel recording")
    p.add_argument("raw", help="raw CSV in the sequence format (one column per channel)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)
    return parser


def main(argv=None) -> int:
    level = getattr(logging, os.environ.get("BOSD_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnderflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
