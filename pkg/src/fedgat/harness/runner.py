"""Experiment execution and parameter sweeps.

A run directory contains:

    config.json       resolved configuration (seed and format version included)
    history.jsonl     one record per round
    loss_curve.csv    round,series,loss  (series: server_val, client_<id>)
    metrics.json      test-set report, overall and per source
    metrics.txt       the same as an aligned table
    checkpoint.bin    final global parameters
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..data import (
    BiGraph,
    RawEvent,
    build_bigraphs,
    build_vocabulary,
    load_raw_dataset,
    partition_clients,
    read_jsonl,
    split_dataset,
    synthetic_events,
)
from ..federated import RoundRecord, run_training
from ..metrics import MetricsReport, build_report, format_table
from ..model import evaluate, save_checkpoint
from .config import ConfigError, ExperimentConfig, FORMAT_VERSION

log = logging.getLogger(__name__)

METHOD_NAME = "FedGAT"
SWEEP_PARAMS = ("m&k", "lambda")


@dataclass
class PreparedData:
    events: list[RawEvent]
    graphs: list[BiGraph]
    train: list[int]
    val: list[int]
    test: list[int]
    vocab_size: int


@dataclass
class RunResult:
    out_dir: Path
    history: list[RoundRecord]
    report: MetricsReport
    per_source: dict[str, MetricsReport] = field(default_factory=dict)


def load_events(cfg: ExperimentConfig) -> list[RawEvent]:
    events: list[RawEvent] = []
    for src in cfg.data.sources:
        if src.jsonl is not None:
            batch = read_jsonl(src.jsonl, source=src.name)
        elif src.synthetic_events is not None:
            batch = synthetic_events(src.synthetic_events, seed=src.synthetic_seed, sources=(src.name,))
        else:
            batch = load_raw_dataset(src.tree_dir, src.label_file, src.source_text, source=src.name)
        log.info("source %s: %d events", src.name, len(batch))
        events.extend(batch)
    return events


def prepare_data(cfg: ExperimentConfig, events: Optional[list[RawEvent]] = None) -> PreparedData:
    events = load_events(cfg) if events is None else events
    train, val, test = split_dataset(events, cfg.data.split, seed=cfg.seed)
    vocab = build_vocabulary((p.tokens for i in train for p in events[i].posts), cfg.data.vocab_size)
    graphs = build_bigraphs(events, vocab, cfg.data.feature_mode)
    return PreparedData(events, graphs, train, val, test, len(vocab))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_loss_curve(history: list[RoundRecord], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "series", "loss"])
        for rec in history:
            w.writerow([rec.round, "server_val", _fmt(rec.val_loss)])
            for cid in sorted(rec.client_loss):
                w.writerow([rec.round, f"client_{cid}", _fmt(rec.client_loss[cid])])


def run_experiment(cfg: ExperimentConfig, events: Optional[list[RawEvent]] = None) -> RunResult:
    """Train, evaluate on the test split and write every artifact to ``cfg.output_dir``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.dumps(), encoding="utf-8")

    data = prepare_data(cfg, events)
    fed = cfg.fed_config()
    partitions = partition_clients(data.events, data.train, fed.m, cfg.data.partition, cfg.seed, val=data.val)
    model_cfg = cfg.model_config()
    history, params, _ = run_training(fed, data.graphs, partitions, model_cfg, cfg.optim_config(), data.val)

    with open(out / "history.jsonl", "w", encoding="utf-8") as fh:
        for rec in history:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
    write_loss_curve(history, out / "loss_curve.csv")
    save_checkpoint(params, out / "checkpoint.bin")

    eval_split, eval_name = data.test, "test"
    if not eval_split:
        eval_split, eval_name = (data.val, "val") if data.val else (data.train, "train")
    _, preds = evaluate(params, data.graphs, model_cfg, eval_split)
    predicted = [p.predicted_class for p in preds]
    labels = [data.graphs[i].label for i in eval_split]
    report = build_report(predicted, labels)

    per_source: dict[str, MetricsReport] = {}
    sources = [s.name for s in cfg.data.sources]
    if len(sources) > 1:
        for name in sources:
            sel = [j for j, i in enumerate(eval_split) if data.events[i].source == name]
            if sel:
                per_source[name] = build_report([predicted[j] for j in sel], [labels[j] for j in sel])

    doc = {
        "format_version": FORMAT_VERSION,
        "seed": cfg.seed,
        "evaluated_on": eval_name,
        "n_events": len(eval_split),
        "overall": report.to_json(),
        "per_source": {k: v.to_json() for k, v in per_source.items()},
        "final_val_loss": history[-1].val_loss if history else None,
    }
    (out / "metrics.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    rows = [(METHOD_NAME, report)] + [(f"{METHOD_NAME}/{k}", v) for k, v in per_source.items()]
    (out / "metrics.txt").write_text(format_table(rows), encoding="utf-8")
    return RunResult(out, history, report, per_source)


# -- sweeps ---------------------------------------------------------------

@dataclass
class SweepSpec:
    parameter: str
    values: list
    repetitions: int = 1

    def validate(self) -> list[str]:
        errors = []
        if self.parameter not in SWEEP_PARAMS:
            errors.append(f"parameter: must be one of {SWEEP_PARAMS}, got {self.parameter!r}")
        if not self.values:
            errors.append("values: at least one value is required")
        if not isinstance(self.repetitions, int) or self.repetitions < 1:
            errors.append("repetitions: must be an integer >= 1")
        for i, v in enumerate(self.values):
            if self.parameter == "lambda":
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0 <= v <= 1:
                    errors.append(f"values[{i}]: lambda must be a number in [0, 1], got {v!r}")
            elif self.parameter == "m&k":
                ok = (isinstance(v, list) and len(v) == 2 and all(isinstance(x, int) and not isinstance(x, bool)
                                                                  for x in v))
                if not ok or not 1 <= v[1] <= v[0]:
                    errors.append(f"values[{i}]: m&k values must be [m, k] with 1 <= k <= m, got {v!r}")
        return errors

    @classmethod
    def from_dict(cls, obj) -> "SweepSpec":
        if not isinstance(obj, dict):
            raise ConfigError(["<root>: sweep spec must be an object"])
        unknown = sorted(set(obj) - {"parameter", "values", "repetitions"})
        spec = cls(obj.get("parameter", ""), list(obj.get("values", [])), obj.get("repetitions", 1))
        errors = [f"{k}: unknown field" for k in unknown] + spec.validate()
        if errors:
            raise ConfigError(errors)
        return spec


def cell_label(parameter: str, value) -> str:
    if parameter == "m&k":
        return f"m{value[0]}_k{value[1]}"
    return f"lambda{value}"


def value_key(parameter: str, value) -> str:
    return f"{value[0]}-{value[1]}" if parameter == "m&k" else repr(float(value))


def cell_config(base: ExperimentConfig, parameter: str, value, rep: int, out_root: Path) -> ExperimentConfig:
    cfg = copy.deepcopy(base)
    if parameter == "m&k":
        cfg.data.partition = "iid"
        cfg.federation.m, cfg.federation.k = int(value[0]), int(value[1])
    else:
        cfg.federation.lam = float(value)
    cfg.seed = base.seed + rep
    cfg.output_dir = str(out_root / cell_label(parameter, value) / f"rep{rep}")
    return cfg


def _run_cell(cfg: ExperimentConfig):
    try:
        result = run_experiment(cfg)
        return [(r.round, r.val_loss, dict(r.client_loss), r.val_accuracy) for r in result.history], None
    except Exception:
        return None, traceback.format_exc()


def run_sweep(spec: SweepSpec, base: ExperimentConfig, jobs: int = 1) -> dict:
    """One full run per (value, repetition); failures are recorded and the rest continue.

    Writes ``combined.csv`` (value,repetition,round,series,loss), ``trend.csv``
    with the final-round server validation loss of every cell, and
    ``sweep.json`` summarizing failures. Returns that summary.
    """
    root = Path(base.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    cells = [(v, r) for v in spec.values for r in range(spec.repetitions)]
    configs = [cell_config(base, spec.parameter, v, r, root) for v, r in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_cell, configs))
    else:
        outcomes = [_run_cell(c) for c in configs]

    failures = []
    with open(root / "combined.csv", "w", newline="", encoding="utf-8") as fc, \
            open(root / "trend.csv", "w", newline="", encoding="utf-8") as ft:
        wc = csv.writer(fc, lineterminator="\n")
        wt = csv.writer(ft, lineterminator="\n")
        wc.writerow(["value", "repetition", "round", "series", "loss"])
        wt.writerow(["value", "repetition", "final_val_loss", "final_val_accuracy"])
        for (value, rep), cfg, (rows, err) in zip(cells, configs, outcomes):
            key = value_key(spec.parameter, value)
            if err is not None:
                failures.append({"value": key, "repetition": rep, "error": err})
                log.error("sweep cell %s rep %d failed:\n%s", key, rep, err)
                continue
            for rnd, val_loss, client_loss, _ in rows:
                wc.writerow([key, rep, rnd, "server_val", _fmt(val_loss)])
                for cid in sorted(client_loss):
                    wc.writerow([key, rep, rnd, f"client_{cid}", _fmt(client_loss[cid])])
            _, last_loss, _, last_acc = rows[-1]
            wt.writerow([key, rep, _fmt(last_loss), "" if last_acc is None else _fmt(last_acc)])

    summary = {
        "parameter": spec.parameter,
        "values": [value_key(spec.parameter, v) for v in spec.values],
        "repetitions": spec.repetitions,
        "cells": len(cells),
        "failed": failures,
    }
    (root / "sweep.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def read_trend(path: str | os.PathLike) -> dict[str, dict[int, float]]:
    """``trend.csv`` as ``{value: {repetition: final_val_loss}}``."""
    out: dict[str, dict[int, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            loss = float(row["final_val_loss"])
            out.setdefault(row["value"], {})[int(row["repetition"])] = loss if not math.isnan(loss) else math.inf
    return out
