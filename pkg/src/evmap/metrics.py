"""Semantic accuracy and uncertainty-reliability metrics, plus the report.

Covered cells are ground-truth cells present in the map; uncovered cells
are excluded from accuracy, calibration, and sparsification but reported
as coverage, keeping method comparisons fair since both methods see the
same inputs.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.stats import spearmanr

from evmap.evidence import projected_probabilities
from evmap.mapio import (
    GroundTruthGrid,
    LoadedMap,
    PipelineConfig,
    write_map_csv,
)

__all__ = [
    "confusion_matrix",
    "accuracy_and_miou",
    "expected_calibration_error",
    "SparsificationResult",
    "sparsification_ause",
    "spearman_uncertainty_error",
    "compare_report",
    "load_report",
]

REPORT_FORMAT = "evmap-report-v1"
_METRIC_KEYS = {
    "covered_cells",
    "coverage",
    "accuracy",
    "per_class_iou",
    "miou",
    "ece",
    "ause",
    "spearman_uncertainty_error",
}


def confusion_matrix(
    predictions: Mapping[tuple[int, int, int], int],
    gt: GroundTruthGrid,
    num_classes: int,
) -> tuple[np.ndarray, int]:
    """K x K counts with rows = ground truth, columns = prediction.

    Ground-truth cells absent from ``predictions`` are skipped and returned
    as the uncovered count.
    """
    if len(gt) == 0:
        raise ValueError("ground truth is empty")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    uncovered = 0
    for key in sorted(gt.cells):
        truth = gt.cells[key]
        if not 0 <= truth < num_classes:
            raise ValueError(f"ground-truth label {truth} out of range at {key}")
        pred = predictions.get(key)
        if pred is None:
            uncovered += 1
            continue
        if not 0 <= pred < num_classes:
            raise ValueError(f"predicted label {pred} out of range at {key}")
        cm[truth, pred] += 1
    return cm, uncovered


def accuracy_and_miou(cm: np.ndarray) -> tuple[float, list[float | None], float]:
    """Accuracy, per-class IoU, and mIoU from a confusion matrix.

    Classes with zero union (absent from both truth and prediction) are
    reported as None and excluded from the mean.
    """
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")
    accuracy = float(np.trace(cm)) / total
    per_class: list[float | None] = []
    valid: list[float] = []
    for k in range(cm.shape[0]):
        tp = int(cm[k, k])
        fp = int(cm[:, k].sum()) - tp
        fn = int(cm[k, :].sum()) - tp
        union = tp + fp + fn
        if union == 0:
            per_class.append(None)
        else:
            iou = tp / union
            per_class.append(iou)
            valid.append(iou)
    return accuracy, per_class, float(np.mean(valid))


def expected_calibration_error(confidences, correct, bins: int = 15) -> float:
    """Binned gap between confidence and accuracy.

    Equal-width bins over [0, 1], each bin left-open and right-closed with
    the bottom bin including 0: ECE = sum_b (n_b / N) |acc_b - conf_b|.
    """
    conf = np.asarray(confidences, dtype=np.float64)
    corr = np.asarray(correct, dtype=np.float64)
    if conf.size == 0:
        raise ValueError("need at least one (confidence, correct) pair")
    if conf.shape != corr.shape or conf.ndim != 1:
        raise ValueError("confidences and correctness must be 1-D and the same length")
    if not np.all(np.isfinite(conf)) or np.any(conf < -1e-12) or np.any(conf > 1.0 + 1e-12):
        raise ValueError("confidences must lie in [0, 1]")
    conf = np.clip(conf, 0.0, 1.0)
    if int(bins) != bins or bins < 1:
        raise ValueError(f"bins must be an int >= 1, got {bins!r}")
    which = np.clip(np.ceil(conf * bins).astype(np.int64) - 1, 0, bins - 1)
    n = conf.size
    ece = 0.0
    for b in range(bins):
        mask = which == b
        count = int(mask.sum())
        if count:
            ece += (count / n) * abs(float(corr[mask].mean()) - float(conf[mask].mean()))
    return ece


@dataclass
class SparsificationResult:
    """Error-rate curves over removal fractions plus the area between them."""

    fractions: np.ndarray
    curve: np.ndarray
    oracle_curve: np.ndarray
    ause: float


def sparsification_ause(uncertainties, errors, steps: int = 20) -> SparsificationResult:
    """Sparsification curve and its area above the oracle curve.

    Cells are removed most-uncertain first (stable sort, so ties keep the
    caller's order; pass cells in lexicographic index order).  At fraction
    i/steps the error rate of the remaining cells is recorded; the oracle
    removes truly wrong cells first.  AUSE is the mean gap, and depends on
    the uncertainty values only through their ranking.
    """
    u = np.asarray(uncertainties, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    if u.ndim != 1 or u.shape != e.shape:
        raise ValueError("uncertainties and errors must be 1-D and the same length")
    if int(steps) != steps or steps < 1:
        raise ValueError(f"steps must be an int >= 1, got {steps!r}")
    n = u.size
    if n < steps:
        raise ValueError(f"need at least steps={steps} cells, got {n}")
    if not np.all(np.isfinite(u)):
        raise ValueError("uncertainties must be finite")
    if not np.all((e == 0.0) | (e == 1.0)):
        raise ValueError("errors must be 0/1 indicators")
    method_order = np.argsort(-u, kind="stable")
    oracle_order = np.argsort(-e, kind="stable")
    curve = np.empty(steps)
    oracle = np.empty(steps)
    for i in range(steps):
        drop = (i * n) // steps  # integer arithmetic keeps cutoffs platform-stable
        curve[i] = e[method_order[drop:]].mean()
        oracle[i] = e[oracle_order[drop:]].mean()
    fractions = np.arange(steps, dtype=np.float64) / steps
    return SparsificationResult(
        fractions=fractions,
        curve=curve,
        oracle_curve=oracle,
        ause=float(np.mean(curve - oracle)),
    )


def spearman_uncertainty_error(uncertainties, errors) -> float | None:
    """Spearman rank correlation between uncertainty and the error indicator.

    Returns None when undefined (constant input).
    """
    u = np.asarray(uncertainties, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    if u.size < 2:
        return None
    rho = spearmanr(u, e).statistic
    if rho is None or math.isnan(rho):
        return None
    return float(rho)


def _evaluate_method(
    loaded: LoadedMap,
    gt: GroundTruthGrid,
    num_classes: int,
    ece_bins: int,
    steps: int,
) -> tuple[dict, list]:
    predictions = {key: row.label for key, row in loaded.cells.items()}
    cm, uncovered = confusion_matrix(predictions, gt, num_classes)
    accuracy, per_class, miou = accuracy_and_miou(cm)

    covered_keys = sorted(key for key in gt.cells if key in loaded.cells)
    confidence = np.array(
        [float(np.max(projected_probabilities(loaded.cells[key].mass))) for key in covered_keys]
    )
    correct = np.array(
        [1.0 if loaded.cells[key].label == gt.cells[key] else 0.0 for key in covered_keys]
    )
    uncert = np.array([loaded.cells[key].uncertainty for key in covered_keys])
    errors = 1.0 - correct

    ece = expected_calibration_error(confidence, correct, ece_bins)
    spars = sparsification_ause(uncert, errors, steps)
    rho = spearman_uncertainty_error(uncert, errors)

    metrics = {
        "covered_cells": len(covered_keys),
        "coverage": len(covered_keys) / len(gt),
        "accuracy": accuracy,
        "per_class_iou": per_class,
        "miou": miou,
        "ece": ece,
        "ause": spars.ause,
        "spearman_uncertainty_error": rho,
        "confusion_matrix": cm.tolist(),
        "uncovered_cells": uncovered,
        "sparsification_fractions": spars.fractions.tolist(),
        "sparsification_curve": spars.curve.tolist(),
        "sparsification_oracle": spars.oracle_curve.tolist(),
    }
    cell_dump = [
        (key, loaded.cells[key], gt.cells[key], int(correct[i]))
        for i, key in enumerate(covered_keys)
    ]
    return metrics, cell_dump


def _write_cells_csv(path: Path, dump: list, num_classes: int) -> None:
    # Shares the map CSV column convention plus gt_label and correct.
    rows = [row for _, row, _, _ in dump]
    write_map_csv(path, rows, num_classes)
    lines = path.read_text(encoding="utf-8").splitlines()
    lines[0] += ",gt_label,correct"
    for i, (_, _, gt_label, correct) in enumerate(dump):
        lines[i + 1] += f",{gt_label},{correct}"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def compare_report(
    evidential: LoadedMap,
    baseline: LoadedMap | None,
    gt: GroundTruthGrid,
    config: PipelineConfig,
    out_path,
    runtimes: Mapping[str, float] | None = None,
) -> dict:
    """Evaluate one or two maps against the ground truth and write the report.

    Writes the JSON report to ``out_path`` and one per-cell CSV per method
    next to it.  In single-map mode (baseline None) the block is named
    "map"; otherwise "evidential" and "baseline".
    """
    out_path = Path(out_path)
    k = config.map.num_classes
    if gt.max_label() >= k:
        raise ValueError(
            f"ground truth uses label {gt.max_label()} but config has {k} classes"
        )
    named = {"map" if baseline is None else "evidential": evidential}
    if baseline is not None:
        named["baseline"] = baseline
    runtimes = dict(runtimes or {})

    t0 = time.perf_counter()
    methods: dict[str, dict] = {}
    for name, loaded in named.items():
        if loaded.num_classes != k:
            raise ValueError(
                f"{name} map has {loaded.num_classes} classes, config has {k}"
            )
        metrics, dump = _evaluate_method(loaded, gt, k, config.ece_bins, config.sparsification_steps)
        cells_csv = out_path.with_name(f"{out_path.stem}.{name}.cells.csv")
        _write_cells_csv(cells_csv, dump, k)
        methods[name] = {
            "metrics": metrics,
            "cells_csv": cells_csv.name,
            "runtime_seconds": runtimes.get(name),
        }

    report = {
        "format": REPORT_FORMAT,
        "num_classes": k,
        "gt_cells": len(gt),
        "ece_bins": config.ece_bins,
        "sparsification_steps": config.sparsification_steps,
        "eval_seconds": time.perf_counter() - t0,
        "methods": methods,
    }
    out_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report


def load_report(path) -> dict:
    """Read a report back, validating its schema."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"report not found: {path}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(payload, dict) or payload.get("format") != REPORT_FORMAT:
        raise ValueError(f"{path}: not a recognized report file")
    methods = payload.get("methods")
    if not isinstance(methods, dict) or not methods:
        raise ValueError(f"{path}: report has no method blocks")
    for name, block in methods.items():
        metrics = block.get("metrics")
        if not isinstance(metrics, dict) or not _METRIC_KEYS <= set(metrics):
            raise ValueError(f"{path}: method {name!r} is missing metric keys")
    return payload
