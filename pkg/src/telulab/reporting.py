"""File outputs: CSV/JSON artifacts and run metadata.

Files are the machine interface of the lab; stdout is for humans.  Every
writer goes through an atomic write-temp-then-rename so readers never see
a half-written artifact.  All emitted values are deterministic functions
of the run configuration; wall-clock timings go only into the metadata
JSON, which is the one non-deterministic artifact.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from . import __version__
from .harness import GridCell, LandscapeSurface, TrialResult, TrialSummary, conc_metric
from .properties import PropertyReport, report_to_dict

__all__ = [
    "atomic_write_text",
    "write_property_report",
    "write_kernel_table",
    "write_results_csv",
    "write_curves_csv",
    "write_summary_json",
    "write_grid_cells_csv",
    "write_best_config_json",
    "write_landscape_csv",
    "write_fisher_csv",
    "write_metadata",
    "METRIC_DEFINITIONS",
]

METRIC_DEFINITIONS = {
    "conc": "validation accuracy (percent) at the final recorded epoch",
    "cell_format": "mean±std of final test accuracy, two decimals, sample std (n-1)",
    "split_policy": "unstratified shuffle, Philox-keyed by (seed, split-tag)",
    "divergence": "first non-finite value ends the trial; such trials stay in the statistics",
    "wall_time": "seconds, reported only in this metadata file",
}


def atomic_write_text(path: Union[str, Path], text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def write_property_report(reports: list[PropertyReport], path) -> None:
    payload = [report_to_dict(r) for r in reports]
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_kernel_table(rows: Iterable[Sequence], path) -> None:
    """Long-format table: one row per (activation, x) with f, f', f''.

    The second-derivative column is empty where it is undefined (ReLU).
    """
    _write_csv(path, ("activation", "x", "f", "f_prime", "f_second"), rows)


_RESULT_COLUMNS = (
    "activation",
    "optimizer",
    "seed",
    "lr",
    "weight_decay",
    "gamma",
    "final_test_acc",
    "best_valid_acc",
    "conc",
    "diverged",
)


def _result_row(t: TrialResult) -> tuple:
    return (
        t.activation,
        t.optimizer,
        t.seed,
        t.lr,
        t.weight_decay,
        t.gamma,
        t.test_acc,
        t.best_valid_acc,
        conc_metric(t),
        t.diverged,
    )


def write_results_csv(trials: Iterable[TrialResult], path) -> None:
    """One row per trial.  Per-trial wall time lives in metadata, not here,
    so identical runs produce byte-identical files."""
    _write_csv(path, _RESULT_COLUMNS, (_result_row(t) for t in trials))


def write_curves_csv(trials: Iterable[TrialResult], path) -> None:
    rows = []
    for t in trials:
        for epoch in range(len(t.train_acc)):
            rows.append(
                (
                    t.seed,
                    epoch,
                    t.train_acc[epoch],
                    t.train_loss[epoch],
                    t.valid_acc[epoch],
                    t.valid_loss[epoch],
                )
            )
    _write_csv(
        path,
        ("seed", "epoch", "train_acc", "train_loss", "valid_acc", "valid_loss"),
        rows,
    )


def write_summary_json(summary: TrialSummary, path) -> None:
    payload = {
        "activation": summary.activation,
        "optimizer": summary.optimizer,
        "cell": summary.cell(),
        "mean_test_acc": summary.mean_test_acc,
        "std_test_acc": summary.std_test_acc,
        "mean_conc": summary.mean_conc,
        "divergence_count": summary.divergence_count,
        "n_trials": summary.n_trials,
    }
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_grid_cells_csv(cells: list[GridCell], path) -> None:
    rows = [
        (
            c.config.optimizer.lr,
            c.config.optimizer.weight_decay,
            c.config.schedule.gamma,
            c.mean_best_valid,
            c.summary.mean_test_acc,
            c.summary.std_test_acc,
            c.summary.divergence_count,
        )
        for c in cells
    ]
    _write_csv(
        path,
        (
            "lr",
            "weight_decay",
            "gamma",
            "mean_best_valid",
            "mean_test_acc",
            "std_test_acc",
            "divergence_count",
        ),
        rows,
    )


def write_best_config_json(config_dict: dict, path) -> None:
    atomic_write_text(path, json.dumps(config_dict, indent=2, sort_keys=True) + "\n")


def write_landscape_csv(surface: LandscapeSurface, path) -> None:
    """Matrix layout: header carries the beta axis, first column the alpha
    axis, cell (i, j) the loss at (alpha_i, beta_j)."""
    header = ["alpha\\beta"] + [repr(float(b)) for b in surface.betas]
    rows = []
    for i, a in enumerate(surface.alphas):
        rows.append([float(a)] + [float(v) for v in surface.losses[i]])
    _write_csv(path, header, rows)


def write_fisher_csv(values: np.ndarray, path) -> None:
    _write_csv(
        path,
        ("param_index", "fisher_diag"),
        ((i, float(v)) for i, v in enumerate(values)),
    )


def write_metadata(path, command: str, config: dict, **extra) -> None:
    """Resolved config plus tool version and metric definitions, written
    beside every run's outputs."""
    payload = {
        "tool": "telulab",
        "version": __version__,
        "command": command,
        "config": config,
        "definitions": METRIC_DEFINITIONS,
    }
    payload.update(extra)
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
