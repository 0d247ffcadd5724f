"""Experiment orchestration: trials, replication, grid search, probes.

Reproduces the benchmark protocol at desk scale: step-decay schedules,
fixed batch sizes, multi-seed replication with mean +- sample-std cells,
validation-selected grid search, loss-landscape slices with filter-wise
direction normalization, and an empirical Fisher-diagonal probe.

Runs are deterministic end to end: a :class:`TrainConfig` (seed included)
fully determines every number in the outputs.  Divergence (first
non-finite value) ends a trial early and is recorded as data, never
raised to the caller.
"""

from __future__ import annotations

import concurrent.futures
import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import data as data_mod
from .autograd import (
    LayerSpec,
    Model,
    build_model,
    backward,
    forward,
    softmax_cross_entropy,
)
from .data import Dataset, SplitSpec
from .errors import ConfigError, DivergenceError
from .kernels import ActivationKind
from .optim import LrSchedule, OptimizerConfig, OptimizerState, lr_at_epoch, step
from .rng import TAG_DIRECTIONS, generator

__all__ = [
    "BlobsSpec",
    "DatasetSpec",
    "TrainConfig",
    "TrialResult",
    "TrialSummary",
    "GridSpec",
    "GridCell",
    "materialize_datasets",
    "run_trial",
    "train_model",
    "replicate",
    "grid_search",
    "conc_metric",
    "format_cell",
    "LandscapeSurface",
    "draw_directions",
    "landscape_slice",
    "empirical_fisher_diag",
]

_EVAL_BATCH = 512


@dataclass(frozen=True)
class BlobsSpec:
    n: int
    classes: int
    dim: int
    spread: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1 or self.classes < 2 or self.dim < 1:
            raise ConfigError("blobs spec needs n >= 1, classes >= 2, dim >= 1")
        if self.spread <= 0:
            raise ConfigError("blobs spread must be positive")


@dataclass(frozen=True)
class DatasetSpec:
    """Reference to a dataset plus how to split its training portion.

    ``standardize`` (off by default, matching the protocol under study)
    re-centers every split with the train split's per-channel mean/std.
    """

    name: str
    split: SplitSpec
    path: Optional[str] = None
    blobs: Optional[BlobsSpec] = None
    standardize: bool = False

    def __post_init__(self) -> None:
        if self.name not in ("cifar10", "cifar100", "blobs"):
            raise ConfigError(f"dataset.name must be cifar10|cifar100|blobs, got {self.name!r}")
        if self.name == "blobs":
            if self.blobs is None:
                raise ConfigError("dataset.blobs settings required for blobs")
            if self.split.test <= 0:
                raise ConfigError("blobs need split.test > 0 (test set is drawn fresh)")
            if self.split.train + self.split.valid != self.blobs.n:
                raise ConfigError("split.train + split.valid must equal blobs.n")
        else:
            if self.path is None:
                raise ConfigError(f"dataset.path required for {self.name}")


def _standardized(splits: tuple[Dataset, Dataset, Dataset]) -> tuple[Dataset, Dataset, Dataset]:
    train = splits[0]
    axes = (0, 2, 3) if train.images.ndim == 4 else (0,)
    mean = train.images.mean(axis=axes, keepdims=True)
    std = train.images.std(axis=axes, keepdims=True)
    std = np.where(std > 0.0, std, 1.0)
    return tuple(
        replace(ds, images=(ds.images - mean) / std) for ds in splits
    )


def materialize_datasets(spec: DatasetSpec) -> tuple[Dataset, Dataset, Dataset]:
    """(train, valid, test) datasets for a spec; pure function of the spec."""
    if spec.name == "blobs":
        b = spec.blobs
        full = data_mod.synthetic_blobs(
            b.n, b.classes, b.dim, b.spread, b.seed, tag="train"
        )
        train, valid = data_mod.split(full, spec.split)
        test = data_mod.synthetic_blobs(
            spec.split.test, b.classes, b.dim, b.spread, b.seed, tag="test"
        )
    else:
        loader = (
            data_mod.load_cifar10 if spec.name == "cifar10" else data_mod.load_cifar100
        )
        full = loader(spec.path, "train")
        train, valid = data_mod.split(full, spec.split)
        test = loader(spec.path, "test")
    if spec.standardize:
        train, valid, test = _standardized((train, valid, test))
    return train, valid, test


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines one training run."""

    layers: tuple[LayerSpec, ...]
    activation: ActivationKind
    optimizer: OptimizerConfig
    schedule: LrSchedule
    epochs: int
    batch: int
    dataset: DatasetSpec
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")
        if not self.layers:
            raise ConfigError("model needs at least one layer")


@dataclass(frozen=True)
class TrialResult:
    """Curves and outcome of a single training run.

    Curves hold one entry per completed epoch; a diverged trial truncates
    at the divergence epoch.  Accuracies are percentages in [0, 100].
    """

    seed: int
    activation: str
    optimizer: str
    lr: float
    weight_decay: float
    gamma: float
    train_acc: tuple[float, ...]
    train_loss: tuple[float, ...]
    valid_acc: tuple[float, ...]
    valid_loss: tuple[float, ...]
    test_acc: float
    best_valid_acc: float
    best_epoch: Optional[int]
    diverged: bool
    divergence_epoch: Optional[int]
    wall_time: float


def conc_metric(result: TrialResult) -> float:
    """Convergence figure used in summary tables: validation accuracy at
    the final recorded epoch (0.0 when a trial diverged before its first
    evaluation).  This definition travels with the outputs in metadata.
    """
    return result.valid_acc[-1] if result.valid_acc else 0.0


@dataclass(frozen=True)
class TrialSummary:
    """Per (activation x optimizer) aggregate across seeds."""

    activation: str
    optimizer: str
    mean_test_acc: float
    std_test_acc: float
    mean_conc: float
    divergence_count: int
    n_trials: int

    def cell(self) -> str:
        return format_cell(self.mean_test_acc, self.std_test_acc)


def format_cell(mean: float, std: float) -> str:
    """Summary-table cell, two decimals each side: ``93.20±0.41``."""
    return f"{mean:.2f}±{std:.2f}"


def _evaluate(model: Model, ds: Dataset, batch: int = _EVAL_BATCH) -> tuple[float, float]:
    """(accuracy percent, mean loss) over a dataset, fixed batching."""
    correct = 0
    loss_sum = 0.0
    for xb, yb in data_mod.batch_iter(ds, batch, shuffle=False):
        logits, _ = forward(model, xb, record=False)
        loss, _ = softmax_cross_entropy(logits, yb)
        loss_sum += loss * len(yb)
        correct += int(np.sum(np.argmax(logits.data, axis=1) == yb))
    return 100.0 * correct / len(ds), loss_sum / len(ds)


def train_model(cfg: TrainConfig) -> tuple[Model, TrialResult]:
    """Run one trial and return both the trained model and its record."""
    t0 = time.perf_counter()
    train, valid, test = materialize_datasets(cfg.dataset)
    model = build_model(cfg.layers, cfg.seed)
    state = OptimizerState(cfg.optimizer)

    train_acc: list[float] = []
    train_loss: list[float] = []
    valid_acc: list[float] = []
    valid_loss: list[float] = []
    diverged = False
    divergence_epoch: Optional[int] = None

    for epoch in range(cfg.epochs):
        lr_now = lr_at_epoch(cfg.schedule, epoch)
        try:
            for xb, yb in data_mod.batch_iter(
                train, cfg.batch, shuffle=True, seed=cfg.seed, epoch=epoch
            ):
                logits, tape = forward(model, xb, record=True)
                _, loss_grad = softmax_cross_entropy(logits, yb)
                grads = backward(tape, loss_grad)
                step(state, model.params, grads, lr_now)
            ta, tl = _evaluate(model, train)
            va, vl = _evaluate(model, valid)
        except DivergenceError:
            diverged = True
            divergence_epoch = epoch
            break
        train_acc.append(ta)
        train_loss.append(tl)
        valid_acc.append(va)
        valid_loss.append(vl)

    if valid_acc:
        best_epoch = int(np.argmax(valid_acc))
        best_valid = valid_acc[best_epoch]
    else:
        best_epoch = None
        best_valid = 0.0

    try:
        test_acc, _ = _evaluate(model, test)
    except DivergenceError:
        test_acc = 0.0
        if not diverged:
            diverged, divergence_epoch = True, cfg.epochs - 1

    result = TrialResult(
        seed=cfg.seed,
        activation=cfg.activation.spec_string(),
        optimizer=cfg.optimizer.kind,
        lr=cfg.optimizer.lr,
        weight_decay=cfg.optimizer.weight_decay,
        gamma=cfg.schedule.gamma,
        train_acc=tuple(train_acc),
        train_loss=tuple(train_loss),
        valid_acc=tuple(valid_acc),
        valid_loss=tuple(valid_loss),
        test_acc=test_acc,
        best_valid_acc=best_valid,
        best_epoch=best_epoch,
        diverged=diverged,
        divergence_epoch=divergence_epoch,
        wall_time=time.perf_counter() - t0,
    )
    return model, result


def run_trial(cfg: TrainConfig) -> TrialResult:
    """Train once; divergence yields a flagged result, not an exception."""
    return train_model(cfg)[1]


def _run_trials(configs: list[TrainConfig], jobs: int) -> list[TrialResult]:
    if jobs <= 1 or len(configs) <= 1:
        return [run_trial(c) for c in configs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_trial, configs))


def replicate(
    cfg: TrainConfig, seeds: list[int], jobs: int = 1
) -> tuple[TrialSummary, list[TrialResult]]:
    """Run one trial per seed and aggregate.

    Diverged trials enter the statistics like any other: instability is
    part of the measurement.  Sample standard deviation uses the n-1
    denominator (0.0 when n = 1).
    """
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    if not seeds:
        raise ConfigError("need at least one seed")
    trials = _run_trials([replace(cfg, seed=s) for s in seeds], jobs)
    accs = np.array([t.test_acc for t in trials])
    summary = TrialSummary(
        activation=cfg.activation.spec_string(),
        optimizer=cfg.optimizer.kind,
        mean_test_acc=float(np.mean(accs)),
        std_test_acc=float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0,
        mean_conc=float(np.mean([conc_metric(t) for t in trials])),
        divergence_count=sum(t.diverged for t in trials),
        n_trials=len(trials),
    )
    return summary, trials


@dataclass(frozen=True)
class GridSpec:
    """Cartesian hyperparameter grid over a fixed base configuration."""

    base: TrainConfig
    lr: tuple[float, ...]
    weight_decay: tuple[float, ...]
    gamma: tuple[float, ...]

    def __post_init__(self) -> None:
        if not (self.lr and self.weight_decay and self.gamma):
            raise ConfigError("grid lists must be non-empty")

    def size(self) -> int:
        return len(self.lr) * len(self.weight_decay) * len(self.gamma)

    def configs(self) -> list[TrainConfig]:
        out = []
        for lr in self.lr:
            for wd in self.weight_decay:
                for gamma in self.gamma:
                    out.append(
                        replace(
                            self.base,
                            optimizer=replace(
                                self.base.optimizer, lr=lr, weight_decay=wd
                            ),
                            schedule=replace(
                                self.base.schedule, initial_lr=lr, gamma=gamma
                            ),
                        )
                    )
        return out


@dataclass(frozen=True)
class GridCell:
    config: TrainConfig
    mean_best_valid: float
    summary: TrialSummary
    trials: tuple[TrialResult, ...]


def grid_search(
    grid: GridSpec, seeds: list[int], jobs: int = 1
) -> tuple[TrainConfig, list[GridCell]]:
    """Evaluate the full grid; select by mean best-validation accuracy.

    Ties break toward the lower (lr, weight_decay, gamma) triple so the
    selection is deterministic.
    """
    cells = []
    for cfg in grid.configs():
        summary, trials = replicate(cfg, seeds, jobs=jobs)
        mean_best_valid = float(np.mean([t.best_valid_acc for t in trials]))
        cells.append(
            GridCell(
                config=cfg,
                mean_best_valid=mean_best_valid,
                summary=summary,
                trials=tuple(trials),
            )
        )
    best = min(
        cells,
        key=lambda c: (
            -c.mean_best_valid,
            c.config.optimizer.lr,
            c.config.optimizer.weight_decay,
            c.config.schedule.gamma,
        ),
    )
    return best.config, cells


# --- loss-landscape slice ------------------------------------------------------


@dataclass(frozen=True)
class LandscapeSurface:
    alphas: np.ndarray
    betas: np.ndarray
    losses: np.ndarray  # losses[i, j] at (alphas[i], betas[j])


def _filter_normalized(direction: np.ndarray, param: np.ndarray) -> np.ndarray:
    """Rescale each filter of the direction to its model filter's norm.

    Filters are output channels for conv weights (4-d), per-output-unit
    columns for dense weights (2-d), and the whole vector for biases.
    Zero-norm model filters keep the raw direction (so a probe around an
    all-zero parameter still explores).
    """
    if param.ndim == 4:
        axes = (1, 2, 3)
    elif param.ndim == 2:
        axes = (0,)
    else:
        axes = tuple(range(param.ndim))
    wnorm = np.sqrt(np.sum(param**2, axis=axes, keepdims=True))
    dnorm = np.sqrt(np.sum(direction**2, axis=axes, keepdims=True))
    scale = np.where(wnorm > 0.0, wnorm / np.maximum(dnorm, 1e-300), 1.0)
    return direction * scale


def draw_directions(
    model: Model, seed: int
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Two seeded random directions in parameter space, filter-normalized."""
    out: list[list[np.ndarray]] = []
    for extra in (0, 1):
        rng = generator(seed, TAG_DIRECTIONS, extra)
        out.append(
            [
                _filter_normalized(rng.standard_normal(p.data.shape), p.data)
                for p in model.params
            ]
        )
    return out[0], out[1]


def landscape_slice(
    model: Model,
    dataset: Optional[Dataset],
    grid_n: int,
    radius: float,
    seed: int,
    loss_fn: Optional[Callable[[Model], float]] = None,
) -> LandscapeSurface:
    """Loss surface on the plane spanned by two seeded random directions.

    Evaluates loss(theta + alpha * d1 + beta * d2) on a (grid_n x grid_n)
    grid over [-radius, radius]^2.  ``grid_n`` must be odd so the exact,
    unperturbed model sits at the center cell.  A perturbed evaluation
    that diverges records ``inf`` for that cell.
    """
    if grid_n < 3 or grid_n % 2 == 0:
        raise ConfigError("grid_n must be odd and >= 3")
    if radius <= 0:
        raise ConfigError("radius must be positive")
    if loss_fn is None:
        if dataset is None:
            raise ConfigError("landscape needs a dataset or an explicit loss_fn")

        def loss_fn(m: Model) -> float:
            total = 0.0
            for xb, yb in data_mod.batch_iter(dataset, _EVAL_BATCH, shuffle=False):
                logits, _ = forward(m, xb, record=False)
                loss, _ = softmax_cross_entropy(logits, yb)
                total += loss * len(yb)
            return total / len(dataset)

    d1, d2 = draw_directions(model, seed)
    alphas = np.linspace(-radius, radius, grid_n)
    betas = np.linspace(-radius, radius, grid_n)
    theta = model.copy_param_values()
    losses = np.empty((grid_n, grid_n))
    try:
        for i, a in enumerate(alphas):
            for j, b in enumerate(betas):
                if a == 0.0 and b == 0.0:
                    model.set_param_values([t.copy() for t in theta])
                else:
                    model.set_param_values(
                        [
                            t + a * u + b * v
                            for t, u, v in zip(theta, d1, d2)
                        ]
                    )
                try:
                    losses[i, j] = loss_fn(model)
                except DivergenceError:
                    losses[i, j] = math.inf
    finally:
        model.set_param_values(theta)
    return LandscapeSurface(alphas=alphas, betas=betas, losses=losses)


# --- empirical Fisher information probe -------------------------------------------


def empirical_fisher_diag(model: Model, dataset: Dataset, n_samples: int) -> np.ndarray:
    """Diagonal of the empirical Fisher information matrix.

    Mean over the first ``n_samples`` examples of the squared
    per-parameter gradient of the true-label log-likelihood; returned as
    one flat vector in parameter order.
    """
    if not 1 <= n_samples <= len(dataset):
        raise ConfigError("n_samples must be in [1, dataset size]")
    accum = [np.zeros_like(p.data) for p in model.params]
    for i in range(n_samples):
        x = dataset.images[i : i + 1]
        y = dataset.labels[i : i + 1]
        logits, tape = forward(model, x, record=True)
        _, ce_grad = softmax_cross_entropy(logits, y)
        # d(log p)/d(logits) = -d(CE)/d(logits); squaring drops the sign
        grads = backward(tape, ce_grad)
        for buf, p in zip(accum, model.params):
            buf += grads[p] ** 2
    flat = np.concatenate([a.reshape(-1) for a in accum]) if accum else np.empty(0)
    return flat / n_samples
