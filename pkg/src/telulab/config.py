"""Run-configuration files: parsing, strict validation, overrides.

Configs are JSON.  Every key is checked against the documented schema and
unknown keys are errors, so typos fail loudly with their field path.
Overrides use dotted paths (``optimizer.lr=0.05``); values parse as JSON
literals with a bare-string fallback.

Schema (see README for the full reference):

    model.layers[]        dense{in,out} | conv2d{in_ch,out_ch,k} |
                          maxpool2 | flatten | activation[{kind}]
    activation            "telu" | "relu" | ... | "elu:2.0"
    optimizer             kind, lr, weight_decay, momentum, betas, eps, rms_alpha
    schedule              gamma, milestones[]
    epochs, batch         positive integers
    dataset               name, path, blobs{n,classes,dim,spread,seed},
                          split{train,valid,test,seed}
    seeds[]               trial seeds (replicate/grid)
    grid                  lr[], weight_decay[], gamma[]  (grid command)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .autograd import Activation, Conv2d, Dense, Flatten, LayerSpec, MaxPool2
from .data import SplitSpec
from .errors import ConfigError, DomainError
from .harness import BlobsSpec, DatasetSpec, GridSpec, TrainConfig
from .kernels import ActivationKind, parse_kind
from .optim import LrSchedule, OptimizerConfig

__all__ = ["RunSpec", "load_run_spec", "parse_overrides", "run_spec_to_dict"]


@dataclass(frozen=True)
class RunSpec:
    """A parsed config file: the base training run, seeds, optional grid."""

    train: TrainConfig
    seeds: tuple[int, ...]
    grid: Optional[GridSpec]


def _check_keys(d: dict, allowed: set[str], path: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")


def _req(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}: required")
    return d[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _parse_layer(entry, idx: int, default_kind: ActivationKind) -> LayerSpec:
    path = f"model.layers[{idx}]"
    if not isinstance(entry, dict) or "type" not in entry:
        raise ConfigError(f"{path}: expected an object with a 'type' key")
    kind = entry["type"]
    if kind == "dense":
        _check_keys(entry, {"type", "in", "out"}, path)
        return Dense(
            _integer(_req(entry, "in", path), f"{path}.in"),
            _integer(_req(entry, "out", path), f"{path}.out"),
        )
    if kind == "conv2d":
        _check_keys(entry, {"type", "in_ch", "out_ch", "k"}, path)
        return Conv2d(
            _integer(_req(entry, "in_ch", path), f"{path}.in_ch"),
            _integer(_req(entry, "out_ch", path), f"{path}.out_ch"),
            _integer(_req(entry, "k", path), f"{path}.k"),
        )
    if kind == "maxpool2":
        _check_keys(entry, {"type"}, path)
        return MaxPool2()
    if kind == "flatten":
        _check_keys(entry, {"type"}, path)
        return Flatten()
    if kind == "activation":
        _check_keys(entry, {"type", "kind"}, path)
        if "kind" in entry:
            return Activation(_parse_activation(entry["kind"], f"{path}.kind"))
        return Activation(default_kind)
    raise ConfigError(f"{path}.type: unknown layer type {kind!r}")


def _parse_activation(value, path: str) -> ActivationKind:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected an activation name string")
    try:
        return parse_kind(value)
    except DomainError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_optimizer(d, path: str = "optimizer") -> OptimizerConfig:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    _check_keys(
        d, {"kind", "lr", "weight_decay", "momentum", "betas", "eps", "rms_alpha"}, path
    )
    kwargs = {
        "kind": _req(d, "kind", path),
        "lr": _number(_req(d, "lr", path), f"{path}.lr"),
    }
    if "weight_decay" in d:
        kwargs["weight_decay"] = _number(d["weight_decay"], f"{path}.weight_decay")
    if "momentum" in d:
        kwargs["momentum"] = _number(d["momentum"], f"{path}.momentum")
    if "betas" in d:
        betas = d["betas"]
        if not (isinstance(betas, list) and len(betas) == 2):
            raise ConfigError(f"{path}.betas: expected a two-element list")
        kwargs["betas"] = (
            _number(betas[0], f"{path}.betas[0]"),
            _number(betas[1], f"{path}.betas[1]"),
        )
    if "eps" in d:
        kwargs["eps"] = _number(d["eps"], f"{path}.eps")
    if "rms_alpha" in d:
        kwargs["rms_alpha"] = _number(d["rms_alpha"], f"{path}.rms_alpha")
    return OptimizerConfig(**kwargs)


def _parse_schedule(d, initial_lr: float, path: str = "schedule") -> LrSchedule:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    _check_keys(d, {"gamma", "milestones"}, path)
    milestones = d.get("milestones", [])
    if not isinstance(milestones, list):
        raise ConfigError(f"{path}.milestones: expected a list")
    return LrSchedule(
        initial_lr=initial_lr,
        gamma=_number(_req(d, "gamma", path), f"{path}.gamma"),
        milestones=tuple(
            _integer(m, f"{path}.milestones[{i}]") for i, m in enumerate(milestones)
        ),
    )


def _parse_dataset(d, path: str = "dataset") -> DatasetSpec:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    _check_keys(d, {"name", "path", "blobs", "split", "standardize"}, path)
    standardize = d.get("standardize", False)
    if not isinstance(standardize, bool):
        raise ConfigError(f"{path}.standardize: expected true/false")
    name = _req(d, "name", path)
    split_d = _req(d, "split", path)
    if not isinstance(split_d, dict):
        raise ConfigError(f"{path}.split: expected an object")
    _check_keys(split_d, {"train", "valid", "test", "seed"}, f"{path}.split")
    split = SplitSpec(
        train=_integer(_req(split_d, "train", f"{path}.split"), f"{path}.split.train"),
        valid=_integer(_req(split_d, "valid", f"{path}.split"), f"{path}.split.valid"),
        seed=_integer(_req(split_d, "seed", f"{path}.split"), f"{path}.split.seed"),
        test=_integer(split_d.get("test", 0), f"{path}.split.test"),
    )
    blobs = None
    if "blobs" in d and d["blobs"] is not None:
        b = d["blobs"]
        if not isinstance(b, dict):
            raise ConfigError(f"{path}.blobs: expected an object")
        _check_keys(b, {"n", "classes", "dim", "spread", "seed"}, f"{path}.blobs")
        blobs = BlobsSpec(
            n=_integer(_req(b, "n", f"{path}.blobs"), f"{path}.blobs.n"),
            classes=_integer(
                _req(b, "classes", f"{path}.blobs"), f"{path}.blobs.classes"
            ),
            dim=_integer(_req(b, "dim", f"{path}.blobs"), f"{path}.blobs.dim"),
            spread=_number(b.get("spread", 0.1), f"{path}.blobs.spread"),
            seed=_integer(b.get("seed", 0), f"{path}.blobs.seed"),
        )
    return DatasetSpec(
        name=name,
        split=split,
        path=d.get("path"),
        blobs=blobs,
        standardize=standardize,
    )


def build_run_spec(raw: dict) -> RunSpec:
    """Validate a parsed config dict and build the run description."""
    if not isinstance(raw, dict):
        raise ConfigError("config root: expected an object")
    _check_keys(
        raw,
        {
            "model",
            "activation",
            "optimizer",
            "schedule",
            "epochs",
            "batch",
            "dataset",
            "seeds",
            "grid",
        },
        "config",
    )
    activation = _parse_activation(_req(raw, "activation", "config"), "activation")
    model_d = _req(raw, "model", "config")
    if not isinstance(model_d, dict):
        raise ConfigError("model: expected an object")
    _check_keys(model_d, {"layers"}, "model")
    layers_raw = _req(model_d, "layers", "model")
    if not isinstance(layers_raw, list) or not layers_raw:
        raise ConfigError("model.layers: expected a non-empty list")
    layers = tuple(
        _parse_layer(entry, i, activation) for i, entry in enumerate(layers_raw)
    )

    optimizer = _parse_optimizer(_req(raw, "optimizer", "config"))
    schedule = _parse_schedule(_req(raw, "schedule", "config"), optimizer.lr)
    dataset = _parse_dataset(_req(raw, "dataset", "config"))
    train = TrainConfig(
        layers=layers,
        activation=activation,
        optimizer=optimizer,
        schedule=schedule,
        epochs=_integer(_req(raw, "epochs", "config"), "epochs"),
        batch=_integer(_req(raw, "batch", "config"), "batch"),
        dataset=dataset,
    )

    seeds_raw = raw.get("seeds", [0])
    if not isinstance(seeds_raw, list) or not seeds_raw:
        raise ConfigError("seeds: expected a non-empty list")
    seeds = tuple(_integer(s, f"seeds[{i}]") for i, s in enumerate(seeds_raw))

    grid = None
    if "grid" in raw and raw["grid"] is not None:
        g = raw["grid"]
        if not isinstance(g, dict):
            raise ConfigError("grid: expected an object")
        _check_keys(g, {"lr", "weight_decay", "gamma"}, "grid")

        def axis(key: str, default: float) -> tuple[float, ...]:
            if key not in g:
                return (default,)
            if not isinstance(g[key], list) or not g[key]:
                raise ConfigError(f"grid.{key}: expected a non-empty list")
            return tuple(_number(v, f"grid.{key}[{i}]") for i, v in enumerate(g[key]))

        grid = GridSpec(
            base=train,
            lr=axis("lr", optimizer.lr),
            weight_decay=axis("weight_decay", optimizer.weight_decay),
            gamma=axis("gamma", schedule.gamma),
        )
    return RunSpec(train=train, seeds=seeds, grid=grid)


def load_run_spec(
    path: Union[str, Path], overrides: Optional[list[str]] = None
) -> RunSpec:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    for assignment in overrides or []:
        raw = _apply_override(raw, assignment)
    return build_run_spec(raw)


def parse_overrides(pairs: Optional[list[str]]) -> list[str]:
    for p in pairs or []:
        if "=" not in p:
            raise ConfigError(f"override {p!r} must look like key.path=value")
    return list(pairs or [])


def _apply_override(raw: dict, assignment: str) -> dict:
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} must look like key.path=value")
    dotted, text = assignment.split("=", 1)
    keys = [k for k in dotted.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override {assignment!r} has an empty key path")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    node = raw
    for k in keys[:-1]:
        nxt = node.get(k)
        if not isinstance(nxt, dict):
            nxt = {}
            node[k] = nxt
        node = nxt
    node[keys[-1]] = value
    return raw


# --- config echo for metadata -----------------------------------------------


def _layer_to_dict(layer: LayerSpec) -> dict:
    if isinstance(layer, Dense):
        return {"type": "dense", "in": layer.in_dim, "out": layer.out_dim}
    if isinstance(layer, Conv2d):
        return {
            "type": "conv2d",
            "in_ch": layer.in_ch,
            "out_ch": layer.out_ch,
            "k": layer.k,
        }
    if isinstance(layer, MaxPool2):
        return {"type": "maxpool2"}
    if isinstance(layer, Flatten):
        return {"type": "flatten"}
    return {"type": "activation", "kind": layer.kind.spec_string()}


def run_spec_to_dict(spec: RunSpec) -> dict:
    """Fully resolved config (defaults filled in) for run metadata."""
    t = spec.train
    out = {
        "model": {"layers": [_layer_to_dict(l) for l in t.layers]},
        "activation": t.activation.spec_string(),
        "optimizer": {
            "kind": t.optimizer.kind,
            "lr": t.optimizer.lr,
            "weight_decay": t.optimizer.weight_decay,
            "momentum": t.optimizer.momentum,
            "betas": list(t.optimizer.betas),
            "eps": t.optimizer.eps,
            "rms_alpha": t.optimizer.rms_alpha,
        },
        "schedule": {
            "gamma": t.schedule.gamma,
            "milestones": list(t.schedule.milestones),
        },
        "epochs": t.epochs,
        "batch": t.batch,
        "dataset": {
            "name": t.dataset.name,
            "path": t.dataset.path,
            "blobs": None
            if t.dataset.blobs is None
            else {
                "n": t.dataset.blobs.n,
                "classes": t.dataset.blobs.classes,
                "dim": t.dataset.blobs.dim,
                "spread": t.dataset.blobs.spread,
                "seed": t.dataset.blobs.seed,
            },
            "split": {
                "train": t.dataset.split.train,
                "valid": t.dataset.split.valid,
                "test": t.dataset.split.test,
                "seed": t.dataset.split.seed,
            },
            "standardize": t.dataset.standardize,
        },
        "seeds": list(spec.seeds),
    }
    if spec.grid is not None:
        out["grid"] = {
            "lr": list(spec.grid.lr),
            "weight_decay": list(spec.grid.weight_decay),
            "gamma": list(spec.grid.gamma),
        }
    return out
