"""Experiment configuration: flat ``key = value`` files.

Lines hold one assignment each; ``#`` starts a comment; lists are
comma-separated.  Unknown keys are rejected so typos fail loudly.
CLI flags override file values downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .estimators import MODEL_NAMES
from .data import SplitSpec
from .params import Hyperparams

DEFAULT_GRID = tuple(round(0.1 * k, 1) for k in range(11))


@dataclass
class ExperimentConfig:
    dataset: str = "dataset"
    triples: str = ""
    embeddings: str = ""
    out_dir: str = "results"
    models: tuple[str, ...] = ("bper",)
    d: int = 20
    gamma: float = 0.01
    reg: float = 0.01
    epochs: int = 500
    mu: float = 0.5
    alpha: float = 0.5
    seed: int = 0
    train_fraction: float = 0.7
    validation_fraction: float = 0.1
    repetitions: int = 5
    mu_sweep: tuple[float, ...] = DEFAULT_GRID
    alpha_sweep: tuple[float, ...] = DEFAULT_GRID
    sparsity_ratios: tuple[float, ...] = (0.3, 0.4, 0.5, 0.6, 0.7)
    top_n: int = 10
    top_m: int = 10
    n_neighbors: int = 50
    init_scale: float = 0.1
    log_every: int = 0
    tune: bool = False
    grid_d: tuple[int, ...] = ()
    grid_gamma: tuple[float, ...] = ()
    grid_lambda: tuple[float, ...] = ()
    grid_epochs: tuple[int, ...] = ()

    def __post_init__(self):
        for m in self.models:
            if m not in MODEL_NAMES:
                raise ValueError(f"unknown model {m!r}; expected one of {MODEL_NAMES}")
        for v in self.mu_sweep:
            if not 0.0 <= v <= 1.0:
                raise ValueError("mu_sweep values must be in [0, 1]")
        for v in self.alpha_sweep:
            if v < 0.0:
                raise ValueError("alpha_sweep values must be >= 0")
        for v in self.sparsity_ratios:
            if not 0.0 < v <= 1.0:
                raise ValueError("sparsity_ratios must be in (0, 1]")

    def hyperparams(self, **overrides) -> Hyperparams:
        base = dict(
            d=self.d, gamma=self.gamma, reg=self.reg, epochs=self.epochs,
            mu=self.mu, alpha=self.alpha, seed=self.seed,
        )
        base.update(overrides)
        return Hyperparams(**base)

    def split_spec(self) -> SplitSpec:
        return SplitSpec(
            train_fraction=self.train_fraction,
            validation_fraction=self.validation_fraction,
            repetitions=self.repetitions,
            seed=self.seed,
        )


# Config-file key for each field; "lambda" is friendlier than "reg" in files.
_KEY_OF_FIELD = {"reg": "lambda"}
_FIELD_OF_KEY = {v: k for k, v in _KEY_OF_FIELD.items()}


def _parse_value(f, text: str):
    # Field annotations arrive as strings under `from __future__ import
    # annotations`, so dispatch on the default value's type instead.
    text = text.strip()
    default = f.default
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"{f.name}: expected a boolean, got {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        if not text:
            return ()
        items = [t.strip() for t in text.split(",")]
        elem = type(default[0]) if default else None
        if f.name in ("grid_d", "grid_epochs"):
            return tuple(int(t) for t in items)
        if f.name == "models":
            return tuple(items)
        if elem is str:
            return tuple(items)
        return tuple(float(t) for t in items)
    return text


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    by_name = {f.name: f for f in fields(ExperimentConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        name = _FIELD_OF_KEY.get(key, key)
        f = by_name.get(name)
        if f is None:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values[name] = _parse_value(f, value)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(config: ExperimentConfig) -> str:
    lines = []
    for f in fields(ExperimentConfig):
        key = _KEY_OF_FIELD.get(f.name, f.name)
        lines.append(f"{key} = {_format_value(getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(serialize_config(config), encoding="utf-8")
