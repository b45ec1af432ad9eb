"""Experiment configuration: TOML schema, validation, target construction.

One human-editable TOML file per run. Required tables:

    [experiment]  kind, output_dir, seeds
    [target]      kind = "polynomial" (expression = ...) or
                  kind = "activation-sum" (activations = [...])
                  teacher = "canonical" | "random"
    [train]       d, p, n (or n_expr like "16*d^2"), T, eta_rule, ...
    [sweep]       optional axes (d = [...], n_over_d = [...], p = [...])
    [options]     per-kind extras

See configs/ for one worked example per experiment kind.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from ..hermite import Activation
from ..polynomial import parse_polynomial
from ..targets import MultiIndexTarget, make_teacher

EXPERIMENT_KINDS = (
    "single-step",
    "multi-step",
    "staircase",
    "scaling",
    "generalization-sweep",
    "cget",
    "preprocessing",
    "second-step-orientation",
)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; message carries the offending field."""


@dataclass
class ExperimentConfig:
    kind: str
    output_dir: Path
    seeds: list[int]
    target: dict
    train: dict
    sweep: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    raw_text: str = ""

    def as_dict(self) -> dict:
        return {
            "experiment": {"kind": self.kind, "output_dir": str(self.output_dir),
                           "seeds": self.seeds},
            "target": self.target,
            "train": self.train,
            "sweep": self.sweep,
            "options": self.options,
        }


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing field '{where}.{key}'")
    return table[key]


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    return parse_config(text, base_dir=path.parent)


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc
    exp = _require(data, "experiment", "<root>")
    kind = _require(exp, "kind", "experiment")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"experiment.kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    seeds = _require(exp, "seeds", "experiment")
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("experiment.seeds must be a nonempty list of integers")
    out_dir = Path(_require(exp, "output_dir", "experiment"))
    if base_dir is not None and not out_dir.is_absolute():
        out_dir = base_dir / out_dir
    target = data.get("target", {})
    if kind != "staircase" or target:
        _validate_target_table(target)
    train = data.get("train", {})
    cfg = ExperimentConfig(kind=kind, output_dir=out_dir, seeds=list(seeds),
                           target=target, train=train,
                           sweep=data.get("sweep", {}), options=data.get("options", {}),
                           raw_text=text)
    # fail fast: target must build at some representative dimension
    if target:
        d_probe = _first_dimension(cfg)
        build_target(target, d_probe)
    return cfg


def _first_dimension(cfg: ExperimentConfig) -> int:
    if "d" in cfg.sweep:
        return int(cfg.sweep["d"][0])
    if "d" in cfg.train:
        return int(cfg.train["d"])
    raise ConfigError("missing field 'train.d' (or sweep.d)")


def _validate_target_table(table: dict):
    kind = _require(table, "kind", "target")
    if kind == "polynomial":
        _require(table, "expression", "target")
    elif kind == "activation-sum":
        acts = _require(table, "activations", "target")
        if not isinstance(acts, list) or not acts:
            raise ConfigError("target.activations must be a nonempty list of names")
    else:
        raise ConfigError("target.kind must be 'polynomial' or 'activation-sum'")
    teacher = table.get("teacher", "canonical")
    if teacher not in ("canonical", "random"):
        raise ConfigError("target.teacher must be 'canonical' or 'random'")


def build_target(table: dict, d: int, seed_override=None) -> MultiIndexTarget:
    """Materialize the [target] table at ambient dimension d."""
    kind = table["kind"]
    if kind == "polynomial":
        link = parse_polynomial(table["expression"])
        r = link.num_vars
    else:
        link = [Activation.from_name(name) for name in table["activations"]]
        r = len(link)
    teacher_kind = table.get("teacher", "canonical")
    seed = seed_override if seed_override is not None else table.get("teacher_seed", 0)
    teacher = make_teacher(r, d, seed=None if teacher_kind == "canonical" else seed)
    return MultiIndexTarget(teacher, link)


_COUNT_RE = re.compile(r"^\s*(?P<coeff>\d+(\.\d+)?)\s*\*\s*d(\s*\^\s*(?P<power>\d+))?\s*$")


def resolve_count(value, d: int, where: str) -> int:
    """Sample counts: a literal int or a 'coeff*d^power' expression."""
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        match = _COUNT_RE.match(value)
        if match:
            coeff = float(match.group("coeff"))
            power = int(match.group("power") or 1)
            return int(round(coeff * d ** power))
    raise ConfigError(f"{where}: expected an integer or 'c*d^k' expression, got {value!r}")
