"""JSON experiment configuration for the command-line front end.

A minimal simulation config only needs the stream shape::

    {"family": "gaussian", "p": 10, "s": 3,
     "batch_size": 50, "num_batches": 2}

Every other key has a default, listed in :data:`DEFAULTS`.  Nested sections
``design``, ``truth``, ``adiht`` and ``renewable`` take the keyword arguments of
:class:`DesignSpec`, :class:`TruthSpec`, :class:`IhtConfig` and
:class:`RenewableConfig`.  A relative ``output_dir`` is resolved against the
directory holding the config file.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .engine import IhtConfig
from .errors import ConfigError, DomainError
from .glm import Family, GlmFamily
from .renewable import RenewableConfig
from .simdata import DesignSpec, StreamSpec, TruthSpec

__all__ = ["ExperimentConfig", "DEFAULTS", "METHODS", "load_config", "parse_config"]

METHODS = ("adiht", "renewable")

DEFAULTS: dict[str, Any] = {
    "family": "gaussian",
    "dispersion": 1.0,
    "p": None,
    "s": None,
    "batch_size": 100,
    "num_batches": None,
    "seeds": [0],
    "method": "adiht",
    "output_dir": "results",
    "emit_svg": True,
    "compute_oracle": False,
    "diagnostics": True,
    "record_timing": False,
    "checkpoint_at": [],
    "design": {},
    "truth": {},
    "adiht": {},
    "renewable": {},
}

_SECTIONS = {
    "design": {"covariance", "rho", "matrix", "entry_law"},
    "truth": {"support_rule", "magnitude_rule", "value", "low", "high"},
    "adiht": {f.name for f in dataclasses.fields(IhtConfig)},
    "renewable": {f.name for f in dataclasses.fields(RenewableConfig)},
}


@dataclass
class ExperimentConfig:
    family: GlmFamily
    methods: tuple
    seeds: tuple
    output_dir: Path
    iht: IhtConfig
    renewable: RenewableConfig
    p: Optional[int] = None
    s: Optional[int] = None
    batch_size: Any = 100
    num_batches: Optional[int] = None
    design: dict = field(default_factory=dict)
    truth: dict = field(default_factory=dict)
    emit_svg: bool = True
    compute_oracle: bool = False
    diagnostics: bool = True
    record_timing: bool = False
    checkpoint_at: tuple = ()

    def require_stream(self) -> None:
        for key in ("p", "s", "num_batches"):
            if getattr(self, key) is None and not (key == "num_batches" and isinstance(self.batch_size, list)):
                raise ConfigError(f"missing required key '{key}' for a simulated stream")

    def stream_spec(self, seed: int) -> StreamSpec:
        self.require_stream()
        try:
            design = DesignSpec(self.p, **self.design)
        except (DomainError, TypeError, ValueError) as exc:
            raise ConfigError(f"design: {exc}") from None
        try:
            truth = TruthSpec(self.p, self.s, **self.truth)
        except (DomainError, TypeError, ValueError) as exc:
            raise ConfigError(f"truth: {exc}") from None
        try:
            return StreamSpec(design, truth, self.family, self.batch_size, self.num_batches, seed)
        except DomainError as exc:
            raise ConfigError(f"stream: {exc}") from None


def _int(raw, key, minimum=None):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)) or not float(raw).is_integer():
        raise ConfigError(f"key '{key}' must be an integer, got {raw!r}")
    value = int(raw)
    if minimum is not None and value < minimum:
        raise ConfigError(f"key '{key}' must be >= {minimum}, got {value}")
    return value


def _bool(raw, key):
    if not isinstance(raw, bool):
        raise ConfigError(f"key '{key}' must be true or false, got {raw!r}")
    return raw


def _section(raw, name):
    if not isinstance(raw, dict):
        raise ConfigError(f"key '{name}' must be an object")
    unknown = sorted(set(raw) - _SECTIONS[name])
    if unknown:
        raise ConfigError(f"unknown key '{name}.{unknown[0]}'")
    return dict(raw)


def parse_config(doc: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'")
    raw = {**DEFAULTS, **doc}

    try:
        family = GlmFamily(Family(raw["family"]), float(raw["dispersion"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"key 'family' or 'dispersion' is invalid: {exc}") from None

    method = raw["method"]
    if method == "both":
        methods = METHODS
    elif method in METHODS:
        methods = (method,)
    else:
        raise ConfigError(f"key 'method' must be 'adiht', 'renewable' or 'both', got {method!r}")

    seeds = raw["seeds"]
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = [seeds]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("key 'seeds' must be a nonempty list of integers")
    seeds = tuple(_int(v, "seeds", 0) for v in seeds)
    if any(v >= 2**64 for v in seeds):
        raise ConfigError("key 'seeds' entries must fit in 64 bits")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("key 'seeds' contains duplicates")

    sections = {name: _section(raw[name], name) for name in _SECTIONS}
    adiht = sections["adiht"]
    if "lambda_init" in adiht and adiht["lambda_init"] != "gradient" and not isinstance(adiht["lambda_init"], (int, float)):
        raise ConfigError(f"key 'adiht.lambda_init' must be \"gradient\" or a number")
    try:
        iht = IhtConfig(**adiht)
    except (DomainError, TypeError) as exc:
        raise ConfigError(f"adiht: {exc}") from None
    try:
        renewable = RenewableConfig(**sections["renewable"])
    except (DomainError, TypeError) as exc:
        raise ConfigError(f"renewable: {exc}") from None
    design = sections["design"]
    if design.get("matrix") is not None:
        design["matrix"] = np.asarray(design["matrix"], dtype=np.float64)

    batch_size = raw["batch_size"]
    if isinstance(batch_size, list):
        batch_size = [_int(v, "batch_size", 1) for v in batch_size]
        if not batch_size:
            raise ConfigError("key 'batch_size' schedule is empty")
    else:
        batch_size = _int(batch_size, "batch_size", 1)

    checkpoint_at = raw["checkpoint_at"]
    if isinstance(checkpoint_at, int) and not isinstance(checkpoint_at, bool):
        checkpoint_at = [checkpoint_at]
    if not isinstance(checkpoint_at, list):
        raise ConfigError("key 'checkpoint_at' must be a list of batch indices")

    output_dir = raw["output_dir"]
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("key 'output_dir' must be a nonempty string")
    out = Path(output_dir)
    if not out.is_absolute():
        out = Path(base_dir) / out

    return ExperimentConfig(
        family=family,
        methods=methods,
        seeds=seeds,
        output_dir=out,
        iht=iht,
        renewable=renewable,
        p=None if raw["p"] is None else _int(raw["p"], "p", 1),
        s=None if raw["s"] is None else _int(raw["s"], "s", 1),
        batch_size=batch_size,
        num_batches=None if raw["num_batches"] is None else _int(raw["num_batches"], "num_batches", 0),
        design=design,
        truth=sections["truth"],
        emit_svg=_bool(raw["emit_svg"], "emit_svg"),
        compute_oracle=_bool(raw["compute_oracle"], "compute_oracle"),
        diagnostics=_bool(raw["diagnostics"], "diagnostics"),
        record_timing=_bool(raw["record_timing"], "record_timing"),
        checkpoint_at=tuple(sorted({_int(v, "checkpoint_at", 0) for v in checkpoint_at})),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text, parse_constant=lambda c: math.nan)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from None
    return parse_config(doc, path.parent)
