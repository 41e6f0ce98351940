"""
Experiment configuration
Flat YAML experiment documents mirroring the CLI flags
"""

import copy
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import List, Optional, Union

import yaml

from src.codes import CodeParams
from src.exceptions import InvalidParameterError
from src.tools.cost_model import BaseStationOnly, Mbr, Msr, Replication, Scheme, SimpleCaching, SystemParams

SCHEME_NAMES = ("simple-caching", "mbr", "msr", "replication", "base-station-only")

_FLOAT_KEYS = {"N", "lam", "omega", "p", "R", "horizon", "p_from", "p_to"}
_INT_KEYS = {"n", "k", "d", "seed", "events", "batch_count", "points"}
_LIST_KEYS = {"R_grid", "N_grid"}
# YAML keys that differ from the attribute name
_KEY_ALIASES = {"lambda": "lam"}


@dataclass
class ExperimentConfig:
    """
    One experiment as a flat key/value document

    Keys mirror the CLI flags (lambda for the departure rate); unset
    values are null.
    """

    N: float = 1000.0
    lam: float = 1.0
    omega: Optional[float] = None
    p: Optional[float] = None
    R: float = 20.0
    scheme: str = "mbr"
    n: int = 30
    k: int = 7
    d: int = 10
    seed: int = 0
    events: Optional[int] = None
    horizon: Optional[float] = None
    batch_count: int = 10
    repair_from: str = "n+2"
    coupling: str = "deterministic"
    start: str = "warm"
    p_from: float = 1e-4
    p_to: float = 10.0
    points: int = 200
    by_k: bool = False
    R_grid: List[float] = field(default_factory=lambda: [20.0, 60.0, 100.0, 140.0, 180.0])
    N_grid: List[float] = field(default_factory=lambda: [100.0, 1000.0, 10000.0])
    format: str = "csv"
    out: Optional[str] = None

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        """Build from a flat mapping; unknown keys are rejected"""
        known = {f.name for f in fields(cls)}
        values = {}
        for key, value in (mapping or {}).items():
            name = _KEY_ALIASES.get(key, key)
            if name not in known or key in _KEY_ALIASES.values():
                raise InvalidParameterError(f"unknown experiment key {key!r}")
            values[name] = _coerce(name, value)
        return cls(**values)

    def to_mapping(self) -> dict:
        reverse = {v: k for k, v in _KEY_ALIASES.items()}
        return {reverse.get(f.name, f.name): copy.copy(getattr(self, f.name)) for f in fields(self)}

    def system_params(self) -> SystemParams:
        """SystemParams from either p (omega = p*lambda) or omega"""
        if self.p is not None and self.omega is not None:
            raise InvalidParameterError("give either p or omega, not both")
        if self.p is not None:
            return SystemParams.from_popularity(N=self.N, p=self.p, R=self.R, lam=self.lam)
        if self.omega is not None:
            return SystemParams(N=self.N, lam=self.lam, omega=self.omega, R=self.R)
        raise InvalidParameterError("one of p or omega is required")

    def scheme_object(self, name: Optional[str] = None) -> Scheme:
        name = name or self.scheme
        if name == "simple-caching":
            return SimpleCaching()
        if name == "base-station-only":
            return BaseStationOnly()
        if name == "replication":
            return Replication(self.n)
        if name == "mbr":
            return Mbr(CodeParams(n=self.n, k=self.k, d=self.d))
        if name == "msr":
            return Msr(CodeParams(n=self.n, k=self.k, d=self.d))
        raise InvalidParameterError(f"scheme must be one of {', '.join(SCHEME_NAMES)}, got {name!r}")


def _coerce(name: str, value):
    if value is None:
        return None
    try:
        if name in _FLOAT_KEYS:
            return float(value)
        if name in _INT_KEYS:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if name in _LIST_KEYS:
            return [float(v) for v in value]
        if name == "by_k":
            if not isinstance(value, bool):
                raise ValueError(value)
            return value
    except (TypeError, ValueError):
        raise InvalidParameterError(f"invalid value for {name}: {value!r}") from None
    return str(value)


def load_experiment(path: Union[str, Path], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """
    Load a flat YAML experiment config

    Args:
        path: Path to the YAML document
        base: Values for the keys the document leaves out (dataclass defaults otherwise)

    Returns:
        ExperimentConfig
    """
    with open(path, "r", encoding="utf-8") as f:
        mapping = yaml.safe_load(f) or {}
    if not isinstance(mapping, dict):
        raise InvalidParameterError(f"{path} must hold a flat key/value mapping")
    if base is not None:
        mapping = {**base.to_mapping(), **mapping}
    return ExperimentConfig.from_mapping(mapping)


def dump_experiment(config: ExperimentConfig, path: Union[str, Path]):
    """Write an ExperimentConfig so that load_experiment reads it back unchanged"""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        yaml.safe_dump(config.to_mapping(), f, sort_keys=False, allow_unicode=True)
