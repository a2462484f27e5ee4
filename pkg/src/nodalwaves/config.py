"""Experiment configuration shared by the simulation and CLI layers."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ._validation import check_seed

KINDS = ("verify", "simulate", "chaos", "scaling")
MAX_SPACING = math.pi / 3.0


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.

    Parameters
    ----------
    kind : {"verify", "simulate", "chaos", "scaling"}
    dim : {2, 3}
    radii : tuple of float
        Strictly increasing. In 3D the domain is the ball ``B_R``; in 2D the
        square ``[-R, R]^2``.
    n_waves : int
        Plane waves per field.
    grid_spacing : float
        At most ``pi / 3`` (a sixth of the wavelength).
    replicates : int
        Independent fields; at least 2 whenever a variance is reported.
    seed : int
    tolerance : float
    output : str or None
    experiment_id : str
    """

    kind: str = "simulate"
    dim: int = 3
    radii: tuple[float, ...] = (4.0,)
    n_waves: int = 256
    grid_spacing: float = 2.0 * math.pi / 12.0
    replicates: int = 32
    seed: int = 0
    tolerance: float = 1e-8
    output: str | None = None
    experiment_id: str = "run"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.dim not in (2, 3):
            raise ConfigError(f"dim must be 2 or 3, got {self.dim}")
        if not self.radii or any(r <= 0 for r in self.radii):
            raise ConfigError("radii must be a nonempty list of positive numbers")
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ConfigError("radii must be strictly increasing")
        if int(self.n_waves) != self.n_waves or self.n_waves < 1:
            raise ConfigError("n_waves must be a positive integer")
        if not 0 < self.grid_spacing <= MAX_SPACING + 1e-12:
            raise ConfigError(f"grid_spacing must lie in (0, pi/3], got {self.grid_spacing}")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ConfigError("replicates must be a positive integer")
        if self.kind in ("simulate", "chaos", "scaling") and self.replicates < 2:
            raise ConfigError("variance outputs need at least 2 replicates")
        if self.kind == "scaling" and len(self.radii) < 3:
            raise ConfigError("a scaling study needs at least 3 radii")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        try:
            check_seed(self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        out = asdict(self)
        out["radii"] = list(self.radii)
        return out

    def domain_volume(self, R: float) -> float:
        if self.dim == 3:
            return 4.0 * math.pi * R**3 / 3.0
        return (2.0 * R) ** 2
