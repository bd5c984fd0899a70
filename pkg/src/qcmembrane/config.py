"""Run configuration: defaults, TOML loading, validation."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .fields import PRESETS, parse_preset_spec

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass
class RunConfig:
    preset: str = "zero"
    params: dict = field(default_factory=dict)
    grid_n: int = 1024
    grid_l: float = 4.0
    pad: int = 2
    n_boundary: int = 1024
    mesh_h: float = 0.02
    beltrami_tol: float = 1e-8
    beltrami_max_iter: int = 200
    eigen_tol: float = 1e-8
    invert_tol: float = 1e-10
    seed: int = 42
    extension_norm: float = 2.0
    measure_extension: bool = True
    extension_samples: int = 257
    out: str = "out"
    emit_svg: bool = False
    emit_mesh: bool = False
    emit_map: bool = False

    _TOLERANCES = ("beltrami_tol", "eigen_tol", "invert_tol")

    def __post_init__(self):
        # "name(k=v, ...)" in the preset field folds into params
        if "(" in self.preset:
            name, params = parse_preset_spec(self.preset)
            self.preset = name
            self.params = {**params, **self.params}

    def validate(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        allowed = PRESETS[self.preset][1]
        for k, v in self.params.items():
            if k not in allowed:
                raise ConfigError(f"params.{k}: not a parameter of preset {self.preset!r}")
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ConfigError(f"params.{k}: expected a finite number, got {v!r}")
        for name in self._TOLERANCES + ("mesh_h", "grid_l"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ConfigError(f"{name}: must be a positive number, got {v!r}")
        for name in ("grid_n", "pad"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1 or v & (v - 1):
                raise ConfigError(f"{name}: must be a power of two, got {v!r}")
        if self.grid_n < 64:
            raise ConfigError(f"grid_n: must be at least 64, got {self.grid_n}")
        for name in ("n_boundary", "beltrami_max_iter", "extension_samples"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name}: must be a positive integer, got {v!r}")
        if self.n_boundary < 64:
            raise ConfigError(f"n_boundary: must be at least 64, got {self.n_boundary}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed: must be a non-negative integer, got {self.seed!r}")
        if not self.extension_norm >= 1:
            raise ConfigError(f"extension_norm: must be >= 1, got {self.extension_norm!r}")
        return self

    @property
    def preset_spec(self):
        args = ", ".join(f"{k}={v!r}" for k, v in sorted(self.params.items()))
        return f"{self.preset}({args})"

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["params"] = dict(sorted(self.params.items()))
        return d

    def updated(self, **changes):
        return dataclasses.replace(self, **changes)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, data, source="config"):
        known = set(cls.field_names())
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"{source}: unknown field {key!r}")
            kwargs[key] = value
        if "params" in kwargs and not isinstance(kwargs["params"], dict):
            raise ConfigError(f"{source}: field 'params' must be a table")
        # integers are accepted where floats are expected
        for f in fields(cls):
            if f.name in kwargs and f.type == "float" and isinstance(kwargs[f.name], int) and not isinstance(kwargs[f.name], bool):
                kwargs[f.name] = float(kwargs[f.name])
        return cls(**kwargs)

    @classmethod
    def from_toml(cls, path):
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_mapping(data, source=str(path)).validate()
