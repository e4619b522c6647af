"""Analysis configuration: JSON config file with flag overrides (flags win)."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields

from .errors import MalformedJsonError, MissingFileError


@dataclass
class AnalysisConfig:
    model_dir: str | None = None
    solver: str = "internal"  # internal | smtlib-export
    sym_min: float = 0.0
    sym_max: float = 255.0
    max_paths: int = 1000
    max_solver_calls: int = 100000
    timeout_s: float = 120.0
    output_dir: str = "nnse-out"
    log_level: str = "WARNING"
    figures: bool = True

    def validate(self) -> None:
        if self.solver not in ("internal", "smtlib-export"):
            raise ValueError(f"unknown solver choice {self.solver!r}")
        if self.sym_min > self.sym_max:
            raise ValueError(f"sym_min {self.sym_min} > sym_max {self.sym_max}")
        if self.max_paths < 1 or self.max_solver_calls < 1 or self.timeout_s <= 0:
            raise ValueError("budget settings must be positive")

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> AnalysisConfig:
        path = os.fspath(path)
        if not os.path.isfile(path):
            raise MissingFileError(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                obj = json.load(f)
        except json.JSONDecodeError as e:
            raise MalformedJsonError(f"{path}: {e}") from e
        if not isinstance(obj, dict):
            raise MalformedJsonError(f"{path}: config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise MalformedJsonError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**obj)

    def override(self, **kwargs) -> AnalysisConfig:
        """A copy with the non-None keyword values applied."""
        out = AnalysisConfig(**{f.name: getattr(self, f.name) for f in fields(self)})
        for key, value in kwargs.items():
            if value is not None:
                setattr(out, key, value)
        return out
