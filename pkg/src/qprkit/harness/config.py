"""Flat key=value experiment configuration with CLI override semantics."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Optional

from ..errors import ConfigError


@dataclass
class ExperimentConfig:
    """Settings shared by every subcommand; each command reads the fields it
    needs. File values are overridden by explicit CLI flags."""

    name: str = "experiment"
    out_dir: str = "out"
    seed: int = 1234
    plot: bool = True

    # problem size
    n: int = 32
    m: Optional[int] = None  # defaults to 10 n
    k: int = 8
    quantizer_kind: str = "eq"  # eq | lmq
    saturation: str = "wide"  # wide: s_k = tau + 2 delta | narrow: tau + delta/2

    # ground truth
    truth: str = "sphere"  # sphere | sparse | two-sinusoid
    truth_sparsity: Optional[int] = None

    # solver settings
    algorithms: tuple = ("qpr-a",)  # entries may carry a quantizer: "pl-a@lmq"
    sparsity: Optional[int] = None  # thresholding level for sqpr / sqpr-a
    n_trials: int = 20
    n_iter: int = 100
    sigma_xi: float = 0.0
    early_stop: bool = True

    # crb sweep
    snr_grid: tuple = (25.0, 30.0, 35.0)
    n_ensembles: int = 5
    n_noise: int = 5

    # analysis tables
    tau_penultimate: Optional[float] = None  # defaults to the 0.9 quantile
    delta_grid: tuple = tuple(0.05 + 0.05 * i for i in range(40))
    rho_grid: tuple = (0.0, 0.3, 0.6, 0.9)
    eps: float = 0.01
    robust_k: tuple = (2, 8, 32)
    sigma_sq_grid: tuple = (0.01, 0.05, 0.1, 0.2, 0.3)
    robust_trials: int = 10_000

    def __post_init__(self):
        if self.n < 1 or self.k < 2 or self.n_trials < 1 or self.n_iter < 1:
            raise ConfigError("dimensions, levels, trials and iterations must be positive (k >= 2)")
        if self.m is not None and self.m < 1:
            raise ConfigError(f"m must be positive, got {self.m}")
        if self.quantizer_kind not in ("eq", "lmq"):
            raise ConfigError(f"quantizer kind must be eq or lmq, got {self.quantizer_kind!r}")
        if self.saturation not in ("wide", "narrow"):
            raise ConfigError(f"saturation must be wide or narrow, got {self.saturation!r}")
        if self.truth not in ("sphere", "sparse", "two-sinusoid"):
            raise ConfigError(f"unknown ground truth kind {self.truth!r}")
        if self.sigma_xi < 0.0:
            raise ConfigError(f"sigma_xi must be >= 0, got {self.sigma_xi}")

    @property
    def m_resolved(self) -> int:
        return self.m if self.m is not None else 10 * self.n


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _parse_value(raw: str, kind):
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind is tuple:
        if not raw:
            return ()
        items = [v.strip() for v in raw.split(",") if v.strip()]
        out = []
        for item in items:
            try:
                out.append(int(item))
            except ValueError:
                try:
                    out.append(float(item))
                except ValueError:
                    out.append(item)
        return tuple(out)
    return raw


def load_config_file(path) -> dict:
    """Parse ``key = value`` lines ('#' starts a comment) into typed fields."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in fields:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            f = fields[key]
            base = f.type if isinstance(f.type, type) else None
            if base is None:
                text = str(f.type)
                if "tuple" in text:
                    base = tuple
                elif "int" in text:
                    base = int
                elif "float" in text:
                    base = float
                elif "bool" in text:
                    base = bool
                else:
                    base = str
            out[key] = _parse_value(raw, base)
    return out


def build_config(file_path: Optional[str], overrides: dict) -> ExperimentConfig:
    """Config = defaults, then file values, then non-None CLI overrides."""
    values = {}
    if file_path:
        values.update(load_config_file(file_path))
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
