"""System configuration and the flat ``key = value`` scenario file format."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """Raised for invalid parameters or malformed scenario files."""


def dbm_to_watts(x):
    """Convert dBm to watts. Works elementwise on arrays."""
    return 10.0 ** ((x - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    # Defaults are the full-scale scenario: K = M = 4, 28 GHz carrier.
    num_antennas: int = 4
    num_users: int = 4
    meta_atoms: int = 49
    num_layers: int = 4
    p_max_dbm: float = 20.0
    noise_dbm: float = -96.0
    noise_dbm_per_user: tuple[float, ...] | None = None
    wavelength: float = 0.0107
    element_length: float | None = None  # default 0.5 * wavelength
    element_width: float | None = None  # default 0.5 * wavelength
    thickness: float | None = None  # default 5 * wavelength
    path_loss_exponent: float = 3.0
    gain_bs_dbi: float = 5.0
    gain_user_dbi: float = 0.0
    admm_penalty: float = 100.0
    tol_inner: float = 1e-4
    tol_outer: float = 1e-5
    tol_gm: float = 1e-5
    tol_consensus: float = 1e-4  # inner ADMM also waits for max|z - g rho| / ||z|| below this
    max_inner: int = 5000
    max_outer: int = 8000
    max_gm: int = 8000
    cluster_center: tuple[float, float, float] = (0.0, 60.0, 0.0)
    cluster_radius: float = 50.0
    seed: int = 0

    def __post_init__(self):
        for name in ("element_length", "element_width"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, 0.5 * self.wavelength)
        if self.thickness is None:
            object.__setattr__(self, "thickness", 5.0 * self.wavelength)
        if self.noise_dbm_per_user is not None:
            object.__setattr__(self, "noise_dbm_per_user", tuple(float(v) for v in self.noise_dbm_per_user))
        self.validate()

    def validate(self):
        if self.num_users != self.num_antennas:
            raise ConfigError(f"num_users ({self.num_users}) must equal num_antennas ({self.num_antennas})")
        if self.num_users < 1:
            raise ConfigError("num_users must be >= 1")
        side = math.isqrt(self.meta_atoms) if self.meta_atoms > 0 else 0
        if self.meta_atoms < 1 or side * side != self.meta_atoms:
            raise ConfigError(f"meta_atoms must be a positive perfect square, got {self.meta_atoms}")
        if self.num_layers < 1:
            raise ConfigError("num_layers must be >= 1")
        for name in ("wavelength", "element_length", "element_width", "thickness", "cluster_radius"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not self.admm_penalty > 0:
            raise ConfigError("admm_penalty must be positive")
        for name in ("tol_inner", "tol_outer", "tol_gm", "tol_consensus"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("max_inner", "max_outer", "max_gm"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.noise_dbm_per_user is not None and len(self.noise_dbm_per_user) != self.num_users:
            raise ConfigError("noise_dbm_per_user needs one entry per user")

    @property
    def side(self) -> int:
        return math.isqrt(self.meta_atoms)

    @property
    def p_max(self) -> float:
        """Power budget in watts."""
        return float(dbm_to_watts(self.p_max_dbm))

    @property
    def noise_powers(self):
        """Per-user noise power in watts, shape (K,)."""
        import numpy as np

        if self.noise_dbm_per_user is None:
            return np.full(self.num_users, dbm_to_watts(self.noise_dbm))
        return dbm_to_watts(np.asarray(self.noise_dbm_per_user, dtype=float))

    @property
    def layer_spacing(self) -> float:
        return self.thickness / (self.num_layers - 1) if self.num_layers > 1 else self.thickness

    def with_overrides(self, **kw) -> "SystemConfig":
        return replace(self, **kw)


# file key -> (field name, parser)
def _tuple3(s):
    vals = tuple(float(v) for v in s.replace(",", " ").split())
    if len(vals) != 3:
        raise ValueError("expected three numbers")
    return vals


def _float_list(s):
    return tuple(float(v) for v in s.replace(",", " ").split())


_PARSERS = {
    "int": int,
    "float": float,
    "float | None": float,
    "tuple[float, float, float]": _tuple3,
    "tuple[float, ...] | None": _float_list,
}

CONFIG_KEYS = {f.name: _PARSERS[f.type] for f in fields(SystemConfig)}


def parse_config_text(text: str, base: SystemConfig | None = None) -> SystemConfig:
    """Parse ``key = value`` lines. Unknown keys are errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    base = base or SystemConfig()
    return replace(base, **values)


def load_config(path) -> SystemConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def format_config(cfg: SystemConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if isinstance(v, tuple):
            v = " ".join(repr(float(x)) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def desk_config(**kw) -> SystemConfig:
    """Small instance used for CI runs: 4x4 atoms, two layers, three users, caps / 10.

    The ADMM penalty is lowered to 10: in noise-normalised units a penalty
    of 100 lets gamma advance only about 1/(100 K) per cycle, which the
    reduced caps cannot absorb.
    """
    base = dict(
        admm_penalty=10.0,
        num_antennas=3,
        num_users=3,
        meta_atoms=16,
        num_layers=2,
        max_inner=500,
        max_outer=800,
        max_gm=800,
    )
    base.update(kw)
    return SystemConfig(**base)
