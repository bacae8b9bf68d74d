"""Experiment configuration: flat key=value text with dotted prefixes.

Lines are ``section.key = value``; '#' starts a comment; unknown keys are
errors.  Every key has a default, so an empty file (or no file) is a valid
configuration.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration file or parameter set (CLI exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    dim: int = 1
    points: int = 512
    length: float = 32.0
    gamma_sigma: float = 0.5
    gamma_omega: float = 0.5
    fermion_mass: float = 1.0
    m_sigma: float = 4.0
    m_omega: float = 4.0
    preset: str = "smooth"
    field_init: str = "consistent"
    rough_sigma: float = 3.0
    seed: int = 7
    masses: tuple = (4.0, 8.0, 16.0, 32.0, 64.0)
    s: float = 3.0
    s_prime: float = 1.0
    extra_measure: tuple = ()
    t_forward: float = 2.0
    t_backward: float = 0.0
    dt: float = 1.0 / 256.0
    sample_every: int = 8
    guard_enabled: bool = True
    guard_tolerance: float = 0.05
    guard_max_halvings: int = 6
    mb_rank: int = 3
    mb_occupations: tuple = (1.0, 1.0, 1.0)

    def validate(self) -> "ExperimentConfig":
        if self.dim not in (1, 2, 3):
            raise ConfigError("grid.dim must be 1, 2 or 3")
        if self.points < 8 or (self.points & (self.points - 1)) != 0:
            raise ConfigError("grid.points must be a power of two >= 8")
        if not self.length > 0:
            raise ConfigError("grid.length must be positive")
        if self.gamma_sigma < 0 or self.gamma_omega < 0:
            raise ConfigError("coupling ratios must be nonnegative")
        if not self.fermion_mass > 0:
            raise ConfigError("couplings.fermion_mass must be positive")
        if not (self.m_sigma > 0 and self.m_omega > 0):
            raise ConfigError("field masses must be positive")
        if self.preset not in ("smooth", "rough"):
            raise ConfigError(f"unknown initial.preset {self.preset!r}")
        if self.field_init not in ("consistent", "mismatched", "preset"):
            raise ConfigError(f"unknown initial.field_init {self.field_init!r}")
        if not self.rough_sigma > 0:
            raise ConfigError("initial.rough_sigma must be positive")
        if len(self.masses) == 0:
            raise ConfigError("sweep.masses must not be empty")
        if any(m < 1.0 for m in self.masses):
            raise ConfigError("sweep masses must be >= 1")
        if any(b <= a for a, b in zip(self.masses, self.masses[1:])):
            raise ConfigError("sweep masses must be strictly increasing")
        if not self.s > 2.5:
            raise ConfigError("sobolev.s must exceed 5/2")
        if not 0 < self.s_prime <= self.s:
            raise ConfigError("sobolev.s_prime must lie in (0, s]")
        if any(not 0 < sp <= self.s for sp in self.extra_measure):
            raise ConfigError("sobolev.extra_measure entries must lie in (0, s]")
        if not self.t_forward >= 0 or not self.t_backward >= 0:
            raise ConfigError("time spans must be nonnegative")
        if self.t_forward == 0 and self.t_backward == 0:
            raise ConfigError("at least one of time.t_forward/t_backward must be positive")
        if not self.dt > 0:
            raise ConfigError("time.dt must be positive")
        for name, span in (("t_forward", self.t_forward), ("t_backward", self.t_backward)):
            steps = round(span / self.dt)
            if abs(steps * self.dt - span) > 1e-9 * max(self.dt, span):
                raise ConfigError(f"time.{name} must be an integer multiple of time.dt")
        if self.sample_every < 1:
            raise ConfigError("time.sample_every must be >= 1")
        if not 0 < self.guard_tolerance < 1:
            raise ConfigError("guard.tolerance must be in (0, 1)")
        if self.guard_max_halvings < 0:
            raise ConfigError("guard.max_halvings must be >= 0")
        if self.mb_rank < 1:
            raise ConfigError("manybody.rank must be >= 1")
        if len(self.mb_occupations) != self.mb_rank:
            raise ConfigError("manybody.occupations must list one value per orbital")
        if any(occ < 0 for occ in self.mb_occupations):
            raise ConfigError("manybody.occupations must be nonnegative")
        return self


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float_list(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(part) for part in text.split(","))


_KEYS = {
    "grid.dim": ("dim", int),
    "grid.points": ("points", int),
    "grid.length": ("length", float),
    "couplings.gamma_sigma": ("gamma_sigma", float),
    "couplings.gamma_omega": ("gamma_omega", float),
    "couplings.fermion_mass": ("fermion_mass", float),
    "fields.m_sigma": ("m_sigma", float),
    "fields.m_omega": ("m_omega", float),
    "initial.preset": ("preset", str),
    "initial.field_init": ("field_init", str),
    "initial.rough_sigma": ("rough_sigma", float),
    "initial.seed": ("seed", int),
    "sweep.masses": ("masses", _parse_float_list),
    "sobolev.s": ("s", float),
    "sobolev.s_prime": ("s_prime", float),
    "sobolev.extra_measure": ("extra_measure", _parse_float_list),
    "time.t_forward": ("t_forward", float),
    "time.t_backward": ("t_backward", float),
    "time.dt": ("dt", float),
    "time.sample_every": ("sample_every", int),
    "guard.enabled": ("guard_enabled", _parse_bool),
    "guard.tolerance": ("guard_tolerance", float),
    "guard.max_halvings": ("guard_max_halvings", int),
    "manybody.rank": ("mb_rank", int),
    "manybody.occupations": ("mb_occupations", _parse_float_list),
}

_FIELD_TO_KEY = {attr: key for key, (attr, _) in _KEYS.items()}


def parse_config_text(text: str) -> ExperimentConfig:
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, convert = _KEYS[key]
        if attr in overrides:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            overrides[attr] = convert(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return replace(ExperimentConfig(), **overrides).validate()


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig().validate()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"))


def config_text(cfg: ExperimentConfig) -> str:
    """Canonical key=value serialization (stable across runs)."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            rendered = ", ".join(repr(v) for v in value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{_FIELD_TO_KEY[f.name]} = {rendered}")
    return "\n".join(sorted(lines)) + "\n"


def config_fingerprint(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(config_text(cfg).encode("utf-8")).hexdigest()
