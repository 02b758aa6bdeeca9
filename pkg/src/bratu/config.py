"""Run configuration and its flat ``key = value`` text format.

Lines look like ``n = 101``; ``#`` starts a comment; blank lines are
ignored. Keys use underscores and match the long CLI flags.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .continuation import ContinuationConfig
from .discretize import Grid, Scheme
from .errors import DomainError


class ConfigError(ValueError):
    """Invalid configuration file or parameter value."""


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        values[key.replace("-", "_")] = value
    return values


def load_config(path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())


def format_config(values: dict) -> str:
    lines = []
    for key, value in values.items():
        if value is None:
            continue
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _int_list(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if v.strip()]


_CONVERTERS = {
    "scheme": str,
    "n": int,
    "n_list": _int_list,
    "target_ustar": float,
    "ds": float,
    "ds_min": float,
    "ds_max": float,
    "theta": float,
    "fe_quad": int,
    "newton_tol": float,
    "newton_max_iters": int,
    "critical_bisection_tol": float,
    "form": str,
    "alpha_min": float,
    "alpha_max": float,
    "steps": int,
    "samples": int,
    "out": str,
}


@dataclass
class RunConfig:
    """Every tunable a CLI command reads; unset fields fall back to defaults."""

    scheme: str = "fd"
    n: int | None = None
    n_list: list[int] | None = None
    target_ustar: float | None = None
    ds: float = 0.05
    ds_min: float = 1e-10
    ds_max: float = 0.5
    theta: float = 0.5
    fe_quad: int = 3
    newton_tol: float = 1e-10
    newton_max_iters: int = 12
    critical_bisection_tol: float = 1e-10
    form: str = "original"
    alpha_min: float = 0.1
    alpha_max: float | None = None
    steps: int | None = None
    samples: int = 201
    out: str | None = None

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kwargs = {}
        for key, value in values.items():
            if value is None:
                continue
            try:
                kwargs[key] = _CONVERTERS[key](value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
        return cls(**kwargs)

    def to_mapping(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return format_config(self.to_mapping())

    def scheme_obj(self) -> Scheme:
        if self.scheme not in ("fd", "fe"):
            raise ConfigError(f"scheme must be fd or fe, got {self.scheme!r}")
        try:
            return Scheme(self.scheme, self.fe_quad)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def grid(self, n: int | None = None) -> Grid:
        n = self.n if n is None else n
        if n is None:
            raise ConfigError("the number of elements (--n) is required")
        try:
            return Grid(n)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def continuation(self, target_ustar: float, max_crossings: int | None = None) -> ContinuationConfig:
        ds_initial = min(max(self.ds, self.ds_min), self.ds_max)
        if self.ds != ds_initial:
            raise ConfigError("need ds_min <= ds <= ds_max")
        try:
            return ContinuationConfig(
                ds_initial=ds_initial,
                ds_min=self.ds_min,
                ds_max=self.ds_max,
                newton_tol=self.newton_tol,
                newton_max_iters=self.newton_max_iters,
                target_u_star=target_ustar,
                theta=self.theta,
                critical_bisection_tol=self.critical_bisection_tol,
                max_crossings=max_crossings,
            )
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc


def default_target(n: int) -> float:
    """Cap on u* that comfortably passes the first spurious point for either scheme."""
    return 1.2 * n + 10.0


def check_finite(name: str, value: float):
    if value is None or not math.isfinite(value):
        raise ConfigError(f"{name} must be a finite number")
