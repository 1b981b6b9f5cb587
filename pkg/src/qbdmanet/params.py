"""Network parameters shared by the analytic model and the simulator."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

MOBILITY_MODELS = ("iid", "random_walk", "random_waypoint")
OUTPUT_DIR_ENV = "QBDMANET_OUTPUT_DIR"


class ParameterError(ValueError):
    """A network parameter or config entry is out of range or malformed."""


class ConfigError(ParameterError):
    pass


def ec_spacing(delta: float, m: int) -> int:
    """Equivalent-class spacing: min(ceil((1 + delta) * sqrt(8) + 2), m)."""
    return min(math.ceil((1.0 + delta) * math.sqrt(8.0) + 2.0), m)


@dataclass(frozen=True)
class NetworkParams:
    """Validated (n, m, q, delta, lam) plus the derived EC spacing and radio range.

    ``lam`` may be ``None`` when only capacity is needed or when a config
    specifies a load ``rho`` that is bound to a rate later (see ``with_load``).
    """

    n: int
    m: int
    q: float
    delta: float = 1.0
    lam: float | None = None
    alpha: int = field(init=False)
    r: float = field(init=False)

    def __post_init__(self):
        _check(isinstance(self.n, int) and not isinstance(self.n, bool), "n", "must be an integer")
        _check(self.n >= 4, "n", f"must be >= 4, got {self.n}")
        _check(isinstance(self.m, int) and not isinstance(self.m, bool), "m", "must be an integer")
        _check(self.m >= 3, "m", f"must be >= 3, got {self.m}")
        _check(0.0 < self.q < 1.0, "q", f"must satisfy 0 < q < 1, got {self.q}")
        _check(self.delta >= 0.0, "delta", f"must be >= 0, got {self.delta}")
        if self.lam is not None:
            _check(0.0 < self.lam < 1.0, "lambda", f"must satisfy 0 < lambda < 1, got {self.lam}")
        object.__setattr__(self, "alpha", ec_spacing(self.delta, self.m))
        object.__setattr__(self, "r", math.sqrt(8.0) / self.m)

    @property
    def cells(self) -> int:
        return self.m * self.m

    @property
    def alpha_divides_m(self) -> bool:
        return self.m % self.alpha == 0

    def with_lambda(self, lam: float) -> NetworkParams:
        return replace(self, lam=lam)

    def with_load(self, rho: float) -> NetworkParams:
        """Bind lam = rho * mu, with mu the per-node throughput capacity."""
        from .qbd import capacity

        if not rho > 0.0:
            raise ParameterError(f"rho: must be > 0, got {rho}")
        mu, _, _ = capacity(self)
        return replace(self, lam=rho * mu)


def _check(ok: bool, name: str, msg: str) -> None:
    if not ok:
        raise ParameterError(f"{name}: {msg}")


def build_params(n: int, m: int, q: float, delta: float = 1.0, lam: float | None = None) -> NetworkParams:
    return NetworkParams(n=n, m=m, q=q, delta=delta, lam=lam)


@dataclass(frozen=True)
class RunSettings:
    mobility: str = "iid"
    slots: int = 2_000_000
    warmup_slots: int = 100_000
    replications: int = 10
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        if self.mobility not in MOBILITY_MODELS:
            raise ConfigError(f"mobility: must be one of {MOBILITY_MODELS}, got {self.mobility!r}")
        if self.slots <= 0:
            raise ConfigError(f"slots: must be > 0, got {self.slots}")
        if not 0 <= self.warmup_slots < self.slots:
            raise ConfigError(f"warmup_slots: must satisfy 0 <= warmup_slots < slots, got {self.warmup_slots}")
        if self.replications < 1:
            raise ConfigError(f"replications: must be >= 1, got {self.replications}")

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_DIR_ENV) or "results")


@dataclass(frozen=True)
class Config:
    """A parsed config file: network parameters, optional load, and run settings."""

    params: NetworkParams
    settings: RunSettings = RunSettings()
    rho: float | None = None

    def resolved_params(self) -> NetworkParams:
        if self.params.lam is not None:
            return self.params
        if self.rho is None:
            raise ConfigError("config gives neither 'lambda' nor 'rho'")
        return self.params.with_load(self.rho)

    def to_dict(self) -> dict:
        d = {"n": self.params.n, "m": self.params.m, "q": self.params.q, "delta": self.params.delta}
        if self.params.lam is not None:
            d["lambda"] = self.params.lam
        if self.rho is not None:
            d["rho"] = self.rho
        d.update({k: v for k, v in asdict(self.settings).items() if v is not None})
        return d


_REQUIRED = ("n", "m", "q")
_INT_KEYS = {"n", "m", "slots", "warmup_slots", "replications", "seed"}
_SETTING_KEYS = {f.name for f in fields(RunSettings)}
_KNOWN = set(_REQUIRED) | {"delta", "lambda", "rho"} | _SETTING_KEYS


def parse_config(data: dict, strict: bool = True, source: str = "<config>") -> Config:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a key-value object")
    missing = [k for k in _REQUIRED if k not in data]
    if missing:
        raise ConfigError(f"{source}: missing required key(s) {', '.join(missing)}")
    unknown = sorted(set(data) - _KNOWN)
    if unknown and strict:
        raise ConfigError(f"{source}: unknown key(s) {', '.join(unknown)}")
    if "lambda" in data and "rho" in data:
        raise ConfigError(f"{source}: give either 'lambda' or 'rho', not both")
    for k in _INT_KEYS & set(data):
        if not isinstance(data[k], int) or isinstance(data[k], bool):
            raise ConfigError(f"{source}: field '{k}' must be an integer, got {data[k]!r}")
    try:
        params = build_params(
            data["n"], data["m"], float(data["q"]), float(data.get("delta", 1.0)),
            float(data["lambda"]) if "lambda" in data else None,
        )
        settings = RunSettings(**{k: data[k] for k in _SETTING_KEYS if k in data})
    except ConfigError:
        raise
    except (ParameterError, TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    rho = data.get("rho")
    if rho is not None and not float(rho) > 0.0:
        raise ConfigError(f"{source}: field 'rho' must be > 0, got {rho!r}")
    return Config(params=params, settings=settings, rho=None if rho is None else float(rho))


def load_config(path: str | os.PathLike, strict: bool = True) -> Config:
    """Read a flat JSON config. Parse errors report line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_config(data, strict=strict, source=str(path))


def dump_config(config: Config, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")
