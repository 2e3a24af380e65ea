"""Run configuration: YAML in, validated frozen dataclasses out, stable hash."""
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import yaml

MODEL_TAGS = ("bgk", "spectral_relaxation", "hard_sphere")
FAMILY_TAGS = ("density_energy", "zero_mean", "custom")
VARIANTS = ("vpb", "boltzmann")
# keys that do not change any computed number and stay out of the hash
_UNHASHED = ("out", "threads")


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


@dataclass(frozen=True)
class ModelSpec:
    """Collision model.

    :param rates: spectral-relaxation rates keyed ``"n,l"``; missing labels use the default rate law.
    :param quadrature_scale: hard-sphere quadrature multiplier over the exact rule.
    :param cache_dir: directory for the hard-sphere matrix cache.
    """

    tag: str = "bgk"
    nu0: float = 1.0
    K: int = 8
    rates: dict = field(default_factory=dict)
    quadrature_scale: int = 1
    cache_dir: str = ""

    def validate(self):
        if self.tag not in MODEL_TAGS:
            raise ConfigError(f"model.tag must be one of {MODEL_TAGS}, got {self.tag!r}")
        if not isinstance(self.K, int) or isinstance(self.K, bool):
            raise ConfigError("model.K must be an integer")
        if self.K < 2:
            raise ConfigError("model.K must be >= 2 so that the energy mode is representable")
        if not self.nu0 > 0:
            raise ConfigError("model.nu0 must be positive")
        if self.quadrature_scale < 1:
            raise ConfigError("model.quadrature_scale must be >= 1")
        for key, val in self.rates.items():
            parts = str(key).split(",")
            if len(parts) != 2 or not all(p.strip().isdigit() for p in parts):
                raise ConfigError(f"model.rates key {key!r} must read 'n,l'")
            if not float(val) > 0:
                raise ConfigError(f"model.rates[{key!r}] must be positive")


@dataclass(frozen=True)
class SGridSpec:
    """Log-spaced ``s`` samples for branch tables; ``s_max = 0`` means the empirical ``r0``."""

    s_min: float = 1e-3
    s_max: float = 0.0
    n: int = 10

    def validate(self):
        if not self.s_min > 0 or self.n < 2:
            raise ConfigError("s_grid needs s_min > 0 and n >= 2")
        if self.s_max and self.s_max <= self.s_min:
            raise ConfigError("s_grid.s_max must exceed s_min")


@dataclass(frozen=True)
class ScanSpec:
    """Spectral-gap scan: log-spaced ``s`` and ``delta = delta_frac * mu``."""

    s_min: float = 0.5
    s_max: float = 20.0
    n: int = 40
    delta_frac: float = 0.05

    def validate(self):
        if not (0 < self.s_min < self.s_max) or self.n < 2:
            raise ConfigError("scan needs 0 < s_min < s_max and n >= 2")
        if not (0 < self.delta_frac < 1):
            raise ConfigError("scan.delta_frac must lie in (0, 1)")


@dataclass(frozen=True)
class TimeGridSpec:
    t_min: float = 1.0
    t_max: float = 1e4
    n: int = 60
    fit_window: tuple = (1e2, 1e4)

    def validate(self):
        if not (0 < self.t_min < self.t_max) or self.n < 10:
            raise ConfigError("time_grid needs 0 < t_min < t_max and n >= 10")
        w = tuple(self.fit_window)
        if len(w) != 2 or not (w[0] < w[1]):
            raise ConfigError("time_grid.fit_window must be an increasing pair")


@dataclass(frozen=True)
class RadialSpec:
    s_min: float = 1e-3
    s_max: float = 20.0
    n: int = 240

    def validate(self):
        if not (0 < self.s_min < self.s_max) or self.n < 5:
            raise ConfigError("radial needs 0 < s_min < s_max and n >= 5")


@dataclass(frozen=True)
class FamilySpec:
    tag: str = "density_energy"
    d0: float = 1.0
    d1: float = 1.0
    r0: float = 0.5
    coeffs: tuple = ()

    def validate(self):
        if self.tag not in FAMILY_TAGS:
            raise ConfigError(f"family.tag must be one of {FAMILY_TAGS}")
        if self.tag == "custom" and not (1 <= len(self.coeffs) <= 5):
            raise ConfigError("family.coeffs needs 1 to 5 macroscopic coefficients")


@dataclass(frozen=True)
class DecaySpec:
    """Which decay harnesses ``decay`` runs."""

    variants: tuple = ("vpb",)
    nsp: bool = False

    def validate(self):
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"decay.variants entries must be in {VARIANTS}")


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec = ModelSpec()
    s_grid: SGridSpec = SGridSpec()
    scan: ScanSpec = ScanSpec()
    time_grid: TimeGridSpec = TimeGridSpec()
    radial: RadialSpec = RadialSpec()
    family: FamilySpec = FamilySpec()
    decay: DecaySpec = DecaySpec()
    variant: str = "vpb"
    eps: float = 1.0
    eps_sweep: tuple = (1.0, 2.0, 10.0)
    seed: int = 0
    threads: int = 1
    out: str = "results"

    def validate(self):
        for sub in (self.model, self.s_grid, self.scan, self.time_grid, self.radial,
                    self.family, self.decay):
            sub.validate()
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if not self.eps > 0 or any(not e > 0 for e in self.eps_sweep):
            raise ConfigError("eps values must be positive")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self

    def to_dict(self):
        return _plain(dataclasses.asdict(self))

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @property
    def hash(self):
        """SHA-256 of the canonical JSON of every key that affects results."""
        d = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def replace(self, **changes):
        return dataclasses.replace(self, **changes).validate()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _coerce(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(map(str, unknown))}")
    kwargs = {}
    for name, val in data.items():
        default = getattr(cls(), name)
        path = f"{where}.{name}" if where else name
        if dataclasses.is_dataclass(default):
            kwargs[name] = _coerce(type(default), val, path)
        elif isinstance(default, tuple):
            if not isinstance(val, (list, tuple)):
                raise ConfigError(f"{path} must be a list")
            kwargs[name] = tuple(val)
        elif isinstance(default, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{path} must be a mapping")
            kwargs[name] = {str(k): float(v) for k, v in val.items()}
        elif isinstance(default, bool):
            if not isinstance(val, bool):
                raise ConfigError(f"{path} must be a boolean")
            kwargs[name] = val
        elif isinstance(default, int):
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{path} must be an integer")
            kwargs[name] = val
        elif isinstance(default, float):
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"{path} must be a number")
            kwargs[name] = float(val)
        elif isinstance(default, str):
            if not isinstance(val, str):
                raise ConfigError(f"{path} must be a string")
            kwargs[name] = val
        else:  # pragma: no cover
            kwargs[name] = val
    return cls(**kwargs)


def config_from_dict(data):
    """Build and validate a :class:`RunConfig`; unknown keys raise :class:`ConfigError`."""
    try:
        return _coerce(RunConfig, data, "").validate()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path):
    """Read a YAML run configuration."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    return config_from_dict(data or {})


def dump_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cfg.to_yaml())


__all__ = [
    "ConfigError", "RunConfig", "ModelSpec", "SGridSpec", "ScanSpec", "TimeGridSpec", "RadialSpec",
    "FamilySpec", "DecaySpec", "config_from_dict", "load_config", "dump_config",
]
