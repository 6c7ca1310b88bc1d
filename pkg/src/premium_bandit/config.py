"""Run configuration: nested dataclasses read from and written to YAML.

Every omitted key takes the reference-experiment default; unknown keys and
invalid values are reported together, each with its dotted key path.
"""

from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .delay import DelayLedger
from .gp import KernelKind, KernelSpec
from .market import DelayConfig, DomainError, Link, MarketParams

ALGOS = ("glm", "gp", "glm-delayed", "gp-delayed", "compare")


class ConfigError(ValueError):
    """One or more configuration problems, each tagged with its key path."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in self.problems))


@dataclass
class KernelConfig:
    kind: str = "matern_5_2"
    length_scale: float = 1.0
    variance: float = 1.0

    def build(self):
        return KernelSpec(KernelKind(self.kind), self.length_scale, self.variance)


@dataclass
class MarketConfig:
    a0: float = 11.0
    a1: float = -0.8
    b0: float = 3.0
    b1: float = 0.25
    sigma1: float = 0.25
    sigma2: float = 0.05
    demand_link: str = "identity"
    claims_link: str = "identity"
    p_low: float = 0.5
    p_high: float = 10.0
    demand_noise: str = "logistic"

    def build(self):
        return MarketParams(**dataclasses.asdict(self))


@dataclass
class TruthConfig:
    """Which world the policies face.

    ``auto`` uses the parametric market for the GLM policy alone and a
    GP-sampled market whenever the GP policy runs (including ``compare``).
    """

    mode: str = "auto"
    kernel_d: KernelConfig = field(default_factory=lambda: KernelConfig("matern_3_2"))
    kernel_c: KernelConfig = field(default_factory=lambda: KernelConfig("matern_5_2"))
    noise_sd: float = 0.05
    mean_d: float = 0.0
    mean_c: float = 0.0
    grid_size: int = 512


@dataclass
class GlmConfig:
    c: float = 0.01
    K: float | None = None  # None: largest K admissible from t = 3 on
    initial_prices: list = field(default_factory=lambda: [3.0, 3.3, 4.7])
    estimate_sigma2: bool = True
    claims_scale: str = "auto"  # log | level | auto (log on the parametric market)


@dataclass
class GpConfig:
    kernel_d: KernelConfig = field(default_factory=lambda: KernelConfig("matern_3_2"))
    kernel_c: KernelConfig = field(default_factory=lambda: KernelConfig("matern_5_2"))
    noise_sd: float = 0.05
    prior_mean_d: float = 0.0
    prior_mean_c: float = 0.0
    delta: float = 0.1
    grid_size: int = 512


@dataclass
class PolicyConfig:
    algo: str = "glm"
    glm: GlmConfig = field(default_factory=GlmConfig)
    gp: GpConfig = field(default_factory=GpConfig)


@dataclass
class DelaySettings:
    enabled: bool = False
    m: int = 5
    distribution: str = "uniform"
    fixed: int = 0
    geom_p: float = 0.5

    def build(self):
        if not self.enabled:
            return DelayConfig()
        return DelayConfig(self.m, self.distribution, self.fixed, self.geom_p)


@dataclass
class RunConfig:
    market: MarketConfig = field(default_factory=MarketConfig)
    truth: TruthConfig = field(default_factory=TruthConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    horizon: int = 100
    seeds: list = field(default_factory=lambda: [0])
    base_seed: int = 0  # added to every seed; PREMIUM_BANDIT_SEED overrides it
    delay: DelaySettings = field(default_factory=DelaySettings)
    output_dir: str = "out"

    def to_dict(self):
        return dataclasses.asdict(self)

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


# -- parsing ----------------------------------------------------------------

def _coerce(value, tp, path, problems):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path, problems)
    if origin is typing.Union or type(tp).__name__ == "UnionType":
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(value, args[0], path, problems)
    if tp is bool:
        if isinstance(value, bool):
            return value
        problems.append((path, f"expected true/false, got {value!r}"))
        return None
    if tp is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        problems.append((path, f"expected an integer, got {value!r}"))
        return None
    if tp is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            if not math.isfinite(value):
                problems.append((path, "must be finite"))
            return float(value)
        problems.append((path, f"expected a number, got {value!r}"))
        return None
    if tp is str:
        if isinstance(value, str):
            return value
        problems.append((path, f"expected a string, got {value!r}"))
        return None
    if tp is list:
        if isinstance(value, (list, tuple)):
            return list(value)
        problems.append((path, f"expected a list, got {value!r}"))
        return None
    return value


def _build(cls, data, path, problems):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        problems.append((path or "<root>", f"expected a mapping, got {type(data).__name__}"))
        return cls()
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            problems.append((f"{path}.{key}" if path else str(key), "unknown key"))
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            sub = f"{path}.{f.name}" if path else f.name
            v = _coerce(data[f.name], hints[f.name], sub, problems)
            if v is not None or data[f.name] is None:
                kwargs[f.name] = v
    return cls(**kwargs)


def _validate(cfg, problems):
    if cfg.horizon < 1:
        problems.append(("horizon", "must be >= 1"))
    if not cfg.seeds:
        problems.append(("seeds", "must be a nonempty list"))
    for i, s in enumerate(cfg.seeds):
        if not isinstance(s, int) or isinstance(s, bool) or s < 0:
            problems.append((f"seeds[{i}]", f"expected a nonnegative integer, got {s!r}"))
    if cfg.base_seed < 0:
        problems.append(("base_seed", "must be >= 0"))
    if cfg.policy.algo not in ALGOS:
        problems.append(("policy.algo", f"must be one of {', '.join(ALGOS)}"))
    try:
        cfg.market.build()
    except (DomainError, ValueError) as e:
        problems.append(("market", str(e)))
    for name in ("demand_link", "claims_link"):
        if getattr(cfg.market, name) not in [l.value for l in Link]:
            problems.append((f"market.{name}", "must be identity, log or logit"))
    if cfg.truth.mode not in ("auto", "parametric", "sampled"):
        problems.append(("truth.mode", "must be auto, parametric or sampled"))
    for prefix, kc in (("truth.kernel_d", cfg.truth.kernel_d), ("truth.kernel_c", cfg.truth.kernel_c),
                       ("policy.gp.kernel_d", cfg.policy.gp.kernel_d),
                       ("policy.gp.kernel_c", cfg.policy.gp.kernel_c)):
        try:
            kc.build()
        except (DomainError, ValueError) as e:
            problems.append((prefix, str(e)))
    if not cfg.truth.noise_sd >= 0:
        problems.append(("truth.noise_sd", "must be >= 0"))
    if cfg.truth.grid_size < 2:
        problems.append(("truth.grid_size", "must be >= 2"))
    g = cfg.policy.glm
    if not g.c > 0:
        problems.append(("policy.glm.c", "must be > 0"))
    if g.K is not None and not g.K >= 0:
        problems.append(("policy.glm.K", "must be >= 0 or null"))
    if len(g.initial_prices) != 3:
        problems.append(("policy.glm.initial_prices", "needs exactly three prices"))
    elif len(set(g.initial_prices)) < 2:
        problems.append(("policy.glm.initial_prices", "price vectors must span R^2"))
    for i, p in enumerate(g.initial_prices):
        if not isinstance(p, (int, float)) or isinstance(p, bool):
            problems.append((f"policy.glm.initial_prices[{i}]", f"expected a number, got {p!r}"))
        elif not cfg.market.p_low <= p <= cfg.market.p_high:
            problems.append((f"policy.glm.initial_prices[{i}]", "outside the price bounds"))
    if g.claims_scale not in ("auto", "log", "level"):
        problems.append(("policy.glm.claims_scale", "must be auto, log or level"))
    gp = cfg.policy.gp
    if not 0 < gp.delta < 1:
        problems.append(("policy.gp.delta", "must lie in (0, 1)"))
    if not gp.noise_sd >= 0:
        problems.append(("policy.gp.noise_sd", "must be >= 0"))
    if gp.grid_size < 1:
        problems.append(("policy.gp.grid_size", "must be >= 1"))
    d = cfg.delay
    try:
        DelayConfig(d.m, d.distribution, d.fixed, d.geom_p)
        DelayLedger(d.m)
    except DomainError as e:
        problems.append(("delay", str(e)))


def parse_config(data=None):
    """Validated :class:`RunConfig` from a mapping, a YAML path or None (defaults)."""
    if isinstance(data, (str, Path)):
        path = Path(data)
        if not path.is_file():
            raise ConfigError([("<file>", f"config file not found: {path}")])
        try:
            data = yaml.safe_load(path.read_text())
        except yaml.YAMLError as e:
            raise ConfigError([("<file>", f"invalid YAML: {e}")]) from e
    problems = []
    cfg = _build(RunConfig, data, "", problems)
    _validate(cfg, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_yaml(text):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError([("<text>", f"invalid YAML: {e}")]) from e
    return parse_config(data)
