"""Experiment configuration: a JSON document mapped onto nested dataclasses.

Unknown keys are rejected, every precondition is checked up front and all
violations are reported together.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources

import numpy as np

from .geometry import MAP_KINDS, ConfigurationError

PRESETS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7")
STEP_RULES = ("sqrt_T", "d_sqrt_T", "bandit_tuned", "optimal")
CONFIG_ERROR_KINDS = ("exact", "decaying", "fixed", "horizon", "gap")
NETWORK_KINDS = ("alternating_halves", "ring", "complete")


@dataclass
class GeometryConfig:
    map: str = "euclidean"
    p: float | str | None = None  # "auto" picks ln(d) / (ln(d) - 1)


@dataclass
class SetConfig:
    kind: str = "ball"
    radius: float | None = 1.0  # null means all of R^d
    inner_radius: float | None = None
    bound_radius: float | None = None  # stands in for the radius when evaluating bounds on R^d


@dataclass
class RegularizerConfig:
    lambda1: float = 1.0  # ridge weight, folded into the smooth loss
    lambda2: float = 0.1  # l1 weight, the regularizer proper


@dataclass
class NetworkConfig:
    kind: str = "alternating_halves"
    m: int = 30
    edge_prob: float = 0.2
    seed: int | None = None


@dataclass
class StreamConfig:
    d: int = 10
    T: list = field(default_factory=lambda: [100, 400, 1600])
    seed: int | None = None


@dataclass
class StepConfig:
    rule: str = "sqrt_T"
    c_eta: float = 1.0


@dataclass
class ErrorConfig:
    kind: str = "exact"
    c_rho: float = 0.0
    rho: float = 0.0


@dataclass
class BanditConfig:
    c_delta: float = 1.0
    xi: float | None = None  # default delta / R_lower


@dataclass
class SweepConfig:
    cases: list = field(default_factory=list)
    grid: dict = field(default_factory=dict)


@dataclass
class OutputConfig:
    csv: str = "regret.csv"
    json: str = "summary.json"
    curves: bool = True
    records: bool = False


@dataclass
class ExperimentConfig:
    name: str = "custom"
    algorithm: str = "odcmd"
    seed: int = 0
    strict: bool = True
    allow_numeric_prox: bool = False
    baseline_tie: float = 0.0
    comparator_tol: float = 1e-9
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    set: SetConfig = field(default_factory=SetConfig)
    regularizer: RegularizerConfig = field(default_factory=RegularizerConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    stream: StreamConfig = field(default_factory=StreamConfig)
    step: StepConfig = field(default_factory=StepConfig)
    error: ErrorConfig = field(default_factory=ErrorConfig)
    bandit: BanditConfig = field(default_factory=BanditConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_dict(cls, data):
        return _build(cls, data, "")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())

    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    def with_overrides(self, overrides):
        """A copy with dotted-path overrides such as ``{"error.c_rho": 10}`` applied."""
        data = copy.deepcopy(self.to_dict())
        for path, value in overrides.items():
            node = data
            parts = path.split(".")
            for part in parts[:-1]:
                if not isinstance(node, dict) or part not in node:
                    raise ConfigurationError(f"invalid parameter path {path!r}")
                node = node[part]
            if not isinstance(node, dict) or parts[-1] not in node:
                raise ConfigurationError(f"invalid parameter path {path!r}")
            node[parts[-1]] = value
        return type(self).from_dict(data)


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{prefix or 'config'}: expected an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigurationError(f"unknown field(s): {', '.join(prefix + k for k in unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = known[name].default_factory() if callable(known[name].default_factory) else None
        if default is not None and hasattr(default, "__dataclass_fields__"):
            kwargs[name] = _build(type(default), value, f"{prefix}{name}.")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def derived_seeds(config):
    """Stream, network and direction seeds; explicit seeds win over the master seed."""
    master = np.random.SeedSequence(int(config.seed))
    children = [int(s.generate_state(1, dtype=np.uint64)[0]) for s in master.spawn(3)]
    return {
        "stream": config.stream.seed if config.stream.seed is not None else children[0],
        "network": config.network.seed if config.network.seed is not None else children[1],
        "directions": children[2],
    }


def validate(config):
    """Every violated precondition of ``config``, as a list of messages."""
    from .algorithms import ALGORITHMS

    errs = []
    if config.algorithm not in ALGORITHMS:
        errs.append(f"algorithm must be one of {ALGORITHMS}, got {config.algorithm!r}")
    g = config.geometry
    if g.map not in MAP_KINDS:
        errs.append(f"geometry.map must be one of {MAP_KINDS}")
    if g.map == "pnorm":
        if g.p in (None, "auto"):
            if config.stream.d < math.e**2:
                errs.append("geometry.p='auto' needs d >= 8")
        elif not (isinstance(g.p, (int, float)) and 1 < g.p <= 2):
            errs.append("geometry.p must lie in (1, 2] or be 'auto'")
    s = config.set
    if s.kind not in ("ball", "simplex"):
        errs.append("set.kind must be 'ball' or 'simplex'")
    if s.kind == "ball" and s.radius is not None and not s.radius > 0:
        errs.append("set.radius must be positive")
    if s.kind == "ball" and s.radius is not None and s.inner_radius is not None and s.inner_radius > s.radius:
        errs.append("set.inner_radius exceeds set.radius")
    if config.regularizer.lambda1 < 0 or config.regularizer.lambda2 < 0:
        errs.append("regularizer weights must be nonnegative")
    n = config.network
    if n.kind not in NETWORK_KINDS:
        errs.append(f"network.kind must be one of {NETWORK_KINDS}")
    if not (isinstance(n.m, int) and n.m >= 1):
        errs.append("network.m must be a positive integer")
    if not 0 < n.edge_prob <= 1:
        errs.append("network.edge_prob must lie in (0, 1]")
    st = config.stream
    if not (isinstance(st.d, int) and st.d >= 1):
        errs.append("stream.d must be a positive integer")
    if not st.T or not all(isinstance(T, int) and T >= 1 for T in st.T):
        errs.append("stream.T must be a nonempty list of positive integers")
    if config.step.rule not in STEP_RULES:
        errs.append(f"step.rule must be one of {STEP_RULES}")
    if not config.step.c_eta > 0:
        errs.append("step.c_eta must be positive")
    e = config.error
    if e.kind not in CONFIG_ERROR_KINDS:
        errs.append(f"error.kind must be one of {CONFIG_ERROR_KINDS}")
    if e.c_rho < 0 or e.rho < 0:
        errs.append("error magnitudes must be nonnegative")
    if not -1 <= config.baseline_tie <= 1:
        errs.append("baseline_tie must lie in [-1, 1]")
    if not config.comparator_tol > 0:
        errs.append("comparator_tol must be positive")

    unbounded = s.kind == "ball" and s.radius is None
    if g.map == "entropic" and s.kind != "simplex" and not config.allow_numeric_prox:
        errs.append("entropic map with a ball set has no closed-form prox (unsupported pairing "
                    "without numeric fallback)")
    if g.map == "pnorm" and not unbounded and g.p != 2 and not config.allow_numeric_prox:
        errs.append("p-norm map needs set.radius = null for a closed-form prox (or allow_numeric_prox)")
    if config.algorithm == "subgradient_baseline" and g.map != "euclidean":
        errs.append("subgradient_baseline needs the euclidean map")
    if config.algorithm == "banodcmd":
        if s.kind != "ball" or unbounded:
            errs.append("banodcmd needs a bounded ball set")
        else:
            r_low = s.radius if s.inner_radius is None else s.inner_radius
            for T in st.T if isinstance(st.T, list) else []:
                if not (isinstance(T, int) and T >= 1):
                    continue
                delta = config.bandit.c_delta / math.sqrt(T)
                xi = delta / r_low if config.bandit.xi is None else config.bandit.xi
                if not 0 <= xi < 1:
                    errs.append(f"T={T}: shrinkage xi={xi:.6g} must lie in [0, 1)")
                elif delta > xi * r_low * (1 + 1e-12):
                    errs.append(f"T={T}: Set δ ≤ ξR̲ (delta={delta:.6g} > xi*R_lower={xi * r_low:.6g})")
    if config.step.rule == "optimal" and config.algorithm == "banodcmd":
        errs.append("step.rule='optimal' applies to the full-information bound only")

    from .harness import expand_sweep

    try:
        for cell in expand_sweep(config.sweep):
            sub = _apply_raw(config, cell)
            if cell:
                errs.extend(f"sweep cell {cell}: {m}" for m in validate(sub))
    except ConfigurationError as exc:
        errs.append(str(exc))
    return sorted(set(errs), key=errs.index)


def _apply_raw(config, cell):
    if not cell:
        return config
    data = config.to_dict()
    data["sweep"] = {"cases": [], "grid": {}}
    return ExperimentConfig.from_dict(data).with_overrides(cell)


def load_preset(name):
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("odcmd.presets").joinpath(f"{name}.json").read_text()
    return ExperimentConfig.from_json(text)
