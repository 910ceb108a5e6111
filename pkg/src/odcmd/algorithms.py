"""Online distributed composite mirror descent, its bandit variant and the
subgradient baseline, plus the closed-form regret bounds they come with."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import (
    ConfigurationError,
    ErrorModel,
    perturb,
    prox_exact,
    supports_exact,
)
from .problems import check_feasible, two_point_values

ALGORITHMS = ("odcmd", "banodcmd", "subgradient_baseline")
MEMORY_CAP = 10**7
SEED_TAG_DIRECTIONS = 2


@dataclass(frozen=True)
class AlgorithmConfig:
    """Step size, prox error model and (for the bandit) exploration parameters.

    ``eta`` is held fixed over the horizon; sweeping the horizon means
    building a new config.
    """

    eta: float
    error: ErrorModel = field(default_factory=ErrorModel)
    delta: float = 0.0
    xi: float = 0.0
    strict: bool = True
    tie: float = 0.0
    allow_numeric: bool = False
    store_iterates: bool | None = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigurationError(f"step size must be positive, got {self.eta}")
        if not 0.0 <= self.xi < 1.0:
            raise ConfigurationError(f"shrinkage must lie in [0, 1), got {self.xi}")
        if self.delta < 0:
            raise ConfigurationError("exploration radius must be nonnegative")
        if not -1.0 <= self.tie <= 1.0:
            raise ConfigurationError("subgradient tie value must lie in [-1, 1]")

    @classmethod
    def full_info_default(cls, T, c_eta=1.0, **kwargs):
        """``eta = c_eta / sqrt(T)``."""
        return cls(eta=c_eta / math.sqrt(T), **kwargs)

    @classmethod
    def bandit_tuned(cls, T, d, pbar=1.0, pbar_star=1.0, inner_radius=1.0, c_eta=1.0, c_delta=1.0, **kwargs):
        """``eta = c_eta / (pbar pbar_star d sqrt(T))``, ``delta = c_delta / sqrt(T)``, ``xi = delta / R_lower``."""
        delta = c_delta / math.sqrt(T)
        return cls(eta=c_eta / (pbar * pbar_star * d * math.sqrt(T)), delta=delta,
                   xi=delta / inner_radius, **kwargs)

    def bandit_errors(self, kset):
        """Violated bandit preconditions, as human-readable strings."""
        errors = []
        if not self.delta > 0:
            errors.append("bandit feedback needs delta > 0")
        if kset.kind != "ball" or not kset.inner_radius > 0:
            errors.append("bandit feedback needs a set containing a ball of radius R_lower > 0")
        elif self.delta > self.xi * kset.inner_radius * (1 + 1e-12):
            errors.append(
                f"Set δ ≤ ξR̲: delta={self.delta:.6g} exceeds xi*R_lower={self.xi * kset.inner_radius:.6g}"
            )
        return errors


@dataclass(eq=False)
class RunRecord:
    """Trajectory and per-round diagnostics of one run.

    ``losses[t, i]`` is the network-wide loss ``sum_j l_{j,t}(x_{i,t})`` and
    ``reg_values[t, i]`` is ``r(x_{i,t})``; both are accumulated online so the
    iterates themselves are only kept when ``iterates`` fits the memory cap.
    Norm-valued diagnostics use the norm of the mirror map.
    """

    algorithm: str
    T: int
    m: int
    d: int
    losses: np.ndarray
    reg_values: np.ndarray
    disagreement: np.ndarray  # sum_i ||x_i - xbar||
    max_disagreement: np.ndarray  # max_i ||x_i - xbar||
    spread: np.ndarray  # [t, i] = ||x_i - xbar||
    pairwise: np.ndarray  # [t, j] = sum_i ||x_i - x_j||
    average: np.ndarray  # xbar_t
    initial: np.ndarray
    step_norms: np.ndarray  # ||y* - x||
    error_norms: np.ndarray  # ||y - y*||
    gaps: np.ndarray
    rho: np.ndarray
    consensus_residual: np.ndarray  # |sum_i x_{i,t+1} - sum_i y_{i,t}|_inf
    estimate_norms: np.ndarray | None = None
    gradient_norms: np.ndarray | None = None
    iterates: np.ndarray | None = None
    queries: int = 0
    query_violations: int = 0
    config: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)

    def composite_losses(self):
        """``sum_j f_{j,t}(x_{i,t})`` including ``m r(x_{i,t})``."""
        return self.losses + self.m * self.reg_values


def sample_unit_vectors(rngs, d):
    """One uniform unit vector per generator: a normalized Gaussian, zero draws retried."""
    U = np.empty((len(rngs), d))
    for i, rng in enumerate(rngs):
        while True:
            v = rng.standard_normal(d)
            n = np.sqrt(v @ v)
            if n > 0:
                U[i] = v / n
                break
    return U


def two_point_estimate(stream, t, X, delta, U, kset=None, strict=True):
    """``(d / 2 delta) (l(x + delta u) - l(x - delta u)) u`` for every row of ``X``."""
    vp, vm = two_point_values(stream, t, X, delta, U, kset, strict)
    return (X.shape[-1] / (2.0 * delta)) * (vp - vm)[:, None] * U


def unit_directions(seed, m, d):
    """Per-node direction generators, node ``i`` keyed on ``(seed, i)``."""
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, SEED_TAG_DIRECTIONS)))
            for i in range(m)]


def _config_snapshot(algorithm, config, mirror, kset, reg):
    snap = asdict(config)
    snap["error"] = asdict(config.error)
    snap.update(algorithm=algorithm, map=mirror.kind, p=mirror.p, set=kset.kind,
                radius=kset.radius, inner_radius=kset.inner_radius,
                lambda1_reg=reg.lambda1, lambda2=reg.lambda2)
    return snap


def _simulate(algorithm, stream, schedule, mirror, kset, reg, config, T, seed):
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {algorithm!r}")
    if T < 1 or T > stream.T:
        raise ValueError(f"horizon {T} outside 1..{stream.T}")
    m, d = stream.m, stream.d
    if schedule.m != m:
        raise ConfigurationError(f"schedule has {schedule.m} nodes, stream has {m}")
    bandit = algorithm == "banodcmd"
    baseline = algorithm == "subgradient_baseline"
    if bandit:
        errors = config.bandit_errors(kset)
        if errors:
            raise ConfigurationError("; ".join(errors))
    if baseline and not mirror.is_euclidean:
        raise ConfigurationError("the subgradient baseline needs the Euclidean map")
    prox_set = kset.shrunk(config.xi) if bandit else kset
    if not baseline and not config.allow_numeric and not supports_exact(mirror, prox_set, reg):
        raise ConfigurationError(
            f"no closed-form prox for ({mirror.kind}, {kset.kind}, {reg.kind}) without numeric fallback"
        )
    store = config.store_iterates
    if store is None:
        store = T * m * d <= MEMORY_CAP

    eta = config.eta
    X = np.tile(prox_set.minimizer_of_omega(mirror, d), (m, 1))
    initial = X.copy()
    losses = np.empty((T, m))
    regs = np.empty((T, m))
    dis = np.empty(T)
    spreads = np.empty((T, m))
    maxdis = np.empty(T)
    pairwise = np.empty((T, m))
    average = np.empty((T, d))
    step_norms = np.empty((T, m))
    error_norms = np.empty((T, m))
    gaps = np.empty((T, m))
    residual = np.empty(T)
    grad_norms = np.empty((T, m))
    est_norms = np.empty((T, m)) if bandit else None
    iterates = np.empty((T, m, d)) if store else None
    rho = config.error.schedule(T)

    rngs = []
    if bandit:
        rngs = unit_directions(seed, m, d)
    start_queries, start_bad = stream.counter.queries, stream.counter.violations

    for t in range(1, T + 1):
        k = t - 1
        xbar = X.mean(axis=0)
        spread = mirror.norm(X - xbar)
        spreads[k] = spread
        dis[k], maxdis[k] = spread.sum(), spread.max()
        pairwise[k] = mirror.norm(X[:, None, :] - X[None, :, :]).sum(axis=0)
        average[k] = xbar
        losses[k] = stream.network_losses(t, X)
        regs[k] = reg.value(X)
        if store:
            iterates[k] = X

        if bandit:
            U = sample_unit_vectors(rngs, d)
            G = two_point_estimate(stream, t, X, config.delta, U, kset, config.strict)
            est_norms[k] = mirror.dual_norm(G)
        else:
            G = stream.gradients(t, X)
        grad_norms[k] = mirror.dual_norm(G)

        if baseline:
            Y_star = prox_set.project(X - eta * (G + reg.subgradient(X, config.tie)))
        else:
            Y_star = prox_exact(mirror, prox_set, reg, X, G, eta, allow_numeric=config.allow_numeric)
        Y, gap = perturb(mirror, prox_set, reg, X, G, eta, Y_star, config.error, t)
        step_norms[k] = mirror.norm(Y_star - X)
        error_norms[k] = mirror.norm(Y - Y_star)
        gaps[k] = gap

        X = schedule.weights(t) @ Y
        residual[k] = np.max(np.abs(X.sum(axis=0) - Y.sum(axis=0)))
        check_feasible(prox_set, X, "consensus iterate", t)

    return RunRecord(
        algorithm=algorithm, T=T, m=m, d=d, losses=losses, reg_values=regs,
        disagreement=dis, max_disagreement=maxdis, spread=spreads, pairwise=pairwise, average=average,
        initial=initial, step_norms=step_norms, error_norms=error_norms, gaps=gaps, rho=rho,
        consensus_residual=residual, estimate_norms=est_norms, gradient_norms=grad_norms,
        iterates=iterates,
        queries=stream.counter.queries - start_queries,
        query_violations=stream.counter.violations - start_bad,
        config=_config_snapshot(algorithm, config, mirror, kset, reg),
        seeds={"directions": seed},
    )


def run_odcmd(stream, schedule, mirror, kset, reg, config, T):
    """Full-information rounds: gradient, approximate composite prox, neighbour averaging."""
    return _simulate("odcmd", stream, schedule, mirror, kset, reg, config, T, None)


def run_banodcmd(stream, schedule, mirror, kset, reg, config, T, seed):
    """Two-point bandit rounds over the shrunk set ``(1 - xi) K``.

    Node ``i`` draws its directions from a private generator keyed on
    ``(seed, i)``, so results do not depend on evaluation order.
    """
    return _simulate("banodcmd", stream, schedule, mirror, kset, reg, config, T, seed)


def run_subgradient_baseline(stream, schedule, kset, reg, config, T, mirror=None):
    """Subgradient step on loss plus l1, radial projection, then averaging.

    At zero coordinates the l1 subgradient takes ``config.tie``.
    """
    from .geometry import MirrorMap

    mirror = MirrorMap.euclidean() if mirror is None else mirror
    return _simulate("subgradient_baseline", stream, schedule, mirror, kset, reg, config, T, None)


@dataclass(frozen=True)
class BoundConstants:
    """Problem constants entering the regret bounds.

    ``init_norm_sum`` is ``sum_i ||x_{i,1}||`` and ``init_bregman_sum`` is
    ``sum_i V(x*, x_{i,1})`` (with ``(1 - xi) x*`` for the bandit bound).
    """

    G_l: float
    G_r: float
    sigma: float
    G_omega: float
    D_K: float
    theta: float
    kappa: float
    m: int
    d: int
    pbar: float = 1.0
    pbar_star: float = 1.0
    R_upper: float = math.inf
    R_lower: float = 0.0
    init_norm_sum: float = 0.0
    init_bregman_sum: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise ConfigurationError(f"contraction factor must lie in (0, 1), got {self.kappa}")
        if not self.sigma > 0:
            raise ConfigurationError("strong convexity modulus must be positive")

    @property
    def network_factor(self):
        return 2.0 * self.theta / (1.0 - self.kappa)


def full_info_coefficients(c):
    G, Gr, s, nf = c.G_l, c.G_r, c.sigma, c.network_factor
    return {
        "A0": nf * (G + Gr) * c.init_norm_sum,
        "A1": c.init_bregman_sum,
        "A2": c.m / s * (0.5 * G**2 + Gr * (G + Gr) + nf * (G + Gr) ** 2),
        "A3": c.m * math.sqrt(2.0 / s) * (G + nf * (G + Gr)),
        "A4": 2.0 * c.m * math.sqrt(2.0 / s) * c.G_omega * c.D_K,
    }


def bandit_coefficients(c):
    G, Gr, s, nf = c.G_l, c.G_r, c.sigma, c.network_factor
    Ghat = c.pbar * c.pbar_star * c.d * G
    return {
        "B0": nf * (G + Gr) * c.init_norm_sum,
        "B1": c.init_bregman_sum,
        "B2": c.m / s * (0.5 * Ghat**2 + Gr * (Ghat + Gr) + nf * (G + Gr) * (Ghat + Gr)),
        "B3": c.m * math.sqrt(2.0 / s) * (Ghat + nf * (G + Gr)),
        "B4": 4.0 * c.m * math.sqrt(2.0 / s) * c.pbar * c.G_omega * c.R_upper,
        "B5": 2.0 * c.m * G,
        "B6": c.m * c.pbar * (G + Gr) * c.R_upper,
    }


def _times(coef, total):
    # an infinite constant multiplying an error-free sum contributes nothing
    return 0.0 if total == 0 else coef * total


def theorem_bounds(config, constants, T, bandit=False):
    """Right-hand side of the full-information or the bandit regret bound.

    The error sums use the nominal schedule ``config.error.schedule(T)``.
    """
    eta = config.eta
    rho = config.error.schedule(T)
    s_eta = float(np.sum(np.sqrt(eta * rho)))
    s_inv = float(np.sum(np.sqrt(rho / eta)))
    if not bandit:
        A = full_info_coefficients(constants)
        return (A["A0"] / T + A["A1"] / (eta * T) + A["A2"] * eta
                + _times(A["A3"], s_eta) / T + _times(A["A4"], s_inv) / T)
    B = bandit_coefficients(constants)
    return (B["B0"] / T + B["B1"] / (eta * T) + B["B2"] * eta
            + _times(B["B3"], s_eta) / T + _times(B["B4"], s_inv) / T
            + B["B5"] * config.delta + B["B6"] * config.xi)


def optimal_step_constant(constants):
    """``c_eta = sqrt(A1 / A2)`` minimizing the error-free bound."""
    A = full_info_coefficients(constants)
    return math.sqrt(A["A1"] / A["A2"])


def disagreement_bound(constants, eta, rho, step_bound=None):
    """Bound on ``sum_t sum_i ||x_{i,t} - x_{j,t}||`` over ``len(rho)`` rounds.

    ``step_bound`` replaces ``G_l`` inside ``(G_l + G_r)`` for the bandit case.
    """
    c = constants
    T = len(rho)
    G = c.G_l if step_bound is None else step_bound
    nf = c.network_factor
    out = nf * c.init_norm_sum + c.m * nf / c.sigma * (G + c.G_r) * eta * T
    return out + _times(c.m * nf * math.sqrt(2.0 / c.sigma), float(np.sum(np.sqrt(eta * np.asarray(rho)))))
