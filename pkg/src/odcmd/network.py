"""Time-varying communication graphs and their doubly stochastic weights."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import ConfigurationError

SCHEDULE_KINDS = ("static", "complete", "ring", "alternating_halves", "custom")


def _normalize_edges(edges):
    out = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise ValueError(f"self-loop ({i}, {i}) in edge set")
        out.add((min(i, j), max(i, j)))
    return tuple(sorted(out))


def metropolis_weights(edges, m):
    """Symmetric Metropolis weights ``1 / (1 + max(deg_i, deg_j))`` on ``edges``.

    The diagonal takes whatever is left of each row, so the result is doubly
    stochastic for any undirected edge set.
    """
    edges = _normalize_edges(edges)
    deg = np.zeros(m, dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    W = np.zeros((m, m))
    for i, j in edges:
        W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    W[np.diag_indices(m)] = 1.0 - W.sum(axis=1)
    return W


def is_connected(edges, m):
    if m <= 1:
        return True
    edges = list(edges)
    if not edges:
        return False
    i, j = np.array(edges).T
    A = csr_matrix((np.ones(len(edges)), (i, j)), shape=(m, m))
    n, _ = connected_components(A, directed=False)
    return n == 1


def ring_edges(m):
    if m <= 1:
        return ()
    if m == 2:
        return ((0, 1),)
    return _normalize_edges((i, (i + 1) % m) for i in range(m))


def complete_edges(m):
    return tuple((i, j) for i in range(m) for j in range(i + 1, m))


def random_connected_graph(m, edge_prob, rng, max_tries=10_000):
    """Erdos-Renyi graph G(m, edge_prob), resampled until connected."""
    pairs = complete_edges(m)
    if m <= 1:
        return ()
    for _ in range(max_tries):
        keep = rng.random(len(pairs)) < edge_prob
        edges = tuple(p for p, k in zip(pairs, keep) if k)
        if is_connected(edges, m):
            return edges
    raise ConfigurationError(f"no connected G({m}, {edge_prob}) found in {max_tries} draws")


@dataclass(frozen=True)
class ConsensusConstants:
    theta: float
    kappa: float

    @classmethod
    def compute(cls, zeta, m, B):
        base = 1.0 - zeta / (4.0 * m * m)
        return cls(theta=base**-2, kappa=base ** (1.0 / B))

    def bound(self, lag):
        return self.theta * self.kappa**lag


@dataclass(frozen=True)
class NetworkSchedule:
    """A periodic sequence of edge sets with Metropolis weights.

    Round ``t`` (1-based) uses ``edge_sets[(t - 1) % len(edge_sets)]``.
    """

    m: int
    kind: str
    edge_sets: tuple
    base_edges: tuple = ()
    seed: int | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def period(self):
        return len(self.edge_sets)

    def edges(self, t):
        if t < 1:
            raise ValueError("rounds are numbered from 1")
        return self.edge_sets[(t - 1) % self.period]

    def weights(self, t):
        k = (t - 1) % self.period
        if k not in self._cache:
            W = metropolis_weights(self.edge_sets[k], self.m)
            W.setflags(write=False)
            self._cache[k] = W
        return self._cache[k]

    @cached_property
    def zeta(self):
        """Smallest positive weight over one period."""
        return float(min(np.min(self.weights(t)[self.weights(t) > 0]) for t in range(1, self.period + 1)))

    @cached_property
    def window(self):
        """Smallest B such that every B consecutive rounds form a connected union."""
        return connectivity_window(self, 2 * self.period)

    def constants(self):
        if self.window is None:
            raise ConfigurationError("schedule is never connected; no window length B exists")
        return ConsensusConstants.compute(self.zeta, self.m, self.window)

    def to_json(self, horizon=None):
        horizon = self.period if horizon is None else horizon
        return json.dumps(
            {
                "m": self.m,
                "kind": self.kind,
                "seed": self.seed,
                "base_edges": [list(e) for e in self.base_edges],
                "rounds": [[list(e) for e in self.edges(t)] for t in range(1, horizon + 1)],
            }
        )


def build_schedule(kind, m, seed=0, edge_prob=0.2, edges=None, edge_sets=None):
    """Construct a :class:`NetworkSchedule`.

    ``static`` uses ``edges`` every round, ``complete`` and ``ring`` the obvious
    graphs, ``alternating_halves`` a seeded connected Erdos-Renyi base graph
    whose edges are split once at random into two halves used on odd and even
    rounds, and ``custom`` cycles through ``edge_sets``.
    """
    if m < 1:
        raise ConfigurationError("need at least one node")
    if kind not in SCHEDULE_KINDS:
        raise ConfigurationError(f"unknown schedule kind {kind!r}")
    if kind == "custom":
        if not edge_sets:
            raise ConfigurationError("custom schedule needs a nonempty list of edge sets")
        sets = tuple(_normalize_edges(e) for e in edge_sets)
        base = _normalize_edges(e for s in sets for e in s)
        return NetworkSchedule(m, kind, sets, base, seed)
    if kind == "static":
        base = _normalize_edges(edges or ())
        if not is_connected(base, m):
            raise ConfigurationError("static base graph is disconnected")
        return NetworkSchedule(m, kind, (base,), base, seed)
    if kind == "complete":
        base = complete_edges(m)
        return NetworkSchedule(m, kind, (base,), base, seed)
    if kind == "ring":
        base = ring_edges(m)
        return NetworkSchedule(m, kind, (base,), base, seed)

    rng = np.random.default_rng(seed)
    if edges is not None:
        base = _normalize_edges(edges)
        if not is_connected(base, m):
            raise ConfigurationError("base graph is disconnected")
    else:
        base = random_connected_graph(m, edge_prob, rng)
    if len(base) < 2:
        return NetworkSchedule(m, kind, (base,), base, seed)
    order = rng.permutation(len(base))
    half = (len(base) + 1) // 2
    first = tuple(sorted(base[k] for k in order[:half]))
    second = tuple(sorted(base[k] for k in order[half:]))
    return NetworkSchedule(m, kind, (first, second), base, seed)


def connectivity_window(schedule, horizon):
    """Smallest B with every sliding B-window union over ``1..horizon`` connected."""
    m = schedule.m
    if m == 1:
        return 1
    sets = [set(schedule.edges(t)) for t in range(1, horizon + 1)]
    for B in range(1, horizon + 1):
        if all(is_connected(set().union(*sets[s : s + B]), m) for s in range(horizon - B + 1)):
            return B
    return None


def consensus_product_deviation(schedule, t, tau):
    """``max_ij |[W(t) ... W(tau)]_ij - 1/m|``."""
    if not t >= tau >= 1:
        raise ValueError("need t >= tau >= 1")
    P = np.eye(schedule.m)
    for s in range(tau, t + 1):
        P = schedule.weights(s) @ P
    return float(np.max(np.abs(P - 1.0 / schedule.m)))


def product_deviation_table(schedule, horizon):
    """All deviations at once: entry ``[t-1, tau-1]`` for ``1 <= tau <= t <= horizon``.

    Entries with ``tau > t`` are NaN.
    """
    m = schedule.m
    out = np.full((horizon, horizon), np.nan)
    for tau in range(1, horizon + 1):
        P = np.eye(m)
        for t in range(tau, horizon + 1):
            P = schedule.weights(t) @ P
            out[t - 1, tau - 1] = np.max(np.abs(P - 1.0 / m))
    return out


@dataclass(frozen=True)
class ConnectivityReport:
    ok: bool
    max_stochastic_deviation: float
    zeta: float
    window: int | None
    offending_round: int | None = None
    message: str = ""


def verify_connectivity(schedule, T, tol=1e-12):
    """Check double stochasticity, the weight floor and B-connectivity up to ``T``."""
    worst, worst_round, zeta = 0.0, None, np.inf
    for t in range(1, T + 1):
        W = schedule.weights(t)
        dev = max(np.max(np.abs(W.sum(axis=0) - 1)), np.max(np.abs(W.sum(axis=1) - 1)))
        if np.any(W < -tol):
            dev = max(dev, float(-W.min()))
        if dev > worst:
            worst, worst_round = float(dev), t
        zeta = min(zeta, float(np.min(W[W > 0])))
    window = connectivity_window(schedule, T)
    if worst > tol:
        return ConnectivityReport(False, worst, zeta, window, worst_round,
                                 f"round {worst_round}: W(t) is not doubly stochastic (deviation {worst:.3e})")
    if window is None:
        return ConnectivityReport(False, worst, zeta, None, T,
                                 f"no window length B <= {T} gives connected unions")
    return ConnectivityReport(True, worst, zeta, window)
