"""Per-node, per-round loss streams and their oracles.

A stream holds, for every round ``t`` and node ``i``, the loss

    l_{i,t}(x) = 0.5 (<b_{i,t}, x> - z_{i,t})^2 + <a_{i,t}, x> + c_{i,t} + (lambda1 / 2) ||x||_2^2

The regression data of the online ridge/lasso experiment only uses the first
and last terms; the linear and constant terms exist for tests. Rounds are
1-based in the public API and 0-based in the arrays.
"""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass, field

import numpy as np

from .geometry import FEASIBILITY_TOL, ConfigurationError, lp_norm

SEED_TAG_FEATURES = 0
SEED_TAG_NOISE = 1


class FeasibilityError(RuntimeError):
    """A query or iterate left the feasible set."""


class QueryCounter:
    """Thread-safe tally of loss evaluations and infeasible query points."""

    def __init__(self):
        self._lock = threading.Lock()
        self.queries = 0
        self.violations = 0

    def add(self, queries, violations=0):
        with self._lock:
            self.queries += queries
            self.violations += violations

    def reset(self):
        with self._lock:
            self.queries = 0
            self.violations = 0


@dataclass(frozen=True)
class GroundTruth:
    x0: np.ndarray
    noise_std: float = 1.0

    @classmethod
    def planted(cls, d, noise_std=1.0):
        x0 = np.zeros(d)
        x0[: d // 2] = 1.0
        return cls(x0, noise_std)


@dataclass(frozen=True, eq=False)
class LossStream:
    features: np.ndarray  # (T, m, d)
    responses: np.ndarray  # (T, m)
    lambda1: float = 0.0
    linear: np.ndarray | None = None  # (T, m, d)
    offset: np.ndarray | None = None  # (T, m)
    kind: str = "regression"
    truth: GroundTruth | None = None
    counter: QueryCounter = field(default_factory=QueryCounter, repr=False)

    @property
    def T(self):
        return self.features.shape[0]

    @property
    def m(self):
        return self.features.shape[1]

    @property
    def d(self):
        return self.features.shape[2]

    def _round(self, t):
        if not 1 <= t <= self.T:
            raise IndexError(f"round {t} outside 1..{self.T}")
        return t - 1

    def values(self, t, X):
        """``l_{i,t}(X[i])`` for every node ``i``; ``X`` has shape ``(m, d)``."""
        k = self._round(t)
        X = np.asarray(X, dtype=float)
        b, z = self.features[k], self.responses[k]
        res = np.einsum("...d,...d->...", X, b) - z
        out = 0.5 * res**2 + 0.5 * self.lambda1 * np.sum(X * X, axis=-1)
        if self.linear is not None:
            out = out + np.einsum("...d,...d->...", X, self.linear[k])
        if self.offset is not None:
            out = out + self.offset[k]
        return out

    def gradients(self, t, X):
        k = self._round(t)
        X = np.asarray(X, dtype=float)
        b, z = self.features[k], self.responses[k]
        res = np.einsum("...d,...d->...", X, b) - z
        out = res[..., None] * b + self.lambda1 * X
        if self.linear is not None:
            out = out + self.linear[k]
        return out

    def value(self, i, t, x):
        k = self._round(t)
        x = np.asarray(x, dtype=float)
        b, z = self.features[k, i], self.responses[k, i]
        out = 0.5 * (x @ b - z) ** 2 + 0.5 * self.lambda1 * x @ x
        if self.linear is not None:
            out += x @ self.linear[k, i]
        if self.offset is not None:
            out += self.offset[k, i]
        return float(out)

    def gradient(self, i, t, x):
        k = self._round(t)
        x = np.asarray(x, dtype=float)
        b, z = self.features[k, i], self.responses[k, i]
        out = (x @ b - z) * b + self.lambda1 * x
        if self.linear is not None:
            out = out + self.linear[k, i]
        return out

    def network_losses(self, t, X):
        """``sum_j l_{j,t}(X[i])`` for each row ``X[i]`` (rows need not be nodes)."""
        k = self._round(t)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        b, z = self.features[k], self.responses[k]
        res = X @ b.T - z
        out = 0.5 * np.sum(res**2, axis=1) + 0.5 * self.m * self.lambda1 * np.sum(X * X, axis=1)
        if self.linear is not None:
            out = out + X @ self.linear[k].sum(axis=0)
        if self.offset is not None:
            out = out + self.offset[k].sum()
        return out

    def total_loss(self, x):
        """``sum_t sum_j l_{j,t}(x)`` at a single point."""
        x = np.asarray(x, dtype=float)
        res = self.features @ x - self.responses
        out = 0.5 * np.sum(res**2) + 0.5 * self.T * self.m * self.lambda1 * (x @ x)
        if self.linear is not None:
            out += np.sum(self.linear @ x)
        if self.offset is not None:
            out += np.sum(self.offset)
        return float(out)

    def aggregate_quadratic(self):
        """``(Q, c)`` with ``sum_t sum_j l_{j,t}(x) = 0.5 x'Qx - c'x + const``."""
        b = self.features.reshape(-1, self.d)
        z = self.responses.reshape(-1)
        Q = b.T @ b + self.T * self.m * self.lambda1 * np.eye(self.d)
        c = b.T @ z
        if self.linear is not None:
            c = c - self.linear.reshape(-1, self.d).sum(axis=0)
        return Q, c

    def prefix(self, T):
        """The first ``T`` rounds as a new stream with a fresh counter."""
        return LossStream(
            self.features[:T], self.responses[:T], self.lambda1,
            None if self.linear is None else self.linear[:T],
            None if self.offset is None else self.offset[:T],
            self.kind, self.truth,
        )


def _node_rng(seed, i, tag):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, tag)))


def generate_regression_stream(m, d, T, seed, lambda1=1.0, noise_std=1.0):
    """Online regression data: features uniform on (-1, 1)^d, planted responses.

    Node ``i`` draws its features and its noise from two private generators
    keyed on ``(seed, i)``, one row per round, so changing ``m`` or ``T``
    leaves the draws of the remaining ``(i, t)`` pairs unchanged.
    """
    if min(m, d, T) < 1:
        raise ValueError("m, d and T must be positive")
    truth = GroundTruth.planted(d, noise_std)
    features = np.empty((T, m, d))
    noise = np.empty((T, m))
    for i in range(m):
        features[:, i, :] = _node_rng(seed, i, SEED_TAG_FEATURES).uniform(-1.0, 1.0, size=(T, d))
        noise[:, i] = noise_std * _node_rng(seed, i, SEED_TAG_NOISE).standard_normal(T)
    responses = features @ truth.x0 + noise
    return LossStream(features, responses, float(lambda1), kind="regression", truth=truth)


def linear_stream(g, T, m=1):
    """``l_{i,t}(x) = <g, x>`` (``g`` may also be a full ``(T, m, d)`` array)."""
    g = np.asarray(g, dtype=float)
    lin = np.broadcast_to(g, (T, m, g.shape[-1])).copy()
    return LossStream(np.zeros_like(lin), np.zeros((T, m)), 0.0, linear=lin, kind="linear")


def constant_stream(value, T, m, d):
    off = np.full((T, m), float(value))
    return LossStream(np.zeros((T, m, d)), np.zeros((T, m)), 0.0, offset=off, kind="constant")


def quadratic_stream(features, responses, lambda1=0.0):
    features = np.asarray(features, dtype=float)
    responses = np.asarray(responses, dtype=float)
    return LossStream(features, responses, float(lambda1), kind="quadratic")


def two_point_values(stream, t, X, delta, U, kset=None, strict=True):
    """Batched two-point feedback: ``l_{i,t}(X[i] +- delta U[i])`` for all nodes.

    Each node costs exactly two loss evaluations. Query points outside
    ``kset`` are counted, and raise :class:`FeasibilityError` when ``strict``.
    """
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    plus, minus = X + delta * U, X - delta * U
    bad = 0
    if kset is not None:
        bad = int(np.sum(~kset.contains(plus)) + np.sum(~kset.contains(minus)))
    stream.counter.add(2 * X.shape[0], bad)
    if bad and strict:
        rows = np.flatnonzero(~kset.contains(plus) | ~kset.contains(minus))
        raise FeasibilityError(f"round {t}: infeasible query points at nodes {rows.tolist()}")
    return stream.values(t, plus), stream.values(t, minus)


def two_point_oracle(stream, i, t, x, delta, u, kset=None, strict=True):
    """``(l_{i,t}(x + delta u), l_{i,t}(x - delta u))`` for a single node."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    plus, minus = x + delta * u, x - delta * u
    bad = 0
    if kset is not None:
        bad = int(not kset.contains(plus)) + int(not kset.contains(minus))
    stream.counter.add(2, bad)
    if bad and strict:
        raise FeasibilityError(f"round {t}, node {i}: infeasible query point")
    return stream.value(i, t, plus), stream.value(i, t, minus)


def lipschitz_bounds(stream, kset, reg, mirror, radius=None):
    """``(G_l, G_r)``: dual-norm gradient bounds of the losses and of ``r`` over the set.

    For a quadratic datum on a centred l2 ball of radius R the supremum of
    ``||(b b' + lambda1 I) x - z b + a||_2`` is ``(||b||^2 + lambda1) R + |z| ||b|| + ||a||``
    (exact when ``a = 0``). Non-Euclidean dual norms are bounded through
    ``||v||_* <= pbar_star ||v||_2``. ``radius`` overrides an unbounded set.
    """
    if kset.kind == "simplex":
        R = 1.0 * kset.scale  # the simplex sits in the unit l2 ball
    else:
        R = kset.effective_radius if radius is None else float(radius)
    if not np.isfinite(R):
        raise ConfigurationError("Lipschitz bounds need a bounded set or an explicit radius")
    bn = lp_norm(stream.features, 2)
    per = (bn**2 + stream.lambda1) * R + np.abs(stream.responses) * bn
    if stream.linear is not None:
        per = per + lp_norm(stream.linear, 2)
    g_l = float(np.max(per)) * mirror.pbar_star(stream.d) if per.size else 0.0
    if radius is not None and not kset.bounded:
        kset = type(kset).ball(R)
    g_r = reg.lipschitz(mirror, kset, stream.d)
    return g_l, g_r


def write_stream_csv(stream, path):
    """Columnar export: ``round, node, b_0 .. b_{d-1}, z``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        fh.write(f"# odcmd-stream v1 lambda1={stream.lambda1!r}\n")
        w.writerow(["round", "node", *[f"b_{k}" for k in range(stream.d)], "z"])
        for k in range(stream.T):
            for i in range(stream.m):
                w.writerow([k + 1, i, *map(repr, stream.features[k, i].tolist()),
                            repr(float(stream.responses[k, i]))])


def read_stream_csv(path):
    with open(path, newline="") as fh:
        header = fh.readline()
        if not header.startswith("# odcmd-stream v1"):
            raise ValueError(f"{path}: not an odcmd stream file")
        lambda1 = float(header.split("lambda1=")[1])
        rows = list(csv.reader(fh))[1:]
    data = np.array(rows, dtype=float)
    T, m = int(data[:, 0].max()), int(data[:, 1].max()) + 1
    d = data.shape[1] - 3
    features = np.empty((T, m, d))
    responses = np.empty((T, m))
    t_idx, i_idx = data[:, 0].astype(int) - 1, data[:, 1].astype(int)
    features[t_idx, i_idx] = data[:, 2:-1]
    responses[t_idx, i_idx] = data[:, -1]
    return LossStream(features, responses, lambda1, kind="regression")


def check_feasible(kset, X, what, t, tol=FEASIBILITY_TOL):
    ok = kset.contains(X, tol)
    if not np.all(ok):
        rows = np.flatnonzero(~np.atleast_1d(ok))
        raise FeasibilityError(f"round {t}: {what} infeasible at nodes {rows.tolist()}")
