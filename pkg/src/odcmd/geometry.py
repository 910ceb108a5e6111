"""Mirror maps, Bregman divergences, constraint sets and composite prox steps.

Every array-valued routine here treats the last axis as the coordinate axis,
so a stack of node iterates of shape ``(m, d)`` is processed row by row.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize
from scipy.special import xlogy

ENTROPIC_FLOOR = 1e-12
FEASIBILITY_TOL = 1e-9

MAP_KINDS = ("euclidean", "entropic", "pnorm")
SET_KINDS = ("ball", "simplex")
ERROR_KINDS = ("exact", "decaying", "fixed", "gap")


class ConfigurationError(ValueError):
    """Raised for unsupported or inconsistent combinations of components."""


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a mirror map."""


class ProxConvergenceError(RuntimeError):
    """The numeric prox solver ran out of budget before reaching ``tol``."""

    def __init__(self, message, gap):
        super().__init__(f"{message} (final gap estimate {gap:.3e})")
        self.gap = gap


def lp_norm(x, p, axis=-1):
    x = np.asarray(x, dtype=float)
    if np.isinf(p):
        return np.max(np.abs(x), axis=axis, initial=0.0)
    if p == 2:
        return np.sqrt(np.sum(x * x, axis=axis))
    if p == 1:
        return np.sum(np.abs(x), axis=axis)
    return np.sum(np.abs(x) ** p, axis=axis) ** (1.0 / p)


def conjugate_exponent(p):
    if p == 1:
        return math.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


def norm_equivalence(p, d):
    """Smallest ``c`` with ``||x||_p <= c ||x||_2`` on R^d."""
    if np.isinf(p):
        return 1.0
    return float(d) ** max(0.0, 1.0 / p - 0.5)


def pnorm_exponent_for_dimension(d):
    """The exponent ``ln d / (ln d - 1)``, i.e. dual exponent ``q = ln d``.

    Only meaningful for ``d >= e^2`` where it lands in ``(1, 2]``.
    """
    if d < math.e**2:
        raise ConfigurationError(f"ln(d) rule needs d >= e^2 (~7.39), got d={d}")
    q = math.log(d)
    return q / (q - 1.0)


@dataclass(frozen=True)
class MirrorMap:
    """A distance-generating function and the norm it is strongly convex in.

    ``euclidean``: 0.5 ||x||_2^2, 1-strongly convex in l2.
    ``entropic``: sum x log x, 1-strongly convex in l1 on the simplex.
    ``pnorm``: 0.5 ||x||_p^2 with p in (1, 2], (p-1)-strongly convex in lp.
    """

    kind: str = "euclidean"
    p: float = 2.0

    def __post_init__(self):
        if self.kind not in MAP_KINDS:
            raise ConfigurationError(f"unknown mirror map {self.kind!r}")
        if self.kind == "euclidean":
            object.__setattr__(self, "p", 2.0)
        elif self.kind == "entropic":
            object.__setattr__(self, "p", 1.0)
        elif not 1.0 < self.p <= 2.0:
            raise ConfigurationError(f"p-norm exponent must lie in (1, 2], got {self.p}")

    @classmethod
    def euclidean(cls):
        return cls("euclidean")

    @classmethod
    def entropic(cls):
        return cls("entropic")

    @classmethod
    def pnorm(cls, p):
        return cls("pnorm", float(p))

    @property
    def q(self):
        return conjugate_exponent(self.p)

    @property
    def is_euclidean(self):
        return self.kind == "euclidean" or (self.kind == "pnorm" and self.p == 2.0)

    @property
    def sigma_omega(self):
        return self.p - 1.0 if self.kind == "pnorm" else 1.0

    @property
    def g_omega(self):
        # grad of x log x and of 0.5||x||_p^2 (p < 2) is not Lipschitz near the boundary / axes
        return 1.0 if self.is_euclidean else math.inf

    def norm(self, x):
        return lp_norm(x, self.p)

    def dual_norm(self, x):
        return lp_norm(x, self.q)

    def pbar(self, d):
        return norm_equivalence(self.p, d)

    def pbar_star(self, d):
        return norm_equivalence(self.q, d)


def _check_entropic(x, name, strict):
    if strict and np.any(x <= 0):
        raise DomainError(f"entropic map needs strictly positive {name}")
    if np.any(x < 0):
        raise DomainError(f"entropic map needs nonnegative {name}")


def omega(mirror, x):
    x = np.asarray(x, dtype=float)
    if mirror.kind == "entropic":
        _check_entropic(x, "x", strict=False)
        return np.sum(xlogy(x, x), axis=-1)
    return 0.5 * mirror.norm(x) ** 2


def _power_map(x, r):
    # grad of 0.5||x||_r^2, computed on the normalized vector to avoid overflow
    n = lp_norm(x, r)
    n = np.asarray(n, dtype=float)[..., None]
    safe = np.where(n > 0, n, 1.0)
    out = np.sign(x) * (np.abs(x) / safe) ** (r - 1.0) * safe
    return np.where(n > 0, out, 0.0)


def link(mirror, x):
    """Gradient of the distance-generating function (primal -> dual)."""
    x = np.asarray(x, dtype=float)
    if mirror.is_euclidean:
        return x.copy()
    if mirror.kind == "entropic":
        _check_entropic(x, "x", strict=False)
        return np.log(np.maximum(x, ENTROPIC_FLOOR)) + 1.0
    return _power_map(x, mirror.p)


def inverse_link(mirror, v):
    """Inverse of :func:`link` (dual -> primal)."""
    v = np.asarray(v, dtype=float)
    if mirror.is_euclidean:
        return v.copy()
    if mirror.kind == "entropic":
        return np.exp(v - 1.0)
    return _power_map(v, mirror.q)


def bregman(mirror, x, y):
    """``V(x, y) = w(x) - w(y) - <grad w(y), x - y>``, clipped at zero for round-off."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if mirror.is_euclidean:
        return 0.5 * np.sum((x - y) ** 2, axis=-1)
    if mirror.kind == "entropic":
        _check_entropic(x, "x", strict=False)
        _check_entropic(y, "y", strict=True)
        # generalized KL; equals sum x log(x/y) when both sum to the same mass
        val = np.sum(xlogy(x, x) - xlogy(x, y) - x + y, axis=-1)
        return np.maximum(val, 0.0)
    val = omega(mirror, x) - omega(mirror, y) - np.sum(link(mirror, y) * (x - y), axis=-1)
    return np.maximum(val, 0.0)


def project_simplex(v, mass=1.0):
    """Euclidean projection of each row onto ``{z >= 0, sum z = mass}``."""
    v = np.asarray(v, dtype=float)
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - mass
    k = np.arange(1, v.shape[-1] + 1)
    cond = u - css / k > 0
    r = v.shape[-1] - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, r[..., None], axis=-1) / (r[..., None] + 1.0)
    return np.maximum(v - theta, 0.0)


@dataclass(frozen=True)
class ConstraintSet:
    """Feasible set: a centred Euclidean ball or the probability simplex.

    ``shrink`` is the factor xi of the shrunk copy ``(1 - xi) K``; a ball with
    ``radius=inf`` stands for all of R^d.
    """

    kind: str = "ball"
    radius: float = 1.0
    inner_radius: float | None = None
    shrink: float = 0.0

    def __post_init__(self):
        if self.kind not in SET_KINDS:
            raise ConfigurationError(f"unknown constraint set {self.kind!r}")
        if not 0.0 <= self.shrink < 1.0:
            raise ConfigurationError(f"shrinkage must lie in [0, 1), got {self.shrink}")
        if self.kind == "ball":
            if not self.radius > 0:
                raise ConfigurationError("ball radius must be positive")
            if self.inner_radius is None:
                object.__setattr__(self, "inner_radius", float(self.radius))
            if self.inner_radius > self.radius:
                raise ConfigurationError("inner radius exceeds outer radius")
        else:
            object.__setattr__(self, "radius", 1.0)
            object.__setattr__(self, "inner_radius", 0.0)

    @classmethod
    def ball(cls, radius=1.0, inner_radius=None):
        return cls("ball", float(radius), inner_radius)

    @classmethod
    def whole_space(cls):
        return cls("ball", math.inf)

    @classmethod
    def simplex(cls):
        return cls("simplex")

    @property
    def scale(self):
        return 1.0 - self.shrink

    @property
    def bounded(self):
        return self.kind == "simplex" or np.isfinite(self.radius)

    @property
    def effective_radius(self):
        return self.scale * self.radius

    def shrunk(self, xi):
        """The set ``(1 - xi) K``; shrinking twice composes the factors."""
        return replace(self, shrink=1.0 - (1.0 - self.shrink) * (1.0 - xi))

    def contains(self, x, tol=FEASIBILITY_TOL):
        x = np.asarray(x, dtype=float)
        if self.kind == "ball":
            return lp_norm(x, 2) <= self.effective_radius + tol
        return np.all(x >= -tol, axis=-1) & (np.abs(np.sum(x, axis=-1) - self.scale) <= tol)

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "simplex":
            return project_simplex(x, self.scale)
        r = self.effective_radius
        if not np.isfinite(r):
            return x.copy()
        n = lp_norm(x, 2)[..., None]
        return x * (r / np.maximum(n, r))

    def diameter(self, mirror, d):
        """Diameter ``D_K`` in the norm of ``mirror``."""
        if self.kind == "simplex":
            p = mirror.p
            return self.scale * (2.0 ** (1.0 / p) if np.isfinite(p) else 1.0)
        return 2.0 * self.effective_radius * mirror.pbar(d)

    def minimizer_of_omega(self, mirror, d):
        """argmin of the distance-generating function over the set."""
        if self.kind == "simplex":
            return np.full(d, self.scale / d)
        if mirror.kind == "entropic":
            raise ConfigurationError("entropic map is only defined on the simplex")
        return np.zeros(d)


@dataclass(frozen=True)
class Regularizer:
    """``r(x) = (lambda1 / 2) ||x||_2^2 + lambda2 ||x||_1``."""

    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigurationError("regularizer weights must be nonnegative")

    @property
    def kind(self):
        if self.lambda1 == 0 and self.lambda2 == 0:
            return "zero"
        return "l1" if self.lambda1 == 0 else "elastic"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.lambda1 * np.sum(x * x, axis=-1) + self.lambda2 * np.sum(np.abs(x), axis=-1)

    def subgradient(self, x, tie=0.0):
        x = np.asarray(x, dtype=float)
        s = np.where(x != 0, np.sign(x), tie)
        return self.lambda1 * x + self.lambda2 * s

    def lipschitz(self, mirror, kset, d):
        """Bound on the dual norm of subgradients of r over the set."""
        g = self.lambda2 * lp_norm(np.ones(d), mirror.q)
        if self.lambda1 > 0:
            if kset.kind == "simplex":
                g += self.lambda1 * kset.scale * lp_norm(np.ones(1), mirror.q)
            elif not kset.bounded:
                return math.inf
            else:
                g += self.lambda1 * kset.effective_radius * mirror.pbar_star(d)
        return float(g)

    def scaled(self, c):
        return Regularizer(self.lambda1 * c, self.lambda2 * c)


def soft_threshold(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def prox_objective(mirror, reg, x, g, eta, z):
    """``<g, z> + r(z) + V(z, x) / eta`` row by row."""
    z = np.asarray(z, dtype=float)
    return np.sum(np.asarray(g) * z, axis=-1) + reg.value(z) + bregman(mirror, z, x) / eta


def supports_exact(mirror, kset, reg):
    """Whether :func:`prox_exact` has a closed form for this triple."""
    if mirror.is_euclidean:
        return True
    if mirror.kind == "entropic":
        return kset.kind == "simplex" and reg.lambda1 == 0
    return kset.kind == "ball" and not np.isfinite(kset.radius) and reg.lambda1 == 0


def prox_exact(mirror, kset, reg, x, g, eta, allow_numeric=False):
    """Exact minimizer of ``<g, z> + r(z) + V(z, x)/eta`` over the set.

    Closed forms cover (euclidean, ball or simplex, any regularizer),
    (entropic, simplex, zero or l1) and (pnorm, R^d, zero or l1). Anything
    else goes through :func:`prox_numeric` when ``allow_numeric`` is set.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    if not supports_exact(mirror, kset, reg):
        if not allow_numeric:
            raise ConfigurationError(
                f"no closed-form prox for ({mirror.kind}, {kset.kind}, {reg.kind}); "
                "enable the numeric fallback"
            )
        flat_x = x.reshape(-1, x.shape[-1])
        flat_g = np.broadcast_to(g, x.shape).reshape(-1, x.shape[-1])
        out = np.array([prox_numeric(mirror, kset, reg, xi, gi, eta) for xi, gi in zip(flat_x, flat_g)])
        return out.reshape(x.shape)

    if mirror.is_euclidean:
        w = x - eta * g
        if kset.kind == "simplex":
            # the l1 term is constant on the simplex
            return kset.project(w / (1.0 + eta * reg.lambda1))
        w = soft_threshold(w, eta * reg.lambda2) / (1.0 + eta * reg.lambda1)
        return kset.project(w)

    if mirror.kind == "entropic":
        logits = np.log(np.maximum(x, ENTROPIC_FLOOR)) - eta * g
        logits -= np.max(logits, axis=-1, keepdims=True)
        w = np.exp(logits)
        w = w / np.sum(w, axis=-1, keepdims=True)
        w = np.maximum(w, ENTROPIC_FLOOR)
        return kset.scale * w / np.sum(w, axis=-1, keepdims=True)

    theta = soft_threshold(link(mirror, x) - eta * g, eta * reg.lambda2)
    return inverse_link(mirror, theta)


def _grid_prox(mirror, kset, reg, x, g, eta, tol):
    d = x.shape[0]

    def objective(points):
        return prox_objective(mirror, reg, x, g, eta, points)

    if kset.kind == "simplex":
        c = kset.scale
        lo, hi = 0.0, c
        best, h = None, 1e-2 * c
        center = c / 2
        while True:
            s = np.clip(np.arange(center - 50 * h, center + 50 * h + h / 2, h), lo, hi)
            s = np.unique(np.concatenate([s, [lo, hi]])) if best is None else s
            pts = np.stack([s, c - s], axis=-1) if d == 2 else np.full((len(s), 1), c)
            if mirror.kind == "entropic":
                pts = np.maximum(pts, 0.0)
            vals = objective(pts)
            k = int(np.argmin(vals))
            best, center = pts[k], s[k]
            if h < tol:
                return best
            h /= 20.0

    r = kset.effective_radius
    h = 1e-2 * r
    center = np.zeros(d)
    first = True
    while True:
        span = r if first else 50 * h
        n = int(round(span / h))
        ax = np.arange(-n, n + 1) * h
        grids = np.meshgrid(*([ax] * d), indexing="ij")
        pts = center + np.stack([gr.ravel() for gr in grids], axis=-1)
        pts = kset.project(pts)
        if first:
            pts = np.vstack([pts, np.zeros(d)])
        vals = objective(pts)
        k = int(np.argmin(vals))
        center = pts[k]
        if h < tol:
            return center
        first = False
        h /= 20.0 if d == 1 else 10.0


def _slsqp_prox(mirror, kset, reg, x, g, eta, tol):
    d = x.shape[0]
    lam1, lam2 = reg.lambda1, reg.lambda2
    split = lam2 > 0 and kset.kind == "ball"
    grad_x = link(mirror, x)

    def smooth(z):
        val = g @ z + 0.5 * lam1 * z @ z + bregman(mirror, z, x) / eta
        grad = g + lam1 * z + (link(mirror, z) - grad_x) / eta
        return val, grad

    if split:
        # z = u - v with u, v >= 0 turns l1 into a linear term
        def fun(w):
            u, v = w[:d], w[d:]
            val, grad = smooth(u - v)
            return val + lam2 * np.sum(w), np.concatenate([grad + lam2, -grad + lam2])

        w0 = np.concatenate([np.maximum(x, 0.0), np.maximum(-x, 0.0)])
        bounds = [(0.0, None)] * (2 * d)
        cons = []
        if np.isfinite(kset.radius):
            r2 = kset.effective_radius**2
            cons.append(
                {
                    "type": "ineq",
                    "fun": lambda w: r2 - np.sum((w[:d] - w[d:]) ** 2),
                    "jac": lambda w: np.concatenate([-2 * (w[:d] - w[d:]), 2 * (w[:d] - w[d:])]),
                }
            )
        res = optimize.minimize(fun, w0, jac=True, method="SLSQP", bounds=bounds,
                                constraints=cons, options={"ftol": 1e-15, "maxiter": 2000})
        z = res.x[:d] - res.x[d:]
    else:
        def fun(z):
            val, grad = smooth(z)
            if lam2 > 0:
                val = val + lam2 * np.sum(np.abs(z))
                grad = grad + lam2 * np.sign(z)
            return val, grad

        cons, bounds = [], None
        if kset.kind == "simplex":
            c = kset.scale
            floor = ENTROPIC_FLOOR if mirror.kind == "entropic" else 0.0
            bounds = [(floor, c)] * d
            cons.append({"type": "eq", "fun": lambda z: np.sum(z) - c, "jac": lambda z: np.ones(d)})
            z0 = np.full(d, c / d)
        else:
            z0 = kset.project(x)
            if np.isfinite(kset.radius):
                r2 = kset.effective_radius**2
                cons.append({"type": "ineq", "fun": lambda z: r2 - z @ z, "jac": lambda z: -2 * z})
        res = optimize.minimize(fun, z0, jac=True, method="SLSQP", bounds=bounds,
                                constraints=cons, options={"ftol": 1e-15, "maxiter": 2000})
        z = res.x
    z = kset.project(z) if kset.kind == "ball" else z
    if mirror.kind == "entropic":
        z = np.maximum(z, ENTROPIC_FLOOR)
        z = kset.scale * z / z.sum()
    if not res.success and res.status not in (8, 9):
        raise ProxConvergenceError(f"SLSQP failed: {res.message}", abs(res.fun - fun(z)[0]))
    return z


def _subgradient_prox(mirror, kset, reg, x, g, eta, tol, max_iter):
    # strongly convex with modulus sigma/eta, so steps 2/(mu (k+1)) with weighted averaging
    mu = mirror.sigma_omega / eta
    grad_x = link(mirror, x)
    z = kset.project(x) if mirror.kind != "entropic" else x.copy()
    avg = z.copy()
    weight = 0.0
    best, best_val = z.copy(), float(prox_objective(mirror, reg, x, g, eta, z))
    history = [best_val]
    for k in range(1, max_iter + 1):
        sub = g + reg.subgradient(z) + (link(mirror, z) - grad_x) / eta
        z = z - 2.0 / (mu * (k + 1)) * sub
        z = kset.project(z)
        if mirror.kind == "entropic":
            z = np.maximum(z, ENTROPIC_FLOOR)
            z = kset.scale * z / z.sum()
        weight += k
        avg = avg + (k / weight) * (z - avg)
        for cand in (z, avg):
            val = float(prox_objective(mirror, reg, x, g, eta, cand))
            if val < best_val:
                best, best_val = cand.copy(), val
        if k % 1000 == 0:
            history.append(best_val)
            if len(history) > 2 and history[-3] - best_val < tol:
                return best
    raise ProxConvergenceError("subgradient budget exhausted", history[-2] - history[-1])


def prox_numeric(mirror, kset, reg, x, g, eta, tol=1e-9, method="auto", max_iter=50_000):
    """Numerical oracle for the composite prox step on a single vector.

    ``method``: ``"grid"`` (nested grid refinement, d <= 2 and bounded sets),
    ``"slsqp"`` (smooth reformulation handed to SciPy), ``"subgradient"``
    (projected subgradient with diminishing steps) or ``"auto"`` which picks
    grid refinement when it applies and SLSQP otherwise.
    """
    if eta <= 0 or tol <= 0:
        raise ValueError("eta and tol must be positive")
    x = np.asarray(x, dtype=float)
    g = np.broadcast_to(np.asarray(g, dtype=float), x.shape)
    if x.ndim != 1:
        raise ValueError("prox_numeric works on a single vector")
    if mirror.kind == "entropic" and kset.kind != "simplex":
        raise ConfigurationError("entropic map is only defined on the simplex")
    if method == "auto":
        method = "grid" if x.shape[0] <= 2 and kset.bounded else "slsqp"
    if method == "grid":
        if x.shape[0] > 2 or not kset.bounded:
            raise ConfigurationError("grid refinement needs d <= 2 and a bounded set")
        return _grid_prox(mirror, kset, reg, x, g, eta, min(tol, 1e-8))
    if method == "slsqp":
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="Values in x were outside bounds")
            return _slsqp_prox(mirror, kset, reg, x, g, eta, tol)
    if method == "subgradient":
        return _subgradient_prox(mirror, kset, reg, x, g, eta, tol, max_iter)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class ErrorModel:
    """How far the computed prox point is allowed to sit from the exact one.

    ``decaying``: y = y* + (c_rho / t^1.5) 1, re-projected.
    ``fixed``: y = y* + rho 1, re-projected.
    ``gap``: like ``decaying`` but the shift is halved until the objective
    gap is at most c_rho / t^1.5, so the approximate-solution property holds.
    """

    kind: str = "exact"
    c_rho: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise ConfigurationError(f"unknown error model {self.kind!r}")
        if self.c_rho < 0 or self.rho < 0:
            raise ConfigurationError("error magnitudes must be nonnegative")

    @classmethod
    def exact(cls):
        return cls("exact")

    @classmethod
    def decaying(cls, c_rho):
        return cls("decaying", c_rho=float(c_rho))

    @classmethod
    def fixed(cls, rho):
        return cls("fixed", rho=float(rho))

    @classmethod
    def fixed_for_horizon(cls, c_rho, T):
        return cls("fixed", rho=float(c_rho) / T**1.5)

    @classmethod
    def bounded_gap(cls, c_rho):
        return cls("gap", c_rho=float(c_rho))

    def rho_at(self, t):
        if self.kind == "exact":
            return 0.0
        if self.kind == "fixed":
            return self.rho
        return self.c_rho / t**1.5

    def schedule(self, T):
        if self.kind == "exact":
            return np.zeros(T)
        if self.kind == "fixed":
            return np.full(T, self.rho)
        return self.c_rho / np.arange(1, T + 1, dtype=float) ** 1.5


def perturb(mirror, kset, reg, x, g, eta, y_star, error, t):
    """Apply ``error`` at round ``t`` to exact prox points; returns ``(y, gap)``."""
    rho = error.rho_at(t)
    if error.kind == "exact" or rho == 0:
        return y_star, np.zeros(y_star.shape[:-1])

    def shifted(s):
        y = kset.project(y_star + s[..., None])
        if mirror.kind == "entropic":
            y = np.maximum(y, ENTROPIC_FLOOR)
            y = kset.scale * y / np.sum(y, axis=-1, keepdims=True)
        return y

    base = prox_objective(mirror, reg, x, g, eta, y_star)
    s = np.full(y_star.shape[:-1], rho, dtype=float)
    y = shifted(s)
    gap = prox_objective(mirror, reg, x, g, eta, y) - base
    if error.kind == "gap":
        for _ in range(200):
            over = gap > rho
            if not np.any(over):
                break
            s = np.where(over, 0.5 * s, s)
            y = shifted(s)
            gap = prox_objective(mirror, reg, x, g, eta, y) - base
        else:
            y, gap = np.where((gap > rho)[..., None], y_star, y), np.where(gap > rho, 0.0, gap)
    return y, gap


def prox_approx(mirror, kset, reg, x, g, eta, error, t, allow_numeric=False):
    """A rho_t-approximate prox point and its realized objective gap."""
    if t < 1:
        raise ValueError("rounds are numbered from 1")
    y_star = prox_exact(mirror, kset, reg, x, g, eta, allow_numeric=allow_numeric)
    return perturb(mirror, kset, reg, np.asarray(x, float), np.asarray(g, float), eta, y_star, error, t)
