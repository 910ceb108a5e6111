"""Regret evaluation against the best fixed decision, and experiment orchestration."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import config as cfgmod
from .algorithms import (
    AlgorithmConfig,
    BoundConstants,
    optimal_step_constant,
    run_banodcmd,
    run_odcmd,
    run_subgradient_baseline,
    theorem_bounds,
)
from .geometry import (
    ConfigurationError,
    ConstraintSet,
    ErrorModel,
    MirrorMap,
    Regularizer,
    bregman,
    pnorm_exponent_for_dimension,
    prox_exact,
)
from .network import build_schedule
from .problems import generate_regression_stream, lipschitz_bounds

CSV_VERSION = "odcmd-regret-csv v1"
RECORD_CSV_VERSION = "odcmd-run-csv v1"
SUMMARY_VERSION = "odcmd-summary v1"


class ComparatorError(RuntimeError):
    def __init__(self, message, gap):
        super().__init__(f"{message} (best certified gap {gap:.3e})")
        self.gap = gap


@dataclass(frozen=True)
class Comparator:
    """Best fixed decision in hindsight.

    ``gap`` certifies ``objective - min <= gap``; ``objective`` is the
    aggregate composite loss ``sum_t sum_j (l_{j,t}(x) + r(x))``.
    """

    x: np.ndarray
    gap: float
    objective: float
    T: int
    m: int
    iterations: int = 0


def composite_total(stream, reg, x):
    return stream.total_loss(x) + stream.T * stream.m * float(reg.value(x))


def solve_comparator(stream, kset, reg, tol=1e-9, max_iter=100_000):
    """Minimize the aggregate composite objective over the set with restarted FISTA.

    Stops once the certified gap is below ``tol * max(1, |objective|)``. The
    certificate comes from the subgradient ``L (x - x+) - grad f(x) + grad f(x+)``
    of the objective at ``x+``, turned into a gap bound through strong convexity
    (or through the set diameter when the quadratic is singular).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    euclid = MirrorMap.euclidean()
    n = stream.T * stream.m
    Q, c = stream.aggregate_quadratic()
    big = reg.scaled(n)
    eig = np.linalg.eigvalsh(Q)
    L = max(float(eig[-1]), 1e-12)
    mu = float(eig[0]) + big.lambda1
    diam = kset.diameter(euclid, stream.d)

    def grad(x):
        return Q @ x - c

    def step(x):
        return prox_exact(euclid, kset, big, x, grad(x), 1.0 / L)

    def objective(x):
        return composite_total(stream, reg, x)

    def certificate(x, xp):
        s = L * (x - xp) - grad(x) + grad(xp)
        ns = float(np.sqrt(s @ s))
        if mu > 1e-12 * L:
            return ns * ns / (2.0 * mu)
        return ns * diam

    x = kset.project(np.zeros(stream.d)) if kset.kind == "ball" else kset.minimizer_of_omega(euclid, stream.d)
    y, theta = x.copy(), 1.0
    best_gap = math.inf
    prev = objective(x)
    for it in range(1, max_iter + 1):
        xn = step(y)
        fn = objective(xn)
        if fn > prev:  # function-value restart
            y, theta = x.copy(), 1.0
            xn = step(y)
            fn = objective(xn)
        th = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        y = xn + ((theta - 1.0) / th) * (xn - x)
        x, theta, prev = xn, th, fn
        if it % 5 == 0 or it < 5:
            xp = step(x)
            gap = certificate(x, xp)
            fp = objective(xp)
            best_gap = min(best_gap, gap)
            if gap <= tol * max(1.0, abs(fp)):
                return Comparator(xp, gap, fp, stream.T, stream.m, it)
    raise ComparatorError("comparator budget exhausted", best_gap)


@dataclass
class RegretReport:
    per_node: np.ndarray
    comparator: Comparator
    disagreement: np.ndarray  # max_i ||x_{i,t} - xbar_t||

    @property
    def max(self):
        return float(np.max(self.per_node))

    @property
    def min(self):
        return float(np.min(self.per_node))


def average_regret(record, comparator):
    """Average regularized regret of every node against ``comparator``."""
    if comparator.x.shape[0] != record.d or comparator.T != record.T or comparator.m != record.m:
        raise ValueError("comparator does not match the run's (T, m, d)")
    totals = record.composite_losses().sum(axis=0)
    return RegretReport((totals - comparator.objective) / record.T, comparator, record.max_disagreement)


def disagreement_curve(record):
    """``sum_i ||x_{i,t} - xbar_t||`` for every round."""
    return record.disagreement.copy()


def realized_constants(stream, schedule, mirror, kset, reg, comparator, initial, xi=0.0, radius=None):
    """Bound constants measured on the actual data, network and comparator."""
    g_l, g_r = lipschitz_bounds(stream, kset, reg, mirror, radius=radius)
    cc = schedule.constants()
    bounded = kset if kset.bounded else ConstraintSet.ball(radius)
    return BoundConstants(
        G_l=g_l, G_r=g_r, sigma=mirror.sigma_omega, G_omega=mirror.g_omega,
        D_K=bounded.diameter(mirror, stream.d), theta=cc.theta, kappa=cc.kappa,
        m=stream.m, d=stream.d, pbar=mirror.pbar(stream.d), pbar_star=mirror.pbar_star(stream.d),
        R_upper=bounded.radius, R_lower=bounded.inner_radius,
        init_norm_sum=float(np.sum(mirror.norm(initial))),
        init_bregman_sum=float(np.sum(bregman(mirror, (1.0 - xi) * comparator.x, initial))),
    )


# ---------------------------------------------------------------- orchestration


@dataclass
class CellResult:
    params: dict
    T: int
    report: RegretReport
    record: object
    constants: dict = field(default_factory=dict)
    bound: float | None = None


def components(config, T):
    """Build every ingredient of one run from an :class:`ExperimentConfig`."""
    seeds = cfgmod.derived_seeds(config)
    d = config.stream.d
    stream = generate_regression_stream(config.network.m, d, T, seeds["stream"], config.regularizer.lambda1)
    schedule = build_schedule(config.network.kind, config.network.m, seed=seeds["network"],
                              edge_prob=config.network.edge_prob)
    if config.geometry.map == "pnorm":
        p = config.geometry.p
        mirror = MirrorMap.pnorm(pnorm_exponent_for_dimension(d) if p in (None, "auto") else float(p))
    else:
        mirror = MirrorMap(config.geometry.map)
    if config.set.kind == "simplex":
        kset = ConstraintSet.simplex()
    else:
        radius = math.inf if config.set.radius is None else config.set.radius
        kset = ConstraintSet.ball(radius, config.set.inner_radius)
    reg = Regularizer(0.0, config.regularizer.lambda2)
    return stream, schedule, mirror, kset, reg, seeds


def error_model(config, T):
    e = config.error
    if e.kind == "exact":
        return ErrorModel.exact()
    if e.kind == "decaying":
        return ErrorModel.decaying(e.c_rho)
    if e.kind == "fixed":
        return ErrorModel.fixed(e.rho)
    if e.kind == "horizon":
        return ErrorModel.fixed_for_horizon(e.c_rho, T)
    return ErrorModel.bounded_gap(e.c_rho)


def algorithm_config(config, T, mirror, kset, d, constants=None):
    step = config.step
    common = dict(error=error_model(config, T), strict=config.strict, tie=config.baseline_tie,
                  allow_numeric=config.allow_numeric_prox)
    if config.algorithm == "banodcmd":
        c_eta = step.c_eta
        base = AlgorithmConfig.bandit_tuned(T, d, mirror.pbar(d), mirror.pbar_star(d),
                                          kset.inner_radius or 1.0, c_eta=1.0,
                                          c_delta=config.bandit.c_delta, **common)
        eta = base.eta * c_eta
        if step.rule == "sqrt_T":
            eta = c_eta / math.sqrt(T)
        elif step.rule == "d_sqrt_T":
            eta = c_eta / (d * math.sqrt(T))
        xi = base.xi if config.bandit.xi is None else config.bandit.xi
        return AlgorithmConfig(eta=eta, delta=base.delta, xi=xi, **common)
    c_eta = step.c_eta
    if step.rule == "optimal":
        if constants is None:
            raise ConfigurationError("the optimal step rule needs realized constants")
        c_eta = optimal_step_constant(constants)
    if step.rule == "d_sqrt_T":
        return AlgorithmConfig(eta=c_eta / (d * math.sqrt(T)), **common)
    if step.rule == "bandit_tuned":
        return AlgorithmConfig(eta=c_eta / (mirror.pbar(d) * mirror.pbar_star(d) * d * math.sqrt(T)), **common)
    return AlgorithmConfig.full_info_default(T, c_eta=c_eta, **common)


def run_cell(config, T, params=None):
    """One seeded run at horizon ``T`` plus its regret report and realized bound."""
    stream, schedule, mirror, kset, reg, seeds = components(config, T)
    comparator = solve_comparator(stream, kset, reg, tol=config.comparator_tol)
    xi_probe = 0.0
    init = np.tile(kset.minimizer_of_omega(mirror, stream.d), (stream.m, 1))
    radius = config.set.bound_radius
    constants = None
    if kset.bounded or radius is not None:
        probe = algorithm_config(config, T, mirror, kset, stream.d, constants=None) \
            if config.step.rule != "optimal" else None
        xi_probe = probe.xi if probe is not None else 0.0
        constants = realized_constants(stream, schedule, mirror, kset, reg, comparator, init,
                                       xi=xi_probe, radius=radius)
    alg = algorithm_config(config, T, mirror, kset, stream.d, constants)
    if config.algorithm == "odcmd":
        record = run_odcmd(stream, schedule, mirror, kset, reg, alg, T)
    elif config.algorithm == "banodcmd":
        record = run_banodcmd(stream, schedule, mirror, kset, reg, alg, T, seeds["directions"])
    else:
        record = run_subgradient_baseline(stream, schedule, kset, reg, alg, T, mirror=mirror)
    record.seeds.update(seeds)
    report = average_regret(record, comparator)
    info = {"zeta": schedule.zeta, "B": schedule.window, "eta": alg.eta, "delta": alg.delta, "xi": alg.xi}
    bound = None
    if constants is not None:
        info.update(G_l=constants.G_l, G_r=constants.G_r, theta=constants.theta, kappa=constants.kappa)
        bound = theorem_bounds(alg, constants, T, bandit=config.algorithm == "banodcmd")
    else:
        info["bound_note"] = "unbounded set without bound_radius; theorem bound not evaluated"
    record.constants.update(info)
    return CellResult(dict(params or {}), T, report, record, info, bound)


def expand_sweep(sweep):
    """Cells of a sweep: listed ``cases`` crossed with the cartesian ``grid``."""
    cases = list(sweep.cases) or [{}]
    keys = sorted(sweep.grid)
    grid = [dict(zip(keys, vals)) for vals in itertools.product(*(sweep.grid[k] for k in keys))] or [{}]
    return [{**c, **g} for c in cases for g in grid]


def _cell_job(args):
    base_dict, params, T = args
    config = cfgmod.ExperimentConfig.from_dict(base_dict).with_overrides(params)
    result = run_cell(config, T, params)
    if result.record.iterates is not None:
        result.record.iterates = None  # keep inter-process payloads small
    return result


def sweep(base, cells=None, threads=1):
    """Run every (cell, T) combination; each T is a fresh run.

    ``cells`` defaults to the config's own sweep block. Results come back in
    cell-major, T-minor order regardless of ``threads``.
    """
    cells = expand_sweep(base.sweep) if cells is None else cells
    for params in cells:
        base.with_overrides(params)  # validates paths before anything runs
    jobs = []
    for params in cells:
        cfg = base.with_overrides(params)
        jobs.extend((base.to_dict(), params, T) for T in cfg.stream.T)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_cell_job, jobs))
    return [_cell_job(j) for j in jobs]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def regret_csv(results):
    """CSV text: sweep params..., T, node, avg_regret (one header comment line first)."""
    keys = sorted({k for r in results for k in r.params})
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*keys, "T", "node", "avg_regret"])
    for r in results:
        for i, v in enumerate(r.report.per_node):
            w.writerow([*(_fmt(r.params.get(k, "")) for k in keys), r.T, i, repr(float(v))])
    return buf.getvalue()


def _plain(v):
    """JSON-safe copy: numpy scalars become floats, non-finite floats become null."""
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def summary_json(results):
    """Per cell: max/min regret, comparator gap, realized constants, bound (null if infinite)."""
    cells = []
    for r in results:
        cells.append({
            "params": r.params,
            "T": r.T,
            "max_regret": r.report.max,
            "min_regret": r.report.min,
            "comparator_gap": r.report.comparator.gap,
            "theorem_bound": r.bound,
            "constants": r.constants,
        })
    return json.dumps(_plain({"version": SUMMARY_VERSION, "cells": cells}), indent=2, sort_keys=True)


def record_csv(record):
    """Per-round, per-node rows: t, node, loss, regularizer, disagreement to the node average."""
    buf = io.StringIO()
    buf.write(f"# {RECORD_CSV_VERSION} algorithm={record.algorithm}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "node", "loss", "regularizer", "disagreement"])
    spread = record.spread
    for k in range(record.T):
        for i in range(record.m):
            w.writerow([k + 1, i, repr(float(record.losses[k, i])), repr(float(record.reg_values[k, i])),
                        repr(float(spread[k, i]))])
    return buf.getvalue()


def curve_table(results):
    """Group results into curves keyed by their sweep parameters."""
    curves = {}
    for r in results:
        key = json.dumps(r.params, sort_keys=True)
        curves.setdefault(key, []).append((r.T, r.report.max, r.report.min))
    return curves
