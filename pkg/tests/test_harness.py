from __future__ import annotations

import json

import numpy as np
import pytest

from odcmd.algorithms import AlgorithmConfig, run_odcmd
from odcmd.config import ExperimentConfig, SweepConfig
from odcmd.geometry import ConfigurationError, ConstraintSet, MirrorMap, Regularizer
from odcmd.harness import (
    CSV_VERSION,
    ComparatorError,
    average_regret,
    composite_total,
    curve_table,
    disagreement_curve,
    expand_sweep,
    record_csv,
    regret_csv,
    run_cell,
    solve_comparator,
    summary_json,
    sweep,
)
from odcmd.network import build_schedule
from odcmd.problems import generate_regression_stream, quadratic_stream

E = MirrorMap.euclidean()
BALL = ConstraintSet.ball(1.0)


def _grid_minimize(f, d, radius, rounds=6):
    center, half = np.zeros(d), radius
    for _ in range(rounds):
        axes = [np.linspace(c - half, c + half, 41) for c in center]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        pts = pts[np.linalg.norm(pts, axis=1) <= radius]
        vals = np.array([f(p) for p in pts])
        center = pts[np.argmin(vals)]
        half /= 8
    return center, float(vals.min())


def test_comparator_single_datum():
    s = quadratic_stream([[[1.0, 0.0]]], [[1.0]])
    comp = solve_comparator(s, BALL, Regularizer())
    assert np.allclose(comp.x, [1.0, 0.0], atol=1e-6)
    x, _ = _grid_minimize(lambda p: composite_total(s, Regularizer(), p), 2, 1.0)
    assert np.allclose(comp.x, x, atol=1e-4)


def test_comparator_large_l1_gives_zero():
    s = generate_regression_stream(2, 4, 5, seed=0)
    Q, c = s.aggregate_quadratic()
    lam = float(np.max(np.abs(c))) / (s.T * s.m) + 1.0
    comp = solve_comparator(s, BALL, Regularizer(0, lam))
    assert np.allclose(comp.x, 0, atol=1e-12)


def test_comparator_matches_grid_refinement():
    s = generate_regression_stream(2, 3, 5, seed=1, lambda1=0.3)
    reg = Regularizer(0, 0.2)
    comp = solve_comparator(s, BALL, reg)
    x, v = _grid_minimize(lambda p: composite_total(s, reg, p), 3, 1.0)
    assert comp.objective <= v + 1e-9 * max(1.0, abs(v))
    assert np.linalg.norm(comp.x - x) <= 1e-4
    assert comp.gap <= 1e-9 * max(1.0, abs(comp.objective))


def test_comparator_certificate_is_first_order_residual():
    s = generate_regression_stream(5, 10, 40, seed=2, lambda1=1.0)
    reg = Regularizer(0, 0.1)
    comp = solve_comparator(s, BALL, reg)
    Q, c = s.aggregate_quadratic()
    n = s.T * s.m
    grad = Q @ comp.x - c
    rng = np.random.default_rng(0)
    for z in BALL.project(rng.normal(size=(500, 10)) * 3):
        d = z - comp.x
        sub = np.where(comp.x != 0, np.sign(comp.x), np.sign(d)) * reg.lambda2 * n
        assert (grad + sub) @ d >= -1e-6 * max(1.0, comp.objective)


def test_comparator_budget_error():
    s = generate_regression_stream(3, 10, 50, seed=2)
    with pytest.raises(ComparatorError) as info:
        solve_comparator(s, BALL, Regularizer(0, 0.1), tol=1e-300, max_iter=20)
    assert info.value.gap > 0
    with pytest.raises(ValueError):
        solve_comparator(s, BALL, Regularizer(), tol=0)


def test_regret_is_zero_at_the_comparator():
    # z = 0 makes the origin optimal and stationary, so iterates never move
    feats = np.random.default_rng(1).uniform(-1, 1, size=(20, 3, 4))
    s = quadratic_stream(feats, np.zeros((20, 3)), lambda1=1.0)
    reg = Regularizer(0, 0.1)
    rec = run_odcmd(s, build_schedule("ring", 3), E, BALL, reg, AlgorithmConfig(eta=0.1), 20)
    rep = average_regret(rec, solve_comparator(s, BALL, reg))
    assert np.allclose(rep.per_node, 0, atol=1e-12)
    assert np.all(disagreement_curve(rec) == 0)


def test_regret_definition_single_round():
    s = generate_regression_stream(1, 3, 1, seed=4)
    reg = Regularizer(0, 0.1)
    rec = run_odcmd(s, build_schedule("ring", 1), E, BALL, reg, AlgorithmConfig(eta=0.1), 1)
    comp = solve_comparator(s, BALL, reg)
    x1 = rec.iterates[0, 0]
    expect = s.value(0, 1, x1) + reg.value(x1) - (s.value(0, 1, comp.x) + reg.value(comp.x))
    assert average_regret(rec, comp).per_node[0] == pytest.approx(expect, abs=1e-12)


def test_regret_report_invariants_and_mismatch():
    s = generate_regression_stream(6, 5, 100, seed=5)
    reg = Regularizer(0, 0.1)
    rec = run_odcmd(s, build_schedule("ring", 6), E, BALL, reg, AlgorithmConfig.full_info_default(100), 100)
    comp = solve_comparator(s, BALL, reg)
    rep = average_regret(rec, comp)
    assert rep.max >= rep.min
    assert np.all(rep.per_node >= -comp.gap * s.m)
    other = solve_comparator(s.prefix(50), BALL, reg)
    with pytest.raises(ValueError):
        average_regret(rec, other)


def test_expand_sweep_cases_and_grid():
    sw = SweepConfig(cases=[{"algorithm": "odcmd"}, {"algorithm": "subgradient_baseline"}],
                     grid={"network.m": [10, 20], "stream.d": [5]})
    cells = expand_sweep(sw)
    assert len(cells) == 4
    assert cells[0] == {"algorithm": "odcmd", "network.m": 10, "stream.d": 5}
    assert expand_sweep(SweepConfig()) == [{}]


def _small(**over):
    base = {"network.m": 6, "stream.T": [50, 100], "stream.d": 4}
    base.update(over)
    return ExperimentConfig().with_overrides(base)


def test_sweep_rejects_bad_paths():
    with pytest.raises(ConfigurationError, match="invalid parameter path"):
        sweep(_small(), cells=[{"network.size": 3}])


def test_sweep_is_reproducible_and_parallel_safe():
    cfg = _small()
    cells = [{"error.kind": "decaying", "error.c_rho": c} for c in (0.0, 10.0)]
    a = sweep(cfg, cells)
    b = sweep(cfg, cells, threads=2)
    assert regret_csv(a) == regret_csv(b)
    assert [(r.params, r.T) for r in a] == [(c, T) for c in cells for T in (50, 100)]
    assert summary_json(a) == summary_json(b)


def test_regret_csv_layout():
    res = sweep(_small(), [{"error.c_rho": 1.0, "error.kind": "decaying"}])
    lines = regret_csv(res).splitlines()
    assert lines[0] == f"# {CSV_VERSION}"
    assert lines[1] == "error.c_rho,error.kind,T,node,avg_regret"
    assert len(lines) == 2 + 2 * 6
    assert lines[2].startswith("1.0,decaying,50,0,")


def test_summary_json_fields():
    res = sweep(_small(), [{}])
    data = json.loads(summary_json(res))
    cell = data["cells"][0]
    for key in ("max_regret", "min_regret", "comparator_gap", "theorem_bound", "constants"):
        assert key in cell
    for key in ("G_l", "zeta", "B", "theta", "kappa", "eta"):
        assert key in cell["constants"]
    assert cell["max_regret"] <= cell["theorem_bound"]
    assert list(curve_table(res).values())[0][0][0] == 50


def test_record_csv():
    res = run_cell(_small(), 50)
    text = record_csv(res.record)
    lines = text.splitlines()
    assert lines[1] == "t,node,loss,regularizer,disagreement"
    assert len(lines) == 2 + 50 * 6


def test_unbounded_cell_flags_missing_bound():
    cfg = _small(**{"set.radius": None, "geometry.map": "pnorm", "geometry.p": 1.5})
    res = run_cell(cfg, 50)
    assert res.bound is None and "bound_note" in res.constants
    res = run_cell(cfg.with_overrides({"set.bound_radius": 5.0}), 50)
    assert res.bound is not None


def test_optimal_step_rule_uses_realized_constants():
    res = run_cell(_small(**{"step.rule": "optimal"}), 50)
    assert res.constants["eta"] > 0
