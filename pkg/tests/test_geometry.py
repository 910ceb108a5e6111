from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import rel_entr

from odcmd.geometry import (
    ConfigurationError,
    ConstraintSet,
    DomainError,
    ErrorModel,
    MirrorMap,
    Regularizer,
    bregman,
    conjugate_exponent,
    inverse_link,
    link,
    lp_norm,
    norm_equivalence,
    omega,
    perturb,
    pnorm_exponent_for_dimension,
    project_simplex,
    prox_approx,
    prox_exact,
    prox_numeric,
    prox_objective,
    supports_exact,
)

MAPS = [MirrorMap.euclidean(), MirrorMap.entropic(), MirrorMap.pnorm(1.5), MirrorMap.pnorm(1.2)]


def _sample(mirror, rng, d, n):
    if mirror.kind == "entropic":
        return rng.dirichlet(np.ones(d), size=n)
    return rng.normal(size=(n, d))


# -- norms and constants


def test_conjugate_exponent():
    assert conjugate_exponent(2) == 2
    assert conjugate_exponent(1.5) == pytest.approx(3.0)
    assert conjugate_exponent(1) == math.inf
    assert conjugate_exponent(math.inf) == 1


@pytest.mark.parametrize("p", [1.0, 1.3, 1.5, 2.0, 3.0, 4.0, math.inf])
@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_norm_equivalence_matches_brute_force(p, d):
    # the max of ||x||_p over the l2 unit sphere, sampled densely
    rng = np.random.default_rng(d)
    x = rng.normal(size=(200_000, d))
    x /= lp_norm(x, 2)[:, None]
    x = np.vstack([x, np.ones((1, d)) / math.sqrt(d), np.eye(d)])
    brute = float(np.max(lp_norm(x, p)))
    assert norm_equivalence(p, d) == pytest.approx(brute, rel=1e-6)


def test_euclidean_equivalence_constants_are_one():
    m = MirrorMap.euclidean()
    assert m.pbar(10) == 1 and m.pbar_star(10) == 1


def test_pnorm_exponent_for_dimension():
    p = pnorm_exponent_for_dimension(100)
    assert p == pytest.approx(math.log(100) / (math.log(100) - 1))
    assert MirrorMap.pnorm(p).q == pytest.approx(math.log(100))
    with pytest.raises(ConfigurationError):
        pnorm_exponent_for_dimension(5)


def test_mirror_map_moduli():
    assert MirrorMap.euclidean().sigma_omega == 1
    assert MirrorMap.entropic().sigma_omega == 1
    assert MirrorMap.pnorm(1.5).sigma_omega == pytest.approx(0.5)
    assert MirrorMap.euclidean().g_omega == 1
    assert math.isinf(MirrorMap.pnorm(1.5).g_omega)
    assert MirrorMap.pnorm(2.0).is_euclidean
    with pytest.raises(ConfigurationError):
        MirrorMap.pnorm(2.5)
    with pytest.raises(ConfigurationError):
        MirrorMap("spectral")


# -- Bregman divergence


def test_bregman_examples():
    e = MirrorMap.euclidean()
    assert bregman(e, [0.3, 0.7], [0.3, 0.7]) == 0
    assert bregman(e, [1.0, 0.0], [0.0, 0.0]) == pytest.approx(0.5)
    x, y = np.array([0.5, 0.5]), np.array([0.25, 0.75])
    kl = float(np.sum(rel_entr(x, y)))
    assert bregman(MirrorMap.entropic(), x, y) == pytest.approx(kl, abs=1e-15)


def test_entropic_bregman_against_finite_difference_of_omega():
    ent = MirrorMap.entropic()
    x, y = np.array([0.5, 0.5]), np.array([0.25, 0.75])
    h = 1e-6
    grad = np.array([(omega(ent, y + h * e) - omega(ent, y - h * e)) / (2 * h) for e in np.eye(2)])
    fd = omega(ent, x) - omega(ent, y) - grad @ (x - y)
    assert bregman(ent, x, y) == pytest.approx(fd, abs=1e-8)


def test_entropic_domain_errors():
    ent = MirrorMap.entropic()
    with pytest.raises(DomainError):
        bregman(ent, [0.5, 0.5], [1.0, 0.0])
    with pytest.raises(DomainError):
        bregman(ent, [-0.1, 1.1], [0.5, 0.5])


@pytest.mark.parametrize("mirror", MAPS, ids=lambda m: f"{m.kind}-{m.p}")
def test_bregman_nonnegative_and_strongly_convex(mirror):
    rng = np.random.default_rng(0)
    x, y = _sample(mirror, rng, 5, 1000), _sample(mirror, rng, 5, 1000)
    v = bregman(mirror, x, y)
    assert np.all(v >= 0)
    assert np.all(bregman(mirror, x, x) <= 1e-12)
    assert np.all(v >= 0.5 * mirror.sigma_omega * mirror.norm(x - y) ** 2 - 1e-12)


@pytest.mark.parametrize("mirror", MAPS[:2], ids=lambda m: m.kind)
def test_bregman_convex_in_second_argument(mirror):
    rng = np.random.default_rng(1)
    for _ in range(200):
        x = _sample(mirror, rng, 4, 1)[0]
        ys = _sample(mirror, rng, 4, 3)
        a = rng.dirichlet(np.ones(3))
        lhs = bregman(mirror, x, a @ ys)
        rhs = a @ bregman(mirror, x, ys)
        assert lhs <= rhs + 1e-10


def test_pnorm_bregman_is_not_convex_in_second_argument():
    # a concrete counterexample: V(x, (y1 + y2)/2) exceeds the average of V(x, y1), V(x, y2)
    m = MirrorMap.pnorm(1.5)
    x, y1, y2 = np.array([4.0, 0.0]), np.array([0.0, 3.0]), np.array([-1.0, 1.0])
    mid = bregman(m, x, 0.5 * (y1 + y2))
    avg = 0.5 * (bregman(m, x, y1) + bregman(m, x, y2))
    assert mid > avg + 1.0
    e = MirrorMap.euclidean()
    assert bregman(e, x, 0.5 * (y1 + y2)) <= 0.5 * (bregman(e, x, y1) + bregman(e, x, y2))


# -- link maps


def test_link_identities():
    x = np.array([0.3, -1.2, 2.0])
    assert np.array_equal(link(MirrorMap.euclidean(), x), x)
    assert np.allclose(link(MirrorMap.pnorm(2.0), x), x)
    assert np.array_equal(link(MirrorMap.pnorm(1.5), np.zeros(3)), np.zeros(3))


def test_pnorm_round_trip_example():
    m = MirrorMap.pnorm(1.5)
    x = np.array([1.0, 1.0])
    assert np.linalg.norm(inverse_link(m, link(m, x)) - x) <= 1e-9


def test_pnorm_link_is_gradient_of_omega():
    m = MirrorMap.pnorm(1.4)
    x = np.array([0.7, -0.2, 1.5])
    h = 1e-6
    fd = np.array([(omega(m, x + h * e) - omega(m, x - h * e)) / (2 * h) for e in np.eye(3)])
    assert np.allclose(link(m, x), fd, atol=1e-7)


@settings(max_examples=200, deadline=None)
@given(st.floats(1.05, 2.0), st.lists(st.floats(-1e3, 1e3, allow_subnormal=False), min_size=1, max_size=8))
def test_pnorm_round_trip_property(p, xs):
    m = MirrorMap.pnorm(p)
    x = np.array(xs)
    back = inverse_link(m, link(m, x))
    assert np.linalg.norm(back - x) <= 1e-9 * max(1.0, np.linalg.norm(x))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8))
def test_entropic_round_trip_property(ws):
    w = np.array(ws) / np.sum(ws)
    m = MirrorMap.entropic()
    assert np.linalg.norm(inverse_link(m, link(m, w)) - w) <= 1e-9


# -- sets


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=10), st.floats(0.0, 0.9))
def test_projection_lands_in_set(xs, xi):
    x = np.array(xs)
    for kset in (ConstraintSet.ball(1.0).shrunk(xi), ConstraintSet.simplex().shrunk(xi)):
        assert kset.contains(kset.project(x))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=10), st.floats(0.5, 3.0))
def test_simplex_projection_kkt(xs, mass):
    # y = max(v - theta, 0) with theta common to the support
    v = np.array(xs)
    y = project_simplex(v, mass)
    assert np.isclose(y.sum(), mass) and np.all(y >= 0)
    support = y > 1e-12
    theta = v[support] - y[support]
    assert np.allclose(theta, theta[0], atol=1e-9)
    assert np.all(v[~support] <= theta[0] + 1e-9)


def test_shrunk_membership_scales_back():
    rng = np.random.default_rng(2)
    K = ConstraintSet.ball(2.0, 1.5)
    S = K.shrunk(0.3)
    pts = rng.normal(size=(2000, 3))
    inside = S.contains(pts)
    assert np.all(K.contains(pts[inside] / 0.7))
    assert S.shrunk(0.5).scale == pytest.approx(0.35)


def test_ball_radii_and_diameter():
    K = ConstraintSet.ball(1.0)
    assert K.inner_radius == 1.0
    assert K.diameter(MirrorMap.euclidean(), 10) == 2.0
    assert K.diameter(MirrorMap.pnorm(1.5), 4) == pytest.approx(2.0 * 4 ** (1 / 1.5 - 0.5))
    with pytest.raises(ConfigurationError):
        ConstraintSet.ball(1.0, 2.0)
    assert not ConstraintSet.whole_space().bounded


# -- regularizer


def test_regularizer_value_and_lipschitz():
    rng = np.random.default_rng(3)
    reg = Regularizer(0.5, 0.1)
    K = ConstraintSet.ball(1.0)
    for mirror in (MirrorMap.euclidean(), MirrorMap.pnorm(1.5)):
        G = reg.lipschitz(mirror, K, 6)
        x = K.project(rng.normal(size=(2000, 6)))
        y = K.project(rng.normal(size=(2000, 6)))
        assert np.all(reg.value(x) >= 0)
        assert np.all(np.abs(reg.value(x) - reg.value(y)) <= G * mirror.norm(x - y) + 1e-12)
    assert Regularizer(0, 0.1).lipschitz(MirrorMap.euclidean(), K, 10) == pytest.approx(0.1 * math.sqrt(10))


def test_regularizer_tie_value():
    reg = Regularizer(0.0, 1.0)
    assert np.array_equal(reg.subgradient([0.0, -2.0], tie=0.5), [0.5, -1.0])


# -- prox


def test_prox_exact_examples():
    e, K = MirrorMap.euclidean(), ConstraintSet.ball(1.0)
    y = prox_exact(e, K, Regularizer(0, 0.1), [0.5, 0.0], [0.2, 0.0], 1.0)
    assert np.allclose(y, [0.2, 0.0], atol=1e-15)
    y = prox_exact(e, K, Regularizer(), [0.0, 0.0], [-2.0, 0.0], 1.0)
    assert np.allclose(y, [1.0, 0.0])
    for c in (-3.0, 0.0, 7.5):
        y = prox_exact(MirrorMap.entropic(), ConstraintSet.simplex(), Regularizer(), [0.5, 0.5], [c, c], 0.7)
        assert np.allclose(y, [0.5, 0.5])


def test_prox_numeric_examples():
    e, K = MirrorMap.euclidean(), ConstraintSet.ball(1.0)
    y = prox_numeric(e, K, Regularizer(0, 0.1), np.array([0.5, 0.0]), np.array([0.2, 0.0]), 1.0)
    assert np.allclose(y, [0.2, 0.0], atol=1e-6)
    x = np.array([0.3, -0.4, 0.1])
    y = prox_numeric(e, K, Regularizer(), x, np.zeros(3), 0.5)
    assert np.allclose(y, x, atol=1e-6)
    y = prox_numeric(e, K, Regularizer(0, 0.5), np.array([0.9]), np.zeros(1), 1.0)
    assert y[0] == pytest.approx(0.4, abs=1e-6)


def test_prox_numeric_subgradient_method():
    e, K = MirrorMap.euclidean(), ConstraintSet.ball(1.0)
    reg = Regularizer(0.0, 0.1)
    x, g = np.array([0.5, 0.2, -0.1]), np.array([0.3, -0.1, 0.4])
    exact = prox_exact(e, K, reg, x, g, 0.8)
    num = prox_numeric(e, K, reg, x, g, 0.8, tol=1e-7, method="subgradient")
    gap = prox_objective(e, reg, x, g, 0.8, num) - prox_objective(e, reg, x, g, 0.8, exact)
    assert -1e-12 <= gap <= 1e-5


def test_unsupported_triple_needs_fallback():
    ent, K = MirrorMap.entropic(), ConstraintSet.simplex()
    reg = Regularizer(1.0, 0.0)
    assert not supports_exact(ent, K, reg)
    with pytest.raises(ConfigurationError):
        prox_exact(ent, K, reg, [0.5, 0.5], [1.0, 0.0], 1.0)
    y = prox_exact(ent, K, reg, np.array([0.5, 0.5]), np.array([1.0, 0.0]), 1.0, allow_numeric=True)
    assert K.contains(y)
    pn = MirrorMap.pnorm(1.5)
    assert not supports_exact(pn, ConstraintSet.ball(1.0), Regularizer(0, 0.1))


def _first_order_residual(mirror, kset, reg, x, g, eta, y, z):
    sub = reg.subgradient(y, tie=0.0)
    # at zero coordinates any entry of [-lambda2, lambda2] is allowed; take the best one for z
    zero = y == 0
    direction = z - y
    w = g + (link(mirror, y) - link(mirror, x)) / eta
    sub = np.where(zero, reg.lambda2 * np.sign(direction), sub)
    return (w + sub) @ direction


@pytest.mark.parametrize("mirror,kset,reg", [
    (MirrorMap.euclidean(), ConstraintSet.ball(1.0), Regularizer(0.5, 0.1)),
    (MirrorMap.euclidean(), ConstraintSet.simplex(), Regularizer(0.5, 0.0)),
    (MirrorMap.entropic(), ConstraintSet.simplex(), Regularizer()),
    (MirrorMap.pnorm(1.5), ConstraintSet.whole_space(), Regularizer(0, 0.2)),
])
def test_prox_first_order_optimality(mirror, kset, reg):
    rng = np.random.default_rng(4)
    d = 4
    for _ in range(100):
        x = kset.project(rng.normal(size=d)) if mirror.kind != "entropic" else rng.dirichlet(np.ones(d))
        g, eta = rng.normal(size=d), float(rng.uniform(0.1, 2.0))
        y = prox_exact(mirror, kset, reg, x, g, eta)
        if mirror.kind == "entropic":
            zs = rng.dirichlet(np.ones(d), size=20)
        else:
            zs = kset.project(rng.normal(size=(20, d)) * 2)
        for z in zs:
            assert _first_order_residual(mirror, kset, reg, x, g, eta, y, z) >= -1e-6


def test_prox_is_batched_row_by_row():
    rng = np.random.default_rng(5)
    e, K, reg = MirrorMap.euclidean(), ConstraintSet.ball(1.0), Regularizer(0.3, 0.1)
    X, G = K.project(rng.normal(size=(6, 3))), rng.normal(size=(6, 3))
    batch = prox_exact(e, K, reg, X, G, 0.4)
    rows = np.array([prox_exact(e, K, reg, x, g, 0.4) for x, g in zip(X, G)])
    assert np.array_equal(batch, rows)


# -- approximate prox


def test_prox_approx_exact_has_zero_gap():
    e, K = MirrorMap.euclidean(), ConstraintSet.ball(1.0)
    reg = Regularizer(0, 0.1)
    x, g = np.array([0.1, 0.2]), np.array([0.5, -0.3])
    y, gap = prox_approx(e, K, reg, x, g, 0.5, ErrorModel.exact(), 1)
    assert np.array_equal(y, prox_exact(e, K, reg, x, g, 0.5))
    assert gap == 0


def test_prox_approx_shift_examples():
    e, K = MirrorMap.euclidean(), ConstraintSet.ball(1.0)
    reg = Regularizer(0, 0.1)
    rng = np.random.default_rng(6)
    x, g = K.project(rng.normal(size=10)), rng.normal(size=10)
    y_star = prox_exact(e, K, reg, x, g, 0.3)
    y, gap = prox_approx(e, K, reg, x, g, 0.3, ErrorModel.decaying(10.0), 1)
    assert np.allclose(y, K.project(y_star + 10.0))
    assert np.isfinite(gap) and gap >= 0
    y, _ = prox_approx(e, K, reg, x, g, 0.3, ErrorModel.fixed(0.5), 7)
    assert np.allclose(y, K.project(y_star + 0.5))
    assert ErrorModel.fixed_for_horizon(10.0, 100).rho == pytest.approx(10.0 / 1000.0)
    assert ErrorModel.decaying(10.0).rho_at(4) == pytest.approx(10.0 / 8.0)


def test_gap_model_respects_rho():
    e, K = MirrorMap.euclidean(), ConstraintSet.ball(1.0)
    reg = Regularizer(0, 0.1)
    rng = np.random.default_rng(7)
    X, G = K.project(rng.normal(size=(30, 5))) * 0.5, rng.normal(size=(30, 5))
    err = ErrorModel.bounded_gap(10.0)
    for t in (1, 5, 50, 500):
        y_star = prox_exact(e, K, reg, X, G, 0.2)
        y, gap = perturb(e, K, reg, X, G, 0.2, y_star, err, t)
        assert np.all(gap <= err.rho_at(t) + 1e-12)
        assert np.all(K.contains(y))
        # approximate-solution property implies the distance bound
        assert np.all(np.linalg.norm(y - y_star, axis=1) <= math.sqrt(2 * 0.2 * err.rho_at(t)) + 1e-12)


def test_invalid_inputs():
    e, K = MirrorMap.euclidean(), ConstraintSet.ball(1.0)
    with pytest.raises(ValueError):
        prox_exact(e, K, Regularizer(), [0.0], [1.0], 0.0)
    with pytest.raises(ValueError):
        prox_approx(e, K, Regularizer(), [0.0], [1.0], 1.0, ErrorModel.exact(), 0)
    with pytest.raises(ConfigurationError):
        ErrorModel("noisy")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        prox_numeric(e, K, Regularizer(0, 0.1), np.ones(4) * 0.4, np.ones(4), 1.0)
