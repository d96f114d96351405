import numpy as np
import pytest

import sigsep
from sigsep import (AffineMap, affine_residual_premetric, causal_premetric,
                    coredinates, delta, hull_points, ic_defect,
                    moment_sensitivity, pushforward_affine,
                    residual_from_deviations)
from sigsep.ensembles import coredinates_from_moments
from sigsep.lab import exact_source

from conftest import random_ensemble
from oracles import all_monomials, direct_delta, direct_ic_defect


def test_delta_zero_on_self(rng):
    core = coredinates(random_ensemble(rng, d=2))
    assert delta(core, core) == 0.0


def test_delta_matches_word_moment_oracle(rng):
    a = random_ensemble(rng, d=2, n_paths=4)
    b = random_ensemble(rng, d=2, n_paths=4)
    lhs = delta(coredinates(a), coredinates(b))
    assert abs(lhs - direct_delta(a, b)) < 1e-10


def test_delta_is_asymmetric(rng):
    a = random_ensemble(rng, d=2, n_paths=4, scale=1.0)
    b = random_ensemble(rng, d=2, n_paths=4, scale=2.0)
    ca, cb = coredinates(a), coredinates(b)
    assert abs(delta(ca, cb) - delta(cb, ca)) > 1e-6


def test_ic_defect_matches_oracle_and_dependence(rng):
    dep = random_ensemble(rng, d=2, n_paths=5)
    assert abs(ic_defect(coredinates(dep)) - direct_ic_defect(dep)) < 1e-10
    src = exact_source(2, rng)
    assert ic_defect(coredinates(src)) < 1e-12


def test_ic_defect_monomial_invariance(rng):
    src = exact_source(2, rng)
    base = ic_defect(coredinates(src))
    for M in all_monomials(2, np.array([0.5, 2.5]))[:6]:
        acted = ic_defect(coredinates(pushforward_affine(src, M)))
        assert abs(acted - base) < 1e-12


def test_moment_sensitivity_bounds_delta(rng):
    ens = random_ensemble(rng, d=2)
    core = coredinates(ens)
    kappa = moment_sensitivity(core)
    for _ in range(20):
        eps = 1e-3 * rng.random()
        pert = coredinates_from_moments(
            np.moveaxis(core.m, 0, 2)[..., 0] * 0 + core.m0
            + rng.uniform(-eps, eps, size=core.m0.shape),
            np.moveaxis(core.m, 0, 2)
            + rng.uniform(-eps, eps, size=(core.d,) * 3))
        assert delta(core, pert) <= kappa * eps + 1e-12


def test_affine_map_algebra(rng):
    f = AffineMap(rng.normal(size=(2, 2)) + 2 * np.eye(2), rng.normal(size=2))
    g = AffineMap(rng.normal(size=(2, 2)) + 2 * np.eye(2), rng.normal(size=2))
    u = rng.normal(size=(5, 2))
    assert np.allclose(f.compose(g)(u), f(g(u)))
    assert np.allclose(f.inverse()(f(u)), u)
    with pytest.raises(ValueError):
        AffineMap(np.ones((2, 3)))


def test_residual_premetric_identity_and_clip(rng):
    f = AffineMap(rng.normal(size=(2, 2)) + 2 * np.eye(2), rng.normal(size=2))
    hull = rng.normal(size=(8, 2))
    assert affine_residual_premetric(f, f, hull) < 1e-12
    g = AffineMap(f.A @ (np.eye(2) * 50.0), f.b)     # wildly different
    assert affine_residual_premetric(f, g, hull) == 1.0
    assert residual_from_deviations(0.3, 0.1) == pytest.approx(0.13)
    assert residual_from_deviations(100.0, 1.0) == 1.0


def test_residual_premetric_scales_with_deviation(rng):
    f = AffineMap(np.eye(2))
    hull = hull_points(random_ensemble(rng, d=2))
    small = affine_residual_premetric(f, AffineMap(np.eye(2) * (1 + 1e-4)), hull)
    large = affine_residual_premetric(f, AffineMap(np.eye(2) * (1 + 1e-2)), hull)
    assert 0 < small < large < 1


def test_hull_points_are_box_corners(rng):
    ens = random_ensemble(rng, d=2)
    pts = hull_points(ens)
    vals = np.vstack([p.values for p in ens.paths])
    assert pts.shape == (4, 2)
    assert np.allclose(pts.min(axis=0), vals.min(axis=0))
    assert np.allclose(pts.max(axis=0), vals.max(axis=0))


def test_causal_premetric_combines_terms(rng):
    a = random_ensemble(rng, d=2, n_paths=4)
    b = random_ensemble(rng, d=2, n_paths=4)
    ca, cb = coredinates(a), coredinates(b)
    f = AffineMap(np.eye(2))
    g = AffineMap(np.eye(2) * 1.01)
    hull = hull_points(a)
    total = causal_premetric((ca, f), (cb, g), hull)
    assert total == pytest.approx(
        delta(ca, cb) + affine_residual_premetric(f, g, hull))
