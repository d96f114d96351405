import numpy as np
import pytest

import sigsep
from sigsep import (AffineMap, ContrastDomain, OptimizerConfig, align_monomial,
                    contracted_statistics, contrast, coredinates,
                    defect_shift_bound, estimate_deviance, ic_defect,
                    minimize_contrast, normalized_statistics,
                    perturbation_tolerance, pushforward_affine,
                    relative_path_error, theorem_constants, transform_moments,
                    whiten)
from sigsep.errors import (AlignmentError, DegenerateObservableError,
                           SourceConditionError)
from sigsep.inversion import DevianceSearch
from sigsep.lab import exact_source, random_mixing, sample_atoms

from conftest import random_ensemble
from oracles import all_monomials


def _observable(rng, d=2):
    src = exact_source(d, rng)
    A = random_mixing(d, rng)
    return src, A, coredinates(pushforward_affine(src, A))


def test_whitening_normalizes_covariance(rng):
    _, _, core = _observable(rng)
    wh = whiten(core)
    assert np.abs(wh.R @ core.c @ wh.R.T - np.eye(2)).max() < 1e-12
    assert wh.condition >= 1.0
    assert np.all(np.diff(wh.eigenvalues) <= 0)


def test_whitening_rejects_singular_covariance(rng):
    ens = random_ensemble(rng, d=1)
    doubled = pushforward_affine(
        sigsep.SignalEnsemble(tuple(
            sigsep.PiecewiseLinearPath(p.times, np.column_stack([p.values, p.values]))
            for p in ens.paths), ens.weights), np.eye(2))
    with pytest.raises(DegenerateObservableError):
        whiten(coredinates(doubled))


def test_contrast_scale_and_monomial_invariance(rng):
    _, _, core = _observable(rng)
    R = whiten(core).R
    theta = np.linalg.qr(rng.normal(size=(2, 2)))[0]
    base = contrast(core, R, theta)
    for M in all_monomials(2, np.array([0.7, 3.0]))[:8]:
        assert abs(contrast(core, R, M @ theta) - base) < 1e-12 * max(base, 1.0)
    D = np.diag(rng.uniform(0.5, 2.0, size=2))
    assert abs(contrast(core, R, D @ theta) - base) < 1e-12 * max(base, 1.0)


def test_normalized_statistics_scale_invariance(rng):
    _, _, core = _observable(rng)
    theta = np.linalg.qr(rng.normal(size=(2, 2)))[0]
    D = np.diag(rng.uniform(0.5, 2.0, size=2))
    a = normalized_statistics(core, theta)
    b = normalized_statistics(core, D @ theta)
    assert np.abs(a - b).max() < 1e-12


def test_contracted_statistics_conjugation(rng):
    src, A, obs_core = _observable(rng)
    src_core = coredinates(src)
    c = np.concatenate([[1.0], rng.normal(size=2)])
    lhs = contracted_statistics(obs_core, c)
    # the level-3 matrices mix under A, so the source-side contraction
    # carries the transformed weights A^T c
    c_src = np.concatenate([[c[0]], A.T @ c[1:]])
    rhs = np.linalg.solve(A.T, contracted_statistics(src_core, c_src) @ A.T)
    assert np.abs(lhs - rhs).max() < 1e-10 * max(1.0, np.abs(rhs).max())


def test_exact_recovery_small(rng):
    src, A, core = _observable(rng)
    report = minimize_contrast(core, ContrastDomain(2),
                               OptimizerConfig(restarts=8))
    assert report.converged and len(report.minimizers) >= 1
    for theta in report.minimizers:
        assert align_monomial(theta, A).rel_error < 1e-8
    # minimizers_white live in the unit-row domain
    for th in report.minimizers_white:
        assert np.abs(np.linalg.norm(th, axis=1) - 1.0).max() < 1e-8
        assert np.linalg.cond(th) <= report.kappa0 * (1 + 1e-6)


def test_threaded_restarts_match_serial(rng):
    _, _, core = _observable(rng)
    a = minimize_contrast(core, ContrastDomain(2),
                          OptimizerConfig(restarts=6, threads=1))
    b = minimize_contrast(core, ContrastDomain(2),
                          OptimizerConfig(restarts=6, threads=4))
    assert len(a.minimizers) == len(b.minimizers)
    for x, y in zip(a.minimizers, b.minimizers):
        assert np.array_equal(x, y)


def test_align_monomial_recovers_planted_monomial(rng):
    A = random_mixing(3, rng)
    M = np.zeros((3, 3))
    M[[0, 1, 2], [2, 0, 1]] = [0.5, -2.0, 1.5]
    res = align_monomial(M @ np.linalg.inv(A), A)
    assert res.rel_error < 1e-12
    assert np.abs(res.M - M).max() < 1e-10
    assert np.abs(res.E).max() < 1e-10
    with pytest.raises(AlignmentError):
        align_monomial(np.zeros((3, 3)), A)


def test_theorem_constants_dimension_factors(rng):
    for d, kd in ((2, 1.0), (3, np.sqrt(5.0))):
        src = exact_source(d, rng)
        A = random_mixing(d, rng)
        rec = theorem_constants(coredinates(src), A)
        assert rec.k_d == pytest.approx(kd)
        assert rec.gamma == pytest.approx(1.0 + np.sqrt(5.0))
        assert rec.defect < 1e-12
        assert rec.predicted_bound < 1e-6
        assert 0 < rec.eps0 < 1
        assert rec.c2 > rec.c1 > 0


def test_theorem_constants_rejects_two_zero_third_moments(rng):
    src = exact_source(2, rng)
    core = coredinates(src)
    # erase both third diagonal moments
    m = core.m.copy()
    m[0, 0, 0] = m[1, 1, 1] = 0.0
    bad = sigsep.Coredinates(core.m0, m)
    with pytest.raises(SourceConditionError):
        theorem_constants(bad, np.eye(2))


def test_near_degenerate_ratios_warn(rng):
    src = exact_source(2, rng)
    core = coredinates(src)
    m = core.m.copy()
    r = core.m[0, 0, 0] / core.diag[0] ** 1.5
    m[1, 1, 1] = r * core.diag[1] ** 1.5   # duplicate the ratio
    rec = theorem_constants(sigsep.Coredinates(core.m0, m), np.eye(2))
    assert any("breakdown" in w for w in rec.warnings)


def test_defect_shift_bound_shape():
    assert defect_shift_bound(0.0) == 0.0
    assert defect_shift_bound(1.0) == np.inf
    rs = np.linspace(0.01, 0.9, 20)
    vals = [defect_shift_bound(r) for r in rs]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert all(v >= r for v, r in zip(vals, rs))


def test_perturbation_tolerance_monotone(rng):
    src, A, _ = _observable(rng)
    rec = theorem_constants(coredinates(src), A)
    radii = [perturbation_tolerance(rec, e) for e in (0.05, 0.1, 0.2)]
    assert all(0 < a <= b for a, b in zip(radii, radii[1:]))
    # shifted defect inside the radius stays within the admissible region
    assert defect_shift_bound(radii[0]) <= rec.eps0 * (1 + 1e-9)


def test_relative_path_error_conventions(rng):
    ens = random_ensemble(rng, d=2, n_paths=3)
    assert relative_path_error(ens, ens) == 0.0
    scaled = pushforward_affine(ens, np.eye(2) * 1.1)
    err = relative_path_error(scaled, ens)
    assert err == pytest.approx(0.1, rel=1e-6)


def test_estimate_deviance_zero_for_exact_inverse(rng):
    src = exact_source(2, rng)
    A = random_mixing(2, rng)
    f = AffineMap(A, rng.normal(size=2))
    dev = estimate_deviance([np.linalg.inv(A)], f, src,
                            DevianceSearch(levels=4, points_per_axis=5))
    assert dev < 1e-6
    # a monomial multiple of the inverse is in the orbit: deviance stays 0
    monomial = estimate_deviance([np.diag([2.0, -0.5]) @ np.linalg.inv(A)], f, src)
    assert monomial < 1e-6
    wrong = estimate_deviance([np.linalg.inv(A) + 0.3], f, src)
    assert wrong > 0.05
