import numpy as np
import pytest

import sigsep
from sigsep import (SignalEnsemble, coredinates, coredinates_from_moments,
                    integrability_report, mean_stationarity_gap,
                    product_ensemble, pushforward_affine, resample_ensemble,
                    signature_moment, transform_moments)
from sigsep.errors import DegenerateSignalError, ParseError
from sigsep.lab import exact_channel, exact_source

from conftest import random_ensemble, random_path


def test_ensemble_validation(rng):
    p = random_path(rng, d=2, n=4)
    with pytest.raises(ParseError):
        SignalEnsemble(())
    with pytest.raises(ParseError):
        SignalEnsemble((p, random_path(rng, d=3, n=4)))
    with pytest.raises(ParseError):
        SignalEnsemble((p,), np.array([-1.0]))
    with pytest.raises(ParseError):
        SignalEnsemble((p, p), np.array([0.4, 0.4]))   # sums to 0.8
    ens = SignalEnsemble((p, p), np.array([0.25, 0.75]))
    assert np.isclose(ens.weights.sum(), 1.0)


def test_coredinates_match_raw_word_moments(rng):
    ens = random_ensemble(rng, d=3)
    core = coredinates(ens)
    for word in [(1, 1), (1, 2), (3, 2), (1, 2, 3), (2, 2, 1), (3, 3, 3)]:
        assert np.isclose(core.moment(word), signature_moment(ens, word),
                          atol=1e-14)
    # m[nu, i, j] collects <mu>_{ij nu}
    assert np.isclose(core.m[2, 0, 1], signature_moment(ens, (1, 2, 3)))


def test_equivariance_path_vs_tensor(rng):
    for _ in range(5):
        d = int(rng.integers(2, 5))
        ens = random_ensemble(rng, d=d, n_paths=4, n_vertices=5)
        A = rng.normal(size=(d, d))
        b = rng.normal(size=d)
        lhs = coredinates(pushforward_affine(ens, A, b))
        rhs = transform_moments(coredinates(ens), A)
        scale = max(1.0, np.abs(rhs.m).max())
        assert np.abs(lhs.m0 - rhs.m0).max() < 1e-12 * scale
        assert np.abs(lhs.m - rhs.m).max() < 1e-12 * scale


def test_translation_invariance(rng):
    ens = random_ensemble(rng, d=2)
    shifted = pushforward_affine(ens, np.eye(2), np.array([5.0, -3.0]))
    a, b = coredinates(ens), coredinates(shifted)
    assert np.abs(a.m0 - b.m0).max() < 1e-12
    assert np.abs(a.m - b.m).max() < 1e-12


def test_gate_and_scale(rng):
    ens = random_ensemble(rng, d=2)
    core = coredinates(ens)
    assert core.diag_ok
    assert np.allclose(core.scale ** 2, core.diag)
    assert np.allclose(core.c, core.c.T)
    # constant channel: diagonal moment vanishes -> gate trips
    flat = pushforward_affine(ens, np.diag([1.0, 0.0]))
    degenerate = coredinates(flat)
    assert not degenerate.diag_ok
    with pytest.raises(DegenerateSignalError):
        degenerate.require_gate()


def test_resample_preserves_curve(rng):
    ens = random_ensemble(rng, d=2, n_paths=3, n_vertices=5)
    grid = np.unique(np.concatenate([p.times for p in ens.paths]))
    fine = np.unique(np.concatenate([grid, np.linspace(0, 1, 17)]))
    res = resample_ensemble(ens, fine)
    a, b = coredinates(ens), coredinates(res)
    assert np.abs(a.m - b.m).max() < 1e-12


def test_product_ensemble_weights_and_cap(rng):
    chans = [exact_channel(rng, scale=1.0 + 0.3 * i, p=0.7) for i in range(2)]
    prod = product_ensemble(chans)
    assert prod.size == 9 and prod.d == 2
    assert np.isclose(prod.weights.sum(), 1.0)
    capped = product_ensemble(chans, cap=4)
    assert capped.size == 4
    with pytest.raises(ParseError):
        product_ensemble([random_ensemble(rng, d=2)])


def test_mean_stationarity_gap(rng):
    ch = exact_channel(rng)
    assert mean_stationarity_gap(ch) < 1e-12
    drift = random_ensemble(rng, d=1, n_paths=3)
    assert mean_stationarity_gap(drift) > 1e-3


def test_exact_source_is_mean_stationary_product(rng):
    src = exact_source(2, rng)
    assert mean_stationarity_gap(src) < 1e-12
    core = coredinates(src)
    # off-diagonal coredinates vanish for the product law
    off = core.m0.copy()
    np.fill_diagonal(off, 0.0)
    assert np.abs(off).max() < 1e-13


def test_coredinates_from_moments_layout(rng):
    mom2 = rng.normal(size=(2, 2))
    mom3 = rng.normal(size=(2, 2, 2))
    core = coredinates_from_moments(mom2, mom3)
    assert core.m[1, 0, 1] == mom3[0, 1, 1]


def test_integrability_report(rng):
    ens = random_ensemble(rng, d=2)
    rep = integrability_report(ens, q=2.0)
    assert rep.mq_moment > 0 and rep.max_abs_coefficient > 0
    assert np.all(np.diff(rep.tail_means) <= 1e-15)  # nonincreasing in threshold
    assert rep.tail_means[-1] == 0.0
    with pytest.raises(ValueError):
        integrability_report(ens, q=1.0)
