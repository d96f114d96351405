"""Scenario generation and robustness experiments: synthetic skewed
sources, dependence injection, additive and multiplicative noise with
their premetric budgets, asynchronous sampling, and estimation sweeps.

All randomness flows from a single seed through named, splittable
streams, and every reduction is evaluated in a fixed order, so reports
are bit-reproducible for a given configuration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, asdict

import numpy as np

from .ensembles import (SignalEnsemble, coredinates, coredinates_from_moments,
                        mean_stationarity_gap, product_ensemble,
                        pushforward_affine, path_signatures,
                        resample_ensemble, transform_moments)
from .errors import DegenerateObservableError, ParseError
from .inversion import (ContrastDomain, OptimizerConfig, align_monomial,
                        minimize_contrast, perturbation_tolerance,
                        theorem_constants, whiten)
from .paths import PiecewiseLinearPath
from .premetric import delta, ic_defect, moment_sensitivity


# ---------------------------------------------------------------------------
# random streams and scenario configuration

STREAM_NAMES = ("source", "mixing", "noise", "restarts", "subsample")


def rng_streams(seed: int) -> dict:
    """Named independent generators spawned from one seed."""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(seq)
            for name, seq in zip(STREAM_NAMES, children)}


@dataclass(frozen=True)
class ScenarioConfig:
    d: int = 3
    n_paths: int = 200
    n_vertices: int = 9
    source: str = "sampled"             # "sampled" | "exact"
    lam: float = 0.0                    # dependence strength in [0,1]
    mixing: dict = field(default_factory=lambda: {"kind": "random", "cond": 3.0})
    noise: dict = field(default_factory=lambda: {"kind": "none"})
    async_mesh: float = None            # uniform per-channel mesh, offset grids
    seed: int = 0
    restarts: int = 8
    kappa0: float = None
    delta_kappa: float = 1.0
    threads: int = 1

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0):
            raise ParseError("lam must lie in [0,1]")
        if self.n_paths < 1 or self.n_vertices < 2:
            raise ParseError("need n_paths >= 1 and n_vertices >= 2")
        if self.source not in ("sampled", "exact"):
            raise ParseError("unknown source family")

    def as_dict(self):
        return asdict(self)

    @staticmethod
    def from_dict(doc: dict) -> "ScenarioConfig":
        try:
            return ScenarioConfig(**doc)
        except TypeError as exc:
            raise ParseError(f"invalid scenario document: {exc}") from None


# ---------------------------------------------------------------------------
# sources

def two_point_increments(rng, size, scale, p):
    """Zero-mean two-point increments: scale * sqrt((1-p)/p) w.p. p and
    -scale * sqrt(p/(1-p)) otherwise; variance scale^2, skewed for p != 1/2."""
    hi = scale * np.sqrt((1.0 - p) / p)
    lo = -scale * np.sqrt(p / (1.0 - p))
    return np.where(rng.random(size) < p, hi, lo)


def _channel_params(d):
    """Distinct per-channel scale and asymmetry, fixing distinct
    third-moment ratios (the eigen-gap the recovery bound needs)."""
    scales = 1.0 + 0.35 * np.arange(d)
    ps = 0.70 + 0.06 * np.arange(d)
    return scales, ps


def sampled_source(d, n_paths, n_vertices, lam, rng) -> SignalEnsemble:
    """Independent skewed random walks per channel; dependence injected by
    convexly mixing each channel's increments with a shared stream."""
    scales, ps = _channel_params(d)
    steps = n_vertices - 1
    grid = np.linspace(0.0, 1.0, n_vertices)
    paths = []
    for _ in range(n_paths):
        shared = two_point_increments(rng, steps, 1.0 / np.sqrt(steps), 0.65)
        incr = np.column_stack([
            (1.0 - lam) * two_point_increments(
                rng, steps, scales[i] / np.sqrt(steps), ps[i])
            + lam * shared
            for i in range(d)])
        values = np.vstack([np.zeros(d), np.cumsum(incr, axis=0)])
        paths.append(PiecewiseLinearPath(grid, values))
    return SignalEnsemble(tuple(paths))


def exact_channel(rng, n_vertices=5, scale=1.0, p=0.75,
                  min_ratio=0.08) -> SignalEnsemble:
    """A three-path, exactly mean-stationary single-channel ensemble with a
    nonzero third diagonal moment: two skewed random walks plus the
    weight-balancing third path that zeroes the weighted mean."""
    weights = np.array([0.3, 0.3, 0.4])
    grid = np.linspace(0.0, 1.0, n_vertices)
    steps = n_vertices - 1
    for _ in range(64):
        y1 = np.concatenate([[0.0], np.cumsum(
            two_point_increments(rng, steps, scale / np.sqrt(steps), p))])
        y2 = np.concatenate([[0.0], np.cumsum(
            two_point_increments(rng, steps, scale / np.sqrt(steps), p))])
        y3 = -(weights[0] * y1 + weights[1] * y2) / weights[2]
        ens = SignalEnsemble(tuple(
            PiecewiseLinearPath(grid, y.reshape(-1, 1)) for y in (y1, y2, y3)),
            weights)
        core = coredinates(ens)
        g, t3 = core.diag[0], core.m[0, 0, 0]
        if g > 0 and abs(t3) / g ** 1.5 > min_ratio:
            return ens
    raise RuntimeError("could not draw a skewed mean-stationary channel")


def exact_source(d, rng, n_vertices=5, lam=0.0, min_gap=0.05) -> SignalEnsemble:
    """Exact product of mean-stationary skewed channels with pairwise
    distinct third-moment ratios; for lam > 0 a shared mean-stationary
    factor is mixed into every channel (the joint law stays an exact
    finite measure, but is no longer a product)."""
    scales, ps = _channel_params(d)
    for _ in range(64):
        channels = [exact_channel(rng, n_vertices, scales[i], ps[i])
                    for i in range(d)]
        ratios = []
        for ch in channels:
            core = coredinates(ch)
            ratios.append(core.m[0, 0, 0] / core.diag[0] ** 1.5)
        ratios = np.array(ratios)
        gaps = np.abs(np.subtract.outer(ratios, ratios))
        if d == 1 or gaps[~np.eye(d, dtype=bool)].min() > min_gap:
            break
    else:
        raise RuntimeError("could not separate third-moment ratios")
    if lam == 0.0:
        return product_ensemble(channels)
    shared = exact_channel(rng, n_vertices, 1.0, 0.65)
    grid = channels[0].paths[0].times
    paths, weights = [], []
    for idx in itertools.product(*[range(ch.size) for ch in channels]):
        for m in range(shared.size):
            w = np.prod([channels[i].weights[k] for i, k in enumerate(idx)]) \
                * shared.weights[m]
            vals = np.column_stack([
                (1.0 - lam) * channels[i].paths[k].values[:, 0]
                + lam * shared.paths[m].values[:, 0]
                for i, k in enumerate(idx)])
            paths.append(PiecewiseLinearPath(grid, vals))
            weights.append(w)
    return SignalEnsemble(tuple(paths), np.array(weights))


def designed_source(d, weights=None) -> SignalEnsemble:
    """Exact product source with prescribed, well-separated skews.

    Each channel has two linear atoms u and -(w/(1-w)) u with weights
    (w, 1-w): exactly mean-stationary, with the third/second diagonal
    moment ratio a strictly decreasing function of w (zero at w = 1/2).
    """
    if weights is None:
        weights = 0.6 + 0.25 * np.arange(d) / max(d - 1, 1)
    grid = np.array([0.0, 1.0])
    channels = []
    for w in np.asarray(weights, dtype=float):
        if not 0.5 < w < 1.0:
            raise ParseError("channel weights must lie in (1/2, 1)")
        c = w / (1.0 - w)
        channels.append(SignalEnsemble(
            (PiecewiseLinearPath(grid, [[0.0], [1.0]]),
             PiecewiseLinearPath(grid, [[0.0], [-c]])),
            np.array([w, 1.0 - w])))
    return product_ensemble(channels)


def sample_atoms(ensemble: SignalEnsemble, n_paths, rng) -> SignalEnsemble:
    """Empirical (uniform-weight) sample of n_paths draws from a weighted
    atomic ensemble."""
    idx = rng.choice(ensemble.size, size=n_paths, p=ensemble.weights)
    return SignalEnsemble(tuple(ensemble.paths[k] for k in idx))


def random_mixing(d, rng, cond=3.0) -> np.ndarray:
    """Random mixing with prescribed condition number (log-uniform spectrum
    between random orthogonal factors)."""
    U, _ = np.linalg.qr(rng.normal(size=(d, d)))
    V, _ = np.linalg.qr(rng.normal(size=(d, d)))
    s = np.geomspace(1.0, 1.0 / cond, d)
    return U @ np.diag(s) @ V.T


def generate_source(config: ScenarioConfig, rng=None) -> SignalEnsemble:
    rng = rng_streams(config.seed)["source"] if rng is None else rng
    if config.source == "exact":
        exact = exact_source(config.d, rng, min(config.n_vertices, 7),
                             config.lam)
        return exact
    return sampled_source(config.d, config.n_paths, config.n_vertices,
                          config.lam, rng)


# ---------------------------------------------------------------------------
# noise models

def stationary_noise(d, rng, amplitude, grid) -> SignalEnsemble:
    """A three-path exactly mean-stationary, zero-mean d-channel ensemble."""
    weights = np.array([0.3, 0.3, 0.4])
    steps = len(grid) - 1
    y1, y2 = (np.vstack([np.zeros(d), np.cumsum(
        rng.normal(size=(steps, d)) / np.sqrt(steps), axis=0)]) * amplitude
        for _ in range(2))
    y3 = -(weights[0] * y1 + weights[1] * y2) / weights[2]
    return SignalEnsemble(tuple(
        PiecewiseLinearPath(np.asarray(grid), y) for y in (y1, y2, y3)),
        weights)


def multiplicative_noise(d, rng, amplitude, grid) -> SignalEnsemble:
    """An IC, mean-stationary noise with mean identically 1: an exact
    product of independent single-channel factors 1 + perturbation."""
    channels = []
    for _ in range(d):
        ch = stationary_noise(1, rng, amplitude, grid)
        channels.append(SignalEnsemble(tuple(
            PiecewiseLinearPath(p.times, 1.0 + p.values) for p in ch.paths),
            ch.weights))
    return product_ensemble(channels)


def _common_grid(a: SignalEnsemble, b: SignalEnsemble, refine=1) -> np.ndarray:
    grid = np.unique(np.concatenate(
        [p.times for p in a.paths] + [p.times for p in b.paths]))
    if refine > 1:
        fine = [grid[:1]]
        for lo, hi in zip(grid[:-1], grid[1:]):
            fine.append(np.linspace(lo, hi, refine + 1)[1:])
        grid = np.concatenate(fine)
    return grid


def _couple(source, noise, combine, coupling):
    """Pair source and noise paths ('paired' by index, or the full
    'product' coupling which represents the independent joint law exactly)."""
    if coupling == "product":
        paths, weights = [], []
        for ws, ps in zip(source.weights, source.paths):
            for wn, pn in zip(noise.weights, noise.paths):
                paths.append(combine(ps, pn))
                weights.append(ws * wn)
        return SignalEnsemble(tuple(paths), np.array(weights))
    if coupling == "paired":
        paths = [combine(ps, noise.paths[k % noise.size])
                 for k, ps in enumerate(source.paths)]
        return SignalEnsemble(tuple(paths), source.weights)
    raise ParseError("coupling must be 'paired' or 'product'")


def inject_additive_noise(source: SignalEnsemble, noise: SignalEnsemble,
                          coupling="product"):
    """Pathwise sum source + noise on a common grid, together with the
    additive-noise premetric budget

      sum_{nu=0..d} <S>_nunu^{-1} |N_S^{-1} [eta]_nu N_S^{-1}|^2,

    (<S>_00 := 1) which equals delta(S, S+eta)^2 exactly whenever the noise
    is independent and both laws are mean-stationary."""
    grid = _common_grid(source, noise)
    src = resample_ensemble(source, grid)
    nse = resample_ensemble(noise, grid)

    def combine(ps, pn):
        return PiecewiseLinearPath(grid, ps.values + pn.values)

    corrupted = _couple(src, nse, combine, coupling)
    core_s = coredinates(src).require_gate()
    core_n = coredinates(nse)
    s = core_s.scale
    outer = np.outer(s, s)
    g = core_s.diag
    terms = [float(np.sum((core_n.m0 / outer) ** 2))]
    for nu in range(source.d):
        terms.append(float(np.sum((core_n.m[nu] / outer) ** 2)) / g[nu])
    budget = float(np.sum(terms))
    record = {"kind": "additive", "budget": budget, "per_level": terms}
    return corrupted, record


# --- multiplicative budgets -------------------------------------------------

def _trapezoid_weights(q):
    """T[a, b] = weight of node a in the composite trapezoid rule over
    [0, t_b] on the uniform q-point grid of [0,1]; column q-1 integrates
    over the whole interval."""
    h = 1.0 / (q - 1)
    T = np.triu(np.full((q, q), h))
    T[0, :] = h / 2.0
    T[np.arange(q), np.arange(q)] = h / 2.0
    T[:, 0] = 0.0
    T[0, 0] = 0.0
    return T


def simplex_weights(q):
    """Iterated-trapezoid quadrature weights on the ordered simplices:
    W2[a,b] for {s_a < t_b} and W3[a,b,c] for {r_a < s_b < t_c}."""
    T = _trapezoid_weights(q)
    full = T[:, q - 1]
    W2 = T * full[None, :]
    W3 = np.einsum("ab,bc,c->abc", T, T, full)
    return W2, W3


def _values_and_slopes(ensemble: SignalEnsemble, grid):
    """Per-path channel values and (right-continuous piecewise-constant)
    derivatives at the grid nodes: arrays (N, q, d)."""
    grid = np.asarray(grid)
    vals = np.stack([p.at(grid) for p in ensemble.paths])
    slopes = []
    for p in ensemble.paths:
        seg = np.clip(np.searchsorted(p.times, grid, side="right") - 1,
                      0, p.times.size - 2)
        sl = np.diff(p.values, axis=0) / np.diff(p.times)[:, None]
        slopes.append(sl[seg])
    return vals, np.stack(slopes)


def _e2(w, f, g):
    return np.einsum("m,ma,mb->ab", w, f, g)


def _e3(w, f, g, h):
    return np.einsum("m,ma,mb,mc->abc", w, f, g, h)


def beta2_budget(source: SignalEnsemble, noise: SignalEnsemble, q=64) -> dict:
    """Multiplicative source-noise budget: per channel, the Cauchy-Schwarz
    envelopes of the second- and third-moment corruption integrands
    (products of noise- and source-correlation functions over the ordered
    simplices), combined with the inverse diagonal moments."""
    grid = np.linspace(0.0, 1.0, q)
    W2, W3 = simplex_weights(q)
    sv, ss = _values_and_slopes(source, grid)
    nv, ns = _values_and_slopes(noise, grid)
    core_s = coredinates(source).require_gate()
    g = core_s.diag
    total, per_channel = 0.0, []
    pat2 = [(0, 0), (1, 0), (0, 1), (1, 1)]
    pat3 = list(itertools.product((0, 1), repeat=3))
    for i in range(source.d):
        ev = (nv[:, :, i], ns[:, :, i])       # noise channel: value, slope
        sf = (ss[:, :, i], sv[:, :, i])       # source complement: slope, value
        alpha = 0.0
        for pat in pat2:
            ell = _e2(noise.weights, ev[pat[0]], ev[pat[1]])
            if pat == (0, 0):
                ell = ell - 1.0
            right = _e2(source.weights, sf[pat[0]], sf[pat[1]])
            alpha += np.sqrt(np.sum(W2 * ell ** 2)) \
                * np.sqrt(np.sum(W2 * right ** 2))
        check = 0.0
        for pat in pat3:
            ell = _e3(noise.weights, ev[pat[0]], ev[pat[1]], ev[pat[2]])
            if pat == (0, 0, 0):
                ell = ell - 1.0
            right = _e3(source.weights, sf[pat[0]], sf[pat[1]], sf[pat[2]])
            check += np.sqrt(np.sum(W3 * ell ** 2)) \
                * np.sqrt(np.sum(W3 * right ** 2))
        contrib = (alpha ** 2 + check ** 2 / g[i]) / g[i] ** 2
        per_channel.append(float(contrib))
        total += contrib
    return {"kind": "multiplicative-source", "budget": float(total),
            "per_channel": per_channel}


def beta3_budget(observable: SignalEnsemble, noise: SignalEnsemble,
                 q=64) -> dict:
    """Multiplicative observable-noise budget: the exact coredinate
    displacement of the corrupted observable, evaluated by quadrature of
    the correlation-function integrands."""
    grid = np.linspace(0.0, 1.0, q)
    W2, W3 = simplex_weights(q)
    xv, xs = _values_and_slopes(observable, grid)
    nv, ns = _values_and_slopes(noise, grid)
    wx, wn = observable.weights, noise.weights
    d = observable.d
    total = 0.0
    for i in range(d):
        ei, di = nv[:, :, i], ns[:, :, i]
        Xi, Di = xv[:, :, i], xs[:, :, i]
        xi = (_e2(wn, ei, ei) - 1.0) * _e2(wx, Di, Di) \
            + _e2(wn, di, di) * _e2(wx, Xi, Xi)
        xi_hat = np.sum(W2 * xi) ** 2
        big = (_e3(wn, ei, ei, ei) - 1.0) * _e3(wx, Di, Di, Di) \
            + _e3(wn, di, di, di) * _e3(wx, Xi, Xi, Xi) \
            + _e3(wn, di, ei, di) * _e3(wx, Xi, Di, Xi) \
            + _e3(wn, ei, di, di) * _e3(wx, Di, Xi, Xi) \
            + _e3(wn, di, di, ei) * _e3(wx, Xi, Xi, Di)
        big_hat = np.sum(W3 * big) ** 2
        total += xi_hat + big_hat
        for j in range(d):
            if j == i:
                continue
            Xj, Dj = xv[:, :, j], xs[:, :, j]
            # noise factors of the off-diagonal entries live on channel i
            # (the repeated index); channel j contributes only the signal
            inner1 = (_e2(wn, ei, ei) - 1.0)[None, :, :] \
                * _e3(wx, Dj, Di, Di) \
                + _e2(wn, di, di)[None, :, :] * _e3(wx, Dj, Xi, Xi)
            t1 = np.sum(W3 * inner1) ** 2
            outer2 = (_e2(wn, ei, ei) - 1.0)[:, None, :] \
                * _e3(wx, Di, Dj, Di) \
                + _e2(wn, di, di)[:, None, :] * _e3(wx, Xi, Dj, Xi)
            t2 = np.sum(W3 * outer2) ** 2
            total += t1 + t2
    return {"kind": "multiplicative-observable", "budget": float(total)}


def inject_multiplicative_noise(target: SignalEnsemble,
                                noise: SignalEnsemble, which="source",
                                coupling="product", refine=4, q=64):
    """Pointwise componentwise product target * noise on a refined common
    grid, with the matching budget statistic (source or observable case)."""
    if which not in ("source", "observable"):
        raise ParseError("which must be 'source' or 'observable'")
    grid = _common_grid(target, noise, refine=refine)
    tgt = resample_ensemble(target, grid)
    nse = resample_ensemble(noise, grid)

    def combine(pt, pn):
        return PiecewiseLinearPath(grid, pt.values * pn.values)

    corrupted = _couple(tgt, nse, combine, coupling)
    if which == "source":
        record = beta2_budget(tgt, nse, q=q)
    else:
        record = beta3_budget(tgt, nse, q=q)
    return corrupted, record


# ---------------------------------------------------------------------------
# asynchronous sampling

def offset_dissections(d, mesh, include_endpoints=True):
    """Per-channel uniform dissections of mesh size ``mesh`` whose interior
    nodes are shifted by a channel-dependent fraction of the mesh."""
    out = []
    for i in range(d):
        offset = mesh * (i + 1.0) / (d + 2.0)
        interior = np.arange(offset, 1.0, mesh)
        interior = interior[(interior > 1e-12) & (interior < 1.0 - 1e-12)]
        out.append(np.concatenate([[0.0], interior, [1.0]]))
    return out


def async_sample(ensemble: SignalEnsemble, dissections) -> SignalEnsemble:
    """Observe each channel on its own dissection, interpolate channels
    independently, and reassemble d-channel paths on the union grid."""
    dissections = [np.asarray(ds, dtype=float) for ds in dissections]
    if len(dissections) != ensemble.d or any(ds.size == 0 for ds in dissections):
        raise ParseError("one nonempty dissection per channel required")
    for ds in dissections:
        if ds[0] != 0.0 or ds[-1] != 1.0 or np.any(np.diff(ds) <= 0):
            raise ParseError("dissections must increase from 0 to 1")
    union = np.unique(np.concatenate(dissections))
    paths = []
    for p in ensemble.paths:
        cols = []
        for i, ds in enumerate(dissections):
            observed = p.at(ds)[:, i]
            cols.append(np.interp(union, ds, observed))
        paths.append(PiecewiseLinearPath(union, np.column_stack(cols)))
    return SignalEnsemble(tuple(paths), ensemble.weights)


# ---------------------------------------------------------------------------
# estimation sweep

@dataclass(frozen=True)
class EstimationSweep:
    sizes: tuple
    rows: tuple                 # dicts: n, rep, gap, delta, error
    slope: float
    eta_threshold: float        # max admissible moment gap for target eps
    n0_plugin: float            # Prop-style plug-in threshold
    n0_empirical: float         # smallest tested n meeting the error target
    eps: float
    q: float


def estimation_sweep(proxy: SignalEnsemble, A, sizes, repetitions, seed=0,
                     eps=0.1, q=0.8, restarts=4, kappa0=None,
                     with_recovery=True) -> EstimationSweep:
    """Subsampling consistency of the moment estimates and of the recovery.

    For each subsample size the max level-2/3 moment gap to the proxy, the
    premetric to the proxy and (optionally) the aligned recovery error are
    recorded; the gap decay rate is fitted on log-log axes, and the
    finite-sample threshold n0 is reported from the closed-form modulus
    inverse of the premetric together with its empirical counterpart.
    """
    A = np.asarray(A, dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    observable = pushforward_affine(proxy, A)
    _, l2, l3 = path_signatures(observable)
    w = observable.weights
    mom2 = np.einsum("k,kij->ij", w, l2)
    mom3 = np.einsum("k,kijm->ijm", w, l3)
    proxy_obs_core = coredinates_from_moments(mom2, mom3).require_gate()
    proxy_src_core = coredinates(proxy).require_gate()
    domain = ContrastDomain(proxy.d, kappa0 if kappa0 is not None
                            else KAPPA0_FROM_TRUTH(proxy_src_core, A))
    rows = []
    for n in sizes:
        for rep in range(repetitions):
            idx = rng.integers(0, observable.size, size=n)
            sub2 = l2[idx].mean(axis=0)
            sub3 = l3[idx].mean(axis=0)
            gap = max(float(np.abs(sub2 - mom2).max()),
                      float(np.abs(sub3 - mom3).max()))
            sub_core = coredinates_from_moments(sub2, sub3)
            dlt = delta(proxy_obs_core, sub_core)
            err = None
            if with_recovery:
                try:
                    report = minimize_contrast(
                        sub_core, domain,
                        OptimizerConfig(restarts=restarts, seed=rep))
                    err = min(align_monomial(th, A).rel_error
                              for th in report.minimizers)
                except Exception:
                    err = float("inf")
            rows.append({"n": int(n), "rep": rep, "gap": gap,
                         "delta": float(dlt), "error": err})
    sizes = tuple(int(n) for n in sizes)
    mean_gaps = [np.mean([r["gap"] for r in rows if r["n"] == n])
                 for n in sizes]
    slope = float(np.polyfit(np.log(sizes), np.log(mean_gaps), 1)[0])
    # plug-in threshold: moment gap below eta keeps the premetric within
    # the radius that provably bounds the aligned error by eps
    constants = theorem_constants(proxy_src_core, A)
    radius = perturbation_tolerance(constants, eps)
    eta = radius / moment_sensitivity(proxy_obs_core) if radius > 0 else 0.0
    scaled = np.array([r["gap"] * np.sqrt(r["n"]) for r in rows])
    a_q = float(np.quantile(scaled, q))
    n0_plugin = float(np.ceil((a_q / eta) ** 2)) if eta > 0 else float("inf")
    n0_empirical = float("inf")
    if with_recovery:
        for n in sizes:
            errs = [r["error"] for r in rows if r["n"] == n]
            if np.mean([e <= eps for e in errs]) >= q:
                n0_empirical = float(n)
                break
    return EstimationSweep(sizes, tuple(rows), slope, float(eta),
                           n0_plugin, n0_empirical, eps, q)


def KAPPA0_FROM_TRUTH(source_core, A, delta_kappa=1.0) -> float:
    """Condition bound from ground truth: cond of the row-normalized
    whitened inverse mixing plus a slack."""
    obs = transform_moments(source_core, A)
    R = whiten(obs).R
    B = np.linalg.inv(R @ np.asarray(A, dtype=float))
    B = B / np.linalg.norm(B, axis=1)[:, None]
    return float(np.linalg.cond(B)) + delta_kappa


# ---------------------------------------------------------------------------
# end-to-end scenario

def run_scenario(config: ScenarioConfig) -> dict:
    """Generate, corrupt, demix and evaluate one scenario; returns a plain
    JSON-serializable report."""
    streams = rng_streams(config.seed)
    source = generate_source(config, streams["source"])
    d = config.d
    if config.mixing.get("kind") == "explicit":
        A = np.asarray(config.mixing["matrix"], dtype=float)
    else:
        A = random_mixing(d, streams["mixing"], config.mixing.get("cond", 3.0))
    observable = pushforward_affine(source, A)
    report = {"schema": "sigsep/robustness-report/1",
              "scenario": config.as_dict(),
              "warnings": [], "flags": {}}
    source_core = coredinates(source)
    report["source"] = {
        "mean_stationarity_gap": mean_stationarity_gap(source),
        "ic_defect": ic_defect(source_core) if source_core.diag_ok else None,
    }
    noise_record = None
    kind = config.noise.get("kind", "none")
    if kind == "additive":
        noise = stationary_noise(d, streams["noise"],
                                 config.noise.get("amplitude", 0.1),
                                 source.paths[0].times)
        coupling = config.noise.get("coupling", "paired")
        source_noisy, noise_record = inject_additive_noise(
            source, noise, coupling=coupling)
        observable = pushforward_affine(source_noisy, A)
    elif kind in ("multiplicative-source", "multiplicative-observable"):
        which = "source" if kind.endswith("source") else "observable"
        target = source if which == "source" else observable
        noise = multiplicative_noise(
            target.d, streams["noise"], config.noise.get("amplitude", 0.1),
            target.paths[0].times)
        corrupted, noise_record = inject_multiplicative_noise(
            target, noise, which=which,
            coupling=config.noise.get("coupling", "paired"),
            q=config.noise.get("quadrature", 32))
        observable = pushforward_affine(corrupted, A) if which == "source" \
            else corrupted
    if noise_record is not None:
        report["noise"] = noise_record
    if config.async_mesh is not None:
        observable = async_sample(
            observable, offset_dissections(d, config.async_mesh))
        report["async_mesh"] = config.async_mesh

    obs_core = coredinates(observable)
    try:
        constants = theorem_constants(source_core, A, kappa0=config.kappa0,
                                      delta_kappa=config.delta_kappa)
        report["constants"] = constants.as_dict()
        kappa0 = constants.kappa0
    except Exception as exc:
        report["warnings"].append(f"constants unavailable: {exc}")
        constants, kappa0 = None, config.kappa0 or 10.0
    try:
        demix = minimize_contrast(
            obs_core, ContrastDomain(d, kappa0),
            OptimizerConfig(restarts=config.restarts, seed=config.seed,
                            threads=config.threads))
    except DegenerateObservableError as exc:
        report["warnings"].append(f"degenerate observable: {exc}")
        report["flags"]["demixed"] = False
        return report
    report["contrast_values"] = [float(v) for v in demix.contrast_values]
    report["minimizers"] = [m.tolist() for m in demix.minimizers]
    report["flags"]["demixed"] = True
    errors = [align_monomial(th, A).rel_error for th in demix.minimizers]
    report["aligned_errors"] = errors
    if constants is not None:
        bound = constants.predicted_bound
        report["flags"]["bound_applicable"] = constants.defect <= constants.eps0
        report["flags"]["bound_holds"] = (
            bool(max(errors) <= bound) if constants.defect <= constants.eps0
            else None)
    report["warnings"].extend(demix.warnings)
    return report
