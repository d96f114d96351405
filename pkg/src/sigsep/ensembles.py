"""Weighted path ensembles (empirical signal laws) and their signature
moments.

The second- and third-level signature moments of an ensemble are collected
into the coredinate matrices

  m0[i,j]    = <mu>_ij          (level-2 words)
  m[nu][i,j] = <mu>_{ij nu}     (level-3 words, one matrix per last index)

together with the symmetrized covariance C = (m0 + m0^T)/2 and the diagonal
normalizer N = ddiag(<mu>_11 .. <mu>_dd)^{1/2}.  All downstream statistics
(premetric, contrast, recovery bounds) are functions of these matrices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSignalError, ParseError
from .paths import PiecewiseLinearPath, signature3

#: relative floor on the diagonal second moments (admissibility gate)
EPS_DIAG_REL = 1e-10


@dataclass(frozen=True)
class SignalEnsemble:
    """A weighted finite set of paths representing an empirical law."""

    paths: tuple
    weights: np.ndarray = None

    def __post_init__(self):
        paths = tuple(self.paths)
        if not paths:
            raise ParseError("empty ensemble")
        d = paths[0].d
        if any(p.d != d for p in paths):
            raise ParseError("all paths must share one dimension")
        if self.weights is None:
            w = np.full(len(paths), 1.0 / len(paths))
        else:
            w = np.asarray(self.weights, dtype=float).copy()
        if w.shape != (len(paths),):
            raise ParseError("one weight per path required")
        if np.any(w < 0):
            raise ParseError("weights must be nonnegative")
        total = w.sum()
        if not total > 0:
            raise ParseError("weights must have positive sum")
        if abs(total - 1.0) > 1e-9:
            raise ParseError("weights must sum to 1")
        # skip the no-op rescale so serialization round-trips bytewise
        if abs(total - 1.0) > 4 * np.finfo(float).eps:
            w /= total
        w.setflags(write=False)
        object.__setattr__(self, "paths", paths)
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return self.paths[0].d

    @property
    def size(self) -> int:
        return len(self.paths)


def path_signatures(ensemble: SignalEnsemble):
    """Stacked per-path signature levels: arrays (N,d), (N,d,d), (N,d,d,d)."""
    sigs = [signature3(p) for p in ensemble.paths]
    l1 = np.stack([s.level1 for s in sigs])
    l2 = np.stack([s.level2 for s in sigs])
    l3 = np.stack([s.level3 for s in sigs])
    return l1, l2, l3


def signature_moment(ensemble: SignalEnsemble, word) -> float:
    """Weighted ensemble average of the signature coefficient sig_word."""
    word = tuple(int(w) for w in word)
    if len(word) == 0:
        return 1.0
    if len(word) > 3:
        raise ValueError("only words of length <= 3 are supported")
    if any(w < 1 or w > ensemble.d for w in word):
        raise ValueError("word entries must lie in 1..d")
    coeffs = np.array([signature3(p).coefficient(word) for p in ensemble.paths])
    return float(ensemble.weights @ coeffs)


@dataclass(frozen=True)
class Coredinates:
    """The matrices [mu]_0, [mu]_1..[mu]_d with derived C and N.

    ``m`` is indexed [nu, i, j] = <mu>_{ij nu}.  ``diag_ok`` records the
    admissibility gate min_i <mu>_ii >= eps_diag_rel * max_i <mu>_ii;
    operations that need the normalizer call :meth:`require_gate`.
    """

    m0: np.ndarray
    m: np.ndarray
    eps_diag_rel: float = EPS_DIAG_REL

    def __post_init__(self):
        m0 = np.asarray(self.m0, dtype=float)
        m = np.asarray(self.m, dtype=float)
        d = m0.shape[0]
        if m0.shape != (d, d) or m.shape != (d, d, d):
            raise ValueError("inconsistent coredinate shapes")
        for arr in (m0, m):
            arr.setflags(write=False)
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "m", m)

    @property
    def d(self) -> int:
        return self.m0.shape[0]

    @property
    def c(self) -> np.ndarray:
        """Symmetrized covariance C = (m0 + m0^T)/2."""
        return 0.5 * (self.m0 + self.m0.T)

    @property
    def diag(self) -> np.ndarray:
        """The diagonal second moments <mu>_ii."""
        return np.diag(self.m0).copy()

    @property
    def diag_ok(self) -> bool:
        g = self.diag
        return bool(g.min() >= self.eps_diag_rel * max(g.max(), 0.0)) and g.max() > 0

    @property
    def scale(self) -> np.ndarray:
        """sqrt(<mu>_ii), the diagonal of N."""
        return np.sqrt(np.maximum(self.diag, 0.0))

    @property
    def n(self) -> np.ndarray:
        return np.diag(self.scale)

    def require_gate(self):
        if not self.diag_ok:
            raise DegenerateSignalError(
                "a diagonal second moment is below the admissibility floor")
        return self

    def moment(self, word) -> float:
        """<mu>_w for |w| in {2,3} from the stored matrices."""
        idx = tuple(int(w) - 1 for w in word)
        if len(idx) == 2:
            return float(self.m0[idx])
        if len(idx) == 3:
            i, j, k = idx
            return float(self.m[k, i, j])
        raise ValueError("stored words have length 2 or 3")


def coredinates_from_moments(mom2, mom3, eps_diag_rel=EPS_DIAG_REL) -> Coredinates:
    """Assemble coredinates from the raw moment tensors <mu>_ij, <mu>_ijk."""
    mom3 = np.asarray(mom3, dtype=float)
    return Coredinates(np.asarray(mom2, dtype=float),
                       np.moveaxis(mom3, 2, 0), eps_diag_rel)


def coredinates(ensemble: SignalEnsemble, eps_diag_rel=EPS_DIAG_REL) -> Coredinates:
    """Coredinates of an ensemble (degenerate diagonals are flagged, not
    rejected; downstream consumers enforce the gate)."""
    _, l2, l3 = path_signatures(ensemble)
    w = ensemble.weights
    mom2 = np.einsum("k,kij->ij", w, l2)
    mom3 = np.einsum("k,kijm->ijm", w, l3)
    return coredinates_from_moments(mom2, mom3, eps_diag_rel)


def transform_moments(core: Coredinates, A) -> Coredinates:
    """Coredinates of the linearly transformed signal A*mu, computed on
    tensors: [A mu]_0 = A [mu]_0 A^T and [A mu]_k = A (sum_g a_kg [mu]_g) A^T."""
    A = np.asarray(A, dtype=float)
    m0 = A @ core.m0 @ A.T
    mixed = np.einsum("kg,gij->kij", A, core.m)
    m = np.einsum("ai,kij,bj->kab", A, mixed, A)
    return Coredinates(m0, m, core.eps_diag_rel)


def pushforward_affine(ensemble: SignalEnsemble, A, b=None) -> SignalEnsemble:
    """Map every path vertex u -> A u + b, keeping weights."""
    A = np.asarray(A, dtype=float)
    if A.shape != (ensemble.d, ensemble.d):
        raise ParseError("mixing matrix dimension mismatch")
    b = np.zeros(ensemble.d) if b is None else np.asarray(b, dtype=float)
    if b.shape != (ensemble.d,):
        raise ParseError("offset dimension mismatch")
    out = tuple(PiecewiseLinearPath(p.times, p.values @ A.T + b, p.raw_times)
                for p in ensemble.paths)
    return SignalEnsemble(out, ensemble.weights)


def resample_ensemble(ensemble: SignalEnsemble, times) -> SignalEnsemble:
    """All paths re-vertexed on a common time grid (values interpolated)."""
    times = np.asarray(times, dtype=float)
    out = tuple(PiecewiseLinearPath(times, p.at(times)) for p in ensemble.paths)
    return SignalEnsemble(out, ensemble.weights)


def product_ensemble(channels, cap=None) -> SignalEnsemble:
    """Cartesian product of single-channel ensembles with product weights.

    Exact (represents the product law) when the full product fits under the
    cap; otherwise the heaviest product atoms are kept and renormalized.
    """
    channels = list(channels)
    if not channels:
        raise ParseError("no channels")
    if any(ch.d != 1 for ch in channels):
        raise ParseError("product channels must be single-channel ensembles")
    grid = np.unique(np.concatenate([p.times for ch in channels for p in ch.paths]))
    resampled = [resample_ensemble(ch, grid) for ch in channels]
    combos = list(itertools.product(*[range(ch.size) for ch in resampled]))
    weights = np.array([np.prod([ch.weights[k] for ch, k in zip(resampled, idx)])
                        for idx in combos])
    if cap is not None and len(combos) > cap:
        order = np.argsort(-weights, kind="stable")[:cap]
        combos = [combos[i] for i in order]
        weights = weights[order]
    weights = weights / weights.sum()
    paths = []
    for idx in combos:
        vals = np.column_stack([ch.paths[k].values[:, 0]
                                for ch, k in zip(resampled, idx)])
        paths.append(PiecewiseLinearPath(grid, vals))
    return SignalEnsemble(tuple(paths), weights)


def mean_stationarity_gap(ensemble: SignalEnsemble, grid_size=64) -> float:
    """max_t |E[x_t] - E[x_0]| over a uniform time grid (diagnostic)."""
    if grid_size < 2:
        raise ValueError("grid size must be >= 2")
    grid = np.linspace(0.0, 1.0, grid_size)
    mean = np.zeros((grid_size, ensemble.d))
    for w, p in zip(ensemble.weights, ensemble.paths):
        mean += w * p.at(grid)
    return float(np.linalg.norm(mean - mean[0], axis=1).max())


@dataclass(frozen=True)
class IntegrabilityReport:
    """Finite-sample integrability diagnostics (not gates)."""

    order: int
    q: float
    mq_moment: float            # mean of |x|_{1-var}^{m q}
    max_abs_coefficient: float  # max over words |w| <= m and paths
    tail_thresholds: np.ndarray
    tail_means: np.ndarray      # mean of |sig_w| 1{|sig_w| > a}, max over words


def integrability_report(ensemble: SignalEnsemble, q, m=3,
                         thresholds=None) -> IntegrabilityReport:
    from .paths import variation_norm

    if not q > 1:
        raise ValueError("q must exceed 1")
    if m > 3:
        raise ValueError("only orders m <= 3 are stored")
    onevar = np.array([variation_norm(p, 1.0) for p in ensemble.paths])
    mq_moment = float(ensemble.weights @ onevar ** (m * q))
    l1, l2, l3 = path_signatures(ensemble)
    flat = [l1.reshape(ensemble.size, -1)]
    if m >= 2:
        flat.append(l2.reshape(ensemble.size, -1))
    if m >= 3:
        flat.append(l3.reshape(ensemble.size, -1))
    coeffs = np.abs(np.concatenate(flat, axis=1))   # (N, words)
    top = float(coeffs.max())
    if thresholds is None:
        thresholds = np.geomspace(max(top, 1e-12) * 1e-4, max(top, 1e-12) * 2, 9)
    thresholds = np.asarray(thresholds, dtype=float)
    tails = np.array([
        float((ensemble.weights @ (coeffs * (coeffs > a))).max())
        for a in thresholds])
    return IntegrabilityReport(m, float(q), mq_moment, top, thresholds, tails)
