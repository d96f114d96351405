"""Blind inversion of a linear mixing from third-order signature moments.

Pipeline: whiten the observable with the inverse symmetric square root R of
its symmetrized covariance, then minimize the contrast

  phi(theta) = sum_{nu=0..d} | offdiag( x_nu(theta R) ) |_F^2

over unit-row matrices theta with bounded condition number, where x_nu are
the normalized transformed statistics.  Every minimizer theta* = theta R
demixes the observable up to a monomial (signed permutation times diagonal)
factor; ``align_monomial`` resolves that ambiguity against a known ground
truth and ``theorem_constants`` evaluates the explicit recovery-error
bound constants.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .ensembles import Coredinates, transform_moments
from .errors import (AlignmentError, DegenerateObservableError,
                     OptimizationError, SourceConditionError)
from .premetric import ic_defect

#: default condition bound of the optimization domain when no ground truth
#: is available
KAPPA0_BLIND = 10.0


@dataclass(frozen=True)
class WhiteningResult:
    """R = C^{-1/2} (symmetric), eigenvalues of C descending, cond(C)."""

    R: np.ndarray
    eigenvalues: np.ndarray
    condition: float


def whiten(core: Coredinates, floor_rel=1e-10) -> WhiteningResult:
    """Inverse symmetric square root of the symmetrized covariance."""
    C = core.c
    lam, Q = np.linalg.eigh(C)
    if lam[0] < floor_rel * max(lam[-1], 0.0) or lam[-1] <= 0.0:
        raise DegenerateObservableError(
            "covariance numerically singular: increments supported on a hyperplane")
    R = (Q / np.sqrt(lam)) @ Q.T
    return WhiteningResult(R, lam[::-1].copy(), float(lam[-1] / lam[0]))


def normalized_statistics(core: Coredinates, theta) -> np.ndarray:
    """The d+1 normalized statistics of theta * chi, stacked (d+1, d, d).

    Entry 0 is N^{-1}[theta chi]_0 N^{-1}; entry nu is
    N^{-1}([theta chi]_nu / sqrt(<theta chi>_nunu)) N^{-1}.
    """
    tc = transform_moments(core, theta).require_gate()
    s = tc.scale
    outer = np.outer(s, s)
    stats = np.empty((tc.d + 1, tc.d, tc.d))
    stats[0] = tc.m0 / outer
    stats[1:] = tc.m / (s[:, None, None] * outer[None])
    return stats


def _contrast_analytic(T, m0, m, offmask):
    """Contrast of the transform T (= theta R), written with analytic
    (complex-step safe) primitives only."""
    m0p = T @ m0 @ T.T
    mixed = np.einsum("kg,gij->kij", T, m)
    mp = np.einsum("ai,kij,bj->kab", T, mixed, T)
    s = np.sqrt(np.diagonal(m0p))
    outer = s[:, None] * s[None, :]
    total = np.sum((m0p / outer)[offmask] ** 2)
    blocks = mp / (s[:, None, None] * outer[None])
    total = total + np.sum(blocks[:, offmask] ** 2)
    return total


def contrast(core: Coredinates, R, theta) -> float:
    """phi_chi(theta) = off-diagonal mass of the normalized statistics of
    theta R applied to the observable."""
    d = core.d
    offmask = ~np.eye(d, dtype=bool)
    T = np.asarray(theta, dtype=float) @ np.asarray(R, dtype=float)
    return float(_contrast_analytic(T, core.m0, core.m, offmask))


def contracted_statistics(core: Coredinates, c) -> np.ndarray:
    """The contraction c0 * [chi]_0^{-1} * sum_nu c_nu [chi]_nu; its
    eigenstructure exposes the demixer and serves as a spectral warm start."""
    c = np.asarray(c, dtype=float)
    if c.shape != (core.d + 1,):
        raise ValueError("contraction vector must have length d+1")
    mix = np.einsum("k,kij->ij", c[1:], core.m)
    return c[0] * np.linalg.solve(core.m0, mix)


@dataclass(frozen=True)
class ContrastDomain:
    """Unit-row matrices with condition number at most kappa0."""

    d: int
    kappa0: float = KAPPA0_BLIND

    def __post_init__(self):
        if self.kappa0 < 1.0:
            raise ValueError("kappa0 must be >= 1")


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 32
    seed: int = 0
    max_iter: int = 2000
    tol: float = 1e-10          # stationarity tolerance on the contrast
    dedup_tol: float = 1e-6     # signed-permutation dedup tolerance
    penalty_weight: float = 10.0
    threads: int = 1


@dataclass(frozen=True)
class DemixReport:
    minimizers: tuple            # theta* = theta_bar @ R, demixers of chi
    minimizers_white: tuple      # theta_bar in the unit-row domain
    contrast_values: tuple
    whitening: WhiteningResult
    kappa0: float
    converged: bool
    warnings: tuple = ()
    alignments: tuple = None     # filled by the harness when truth is known
    constants: object = None


def _row_normalized(theta):
    norms = np.sqrt(np.sum(theta * theta, axis=1))
    return theta / norms[:, None]


def _sign_canonical(theta, tol=1e-9):
    """Flip row signs so the first non-negligible entry of each row is
    positive, then sort rows lexicographically.  Canonical representative
    of the signed-permutation orbit, used for deterministic reporting."""
    th = theta.copy()
    scale = np.abs(th).max()
    for i in range(th.shape[0]):
        nz = np.nonzero(np.abs(th[i]) > tol * scale)[0]
        if nz.size and th[i, nz[0]] < 0:
            th[i] = -th[i]
    order = np.lexsort(np.round(th, 9).T[::-1])
    return th[order[::-1]]


def _is_signed_perm_equal(a, b, tol):
    """Whether a = S b for a signed permutation S, within tol."""
    M = a @ b.T   # near a signed permutation when rows match up
    rows, cols = scipy.optimize.linear_sum_assignment(-np.abs(M))
    S = np.zeros_like(M)
    S[rows, cols] = np.sign(M[rows, cols])
    return float(np.abs(a - S @ b).max()) <= tol


def _restart_starts(core_white, d, restarts, rng):
    """Initial points: half spectral warm starts from random contractions
    of the whitened statistics, half random orthogonal matrices."""
    starts = []
    for k in range(restarts):
        if k % 2 == 0:
            c = np.concatenate([[1.0], rng.normal(size=d)])
            try:
                M = contracted_statistics(core_white, c)
                lam, V = np.linalg.eig(M)
                if np.abs(lam.imag).max() <= 1e-8 * max(np.abs(lam.real).max(), 1e-30):
                    starts.append(_row_normalized(np.real(V).T))
                    continue
            except np.linalg.LinAlgError:
                pass
        Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        starts.append(Q)
    return starts


def minimize_contrast(core: Coredinates, domain: ContrastDomain,
                      config: OptimizerConfig = OptimizerConfig(),
                      whitening: WhiteningResult = None) -> DemixReport:
    """Multi-start minimization of the contrast over the unit-row domain.

    Each restart runs a quasi-Newton descent on the raw matrix entries; the
    objective row-normalizes internally (the contrast is row-scale
    invariant), a soft unit-row regularizer removes the resulting flat
    directions, and a hinge penalty keeps the condition number within
    kappa0.  The contrast gradient is exact (complex-step differentiation).
    """
    d = core.d
    wh = whiten(core) if whitening is None else whitening
    R = wh.R
    core_white = transform_moments(core, R)
    m0, m = core_white.m0, core_white.m
    offmask = ~np.eye(d, dtype=bool)
    kappa0 = domain.kappa0

    def smooth_part(theta_c):
        """Contrast + unit-row regularizer, complex-step safe."""
        rown2 = np.sum(theta_c * theta_c, axis=1)
        th = theta_c / np.sqrt(rown2)[:, None]
        return (_contrast_analytic(th, m0, m, offmask)
                + 1e-3 * np.sum((rown2 - 1.0) ** 2))

    def hinge(theta):
        kappa = np.linalg.cond(_row_normalized(theta))
        return config.penalty_weight * max(0.0, kappa - kappa0) ** 2

    def value(x):
        theta = x.reshape(d, d)
        return float(np.real(smooth_part(theta))) + hinge(theta)

    def gradient(x):
        theta = x.reshape(d, d)
        g = np.empty(d * d)
        h = 1e-200
        for k in range(d * d):
            pert = theta.astype(complex)
            pert.flat[k] += 1j * h
            g[k] = np.imag(smooth_part(pert)) / h
        if hinge(theta) > 0.0:
            fd = 1e-7
            for k in range(d * d):
                xp, xm = x.copy(), x.copy()
                xp[k] += fd
                xm[k] -= fd
                g[k] += (hinge(xp.reshape(d, d)) - hinge(xm.reshape(d, d))) / (2 * fd)
        return g

    rng = np.random.default_rng(config.seed)
    starts = _restart_starts(core_white, d, config.restarts, rng)

    def solve(start):
        res = scipy.optimize.minimize(
            value, start.ravel(), jac=gradient, method="BFGS",
            options={"gtol": 1e-12, "maxiter": config.max_iter})
        theta = _row_normalized(res.x.reshape(d, d))
        phi = contrast(core_white, np.eye(d), theta)
        gnorm = float(np.abs(res.jac).max())
        ok = bool(res.success or gnorm < 1e-6)
        return theta, phi, ok

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(solve, starts))
    else:
        results = [solve(s) for s in starts]

    converged = [r for r in results if r[2]]
    warnings = []
    if not converged:
        raise OptimizationError(
            "no restart reached the stationarity tolerance",
            report={"best_contrast": min(r[1] for r in results)})
    best = min(r[1] for r in converged)
    keep = []
    for theta, phi, _ in sorted(converged, key=lambda r: r[1]):
        if phi > best + config.dedup_tol:
            continue
        if np.linalg.cond(theta) > kappa0 * (1.0 + 1e-6):
            warnings.append("a minimizer sits on the condition-bound boundary")
            continue
        if not any(_is_signed_perm_equal(theta, k, config.dedup_tol) for k in keep):
            keep.append(theta)
    canon = sorted((_sign_canonical(t) for t in keep),
                   key=lambda t: tuple(np.round(t.ravel(), 12)))
    minimizers_white = tuple(canon)
    minimizers = tuple(t @ R for t in minimizers_white)
    values = tuple(contrast(core_white, np.eye(d), t) for t in minimizers_white)
    return DemixReport(minimizers, minimizers_white, values, wh, kappa0,
                       True, tuple(warnings))


@dataclass(frozen=True)
class AlignmentResult:
    permutation: np.ndarray     # row i of theta_hat matches source permutation[i]
    scales: np.ndarray
    M: np.ndarray               # the monomial matrix, theta_hat ~ M A^{-1}
    E: np.ndarray               # M^{-1} theta_hat A - I
    rel_error: float


def align_monomial(theta_hat, A) -> AlignmentResult:
    """Best monomial alignment of a recovered demixer against the truth:
    minimizes |theta_hat - M A^{-1}| / |M A^{-1}| over monomial M."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    Ainv = np.linalg.inv(A)
    G = theta_hat @ A
    absG = np.abs(G)
    gscale = absG.max()
    if gscale <= 0 or absG.max(axis=1).min() < 1e-12 * gscale \
            or absG.max(axis=0).min() < 1e-12 * gscale:
        raise AlignmentError("gain matrix has a numerically zero row or column")
    if d <= 6:
        perms = list(itertools.permutations(range(d)))
    else:
        rows, cols = scipy.optimize.linear_sum_assignment(-absG)
        perms = [tuple(cols[np.argsort(rows)])]
    best = None
    for perm in perms:
        rows = Ainv[list(perm)]
        denom = np.sum(rows * rows, axis=1)
        beta = np.sum(theta_hat * rows, axis=1) / denom
        target = beta[:, None] * rows
        tnorm = np.linalg.norm(target)
        if tnorm == 0.0 or np.any(beta == 0.0):
            continue
        err = np.linalg.norm(theta_hat - target) / tnorm
        if best is None or err < best[0]:
            best = (err, perm, beta)
    if best is None:
        raise AlignmentError("no non-degenerate monomial alignment exists")
    err, perm, beta = best
    M = np.zeros((d, d))
    M[np.arange(d), list(perm)] = beta
    E = np.linalg.inv(M) @ theta_hat @ A - np.eye(d)
    return AlignmentResult(np.array(perm), beta, M, E, float(err))


@dataclass(frozen=True)
class ConstantsRecord:
    """The explicit recovery-bound constants for a known (source, mixing)."""

    d: int
    gamma: float
    k_d: float
    kappa0: float
    kappa_B: float              # cond of the whitened inverse mixing B_R
    kappa_B_rows: float         # cond of the row-normalized B_R
    norm_B: float
    sigma: float                # l2 norm of the third/second diagonal ratios
    sigma1: float               # inverse-ratio aggregate entering r0
    xi: float
    r0: float
    q0: float
    eps0: float
    c1: float
    c2: float
    defect: float
    predicted_bound: float
    estimated: bool = False
    warnings: tuple = ()

    def as_dict(self):
        out = {k: getattr(self, k) for k in (
            "d", "gamma", "k_d", "kappa0", "kappa_B", "kappa_B_rows", "norm_B",
            "sigma", "sigma1", "xi", "r0", "q0", "eps0", "c1", "c2",
            "defect", "predicted_bound", "estimated")}
        out["warnings"] = list(self.warnings)
        return out


def theorem_constants(source_core: Coredinates, A, kappa0=None,
                      delta_kappa=1.0, zero_tol=1e-12,
                      estimated=False) -> ConstantsRecord:
    """Evaluate the explicit constants of the recovery-error bound for a
    ground-truth source with coredinates ``source_core`` mixed by ``A``.

    Requires that at most one channel has a vanishing third diagonal
    moment; when ``kappa0`` is not given it defaults to the condition
    number of the row-normalized whitened inverse mixing plus
    ``delta_kappa``.
    """
    source_core.require_gate()
    A = np.asarray(A, dtype=float)
    d = source_core.d
    obs_core = transform_moments(source_core, A)
    R = whiten(obs_core).R
    A_R = R @ A
    B_R = np.linalg.inv(A_R)
    row_norms = np.linalg.norm(B_R, axis=1)
    B_rows = B_R / row_norms[:, None]
    kappa_B = float(np.linalg.cond(A_R))
    kappa_B_rows = float(np.linalg.cond(B_rows))
    if kappa0 is None:
        kappa0 = kappa_B_rows + delta_kappa

    g = source_core.diag                          # <zeta>_ii
    t3 = np.array([source_core.m[i, i, i] for i in range(d)])
    ratios = t3 / g ** 1.5
    n_zero = int(np.sum(np.abs(ratios) <= zero_tol))
    if n_zero > 1:
        raise SourceConditionError(
            "more than one vanishing third diagonal moment")
    warnings = []
    if d > 1:
        gaps = np.abs(np.subtract.outer(ratios, ratios))
        if gaps[~np.eye(d, dtype=bool)].min() < 1e-8:
            warnings.append("near-degenerate third-moment ratio spectrum: "
                            "recovery bound close to breakdown")

    gamma = 1.0 + np.sqrt(5.0)
    k_d = np.sqrt((d - 1) * d * (2 * d - 1) / 6.0)
    sigma = float(np.sqrt(np.sum(t3 ** 2 / g ** 3)))
    # the (i-1)^2 weights kill the first channel, which (after the
    # enumeration below) is the only one allowed a vanishing third moment
    order = np.argsort(np.abs(ratios), kind="stable")
    t3o, g_o = t3[order], g[order]
    weights = (np.arange(1, d + 1) - 1.0) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(weights > 0, weights * g_o ** 3 / t3o ** 2, 0.0)
    sigma1 = float(np.sqrt(np.sum(terms)) / k_d) if d > 1 else 0.0
    white_source = transform_moments(source_core, A_R)
    xi = float(np.sqrt(np.sum(white_source.m ** 2)))
    norm_B = float(np.linalg.norm(B_R, 2))
    r0 = kappa0 * sigma1 * (
        norm_B / np.sqrt(d) * (1.0 + kappa0 + (1.0 + xi * d) * kappa0 * kappa_B)
        + kappa_B * sigma)
    q0 = 1.0 / (gamma * k_d * r0) if r0 > 0 else np.inf
    eps0 = q0 / (1.0 + q0)
    c1 = 2.0 * d * k_d * r0
    c2 = np.sqrt(d) * kappa_B * c1
    defect = ic_defect(source_core)
    predicted = c2 * defect / (1.0 - defect) if defect < 1.0 else np.inf
    return ConstantsRecord(d, float(gamma), float(k_d), float(kappa0),
                           kappa_B, kappa_B_rows, norm_B, sigma, sigma1, xi,
                           float(r0), float(q0), float(eps0), float(c1),
                           float(c2), float(defect), float(predicted),
                           estimated, tuple(warnings))


def defect_shift_bound(r: float) -> float:
    """Upper bound on the independence defect of any signal within
    premetric distance r of an exactly orthogonal reference: each
    normalized entry moves by at most r in aggregate while the signal's
    own normalizers shrink by at most the factor (1-r)^{3/2}."""
    if r >= 1.0:
        return np.inf
    return r / (1.0 - r) ** 1.5


def perturbation_tolerance(constants: ConstantsRecord, eps: float) -> float:
    """Largest premetric radius r around an exactly orthogonal source such
    that any signal in the ball provably demixes with aligned relative
    error at most eps (bisection through the explicit bound chain)."""
    def admissible(r):
        dh = defect_shift_bound(r)
        return dh <= constants.eps0 and \
            constants.c2 * dh / (1.0 - dh) <= eps
    lo, hi = 0.0, 0.5
    if not admissible(1e-300):
        return 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def relative_path_error(estimate, target, grid=None) -> float:
    """sup over paired paths and times of |X_t - Y_t| / |Y_t|, with terms
    at Y_t = 0 contributing 0 (the indicator convention)."""
    if estimate.size != target.size or estimate.d != target.d:
        raise ValueError("mismatched ensemble shapes")
    if not np.allclose(estimate.weights, target.weights, atol=1e-12):
        raise ValueError("mismatched weights: pairing requires equal weights")
    grid = np.linspace(0.0, 1.0, 256) if grid is None else np.asarray(grid)
    worst = 0.0
    for pe, pt in zip(estimate.paths, target.paths):
        X, Y = pe.at(grid), pt.at(grid)
        den = np.linalg.norm(Y, axis=1)
        num = np.linalg.norm(X - Y, axis=1)
        mask = den > 0
        if mask.any():
            worst = max(worst, float((num[mask] / den[mask]).max()))
    return worst


@dataclass(frozen=True)
class DevianceSearch:
    levels: int = 3
    points_per_axis: int = 3
    radius: float = None
    max_points: int = 512


def estimate_deviance(theta_set, f, source, config=DevianceSearch()) -> float:
    """Worst-case relative deviation of the recovered demixers from the
    monomial orbit of the truth, over the sampled spatial support.

    For each candidate B the inner infimum over (M, v) is searched with M
    from the monomial alignment and v on a coarse-to-fine grid around the
    offset-cancelling value M^{-1} B b.
    """
    pts = np.vstack([p.values for p in source.paths])
    if pts.shape[0] > config.max_points:
        step = pts.shape[0] // config.max_points + 1
        pts = pts[::step]
    span = float(np.abs(pts).max()) + float(np.linalg.norm(f.b))

    def ratio_sup(B, M, v):
        img = f(pts) @ B.T            # B o f at the sample points
        tgt = (pts + v) @ M.T
        den = np.linalg.norm(tgt, axis=1)
        num = np.linalg.norm(img - tgt, axis=1)
        mask = den > 0
        return float((num[mask] / den[mask]).max()) if mask.any() else 0.0

    worst = 0.0
    for B in theta_set:
        B = np.asarray(B, dtype=float)
        M = align_monomial(B, f.A).M
        center = np.linalg.solve(M, B @ f.b)
        radius = config.radius if config.radius is not None else max(span, 1.0)
        best = ratio_sup(B, M, center)
        for _ in range(config.levels):
            axes = [np.linspace(c - radius, c + radius, config.points_per_axis)
                    for c in center]
            grids = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
            cand = grids.reshape(-1, center.size)
            vals = [ratio_sup(B, M, v) for v in cand]
            k = int(np.argmin(vals))
            if vals[k] < best:
                best, center = vals[k], cand[k]
            radius /= config.points_per_axis
        worst = max(worst, best)
    return worst
