"""The ICA premetric between signals, the independence defect, and the
combined cause premetric for affine transformations.

For a reference signal mu with normalizer N and diagonal moments g_i, the
premetric to another signal mu~ is the l2-of-Frobenius norm of the
reference-normalized coredinate differences

  delta(mu, mu~)^2 = sum_ij ((<mu~>_ij - <mu>_ij) / sqrt(g_i g_j))^2
                   + sum_nu sum_ij ((<mu~>_{ij nu} - <mu>_{ij nu})
                                    / sqrt(g_i g_j g_nu))^2 .

Note the asymmetry: normalization always comes from the reference.  The
independence defect of a single signal is the same norm applied to the
off-(Kronecker-)diagonal part of its own coredinates; it vanishes exactly
for third-order orthogonal (in particular mean-stationary product) signals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensembles import Coredinates


def vnorm(matrices) -> float:
    """l2-of-Frobenius norm of a tuple of matrices."""
    return float(np.sqrt(sum(float(np.sum(np.square(M))) for M in matrices)))


def _normalized_difference(reference: Coredinates, other: Coredinates):
    """The d+1 reference-normalized coredinate difference matrices."""
    reference.require_gate()
    if other.d != reference.d:
        raise ValueError("dimension mismatch")
    s = reference.scale
    outer = np.outer(s, s)
    blocks = [(other.m0 - reference.m0) / outer]
    for nu in range(reference.d):
        blocks.append((other.m[nu] - reference.m[nu]) / (s[nu] * outer))
    return blocks


def delta(reference: Coredinates, other: Coredinates) -> float:
    """ICA premetric delta(mu, mu~) with normalization from the reference."""
    return vnorm(_normalized_difference(reference, other))


def ic_defect(core: Coredinates) -> float:
    """Independence defect: the premetric mass of the off-diagonal
    coredinate entries (the i=j=nu entry of each [mu]_nu is the only
    diagonal one at level 3).  Defined for any signal, stationary or not."""
    core.require_gate()
    s = core.scale
    outer = np.outer(s, s)
    off0 = core.m0 / outer
    np.fill_diagonal(off0, 0.0)
    total = float(np.sum(np.square(off0)))
    for nu in range(core.d):
        block = core.m[nu] / (s[nu] * outer)
        block = block.copy()
        block[nu, nu] = 0.0
        total += float(np.sum(np.square(block)))
    return float(np.sqrt(total))


def moment_sensitivity(core: Coredinates) -> float:
    """The constant coupling a uniform moment gap to the premetric:
    delta(mu, mu~) <= moment_sensitivity(mu) * max_w |<mu~>_w - <mu>_w|.

    It is the l2 norm of the inverse normalizers 1/sqrt(g_i g_j (g_nu))
    over all words of length 2 and 3."""
    core.require_gate()
    s = core.scale
    inv2 = 1.0 / np.outer(s, s)
    inv3 = inv2[None, :, :] / s[:, None, None]
    return float(np.sqrt(np.sum(np.square(inv2)) + np.sum(np.square(inv3))))


@dataclass(frozen=True)
class AffineMap:
    """u -> A u + b."""

    A: np.ndarray
    b: np.ndarray = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.zeros(A.shape[0]) if self.b is None else np.asarray(self.b, dtype=float)
        if A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise ValueError("inconsistent affine map shapes")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    def __call__(self, u):
        return np.asarray(u, dtype=float) @ self.A.T + self.b

    def inverse(self) -> "AffineMap":
        Ainv = np.linalg.inv(self.A)
        return AffineMap(Ainv, -Ainv @ self.b)

    def compose(self, other: "AffineMap") -> "AffineMap":
        """self after other: u -> self(other(u))."""
        return AffineMap(self.A @ other.A, self.A @ other.b + self.b)


def hull_points(ensemble) -> np.ndarray:
    """Corners of the bounding box of the ensemble's vertex values; the
    bounded hull over which sup-deviations of affine maps are evaluated."""
    import itertools

    vals = np.vstack([p.values for p in ensemble.paths])
    lo, hi = vals.min(axis=0), vals.max(axis=0)
    corners = [np.where(mask, hi, lo)
               for mask in itertools.product([False, True], repeat=vals.shape[1])]
    return np.array(corners)


def affine_residual_premetric(f1: AffineMap, f2: AffineMap, hull) -> float:
    """Residual deviation min((sup_hull |h - id| + 1) * |Dh - I|_2, 1) for
    h = f1^{-1} o f2.  The sup runs over the caller-supplied bounded hull
    (an affine residual has no finite global sup)."""
    if abs(np.linalg.det(f1.A)) == 0.0:
        raise np.linalg.LinAlgError("f1 must be invertible")
    h = f1.inverse().compose(f2)
    pts = np.atleast_2d(np.asarray(hull, dtype=float))
    sup_dev = float(np.linalg.norm(h(pts) - pts, axis=1).max())
    lip_dev = float(np.linalg.norm(h.A - np.eye(h.d), 2))
    return min((sup_dev + 1.0) * lip_dev, 1.0)


def residual_from_deviations(sup_deviation: float, lipschitz_deviation: float) -> float:
    """Residual deviation for a general C^1 transformation pair, from a
    caller-supplied (sup |h - id|, Lip(h - id)) record; the toolkit never
    estimates global derivative bounds itself."""
    return min((float(sup_deviation) + 1.0) * float(lipschitz_deviation), 1.0)


def causal_premetric(reference, other, hull) -> float:
    """Premetric between causes (mu1, f1), (mu2, f2): delta + residual."""
    core1, f1 = reference
    core2, f2 = other
    return delta(core1, core2) + affine_residual_premetric(f1, f2, hull)
