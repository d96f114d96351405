"""Piecewise-linear paths, truncated signatures and variation norms.

A path is a continuous, piecewise-linear curve x : [0,1] -> R^d stored by
its vertices.  The truncated signature collects the iterated integrals

  sig_{i1..im}(x) = integral over t1 < ... < tm of dx^{i1}_{t1} ... dx^{im}_{tm}

for words of length m <= 3.  For a single linear segment with increment v
the signature is the truncated tensor exponential (v, v(x)v/2, v(x)v(x)v/6);
segments combine through the truncated Chen product, which is how
``signature3`` evaluates paths exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError


@dataclass(frozen=True)
class PiecewiseLinearPath:
    """Vertices of a piecewise-linear path on [0,1].

    Parameters
    ----------
    times : (n,) array
        Strictly increasing; affinely normalized to [0,1] on construction.
    values : (n, d) array
        Vertex values; row k is the path value at ``times[k]``.
    raw_times : (n,) array
        The times as supplied by the caller, kept as metadata only.
    """

    times: np.ndarray
    values: np.ndarray
    raw_times: np.ndarray = field(compare=False, default=None)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.shape[0] == 1 and times.size > 1:
            values = values.T
        if times.ndim != 1 or times.size < 2:
            raise ParseError("a path needs at least two vertices")
        if values.shape[0] != times.size:
            raise ParseError("times and values lengths differ")
        if np.any(np.diff(times) <= 0):
            raise ParseError("vertex times must be strictly increasing")
        raw = times.copy() if self.raw_times is None else np.asarray(self.raw_times, dtype=float)
        # affine normalization onto the unit interval
        span = times[-1] - times[0]
        times = (times - times[0]) / span
        times[0], times[-1] = 0.0, 1.0
        for arr in (times, values, raw):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "raw_times", raw)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.times.size

    def at(self, t):
        """Path value(s) at time(s) t in [0,1], by linear interpolation."""
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (self.d,))
        for j in range(self.d):
            out[..., j] = np.interp(t, self.times, self.values[:, j])
        return out


@dataclass(frozen=True)
class TruncatedSignature:
    """Signature levels 1..3 of a path: shapes (d,), (d,d), (d,d,d)."""

    level1: np.ndarray
    level2: np.ndarray
    level3: np.ndarray

    @property
    def d(self) -> int:
        return self.level1.size

    def coefficient(self, word) -> float:
        """Signature coefficient for a word of channel indices (1-based)."""
        idx = tuple(int(w) - 1 for w in word)
        if len(idx) == 0:
            return 1.0
        if any(i < 0 or i >= self.d for i in idx):
            raise ValueError("word entries must lie in 1..d")
        if len(idx) == 1:
            return float(self.level1[idx])
        if len(idx) == 2:
            return float(self.level2[idx])
        if len(idx) == 3:
            return float(self.level3[idx])
        raise ValueError("only words of length <= 3 are stored")

    def shuffle_residuals(self):
        """Max absolute residual of the level-2 and level-3 shuffle identities.

        level1[i]*level1[j] = level2[i,j] + level2[j,i]
        level1[i]*level2[j,k] = level3[i,j,k] + level3[j,i,k] + level3[j,k,i]
        """
        a, b, c = self.level1, self.level2, self.level3
        r2 = np.einsum("i,j->ij", a, a) - (b + b.T)
        r3 = (np.einsum("i,jk->ijk", a, b)
              - c - np.transpose(c, (1, 0, 2)) - np.transpose(c, (2, 0, 1)))
        return float(np.abs(r2).max()), float(np.abs(r3).max())


def _as_sample_array(samples) -> np.ndarray:
    """Samples as an (n, d) array.  A 1-d input is read as a univariate
    series; a single point in R^d must be passed as [[...]]."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ParseError("empty sample sequence")
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ParseError("samples must be a sequence of points")
    return arr


def interpolate_discrete(samples, n=None) -> PiecewiseLinearPath:
    """Piecewise-linear interpolation of discrete samples on the
    equidistant dissection of [0,1].

    A single sample u is read as the linear path t -> t*u.
    """
    values = _as_sample_array(samples)
    if n is not None and n != values.shape[0]:
        raise ParseError("sample count does not match n")
    if values.shape[0] == 1:
        u = values[0]
        return PiecewiseLinearPath(np.array([0.0, 1.0]), np.vstack([np.zeros_like(u), u]))
    m = values.shape[0]
    return PiecewiseLinearPath(np.linspace(0.0, 1.0, m), values)


def interpolate_on_dissection(samples, dissection) -> PiecewiseLinearPath:
    """Path linear between consecutive (dissection[k], samples[k]) pairs."""
    values = _as_sample_array(samples)
    times = np.asarray(dissection, dtype=float)
    if values.shape[0] != times.size:
        raise ParseError("samples and dissection lengths differ")
    return PiecewiseLinearPath(times, values)


def signature3(path: PiecewiseLinearPath) -> TruncatedSignature:
    """Exact signature levels 1..3 of a piecewise-linear path.

    Per-segment tensor exponentials are combined with the truncated Chen
    product; the accumulation below is the closed, vectorized form of that
    recursion (prefix sums replace the sequential Chen updates).
    """
    v = np.diff(path.values, axis=0)                       # (n, d) increments
    d = v.shape[1]
    # prefix[k] = level-1 signature of the path up to the start of segment k
    prefix = np.cumsum(v, axis=0) - v
    level1 = v.sum(axis=0)
    # per-segment Chen update of level 2: prefix (x) v + v(x)v/2
    upd2 = np.einsum("ki,kj->kij", prefix, v) + 0.5 * np.einsum("ki,kj->kij", v, v)
    level2 = upd2.sum(axis=0)
    # level-2 prefix before each segment, for the level-3 Chen update
    pre2 = np.cumsum(upd2, axis=0) - upd2
    vv2 = 0.5 * np.einsum("kj,km->kjm", v, v)
    level3 = (np.einsum("kij,km->ijm", pre2, v)
              + np.einsum("ki,kjm->ijm", prefix, vv2)
              + np.einsum("ki,kj,km->ijm", v, v, v) / 6.0)
    return TruncatedSignature(level1, level2.reshape(d, d), level3.reshape(d, d, d))


def chen_product(x: TruncatedSignature, y: TruncatedSignature) -> TruncatedSignature:
    """Truncated Chen (tensor) product of two signatures."""
    l1 = x.level1 + y.level1
    l2 = x.level2 + np.einsum("i,j->ij", x.level1, y.level1) + y.level2
    l3 = (x.level3
          + np.einsum("ij,k->ijk", x.level2, y.level1)
          + np.einsum("i,jk->ijk", x.level1, y.level2)
          + y.level3)
    return TruncatedSignature(l1, l2, l3)


def concat(x: PiecewiseLinearPath, y: PiecewiseLinearPath) -> PiecewiseLinearPath:
    """Concatenation x * y (y translated to start where x ends)."""
    if x.d != y.d:
        raise ParseError("dimension mismatch in concatenation")
    shift = x.values[-1] - y.values[0]
    times = np.concatenate([0.5 * x.times, 0.5 + 0.5 * y.times[1:]])
    values = np.vstack([x.values, y.values[1:] + shift])
    return PiecewiseLinearPath(times, values)


def canonicalize(path: PiecewiseLinearPath) -> PiecewiseLinearPath:
    """Drop zero-length and collinear interior vertices (signature-neutral)."""
    vals = path.values
    keep = [0]
    for k in range(1, vals.shape[0]):
        if not np.array_equal(vals[k], vals[keep[-1]]):
            keep.append(k)
    if len(keep) == 1:  # constant path
        return PiecewiseLinearPath(np.array([0.0, 1.0]), vals[[0, -1]])
    pts = vals[keep]
    out = [pts[0]]
    for k in range(1, pts.shape[0] - 1):
        a = pts[k] - out[-1]
        b = pts[k + 1] - pts[k]
        if np.linalg.norm(a / np.linalg.norm(a) - b / np.linalg.norm(b)) > 1e-14:
            out.append(pts[k])
    out.append(pts[-1])
    times = np.linspace(0.0, 1.0, len(out))
    return PiecewiseLinearPath(times, np.vstack(out))


def variation_norm(path: PiecewiseLinearPath, p: float) -> float:
    """|x_0| + (sup over dissections of sum |increment|^p)^{1/p}.

    For p = 1 the supremum is the total segment length.  For p > 1 it is
    attained on a sub-sequence of the path's vertices (splitting a straight
    segment never increases the sum), found by O(n^2) dynamic programming.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    base = float(np.linalg.norm(path.values[0]))
    segs = np.linalg.norm(np.diff(path.values, axis=0), axis=1)
    if p == 1.0:
        return base + float(segs.sum())
    vals = path.values
    n = vals.shape[0]
    # best[j] = max over dissections ending at vertex j of sum |delta|^p
    best = np.full(n, -np.inf)
    best[0] = 0.0
    for j in range(1, n):
        d = np.linalg.norm(vals[j] - vals[:j], axis=1)
        best[j] = np.max(best[:j] + d ** p)
    return base + float(best[-1]) ** (1.0 / p)
