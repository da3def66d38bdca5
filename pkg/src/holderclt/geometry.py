"""Finite metric-measure spaces and chaining distances.

A space is a finite point set with a distance matrix and a probability
vector.  On such spaces ball measures are step functions of the radius,
so the chaining integrals (the w- and tau-distances) evaluate exactly as
finite sums of rectangle areas; no quadrature error enters the
inequality audits built on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateError, DomainError, InputError, NonFiniteError
from .orlicz import YoungFunction

__all__ = [
    "MetricMeasureSpace",
    "BallExponentFit",
    "MeasureClassification",
    "EmbeddingDiagnostic",
    "LipschitzAuditReport",
    "ball_measure",
    "fit_ball_exponent",
    "v_functional",
    "w_distance",
    "w_matrix",
    "tau_distance",
    "tau_matrix",
    "classify_measure",
    "embedding_check",
    "arnold_imkeller_audit",
    "max_triangle_violation",
    "save_space",
    "load_space",
]

_SPACE_FORMAT_VERSION = 1
_TRIANGLE_SAMPLES = 10 ** 5
_FULL_CHECK_LIMIT = 256


def max_triangle_violation(dist, n_triples: int = _TRIANGLE_SAMPLES, seed: int = 0) -> float:
    """Largest d(i,j) - d(i,k) - d(k,j) over triples; <= 0 means metric.

    All triples are checked up to 256 points; larger matrices get a
    seeded random sample of ``n_triples`` triples.
    """
    D = np.asarray(dist, dtype=float)
    n = len(D)
    if n <= _FULL_CHECK_LIMIT:
        worst = -np.inf
        for k in range(n):
            worst = max(worst, float((D - D[:, [k]] - D[[k], :]).max()))
        return worst
    rng = np.random.default_rng(seed)
    i, j, k = rng.integers(0, n, size=(3, n_triples))
    return float((D[i, j] - D[i, k] - D[k, j]).max())


@dataclass(frozen=True)
class MetricMeasureSpace:
    """Point coordinates in [0,1]^dim, a distance matrix, and weights.

    The distance may be a pseudometric (zero off-diagonal entries are
    allowed); symmetry, zero diagonal, and the triangle inequality are
    validated on construction, the latter on a seeded triple sample for
    large spaces.
    """

    points: np.ndarray
    dist: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        D = np.asarray(self.dist, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        n = len(pts)
        if D.shape != (n, n):
            raise InputError(f"distance matrix shape {D.shape} does not match {n} points")
        if w.shape != (n,):
            raise InputError("weights must be a vector over the points")
        if pts.min() < -1e-9 or pts.max() > 1 + 1e-9:
            raise InputError("coordinates must lie in [0, 1]")
        scale = float(D.max()) if D.size and D.max() > 0 else 1.0
        if np.any(D < -1e-12 * scale):
            raise InputError("distances must be nonnegative")
        if not np.allclose(D, D.T, rtol=0, atol=1e-9 * scale):
            raise InputError("distance matrix must be symmetric")
        if np.any(np.abs(np.diag(D)) > 1e-12 * scale):
            raise InputError("distance matrix must have a zero diagonal")
        if np.any(w < 0):
            raise InputError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InputError(f"weights sum to {w.sum()!r}, expected 1 within 1e-12")
        if max_triangle_violation(D) > 1e-9 * scale:
            raise InputError("triangle inequality fails on sampled triples")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dist", 0.5 * (D + D.T))
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    @classmethod
    def uniform_grid(cls, n: int, dim: int = 1) -> "MetricMeasureSpace":
        """Uniform measure on the n^dim lattice of [0,1]^dim with Euclidean distance."""
        if n < 1 or dim < 1:
            raise InputError("need n >= 1 points per axis and dim >= 1")
        axis = np.linspace(0.0, 1.0, n)
        mesh = np.meshgrid(*([axis] * dim), indexing="ij")
        pts = np.column_stack([m.ravel() for m in mesh])
        D = cdist(pts, pts)
        w = np.full(len(pts), 1.0 / len(pts))
        return cls(points=pts, dist=D, weights=w)

    @classmethod
    def from_points(cls, points, weights=None) -> "MetricMeasureSpace":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        D = cdist(pts, pts)
        if weights is None:
            weights = np.full(len(pts), 1.0 / len(pts))
        return cls(points=pts, dist=D, weights=np.asarray(weights, dtype=float))

    def with_distance(self, dist) -> "MetricMeasureSpace":
        """Same points and weights under a different (pseudo)distance."""
        return MetricMeasureSpace(points=self.points, dist=np.asarray(dist, dtype=float),
                                  weights=self.weights)


def save_space(space: MetricMeasureSpace, path) -> None:
    """Write a space in the versioned plain-text matrix format.

    Layout: a ``mmspace <version>`` line, an ``n <N> dim <D>`` line, then
    the point rows, the distance rows, and the weight row, separated by
    ``points`` / ``dist`` / ``weights`` marker lines.
    """
    def row(vals):
        return " ".join(f"{v:.17g}" for v in vals)

    lines = [f"mmspace {_SPACE_FORMAT_VERSION}", f"n {space.n} dim {space.dim}", "points"]
    lines.extend(row(p) for p in space.points)
    lines.append("dist")
    lines.extend(row(r) for r in space.dist)
    lines.append("weights")
    lines.append(row(space.weights))
    Path(path).write_text("\n".join(lines) + "\n")


def load_space(path) -> MetricMeasureSpace:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != "mmspace":
        raise InputError(f"not a space file: header {lines[0]!r}")
    if int(head[1]) != _SPACE_FORMAT_VERSION:
        raise InputError(f"unsupported space format version {head[1]}")
    tag, n_str, dim_tag, dim_str = lines[1].split()
    if tag != "n" or dim_tag != "dim":
        raise InputError(f"malformed size line {lines[1]!r}")
    n, dim = int(n_str), int(dim_str)
    if lines[2] != "points" or lines[3 + n] != "dist" or lines[4 + 2 * n] != "weights":
        raise InputError("malformed section markers")
    pts = np.array([[float(v) for v in lines[3 + i].split()] for i in range(n)])
    D = np.array([[float(v) for v in lines[4 + n + i].split()] for i in range(n)])
    w = np.array([float(v) for v in lines[5 + 2 * n].split()])
    if pts.shape != (n, dim):
        raise InputError("point block has the wrong shape")
    return MetricMeasureSpace(points=pts, dist=D, weights=w)


def ball_measure(space: MetricMeasureSpace, x: int, r: float, dist=None) -> float:
    """Measure of the closed ball around point index x, right-continuous in r."""
    if r < 0:
        raise DomainError("radius must be nonnegative")
    D = space.dist if dist is None else np.asarray(dist, dtype=float)
    thr = r * (1 + 1e-12) + 1e-15
    return float(space.weights[D[x] <= thr].sum())


@dataclass(frozen=True)
class BallExponentFit:
    """Fitted lower bound m^2(B(r, x)) >= r^theta / c_theta.

    ``residual`` is the largest violation of the bound over the fitted
    samples; it is <= 0 because c_theta is calibrated at the worst one.
    """

    theta: float
    c_theta: float
    residual: float
    radii: np.ndarray
    min_profile: np.ndarray


def fit_ball_exponent(space: MetricMeasureSpace, n_radii: int = 24,
                      inner_cells: float = 8.0, outer_frac: float = 0.45,
                      dist=None) -> BallExponentFit:
    """Least-squares exponent of the worst-center squared ball measure.

    The radius grid runs from ``inner_cells`` nearest-neighbor spacings
    to ``outer_frac`` of the diameter.  The regression uses the
    cell-midpoint radius r + h/2 (h the median spacing), which removes
    most of the lattice discretization bias of the raw log-log slope.
    """
    D = space.dist if dist is None else np.asarray(dist, dtype=float)
    if not np.any(D > 0):
        raise DegenerateError("all pairwise distances are zero")
    off = np.where(D > 0, D, np.inf)
    nn = off.min(axis=1)
    h = float(np.median(nn[np.isfinite(nn)]))
    diam = float(D.max())
    r_hi = outer_frac * diam
    r_lo = min(inner_cells * h, r_hi / 4.0)
    radii = np.geomspace(r_lo, r_hi, n_radii)
    thr = radii * (1 + 1e-12) + 1e-15
    m_min = np.empty(n_radii)
    for k in range(n_radii):
        m_min[k] = ((D <= thr[k]) @ space.weights).min()
    if np.any(m_min <= 0):
        raise DegenerateError("a sampled ball has zero measure; cannot fit an exponent")
    theta = float(np.polyfit(np.log(radii + 0.5 * h), np.log(m_min ** 2), 1)[0])
    if theta <= 0:
        raise DegenerateError(f"fitted exponent {theta:g} is not positive")
    c_theta = float(np.max(radii ** theta / m_min ** 2))
    residual = float(np.max(radii ** theta / c_theta - m_min ** 2))
    return BallExponentFit(theta=theta, c_theta=c_theta, residual=residual,
                           radii=radii, min_profile=m_min)


def v_functional(increments, phi: YoungFunction, d, space: MetricMeasureSpace) -> float:
    """Double weighted sum of E Phi(|f(x1)-f(x2)| / d(x1, x2)) over m x m.

    ``increments`` is one of: a vector of deterministic field values per
    point, a replicas-by-points array (expectation over axis 0), or a
    callable (i, j) -> EmpiricalSample of |f(x1)-f(x2)| draws.  Pairs at
    zero distance must have identically zero increments.
    """
    D = np.asarray(d, dtype=float)
    n = space.n
    W2 = np.outer(space.weights, space.weights)
    off = ~np.eye(n, dtype=bool)
    pos = off & (D > 0)
    zero_d = off & (D == 0)

    if callable(increments):
        term = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                s = increments(i, j)
                if D[i, j] > 0:
                    term[i, j] = float((phi(s.values / D[i, j]) * s.weights).sum())
                elif np.any(s.values != 0):
                    raise NonFiniteError(
                        f"nonzero increment at zero distance for pair ({i}, {j})"
                    )
    else:
        F = np.asarray(increments, dtype=float)
        if F.ndim == 1:
            F = F[None, :]
        if F.shape[1] != n:
            raise InputError("increment values must cover every point")
        safe = np.where(pos, D, 1.0)
        term = np.zeros((n, n))
        for row in F:
            inc = np.abs(row[:, None] - row[None, :])
            if np.any(inc[zero_d] != 0):
                raise NonFiniteError("nonzero increment at zero distance")
            term += np.where(pos, phi(inc / safe), 0.0)
        term /= len(F)

    total = float((term * W2).sum())
    if not np.isfinite(total):
        raise NonFiniteError("the double sum diverges (ratio outside Phi's range)")
    return total


def _center_table(d_row: np.ndarray, weights: np.ndarray, level_fn):
    """Breakpoints, segment values, and cumulative areas for one center.

    The ball measure from a center is a right-continuous step function of
    r; between consecutive sorted distances the integrand is constant, so
    the running integral is piecewise linear with these tables.
    """
    order = np.argsort(d_row, kind="stable")
    r_s = d_row[order]
    cumw = np.minimum(np.cumsum(weights[order]), 1.0)
    v = level_fn(cumw)
    seg = np.diff(r_s)
    with np.errstate(invalid="ignore"):
        areas = np.where(seg > 0, v[:-1] * seg, 0.0)
    cum_a = np.concatenate([[0.0], np.cumsum(areas)])
    return r_s, v, cum_a


def _eval_center(r_s: np.ndarray, v: np.ndarray, cum_a: np.ndarray, limits) -> np.ndarray:
    L = np.atleast_1d(np.asarray(limits, dtype=float))
    j = np.clip(np.searchsorted(r_s, L, side="right") - 1, 0, len(r_s) - 1)
    with np.errstate(invalid="ignore"):
        extra = np.where(L > r_s[j], v[j] * (L - r_s[j]), 0.0)
    return cum_a[j] + extra


def _w_levels(phi: YoungFunction, v_val: float) -> Callable[[np.ndarray], np.ndarray]:
    def fn(m):
        with np.errstate(divide="ignore"):
            arg = np.where(m > 0, 4.0 * v_val / np.square(np.maximum(m, 1e-300)), np.inf)
        return phi.inverse(arg)

    return fn


def _tau_levels(phi: YoungFunction) -> Callable[[np.ndarray], np.ndarray]:
    def fn(m):
        with np.errstate(divide="ignore"):
            arg = np.where(m > 0, 1.0 / np.maximum(m, 1e-300), np.inf)
        return phi.inverse(arg)

    return fn


def w_distance(space: MetricMeasureSpace, phi: YoungFunction, d, v: float,
               x1: int, x2: int) -> float:
    """6 * integral_0^{d(x1,x2)} of the two-center inverse-Phi ball terms.

    Computed exactly from the step structure of the ball measures; a
    zero-mass ball over a positive radius interval yields +inf.
    """
    if v <= 0:
        raise DomainError("v must be positive")
    D = space.dist if d is None else np.asarray(d, dtype=float)
    L = D[x1, x2]
    fn = _w_levels(phi, v)
    total = 0.0
    for x in (x1, x2):
        r_s, vv, cum_a = _center_table(D[x], space.weights, fn)
        total += float(_eval_center(r_s, vv, cum_a, L)[0])
    return 6.0 * total


def tau_distance(space: MetricMeasureSpace, phi: YoungFunction, d, x1: int, x2: int) -> float:
    """Larger of the two single-center integrals of inverse-Phi(1/ball measure)."""
    D = space.dist if d is None else np.asarray(d, dtype=float)
    L = D[x1, x2]
    fn = _tau_levels(phi)
    vals = []
    for x in (x1, x2):
        r_s, vv, cum_a = _center_table(D[x], space.weights, fn)
        vals.append(float(_eval_center(r_s, vv, cum_a, L)[0]))
    return max(vals)


def _pair_matrix(space: MetricMeasureSpace, D: np.ndarray, level_fn, combine) -> np.ndarray:
    n = space.n
    G = np.empty((n, n))
    for i in range(n):
        r_s, vv, cum_a = _center_table(D[i], space.weights, level_fn)
        G[i] = _eval_center(r_s, vv, cum_a, D[i])
    return combine(G)


def w_matrix(space: MetricMeasureSpace, phi: YoungFunction, d, v: float) -> np.ndarray:
    """All-pairs w distances; see w_distance."""
    if v <= 0:
        raise DomainError("v must be positive")
    D = space.dist if d is None else np.asarray(d, dtype=float)
    return _pair_matrix(space, D, _w_levels(phi, v), lambda G: 6.0 * (G + G.T))


def tau_matrix(space: MetricMeasureSpace, phi: YoungFunction, d) -> np.ndarray:
    """All-pairs tau distances; see tau_distance."""
    D = space.dist if d is None else np.asarray(d, dtype=float)
    return _pair_matrix(space, D, _tau_levels(phi), lambda G: np.maximum(G, G.T))


@dataclass(frozen=True)
class MeasureClassification:
    """Finiteness report for the chaining distances of a measure."""

    weakly_majorizing: bool
    minorizing: bool
    majorizing: bool
    v_value: float
    sup_w: float
    sup_w_pair: tuple
    sup_tau: float
    sup_tau_pair: tuple
    infinite_w_pairs: tuple


def classify_measure(space: MetricMeasureSpace, phi: YoungFunction, d, v: float) -> MeasureClassification:
    """Weakly majorizing / minorizing / majorizing flags with witnesses.

    Weakly majorizing needs every tau finite; minorizing needs a finite v
    and every w finite; majorizing needs the sup of w finite.  On a
    finite space the last two coincide, and zero-mass witnesses are the
    pairs whose w is infinite.
    """
    D = space.dist if d is None else np.asarray(d, dtype=float)
    n = space.n
    T = tau_matrix(space, phi, D)
    sup_tau = float(T.max())
    tau_pair = tuple(int(q) for q in np.unravel_index(np.argmax(T), T.shape))
    weakly = bool(np.isfinite(T).all())

    if np.isfinite(v):
        W = w_matrix(space, phi, D, v)
        sup_w = float(W.max())
        w_pair = tuple(int(q) for q in np.unravel_index(np.argmax(W), W.shape))
        bad = np.argwhere(~np.isfinite(W))
        witnesses = tuple((int(i), int(j)) for i, j in bad[:8] if i < j) or \
            tuple((int(i), int(j)) for i, j in bad[:8])
        all_w_finite = bool(np.isfinite(W).all())
    else:
        sup_w, w_pair, witnesses, all_w_finite = np.inf, (0, 0), (), False

    minorizing = bool(np.isfinite(v)) and all_w_finite
    majorizing = np.isfinite(sup_w) and bool(np.isfinite(v))
    return MeasureClassification(
        weakly_majorizing=weakly, minorizing=minorizing, majorizing=majorizing,
        v_value=float(v), sup_w=sup_w, sup_w_pair=w_pair,
        sup_tau=sup_tau, sup_tau_pair=tau_pair, infinite_w_pairs=witnesses,
    )


@dataclass(frozen=True)
class EmbeddingDiagnostic:
    """Profile of max d/r over pairs with d <= eps, on dyadic eps levels."""

    eps_levels: np.ndarray
    profile: np.ndarray
    embedded: bool


def embedding_check(d, r, pair_filter=None, n_levels: int = 3,
                    total_factor: float = 2.0) -> EmbeddingDiagnostic:
    """Does the d-topology embed strictly into the r-topology?

    The profile eps -> max{d/r : 0 < d <= eps} is evaluated on dyadic eps
    levels down from the largest d.  The verdict is positive when the
    profile strictly decreases across the smallest ``n_levels`` levels
    and shrinks by at least ``total_factor`` over them; a limit statement
    is undecidable on finite data, so this is a documented heuristic.
    """
    D = np.asarray(d, dtype=float)
    R = np.asarray(r, dtype=float)
    if D.shape != R.shape:
        raise InputError("distance matrices must share a shape")
    n = len(D)
    mask = ~np.eye(n, dtype=bool) & (D > 0)
    if pair_filter is not None:
        mask &= np.asarray(pair_filter, dtype=bool)
    dv = D[mask]
    with np.errstate(divide="ignore"):
        rv = np.where(R[mask] > 0, D[mask] / np.maximum(R[mask], 1e-300), np.inf)
    if dv.size == 0:
        return EmbeddingDiagnostic(np.array([]), np.array([]), False)

    eps_list, prof = [], []
    eps = float(dv.max())
    while True:
        sel = dv <= eps * (1 + 1e-12)
        if not sel.any():
            break
        eps_list.append(eps)
        prof.append(float(rv[sel].max()))
        eps *= 0.5
        if len(eps_list) > 60:
            break
    eps_arr = np.array(eps_list)
    prof_arr = np.array(prof)

    embedded = False
    if len(prof_arr) >= n_levels:
        tail = prof_arr[-n_levels:]
        strictly_down = bool(np.all(np.diff(tail) < 0))
        enough = tail[0] >= total_factor * tail[-1] * (1 - 1e-9)
        embedded = strictly_down and bool(enough) and np.isfinite(tail[-1])
    return EmbeddingDiagnostic(eps_levels=eps_arr, profile=prof_arr, embedded=embedded)


@dataclass(frozen=True)
class LipschitzAuditReport:
    """Result of checking |f(x1)-f(x2)| <= w(x1, x2) over grid pairs."""

    violations: int
    pairs_checked: int
    worst_ratio: float
    v_value: float


def arnold_imkeller_audit(path, space: MetricMeasureSpace, phi: YoungFunction,
                          d=None) -> LipschitzAuditReport:
    """Audit the unit-constant w-Lipschitz property of sampled paths.

    ``path`` is a vector of values at the space's points or a
    replicas-by-points array (anything with a ``values`` attribute of
    that shape also works).  The v-functional of the ensemble feeds the
    w-distance; every replica is then checked against it.
    """
    vals = getattr(path, "values", path)
    F = np.asarray(vals, dtype=float)
    if F.ndim == 1:
        F = F[None, :]
    D = space.dist if d is None else np.asarray(d, dtype=float)
    v = v_functional(F, phi, D, space)
    n_pairs = space.n * (space.n - 1) // 2
    if v == 0.0:
        # v vanishes only when every increment does, so the bound is trivial
        return LipschitzAuditReport(violations=0, pairs_checked=n_pairs * len(F),
                                    worst_ratio=0.0, v_value=0.0)
    W = w_matrix(space, phi, D, v)

    iu = np.triu_indices(space.n, k=1)
    w_pairs = W[iu]
    violations = 0
    worst = 0.0
    for row in F:
        inc = np.abs(row[iu[0]] - row[iu[1]])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(w_pairs > 0, inc / np.maximum(w_pairs, 1e-300),
                             np.where(inc > 0, np.inf, 0.0))
        violations += int((ratio > 1 + 1e-9).sum())
        worst = max(worst, float(ratio.max()))
    return LipschitzAuditReport(violations=violations,
                                pairs_checked=int(len(w_pairs) * len(F)),
                                worst_ratio=worst, v_value=v)
