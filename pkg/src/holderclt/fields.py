"""Seeded simulation of centered random fields on regular grids.

Two model families: Gaussian fields given by a covariance kernel
(factorised per grid with a small diagonal jitter budget) and bounded
symmetric series fields sum_k a_k eta_k e_k(x) with i.i.d. symmetric
innovations.  On top of the simulators sit the natural distances
d_p(x1, x2) = (E |xi(x1) - xi(x2)|^p)^(1/p) and their psi-norm
counterparts, the Rosenthal factor with a Monte Carlo audit, the
natural moment exponent theta_alpha for rectangle increments, and the
empirical log-mgf envelope used for Kramer-type bounds.

Replica draws use counter-based streams, so ensembles are bit-identical
across runs and replica i does not depend on how many replicas are
requested.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import (DegenerateError, DomainError, InputError,
                     MgfOverflowError, NotPsdError)
from .grand_lebesgue import (ROSENTHAL_CONSTANT, MomentFunction,
                             gaussian_moment, gpsi_norm)
from .holder import GridField, _axis_weights, _check_exponents, grr_coefficient
from .orlicz import ConvexSymbol
from .sampling import batch_mean_se, stream_normals, stream_signs, stream_uniforms

_ENSEMBLE_FORMAT_VERSION = 1
# diagonal jitter ladder, relative to the mean covariance diagonal
_JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
_INNOVATIONS = ("rademacher", "gaussian", "uniform")
_FULL_PAIR_LIMIT = 4096
_SAMPLED_PAIRS = 1_000_000


def brownian_covariance() -> Callable:
    def cov(P, Q):
        return np.minimum(P[:, 0][:, None], Q[:, 0][None, :])
    return cov


def fbm_covariance(hurst: float) -> Callable:
    if not 0.0 < hurst <= 1.0:
        raise DomainError("hurst exponent must lie in (0, 1]")

    def cov(P, Q, H=hurst):
        s = P[:, 0][:, None]
        t = Q[:, 0][None, :]
        return 0.5 * (s ** (2 * H) + t ** (2 * H) - np.abs(s - t) ** (2 * H))
    return cov


def brownian_sheet_covariance() -> Callable:
    def cov(P, Q):
        out = np.ones((len(P), len(Q)))
        for ax in range(P.shape[1]):
            out *= np.minimum(P[:, ax][:, None], Q[:, ax][None, :])
        return out
    return cov


def trig_basis(k: int, pts: np.ndarray) -> np.ndarray:
    """e_k(x) = sqrt(2) sin(k pi x), orthonormal on [0, 1]."""
    return np.sqrt(2.0) * np.sin(k * np.pi * pts[:, 0])


@dataclass(frozen=True)
class FieldModel:
    """A centered random field: Gaussian covariance kind or bounded
    symmetric series kind."""

    kind: str
    covariance: Optional[Callable] = None
    basis: Optional[Callable] = None
    coefficients: Optional[np.ndarray] = None
    innovation: str = "rademacher"
    name: str = ""

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.covariance is None:
                raise InputError("gaussian kind needs a covariance")
        elif self.kind == "series":
            if self.basis is None or self.coefficients is None:
                raise InputError("series kind needs basis and coefficients")
            coeffs = np.asarray(self.coefficients, dtype=float).ravel()
            if coeffs.size == 0 or not np.all(np.isfinite(coeffs)):
                raise InputError("series coefficients must be finite")
            object.__setattr__(self, "coefficients", coeffs)
            if self.innovation not in _INNOVATIONS:
                raise InputError(f"unknown innovation law {self.innovation!r}")
        else:
            raise InputError("model kind must be 'gaussian' or 'series'")

    @classmethod
    def brownian(cls) -> "FieldModel":
        return cls(kind="gaussian", covariance=brownian_covariance(),
                   name="brownian")

    @classmethod
    def fractional_brownian(cls, hurst: float) -> "FieldModel":
        return cls(kind="gaussian", covariance=fbm_covariance(hurst),
                   name=f"fbm-{hurst:g}")

    @classmethod
    def brownian_sheet(cls) -> "FieldModel":
        return cls(kind="gaussian", covariance=brownian_sheet_covariance(),
                   name="brownian-sheet")

    @classmethod
    def trig_series(cls, decay: float = 1.5, truncation: int = 64,
                    innovation: str = "rademacher",
                    scale: float = 1.0) -> "FieldModel":
        """sum_k scale * k^(-decay) eta_k sqrt(2) sin(k pi x); bounded and
        symmetric whenever the innovations are, so Kramer-type and
        Rosenthal hypotheses hold by construction."""
        if decay <= 1.0:
            raise DomainError("decay must exceed 1 for a summable series")
        if truncation < 1:
            raise InputError("truncation must be at least 1")
        k = np.arange(1, truncation + 1, dtype=float)
        return cls(kind="series", basis=trig_basis,
                   coefficients=scale * k ** (-decay),
                   innovation=innovation,
                   name=f"trig-{decay:g}-K{truncation}")

    def scaled(self, c: float) -> "FieldModel":
        if c <= 0:
            raise DomainError("scale factor must be positive")
        if self.kind == "gaussian":
            base = self.covariance
            return FieldModel(kind="gaussian",
                              covariance=lambda P, Q: c * c * base(P, Q),
                              name=f"{self.name}*{c:g}")
        return FieldModel(kind="series", basis=self.basis,
                          coefficients=c * self.coefficients,
                          innovation=self.innovation,
                          name=f"{self.name}*{c:g}")


def _as_shape(grid) -> tuple:
    if np.isscalar(grid):
        return (int(grid),)
    return tuple(int(n) for n in grid)


def _grid_points(shape) -> np.ndarray:
    mesh = np.meshgrid(*(np.linspace(0.0, 1.0, n) for n in shape),
                       indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _factorize(R: np.ndarray) -> np.ndarray:
    """Lower-triangular factor with an escalating diagonal jitter; the
    ladder exists because Brownian-type kernels on grids touching the
    axes are only semi-definite."""
    n = len(R)
    scale = max(float(np.trace(R)) / n, np.finfo(float).tiny)
    for eps in _JITTER_LADDER:
        try:
            return np.linalg.cholesky(R + eps * scale * np.eye(n))
        except np.linalg.LinAlgError:
            continue
    raise NotPsdError("covariance is not positive semidefinite "
                      f"within jitter {_JITTER_LADDER[-1]:g} * trace scale")


@dataclass(frozen=True)
class PathEnsemble:
    """Replica paths of a field model on a regular grid.

    values has shape (replicas,) + grid_shape and regenerates
    bit-identically from (model, grid, seed, stream, start).
    """

    model: FieldModel
    grid_shape: tuple
    replicas: int
    seed: int
    stream: int
    start: int
    values: np.ndarray

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(self.replicas, -1)

    def points(self) -> np.ndarray:
        return _grid_points(self.grid_shape)

    def field(self, i: int) -> GridField:
        return GridField(values=self.values[i])


def simulate(model: FieldModel, grid, replicas: int, seed: int,
             stream: int = 0, start: int = 0) -> PathEnsemble:
    """Draw replica paths; counter-based addressing makes replica i
    independent of the total replica count."""
    if replicas < 1:
        raise InputError("need at least one replica")
    shape = _as_shape(grid)
    pts = _grid_points(shape)
    N = len(pts)
    if model.kind == "gaussian":
        R = model.covariance(pts, pts)
        R = np.asarray(R, dtype=float)
        if R.shape != (N, N):
            raise InputError("covariance must return an (n, n) matrix")
        if not np.allclose(R, R.T, rtol=0,
                           atol=1e-10 * (1 + np.abs(R).max())):
            raise InputError("covariance must be symmetric")
        L = _factorize(0.5 * (R + R.T))
        Z = stream_normals(seed=seed, stream=stream, start=start,
                           count=replicas, words_per_replica=N)
        V = Z @ L.T
    else:
        K = len(model.coefficients)
        eta = _innovations(model.innovation, seed, stream, start, replicas, K)
        E = np.stack([model.basis(k, pts) for k in range(1, K + 1)])
        V = (eta * model.coefficients) @ E
    return PathEnsemble(model=model, grid_shape=shape, replicas=replicas,
                        seed=seed, stream=stream, start=start,
                        values=V.reshape((replicas,) + shape))


def _innovations(law: str, seed, stream, start, count, words) -> np.ndarray:
    if law == "rademacher":
        return stream_signs(seed=seed, stream=stream, start=start,
                            count=count, words_per_replica=words)
    if law == "gaussian":
        return stream_normals(seed=seed, stream=stream, start=start,
                              count=count, words_per_replica=words)
    if law == "uniform":
        u = stream_uniforms(seed=seed, stream=stream, start=start,
                            count=count, words_per_replica=words)
        return np.sqrt(3.0) * (2.0 * u - 1.0)
    raise InputError(f"unknown innovation law {law!r}")


def save_ensemble(ensemble: PathEnsemble, path) -> None:
    """Grid-array export with a leading replica axis."""
    lines = [f"ensemble {_ENSEMBLE_FORMAT_VERSION}",
             f"replicas {ensemble.replicas}",
             f"dim {len(ensemble.grid_shape)}",
             "shape " + " ".join(str(n) for n in ensemble.grid_shape),
             "values"]
    for row in ensemble.flat:
        lines.append(" ".join("%.17g" % x for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_ensemble(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != f"ensemble {_ENSEMBLE_FORMAT_VERSION}":
        raise InputError("unsupported ensemble header")
    reps = int(lines[1].split()[1])
    dim = int(lines[2].split()[1])
    shape = tuple(int(t) for t in lines[3].split()[1:])
    if len(shape) != dim or lines[4] != "values":
        raise InputError("malformed ensemble header")
    flat = np.array([[float(t) for t in ln.split()] for ln in lines[5:5 + reps]])
    if flat.shape != (reps, int(np.prod(shape))):
        raise InputError("ensemble value block does not match header")
    return flat.reshape((reps,) + shape)


@dataclass(frozen=True)
class NaturalDistanceResult:
    """Pairwise p-th moment distance; se is None for closed forms."""

    dist: np.ndarray
    se: Optional[np.ndarray]
    p: float


def _gaussian_d2(model: FieldModel, pts: np.ndarray) -> np.ndarray:
    R = np.asarray(model.covariance(pts, pts), dtype=float)
    var = np.diag(R)
    sq = var[:, None] + var[None, :] - 2.0 * R
    return np.sqrt(np.maximum(0.5 * (sq + sq.T), 0.0))


def natural_distance_p(source, p: float, grid=None) -> NaturalDistanceResult:
    """d_p(x1, x2) = (E |xi(x1) - xi(x2)|^p)^(1/p).

    Gaussian models use the closed form sigma * gamma_p; other sources
    need an ensemble and return batch standard errors.
    """
    if p < 2:
        raise DomainError("p must be at least 2")
    model, pts, flat = _resolve_source(source, grid)
    if model.kind == "gaussian":
        D = gaussian_moment(p) * _gaussian_d2(model, pts)
        return NaturalDistanceResult(dist=D, se=None, p=float(p))
    if flat is None:
        raise InputError("series models need a simulated ensemble")
    R, N = flat.shape
    i, j = np.triu_indices(N, k=1)
    D = np.zeros((N, N))
    SE = np.zeros((N, N))
    for lo in range(0, len(i), 4096):
        sl = slice(lo, lo + 4096)
        inc = np.abs(flat[:, i[sl]] - flat[:, j[sl]]) ** p
        nb = 16
        edges = np.linspace(0, R, nb + 1).astype(int)
        batch = np.stack([inc[a:b].mean(axis=0)
                          for a, b in zip(edges[:-1], edges[1:])])
        mom = inc.mean(axis=0)
        se_m = batch.std(axis=0, ddof=1) / np.sqrt(nb)
        norm = mom ** (1.0 / p)
        with np.errstate(divide="ignore", invalid="ignore"):
            se_n = np.where(mom > 0, se_m * norm / (p * np.maximum(mom, 1e-300)),
                            0.0)
        D[i[sl], j[sl]] = norm
        SE[i[sl], j[sl]] = se_n
    D += D.T
    SE += SE.T
    return NaturalDistanceResult(dist=D, se=SE, p=float(p))


def _resolve_source(source, grid):
    if isinstance(source, PathEnsemble):
        return source.model, source.points(), source.flat
    if isinstance(source, FieldModel):
        if grid is None:
            raise InputError("a bare model needs an explicit grid")
        return source, _grid_points(_as_shape(grid)), None
    raise InputError("source must be a FieldModel or PathEnsemble")


def natural_distance_psi(source, psi, grid=None) -> np.ndarray:
    """Increment norm sup_p d_p(x1, x2) / psi(p) for every grid pair.

    Gaussian models reduce to a single unit-variance norm times d_2;
    empirical sources fit a moment function per pair.
    """
    model, pts, flat = _resolve_source(source, grid)
    if model.kind == "gaussian":
        c = gpsi_norm(MomentFunction.gaussian(1.0), psi)
        return c * _gaussian_d2(model, pts)
    if flat is None:
        raise InputError("series models need a simulated ensemble")
    N = flat.shape[1]
    D = np.zeros((N, N))
    i, j = np.triu_indices(N, k=1)
    for a, b in zip(i, j):
        inc = np.abs(flat[:, a] - flat[:, b])
        if inc.max() == 0.0:
            continue
        D[a, b] = gpsi_norm(MomentFunction.from_samples(inc), psi)
    D += D.T
    return D


def rosenthal_factor(p: float, c_r: float = ROSENTHAL_CONSTANT) -> float:
    """C_R * p / (e ln p), the symmetric-sum moment inflation factor."""
    if p < 2:
        raise DomainError("p must be at least 2")
    if c_r <= 0:
        raise DomainError("the constant must be positive")
    return c_r * p / (math.e * math.log(p))


@dataclass(frozen=True)
class RosenthalCheck:
    n: int
    p: float
    factor: float
    base_norm: float
    empirical: float
    standard_error: float
    violation: bool


@dataclass(frozen=True)
class RosenthalAuditReport:
    """|n^(-1/2) sum zeta_i|_p <= factor * |zeta|_p, checked with 3-se
    slack over seeded Monte Carlo draws."""

    checks: tuple
    violations: int


def _innovation_base_norm(law: str, p: float) -> float:
    if law == "rademacher":
        return 1.0
    if law == "gaussian":
        return gaussian_moment(p)
    if law == "uniform":
        # |U|^p for U uniform on [-sqrt(3), sqrt(3)]
        return math.sqrt(3.0) / (p + 1.0) ** (1.0 / p)
    raise InputError(f"unknown innovation law {law!r}")


def rosenthal_audit(n_values: Sequence[int], p_values: Sequence[float],
                    replicas: int, seed: int,
                    innovation: str = "rademacher",
                    c_r: float = ROSENTHAL_CONSTANT) -> RosenthalAuditReport:
    checks = []
    violations = 0
    for idx, n in enumerate(n_values):
        draws = _innovations(innovation, seed, idx, 0, replicas, int(n))
        sums = np.abs(draws.sum(axis=1)) / np.sqrt(n)
        mf = MomentFunction.from_samples(sums)
        for p in p_values:
            fac = rosenthal_factor(p, c_r)
            base = _innovation_base_norm(innovation, p)
            emp = mf(p)
            se = mf.standard_error(p)
            bad = bool(emp - 3.0 * se > fac * base)
            violations += bad
            checks.append(RosenthalCheck(n=int(n), p=float(p), factor=fac,
                                         base_norm=base, empirical=emp,
                                         standard_error=se, violation=bad))
    return RosenthalAuditReport(checks=tuple(checks), violations=violations)


@dataclass(frozen=True)
class ThetaAlphaResult:
    """Q-scaled p-th moment of normalised rectangle increments."""

    value: float
    standard_error: float
    q_coefficient: float
    moment_integral: float


def theta_alpha(model: FieldModel, grid, alphas, p: float, replicas: int,
                seed: int, stream: int = 0) -> ThetaAlphaResult:
    """Q_(alpha,d)(p) times the replica-averaged Sobolev-type integral of
    the field's rectangle increments."""
    ens = simulate(model, grid, replicas, seed, stream=stream)
    shape = ens.grid_shape
    dim = len(shape)
    al = _check_exponents(dim, alphas, p)
    Q = grr_coefficient(al, p)
    pts = ens.points()
    flat = ens.flat
    N = len(pts)

    wts = _axis_weights(shape[0])
    for n in shape[1:]:
        wts = np.multiply.outer(wts, _axis_weights(n))
    wts = wts.ravel()

    if N <= _FULL_PAIR_LIMIT:
        i, j = np.triu_indices(N, k=1)
        scale = 2.0
    else:
        rng = np.random.default_rng(0)
        i = rng.integers(0, N, size=_SAMPLED_PAIRS)
        j = rng.integers(0, N, size=_SAMPLED_PAIRS)
        scale = float(N) ** 2 / len(i)

    gaps = np.abs(pts[i] - pts[j])
    keep = ~np.any(gaps == 0, axis=1)
    i, j, gaps = i[keep], j[keep], gaps[keep]
    eu = np.sqrt((gaps ** 2).sum(axis=1))
    denom = np.prod(gaps ** (al * p), axis=1)
    wq = scale * wts[i] * wts[j] / (eu * denom)

    corners = []
    multi_i = np.unravel_index(i, shape)
    multi_j = np.unravel_index(j, shape)
    for bits in itertools.product((0, 1), repeat=dim):
        sign = (-1) ** (dim - sum(bits))
        corner = tuple(multi_j[k] if b else multi_i[k]
                       for k, b in enumerate(bits))
        corners.append((sign, np.ravel_multi_index(corner, shape)))

    totals = np.empty(replicas)
    seen_nonzero = False
    for lo in range(0, replicas, 256):
        chunk = flat[lo:lo + 256]
        box = np.zeros((chunk.shape[0], len(i)))
        for sign, cidx in corners:
            box += sign * chunk[:, cidx]
        np.abs(box, out=box)
        if box.max() > 0:
            seen_nonzero = True
        totals[lo:lo + 256] = (box ** p) @ wq
    if not seen_nonzero:
        raise DegenerateError("rectangle increments vanish identically")
    integral, se_int = batch_mean_se(totals)
    value = Q * integral ** (1.0 / p)
    se = Q * integral ** (1.0 / p - 1.0) * se_int / p
    return ThetaAlphaResult(value=float(value), standard_error=float(se),
                            q_coefficient=float(Q),
                            moment_integral=float(integral))


def natural_phi(ensemble: PathEnsemble, lam_grid) -> ConvexSymbol:
    """log sup_x E exp(lambda xi(x)), symmetrised over lambda signs and
    tabulated as a convex symbol.

    Evaluation is in log space, so the only overflow route is a
    non-finite intermediate; that raises with the offending lambda.
    """
    lam = np.unique(np.asarray(lam_grid, dtype=float))
    lam = lam[lam > 0]
    if lam.size == 0:
        raise InputError("need at least one positive lambda")
    V = ensemble.flat
    logR = np.log(V.shape[0])
    vals = np.empty(lam.size)
    for k, l in enumerate(lam):
        with np.errstate(over="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            up = logsumexp(l * V, axis=0) - logR
            dn = logsumexp(-l * V, axis=0) - logR
        val = max(float(up.max()), float(dn.max()))
        if not np.isfinite(val):
            raise MgfOverflowError(l)
        vals[k] = max(val, 0.0)
    return ConvexSymbol.from_tabulation(np.concatenate([[0.0], lam]),
                                        np.concatenate([[0.0], vals]),
                                        name="natural-phi")


def model_from_spec(spec) -> FieldModel:
    """Build a model from a plain mapping (parsed specification file)."""
    kind = spec.get("kind")
    if kind == "gaussian":
        cov = spec.get("covariance", "brownian")
        if cov == "brownian":
            model = FieldModel.brownian()
        elif cov == "fbm":
            model = FieldModel.fractional_brownian(float(spec.get("hurst", 0.5)))
        elif cov == "sheet":
            model = FieldModel.brownian_sheet()
        else:
            raise InputError(f"unknown covariance {cov!r}")
    elif kind == "series":
        model = FieldModel.trig_series(
            decay=float(spec.get("decay", 1.5)),
            truncation=int(spec.get("truncation", 64)),
            innovation=spec.get("innovation", "rademacher"),
            scale=float(spec.get("scale", 1.0)))
    else:
        raise InputError("specification needs kind = 'gaussian' or 'series'")
    scale = spec.get("model_scale")
    if scale is not None:
        model = model.scaled(float(scale))
    return model


def load_model(path) -> FieldModel:
    try:
        import tomllib
    except ImportError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        spec = tomllib.load(fh)
    return model_from_spec(spec.get("model", spec))
