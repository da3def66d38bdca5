"""Moment-indexed norms built from psi-functions.

A psi-function assigns a positive weight psi(p) to each moment order p in
an open interval (A, B); the associated norm of a random variable is
sup_p |eta|_p / psi(p).  The module provides the norm itself, the
fundamental function sup_p delta^{1/p}/psi(p), natural psi-functions of
families, the exponential-moment norm inf{tau : E exp(lam xi) <=
exp(phi(lam tau))}, conversions between the two scales, and the tail
bound 2 exp(-conj(p log psi(p))(log(z/norm))).
"""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import (
    DomainError,
    EmptySupportError,
    KramerViolationError,
    NoCommonSupportError,
    NotInvertibleError,
    SupportBelowThetaError,
)
from .orlicz import _GOLDEN, ConvexSymbol, YoungFunction, _conjugate_values

__all__ = [
    "PsiFunction",
    "MomentFunction",
    "gaussian_moment",
    "gpsi_norm",
    "fundamental_function",
    "natural_psi",
    "psi_theta",
    "psi_rosenthal",
    "bphi_norm",
    "empirical_mgf",
    "gaussian_mgf",
    "psi_from_phi",
    "tail_bound",
    "young_from_psi",
    "ROSENTHAL_CONSTANT",
]

#: Rosenthal constant for sums of symmetric i.i.d. terms; the normalized
#: partial-sum p-norm is bounded by ROSENTHAL_CONSTANT * p / (e ln p)
#: times the summand p-norm, p >= 2.
ROSENTHAL_CONSTANT = 1.53573

_EPS_MARGIN = 1e-3
_P_MAX_DEFAULT = 512.0


def gaussian_moment(p):
    """p-norm of a standard normal, sqrt(2) * (Gamma((p+1)/2)/Gamma(1/2))^{1/p}."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise DomainError("gaussian_moment needs p > 0")
    return np.exp(0.5 * np.log(2.0) + (gammaln(0.5 * (p + 1.0)) - gammaln(0.5)) / p)


@dataclass(frozen=True)
class PsiFunction:
    """Positive weight psi(p) on an open moment interval (a, b), 1 <= a < b.

    Evaluation outside (a, b) returns +inf.  The working tabulation is a
    log-spaced grid on [a(1+eps), b(1-eps)] (upper end p_max when b is
    infinite); suprema computed on it are lower bounds of the true sup.
    A degenerate member concentrated at a single order r is marked by
    ``degenerate_at`` and carries its value there.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    a: float = 1.0
    b: float = np.inf
    name: str = "psi"
    p_max: float = _P_MAX_DEFAULT
    eps: float = _EPS_MARGIN
    n_grid: int = 128
    degenerate_at: Optional[float] = None

    def __post_init__(self):
        if self.degenerate_at is not None:
            r = float(self.degenerate_at)
            if r < 1:
                raise DomainError("degenerate order must satisfy r >= 1")
            object.__setattr__(self, "a", r)
            object.__setattr__(self, "b", r)
            object.__setattr__(self, "grid", np.array([r]))
            if not np.isfinite(self.fn(np.array([r]))[0]) or self.fn(np.array([r]))[0] <= 0:
                raise DomainError("degenerate value must be positive and finite")
            return
        if self.a < 1:
            raise DomainError(f"support must start at a >= 1, got a={self.a:g}")
        if not self.a < self.b:
            raise DomainError(f"support ({self.a:g}, {self.b:g}) is empty")
        p_lo = self.a * (1.0 + self.eps)
        p_hi = self.p_max if np.isinf(self.b) else self.b * (1.0 - self.eps)
        if p_lo >= p_hi:
            raise EmptySupportError(
                f"support ({self.a:g}, {self.b:g}) is empty after the {self.eps:g} margin clamp"
            )
        grid = np.geomspace(p_lo, p_hi, self.n_grid)
        vals = np.asarray(self.fn(grid), dtype=float)
        if not np.all(np.isfinite(vals)) or vals.min() <= 0.0:
            raise DomainError(f"{self.name} must be positive and finite on its tabulation")
        object.__setattr__(self, "grid", grid)

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        scalar = p.ndim == 0
        p1 = np.atleast_1d(p)
        out = np.full(p1.shape, np.inf)
        if self.degenerate_at is not None:
            on = np.isclose(p1, self.degenerate_at, rtol=1e-12, atol=0.0)
            if on.any():
                out[on] = self.fn(p1[on])
        else:
            inside = (p1 > self.a) & (p1 < self.b)
            if inside.any():
                out[inside] = self.fn(p1[inside])
        return float(out[0]) if scalar else out

    @classmethod
    def power(cls, exponent: float, a: float = 1.0, b: float = np.inf,
              scale: float = 1.0, **kw) -> "PsiFunction":
        """psi(p) = scale * p**exponent; exponent 0.5 is the subgaussian weight."""
        return cls(fn=lambda p: scale * p ** exponent, a=a, b=b,
                   name=f"{scale:g}*p^{exponent:g}", **kw)

    @classmethod
    def constant(cls, value: float, a: float = 1.0, b: float = np.inf, **kw) -> "PsiFunction":
        if value <= 0:
            raise DomainError("constant psi needs a positive value")
        return cls(fn=lambda p: np.full(np.shape(p), float(value)), a=a, b=b,
                   name=f"const({value:g})", **kw)

    @classmethod
    def degenerate(cls, r: float, value: float = 1.0) -> "PsiFunction":
        """psi equal to ``value`` at the single order r and +inf elsewhere."""
        return cls(fn=lambda p: np.full(np.shape(p), float(value)),
                   a=r, b=r, name=f"delta@{r:g}", degenerate_at=float(r))


@dataclass(frozen=True)
class MomentFunction:
    """Map p -> |eta|_p = (E|eta|^p)^{1/p} on the interval (a, b).

    ``source`` tags the origin: "closed-form" or "empirical".  Empirical
    instances carry the replica count and a batch standard-error map used
    by audits for statistical slack.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    source: str = "closed-form"
    a: float = 1.0
    b: float = np.inf
    replicas: Optional[int] = None
    se_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "moments"

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        scalar = p.ndim == 0
        p1 = np.atleast_1d(p)
        out = np.full(p1.shape, np.inf)
        inside = (p1 > self.a * (1 - 1e-12)) & (p1 < self.b)
        if inside.any():
            out[inside] = self.fn(p1[inside])
        return float(out[0]) if scalar else out

    def standard_error(self, p):
        p = np.asarray(p, dtype=float)
        scalar = p.ndim == 0
        if self.se_fn is None:
            out = np.zeros(np.atleast_1d(p).shape)
        else:
            out = np.atleast_1d(self.se_fn(p))
        return float(out[0]) if scalar else out

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "MomentFunction":
        if sigma < 0:
            raise DomainError("sigma must be nonnegative")
        if sigma == 0:
            return cls.constant(0.0)
        return cls(fn=lambda p: sigma * gaussian_moment(p), source="closed-form",
                   name=f"gaussian({sigma:g})")

    @classmethod
    def constant(cls, c: float) -> "MomentFunction":
        c = abs(float(c))
        return cls(fn=lambda p: np.full(np.shape(p), c), source="closed-form",
                   name=f"const({c:g})")

    @classmethod
    def from_samples(cls, values, n_batches: int = 16, name: str = "empirical") -> "MomentFunction":
        """Empirical moment function of an i.i.d. sample.

        Norms are computed in log space so large orders do not overflow.
        Standard errors come from the spread of ``n_batches`` contiguous
        batch estimates.
        """
        x = np.abs(np.asarray(values, dtype=float).ravel())
        if x.size < 2:
            raise DomainError("need at least two sample values")
        with np.errstate(divide="ignore"):
            logx = np.log(x)

        def norms(p, _logx=logx):
            p = np.atleast_1d(np.asarray(p, dtype=float))
            lm = logsumexp(p[:, None] * _logx[None, :], axis=1) - np.log(_logx.size)
            return np.exp(lm / p)

        nb = int(max(2, min(n_batches, x.size // 2)))
        edges = np.linspace(0, x.size, nb + 1).astype(int)
        parts = [logx[edges[i]:edges[i + 1]] for i in range(nb)]

        def se(p, _parts=parts):
            p = np.atleast_1d(np.asarray(p, dtype=float))
            batch = np.empty((len(_parts), p.size))
            for i, part in enumerate(_parts):
                lm = logsumexp(p[:, None] * part[None, :], axis=1) - np.log(part.size)
                batch[i] = np.exp(lm / p)
            return batch.std(axis=0, ddof=1) / np.sqrt(len(_parts))

        return cls(fn=norms, source="empirical", replicas=int(x.size), se_fn=se, name=name)

    def validate_monotone(self, grid=None, se_slack: float = 3.0) -> None:
        """Check the Lyapunov ordering |eta|_p nondecreasing on a grid.

        Empirical sources get ``se_slack`` standard errors of room at each
        grid pair; closed forms a small fixed tolerance.
        """
        if grid is None:
            hi = min(self.b * (1 - _EPS_MARGIN), _P_MAX_DEFAULT)
            grid = np.geomspace(max(self.a, 1.0) * (1 + _EPS_MARGIN), hi, 64)
        grid = np.asarray(grid, dtype=float)
        v = self(grid)
        drop = v[:-1] - v[1:]
        if self.source == "empirical":
            se = self.standard_error(grid)
            allowed = se_slack * (se[:-1] + se[1:])
        else:
            allowed = 1e-9 * (1.0 + np.abs(v[:-1]))
        bad = drop > allowed
        if bad.any():
            k = int(np.argmax(bad))
            raise DomainError(
                f"{self.name} decreases between p={grid[k]:.4g} and p={grid[k + 1]:.4g} "
                f"({v[k]:.6g} -> {v[k + 1]:.6g}) beyond tolerance"
            )


def _refine_max(fn, lo: float, hi: float, iters: int = 96) -> float:
    """Golden-section maximum of a scalar function on [lo, hi]."""
    a, b = float(lo), float(hi)
    for _ in range(iters):
        d = _GOLDEN * (b - a)
        m1, m2 = b - d, a + d
        if fn(m1) > fn(m2):
            b = m2
        else:
            a = m1
    m = 0.5 * (a + b)
    return max(fn(m), fn(lo), fn(hi))


def _grid_sup(values: np.ndarray, grid: np.ndarray, fn, tail_len: int = 8,
              open_ended: bool = True):
    """Shared sup-over-p logic: grid max, divergence flag, local refinement.

    With ``open_ended`` set, values climbing strictly into the upper end
    of the grid report +inf, since the grid is then a p_max clamp of an
    infinite support and the unclamped sup keeps growing.  Finite
    supports pass ``open_ended=False``: their grid ends at the genuine
    support edge, where a right-edge maximum is a legitimate sup.
    """
    if np.any(np.isinf(values)):
        return np.inf
    j = int(np.argmax(values))
    n = len(values)
    t = min(tail_len, n)
    if open_ended and j == n - 1 and t >= 2 and np.all(np.diff(values[-t:]) > 0):
        return np.inf
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, n - 1)]
    return float(max(_refine_max(fn, lo, hi), values.max()))


def gpsi_norm(moments: MomentFunction, psi: PsiFunction) -> float:
    """sup over p of |eta|_p / psi(p) on psi's support.

    The sup is taken on the clamped tabulation grid and refined by
    golden section around the grid argmax; a strictly increasing run
    into the upper margin is reported as +inf.
    """
    if psi.degenerate_at is not None:
        r = psi.degenerate_at
        return float(np.asarray(moments(np.array([r])))[0] / psi.fn(np.array([r]))[0])
    g = psi.grid
    vals = np.asarray(moments(g), dtype=float) / psi.fn(g)

    def f(p):
        return float(np.asarray(moments(np.array([p])))[0] / psi.fn(np.array([p]))[0])

    return _grid_sup(vals, g, f, open_ended=np.isinf(psi.b))


def fundamental_function(psi: PsiFunction, delta: float) -> float:
    """sup over p of delta^{1/p} / psi(p), for delta in (0, 1]."""
    delta = float(delta)
    if not 0.0 < delta <= 1.0:
        raise DomainError(f"delta must lie in (0, 1], got {delta:g}")
    if psi.degenerate_at is not None:
        r = psi.degenerate_at
        return float(delta ** (1.0 / r) / psi.fn(np.array([r]))[0])
    g = psi.grid
    vals = delta ** (1.0 / g) / psi.fn(g)

    def f(p):
        return float(delta ** (1.0 / p) / psi.fn(np.array([p]))[0])

    return _grid_sup(vals, g, f, open_ended=np.isinf(psi.b))


def natural_psi(family: Sequence[MomentFunction], name: str = "natural") -> PsiFunction:
    """Pointwise sup of the moment functions of a family.

    The members must share a nonempty moment interval; the result is a
    psi-function on that intersection.
    """
    fam = list(family)
    if not fam:
        raise NoCommonSupportError("empty family")
    a = max(m.a for m in fam)
    b = min(m.b for m in fam)
    if not a < b:
        raise NoCommonSupportError(
            f"moment intervals intersect to the empty set (a={a:g}, b={b:g})"
        )

    def fn(p, _fam=fam):
        return np.maximum.reduce([np.asarray(m(p), dtype=float) for m in _fam])

    return PsiFunction(fn=fn, a=max(a, 1.0), b=b, name=name)


def psi_theta(psi: PsiFunction, theta: float) -> PsiFunction:
    """Weight rescaling psi(p) / (1 - theta/p); requires a > theta."""
    theta = float(theta)
    if theta < 0:
        raise DomainError("theta must be nonnegative")
    if theta == 0.0:
        return psi
    if psi.a <= theta:
        raise SupportBelowThetaError(
            f"support starts at {psi.a:g} <= theta = {theta:g}"
        )
    if psi.degenerate_at is not None:
        r = psi.degenerate_at
        value = float(psi.fn(np.array([r]))[0]) / (1.0 - theta / r)
        return PsiFunction.degenerate(r, value=value)
    return PsiFunction(
        fn=lambda p, _f=psi.fn: np.asarray(_f(p), dtype=float) / (1.0 - theta / p),
        a=psi.a, b=psi.b, name=f"{psi.name}/(1-{theta:g}/p)",
        p_max=psi.p_max, eps=psi.eps, n_grid=psi.n_grid,
    )


def psi_rosenthal(psi: PsiFunction, c_r: float = ROSENTHAL_CONSTANT) -> PsiFunction:
    """Weight carrying the partial-sum moment growth, psi(p) * c_r p/(e ln p).

    Matches the normalized-sum bound |n^{-1/2} sum|_p <= c_r p/(e ln p) |term|_p,
    so the rescaled weight controls partial sums whenever psi controls single
    terms.  Needs the support to start above 1 after clamping so ln p > 0.
    """
    if psi.degenerate_at is not None:
        r = psi.degenerate_at
        if r <= 1.0:
            raise DomainError("rosenthal weight needs order > 1")
        value = float(psi.fn(np.array([r]))[0]) * c_r * r / (np.e * np.log(r))
        return PsiFunction.degenerate(r, value=value)
    return PsiFunction(
        fn=lambda p, _f=psi.fn: np.asarray(_f(p), dtype=float) * c_r * p / (np.e * np.log(p)),
        a=psi.a, b=psi.b, name=f"rosenthal({psi.name})",
        p_max=psi.p_max, eps=psi.eps, n_grid=psi.n_grid,
    )


def gaussian_mgf(sigma: float) -> Callable[[np.ndarray], np.ndarray]:
    """lam -> exp(sigma^2 lam^2 / 2)."""
    s2 = float(sigma) ** 2

    def mgf(lam):
        lam = np.asarray(lam, dtype=float)
        return np.exp(0.5 * s2 * lam * lam)

    return mgf


def empirical_mgf(values, weights=None) -> Callable[[np.ndarray], np.ndarray]:
    """Weighted sample moment generating function lam -> sum_j w_j exp(lam x_j).

    Overflowing entries propagate as +inf, which the exponential-norm
    solver reports as a growth-condition violation.
    """
    x = np.asarray(values, dtype=float).ravel()
    if weights is None:
        w = np.full(x.shape, 1.0 / x.size)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != x.shape:
            raise DomainError("weights must match values")
        w = w / w.sum()

    def mgf(lam, _x=x, _w=w):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        with np.errstate(over="ignore"):
            return np.exp(lam[:, None] * _x[None, :]) @ _w

    return mgf


def bphi_norm(mgf: Callable[[np.ndarray], np.ndarray], phi: ConvexSymbol,
              iters: int = 96, max_doublings: int = 200) -> float:
    """inf{tau >= 0 : E exp(lam xi) <= exp(phi(lam tau)) for grid lam}.

    The grid is phi's tabulation mirrored to negative lam.  Feasibility is
    monotone in tau, so bisection between the largest infeasible and the
    smallest known feasible tau converges to the norm.
    """
    lam = np.asarray(phi.tab_grid, dtype=float)
    lam = lam[lam > 0]
    if np.isfinite(phi.lambda0):
        lam = lam[lam < phi.lambda0]
    lam_full = np.concatenate([-lam[::-1], lam])
    m = np.atleast_1d(np.asarray(mgf(lam_full), dtype=float))
    if not np.all(np.isfinite(m)) or np.any(m <= 0.0):
        raise KramerViolationError(
            "moment generating function is not finite and positive on the grid"
        )
    logm = np.log(m)
    abs_lam = np.abs(lam_full)

    def feasible(tau):
        arg = abs_lam * tau
        inside = arg < phi.lambda0
        rhs = np.full(arg.shape, np.inf)
        if inside.any():
            rhs[inside] = phi.fn(arg[inside])
        return bool(np.all(logm <= rhs * (1 + 1e-12) + 1e-12))

    if feasible(0.0):
        return 0.0
    hi = 1.0
    for _ in range(max_doublings):
        if feasible(hi):
            break
        hi *= 2.0
    else:
        raise KramerViolationError("no finite tau satisfies the bound on the grid")
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def psi_from_phi(phi: ConvexSymbol, p_max: float = _P_MAX_DEFAULT) -> PsiFunction:
    """Weight p / phi^{-1}(p) on p >= 2, with the inverse taken by bisection.

    For tabulation-bounded phi the support ends where phi tops out; if phi
    never reaches level 2 the inverse does not exist on the needed range.
    """
    lam0 = phi.lambda0
    if np.isfinite(lam0):
        top = float(np.asarray(phi.fn(np.array([lam0 * (1 - 1e-9)])))[0])
        b = top
    else:
        b = np.inf
    if b <= 2.0 * (1.0 + 2.0 * _EPS_MARGIN):
        raise NotInvertibleError(
            f"phi tops out at {b:g}; cannot invert on levels >= 2"
        )

    def inv(p):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        hi = np.ones(p.shape)
        cap = lam0 * (1 - 1e-9) if np.isfinite(lam0) else np.inf
        for _ in range(400):
            vals = np.asarray(phi.fn(hi), dtype=float)
            need = vals < p
            if not need.any():
                break
            hi = np.where(need, np.minimum(hi * 2.0, cap), hi)
            if np.isfinite(cap) and np.all(hi[need] >= cap):
                break
        else:
            raise NotInvertibleError("phi grows too slowly to invert on the grid")
        if np.any(np.asarray(phi.fn(hi), dtype=float) < p * (1 - 1e-9)):
            raise NotInvertibleError("phi does not reach the requested level")
        lo = np.zeros(p.shape)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            low = np.asarray(phi.fn(mid), dtype=float) < p
            lo = np.where(low, mid, lo)
            hi = np.where(low, hi, mid)
        return 0.5 * (lo + hi)

    return PsiFunction(fn=lambda p: np.atleast_1d(np.asarray(p, dtype=float)) / inv(p),
                       a=2.0, b=b, name=f"p/inv({phi.name})", p_max=p_max)


def _psi_tilde_conjugate(psi: PsiFunction, xs: np.ndarray) -> np.ndarray:
    """Convex conjugate of p -> p log psi(p) over psi's support, per x."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if psi.degenerate_at is not None:
        r = psi.degenerate_at
        return xs * r - r * np.log(float(psi.fn(np.array([r]))[0]))
    g = psi.grid

    def tilde(p, _f=psi.fn):
        p = np.asarray(p, dtype=float)
        return p * np.log(np.asarray(_f(p), dtype=float))

    shim = SimpleNamespace(fn=tilde)
    return _conjugate_values(shim, xs, g, tilde(g))


def tail_bound(psi: PsiFunction, norm: float, z) -> np.ndarray:
    """Two-sided tail bound min(1, 2 exp(-conj(p log psi(p))(log(z/norm)))).

    Valid for z >= norm; the conjugate is taken over the clamped support,
    so the bound is conservative only up to the tabulation range.
    """
    norm = float(norm)
    if norm <= 0:
        raise DomainError("norm must be positive")
    z_arr = np.asarray(z, dtype=float)
    scalar = z_arr.ndim == 0
    z1 = np.atleast_1d(z_arr)
    if np.any(z1 < norm * (1 - 1e-12)):
        raise DomainError("tail bound needs z >= norm")
    x = np.log(np.maximum(z1, norm) / norm)
    conj = _psi_tilde_conjugate(psi, x)
    out = np.minimum(1.0, 2.0 * np.exp(-conj))
    return float(out[0]) if scalar else out


def young_from_psi(psi: PsiFunction, quadratic_constant: Optional[float] = None,
                   n_quad: int = 257, n_tail: int = 1025,
                   log_value_cap: float = 500.0) -> YoungFunction:
    """Young function with N(u) = C u^2 for |u| <= 3 and exp(conj(p log psi(p))(log u)) beyond.

    ``quadratic_constant`` defaults to the value making N continuous at
    u = 3.  The tabulation stops once log N reaches ``log_value_cap``.
    """
    x3 = np.log(3.0)
    c3 = float(_psi_tilde_conjugate(psi, np.array([x3]))[0])
    if quadratic_constant is None:
        quadratic_constant = np.exp(c3) / 9.0
    if quadratic_constant <= 0:
        raise DomainError("quadratic constant must be positive")

    x_hi = x3 + 1.0
    for _ in range(64):
        if float(_psi_tilde_conjugate(psi, np.array([x_hi]))[0]) >= log_value_cap:
            break
        x_hi += 1.0
    xs = np.linspace(x3, x_hi, n_tail)
    conj = _psi_tilde_conjugate(psi, xs)
    keep = conj <= log_value_cap
    if keep.sum() < 2:
        keep[:2] = True
    xs, conj = xs[keep], conj[keep]

    u_quad = np.linspace(0.0, 3.0, n_quad)
    n_quad_vals = quadratic_constant * u_quad ** 2
    u_tail = np.exp(xs[1:])
    g = np.concatenate([np.log1p(n_quad_vals), np.log1p(np.exp(conj[1:]))])
    u = np.concatenate([u_quad, u_tail])
    return YoungFunction.from_log_table(u, g)
