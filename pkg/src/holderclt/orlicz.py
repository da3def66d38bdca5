"""Young functions, Luxemburg norms, and convex-conjugate machinery.

The module computes Luxemburg (Orlicz) norms of weighted samples, the
Delta2 growth constant of a Young function, Young-Fenchel conjugates of
convex even symbols, the rescaled envelope sup_n n*phi(lambda/sqrt(n)),
and the chaining constant C(Phi) = Phi^{-1}(1) / (54 K(Phi)^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    Delta2DivergentError,
    DomainError,
    NonIntegrableError,
    UnboundedConjugateError,
)

__all__ = [
    "YoungFunction",
    "ConvexSymbol",
    "EmpiricalSample",
    "Delta2Result",
    "orlicz_norm",
    "orlicz_norm_batch",
    "delta2_constant",
    "young_fenchel",
    "phi_bar",
    "phi_bar_table",
    "phi_bar_young",
    "c_phi",
]

_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


@dataclass(frozen=True)
class YoungFunction:
    """Convex increasing Phi with Phi(0)=0, plus its inverse.

    ``domain_max``/``value_max`` are set for tabulated functions whose
    values are only known on a bounded range; evaluation beyond
    ``domain_max`` returns +inf and inversion beyond ``value_max`` raises.
    """

    kind: str
    fn: Callable[[np.ndarray], np.ndarray]
    inv_fn: Callable[[np.ndarray], np.ndarray]
    domain_max: float = np.inf
    value_max: float = np.inf

    def __call__(self, z):
        z = np.abs(np.asarray(z, dtype=float))
        if np.isinf(self.domain_max):
            return self.fn(z)
        out = np.where(z <= self.domain_max, self.fn(np.minimum(z, self.domain_max)), np.inf)
        return out

    def inverse(self, w):
        w = np.asarray(w, dtype=float)
        if np.any(w < 0):
            raise DomainError("inverse argument must be nonnegative")
        if np.isfinite(self.value_max) and np.any(w[np.isfinite(w)] > self.value_max * (1 + 1e-12)):
            raise DomainError(
                f"inverse argument exceeds tabulated range (max {self.value_max:.6g})"
            )
        finite = np.isfinite(w)
        if finite.all():
            return self.inv_fn(w)
        out = np.full(w.shape, np.inf)
        out[finite] = self.inv_fn(w[finite])
        return out

    @classmethod
    def power(cls, p: float) -> "YoungFunction":
        if p < 1:
            raise DomainError("power Young function needs p >= 1")
        return cls(kind=f"power({p:g})", fn=lambda z: z ** p, inv_fn=lambda w: w ** (1.0 / p))

    @classmethod
    def exp_quadratic(cls) -> "YoungFunction":
        """Phi(z) = exp(z^2/2) - 1."""
        return cls(
            kind="exp_quadratic",
            fn=lambda z: np.expm1(0.5 * z * z),
            inv_fn=lambda w: np.sqrt(2.0 * np.log1p(w)),
        )

    @classmethod
    def exp_power(cls, q: float) -> "YoungFunction":
        """Phi(z) = exp(|z|^q / q) - 1."""
        if q <= 1:
            raise DomainError("exp_power needs q > 1")
        return cls(
            kind=f"exp_power({q:g})",
            fn=lambda z: np.expm1(z ** q / q),
            inv_fn=lambda w: (q * np.log1p(w)) ** (1.0 / q),
        )

    @classmethod
    def exp_linear(cls) -> "YoungFunction":
        return cls(kind="exp_linear", fn=np.expm1, inv_fn=np.log1p)

    @classmethod
    def from_log_table(cls, u_grid: np.ndarray, log1p_values: np.ndarray,
                       tail_slope: Optional[float] = None) -> "YoungFunction":
        """Phi(u) = exp(g(u)) - 1 from a tabulation of g on [0, u_max].

        g must be nonnegative, increasing, with g(0) = 0.  Inversion uses
        linear interpolation of the monotone table, which is the bisection
        limit on the same data.

        With ``tail_slope`` set, g continues past u_max along
        g(u_max) + tail_slope*(u - u_max) and the value cap disappears.
        Use it only when g is known to be exactly linear there, as a
        Legendre transform is beyond its last kink; the slope must be at
        least the table's final slope so convexity survives.
        """
        u = np.asarray(u_grid, dtype=float)
        g = np.maximum.accumulate(np.asarray(log1p_values, dtype=float))
        if u[0] != 0.0 or g[0] != 0.0:
            raise DomainError("log table must start at (0, 0)")

        if tail_slope is None:
            def fn(z, _u=u, _g=g):
                return np.expm1(np.interp(z, _u, _g))

            def inv_fn(w, _u=u, _g=g):
                return np.interp(np.log1p(w), _g, _u)

            return cls(
                kind="log_table",
                fn=fn,
                inv_fn=inv_fn,
                domain_max=float(u[-1]),
                value_max=float(np.expm1(g[-1])),
            )

        s = float(tail_slope)
        if not np.isfinite(s) or s <= 0:
            raise DomainError("tail slope must be positive and finite")

        def fn(z, _u=u, _g=g, _s=s):
            z = np.asarray(z, dtype=float)
            out = np.interp(z, _u, _g)
            out = np.where(z > _u[-1], _g[-1] + _s * (z - _u[-1]), out)
            with np.errstate(over="ignore"):
                return np.expm1(out)

        def inv_fn(w, _u=u, _g=g, _s=s):
            lw = np.log1p(np.asarray(w, dtype=float))
            out = np.interp(lw, _g, _u)
            return np.where(lw > _g[-1], _u[-1] + (lw - _g[-1]) / _s, out)

        return cls(kind="log_table", fn=fn, inv_fn=inv_fn)


def _default_tab(lambda0: float) -> np.ndarray:
    hi = min(lambda0, 8.0) if np.isfinite(lambda0) else 8.0
    return np.linspace(0.0, hi, 257)


@dataclass(frozen=True)
class ConvexSymbol:
    """Even convex phi on (-lambda0, lambda0) with phi(0) = 0."""

    fn: Callable[[np.ndarray], np.ndarray]
    lambda0: float = np.inf
    tab_grid: np.ndarray = field(default=None)  # type: ignore[assignment]
    name: str = "phi"

    def __post_init__(self):
        if self.tab_grid is None:
            object.__setattr__(self, "tab_grid", _default_tab(self.lambda0))

    def __call__(self, lam):
        lam = np.abs(np.asarray(lam, dtype=float))
        if np.any(lam > self.lambda0 * (1 + 1e-12)):
            raise DomainError(f"{self.name} evaluated outside (-{self.lambda0:g}, {self.lambda0:g})")
        return self.fn(lam)

    @classmethod
    def quadratic(cls, a: float = 1.0) -> "ConvexSymbol":
        return cls(fn=lambda t: 0.5 * a * t * t, name=f"quadratic({a:g})")

    @classmethod
    def cosh_one(cls) -> "ConvexSymbol":
        return cls(fn=lambda t: np.cosh(t) - 1.0, name="cosh-1")

    @classmethod
    def log_cosh(cls) -> "ConvexSymbol":
        return cls(fn=lambda t: np.log(np.cosh(t)), name="log cosh")

    @classmethod
    def abs_value(cls) -> "ConvexSymbol":
        return cls(fn=np.abs, name="abs")

    @classmethod
    def from_tabulation(cls, grid: np.ndarray, values: np.ndarray, name: str = "tabulated") -> "ConvexSymbol":
        """Symbol from values on a positive grid.

        Interpolates phi(t)/t^2 rather than phi itself so the quadratic
        shape near zero survives; plain linear interpolation would make
        n*phi(lambda/sqrt(n)) blow up as n grows.
        """
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        pos = grid > 0
        g, v = grid[pos], values[pos]
        q = v / (g * g)

        def fn(t, _g=g, _q=q):
            t = np.asarray(t, dtype=float)
            return t * t * np.interp(t, _g, _q)

        return cls(fn=fn, lambda0=float(g[-1]), tab_grid=np.concatenate([[0.0], g]), name=name)

    def validate(self, grid: Optional[np.ndarray] = None, tol: float = 1e-9) -> None:
        """Assert phi(0)=0, evenness, and midpoint convexity on a grid."""
        if grid is None:
            grid = self.tab_grid
        grid = np.asarray(grid, dtype=float)
        if abs(float(self.fn(np.array([0.0]))[()] if np.ndim(self.fn(0.0)) else self.fn(0.0))) > tol:
            raise DomainError(f"{self.name}(0) != 0")
        v = self.fn(np.abs(grid))
        vm = self.fn(np.abs(-grid))
        if not np.allclose(v, vm, rtol=0, atol=tol * (1 + np.abs(v).max())):
            raise DomainError(f"{self.name} is not even")
        mid = self.fn(np.abs(0.5 * (grid[:-1] + grid[1:])))
        if np.any(mid > 0.5 * (v[:-1] + v[1:]) + tol * (1 + np.abs(v).max())):
            raise DomainError(f"{self.name} fails midpoint convexity")


@dataclass(frozen=True)
class EmpiricalSample:
    """Values with probability weights."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if v.shape != w.shape:
            raise DomainError("values and weights must have the same shape")
        if np.any(w < 0):
            raise DomainError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {w.sum()!r}, expected 1 within 1e-12")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, values) -> "EmpiricalSample":
        values = np.asarray(values, dtype=float)
        return cls(values=values, weights=np.full(values.shape, 1.0 / values.size))


def orlicz_norm_batch(values: np.ndarray, weights: np.ndarray, phi: YoungFunction,
                      iters: int = 64) -> np.ndarray:
    """Luxemburg norms of the rows of ``values`` under shared ``weights``.

    inf{k > 0 : sum_j w_j Phi(|v_j|/k) <= 1}, by bracketing and bisection.
    Rows that vanish identically get norm 0.
    """
    V = np.abs(np.atleast_2d(np.asarray(values, dtype=float)))
    w = np.asarray(weights, dtype=float)
    keep = w > 0
    V, w = V[:, keep], w[keep]

    def constraint(k):
        # k broadcast per row; rows with k=0 are excluded by callers
        return (phi(V / k[:, None]) * w).sum(axis=1)

    vmax = V.max(axis=1)
    out = np.zeros(len(V))
    live = vmax > 0
    if not live.any():
        return out if values.ndim > 1 else out[0]
    Vl = V[live]
    inv1_arr = phi.inverse(np.array([1.0]))
    inv1 = float(inv1_arr[0])
    if not np.isfinite(inv1) or inv1 <= 0:
        raise NonIntegrableError("Phi never reaches 1 on its domain")
    hi = Vl.max(axis=1) / inv1 * (1 + 1e-12)
    lo = hi.copy()
    # expand the lower bracket down until the constraint is violated
    for _ in range(200):
        ok = (phi(Vl / lo[:, None]) * w).sum(axis=1) <= 1.0
        if not ok.any():
            break
        lo[ok] *= 0.5
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        bad = (phi(Vl / mid[:, None]) * w).sum(axis=1) > 1.0
        lo = np.where(bad, mid, lo)
        hi = np.where(bad, hi, mid)
    out[live] = hi
    return out


def orlicz_norm(sample: EmpiricalSample, phi: YoungFunction) -> float:
    return float(orlicz_norm_batch(sample.values[None, :], sample.weights, phi)[0])


@dataclass(frozen=True)
class Delta2Result:
    """Grid supremum of Phi^{-1}(xy) / (Phi^{-1}(x) + Phi^{-1}(y))."""

    value: float
    divergent: bool
    decade_sups: np.ndarray
    grid_lo: float
    grid_hi: float

    @property
    def constant(self) -> float:
        return np.inf if self.divergent else self.value


def delta2_constant(phi: YoungFunction, grid_lo: float = 1e-6, grid_hi: float = 1e6,
                    points_per_decade: int = 200) -> Delta2Result:
    """Delta2 constant over a log grid, with a divergence flag.

    Divergence heuristic: the per-decade running supremum is strictly
    increasing over the last three decades and grows by more than 1.5x in
    total across them.  For tabulated Phi with a bounded value range the
    grid is clamped so that x*y stays invertible.
    """
    if np.isfinite(phi.value_max):
        grid_hi = min(grid_hi, np.sqrt(phi.value_max * 0.999))
        grid_lo = min(grid_lo, grid_hi / 1e4)
    n_dec = np.log10(grid_hi / grid_lo)
    n_pts = int(round(n_dec * points_per_decade)) + 1
    g = np.logspace(np.log10(grid_lo), np.log10(grid_hi), n_pts)
    inv_g = phi.inverse(g)
    inv_prod = phi.inverse(np.outer(g, g))
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = inv_prod / (inv_g[:, None] + inv_g[None, :])
    ratio = np.nan_to_num(ratio, nan=0.0, posinf=0.0)

    decades = np.arange(np.ceil(np.log10(g[0]) - 1e-9) + 1, np.log10(g[-1]) + 1e-9)
    sups = []
    run = 0.0
    prev = 0
    for dec in decades:
        idx = int(np.searchsorted(g, 10.0 ** dec * (1 + 1e-12), side="right"))
        if idx > prev:
            run = max(run, float(ratio[prev:idx, :idx].max()), float(ratio[:idx, prev:idx].max()))
            prev = idx
        sups.append(run)
    sups = np.array(sups)
    divergent = False
    if len(sups) >= 4:
        tail = sups[-4:]
        divergent = bool(np.all(np.diff(tail) > 0) and tail[-1] > 1.5 * tail[0])
    return Delta2Result(value=float(ratio.max()), divergent=divergent,
                        decade_sups=sups, grid_lo=float(g[0]), grid_hi=float(g[-1]))


def _conjugate_values(g: ConvexSymbol, xs: np.ndarray, y: np.ndarray, gy: np.ndarray,
                      iters: int = 48) -> np.ndarray:
    """sup_t xs*t - g(t), grid argmax over y then golden-section refinement.

    48 golden steps shrink the bracket by ~1e-10, so the value error is
    far below every tolerance used downstream while keeping nested
    conjugations (conjugate-of-conjugate evaluation) affordable.
    """
    h = np.outer(xs, y) - gy[None, :]
    j = np.argmax(h, axis=1)
    a = y[np.maximum(j - 1, 0)]
    b = y[np.minimum(j + 1, len(y) - 1)]
    for _ in range(iters):
        d = _GOLDEN * (b - a)
        m1 = b - d
        m2 = a + d
        f1 = xs * m1 - g.fn(m1)
        f2 = xs * m2 - g.fn(m2)
        take1 = f1 > f2
        b = np.where(take1, m2, b)
        a = np.where(take1, a, m1)
    t = 0.5 * (a + b)
    vals = xs * t - g.fn(t)
    # the endpoints of the bracket may beat the interior for kinked g
    for cand in (y[j], y[np.maximum(j - 1, 0)], y[np.minimum(j + 1, len(y) - 1)]):
        vals = np.maximum(vals, xs * cand - g.fn(cand))
    return vals


def young_fenchel(g: ConvexSymbol, x_grid: np.ndarray) -> ConvexSymbol:
    """Young-Fenchel conjugate g*(x) = sup_y (xy - g(y)) as a ConvexSymbol.

    Raises UnboundedConjugateError when some |x| exceeds the slope range
    seen on g's tabulation grid.  The returned symbol evaluates the
    conjugate exactly (fresh supremum per call), so conjugating twice
    recovers g to high accuracy.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    y = g.tab_grid
    if y[0] > 0:
        y = np.concatenate([[0.0], y])
    gy = g.fn(y)
    s_max = (gy[-1] - gy[-2]) / (y[-1] - y[-2])
    if np.any(np.abs(x_grid) > s_max * (1 + 1e-9) + 1e-12):
        worst = float(np.abs(x_grid).max())
        raise UnboundedConjugateError(
            f"conjugate unbounded at |x|={worst:g}: slope range of {g.name} is [{-s_max:g}, {s_max:g}]"
        )

    def conj(xs, _y=y, _gy=gy):
        xs = np.abs(np.asarray(xs, dtype=float))
        scalar = xs.ndim == 0
        vals = _conjugate_values(g, np.atleast_1d(xs), _y, _gy)
        return vals[0] if scalar else vals

    tab = np.unique(np.abs(x_grid))
    if tab[0] > 0:
        tab = np.concatenate([[0.0], tab])
    return ConvexSymbol(fn=conj, lambda0=float(s_max * (1 + 1e-9)), tab_grid=tab,
                        name=f"({g.name})*")


def phi_bar_table(phi: ConvexSymbol, lams: np.ndarray, n_max: int = 10 ** 6,
                  chunk: int = 4096, stop_after: int = 64) -> np.ndarray:
    """max over n in 1..n_max of n*phi(lam/sqrt(n)), per lambda.

    Stops early once every lambda has seen the sequence decrease for
    ``stop_after`` consecutive n.
    """
    lams = np.abs(np.asarray(lams, dtype=float))
    if np.any(lams >= phi.lambda0):
        raise DomainError(f"phi_bar needs |lambda| < lambda0 = {phi.lambda0:g}")
    best = np.full(lams.shape, -np.inf)
    prev = np.full(lams.shape, -np.inf)
    streak = np.zeros(lams.shape, dtype=int)
    n0 = 1
    while n0 <= n_max:
        ns = np.arange(n0, min(n0 + chunk, n_max + 1), dtype=float)
        vals = ns[:, None] * phi.fn(lams[None, :] / np.sqrt(ns)[:, None])
        best = np.maximum(best, vals.max(axis=0))
        # trailing consecutive-decrease streaks across the chunk boundary
        first = np.concatenate([prev[None, :], vals[:-1]])
        dec = vals < first
        for i in range(len(ns)):
            streak = np.where(dec[i], streak + 1, 0)
        prev = vals[-1]
        if np.all(streak >= stop_after):
            break
        n0 += chunk
    return best


def phi_bar(phi: ConvexSymbol, lam: float, n_max: int = 10 ** 6) -> float:
    return float(phi_bar_table(phi, np.array([lam]), n_max=n_max)[0])


def phi_bar_young(phi: ConvexSymbol, lambda_max: Optional[float] = None,
                  n_lambda: int = 257, n_u: int = 2049,
                  n_max: int = 10 ** 6) -> YoungFunction:
    """Young function exp(conj(phi_bar)(u)) - 1 built from phi.

    phi_bar is tabulated on [0, lambda_max], conjugated on the covered
    slope range, and wrapped as a tabulated Young function.  Past the
    covered slopes the conjugate is exactly linear with slope
    lambda_max, so the table carries that analytic tail; without it the
    truncation would masquerade as a divergent K constant.
    """
    if lambda_max is None:
        lambda_max = min(phi.lambda0 * 0.999, 8.0) if np.isfinite(phi.lambda0) else 8.0
    lam_grid = np.linspace(0.0, lambda_max, n_lambda)
    bar_vals = phi_bar_table(phi, lam_grid, n_max=n_max)
    bar = ConvexSymbol.from_tabulation(lam_grid, bar_vals, name=f"bar({phi.name})")
    s_max = (bar_vals[-1] - bar_vals[-2]) / (lam_grid[-1] - lam_grid[-2])
    u_grid = np.linspace(0.0, s_max * 0.999, n_u)
    lam_full = np.concatenate([[0.0], lam_grid[1:]])
    conj = _conjugate_values(bar, u_grid, lam_full, bar.fn(lam_full))
    conj = np.maximum.accumulate(np.maximum(conj, 0.0))
    conj[0] = 0.0
    return YoungFunction.from_log_table(u_grid, conj, tail_slope=float(lambda_max))


def c_phi(phi: YoungFunction, delta2: Optional[Delta2Result] = None) -> float:
    """C(Phi) = Phi^{-1}(1) / (54 K(Phi)^2)."""
    if delta2 is None:
        delta2 = delta2_constant(phi)
    if delta2.divergent:
        raise Delta2DivergentError(f"Delta2 constant diverges for {phi.kind}")
    inv1 = float(phi.inverse(np.array([1.0]))[0])
    return inv1 / (54.0 * delta2.value ** 2)
