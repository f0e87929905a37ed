"""Independent ground-truth engines for the CR optimisation.

* :func:`brute_force_cr` enumerates P_{U|X} on a grid with P_X fixed.
* :func:`bsc_family_bound` is the best auxiliary of the form U = X xor Z.
* :class:`LagrangianGridOracle` approximately minimises L(., lambda) over the
  whole simplex and backs the non-convex solver and the Nash-gap estimate.
* :func:`finite_diff_check`, :func:`lemma1_check` and
  :func:`nonconvexity_witness` are numerical identity checks.

Only :mod:`prob_core` is used for information measures here; nothing in
this module calls the optimiser except :func:`finite_diff_check`, which
exists to test it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import bisect

from .errors import ConfigError, ValidationError
from .prob_core import JointPMF, binary_entropy_f, entropy_array, ux_information

LN2 = float(np.log(2.0))

__all__ = [
    "GridSpec",
    "compositions",
    "LagrangianGridOracle",
    "brute_force_cr",
    "bsc_family_bound",
    "envelope_cr",
    "anchored_lagrangian",
    "finite_diff_check",
    "random_lemma1_joint",
    "lemma1_check",
    "nonconvexity_witness",
]


@dataclass(frozen=True)
class GridSpec:
    """Coarse grid step on each conditional plus local refinement schedule."""

    coarse_step: float = 0.01
    refine_rounds: int = 2
    refine_factor: int = 10

    def __post_init__(self):
        if not self.coarse_step > 0 or self.coarse_step > 0.5:
            raise ValidationError("coarse_step must lie in (0, 1/2]")
        if self.refine_rounds < 0 or self.refine_factor < 2:
            raise ValidationError("refine_rounds >= 0 and refine_factor >= 2 required")

    @property
    def divisions(self) -> int:
        return int(round(1.0 / self.coarse_step))

    @property
    def final_step(self) -> float:
        return self.coarse_step / self.refine_factor**self.refine_rounds


def compositions(total: int, parts: int = 3, descending: bool = False) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    rows = []
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        edges = (-1,) + cut + (total + parts - 1,)
        v = [edges[i + 1] - edges[i] - 1 for i in range(parts)]
        if not descending or all(v[i] >= v[i + 1] for i in range(parts - 1)):
            rows.append(v)
    return np.array(rows, dtype=np.int64)


def _binary_only(source: JointPMF) -> None:
    if not isinstance(source, JointPMF):
        raise ValidationError("source must be a JointPMF")
    if source.nx != 2:
        raise ValidationError("grid oracles support binary X only")


def _b_eff(source: JointPMF, cap_budget: float) -> float:
    if not np.isfinite(cap_budget) or cap_budget < 0:
        raise ValidationError(f"cap_budget must be >= 0, got {cap_budget!r}")
    return min(float(cap_budget), max(source.cond_entropy_x_given_y(), 0.0))


def _local_offsets(dim: int, radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    return np.array(list(itertools.product(r, repeat=dim)), dtype=float)


# ------------------------------------------------------ full-simplex oracle

class LagrangianGridOracle:
    """Approximate ``argmin_theta L(theta, lambda)`` for binary X.

    theta is parameterised as ``(a P_{U|X=0}, (1-a) P_{U|X=1})``.  A coarse
    grid (first conditional sorted, which loses nothing by relabelling U) is
    scanned, then a pattern search shrinks the step ``refine_rounds`` times.
    """

    def __init__(self, source: JointPMF, grid: GridSpec = GridSpec(0.05, 2, 10),
                 max_rho: float = 0.05):
        _binary_only(source)
        self.source = source
        self.grid = grid
        self.rho = self.rho_estimate(grid)
        if self.rho > max_rho:
            raise ConfigError(
                f"oracle grid too coarse: rho estimate {self.rho:.3g} > {max_rho}")
        n = grid.divisions
        a = np.arange(n + 1) / n
        c0 = compositions(n, 3, descending=True) / n
        c1 = compositions(n, 3) / n
        A, I0, I1 = np.meshgrid(np.arange(a.size), np.arange(len(c0)),
                                np.arange(len(c1)), indexing="ij")
        self._params = np.concatenate(
            [a[A.ravel(), None], c0[I0.ravel(), :2], c1[I1.ravel(), :2]], 1)
        self._feats = self._features(self._params)

    @staticmethod
    def rho_estimate(grid: GridSpec) -> float:
        """Entropy-continuity bound at the final step (6 cells, TV = step)."""
        d = min(grid.final_step, 0.5)
        return float(d * np.log(5.0) + binary_entropy_f(d))

    @property
    def final_step(self) -> float:
        return self.grid.final_step

    @staticmethod
    def thetas(params: np.ndarray) -> np.ndarray:
        a = params[..., 0:1]
        c0 = np.concatenate([params[..., 1:3], 1 - params[..., 1:2] - params[..., 2:3]], -1)
        c1 = np.concatenate([params[..., 3:5], 1 - params[..., 3:4] - params[..., 4:5]], -1)
        return np.stack([a * c0, (1 - a) * c1], -1)

    def _features(self, params: np.ndarray) -> np.ndarray:
        th = self.thetas(params)
        iux, ic = ux_information(th, self.source.channel)
        px = self.source.px
        return np.stack([-iux, ic, params[..., 0] - px[0], 1 - params[..., 0] - px[1]], -1)

    @staticmethod
    def _coeffs(lam: np.ndarray) -> np.ndarray:
        return np.stack([np.ones(len(lam)), lam[:, 0], lam[:, 1] - lam[:, 2],
                         lam[:, 3] - lam[:, 4]], -1)

    def minimize(self, lam, cap_budget: float):
        """Returns ``(theta (B,3,2), L_min (B,))`` for multipliers ``(B, 5)``."""
        lam = np.atleast_2d(np.asarray(lam, dtype=float))
        b = _b_eff(self.source, cap_budget)
        coef = self._coeffs(lam)
        vals = self._feats @ coef.T
        k = np.argmin(vals, axis=0)
        p = self._params[k].copy()
        best = vals[k, np.arange(len(k))]
        offs = _local_offsets(5, 1)
        for r in range(1, self.grid.refine_rounds + 1):
            h = self.grid.coarse_step / self.grid.refine_factor**r
            for _ in range(2 * self.grid.refine_factor):
                cand = p[:, None, :] + h * offs[None]
                ok = ((cand[..., 0] >= 0) & (cand[..., 0] <= 1) & (cand[..., 1:] >= 0).all(-1)
                      & (cand[..., 1] + cand[..., 2] <= 1) & (cand[..., 3] + cand[..., 4] <= 1))
                cand = np.clip(cand, 0.0, 1.0)
                v = np.einsum("bkf,bf->bk", self._features(cand), coef)
                v = np.where(ok, v, np.inf)
                j = np.argmin(v, axis=1)
                vj = v[np.arange(len(j)), j]
                moved = vj < best - 1e-15
                if not moved.any():
                    break
                p[moved] = cand[moved, j[moved]]
                best[moved] = vj[moved]
        return self.thetas(p), best - lam[:, 0] * b


# ----------------------------------------------------- brute force (slice)

@lru_cache(maxsize=16)
def _frontier(table_bytes: bytes, n: int):
    table = np.frombuffer(table_bytes, dtype=float).reshape(2, 2)
    src = JointPMF(table)
    px, W = src.px, src.channel
    c0 = compositions(n, 3, descending=True) / n
    c1 = compositions(n, 3) / n
    cost = np.empty((len(c0), len(c1)))
    value = np.empty_like(cost)
    for i in range(len(c0)):
        th = np.stack([np.broadcast_to(c0[i], c1.shape) * px[0], c1 * px[1]], -1)
        value[i], cost[i] = ux_information(th, W)
    cost, value = cost.ravel(), value.ravel()
    order = np.argsort(cost, kind="stable")
    cs, vs = cost[order], value[order]
    return c0, c1, cs, order, vs


def _slice_eval(c0, c1, px, W):
    th = np.stack([c0 * px[0], c1 * px[1]], -1)
    iux, ic = ux_information(th, W)
    return iux, ic


def _boundary_polish(c0, c1, A, Bc, iux, ic, best, b, px, W, top: int = 16):
    """Bisect toward better infeasible neighbours to land on I(U;X|Y) = b.

    Batched over seeds: ``c0, c1`` are (K,3), ``A, Bc`` are (K,M,3).
    """
    K = c0.shape[0]
    score = np.where((ic > b) & (iux > best[:, None]), iux, -np.inf)
    sel = np.argsort(-score, axis=1)[:, :top]
    live = np.take_along_axis(score, sel, 1) > -np.inf
    rows = np.arange(K)[:, None]
    d0 = np.nan_to_num(A[rows, sel] - c0[:, None])
    d1 = np.nan_to_num(Bc[rows, sel] - c1[:, None])
    lo = np.zeros(sel.shape)
    hi = np.ones(sel.shape)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        _, icm = _slice_eval(c0[:, None] + mid[..., None] * d0,
                             c1[:, None] + mid[..., None] * d1, px, W)
        ok = icm <= b
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    q0 = c0[:, None] + lo[..., None] * d0
    q1 = c1[:, None] + lo[..., None] * d1
    v, icq = _slice_eval(q0, q1, px, W)
    v = np.where(live & (icq <= b), v, -np.inf)
    j = np.argmax(v, 1)
    r = np.arange(K)
    return v[r, j], q0[r, j], q1[r, j]


def brute_force_cr(source: JointPMF, cap_budget: float,
                   grid: GridSpec = GridSpec(), seeds: int = 1,
                   radius: int | None = None) -> tuple[float, np.ndarray]:
    """max I(U;X) s.t. I(U;X|Y) <= min(b, H(X|Y)) with P_X fixed, |U| = 3.

    The coarse grid is evaluated once per source and cached.  The ``seeds``
    best feasible grid points are refined by a pattern search on both
    conditionals at steps ``coarse_step / refine_factor**r``; when no
    feasible neighbour improves, the search bisects toward better infeasible
    neighbours so the constraint ends up active.
    """
    _binary_only(source)
    b = _b_eff(source, cap_budget)
    tol = 1e-12
    px, W = source.px, source.channel
    c0g, c1g, cs, order, vs = _frontier(np.ascontiguousarray(source.table).tobytes(),
                                        grid.divisions)
    pos = int(np.searchsorted(cs, b + tol, side="right"))
    if pos == 0:
        raise ValidationError("no feasible grid point")
    k = min(seeds, pos)
    top = np.argpartition(-vs[:pos], k - 1)[:k]
    top = top[np.lexsort((order[top], -vs[top]))]
    idx = order[top]
    c0 = c0g[idx // len(c1g)].copy()
    c1 = c1g[idx % len(c1g)].copy()
    best = vs[top].copy()
    offs = _local_offsets(2, grid.refine_factor if radius is None else radius)
    for r in range(1, grid.refine_rounds + 1):
        h = grid.coarse_step / grid.refine_factor**r
        for _ in range(20 * grid.refine_factor):
            q0 = _nbrs(c0, h, offs)
            q1 = _nbrs(c1, h, offs)
            n0, n1 = q0.shape[1], q1.shape[1]
            A = np.repeat(q0, n1, 1)
            Bc = np.tile(q1, (1, n0, 1))
            iux, ic = _slice_eval(A, Bc, px, W)
            valid = np.isfinite(A).all(-1) & np.isfinite(Bc).all(-1)
            feas = np.where(valid & (ic <= b + tol), iux, -np.inf)
            j = np.argmax(feas, 1)
            fj = feas[np.arange(k), j]
            up = fj > best + 1e-15
            if not up.any():
                pol = _boundary_polish(c0, c1, A, Bc, np.where(valid, iux, -np.inf),
                                       ic, best, b, px, W)
                up = pol[0] > best + 1e-15
                if not up.any():
                    break
                best[up], c0[up], c1[up] = pol[0][up], pol[1][up], pol[2][up]
                continue
            best[up], c0[up], c1[up] = fj[up], A[up, j[up]], Bc[up, j[up]]
    w = int(np.argmax(best))
    theta = np.stack([c0[w] * px[0], c1[w] * px[1]], -1)
    return max(float(best[w]), 0.0), theta


def _nbrs(c, h, offs):
    """Neighbours of each row of ``c`` (K,3); invalid ones are set to nan."""
    q = c[:, None, :2] + h * offs[None]
    q = np.concatenate([q, 1 - q.sum(-1, keepdims=True)], -1)
    bad = (q < -1e-15).any(-1)
    q = np.clip(q, 0.0, 1.0)
    q[bad] = np.nan
    return q


def bsc_family_bound(mu: float, cap_budget: float) -> float:
    """ln 2 - h(alpha) where h(mu*alpha) - h(alpha) = min(b, f(mu)).

    ``mu*alpha = alpha (1 - mu) + (1 - alpha) mu``.  The left side falls
    from f(mu) at alpha = 0 to 0 at alpha = 1/2, so the root is bracketed.
    """
    if not (0.0 <= mu <= 0.5):
        raise ValidationError(f"mu must lie in [0, 1/2], got {mu!r}")
    if not np.isfinite(cap_budget) or cap_budget < 0:
        raise ValidationError("cap_budget must be >= 0")
    f = binary_entropy_f(mu)
    target = min(float(cap_budget), f)
    if target >= f:
        return LN2
    if target <= 0:
        return 0.0

    def phi(a):
        return binary_entropy_f(a * (1 - mu) + (1 - a) * mu) - binary_entropy_f(a) - target

    alpha = bisect(phi, 0.0, 0.5, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return LN2 - binary_entropy_f(alpha)


def _lower_envelope_at(q: np.ndarray, v: np.ndarray, x0: float) -> float:
    """Lower convex envelope of points (q, v), q ascending, evaluated at x0."""
    hull: list[int] = []
    for i in range(q.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if (v[b] - v[a]) * (q[i] - q[a]) >= (v[i] - v[a]) * (q[b] - q[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    hq, hv = q[hull], v[hull]
    return float(np.interp(x0, hq, hv))


def envelope_cr(source: JointPMF, cap_budget: float, points: int = 20001,
                s_max: float = 1e3) -> float:
    """Frontier value via the dual of the concave-envelope characterisation.

    For s >= 0, ``max I(U;X) - s I(U;X|Y)`` equals
    ``(1-s) H(X) + s H(Y) - env_s(P_X(0))`` where ``env_s`` is the lower
    convex envelope of ``(1-s) H(q) + s H(qW)`` over ``q = P(X=0|U=u)``.  The
    frontier is concave in the budget, so it is the minimum over s of the
    dual function plus ``s b``.  Binary X only; accurate to the q-grid
    resolution (about 1e-8 at the default).
    """
    from scipy.optimize import minimize_scalar

    _binary_only(source)
    b = _b_eff(source, cap_budget)
    px, W = source.px, source.channel
    hx = float(entropy_array(px))
    hy = float(entropy_array(source.py))
    if b >= source.cond_entropy_x_given_y() - 1e-15:
        return hx
    q = np.linspace(0.0, 1.0, points)
    hq = entropy_array(np.stack([q, 1 - q], -1), axis=-1)
    out = q[:, None] * W[0] + (1 - q)[:, None] * W[1]
    hqw = entropy_array(out, axis=-1)

    def dual(s):
        env = _lower_envelope_at(q, (1 - s) * hq + s * hqw, px[0])
        return (1 - s) * hx + s * hy - env + s * b

    res = minimize_scalar(dual, bounds=(0.0, s_max), method="bounded",
                          options={"xatol": 1e-10, "maxiter": 500})
    return float(min(max(min(res.fun, dual(0.0)), 0.0), hx))


# ------------------------------------------------------- identity checks

def anchored_lagrangian(theta, lam, source: JointPMF, cap_budget: float) -> float:
    """Lagrangian with H(X) and H(X|Y) fixed at their source values.

    Evaluated on an unnormalised table; it agrees with the true Lagrangian
    whenever theta has the source X-marginal.
    """
    t = np.asarray(theta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    W = source.channel
    h_src_x = entropy_array(source.px)
    h_src_xy = source.cond_entropy_x_given_y()

    def h(a):
        return -np.sum(a * np.log(a), where=a > 0)

    uxy = t[:, :, None] * W[None]
    g0 = h(t) - h(t.sum(1)) - h_src_x
    g1 = h(uxy.sum(1)) - h(uxy) + h_src_xy - _b_eff(source, cap_budget)
    d = t.sum(0) - source.px
    return float(g0 + lam[0] * g1 + np.sum((lam[1::2] - lam[2::2]) * d))


def finite_diff_check(theta, lam, source: JointPMF, cap_budget: float,
                      step: float = 1e-6) -> float:
    """Central-difference check of the analytic theta-gradient.

    Returns ``max|analytic - fd| / max|analytic|`` (norm-wise relative error).
    """
    from .cr_optimizer import grad_theta

    t = np.asarray(theta, dtype=float)
    if t.min() < 10 * step:
        raise ValidationError("theta must be interior: every entry >= 10 * step")
    analytic = grad_theta(t, lam, source, cap_budget, eps=1e-300)
    fd = np.empty_like(t)
    for idx in np.ndindex(t.shape):
        e = np.zeros_like(t)
        e[idx] = step
        fd[idx] = (anchored_lagrangian(t + e, lam, source, cap_budget)
                   - anchored_lagrangian(t - e, lam, source, cap_budget)) / (2 * step)
    scale = max(np.max(np.abs(analytic)), 1e-300)
    return float(np.max(np.abs(analytic - fd)) / scale)


def random_lemma1_joint(rng: np.random.Generator, n: int, sizes=(2, 2, 2, 2),
                        concentration: float = 1.0) -> np.ndarray:
    """Random P(S, R, X_1..X_n, Y_1..Y_n); ``sizes = (|S|, |R|, |X|, |Y|)``."""
    s, r, x, y = sizes
    shape = (s, r) + (x,) * n + (y,) * n
    p = rng.dirichlet(np.full(int(np.prod(shape)), concentration))
    return p.reshape(shape)


def _H(p: np.ndarray, keep) -> float:
    keep = sorted(set(keep))
    drop = tuple(a for a in range(p.ndim) if a not in keep)
    return float(entropy_array(p.sum(axis=drop) if drop else p))


def _cmi(p, A, B, C) -> float:
    A, B, C = list(A), list(B), list(C)
    return _H(p, A + C) + _H(p, B + C) - _H(p, A + B + C) - _H(p, C)


def lemma1_check(joint, n: int) -> float:
    """Residual of the telescoping identity

    I(S;X^n|R) - I(S;Y^n|R)
        = sum_i I(S;X_i|X^{i-1} Y_{i+1}^n R) - I(S;Y_i|X^{i-1} Y_{i+1}^n R).

    ``joint`` has axes ``(S, R, X_1..X_n, Y_1..Y_n)``.
    """
    p = np.asarray(joint, dtype=float)
    if not 1 <= n <= 3 or p.ndim != 2 + 2 * n:
        raise ValidationError("joint must have axes (S, R, X_1..X_n, Y_1..Y_n), n <= 3")
    if max(p.shape) > 3:
        raise ValidationError("alphabets larger than 3 are unsupported")
    if p.min() < 0 or abs(p.sum() - 1) > 1e-12:
        raise ValidationError("joint is not a probability table")
    S, R = [0], [1]
    X = [2 + i for i in range(n)]
    Y = [2 + n + i for i in range(n)]
    lhs = _cmi(p, S, X, R) - _cmi(p, S, Y, R)
    rhs = 0.0
    for i in range(n):
        cond = X[:i] + Y[i + 1:] + R
        rhs += _cmi(p, S, [X[i]], cond) - _cmi(p, S, [Y[i]], cond)
    return abs(lhs - rhs)


def nonconvexity_witness(theta, eps: float | None = None) -> float:
    """sum_{u,x} (P_UX - P_U) / (P_UX P_U), the trace of the g0 Hessian diagonal.

    Zero entries raise unless a clamp ``eps`` is given.
    """
    t = np.asarray(theta, dtype=float)
    if t.ndim != 2 or t.min() < 0 or abs(t.sum() - 1) > 1e-9:
        raise ValidationError("theta is not a probability table")
    if eps is None:
        if t.min() <= 0:
            raise ValidationError("theta must be interior")
    else:
        t = np.maximum(t, eps)
    pu = t.sum(1, keepdims=True)
    return float(np.sum((t - pu) / (t * pu)))
