"""CR capacity via a primal-dual Lagrangian game with AdaGrad steps.

The optimisation variable is the joint ``theta = P_UX`` of shape
``(|U|, |X|)`` with ``|U| = |X| + 1``.  As a flat vector it is ordered
column by column: ``(u1,0), (u2,0), (u3,0), (u1,1), (u2,1), (u3,1)``.

Constraints follow the convention ``g_i(theta) <= 0``::

    g0 = -I(U;X)                                   (objective)
    g1 = I(U;X|Y) - min(b, H(X|Y))
    g2, g3 = +-(sum_u theta(u,0) - P_X(0))
    g4, g5 = +-(sum_u theta(u,1) - P_X(1))

with Lagrangian ``L = g0 + sum_i lambda_i g_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channel_capacity import MimoChannelSpec, SisoChannelSpec, mimo_capacity, siso_capacity
from .errors import NumericalError, ValidationError
from .prob_core import JointPMF, entropy_array, ux_information

DEFAULT_LR_GRID = tuple(float(10.0**e) for e in np.arange(-3.0, 0.01, 0.5))

__all__ = [
    "OptimizerConfig",
    "OptRun",
    "CrSolution",
    "DEFAULT_LR_GRID",
    "theta_to_vector",
    "vector_to_theta",
    "eval_g0",
    "eval_g1",
    "eval_marginal_constraints",
    "grad_theta",
    "grad_lambda",
    "lagrangian",
    "project_simplex",
    "project_lambda",
    "initial_thetas",
    "run_convex",
    "run_nonconvex",
    "lr_sweep",
    "mixture_readout",
    "nash_gap",
    "cap_budget",
    "solve_cr",
    "cr_capacity",
]


@dataclass(frozen=True)
class OptimizerConfig:
    """Hyper-parameters of the primal-dual solver.

    ``lr_grid`` lists learning rates tried for both players in
    :func:`solve_cr`; ``eta_theta``/``eta_lambda`` are used by the single-run
    entry points.
    """

    iterations: int = 5000
    eta_theta: float = 0.01
    eta_lambda: float = 10.0**-0.5
    tau_theta: float = 1e-8
    tau_lambda: float = 1e-8
    restarts: int = 1
    seed: int = 0
    eps_floor: float = 1e-9
    init_concentration: float = 50.0
    lr_grid: tuple[float, ...] = DEFAULT_LR_GRID
    lambda_max: float = 100.0
    feas_tol: float = 1e-9

    def __post_init__(self):
        if int(self.iterations) < 1 or int(self.restarts) < 1:
            raise ValidationError("iterations and restarts must be positive")
        for name in ("eta_theta", "eta_lambda", "tau_theta", "tau_lambda",
                     "eps_floor", "init_concentration", "lambda_max"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.eps_floor > 1e-6:
            raise ValidationError("eps_floor must be <= 1e-6")
        if len(self.lr_grid) == 0 or min(self.lr_grid) <= 0:
            raise ValidationError("lr_grid must hold positive rates")


@dataclass
class OptRun:
    """Trace of one primal-dual run.

    ``constraint_trace[t]`` holds ``(g0, g1, ..., g5)`` at ``thetas[t]``.
    ``best_value``/``best_theta`` come from the best feasible iterate after
    rescaling its columns to the source marginal.
    """

    thetas: np.ndarray
    lambdas: np.ndarray
    lagrangian_trace: np.ndarray
    constraint_trace: np.ndarray
    best_value: float
    best_theta: np.ndarray
    eta_theta: float
    eta_lambda: float
    nash_gap: float = float("nan")
    oracle_step: float = float("nan")


@dataclass
class CrSolution:
    value: float
    theta: np.ndarray
    cap_budget: float
    nash_gap: float
    eta_theta: float
    eta_lambda: float
    runs: list = field(default_factory=list, repr=False)


# ---------------------------------------------------------------- helpers

def theta_to_vector(theta) -> np.ndarray:
    return np.asarray(theta, dtype=float).T.ravel()


def vector_to_theta(v, nx: int = 2) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.size % nx or v.size // nx != nx + 1:
        raise ValidationError(f"expected {nx * (nx + 1)} entries, got {v.size}")
    return v.reshape(nx, nx + 1).T.copy()


def _as_theta(theta, nx: int | None = None) -> np.ndarray:
    t = np.asarray(theta, dtype=float)
    if t.ndim == 1:
        t = vector_to_theta(t, nx or int(round((np.sqrt(1 + 4 * t.size) - 1) / 2)))
    if t.ndim != 2 or t.shape[0] != t.shape[1] + 1:
        raise ValidationError(f"theta must have shape (|X|+1, |X|), got {t.shape}")
    return t


def _check_in_simplex(t: np.ndarray, tol: float = 1e-9) -> None:
    if not np.all(np.isfinite(t)) or t.min() < -tol or abs(t.sum() - 1) > tol:
        raise ValidationError("theta is not a probability table")


def _budget_eff(source: JointPMF, cap_budget: float) -> float:
    if not np.isfinite(cap_budget) or cap_budget < 0:
        raise ValidationError(f"cap_budget must be >= 0, got {cap_budget!r}")
    return min(float(cap_budget), max(source.cond_entropy_x_given_y(), 0.0))


# ------------------------------------------------------------ constraints

def eval_g0(theta) -> float:
    t = _as_theta(theta)
    _check_in_simplex(t)
    return -float(ux_information(t, np.eye(t.shape[1]))[0])


def eval_g1(theta, source: JointPMF, cap_budget: float) -> float:
    t = _as_theta(theta, source.nx)
    _check_in_simplex(t)
    if t.shape[1] != source.nx:
        raise ValidationError("theta and source disagree on |X|")
    ic = ux_information(t, source.channel)[1]
    return float(ic - _budget_eff(source, cap_budget))


def eval_marginal_constraints(theta, px) -> np.ndarray:
    """(g2, g3, g4, g5, ...) = (+d0, -d0, +d1, -d1, ...) with d = marginal gap."""
    t = _as_theta(theta)
    d = t.sum(0) - np.asarray(px, dtype=float)
    return np.stack([d, -d], axis=-1).ravel()


def grad_lambda(theta, source: JointPMF, cap_budget: float) -> np.ndarray:
    return np.concatenate([[eval_g1(theta, source, cap_budget)],
                           eval_marginal_constraints(theta, source.px)])


def lagrangian(theta, lam, source: JointPMF, cap_budget: float) -> float:
    lam = np.asarray(lam, dtype=float)
    return eval_g0(theta) + float(lam @ grad_lambda(theta, source, cap_budget))


def _theta_grad_batch(th, lam, W, eps):
    """Gradient of L in theta for a batch ``(B, U, X)``; ``lam`` is ``(B, m)``."""
    c = np.maximum(th, eps)
    pu = c.sum(-1, keepdims=True)
    d0 = np.log(pu / c)
    mix = c @ W
    pos = W > 0
    Wsafe = np.where(pos, W, 1.0)
    ratio = Wsafe[None, None] * c[..., None] / mix[..., None, :]
    d1 = np.where(pos, W * np.log(np.where(pos, ratio, 1.0)), 0.0).sum(-1)
    lin = (lam[:, 1::2] - lam[:, 2::2])[:, None, :]
    return d0 + lam[:, :1, None] * d1 + lin


def grad_theta(theta, lam, source: JointPMF, cap_budget: float,
               eps: float = 1e-9) -> np.ndarray:
    """Gradient of the Lagrangian with respect to theta, same shape as theta.

    Entry ``(u, x)`` is::

        log(P_U(u) / theta(u,x))
        + lam1 * sum_y W(y|x) log(W(y|x) theta(u,x) / sum_x' W(y|x') theta(u,x'))
        + (lam_{2x+2} - lam_{2x+3})

    where entries are clamped at ``eps`` inside the logarithms.  The
    entropies of X and X|Y are held at their source values, so this is the
    exact gradient of the Lagrangian with those terms frozen (it coincides
    with ``L`` on the marginal-feasible slice).
    """
    flat = np.ndim(theta) == 1
    t = _as_theta(theta, source.nx)
    lam = np.asarray(lam, dtype=float).reshape(1, -1)
    if lam.shape[1] != 1 + 2 * t.shape[1]:
        raise ValidationError("lambda has the wrong length")
    g = _theta_grad_batch(t[None], lam, source.channel, eps)[0]
    return theta_to_vector(g) if flat else g


# ------------------------------------------------------------- projection

def project_simplex(z) -> np.ndarray:
    """Euclidean projection onto the probability simplex along the last axis."""
    z = np.asarray(z, dtype=float)
    if z.size == 0 or z.shape[-1] == 0:
        raise ValidationError("cannot project an empty vector")
    if not np.all(np.isfinite(z)):
        raise ValidationError("non-finite input to simplex projection")
    k = z.shape[-1]
    w = -np.sort(-z, axis=-1, kind="stable")
    csum = np.cumsum(w, axis=-1)
    j = np.arange(1, k + 1)
    cond = w + (1.0 - csum) / j > 0
    gamma = k - np.argmax(cond[..., ::-1], axis=-1)
    kappa = (1.0 - np.take_along_axis(csum, gamma[..., None] - 1, -1)) / gamma[..., None]
    return np.maximum(z + kappa, 0.0)


def project_lambda(z) -> np.ndarray:
    return np.maximum(np.asarray(z, dtype=float), 0.0)


# ------------------------------------------------------------ core solver

def initial_thetas(px, count: int, rng: np.random.Generator,
                   concentration: float = 50.0) -> np.ndarray:
    """Dirichlet draws around the product ``uniform(P_U) x P_X``.

    The exact product point is stationary for the updates (its gradient is
    constant across u), so every start is perturbed.
    """
    px = np.asarray(px, dtype=float)
    nx = px.size
    base = np.outer(np.full(nx + 1, 1.0 / (nx + 1)), px)
    alpha = np.maximum(concentration * theta_to_vector(base), 1e-3)
    draws = rng.dirichlet(alpha, size=count)
    return np.stack([vector_to_theta(d, nx) for d in draws])


def _constraints_batch(th, px, W, b_eff):
    iux, ic = ux_information(th, W)
    d = th.sum(-2) - px
    marg = np.stack([d, -d], -1).reshape(th.shape[0], -1)
    return np.concatenate([-iux[:, None], (ic - b_eff)[:, None], marg], -1)


def _rescale(th, px):
    col = th.sum(-2, keepdims=True)
    nu = th.shape[-2]
    cond = np.where(col > 0, th / np.where(col > 0, col, 1.0), 1.0 / nu)
    return cond * px


def _run_batch(source: JointPMF, b_eff: float, eta_t, eta_l, theta0,
               cfg: OptimizerConfig, keep_trace: bool = True):
    px, W = source.px, source.channel
    eta_t = np.asarray(eta_t, dtype=float)
    eta_l = np.asarray(eta_l, dtype=float)
    B = eta_t.size
    T = int(cfg.iterations)
    th = np.array(theta0, dtype=float)
    nu, nx = th.shape[1:]
    m = 1 + 2 * nx
    lam = np.zeros((B, m))
    Gt = np.zeros_like(th)
    Gl = np.zeros_like(lam)
    prod = np.outer(np.full(nu, 1.0 / nu), px)
    best_v = np.zeros(B)
    best_th = np.repeat(prod[None], B, 0)
    if keep_trace:
        th_tr = np.empty((B, T, nu, nx))
        lam_tr = np.empty((B, T, m))
        g_tr = np.empty((B, T, 1 + m))
    for t in range(T):
        grad = _theta_grad_batch(th, lam, W, cfg.eps_floor)
        g = _constraints_batch(th, px, W, b_eff)
        if keep_trace:
            th_tr[:, t], lam_tr[:, t], g_tr[:, t] = th, lam, g
        hat = _rescale(th, px)
        iux, ic = ux_information(hat, W)
        better = (ic <= b_eff + cfg.feas_tol) & (iux > best_v)
        if better.any():
            best_v[better] = iux[better]
            best_th[better] = hat[better]
        Gt += grad**2
        step = eta_t[:, None, None] / np.sqrt(Gt + cfg.tau_theta) * grad
        th = project_simplex((th - step).reshape(B, -1)).reshape(B, nu, nx)
        gl = g[:, 1:]
        Gl += gl**2
        lam = np.maximum(0.0, lam + eta_l[:, None] / np.sqrt(Gl + cfg.tau_lambda) * gl)
        if not (np.all(np.isfinite(th)) and np.all(np.isfinite(lam))):
            raise NumericalError(f"non-finite iterate at iteration {t}")
    runs = []
    for k in range(B):
        if keep_trace:
            lag = g_tr[k, :, 0] + np.einsum("ti,ti->t", lam_tr[k], g_tr[k, :, 1:])
            runs.append(OptRun(th_tr[k], lam_tr[k], lag, g_tr[k], float(best_v[k]),
                               best_th[k], float(eta_t[k]), float(eta_l[k])))
        else:
            empty = np.empty((0,))
            runs.append(OptRun(empty, empty, empty, empty, float(best_v[k]),
                               best_th[k], float(eta_t[k]), float(eta_l[k])))
    return runs


def _check_source(source: JointPMF) -> None:
    if not isinstance(source, JointPMF):
        raise ValidationError("source must be a JointPMF")


def run_convex(source: JointPMF, cap_budget: float,
               config: OptimizerConfig = OptimizerConfig(),
               theta0=None, with_gap: bool = True) -> OptRun:
    """Single AdaGrad primal-dual run at ``(eta_theta, eta_lambda)``."""
    _check_source(source)
    b_eff = _budget_eff(source, cap_budget)
    if theta0 is None:
        rng = np.random.default_rng([int(config.seed), 0])
        theta0 = initial_thetas(source.px, 1, rng, config.init_concentration)
    else:
        theta0 = _as_theta(theta0, source.nx)[None]
    run = _run_batch(source, b_eff, [config.eta_theta], [config.eta_lambda],
                     theta0, config)[0]
    if with_gap:
        nash_gap(run, source, cap_budget, lambda_max=config.lambda_max)
    return run


def lr_sweep(source: JointPMF, cap_budget: float, config: OptimizerConfig,
             restart: int = 0, keep_trace: bool = True) -> list[OptRun]:
    """Runs every ``(eta_theta, eta_lambda)`` pair of the grid as one batch."""
    _check_source(source)
    b_eff = _budget_eff(source, cap_budget)
    et, el = np.meshgrid(config.lr_grid, config.lr_grid, indexing="ij")
    rng = np.random.default_rng([int(config.seed), int(restart)])
    theta0 = initial_thetas(source.px, et.size, rng, config.init_concentration)
    return _run_batch(source, b_eff, et.ravel(), el.ravel(), theta0, config, keep_trace)


def run_nonconvex(source: JointPMF, cap_budget: float,
                  config: OptimizerConfig = OptimizerConfig(),
                  oracle_resolution=None, lambda_fixed=None) -> OptRun:
    """Oracle best response in theta, AdaGrad ascent in lambda.

    Each iteration minimises ``L(., lambda_t)`` over the whole simplex with
    the grid oracle.  ``lambda_fixed`` freezes the multipliers.  Best
    responses of a non-convex game need not be feasible on their own, so the
    value is read out as the best time-sharing of the iterates
    (:func:`mixture_readout`), or the best single feasible iterate if larger.
    """
    from .oracle import GridSpec, LagrangianGridOracle

    _check_source(source)
    grid = oracle_resolution or GridSpec(coarse_step=0.05, refine_rounds=2, refine_factor=10)
    orc = LagrangianGridOracle(source, grid)
    b_eff = _budget_eff(source, cap_budget)
    px, W = source.px, source.channel
    T = int(config.iterations)
    nx = source.nx
    m = 1 + 2 * nx
    lam = np.zeros(m) if lambda_fixed is None else project_lambda(lambda_fixed)
    Gl = np.zeros(m)
    th_tr = np.empty((T, nx + 1, nx))
    lam_tr = np.empty((T, m))
    g_tr = np.empty((T, 1 + m))
    best_v, best_th = 0.0, np.outer(np.full(nx + 1, 1.0 / (nx + 1)), px)
    for t in range(T):
        th, _ = orc.minimize(lam[None], cap_budget)
        g = _constraints_batch(th, px, W, b_eff)[0]
        th_tr[t], lam_tr[t], g_tr[t] = th[0], lam, g
        hat = _rescale(th, px)
        iux, ic = ux_information(hat, W)
        if ic[0] <= b_eff + config.feas_tol and iux[0] > best_v:
            best_v, best_th = float(iux[0]), hat[0]
        if lambda_fixed is None:
            Gl += g[1:] ** 2
            lam = np.maximum(0.0, lam + config.eta_lambda / np.sqrt(Gl + config.tau_lambda) * g[1:])
        if not np.all(np.isfinite(lam)):
            raise NumericalError(f"non-finite multiplier at iteration {t}")
    mix = mixture_readout(th_tr, source, b_eff, config.feas_tol)
    if mix is not None and mix[0] > best_v:
        best_v, best_th = mix
    lag = g_tr[:, 0] + np.einsum("ti,ti->t", lam_tr, g_tr[:, 1:])
    run = OptRun(th_tr, lam_tr, lag, g_tr, best_v, best_th,
                 float("nan"), config.eta_lambda)
    nash_gap(run, source, cap_budget, lambda_max=config.lambda_max, oracle=orc)
    return run


def mixture_readout(thetas, source: JointPMF, b_eff: float, feas_tol: float = 1e-9):
    """Best time-sharing of the conditionals P_{X|U=u} found in ``thetas``.

    Mixing auxiliaries with weights w keeps P_X linear in w and makes both
    I(U;X) and I(U;X|Y) linear in w, so the best mixture is a linear
    program.  A basic optimal solution has at most |X|+1 nonzero weights,
    i.e. it is again an auxiliary with |U| = |X|+1.  Returns
    ``(value, theta)``, or ``None`` if the solver fails.
    """
    from scipy.optimize import linprog

    W, px = source.channel, source.px
    th = np.clip(np.asarray(thetas, dtype=float).reshape(-1, source.nx), 0.0, None)
    pu = th.sum(1)
    q = th[pu > 1e-12] / pu[pu > 1e-12, None]
    # the independent conditional keeps the program feasible
    q = np.unique(np.round(np.vstack([q, px]), 15), axis=0)
    hq = entropy_array(q, axis=1)
    hqw = entropy_array(q @ W, axis=1)
    hx, hy = float(entropy_array(px)), float(entropy_array(source.py))
    nx = source.nx
    res = linprog(hq, A_ub=(hqw - hq)[None], b_ub=[b_eff - hx + hy - 1e-12],
                  A_eq=np.vstack([q[:, :nx - 1].T, np.ones(q.shape[0])]),
                  b_eq=np.r_[px[:nx - 1], 1.0], bounds=(0, None), method="highs-ds")
    if res.status != 0:
        return None
    w = res.x
    keep = np.argsort(-w)[:nx + 1]
    if w[np.setdiff1d(np.arange(w.size), keep)].sum() > 1e-12:
        return None
    theta = w[keep, None] * q[keep]
    theta = _rescale(theta[None], px)[0]
    iux, ic = ux_information(theta, W)
    if ic > b_eff + feas_tol:
        return None
    return float(iux), theta


# ------------------------------------------------------------ certificate

def _nash_gaps(runs, source, cap_budget, lambda_max, oracle):
    mean_g = np.stack([r.constraint_trace.mean(0) for r in runs])
    first = lambda_max * np.maximum(mean_g[:, 1:], 0.0).sum(1) + mean_g[:, 0]
    lam_bar = np.clip(np.stack([r.lambdas.mean(0) for r in runs]), 0.0, lambda_max)
    _, inf_grid = oracle.minimize(lam_bar, cap_budget)
    inf_iter = np.array([
        np.min(r.constraint_trace[:, 0] + r.constraint_trace[:, 1:] @ lb)
        for r, lb in zip(runs, lam_bar)])
    return first - np.minimum(inf_grid, inf_iter)


def nash_gap(run: OptRun | list, source: JointPMF, cap_budget: float,
             lambda_max: float = 100.0, oracle=None):
    """Equilibrium gap of the averaged play, stored on the run(s) and returned.

    The max over ``lambda* in [0, lambda_max]^m`` of the averaged Lagrangian
    is taken in closed form.  The inf over theta of ``L(theta, mean lambda)``
    uses the grid oracle, with the run's own iterates as extra candidates so
    the reported gap is never negative.
    """
    from .oracle import GridSpec, LagrangianGridOracle

    runs = run if isinstance(run, list) else [run]
    if oracle is None:
        oracle = LagrangianGridOracle(source, GridSpec(0.05, 2, 10))
    gaps = _nash_gaps(runs, source, cap_budget, lambda_max, oracle)
    for r, e in zip(runs, gaps):
        r.nash_gap = float(e)
        r.oracle_step = oracle.final_step
    return runs[0].nash_gap if not isinstance(run, list) else gaps


# ---------------------------------------------------------------- capacity

def cap_budget(channel: SisoChannelSpec | MimoChannelSpec) -> float:
    """Rate budget: real-convention SISO capacity or complex MIMO capacity."""
    if isinstance(channel, SisoChannelSpec):
        return siso_capacity(channel, "real")
    if isinstance(channel, MimoChannelSpec):
        return mimo_capacity(channel, "complex")
    raise ValidationError(f"unsupported channel type {type(channel).__name__}")


def solve_cr(source: JointPMF, channel, config: OptimizerConfig = OptimizerConfig(),
             with_gap: bool = True, nonconvex: bool = False) -> CrSolution:
    """Best feasible I(U;X) over the learning-rate grid and all restarts.

    The reported ``nash_gap`` and learning rates are those of the grid entry
    with the smallest gap.
    """
    _check_source(source)
    b = cap_budget(channel) if not np.isscalar(channel) else float(channel)
    runs = []
    for r in range(int(config.restarts)):
        runs += lr_sweep(source, b, config, restart=r, keep_trace=with_gap)
    if nonconvex:
        runs.append(run_nonconvex(source, b, config))
    k_best = int(np.argmax([r.best_value for r in runs]))
    gap, et, el = float("nan"), float("nan"), float("nan")
    if with_gap:
        todo = [r for r in runs if np.isnan(r.nash_gap)]
        if todo:
            nash_gap(todo, source, b, lambda_max=config.lambda_max)
        k_gap = int(np.nanargmin([r.nash_gap for r in runs]))
        gap, et, el = runs[k_gap].nash_gap, runs[k_gap].eta_theta, runs[k_gap].eta_lambda
        for r in runs:
            r.thetas = r.lambdas = np.empty((0,))
    hx = float(entropy_array(source.px))
    value = float(np.clip(runs[k_best].best_value, 0.0, hx))
    return CrSolution(value, runs[k_best].best_theta, b, gap, et, el)


def cr_capacity(source: JointPMF, channel, config: OptimizerConfig = OptimizerConfig(),
                nonconvex: bool = False) -> float:
    """CR capacity in nats per source symbol."""
    return solve_cr(source, channel, config, with_gap=False, nonconvex=nonconvex).value


def with_iterations(config: OptimizerConfig, iterations: int) -> OptimizerConfig:
    return replace(config, iterations=int(iterations))
