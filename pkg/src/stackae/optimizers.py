"""Eleven full-batch unconstrained minimizers behind one :func:`minimize` call.

================  =====================================================
tag               method
================  =====================================================
``sd``            steepest descent, strong Wolfe line search
``csd``           cyclic steepest descent (searched step reused)
``bb``            Barzilai-Borwein step, nonmonotone Armijo safeguard
``cg``            Polak-Ribiere+ nonlinear conjugate gradient
``scg``           cg on the gradient scaled by ``s.y / y.y``
``pcg``           cg preconditioned by a diagonal from the last pair
``newton0``       Hessian-free (truncated) Newton
``pnewton0``      newton0 with an L-BFGS preconditioner in the inner CG
``lbfgs``         limited-memory BFGS, two-loop recursion
``qnewton``       dense inverse BFGS
``mnewton``       Newton with a fresh (modified) Hessian every iteration
================  =====================================================

Every method returns its lowest-objective iterate together with an
:class:`OptimizerTrace`.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, LineSearchFail, NonFiniteObjective
from .linesearch import wolfe_line_search

_EPS = np.finfo(float).eps


class OptimizerKind(str, Enum):
    SD = "sd"
    CSD = "csd"
    BB = "bb"
    CG = "cg"
    SCG = "scg"
    PCG = "pcg"
    NEWTON0 = "newton0"
    PNEWTON0 = "pnewton0"
    LBFGS = "lbfgs"
    QNEWTON = "qnewton"
    MNEWTON = "mnewton"


OPTIMIZER_NAMES: tuple[str, ...] = tuple(k.value for k in OptimizerKind)

_CG_FAMILY = {OptimizerKind.SD, OptimizerKind.CSD, OptimizerKind.BB,
              OptimizerKind.CG, OptimizerKind.SCG, OptimizerKind.PCG}


def get_optimizer(kind) -> OptimizerKind:
    try:
        return OptimizerKind(kind.lower() if isinstance(kind, str) else kind)
    except ValueError:
        raise ConfigError(
            f"unknown optimizer {kind!r}; expected one of {', '.join(OPTIMIZER_NAMES)}"
        ) from None


@dataclass(frozen=True)
class OptimizerOptions:
    """Knobs shared by all methods.

    ``wolfe_c2=None`` selects 0.2 for the gradient/CG family and 0.9 for the
    Newton-type methods. ``cg_restart=None`` restarts every P iterations.
    ``fd_epsilon=None`` uses ``sqrt(eps) * (1 + ||theta||)``. ``callback``,
    if set, receives a dict describing every accepted step.
    """

    max_iter: int = 100
    grad_tol: float = 1e-5
    step_tol: float = 1e-9
    wolfe_c1: float = 1e-4
    wolfe_c2: Optional[float] = None
    lbfgs_memory: int = 10
    csd_cycle_length: int = 3
    cg_restart: Optional[int] = None
    fd_epsilon: Optional[float] = None
    inner_cg_max: int = 250
    bb_window: int = 10
    ls_max_evals: int = 50
    callback: Optional[Callable[[dict], None]] = field(default=None, compare=False)

    def c2_for(self, kind: OptimizerKind) -> float:
        if self.wolfe_c2 is not None:
            return self.wolfe_c2
        return 0.2 if kind in _CG_FAMILY else 0.9

    def validate(self, kind: OptimizerKind) -> None:
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        c2 = self.c2_for(kind)
        if not 0 < self.wolfe_c1 < c2 < 1:
            raise ConfigError(f"need 0 < c1 < c2 < 1, got {self.wolfe_c1}, {c2}")
        if self.lbfgs_memory < 1 or self.csd_cycle_length < 1 or self.inner_cg_max < 1:
            raise ConfigError("memory, cycle length and inner iteration cap must be >= 1")


class Objective:
    """A smooth objective on R^P.

    ``value_grad(theta) -> (f, g)`` is required; ``hess_vec(theta, v)`` and
    ``hessian(theta)`` are optional analytic extras.
    """

    def __init__(self, value_grad, dimension: int, hess_vec=None, hessian=None):
        self.value_grad = value_grad
        self.dimension = int(dimension)
        self.hess_vec = hess_vec
        self.hessian = hessian

    def __call__(self, theta):
        return self.value_grad(theta)


def _value_grad_of(obj):
    return obj.value_grad if isinstance(obj, Objective) else obj


def _checked(value_grad, theta):
    f, g = value_grad(theta)
    f = float(f)
    g = np.asarray(g, dtype=float)
    if not (math.isfinite(f) and np.all(np.isfinite(g))):
        raise NonFiniteObjective("objective or gradient is not finite")
    return f, g


def finite_diff_grad(obj, theta, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient, one coordinate at a time."""
    if not h > 0:
        raise ValueError("h must be positive")
    vg = _value_grad_of(obj)
    theta = np.asarray(theta, dtype=float)
    out = np.empty_like(theta)
    e = np.zeros_like(theta)
    for i in range(theta.size):
        e[i] = h
        fp, _ = _checked(vg, theta + e)
        fm, _ = _checked(vg, theta - e)
        out[i] = (fp - fm) / (2.0 * h)
        e[i] = 0.0
    return out


def hess_vec_fd(obj, theta, v, eps: float) -> np.ndarray:
    """``(g(theta + eps v) - g(theta - eps v)) / (2 eps)``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    vg = _value_grad_of(obj)
    theta = np.asarray(theta, dtype=float)
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return np.zeros_like(theta)
    _, gp = _checked(vg, theta + eps * v)
    _, gm = _checked(vg, theta - eps * v)
    return (gp - gm) / (2.0 * eps)


@dataclass
class TraceRecord:
    f: float
    grad_norm: float
    step: float
    nfev: int


@dataclass
class OptimizerTrace:
    kind: str
    records: list = field(default_factory=list)
    reason: str = "MaxIter"
    message: str = ""

    @property
    def iterations(self) -> int:
        return max(0, len(self.records) - 1)

    @property
    def f_values(self) -> np.ndarray:
        return np.array([r.f for r in self.records])

    @property
    def final_f(self) -> float:
        return min(r.f for r in self.records)


def _two_loop(g, pairs, gamma=None):
    """L-BFGS product H g from stored (s, y, rho) pairs, oldest first."""
    q = np.array(g, dtype=float)
    if not pairs:
        return q
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if gamma is None:
        s, y, _ = pairs[-1]
        gamma = np.dot(s, y) / np.dot(y, y)
    r = gamma * q
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, r)
        r += (a - b) * s
    return r


def _curvature_ok(s, y):
    sy = float(np.dot(s, y))
    return sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y), sy


class _Run:
    """Bookkeeping shared by all methods: counting, trace, best iterate."""

    def __init__(self, obj, theta0, kind, opts):
        self.obj = obj
        self.vg_raw = _value_grad_of(obj)
        self.kind = kind
        self.opts = opts
        self.c1 = opts.wolfe_c1
        self.c2 = opts.c2_for(kind)
        self.nfev = 0
        self.trace = OptimizerTrace(kind.value)
        x = np.array(theta0, dtype=float)
        if not np.all(np.isfinite(x)):
            raise NonFiniteObjective("theta0 is not finite")
        f, g = self.eval(x)
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            raise NonFiniteObjective("objective or gradient is not finite at theta0")
        self.x, self.f, self.g = x, f, g
        self.best = (f, x.copy())
        self.record(0.0)

    def eval(self, x):
        self.nfev += 1
        f, g = self.vg_raw(x)
        return float(f), np.asarray(g, dtype=float)

    def safe_eval(self, x):
        f, g = self.eval(x)
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            return math.inf, g
        return f, g

    def record(self, step):
        self.trace.records.append(
            TraceRecord(self.f, float(np.max(np.abs(self.g))) if self.g.size else 0.0,
                        float(step), self.nfev))

    def gnorm(self):
        return float(np.max(np.abs(self.g))) if self.g.size else 0.0

    def hv(self, x, v):
        if isinstance(self.obj, Objective) and self.obj.hess_vec is not None:
            return np.asarray(self.obj.hess_vec(x, v), dtype=float)
        vn = float(np.linalg.norm(v))
        if vn == 0:
            return np.zeros_like(x)
        eps = self.opts.fd_epsilon or math.sqrt(_EPS) * (1.0 + float(np.linalg.norm(x)))
        u = v / vn
        _, gp = self.eval(x + eps * u)
        _, gm = self.eval(x - eps * u)
        return (gp - gm) / (2.0 * eps) * vn

    def line_search(self, d, alpha0):
        res = wolfe_line_search(self.eval, self.x, d, self.f, self.g, self.c1, self.c2,
                                alpha0=alpha0, max_evals=self.opts.ls_max_evals)
        return res.alpha, res.f, res.g

    def accept(self, d, alpha, f_new, g_new, rule):
        x_new = self.x + alpha * d
        if self.opts.callback is not None:
            self.opts.callback({
                "kind": self.kind.value, "rule": rule, "theta_prev": self.x.copy(),
                "theta": x_new.copy(), "direction": np.array(d), "alpha": float(alpha),
                "f_prev": self.f, "g_prev": self.g.copy(), "f": f_new, "g": g_new.copy(),
                "c1": self.c1, "c2": self.c2,
            })
        s = x_new - self.x
        y = g_new - self.g
        self.x, self.f, self.g = x_new, f_new, g_new
        if f_new < self.best[0]:
            self.best = (f_new, x_new.copy())
        self.record(alpha)
        return s, y


def _initial_step(g):
    return min(1.0, 1.0 / max(float(np.linalg.norm(g)), 1e-300))


class _Method:
    """One iteration strategy. ``step`` performs an accepted move."""

    def __init__(self, run: _Run):
        self.run = run
        self.k = 0

    def step(self):
        raise NotImplementedError

    def searched(self, d, alpha0, fallback_to_gradient):
        """Wolfe search along ``d``; gradient-family methods retry once along -g."""
        run = self.run
        try:
            a, f, g = run.line_search(d, alpha0)
            return d, a, f, g, False
        except LineSearchFail:
            if not fallback_to_gradient:
                raise
        d = -run.g
        a, f, g = run.line_search(d, _initial_step(run.g))
        return d, a, f, g, True


class _SteepestDescent(_Method):
    def __init__(self, run):
        super().__init__(run)
        self.prev = None  # (alpha, g.d) of the last searched step

    def alpha0(self, d):
        gd = float(np.dot(self.run.g, d))
        if self.prev is None:
            return _initial_step(self.run.g)
        a, gd_prev = self.prev
        return min(max(a * gd_prev / gd, 1e-12), 1e10)

    def step(self):
        run = self.run
        d = -run.g
        d, a, f, g, _ = self.searched(d, self.alpha0(d), True)
        self.prev = (a, float(np.dot(run.g, d)))
        run.accept(d, a, f, g, "wolfe")


class _CyclicSteepestDescent(_SteepestDescent):
    def __init__(self, run):
        super().__init__(run)
        self.remaining = 0
        self.cycle_alpha = None

    def step(self):
        run = self.run
        d = -run.g
        if self.remaining > 0:
            a = self.cycle_alpha
            f, g = run.safe_eval(run.x + a * d)
            if f <= run.f + run.c1 * a * float(np.dot(run.g, d)):
                self.remaining -= 1
                run.accept(d, a, f, g, "armijo")
                return
        d, a, f, g, _ = self.searched(d, self.alpha0(d), True)
        self.prev = (a, float(np.dot(run.g, d)))
        self.cycle_alpha = a
        self.remaining = run.opts.csd_cycle_length - 1
        run.accept(d, a, f, g, "wolfe")


class _BarzilaiBorwein(_Method):
    def __init__(self, run):
        super().__init__(run)
        self.alpha = _initial_step(run.g)
        self.history = deque([run.f], maxlen=run.opts.bb_window)

    def step(self):
        run = self.run
        d = -self.alpha * run.g
        gd = float(np.dot(run.g, d))
        f_ref = max(self.history)
        t = 1.0
        for _ in range(run.opts.ls_max_evals):
            f, g = run.safe_eval(run.x + t * d)
            if f <= f_ref + run.c1 * t * gd:
                break
            # safeguarded quadratic backtrack
            denom = 2.0 * (f - run.f - t * gd)
            t_q = -gd * t * t / denom if math.isfinite(f) and denom > 0 else 0.5 * t
            t = min(max(t_q, 0.1 * t), 0.5 * t)
        else:
            raise LineSearchFail("nonmonotone backtracking exhausted", nfev=run.opts.ls_max_evals)
        s, y = run.accept(d, t, f, g, "nonmonotone")
        self.history.append(f)
        sy = float(np.dot(s, y))
        if sy > 0:
            self.alpha = min(max(float(np.dot(s, s)) / sy, 1e-10), 1e10)


class _ConjugateGradient(_Method):
    """Polak-Ribiere+ with an optional preconditioner ``M^-1``."""

    def __init__(self, run):
        super().__init__(run)
        self.d_prev = None
        self.g_prev = None
        self.z_prev = None
        self.prev = None
        self.since_restart = 0
        self.restart_every = run.opts.cg_restart or max(1, run.x.size)

    def precondition(self, g):
        """Return ``(M^-1 g, scaled)``; ``scaled`` means a unit step is natural."""
        return g, False

    def update(self, s, y):
        pass

    def step(self):
        run = self.run
        g = run.g
        z, scaled = self.precondition(g)
        restart = self.d_prev is None or self.since_restart >= self.restart_every
        if not restart:
            beta = max(0.0, float(np.dot(z, g - self.g_prev)) / float(np.dot(self.z_prev, self.g_prev)))
            d = -z + beta * self.d_prev
            if not np.dot(g, d) < 0:
                restart = True
        if restart:
            d = -z
            self.since_restart = 0
        gd = float(np.dot(g, d))
        if scaled:
            alpha0 = 1.0
        elif self.prev is None:
            alpha0 = _initial_step(g)
        else:
            a, gd_prev = self.prev
            alpha0 = min(max(a * gd_prev / gd, 1e-12), 1e10)
        d, a, f, gnew, fell_back = self.searched(d, alpha0, True)
        if fell_back:
            z = g
            self.since_restart = 0
        self.prev = (a, float(np.dot(g, d)))
        self.g_prev, self.z_prev, self.d_prev = g, z, d
        s, y = run.accept(d, a, f, gnew, "wolfe")
        self.since_restart += 1
        self.update(s, y)


class _ScaledConjugateGradient(_ConjugateGradient):
    def __init__(self, run):
        super().__init__(run)
        self.tau = None

    def precondition(self, g):
        return (g, False) if self.tau is None else (self.tau * g, True)

    def update(self, s, y):
        ok, sy = _curvature_ok(s, y)
        if ok:
            self.tau = sy / float(np.dot(y, y))


class _PreconditionedConjugateGradient(_ConjugateGradient):
    def __init__(self, run):
        super().__init__(run)
        self.diag = None

    def precondition(self, g):
        return (g, False) if self.diag is None else (self.diag * g, True)

    def update(self, s, y):
        ok, sy = _curvature_ok(s, y)
        if not ok:
            return
        yy = float(np.dot(y, y))
        gamma = sy / yy
        # diagonal of the BFGS update of gamma*I with the pair (s, y)
        diag = gamma - 2.0 * s * y / yy + 2.0 * s * s / sy
        self.diag = np.maximum(diag, 1e-10 * gamma)


class _LBFGS(_Method):
    def __init__(self, run):
        super().__init__(run)
        self.pairs = deque(maxlen=run.opts.lbfgs_memory)

    def push(self, s, y):
        ok, sy = _curvature_ok(s, y)
        if ok:
            self.pairs.append((s, y, 1.0 / sy))

    def step(self):
        run = self.run
        if self.pairs:
            d = -_two_loop(run.g, list(self.pairs))
            alpha0 = 1.0
            if not np.dot(run.g, d) < 0:
                self.pairs.clear()
                d, alpha0 = -run.g, _initial_step(run.g)
        else:
            d, alpha0 = -run.g, _initial_step(run.g)
        _, a, f, g, _ = self.searched(d, alpha0, False)
        self.push(*run.accept(d, a, f, g, "wolfe"))


class _DenseBFGS(_Method):
    def __init__(self, run):
        super().__init__(run)
        self.H = None

    def step(self):
        run = self.run
        if self.H is None:
            d, alpha0 = -run.g, _initial_step(run.g)
        else:
            d, alpha0 = -self.H @ run.g, 1.0
            if not np.dot(run.g, d) < 0:
                self.H = None
                d, alpha0 = -run.g, _initial_step(run.g)
        _, a, f, g, _ = self.searched(d, alpha0, False)
        s, y = run.accept(d, a, f, g, "wolfe")
        ok, sy = _curvature_ok(s, y)
        if not ok:
            return
        n = s.size
        if self.H is None:
            self.H = np.eye(n)
        rho = 1.0 / sy
        Hy = self.H @ y
        # (I - rho s y^T) H (I - rho y s^T) + rho s s^T, expanded
        self.H = (self.H - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                  + (rho * rho * float(np.dot(y, Hy)) + rho) * np.outer(s, s))


class _HessianFreeNewton(_Method):
    preconditioned = False

    def __init__(self, run):
        super().__init__(run)
        self.pairs = deque(maxlen=run.opts.lbfgs_memory)

    def apply_precond(self, r):
        if not self.preconditioned or not self.pairs:
            return r
        return _two_loop(r, list(self.pairs))

    def inner_cg(self):
        run = self.run
        g = run.g
        gn = float(np.linalg.norm(g))
        tol = min(0.5, math.sqrt(gn)) * gn
        x = np.zeros_like(g)
        r = -g
        z = self.apply_precond(r)
        p = z.copy()
        rz = float(np.dot(r, z))
        for j in range(run.opts.inner_cg_max):
            Hp = run.hv(run.x, p)
            curv = float(np.dot(p, Hp))
            if not curv > 0:
                return -g if j == 0 else x
            a = rz / curv
            x = x + a * p
            r = r - a * Hp
            if np.linalg.norm(r) <= tol:
                break
            z = self.apply_precond(r)
            rz_new = float(np.dot(r, z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        return x

    def step(self):
        run = self.run
        d = self.inner_cg()
        if not np.dot(run.g, d) < 0:
            d = -run.g
        _, a, f, g, _ = self.searched(d, 1.0, False)
        s, y = run.accept(d, a, f, g, "wolfe")
        ok, sy = _curvature_ok(s, y)
        if ok:
            self.pairs.append((s, y, 1.0 / sy))


class _PreconditionedHessianFreeNewton(_HessianFreeNewton):
    preconditioned = True


class _ModifiedNewton(_Method):
    def hessian(self):
        run = self.run
        obj = run.obj
        if isinstance(obj, Objective) and obj.hessian is not None:
            H = np.asarray(obj.hessian(run.x), dtype=float)
        else:
            n = run.x.size
            H = np.empty((n, n))
            e = np.zeros(n)
            for j in range(n):
                e[j] = 1.0
                H[:, j] = run.hv(run.x, e)
                e[j] = 0.0
        return 0.5 * (H + H.T)

    def step(self):
        run = self.run
        H = self.hessian()
        n = H.shape[0]
        tau = 0.0
        base = 1e-6 * float(np.linalg.norm(H))
        if base == 0.0:
            base = 1e-6
        while True:
            try:
                L = np.linalg.cholesky(H + tau * np.eye(n))
                break
            except np.linalg.LinAlgError:
                tau = base if tau == 0.0 else 2.0 * tau
        w = np.linalg.solve(L, -run.g)
        d = np.linalg.solve(L.T, w)
        if not np.dot(run.g, d) < 0:
            d = -run.g
        _, a, f, g, _ = self.searched(d, 1.0, False)
        run.accept(d, a, f, g, "wolfe")


_METHODS = {
    OptimizerKind.SD: _SteepestDescent,
    OptimizerKind.CSD: _CyclicSteepestDescent,
    OptimizerKind.BB: _BarzilaiBorwein,
    OptimizerKind.CG: _ConjugateGradient,
    OptimizerKind.SCG: _ScaledConjugateGradient,
    OptimizerKind.PCG: _PreconditionedConjugateGradient,
    OptimizerKind.NEWTON0: _HessianFreeNewton,
    OptimizerKind.PNEWTON0: _PreconditionedHessianFreeNewton,
    OptimizerKind.LBFGS: _LBFGS,
    OptimizerKind.QNEWTON: _DenseBFGS,
    OptimizerKind.MNEWTON: _ModifiedNewton,
}


def minimize(obj, theta0, kind="lbfgs", options: Optional[OptimizerOptions] = None, **overrides):
    """Minimize ``obj`` from ``theta0``.

    Parameters
    ----------
    obj : Objective or callable
        Either an :class:`Objective` or a bare ``value_grad`` callable.
    theta0 : array_like
        Starting point.
    kind : str or OptimizerKind
        One of :data:`OPTIMIZER_NAMES`.
    options : OptimizerOptions, optional
        Keyword ``overrides`` are applied on top of it.

    Returns
    -------
    theta : ndarray
        The iterate with the lowest objective value seen.
    trace : OptimizerTrace
        Per-iteration records and the termination reason (``GradTol``,
        ``MaxIter``, ``StepTol`` or ``LineSearchFail``).
    """
    kind = get_optimizer(kind)
    opts = options or OptimizerOptions()
    if overrides:
        opts = replace(opts, **overrides)
    opts.validate(kind)
    run = _Run(obj, theta0, kind, opts)
    method = _METHODS[kind](run)
    trace = run.trace
    for _ in range(opts.max_iter):
        if run.gnorm() <= opts.grad_tol:
            trace.reason = "GradTol"
            break
        x_before = run.x
        try:
            method.step()
        except LineSearchFail as exc:
            trace.reason = "LineSearchFail"
            trace.message = str(exc)
            break
        method.k += 1
        if run.gnorm() <= opts.grad_tol:
            trace.reason = "GradTol"
            break
        if float(np.max(np.abs(run.x - x_before))) <= opts.step_tol:
            trace.reason = "StepTol"
            break
    else:
        trace.reason = "MaxIter"
    return run.best[1], trace
