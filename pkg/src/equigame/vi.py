"""Finite-dimensional variational inequalities VI(F, K) and their solvers.

A point x* solves VI(F, K) when <F(x*), y - x*> >= 0 for every y in K,
equivalently when x* = P_K(x* - a F(x*)) for any a > 0.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .fixpoint import ContractiveMap, DivergenceError, iterate_to_fixpoint

Vector = np.ndarray


class VIError(Exception):
    pass


class DivergedError(VIError):
    pass


class UnsupportedSetError(VIError):
    pass


# --------------------------------------------------------------------------
# feasible sets


class FeasibleSet:
    kind = "custom"

    def __init__(self, dim: int, project: Callable[[Vector], Vector]):
        self.dim = dim
        self._project = project

    def project(self, x: Vector) -> Vector:
        return np.asarray(self._project(np.asarray(x, dtype=float)), dtype=float)

    def contains(self, x, tol=1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(self.project(x) - x) <= tol)

    def sample(self, rng, size: int, scale: float = 10.0) -> np.ndarray:
        pts = rng.uniform(-scale, scale, size=(size, self.dim))
        return np.array([self.project(p) for p in pts])

    def to_dict(self):
        raise UnsupportedSetError(f"{self.kind} sets have no JSON form")


class Box(FeasibleSet):
    """Coordinatewise bounds; infinite bounds are allowed."""

    kind = "box"

    def __init__(self, lo, hi):
        self.lo = np.array(lo, dtype=float).reshape(-1)
        self.hi = np.array(hi, dtype=float).reshape(-1)
        if self.lo.shape != self.hi.shape:
            raise ValueError("lo and hi must have the same length")
        if np.any(self.lo > self.hi):
            raise ValueError("empty box: some lo > hi")
        self.dim = self.lo.size

    def project(self, x):
        return np.minimum(np.maximum(np.asarray(x, dtype=float), self.lo), self.hi)

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def sample(self, rng, size, scale=10.0):
        lo = np.where(np.isfinite(self.lo), self.lo, np.minimum(-scale, self.hi - scale))
        hi = np.where(np.isfinite(self.hi), self.hi, np.maximum(scale, lo + scale))
        return rng.uniform(lo, hi, size=(size, self.dim))

    def to_dict(self):
        def enc(v):
            return [x if math.isfinite(x) else ("INF" if x > 0 else "-INF") for x in v.tolist()]

        return {"kind": "box", "lo": enc(self.lo), "hi": enc(self.hi)}


class NonnegativeOrthant(Box):
    kind = "orthant"

    def __init__(self, dim: int):
        super().__init__(np.zeros(dim), np.full(dim, np.inf))

    def to_dict(self):
        return {"kind": "orthant"}


def whole_space(dim: int) -> Box:
    return Box(np.full(dim, -np.inf), np.full(dim, np.inf))


class Ball(FeasibleSet):
    kind = "ball"

    def __init__(self, center, radius: float):
        self.center = np.array(center, dtype=float).reshape(-1)
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        self.radius = float(radius)
        self.dim = self.center.size

    def project(self, x):
        d = np.asarray(x, dtype=float) - self.center
        nrm = np.linalg.norm(d)
        if nrm <= self.radius:
            return self.center + d
        return self.center + d * (self.radius / nrm)

    def sample(self, rng, size, scale=10.0):
        g = rng.normal(size=(size, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.uniform(size=(size, 1)) ** (1.0 / self.dim)
        return self.center + g * r


class ProductSet(FeasibleSet):
    """K = K_1 x ... x K_m over disjoint coordinate blocks.

    ``blocks`` is a list of (indices, set) pairs; the indices must partition
    range(dim). block_project(i, x) projects onto {x : x[idx_i] in K_i},
    leaving the other coordinates alone.
    """

    kind = "product"

    def __init__(self, blocks):
        self.blocks = [(np.asarray(idx, dtype=int).reshape(-1), s) for idx, s in blocks]
        allidx = np.concatenate([idx for idx, _ in self.blocks])
        self.dim = allidx.size
        if sorted(allidx.tolist()) != list(range(self.dim)):
            raise ValueError("block indices must partition range(dim)")
        for idx, s in self.blocks:
            if s.dim != idx.size:
                raise ValueError("block set dimension does not match its indices")
        self._scalar_lo = None
        if all(len(idx) == 1 and isinstance(s, Box) for idx, s in self.blocks):
            lo = np.empty(self.dim)
            hi = np.empty(self.dim)
            for idx, s in self.blocks:
                lo[idx[0]] = s.lo[0]
                hi[idx[0]] = s.hi[0]
            self._scalar_lo, self._scalar_hi = lo, hi

    @classmethod
    def single(cls, s: FeasibleSet) -> "ProductSet":
        return cls([(np.arange(s.dim), s)])

    @classmethod
    def coordinatewise(cls, box: Box) -> "ProductSet":
        return cls([([i], Box([box.lo[i]], [box.hi[i]])) for i in range(box.dim)])

    @property
    def num_blocks(self):
        return len(self.blocks)

    def block_project(self, i: int, x: Vector) -> Vector:
        out = np.array(x, dtype=float)
        if self._scalar_lo is not None:
            j = self.blocks[i][0][0]
            v = out[j]
            if v < self._scalar_lo[j]:
                out[j] = self._scalar_lo[j]
            elif v > self._scalar_hi[j]:
                out[j] = self._scalar_hi[j]
            return out
        idx, s = self.blocks[i]
        out[idx] = s.project(out[idx])
        return out

    def project(self, x):
        if self._scalar_lo is not None:
            return np.minimum(np.maximum(np.asarray(x, dtype=float), self._scalar_lo), self._scalar_hi)
        out = np.array(x, dtype=float)
        for idx, s in self.blocks:
            out[idx] = s.project(out[idx])
        return out

    def sample(self, rng, size, scale=10.0):
        out = np.empty((size, self.dim))
        for idx, s in self.blocks:
            out[:, idx] = s.sample(rng, size, scale)
        return out

    def to_dict(self):
        if self._scalar_lo is not None:
            return Box(self._scalar_lo, self._scalar_hi).to_dict()
        raise UnsupportedSetError("general product sets have no JSON form")


# --------------------------------------------------------------------------
# problems


@dataclass
class VIProblem:
    n: int
    F: Callable[[Vector], Vector]
    feasible: FeasibleSet
    jacobian: Optional[Callable[[Vector], np.ndarray]] = None
    mu: Optional[float] = None
    L: Optional[float] = None
    # set for affine problems F(x) = M x + q
    M: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.feasible.dim != self.n:
            raise ValueError("feasible set dimension differs from n")

    @classmethod
    def affine(cls, M, q, feasible: Optional[FeasibleSet] = None, **kw) -> "VIProblem":
        M = np.array(M, dtype=float)
        q = np.array(q, dtype=float).reshape(-1)
        n = q.size
        if M.shape != (n, n):
            raise ValueError(f"M must be {n}x{n}")
        if feasible is None:
            feasible = whole_space(n)
        return cls(n, lambda x: M @ x + q, feasible, jacobian=lambda x: M, M=M, q=q, **kw)

    def evaluate(self, x) -> Vector:
        y = np.asarray(self.F(np.asarray(x, dtype=float)), dtype=float)
        if y.shape != (self.n,):
            raise ValueError(f"F returned shape {y.shape}, expected ({self.n},)")
        return y

    def check_jacobian(self, x, h=1e-6, rtol=1e-5) -> bool:
        """Compare the analytic Jacobian against central differences at x."""
        if self.jacobian is None:
            raise VIError("problem has no analytic jacobian")
        x = np.asarray(x, dtype=float)
        J = np.asarray(self.jacobian(x), dtype=float)
        fd = np.empty((self.n, self.n))
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = h
            fd[:, j] = (self.evaluate(x + e) - self.evaluate(x - e)) / (2 * h)
        scale = max(1.0, np.abs(J).max())
        return bool(np.abs(J - fd).max() <= rtol * scale)

    def to_json(self) -> str:
        if self.M is None:
            raise VIError("only affine problems serialize to JSON")
        return json.dumps(
            {"n": self.n, "M": self.M.tolist(), "q": self.q.tolist(), "set": self.feasible.to_dict()}
        )


def _decode_bound(v):
    if isinstance(v, str):
        s = v.strip().upper()
        if s in ("INF", "+INF"):
            return math.inf
        if s == "-INF":
            return -math.inf
        raise ValueError(f"bad bound {v!r}")
    return float(v)


def feasible_from_dict(d: dict, n: int) -> FeasibleSet:
    kind = d.get("kind")
    if kind == "orthant":
        return NonnegativeOrthant(n)
    if kind == "box":
        lo = [_decode_bound(v) for v in d.get("lo", [-math.inf] * n)]
        hi = [_decode_bound(v) for v in d.get("hi", [math.inf] * n)]
        box = Box(lo, hi)
        if box.dim != n:
            raise ValueError("box bounds do not match n")
        return box
    if kind == "ball":
        return Ball(d["center"], d["radius"])
    if kind in (None, "free"):
        return whole_space(n)
    raise ValueError(f"unknown set kind {kind!r}")


def affine_constants(M):
    """(mu, L) of x -> Mx + q: least eigenvalue of the symmetric part and the
    spectral norm. Either is None when it is not positive."""
    M = np.asarray(M, dtype=float)
    mu = float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())
    L = float(np.linalg.norm(M, 2))
    return (mu if mu > 0 else None), (L if L > 0 else None)


def problem_from_dict(d: dict) -> VIProblem:
    """Affine problem; mu and L are computed from M unless given."""
    n = int(d["n"])
    feas = feasible_from_dict(d.get("set", {"kind": "free"}), n)
    if isinstance(feas, Box):
        feas = ProductSet.coordinatewise(feas)
    M = np.asarray(d["M"], dtype=float)
    if M.shape != (n, n):
        raise ValueError(f"M must be {n}x{n}")
    mu, L = affine_constants(M)
    return VIProblem.affine(M, d["q"], feas, mu=d.get("mu", mu), L=d.get("L", L))


def problem_from_json(text: str) -> VIProblem:
    return problem_from_dict(json.loads(text))


@dataclass
class Solution:
    point: Vector
    residual: float
    iterations: int
    converged: bool
    trace: List[float] = field(default_factory=list)
    iterates: Optional[list] = None

    def to_dict(self):
        return {
            "point": [float(v) for v in self.point],
            "residual": float(self.residual),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "residual"])
        for k, r in enumerate(self.trace):
            w.writerow([k, repr(float(r))])
        return buf.getvalue()


# --------------------------------------------------------------------------
# diagnostics


def natural_residual(p: VIProblem, x, alpha: float = 1.0) -> float:
    """|x - P_K(x - alpha F(x))|; zero exactly at solutions."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - p.feasible.project(x - alpha * p.evaluate(x))))


@dataclass
class MonotonicityReport:
    monotone: bool
    mu: float
    L: float
    pairs: int


def check_monotonicity(p: VIProblem, samples: int = 200, seed=0, scale: float = 10.0) -> MonotonicityReport:
    """Empirical strong-monotonicity and Lipschitz constants over random pairs in K."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    xs = p.feasible.sample(rng, samples, scale)
    ys = p.feasible.sample(rng, samples, scale)
    mu, L, used = math.inf, 0.0, 0
    for x, y in zip(xs, ys):
        d = x - y
        dd = float(d @ d)
        if dd == 0.0:
            continue
        dF = p.evaluate(x) - p.evaluate(y)
        mu = min(mu, float(dF @ d) / dd)
        L = max(L, float(np.linalg.norm(dF)) / math.sqrt(dd))
        used += 1
    if used == 0:
        raise VIError("could not draw distinct pairs from the feasible set")
    return MonotonicityReport(mu >= -1e-9, mu, L, used)


def check_vi_on_grid(p: VIProblem, x_star, points_per_axis: int = 21, tol: float = 1e-7) -> float:
    """Minimum of <F(x*), y - x*> over a grid on a finite box (n <= 3)."""
    K = p.feasible
    if isinstance(K, ProductSet) and K._scalar_lo is not None:
        lo, hi = K._scalar_lo, K._scalar_hi
    elif isinstance(K, Box):
        lo, hi = K.lo, K.hi
    else:
        raise UnsupportedSetError("grid check needs a box")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or p.n > 3:
        raise UnsupportedSetError("grid check needs a finite box with n <= 3")
    axes = [np.linspace(a, b, points_per_axis) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, p.n)
    x_star = np.asarray(x_star, dtype=float)
    return float(((grid - x_star) @ p.evaluate(x_star)).min())


# --------------------------------------------------------------------------
# step-size schedules


@dataclass
class StepSchedule:
    """alpha(k) > 0 and beta(k) in (0, 2).

    Built-in schedules carry ``family`` / ``params`` so their series
    conditions can be decided in closed form.
    """

    alpha: Callable[[int], float]
    beta: Callable[[int], float]
    family: str = "custom"
    params: dict = field(default_factory=dict)

    @classmethod
    def power(cls, a: float = 1.0, c: float = 1.0, p: float = 1.0, beta: float = 1.0):
        """alpha_k = a / (k + c)^p with constant beta."""
        return cls(
            lambda k: a / (k + c) ** p,
            lambda k: beta,
            "power",
            {"a": a, "c": c, "p": p, "beta": beta},
        )

    @classmethod
    def harmonic(cls, a: float = 1.0, c: float = 1.0, beta: float = 1.0):
        return cls.power(a, c, 1.0, beta)

    @classmethod
    def constant(cls, a: float, beta: float = 1.0):
        return cls(lambda k: a, lambda k: beta, "constant", {"a": a, "beta": beta})


@dataclass
class ScheduleReport:
    valid: bool
    analytic: bool
    issues: List[str] = field(default_factory=list)

    def __bool__(self):
        return self.valid


def assert_schedule_valid(sched: StepSchedule, horizon: int = 10**6) -> ScheduleReport:
    """Check sum a_k = inf, sum a_k^2 < inf, sum a_k^2/g_k < inf, g_k = b_k(2 - b_k)."""
    issues = []
    fam, prm = sched.family, sched.params
    if fam in ("power", "constant"):
        beta = prm["beta"]
        if not 0.0 < beta < 2.0:
            issues.append(f"beta={beta} outside (0, 2): gamma_k = {beta * (2 - beta)} <= 0")
        if prm["a"] <= 0:
            issues.append("alpha must be positive")
        if fam == "constant":
            issues.append("constant alpha: sum of alpha_k^2 diverges")
        else:
            p = prm["p"]
            if p > 1.0:
                issues.append(f"p={p} > 1: sum of alpha_k converges")
            if p <= 0.5:
                issues.append(f"p={p} <= 1/2: sum of alpha_k^2 diverges")
                issues.append(f"p={p} <= 1/2: sum of alpha_k^2/gamma_k diverges")
        return ScheduleReport(not issues, True, issues)

    k = np.arange(horizon, dtype=float)
    a = np.array([sched.alpha(int(i)) for i in k]) if horizon <= 10_000 else np.vectorize(sched.alpha)(k.astype(int))
    b = np.vectorize(sched.beta)(k.astype(int)) * np.ones_like(k)
    if np.any(a <= 0):
        issues.append("alpha_k must be positive")
    g = b * (2.0 - b)
    if np.any(g <= 0):
        issues.append("beta_k outside (0, 2): gamma_k <= 0")
        return ScheduleReport(False, False, issues)
    half = horizon // 2

    def tail_share(v):
        total = v.sum()
        return v[half:].sum() / total if total > 0 else 0.0

    # a divergent harmonic-like series keeps a sizeable share in the last half;
    # a convergent one puts almost nothing there.
    if tail_share(a) < 1e-3:
        issues.append("sum of alpha_k looks convergent")
    if tail_share(a * a) > 1e-3:
        issues.append("sum of alpha_k^2 looks divergent")
    if tail_share(a * a / g) > 1e-3:
        issues.append("sum of alpha_k^2/gamma_k looks divergent")
    return ScheduleReport(not issues, False, issues)


# --------------------------------------------------------------------------
# stochastic sampling


@dataclass
class StochasticSampler:
    """Noisy oracle for F plus the constraint-block sampling law.

    ``draw_v(rng, count)`` returns ``count`` noise realizations (first axis);
    ``F_noisy(x, v)`` must have expectation F(x). ``block_probs`` defaults
    to uniform over the blocks.
    """

    F_noisy: Callable[[Vector, object], Vector]
    draw_v: Callable[[np.random.Generator, int], Sequence]
    block_probs: Optional[np.ndarray] = None
    additive: bool = False
    F_noisy_rows: Optional[Callable] = None

    @classmethod
    def additive_gaussian(cls, p: VIProblem, sigma: float = 1.0) -> "StochasticSampler":
        F = p.F
        return cls(
            lambda x, v: F(x) + v,
            lambda rng, count: rng.normal(0.0, sigma, size=(count, p.n)),
            additive=True,
        )

    @classmethod
    def additive_uniform(cls, p: VIProblem, half_width: float = 1.0) -> "StochasticSampler":
        F = p.F
        return cls(
            lambda x, v: F(x) + v,
            lambda rng, count: rng.uniform(-half_width, half_width, size=(count, p.n)),
            additive=True,
        )

    @classmethod
    def noiseless(cls, p: VIProblem) -> "StochasticSampler":
        return cls(
            lambda x, v: p.evaluate(x),
            lambda rng, count: np.zeros((count, p.n)),
            additive=True,
        )

    def min_block_prob(self, m: int) -> float:
        probs = self._probs(m)
        return float(probs.min())

    def _probs(self, m):
        if self.block_probs is None:
            return np.full(m, 1.0 / m)
        probs = np.asarray(self.block_probs, dtype=float)
        if probs.size != m or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("block_probs must be a distribution over the blocks")
        return probs

    def draw_blocks(self, rng, m: int, count: int) -> np.ndarray:
        if m == 1:
            return np.zeros(count, dtype=int)
        if self.block_probs is None:
            return rng.integers(0, m, size=count)
        return rng.choice(m, size=count, p=self._probs(m))


# --------------------------------------------------------------------------
# solvers


def default_alpha(p: VIProblem, extragradient: bool = False) -> float:
    """mu/L^2 for the projection method; 0.5/L for extragradient, which needs alpha < 1/L."""
    if extragradient and p.L is not None and p.L > 0:
        return 0.5 / p.L
    if p.mu is not None and p.L is not None and p.mu > 0:
        return p.mu / p.L**2
    raise VIError("alpha not given and mu/L unknown")


def _check_start(p, x0):
    x = p.feasible.project(np.zeros(p.n) if x0 is None else np.array(x0, dtype=float).reshape(-1))
    if x.shape != (p.n,):
        raise ValueError("x0 has the wrong dimension")
    return x


def _diverged(exc, alpha):
    return DivergedError(f"{exc}; try a smaller alpha than {alpha:g}")


def solve_basic_projection(
    p: VIProblem,
    D=None,
    alpha: Optional[float] = None,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    x0=None,
    keep_iterates: bool = False,
) -> Solution:
    """x_{k+1} = P_K(x_k - alpha D^{-1} F(x_k)), stopped on the natural residual."""
    if alpha is None:
        alpha = default_alpha(p)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    d = np.ones(p.n) if D is None else np.asarray(D, dtype=float)
    if d.ndim == 2:
        if np.any(d != np.diag(np.diag(d))):
            raise ValueError("D must be diagonal")
        d = np.diag(d).copy()
    if d.shape != (p.n,) or np.any(d <= 0):
        raise ValueError("D must be a positive diagonal")
    proj = p.feasible.project
    F = p.evaluate

    def H(x):
        return proj(x - alpha * (F(x) / d))

    hmap = ContractiveMap(H, p.n)
    try:
        res = iterate_to_fixpoint(
            hmap,
            _check_start(p, x0),
            tol=tol,
            max_iter=max_iter,
            residual=lambda x, hx: natural_residual(p, x),
            keep_iterates=keep_iterates,
        )
    except DivergenceError as exc:
        raise _diverged(exc, alpha) from exc
    return Solution(res.point, res.final_residual, res.iterations, res.converged, res.residuals, res.iterates)


def solve_extragradient(
    p: VIProblem,
    alpha: Optional[float] = None,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    x0=None,
    keep_iterates: bool = False,
) -> Solution:
    """Korpelevich predictor/corrector: y = P(x - aF(x)), x+ = P(x - aF(y))."""
    if alpha is None:
        alpha = default_alpha(p, extragradient=True)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    proj = p.feasible.project
    F = p.evaluate

    def H(x):
        y = proj(x - alpha * F(x))
        return proj(x - alpha * F(y))

    try:
        res = iterate_to_fixpoint(
            ContractiveMap(H, p.n),
            _check_start(p, x0),
            tol=tol,
            max_iter=max_iter,
            residual=lambda x, hx: natural_residual(p, x),
            keep_iterates=keep_iterates,
        )
    except DivergenceError as exc:
        raise _diverged(exc, alpha) from exc
    return Solution(res.point, res.final_residual, res.iterations, res.converged, res.residuals, res.iterates)


def solve_stochastic_two_step(
    p: VIProblem,
    sampler: StochasticSampler,
    sched: StepSchedule,
    seed=0,
    iterations: int = 10_000,
    x0=None,
    keep_iterates: bool = False,
    trace_every: int = 0,
    chunk: int = 4096,
) -> Solution:
    """Incremental two-step projection with sampled noise and constraint blocks.

        z_k     = x_k - alpha_k F_w(x_k, v_k)
        x_{k+1} = z_k - beta_k (z_k - P_{w_k} z_k)

    Iterates may leave K. The returned residual is the natural residual of
    the final iterate against the deterministic F.
    """
    K = p.feasible
    if not isinstance(K, ProductSet):
        raise UnsupportedSetError("two-step solver needs a product-of-blocks feasible set")
    m = K.num_blocks
    rng = np.random.default_rng(seed)
    x = np.zeros(p.n) if x0 is None else np.array(x0, dtype=float).reshape(-1)
    iterates = [x.copy()] if keep_iterates else None
    trace = []
    Fn = sampler.F_noisy
    bproj = K.block_project
    alpha, beta = sched.alpha, sched.beta

    k = 0
    while k < iterations:
        count = min(chunk, iterations - k)
        vs = sampler.draw_v(rng, count)
        ws = sampler.draw_blocks(rng, m, count)
        for j in range(count):
            z = x - alpha(k) * Fn(x, vs[j])
            b = beta(k)
            # beta = 1 is exactly P_w z; computed directly so the noiseless
            # single-block run is bit-identical to the projection method
            if b == 1.0:
                x = bproj(ws[j], z)
            else:
                x = z - b * (z - bproj(ws[j], z))
            k += 1
            if keep_iterates:
                iterates.append(x.copy())
            if trace_every and k % trace_every == 0:
                trace.append(natural_residual(p, x))
        if not np.all(np.isfinite(x)) or np.abs(x).max() > 1e12:
            raise DivergedError(f"stochastic iterate diverged by k={k}; try smaller steps")
    r = natural_residual(p, x)
    return Solution(x, r, iterations, True, trace, iterates)


def solve_stochastic_two_step_many(
    p: VIProblem,
    sampler: StochasticSampler,
    sched: StepSchedule,
    seeds,
    iterations: int = 10_000,
    x0=None,
    chunk: int = 4096,
) -> List[Solution]:
    """Run the two-step method for several seeds at once, one row per seed.

    Each seed draws from its own generator in the same chunked order as
    solve_stochastic_two_step, so a row follows the same sample path as the
    single-seed run (up to floating-point reassociation in the matrix product).
    Needs an affine problem or a sampler with ``F_noisy_rows``.
    """
    K = p.feasible
    if not isinstance(K, ProductSet):
        raise UnsupportedSetError("two-step solver needs a product-of-blocks feasible set")
    seeds = list(seeds)
    S, n, m = len(seeds), p.n, K.num_blocks
    rngs = [np.random.default_rng(s) for s in seeds]
    X = np.zeros((S, n)) if x0 is None else np.tile(np.asarray(x0, dtype=float).reshape(-1), (S, 1))
    rows = np.arange(S)

    if getattr(sampler, "F_noisy_rows", None) is not None:
        Fn_rows = sampler.F_noisy_rows
    elif p.M is not None and getattr(sampler, "additive", False):
        MT, q = p.M.T.copy(), p.q

        def Fn_rows(Xr, V):
            return Xr @ MT + q + V

    else:
        raise UnsupportedSetError("batched runs need an affine problem with additive noise")

    scalar = K._scalar_lo is not None
    if scalar:
        col_of = np.array([idx[0] for idx, _ in K.blocks])
        lo, hi = K._scalar_lo, K._scalar_hi

    k = 0
    while k < iterations:
        count = min(chunk, iterations - k)
        Vs = np.stack([np.asarray(sampler.draw_v(r, count), dtype=float) for r in rngs], axis=1)
        Ws = np.stack([sampler.draw_blocks(r, m, count) for r in rngs], axis=1)
        for j in range(count):
            Z = X - sched.alpha(k) * Fn_rows(X, Vs[j])
            b = sched.beta(k)
            if scalar:
                cols = col_of[Ws[j]]
                P = Z.copy()
                P[rows, cols] = np.clip(Z[rows, cols], lo[cols], hi[cols])
            else:
                P = np.array([K.block_project(w, z) for w, z in zip(Ws[j], Z)])
            X = P if b == 1.0 else Z - b * (Z - P)
            k += 1
        if not np.all(np.isfinite(X)) or np.abs(X).max() > 1e12:
            raise DivergedError(f"stochastic iterate diverged by k={k}; try smaller steps")
    return [Solution(x, natural_residual(p, x), iterations, True) for x in X]
