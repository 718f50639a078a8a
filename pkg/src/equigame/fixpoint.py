"""Fixed-point iteration for (eventually) contractive maps on R^n.

The metric is the Euclidean norm throughout. Maps passed in here must be
free of side effects; the iteration itself keeps no shared state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

DIVERGENCE_LIMIT = 1e12


class FixpointError(Exception):
    pass


class DivergenceError(FixpointError):
    def __init__(self, iteration: int, residual: float):
        self.iteration = iteration
        self.residual = residual
        super().__init__(
            f"iteration diverged at k={iteration} (residual={residual!r})"
        )


class ModulusViolation(FixpointError):
    def __init__(self, iteration: int, ratio: float, modulus: float):
        self.iteration = iteration
        self.ratio = ratio
        super().__init__(
            f"step ratio {ratio:.6g} exceeds claimed modulus {modulus:.6g} "
            f"at k={iteration}"
        )


@dataclass
class ContractiveMap:
    """A self-map of R^n with an optional claimed contraction modulus."""

    apply: Callable[[np.ndarray], np.ndarray]
    dimension: int
    modulus: Optional[float] = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if self.modulus is not None and not 0.0 <= self.modulus < 1.0:
            raise ValueError("modulus must lie in [0, 1)")

    def __call__(self, x):
        y = np.asarray(self.apply(x), dtype=float)
        if y.shape != (self.dimension,):
            raise ValueError(
                f"map returned shape {y.shape}, expected ({self.dimension},)"
            )
        return y


@dataclass
class FixpointResult:
    point: np.ndarray
    iterations: int
    final_residual: float
    converged: bool
    residuals: list = field(default_factory=list)
    iterates: Optional[list] = None


def _as_point(x0, dim):
    x = np.array(x0, dtype=float).reshape(-1)
    if x.shape != (dim,):
        raise ValueError(f"x0 has {x.size} entries, map expects {dim}")
    return x


def iterate_to_fixpoint(
    hmap: ContractiveMap,
    x0,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    warmup: int = 0,
    residual: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
    keep_iterates: bool = False,
) -> FixpointResult:
    """Run x_{k+1} = H(x_k) until the residual at x_k drops to ``tol``.

    ``residual(x, Hx)`` defaults to |x - H(x)|. When ``hmap.modulus`` is set,
    every step after the first ``warmup`` ones must shrink by that factor,
    otherwise ModulusViolation is raised.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = _as_point(x0, hmap.dimension)
    res_fn = residual or (lambda a, b: float(np.linalg.norm(b - a)))
    residuals = []
    iterates = [x.copy()] if keep_iterates else None
    prev_step = None

    for k in range(max_iter + 1):
        hx = hmap(x)
        if not np.all(np.isfinite(hx)):
            raise DivergenceError(k, float("nan"))
        r = res_fn(x, hx)
        if not np.isfinite(r) or r > DIVERGENCE_LIMIT:
            raise DivergenceError(k, r)
        residuals.append(r)
        if r <= tol:
            return FixpointResult(x, k, r, True, residuals, iterates)
        if k == max_iter:
            break

        step = float(np.linalg.norm(hx - x))
        c = hmap.modulus
        if c is not None and prev_step is not None and k > warmup:
            if step > c * prev_step + 1e-12:
                raise ModulusViolation(k, step / prev_step, c)
        prev_step = step
        x = hx
        if keep_iterates:
            iterates.append(x.copy())

    return FixpointResult(x, max_iter, residuals[-1], False, residuals, iterates)


@dataclass
class PreservationReport:
    preserved: bool
    steps_checked: int
    first_violation: Optional[int] = None
    violating_point: Optional[np.ndarray] = None
    final_point: Optional[np.ndarray] = None
    final_member: bool = True

    def __bool__(self):
        return self.preserved


def check_closed_property_preserved(
    hmap: ContractiveMap,
    membership: Callable[[np.ndarray], bool],
    x0,
    steps: int = 1000,
) -> PreservationReport:
    """Check pointwise that ``membership`` holds along the orbit of ``x0``.

    Iterate k is reported as the first violation if it is the first one outside
    the set. Only the iterates themselves are tested, not their closure.
    """
    x = _as_point(x0, hmap.dimension)
    if not membership(x):
        raise ValueError("precondition failed: x0 is not a member")
    for k in range(1, steps + 1):
        x = hmap(x)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(k, float("nan"))
        if not membership(x):
            return PreservationReport(False, k, k, x.copy(), x.copy(), False)
    return PreservationReport(True, steps, final_point=x, final_member=True)


def estimate_modulus(hmap: ContractiveMap, sample_pairs: Sequence) -> float:
    """Largest observed ratio |H(u) - H(v)| / |u - v| over the pairs."""
    best = None
    for u, v in sample_pairs:
        u = _as_point(u, hmap.dimension)
        v = _as_point(v, hmap.dimension)
        duv = np.linalg.norm(u - v)
        if duv == 0.0:
            continue
        ratio = float(np.linalg.norm(hmap(u) - hmap(v)) / duv)
        best = ratio if best is None else max(best, ratio)
    if best is None:
        raise ValueError("all sample pairs are coincident")
    return best


def a_priori_bound(modulus: float, first_step: float, k: int) -> float:
    """Banach bound on |x_k - x*| from the first step length."""
    return modulus**k * first_step / (1.0 - modulus)
