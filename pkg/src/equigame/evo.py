"""Evolutionary dynamics.

Moran birth-death chains, evolution of monotone conjunctions under the
Perf correlation fitness, and an extinction/replacement loop over the
network economy in which fitness is each producer's equilibrium utility.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import netecon
from .vi import VIError, solve_extragradient


# --------------------------------------------------------------------------
# Moran process


@dataclass(frozen=True)
class MoranState:
    N: int
    i: int
    r: float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if not 0 <= self.i <= self.N:
            raise ValueError("i must lie in [0, N]")
        if self.r <= 0:
            raise ValueError("r must be positive")

    @property
    def absorbing(self) -> bool:
        return self.i in (0, self.N)


def reproduction_probability(N: int, i: int, r: float) -> float:
    """p_i = r i / (r i + N - i), the chance the reproducer is a mutant."""
    return r * i / (r * i + N - i)


def transition_probabilities(N: int, i: int, r: float):
    """(P(i -> i+1), P(i -> i-1)) under fitness-weighted birth, uniform death."""
    p = reproduction_probability(N, i, r)
    return p * (N - i) / N, (1.0 - p) * i / N


def moran_step(s: MoranState, rng) -> MoranState:
    """One birth-death event.

    The reproducer is a mutant with probability p_i; the individual that dies
    is drawn uniformly from the N individuals present before the birth.
    """
    if s.absorbing:
        raise ValueError(f"state i={s.i} is absorbing")
    p = reproduction_probability(s.N, s.i, s.r)
    birth_mutant = rng.random() < p
    death_mutant = rng.random() < s.i / s.N
    return MoranState(s.N, s.i + int(birth_mutant) - int(death_mutant), s.r)


def fixation_probability_exact(N: int, r: float, i0: int) -> float:
    """Absorption probability at i = N, from the (N-1)-state linear system."""
    if N < 1 or r <= 0:
        raise ValueError("need N >= 1 and r > 0")
    if not 0 <= i0 <= N:
        raise ValueError("i0 must lie in [0, N]")
    if i0 in (0, N):
        return float(i0 == N)
    size = N - 1
    A = np.zeros((size, size))
    b = np.zeros(size)
    for row, i in enumerate(range(1, N)):
        up, down = transition_probabilities(N, i, r)
        # phi_i (up + down) = up phi_{i+1} + down phi_{i-1}
        A[row, row] = up + down
        if i + 1 == N:
            b[row] += up
        else:
            A[row, row + 1] = -up
        if i - 1 > 0:
            A[row, row - 1] = -down
    phi = np.linalg.solve(A, b)
    return float(phi[i0 - 1])


def fixation_probability_closed_form(N: int, r: float, i0: int) -> float:
    """(1 - r^-i0) / (1 - r^-N), or i0/N when r = 1."""
    if r == 1.0:
        return i0 / N
    return (1.0 - r ** (-i0)) / (1.0 - r ** (-N))


@dataclass
class FixationEstimate:
    exact: float
    empirical: float
    stderr: float
    replicas: int
    seed: int

    def to_dict(self):
        return {
            "exact": self.exact,
            "empirical": self.empirical,
            "stderr": self.stderr,
            "replicas": self.replicas,
            "seed": self.seed,
        }


REPLICA_BLOCK = 4096


def _simulate_block(N, r, i0, count, rng) -> int:
    i = np.full(count, i0, dtype=np.int64)
    active = (i > 0) & (i < N)
    while active.any():
        idx = np.flatnonzero(active)
        ii = i[idx]
        p = r * ii / (r * ii + N - ii)
        birth = rng.random(idx.size) < p
        death = rng.random(idx.size) < ii / N
        ii = ii + birth.astype(np.int64) - death.astype(np.int64)
        i[idx] = ii
        active[idx] = (ii > 0) & (ii < N)
    return int((i == N).sum())


def simulate_fixation(N: int, r: float, i0: int, replicas: int, seed: int = 42, workers: int = 1) -> FixationEstimate:
    """Monte Carlo fixation rate with its standard error.

    Replicas are grouped in fixed blocks of REPLICA_BLOCK; block b draws from
    SeedSequence(seed, spawn_key=(b,)), so the estimate does not depend on
    the number of workers.
    """
    if replicas < 1:
        raise ValueError("replicas must be at least 1")
    nblocks = math.ceil(replicas / REPLICA_BLOCK)
    sizes = [min(REPLICA_BLOCK, replicas - b * REPLICA_BLOCK) for b in range(nblocks)]

    def run(b):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        return _simulate_block(N, r, i0, sizes[b], rng)

    if workers > 1 and nblocks > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as ex:
            hits = sum(ex.map(run, range(nblocks)))
    else:
        hits = sum(run(b) for b in range(nblocks))
    rate = hits / replicas
    se = math.sqrt(rate * (1.0 - rate) / replicas)
    return FixationEstimate(fixation_probability_exact(N, r, i0), rate, se, replicas, seed)


# --------------------------------------------------------------------------
# evolvability of monotone conjunctions


@dataclass(frozen=True)
class BooleanHypothesis:
    """Monotone conjunction over variables 1..n (empty conjunction is constant +1)."""

    n: int
    literals: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "literals", frozenset(self.literals))
        if any(not 1 <= v <= self.n for v in self.literals):
            raise ValueError("literals must lie in 1..n")

    def evaluate(self, x) -> int:
        return 1 if all(x[v - 1] for v in self.literals) else -1

    def evaluate_all(self, X: np.ndarray) -> np.ndarray:
        """Vectorized over the rows of a 0/1 assignment matrix."""
        if not self.literals:
            return np.ones(X.shape[0], dtype=np.int64)
        cols = sorted(v - 1 for v in self.literals)
        return np.where(X[:, cols].all(axis=1), 1, -1)

    def neighbors(self) -> List["BooleanHypothesis"]:
        """All single-literal additions and deletions."""
        return [BooleanHypothesis(self.n, self.literals ^ {v}) for v in range(1, self.n + 1)]


def all_assignments(n: int) -> np.ndarray:
    """Rows are the 2^n assignments; row index bits are variables n..1."""
    idx = np.arange(2**n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(bool)


def uniform_distribution(n: int) -> np.ndarray:
    return np.full(2**n, 1.0 / 2**n)


EXACT_LIMIT = 24


def perf(r, f, D=None, samples: int = 0, seed: int = 0) -> float:
    """Perf_f(r, D) = sum over x of f(x) r(x) D(x).

    ``D`` is a probability vector over all_assignments(n) (uniform when None).
    With ``samples > 0``, or n above EXACT_LIMIT, a seeded Monte Carlo
    estimate under the uniform distribution is returned instead.
    """
    n = f.n
    if r.n != n:
        raise ValueError("hypothesis and target disagree on n")
    if samples or n > EXACT_LIMIT:
        if D is not None:
            raise ValueError("sampling mode supports the uniform distribution only")
        rng = np.random.default_rng(seed)
        X = rng.random((samples or 100_000, n)) < 0.5
        return float((f.evaluate_all(X) * r.evaluate_all(X)).mean())
    D = uniform_distribution(n) if D is None else np.asarray(D, dtype=float)
    if D.shape != (2**n,) or np.any(D < 0) or abs(D.sum() - 1.0) > 1e-9:
        raise ValueError("D must be a normalized distribution over the 2^n assignments")
    X = all_assignments(n)
    return float(np.dot(f.evaluate_all(X) * r.evaluate_all(X), D))


@dataclass
class ConjunctionTrace:
    hypotheses: List[BooleanHypothesis]
    perfs: List[float]
    kinds: List[str]

    @property
    def final(self):
        return self.hypotheses[-1]

    def generations_to(self, level: float = 1.0, tol: float = 1e-12) -> Optional[int]:
        for g, v in enumerate(self.perfs):
            if v >= level - tol:
                return g
        return None


def evolve_conjunction(
    target: BooleanHypothesis,
    D=None,
    generations: int = 500,
    tolerance: Optional[float] = None,
    rng=None,
    start: Optional[BooleanHypothesis] = None,
    stop_at_optimum: bool = True,
) -> ConjunctionTrace:
    """Mutate one literal per generation under beneficial/neutral selection.

    Beneficial neighbours improve Perf by at least ``tolerance`` (default
    2^-(n+1)); if any exist one is taken uniformly at random. Otherwise a
    random neutral neighbour (|change| < tolerance) is taken, else the
    hypothesis stays put.
    """
    n = target.n
    t = 2.0 ** -(n + 1) if tolerance is None else tolerance
    rng = np.random.default_rng(rng)
    D = uniform_distribution(n) if D is None else np.asarray(D, dtype=float)
    X = all_assignments(n)
    fx = target.evaluate_all(X)

    def fitness(h):
        return float(np.dot(fx * h.evaluate_all(X), D))

    cur = start or BooleanHypothesis(n)
    cur_perf = fitness(cur)
    trace = ConjunctionTrace([cur], [cur_perf], ["start"])
    for _ in range(generations):
        if stop_at_optimum and cur_perf >= 1.0 - 1e-12:
            break
        scored = [(h, fitness(h)) for h in cur.neighbors()]
        beneficial = [(h, v) for h, v in scored if v - cur_perf >= t]
        neutral = [(h, v) for h, v in scored if abs(v - cur_perf) < t]
        if beneficial:
            cur, cur_perf = beneficial[rng.integers(len(beneficial))]
            kind = "beneficial"
        elif neutral:
            cur, cur_perf = neutral[rng.integers(len(neutral))]
            kind = "neutral"
        else:
            kind = "stay"
        trace.hypotheses.append(cur)
        trace.perfs.append(cur_perf)
        trace.kinds.append(kind)
    return trace


# --------------------------------------------------------------------------
# evolutionary loop over the network economy


@dataclass
class EvolutionRound:
    round: int
    fitness: List[float]
    extinct: Optional[int]
    parent: Optional[int]
    factors: List[float]
    equilibrium: List[float]
    residual: float

    @property
    def mean_fitness(self) -> float:
        return float(np.mean(self.fitness))


@dataclass
class EvolutionTrace:
    rounds: List[EvolutionRound] = field(default_factory=list)
    diagnostic: Optional[str] = None

    @property
    def truncated(self) -> bool:
        return self.diagnostic is not None

    def fitness_matrix(self) -> np.ndarray:
        return np.array([r.fitness for r in self.rounds])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        m = len(self.rounds[0].fitness) if self.rounds else 0
        w.writerow(["round"] + [f"fitness_{i + 1}" for i in range(m)] + ["extinct", "residual"])
        for r in self.rounds:
            w.writerow(
                [r.round]
                + [repr(float(v)) for v in r.fitness]
                + ["" if r.extinct is None else r.extinct + 1, repr(float(r.residual))]
            )
        return buf.getvalue()


def clone_provider(model: netecon.NetworkEconomyModel, parent: int, slot: int, factors=None):
    """Replace provider ``slot`` by a copy of ``parent``.

    Everything indexed by the parent (production cost, demand prices, and the
    delivery and opportunity costs on its links) is copied with the two
    provider indices swapped in every variable, so the copy faces the market
    exactly as the parent does. ``factors`` multiplies the copied
    production-cost coefficients.
    """
    if not model.is_polynomial():
        raise ValueError("mutation needs polynomial costs")
    lay = model.layout
    swap = {}
    for b in netecon.BLOCKS:
        for j in range(model.n):
            for k in range(model.o):
                a, c = lay.index(b, parent, j, k), lay.index(b, slot, j, k)
                swap[a], swap[c] = c, a
    out = model.copy()
    f_new = model.f[parent].remap(swap)
    if factors is not None:
        f_new = f_new.scale_coefficients(factors)
    out.f[slot] = f_new
    for table_in, table_out in ((model.rho, out.rho), (model.c, out.c), (model.oc, out.oc)):
        for j in range(model.n):
            for k in range(model.o):
                g = table_in.get((parent, j, k))
                if g is None:
                    table_out.pop((slot, j, k), None)
                else:
                    table_out[(slot, j, k)] = g.remap(swap)
    return out


def evolutionary_vi_loop(
    model: netecon.NetworkEconomyModel,
    rounds: int = 10,
    delta: float = 0.05,
    rng=None,
    alpha: Optional[float] = None,
    tol: float = 1e-8,
    max_iter: int = 100_000,
) -> EvolutionTrace:
    """Solve, score producers by U1 at equilibrium, replace the least fit.

    Each round: solve the VI by extragradient, record producer utilities,
    remove the least-fit producer (lowest index on ties) and put in its slot
    a copy of a uniformly chosen survivor whose production-cost coefficients
    are scaled by independent (1 + eps), eps ~ U(-delta, delta).
    The record for round t holds the population that was solved in round t.
    """
    if model.m < 2:
        raise ValueError("need at least two service providers")
    rng = np.random.default_rng(rng)
    trace = EvolutionTrace()
    current = model
    for t in range(rounds):
        problem = netecon.assemble_vi(current)
        try:
            sol = solve_extragradient(problem, alpha=alpha, tol=tol, max_iter=max_iter)
        except VIError as exc:
            trace.diagnostic = f"round {t}: {exc}"
            return trace
        if not sol.converged:
            trace.diagnostic = f"round {t}: extragradient did not converge (residual {sol.residual:.3g})"
            return trace
        U1, _ = netecon.utilities(current, sol.point)
        extinct = int(np.argmin(U1))
        survivors = [i for i in range(current.m) if i != extinct]
        parent = survivors[int(rng.integers(len(survivors)))]
        ncoef = len(current.f[parent].terms)
        factors = (1.0 + rng.uniform(-delta, delta, size=ncoef)).tolist() if delta > 0 else [1.0] * ncoef
        trace.rounds.append(
            EvolutionRound(t, U1.tolist(), extinct, parent, factors, sol.point.tolist(), sol.residual)
        )
        current = clone_provider(current, parent, extinct, factors)
    return trace
