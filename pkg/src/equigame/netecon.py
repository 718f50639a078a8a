"""Three-tier network economy: service providers, network providers, markets.

Service provider i chooses quantities Q[i,j,k]; network provider j chooses
quality q[i,j,k] and price pi[i,j,k]. The Cournot-Bertrand-Nash equilibrium
is the solution of VI(F, R_+^{3mno}) where F stacks the negative gradients of
each agent's utility with respect to its own variables.

Points are flat vectors ordered (all Q, all q, all pi), each block in
lexicographic (i, j, k) order. Indices in names and JSON are 1-based.
"""
from __future__ import annotations

import itertools
import json
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .vi import NonnegativeOrthant, ProductSet, VIProblem, affine_constants

BLOCKS = ("Q", "q", "pi")
FD_STEP = 1e-6


class FiniteDifferenceWarning(UserWarning):
    pass


class Layout:
    """Maps named variables Q[i,j,k], q[i,j,k], pi[i,j,k] to flat indices."""

    def __init__(self, m: int, n: int, o: int):
        if min(m, n, o) < 1:
            raise ValueError("m, n, o must be positive")
        self.m, self.n, self.o = m, n, o
        self.size = m * n * o
        self.dim = 3 * self.size

    def index(self, block: str, i: int, j: int, k: int) -> int:
        """Flat index for 0-based (i, j, k)."""
        b = BLOCKS.index(block)
        if not (0 <= i < self.m and 0 <= j < self.n and 0 <= k < self.o):
            raise IndexError(f"{block}[{i + 1},{j + 1},{k + 1}] out of range")
        return b * self.size + (i * self.n + j) * self.o + k

    def triples(self):
        return itertools.product(range(self.m), range(self.n), range(self.o))

    def name(self, idx: int) -> str:
        b, r = divmod(idx, self.size)
        i, r = divmod(r, self.n * self.o)
        j, k = divmod(r, self.o)
        return f"{BLOCKS[b]}[{i + 1},{j + 1},{k + 1}]"

    _NAME = re.compile(r"^\s*(Q|q|pi)\s*\[\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\]\s*$")

    def parse(self, name: str) -> int:
        mt = self._NAME.match(name)
        if not mt:
            raise ValueError(f"bad variable name {name!r}")
        block, i, j, k = mt.group(1), *(int(g) - 1 for g in mt.groups()[1:])
        return self.index(block, i, j, k)

    def decode(self, idx: int) -> Tuple[str, int, int, int]:
        b, r = divmod(idx, self.size)
        i, r = divmod(r, self.n * self.o)
        j, k = divmod(r, self.o)
        return BLOCKS[b], i, j, k


# --------------------------------------------------------------------------
# polynomial cost functions


class Polynomial:
    """Sparse polynomial over the flat variables.

    ``terms`` maps a monomial, a sorted tuple of (index, power) pairs, to its
    coefficient. The empty tuple is the constant term.
    """

    def __init__(self, terms: Optional[Dict[tuple, float]] = None):
        self.terms = {}
        for mono, c in (terms or {}).items():
            if c != 0.0:
                self.terms[mono] = self.terms.get(mono, 0.0) + float(c)

    @classmethod
    def constant(cls, c: float) -> "Polynomial":
        return cls({(): c})

    @classmethod
    def var(cls, idx: int, power: int = 1, coef: float = 1.0) -> "Polynomial":
        return cls({((idx, power),) if power else (): coef})

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        out = dict(self.terms)
        for mono, c in other.terms.items():
            out[mono] = out.get(mono, 0.0) + c
        return Polynomial({k: v for k, v in out.items() if v != 0.0})

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            out: Dict[tuple, float] = {}
            for m1, c1 in self.terms.items():
                for m2, c2 in other.terms.items():
                    pw = dict(m1)
                    for v, p in m2:
                        pw[v] = pw.get(v, 0) + p
                    mono = tuple(sorted(pw.items()))
                    out[mono] = out.get(mono, 0.0) + c1 * c2
            return Polynomial(out)
        return Polynomial({k: v * float(other) for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self.terms == other.terms

    def __repr__(self):
        return f"Polynomial({self.terms!r})"

    @property
    def degree(self) -> int:
        return max((sum(p for _, p in mono) for mono in self.terms), default=0)

    def variables(self):
        return sorted({v for mono in self.terms for v, _ in mono})

    def evaluate(self, x) -> float:
        total = 0.0
        for mono, c in self.terms.items():
            t = c
            for v, p in mono:
                t *= x[v] ** p
            total += t
        return total

    def partial(self, idx: int) -> "Polynomial":
        out = {}
        for mono, c in self.terms.items():
            pw = dict(mono)
            p = pw.get(idx, 0)
            if p == 0:
                continue
            if p == 1:
                del pw[idx]
            else:
                pw[idx] = p - 1
            key = tuple(sorted(pw.items()))
            out[key] = out.get(key, 0.0) + c * p
        return Polynomial(out)

    def gradient(self, x) -> np.ndarray:
        g = np.zeros(len(x))
        for v in self.variables():
            g[v] = self.partial(v).evaluate(x)
        return g

    def remap(self, mapping: Dict[int, int]) -> "Polynomial":
        out = {}
        for mono, c in self.terms.items():
            pw: Dict[int, int] = {}
            for v, p in mono:
                w = mapping.get(v, v)
                pw[w] = pw.get(w, 0) + p
            key = tuple(sorted(pw.items()))
            out[key] = out.get(key, 0.0) + c
        return Polynomial(out)

    def scale_coefficients(self, factors) -> "Polynomial":
        """Multiply each coefficient (in sorted monomial order) by its factor."""
        monos = sorted(self.terms)
        return Polynomial({mono: self.terms[mono] * f for mono, f in zip(monos, factors)})

    def to_terms(self, layout: Layout):
        out = []
        for mono, c in sorted(self.terms.items()):
            if not mono:
                out.append({"coef": c})
            elif len(mono) == 1:
                v, p = mono[0]
                out.append({"var": layout.name(v), "pow": p, "coef": c})
            else:
                out.append({"vars": {layout.name(v): p for v, p in mono}, "coef": c})
        return out

    @classmethod
    def from_terms(cls, terms, layout: Layout) -> "Polynomial":
        out: Dict[tuple, float] = {}
        for t in terms:
            coef = float(t.get("coef", 1.0))
            pw: Dict[int, int] = {}
            if "var" in t:
                p = int(t.get("pow", 1))
                if p:
                    pw[layout.parse(t["var"])] = p
            for name, p in t.get("vars", {}).items():
                if int(p):
                    idx = layout.parse(name)
                    pw[idx] = pw.get(idx, 0) + int(p)
            if any(p < 0 for p in pw.values()):
                raise ValueError("negative powers are not supported")
            key = tuple(sorted(pw.items()))
            out[key] = out.get(key, 0.0) + coef
        return cls(out)


class CallableCost:
    """A cost given as a Python function of the flat point.

    Without ``grad`` the gradient is taken by central differences.
    """

    def __init__(self, fn: Callable[[np.ndarray], float], grad: Optional[Callable] = None):
        self.fn = fn
        self.grad = grad

    def evaluate(self, x) -> float:
        return float(self.fn(np.asarray(x, dtype=float)))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        warnings.warn("cost has no analytic gradient; using finite differences", FiniteDifferenceWarning)
        g = np.zeros(x.size)
        for j in range(x.size):
            e = np.zeros(x.size)
            e[j] = FD_STEP
            g[j] = (self.fn(x + e) - self.fn(x - e)) / (2 * FD_STEP)
        return g


ZERO = Polynomial()


# --------------------------------------------------------------------------
# model


@dataclass
class EconomyPoint:
    Q: np.ndarray
    q: np.ndarray
    pi: np.ndarray

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.Q.reshape(-1), self.q.reshape(-1), self.pi.reshape(-1)])

    @classmethod
    def from_flat(cls, x, m, n, o) -> "EconomyPoint":
        x = np.asarray(x, dtype=float)
        s = m * n * o
        if x.size != 3 * s:
            raise ValueError(f"expected {3 * s} entries, got {x.size}")
        return cls(x[:s].reshape(m, n, o), x[s : 2 * s].reshape(m, n, o), x[2 * s :].reshape(m, n, o))


@dataclass
class NetworkEconomyModel:
    """Cost and price functions of a three-tier economy.

    ``f[i]`` is provider i's production cost; ``rho``, ``c`` and ``oc`` are
    keyed by 0-based (i, j, k) triples and default to zero when absent.
    Each function is a Polynomial or a CallableCost over the flat point.
    """

    m: int
    n: int
    o: int
    f: list
    rho: dict = field(default_factory=dict)
    c: dict = field(default_factory=dict)
    oc: dict = field(default_factory=dict)

    def __post_init__(self):
        self.layout = Layout(self.m, self.n, self.o)
        if len(self.f) != self.m:
            raise ValueError("need one production cost per service provider")
        for name in ("rho", "c", "oc"):
            for key in getattr(self, name):
                i, j, k = key
                if not (0 <= i < self.m and 0 <= j < self.n and 0 <= k < self.o):
                    raise ValueError(f"{name}{key} is outside the index ranges")

    @property
    def dim(self) -> int:
        return self.layout.dim

    def is_polynomial(self) -> bool:
        funcs = list(self.f) + list(self.rho.values()) + list(self.c.values()) + list(self.oc.values())
        return all(isinstance(g, Polynomial) for g in funcs)

    def _get(self, table, key):
        return table.get(key, ZERO)

    def copy(self) -> "NetworkEconomyModel":
        return NetworkEconomyModel(self.m, self.n, self.o, list(self.f), dict(self.rho), dict(self.c), dict(self.oc))

    # -- JSON --------------------------------------------------------------

    def to_dict(self) -> dict:
        if not self.is_polynomial():
            raise ValueError("only polynomial models serialize to JSON")
        lay = self.layout

        def key(t):
            return ",".join(str(v + 1) for v in t)

        return {
            "m": self.m,
            "n": self.n,
            "o": self.o,
            "f": {str(i + 1): p.to_terms(lay) for i, p in enumerate(self.f)},
            "rho": {key(t): p.to_terms(lay) for t, p in sorted(self.rho.items())},
            "c": {key(t): p.to_terms(lay) for t, p in sorted(self.c.items())},
            "oc": {key(t): p.to_terms(lay) for t, p in sorted(self.oc.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkEconomyModel":
        m, n, o = int(d["m"]), int(d["n"]), int(d["o"])
        lay = Layout(m, n, o)

        def key(s):
            parts = tuple(int(v) - 1 for v in str(s).split(","))
            if len(parts) != 3:
                raise ValueError(f"bad index key {s!r}")
            return parts

        f = [ZERO] * m
        for s, terms in d.get("f", {}).items():
            i = int(s) - 1
            if not 0 <= i < m:
                raise ValueError(f"f index {s} out of range")
            f[i] = Polynomial.from_terms(terms, lay)
        tables = {}
        for name in ("rho", "c", "oc"):
            tables[name] = {key(s): Polynomial.from_terms(t, lay) for s, t in d.get(name, {}).items()}
        return cls(m, n, o, f, **tables)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "NetworkEconomyModel":
        return cls.from_dict(json.loads(text))


def _flat(model, x):
    if isinstance(x, EconomyPoint):
        x = x.flatten()
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != model.dim:
        raise ValueError(f"point has {x.size} entries, model needs {model.dim}")
    return x


def f_mapping(model: NetworkEconomyModel, x) -> np.ndarray:
    """F = (F1, F2, F3): negative own-variable gradients of the utilities."""
    x = _flat(model, x)
    lay = model.layout
    out = np.zeros(model.dim)
    grad_f = [g.gradient(x) for g in model.f]
    grad_rho = {t: g.gradient(x) for t, g in model.rho.items()}
    grad_c = {t: g.gradient(x) for t, g in model.c.items()}
    for i, j, k in lay.triples():
        iQ = lay.index("Q", i, j, k)
        iq = lay.index("q", i, j, k)
        ip = lay.index("pi", i, j, k)
        rho = model.rho.get((i, j, k))
        v = grad_f[i][iQ] + x[ip] - (rho.evaluate(x) if rho is not None else 0.0)
        for h in range(model.n):
            for l in range(model.o):
                g = grad_rho.get((i, h, l))
                if g is not None:
                    v -= g[iQ] * x[lay.index("Q", i, h, l)]
        out[iQ] = v

        s = 0.0
        for h in range(model.m):
            for l in range(model.o):
                g = grad_c.get((h, j, l))
                if g is not None:
                    s += g[iq]
        out[iq] = s

        oc = model.oc.get((i, j, k))
        out[ip] = -x[iQ] + (oc.gradient(x)[ip] if oc is not None else 0.0)
    return out


def f_polynomials(model: NetworkEconomyModel):
    """Symbolic F components for polynomial models (same formulas as f_mapping)."""
    if not model.is_polynomial():
        raise ValueError("model has non-polynomial costs")
    lay = model.layout
    comps = [ZERO] * model.dim
    for i, j, k in lay.triples():
        iQ = lay.index("Q", i, j, k)
        iq = lay.index("q", i, j, k)
        ip = lay.index("pi", i, j, k)
        p = model.f[i].partial(iQ) + Polynomial.var(ip) - model._get(model.rho, (i, j, k))
        for h in range(model.n):
            for l in range(model.o):
                rho = model.rho.get((i, h, l))
                if rho is not None:
                    p = p - rho.partial(iQ) * Polynomial.var(lay.index("Q", i, h, l))
        comps[iQ] = p

        s = ZERO
        for h in range(model.m):
            for l in range(model.o):
                c = model.c.get((h, j, l))
                if c is not None:
                    s = s + c.partial(iq)
        comps[iq] = s
        comps[ip] = -Polynomial.var(iQ) + model._get(model.oc, (i, j, k)).partial(ip)
    return comps


def jacobian(model: NetworkEconomyModel, x=None) -> np.ndarray:
    """dF/dx: exact for polynomial models, central differences otherwise."""
    x = np.zeros(model.dim) if x is None else _flat(model, x)
    if model.is_polynomial():
        comps = f_polynomials(model)
        J = np.zeros((model.dim, model.dim))
        for r, p in enumerate(comps):
            for v in p.variables():
                J[r, v] = p.partial(v).evaluate(x)
        return J
    J = np.empty((model.dim, model.dim))
    for j in range(model.dim):
        e = np.zeros(model.dim)
        e[j] = FD_STEP
        J[:, j] = (f_mapping(model, x + e) - f_mapping(model, x - e)) / (2 * FD_STEP)
    return J


def is_affine(model: NetworkEconomyModel) -> bool:
    return model.is_polynomial() and all(p.degree <= 1 for p in f_polynomials(model))


def assemble_vi(model: NetworkEconomyModel) -> VIProblem:
    """VI over the nonnegative orthant, split into one block per coordinate."""
    K = ProductSet.coordinatewise(NonnegativeOrthant(model.dim))
    if is_affine(model):
        M = jacobian(model)
        q = f_mapping(model, np.zeros(model.dim))
        mu, L = affine_constants(M)
        return VIProblem.affine(M, q, K, mu=mu, L=L)
    if model.is_polynomial():
        comps = f_polynomials(model)
        return VIProblem(
            model.dim,
            lambda x: np.array([p.evaluate(x) for p in comps]),
            K,
            jacobian=lambda x: jacobian(model, x),
        )
    return VIProblem(model.dim, lambda x: f_mapping(model, x), K, jacobian=lambda x: jacobian(model, x))


def utilities(model: NetworkEconomyModel, x) -> Tuple[np.ndarray, np.ndarray]:
    """Service-provider utilities U1 (length m) and network-provider U2 (length n)."""
    x = _flat(model, x)
    lay = model.layout
    U1 = np.array([-g.evaluate(x) for g in model.f], dtype=float)
    U2 = np.zeros(model.n)
    for i, j, k in lay.triples():
        Q = x[lay.index("Q", i, j, k)]
        pi = x[lay.index("pi", i, j, k)]
        rho = model.rho.get((i, j, k))
        U1[i] += (rho.evaluate(x) if rho is not None else 0.0) * Q - pi * Q
        c = model.c.get((i, j, k))
        oc = model.oc.get((i, j, k))
        U2[j] += pi * Q - (c.evaluate(x) if c is not None else 0.0) - (oc.evaluate(x) if oc is not None else 0.0)
    return U1, U2


def utility_gradient_blocks(model: NetworkEconomyModel, x, h: float = FD_STEP) -> np.ndarray:
    """Negative own-variable partials of the utilities by central differences.

    Used as an independent check on f_mapping.
    """
    x = _flat(model, x)
    lay = model.layout
    out = np.zeros(model.dim)
    for idx in range(model.dim):
        block, i, j, k = lay.decode(idx)
        e = np.zeros(model.dim)
        e[idx] = h
        u_plus = utilities(model, x + e)
        u_minus = utilities(model, x - e)
        which = u_plus[0][i] - u_minus[0][i] if block == "Q" else u_plus[1][j] - u_minus[1][j]
        out[idx] = -which / (2 * h)
    return out


PAPER_JACOBIAN = np.array(
    [
        [4, 0.5, -0.5, 0, 1, 0],
        [0.5, 6, 0, -0.5, 0, 1],
        [0, 0, 1, 0, 0, 0],
        [0, 0, 0, 1, 0, 0],
        [-1, 0, 0, 0, 2, 0],
        [0, -1, 0, 0, 0, 2],
    ],
    dtype=float,
)


def paper_instance() -> NetworkEconomyModel:
    """Two service providers, one network provider, one (i,1,1) market slot each.

    Production costs follow the Jacobian: f1 = Q111^2 + Q111, f2 = 2 Q211^2 + Q211.
    Noise terms are zero here; see vi.StochasticSampler for the noisy variant.
    """
    lay = Layout(2, 1, 1)
    Q1, Q2 = lay.index("Q", 0, 0, 0), lay.index("Q", 1, 0, 0)
    q1, q2 = lay.index("q", 0, 0, 0), lay.index("q", 1, 0, 0)
    p1, p2 = lay.index("pi", 0, 0, 0), lay.index("pi", 1, 0, 0)
    V = Polynomial.var
    f = [V(Q1, 2) + V(Q1), 2.0 * V(Q2, 2) + V(Q2)]
    rho = {
        (0, 0, 0): -V(Q1) - 0.5 * V(Q2) + 0.5 * V(q1) + 100.0,
        (1, 0, 0): -V(Q2) - 0.5 * V(Q1) + 0.5 * V(q2) + 200.0,
    }
    c = {
        (0, 0, 0): 0.5 * (V(q1) - 20.0) * (V(q1) - 20.0),
        (1, 0, 0): 0.5 * (V(q2) - 10.0) * (V(q2) - 10.0),
    }
    oc = {(0, 0, 0): V(p1, 2), (1, 0, 0): V(p2, 2)}
    return NetworkEconomyModel(2, 1, 1, f, rho, c, oc)


def zero_model(m: int = 1, n: int = 1, o: int = 1) -> NetworkEconomyModel:
    return NetworkEconomyModel(m, n, o, [ZERO] * m)


def equilibrium_by_linear_solve(model: NetworkEconomyModel) -> np.ndarray:
    """Interior equilibrium of an affine model from F(x) = 0.

    Raises if the solution has a negative coordinate, since then the
    unconstrained root is not the VI solution.
    """
    if not is_affine(model):
        raise ValueError("linear solve needs an affine F")
    M = jacobian(model)
    q = f_mapping(model, np.zeros(model.dim))
    x = np.linalg.solve(M, -q)
    if np.any(x < -1e-12):
        raise ValueError("root of F is not in the nonnegative orthant")
    return x
