"""Finite generalized metric spaces and the metric Yoneda embedding.

Distances live in [0, inf]; symmetry and separation are not required.
Entries may be floats or Fractions (exact mode); math.inf stands for infinity.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import numpy as np

INF = math.inf
INF_SENTINEL = "INF"
TOL = 1e-9


def trunc_sub(v, u):
    """[0, inf](u, v): v - u when positive, else 0, with inf - inf = 0."""
    if u >= v:
        return 0
    if v == INF:
        return INF
    return v - u


def add(a, b):
    return INF if a == INF or b == INF else a + b


@dataclass
class GenMetricSpace:
    points: list
    d: list  # list of rows

    def __post_init__(self):
        n = len(self.points)
        if len(set(map(repr, self.points))) != n:
            raise ValueError("points must be distinct")
        if len(self.d) != n or any(len(row) != n for row in self.d):
            raise ValueError("distance matrix must be n x n")
        for row in self.d:
            for v in row:
                if not v >= 0:
                    raise ValueError(f"distance {v!r} is negative or NaN")
        self._idx = {p: i for i, p in enumerate(self.points)}

    @property
    def n(self) -> int:
        return len(self.points)

    def index(self, x) -> int:
        return self._idx[x]

    def dist(self, x, y):
        return self.d[self._idx[x]][self._idx[y]]

    @property
    def exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) or v == INF for row in self.d for v in row)

    def to_dict(self):
        def enc(v):
            if v == INF:
                return INF_SENTINEL
            if isinstance(v, Fraction):
                return str(v) if v.denominator != 1 else int(v)
            return v

        return {"points": list(self.points), "d": [[enc(v) for v in row] for row in self.d], "inf": INF_SENTINEL}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        for key in ("points", "d"):
            if key not in data:
                raise ValueError(f"space is missing {key!r}")
        sentinel = data.get("inf", INF_SENTINEL)

        def dec(v):
            if v == sentinel:
                return INF
            if isinstance(v, str):
                return Fraction(v)
            return v

        return cls(list(data["points"]), [[dec(v) for v in row] for row in data["d"]])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _close(a, b, tol):
    if a == INF or b == INF:
        return a == b
    return abs(a - b) <= tol


def validate(space: GenMetricSpace, tol: float = 1e-12) -> List[dict]:
    """All violations of zero self-distance and the triangle inequality."""
    out = []
    d, P = space.d, space.points
    for i in range(space.n):
        if d[i][i] != 0 and not (d[i][i] <= tol):
            out.append({"axiom": "self-distance", "points": [P[i]], "value": d[i][i]})
    for i in range(space.n):
        for j in range(space.n):
            for k in range(space.n):
                rhs = add(d[i][j], d[j][k])
                lhs = d[i][k]
                if lhs > rhs and not (rhs != INF and lhs - rhs <= tol):
                    out.append({"axiom": "triangle", "points": [P[i], P[j], P[k]], "excess": lhs - rhs if lhs != INF else INF})
    return out


def yoneda_embed(space: GenMetricSpace, x) -> Dict:
    """The presheaf y(x) = d(-, x)."""
    j = space.index(x)
    return {p: space.d[i][j] for i, p in enumerate(space.points)}


def presheaf_distance(space: GenMetricSpace, phi: Dict, psi: Dict):
    """sup over y of max(psi(y) - phi(y), 0)."""
    best = 0
    for y in space.points:
        v = trunc_sub(psi[y], phi[y])
        if v > best:
            best = v
    return best


@dataclass
class IsometryReport:
    ok: bool
    worst_pair: Optional[tuple]
    deviation: float

    def __bool__(self):
        return self.ok


def check_isometry(space: GenMetricSpace, tol: float = TOL, strict: bool = True) -> IsometryReport:
    """Compare d(x, x') with the presheaf distance of y(x) and y(x') for all pairs.

    ``strict`` refuses invalid spaces; pass False to probe a matrix that breaks
    the triangle inequality.
    """
    if strict:
        bad = validate(space)
        if bad:
            raise ValueError(f"not a generalized metric space: {bad[0]}")
    exact = space.exact
    emb = [yoneda_embed(space, x) for x in space.points]
    worst, dev = None, 0.0
    for i, x in enumerate(space.points):
        for j, x2 in enumerate(space.points):
            a = space.d[i][j]
            b = presheaf_distance(space, emb[i], emb[j])
            if a == b:
                e = 0.0
            elif a == INF or b == INF:
                e = INF
            else:
                e = float(abs(a - b))
            if e > dev or worst is None:
                worst, dev = (x, x2), e
    ok = dev == 0 if exact else dev <= tol
    return IsometryReport(ok, worst, dev)


def weakly_isomorphic(space: GenMetricSpace, x, x2) -> bool:
    return space.dist(x, x2) == 0 and space.dist(x2, x) == 0


def min_plus_closure(d) -> list:
    """Floyd-Warshall shortest paths; the result satisfies the triangle inequality."""
    n = len(d)
    out = [list(row) for row in d]
    for i in range(n):
        out[i][i] = 0
    for k in range(n):
        for i in range(n):
            dik = out[i][k]
            if dik == INF:
                continue
            for j in range(n):
                v = add(dik, out[k][j])
                if v < out[i][j]:
                    out[i][j] = v
    return out


def random_space(n: int, rng=None, inf_prob: float = 0.2, exact: bool = False, scale: float = 10.0) -> GenMetricSpace:
    rng = np.random.default_rng(rng)
    d = []
    for i in range(n):
        row = []
        for j in range(n):
            if rng.random() < inf_prob:
                row.append(INF)
            elif exact:
                row.append(Fraction(int(rng.integers(0, 41)), int(rng.integers(1, 5))))
            else:
                row.append(float(rng.random() * scale))
        d.append(row)
    return GenMetricSpace(list(range(n)), min_plus_closure(d))


# example spaces


def preorder_space(points, relation) -> GenMetricSpace:
    """d(p, q) = 0 if p <= q, else inf. ``relation`` holds the pairs (p, q)."""
    rel = set(map(tuple, relation))
    for p in points:
        if (p, p) not in rel:
            raise ValueError(f"relation is not reflexive at {p!r}")
    for p, q in rel:
        for q2, r in rel:
            if q == q2 and (p, r) not in rel:
                raise ValueError(f"relation is not transitive at {(p, q, r)!r}")
    return GenMetricSpace(list(points), [[0 if (p, q) in rel else INF for q in points] for p in points])


def string_prefix_distance(u: str, v: str):
    """0 if u is a prefix of v, otherwise 2^-n with n the longest common prefix length."""
    if v.startswith(u):
        return 0
    n = 0
    while n < min(len(u), len(v)) and u[n] == v[n]:
        n += 1
    return Fraction(1, 2**n)


def string_prefix_space(strings) -> GenMetricSpace:
    strings = list(strings)
    return GenMetricSpace(strings, [[string_prefix_distance(u, v) for v in strings] for u in strings])


def nonneg_real_space(values) -> GenMetricSpace:
    """[0, inf] with d(u, v) = 0 if u >= v, else v - u."""
    vals = [v if v == INF else Fraction(v) for v in values]
    for v in vals:
        if v < 0:
            raise ValueError("values must be nonnegative")
    return GenMetricSpace(list(values), [[trunc_sub(v, u) for v in vals] for u in vals])


def hausdorff_distance(base: GenMetricSpace, V, W):
    """inf{eps : every v in V has some w in W with d(v, w) <= eps}."""
    best = 0
    for v in V:
        near = min((base.dist(v, w) for w in W), default=INF)
        if near > best:
            best = near
    return best


def hausdorff_powerset_space(base: GenMetricSpace, subsets) -> GenMetricSpace:
    subsets = [frozenset(s) for s in subsets]
    names = [tuple(sorted(s, key=repr)) for s in subsets]
    return GenMetricSpace(names, [[hausdorff_distance(base, V, W) for W in subsets] for V in subsets])
