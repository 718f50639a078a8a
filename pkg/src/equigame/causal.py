"""Separoids and poset discovery from genotype data.

A separoid is a join semilattice with a ternary relation x _|_ y | z
obeying the axioms P1-P5 (P6 as well for strong separoids). Poset discovery
orders mutation events so that every event comes after the events it never
occurs without.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence

import numpy as np

CI_TOL = 1e-9


class StructureError(ValueError):
    pass


@dataclass
class Separoid:
    elements: list
    leq: Callable
    join: Callable
    ci: set
    meet: Optional[Callable] = None

    def independent(self, x, y, z) -> bool:
        return (x, y, z) in self.ci


def _check_structure(s: Separoid):
    E, leq = s.elements, s.leq
    for x in E:
        if not leq(x, x):
            raise StructureError(f"leq is not reflexive at {x!r}")
    for x, y, z in itertools.product(E, repeat=3):
        if leq(x, y) and leq(y, z) and not leq(x, z):
            raise StructureError(f"leq is not transitive at {(x, y, z)!r}")
    for x, y in itertools.product(E, repeat=2):
        j = s.join(x, y)
        if not (leq(x, j) and leq(y, j)):
            raise StructureError(f"join({x!r}, {y!r}) is not an upper bound")
        for u in E:
            if leq(x, u) and leq(y, u) and not leq(j, u):
                raise StructureError(f"join({x!r}, {y!r}) is not least (compare {u!r})")
        if s.meet is not None:
            m = s.meet(x, y)
            if not (leq(m, x) and leq(m, y)):
                raise StructureError(f"meet({x!r}, {y!r}) is not a lower bound")
            for u in E:
                if leq(u, x) and leq(u, y) and not leq(u, m):
                    raise StructureError(f"meet({x!r}, {y!r}) is not greatest (compare {u!r})")


def check_separoid(s: Separoid, strong: bool = False) -> List[dict]:
    """Every failed instance of P1-P5 (and P6 when strong) with its witness."""
    _check_structure(s)
    E, leq, join, ci = s.elements, s.leq, s.join, s.ci
    out = []

    def fail(axiom, *w):
        out.append({"axiom": axiom, "witness": list(w)})

    for x, y in itertools.product(E, repeat=2):
        if (x, y, x) not in ci:
            fail("P1", x, y, x)
    for x, y, z in sorted(ci, key=repr):
        if (y, x, z) not in ci:
            fail("P2", x, y, z)
    for (x, y, z), w in itertools.product(sorted(ci, key=repr), E):
        if leq(w, y):
            if (x, w, z) not in ci:
                fail("P3", x, y, z, w)
            if (x, y, join(z, w)) not in ci:
                fail("P4", x, y, z, w)
        if (x, w, join(y, z)) in ci and (x, join(y, w), z) not in ci:
            fail("P5", x, y, z, w)
    if strong:
        if s.meet is None:
            raise StructureError("P6 needs a meet")
        by_xy = defaultdict(list)
        for x, y, z in ci:
            if leq(z, y):
                by_xy[(x, y)].append(z)
        for (x, y), zs in sorted(by_xy.items(), key=repr):
            for z, w in itertools.product(sorted(zs, key=repr), repeat=2):
                if (x, y, s.meet(z, w)) not in ci:
                    fail("P6", x, y, z, w)
    return out


def subset_lattice(names) -> Separoid:
    """Subsets of ``names`` ordered by inclusion, empty ci."""
    elems = [frozenset(c) for r in range(len(names) + 1) for c in itertools.combinations(names, r)]
    return Separoid(elems, lambda a, b: a <= b, lambda a, b: a | b, set(), lambda a, b: a & b)


def _marginal(table: np.ndarray, keep: FrozenSet[int]) -> np.ndarray:
    """Marginal over the axes in ``keep``, keeping dimensions for broadcasting."""
    drop = tuple(i for i in range(table.ndim) if i not in keep)
    return table.sum(axis=drop, keepdims=True)


def separoid_from_joint(names: Sequence[str], table, tol: float = CI_TOL) -> Separoid:
    """CI separoid of a joint table over binary variables.

    ``table`` has shape (2,)*k with axis i for names[i]. (X, Y, Z) is in ci
    iff p(x, y, z) p(z) = p(x, z) p(y, z) for every assignment, for all
    triples of subsets, overlapping ones included.
    """
    names = list(names)
    p = np.asarray(table, dtype=float)
    k = len(names)
    if k > 5:
        raise ValueError("at most 5 variables")
    if p.shape != (2,) * k:
        raise ValueError(f"table must have shape {(2,) * k}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("table must be a normalized distribution")
    base = subset_lattice(names)
    pos = {v: i for i, v in enumerate(names)}
    marg = {}
    for S in base.elements:
        key = frozenset(pos[v] for v in S)
        marg[S] = _marginal(p, key)
    ci = set()
    for X, Y, Z in itertools.product(base.elements, repeat=3):
        lhs = marg[X | Y | Z] * marg[Z]
        rhs = marg[X | Z] * marg[Y | Z]
        if np.all(np.abs(lhs - rhs) <= tol):
            ci.add((X, Y, Z))
    base.ci = ci
    return base


def random_dag_table(rng=None, k: int = 3) -> np.ndarray:
    """Joint table of binary variables factored along a random DAG on 0..k-1."""
    rng = np.random.default_rng(rng)
    order = rng.permutation(k)
    parents = {int(v): [int(u) for u in order[:i] if rng.random() < 0.5] for i, v in enumerate(order)}
    p = np.ones((2,) * k)
    for v in range(k):
        pa = parents[v]
        cpt = rng.random(2 ** len(pa))
        for assignment in itertools.product((0, 1), repeat=k):
            row = sum(assignment[u] << b for b, u in enumerate(pa))
            q = cpt[row]
            p[assignment] *= q if assignment[v] else 1 - q
    return p


# --------------------------------------------------------------------------
# poset discovery


@dataclass
class GenotypeDataset:
    events: list
    genotypes: List[FrozenSet]
    samples: Optional[list] = None

    def __post_init__(self):
        self.genotypes = [frozenset(g) for g in self.genotypes]
        ev = set(self.events)
        for i, g in enumerate(self.genotypes):
            extra = g - ev
            if extra:
                raise ValueError(f"genotype {i} has unknown events {sorted(extra)}")

    @classmethod
    def from_wide_csv(cls, text: str):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty CSV")
        header = rows[0]
        events = header[1:] if header and header[0].lower() in ("sample", "id", "") else header
        offset = len(header) - len(events)
        genos, samples = [], []
        for r, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            cells = row[offset:]
            if len(cells) != len(events):
                raise ValueError(f"row {r} has {len(cells)} cells, expected {len(events)}")
            g = set()
            for c, (e, cell) in enumerate(zip(events, cells)):
                cell = cell.strip()
                if cell not in ("0", "1"):
                    raise ValueError(f"row {r}, column {c + offset + 1}: cell {cell!r} is not 0 or 1")
                if cell == "1":
                    g.add(e)
            genos.append(g)
            samples.append(row[0] if offset else str(len(samples)))
        return cls(events, genos, samples)

    @classmethod
    def from_long_csv(cls, text: str, events=None):
        """Rows are (sample, event); a sample with an empty event has no mutations."""
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if rows and [c.lower() for c in rows[0][:2]] == ["sample", "event"]:
            rows = rows[1:]
        by_sample: Dict[str, set] = {}
        for r in rows:
            s = r[0].strip()
            e = r[1].strip() if len(r) > 1 else ""
            by_sample.setdefault(s, set())
            if e:
                by_sample[s].add(e)
        if events is None:
            events = sorted(set().union(*by_sample.values())) if by_sample else []
        return cls(list(events), list(by_sample.values()), list(by_sample))


def support_oracle(data: GenotypeDataset, e, f, epsilon: float) -> bool:
    """f is an ancestor of e when genotypes holding e rarely miss f."""
    with_e = [g for g in data.genotypes if e in g]
    if not with_e:
        return False
    missing = sum(1 for g in with_e if f not in g)
    return missing / len(with_e) <= epsilon


@dataclass
class DiscoveredPoset:
    elements: list
    ancestors: Dict  # e -> set of events f with f <= e (f != e)
    tie_classes: List[list]

    def leq(self, a, b) -> bool:
        """a <= b: a equals b or a precedes b."""
        return a == b or a in self.ancestors[b]

    def lt(self, a, b) -> bool:
        return self.leq(a, b) and not self.leq(b, a)

    def relation(self):
        return {(a, b) for a in self.elements for b in self.elements if self.leq(a, b)}

    def to_dict(self):
        red = transitive_reduction(self)
        return {
            "elements": self.elements,
            "tie_classes": self.tie_classes,
            "order": [[a, b] for a, b in sorted((p for p in self.relation() if p[0] != p[1]))],
            "hasse": [list(e) for e in red],
        }

    def to_dot(self) -> str:
        lines = ["digraph poset {"]
        for cls in self.tie_classes:
            lines.append(f'  "{"=".join(cls)}";')
        for a, b in transitive_reduction(self):
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def discover_poset(data: GenotypeDataset, epsilon: float = 0.0, oracle=support_oracle) -> DiscoveredPoset:
    """Ancestor sets from the oracle, closed transitively; cycles become tie classes."""
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    if not data.genotypes:
        raise ValueError("dataset is empty")
    E = list(data.events)
    F = {e: {f for f in E if f != e and oracle(data, e, f, epsilon)} for e in E}
    changed = True
    while changed:
        changed = False
        for e in E:
            extra = set().union(*(F[f] for f in F[e])) - F[e] - {e}
            if extra:
                F[e] |= extra
                changed = True
    classes, seen = [], set()
    for e in E:
        if e in seen:
            continue
        cls = [e] + [f for f in E if f != e and f in F[e] and e in F[f]]
        seen.update(cls)
        classes.append(sorted(cls, key=E.index))
    return DiscoveredPoset(E, F, classes)


def ancestor_sets(data: GenotypeDataset, epsilon: float, oracle=support_oracle):
    """Raw oracle output before closure."""
    return {e: {f for f in data.events if f != e and oracle(data, e, f, epsilon)} for e in data.events}


def transitive_reduction(p: DiscoveredPoset):
    """Hasse edges between tie-class representatives (first member of each class)."""
    reps = [c[0] for c in p.tie_classes]
    edges = []
    for a in reps:
        for b in reps:
            if a == b or not p.lt(a, b):
                continue
            if any(p.lt(a, c) and p.lt(c, b) for c in reps if c not in (a, b)):
                continue
            edges.append((a, b))
    return edges


def random_poset(k: int, rng=None, density: float = 0.4):
    """Random strict order on k events, as a set of pairs (a, b) with a < b."""
    rng = np.random.default_rng(rng)
    names = [f"e{i}" for i in range(k)]
    perm = list(rng.permutation(k))
    rel = {(names[perm[i]], names[perm[j]]) for i in range(k) for j in range(i + 1, k) if rng.random() < density}
    changed = True
    while changed:
        changed = False
        for a, b in list(rel):
            for c, d in list(rel):
                if b == c and (a, d) not in rel:
                    rel.add((a, d))
                    changed = True
    return names, rel


def order_ideals(names, rel):
    """Down-closed subsets of the order."""
    out = []
    for r in range(len(names) + 1):
        for combo in itertools.combinations(names, r):
            s = set(combo)
            if all(a in s for a, b in rel if b in s):
                out.append(frozenset(s))
    return out


def synthetic_dataset(names, rel, samples: int, rng=None) -> GenotypeDataset:
    """Each genotype is the union of randomly chosen order ideals (itself an ideal)."""
    rng = np.random.default_rng(rng)
    ideals = order_ideals(names, rel)
    genos = []
    for _ in range(samples):
        count = int(rng.integers(1, 3))
        picks = rng.integers(len(ideals), size=count)
        genos.append(frozenset().union(*(ideals[i] for i in picks)))
    return GenotypeDataset(names, genos)


PANCREATIC = {
    "Pa017C": {"KRAS", "TP53"},
    "Pa019C": {"KRAS"},
    "Pa022C": {"KRAS", "SMAD4", "TP53"},
    "Pa032X": {"CDKN2A"},
}


def pancreatic_fixture() -> GenotypeDataset:
    events = ["KRAS", "TP53", "SMAD4", "CDKN2A"]
    return GenotypeDataset(events, list(PANCREATIC.values()), list(PANCREATIC))
