"""Finite coalgebras: labeled transition systems, bisimulation, streams, MDPs.

LTSs are coalgebras for P(A x X). Relations are frozensets of state pairs.
"""
from __future__ import annotations

import itertools
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Hashable, List, Optional, Tuple

PROB_TOL = 1e-9


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    witness: Optional[tuple] = None
    reason: str = ""

    def __bool__(self):
        return self.ok

    def to_dict(self):
        return {"ok": self.ok, "witness": None if self.witness is None else list(self.witness), "reason": self.reason}


class LTS:
    def __init__(self, states, labels, transitions):
        self.states = list(dict.fromkeys(states))
        self.labels = list(dict.fromkeys(labels))
        self.transitions = frozenset(tuple(t) for t in transitions)
        sset, lset = set(self.states), set(self.labels)
        for s, a, t in self.transitions:
            if s not in sset or t not in sset:
                raise ValidationError(f"transition {(s, a, t)} uses an undeclared state")
            if a not in lset:
                raise ValidationError(f"transition {(s, a, t)} uses an undeclared label")
        succ = defaultdict(set)
        for s, a, t in self.transitions:
            succ[(s, a)].add(t)
        self._succ = {k: frozenset(v) for k, v in succ.items()}

    def successors(self, s, a) -> FrozenSet:
        return self._succ.get((s, a), frozenset())

    def moves(self, s):
        """All (a, s') with s -a-> s'."""
        return [(a, t) for a in self.labels for t in sorted(self.successors(s, a), key=repr)]

    def __repr__(self):
        return f"LTS({len(self.states)} states, {len(self.labels)} labels, {len(self.transitions)} transitions)"

    def to_dict(self):
        return {
            "states": self.states,
            "labels": self.labels,
            "trans": sorted([list(t) for t in self.transitions], key=repr),
        }

    @classmethod
    def from_dict(cls, d):
        for key in ("states", "labels", "trans"):
            if key not in d:
                raise ValidationError(f"LTS is missing {key!r}")
        return cls(d["states"], d["labels"], d["trans"])

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _check_relation(l1: LTS, l2: LTS, rel):
    s1, s2 = set(l1.states), set(l2.states)
    for s, t in rel:
        if s not in s1 or t not in s2:
            raise ValidationError(f"relation pair {(s, t)} references an unknown state")


def _violation(l1: LTS, l2: LTS, rel, s, t):
    """First failing transfer clause for the pair (s, t), or None."""
    for a, s2 in l1.moves(s):
        if not any((s2, t2) in rel for t2 in l2.successors(t, a)):
            return ("forth", s, t, a, s2)
    for a, t2 in l2.moves(t):
        if not any((s2, t2) in rel for s2 in l1.successors(s, a)):
            return ("back", s, t, a, t2)
    return None


def is_bisimulation(l1: LTS, l2: LTS, rel) -> CheckResult:
    """Both transfer clauses for every pair. The witness is (clause, s, t, a, target)."""
    rel = frozenset(rel)
    _check_relation(l1, l2, rel)
    for s, t in sorted(rel, key=repr):
        v = _violation(l1, l2, rel, s, t)
        if v is not None:
            return CheckResult(False, v, f"{v[0]} clause fails at {(s, t)} on label {v[3]!r}")
    return CheckResult(True)


def refine(l1: LTS, l2: LTS, rel) -> Tuple[frozenset, int]:
    """Delete violating pairs until stable; returns (relation, sweeps)."""
    rel = set(rel)
    sweeps = 0
    while True:
        sweeps += 1
        bad = {p for p in rel if _violation(l1, l2, rel, *p) is not None}
        if not bad:
            return frozenset(rel), sweeps
        rel -= bad


def greatest_bisimulation(l1: LTS, l2: Optional[LTS] = None) -> frozenset:
    """Largest bisimulation, refining down from S x T."""
    l2 = l1 if l2 is None else l2
    _same_labels(l1, l2)
    return refine(l1, l2, itertools.product(l1.states, l2.states))[0]


def _same_labels(l1, l2):
    if set(l1.labels) != set(l2.labels):
        raise ValidationError("systems must share their label alphabet")


def brute_force_greatest_bisimulation(l1: LTS, l2: LTS) -> frozenset:
    """Union of every bisimulation among all 2^(|S||T|) relations; for tiny systems."""
    pairs = list(itertools.product(l1.states, l2.states))
    if len(pairs) > 16:
        raise ValueError("too many candidate relations")
    best = set()
    for mask in range(1 << len(pairs)):
        rel = frozenset(p for b, p in enumerate(pairs) if mask >> b & 1)
        if is_bisimulation(l1, l2, rel):
            best |= rel
    return frozenset(best)


# relation algebra


def inverse(rel) -> frozenset:
    return frozenset((t, s) for s, t in rel)


def compose(r, q) -> frozenset:
    """r ; q = {(s, u) : (s, t) in r and (t, u) in q}."""
    by_first = defaultdict(set)
    for t, u in q:
        by_first[t].add(u)
    return frozenset((s, u) for s, t in r for u in by_first.get(t, ()))


def identity_relation(l: LTS) -> frozenset:
    return frozenset((s, s) for s in l.states)


def is_equivalence(rel, states) -> bool:
    rel = set(rel)
    if any((s, s) not in rel for s in states):
        return False
    if any((t, s) not in rel for s, t in rel):
        return False
    return compose(rel, rel) <= rel


# homomorphisms


def _as_map(f, states):
    if callable(f):
        return {s: f(s) for s in states}
    missing = [s for s in states if s not in f]
    if missing:
        raise ValidationError(f"map is undefined on {missing[0]!r}")
    return dict(f)


def check_homomorphism(f, l1: LTS, l2: LTS) -> CheckResult:
    """f: S -> T is an LTS homomorphism: s -a-> s' gives f(s) -a-> f(s'),
    and f(s) -a-> t' has some s -a-> s' with f(s') = t'."""
    _same_labels(l1, l2)
    fm = _as_map(f, l1.states)
    targets = set(l2.states)
    for s, v in fm.items():
        if v not in targets:
            raise ValidationError(f"f({s!r}) = {v!r} is not a state of the target")
    for s in l1.states:
        for a, s2 in l1.moves(s):
            if fm[s2] not in l2.successors(fm[s], a):
                return CheckResult(False, ("forth", s, a, s2), f"{fm[s]!r} has no {a!r}-move to {fm[s2]!r}")
        images = {}
        for a in l1.labels:
            images[a] = {fm[s2] for s2 in l1.successors(s, a)}
        for a, t2 in l2.moves(fm[s]):
            if t2 not in images[a]:
                return CheckResult(False, ("back", s, a, t2), f"{s!r} cannot match {fm[s]!r} -{a}-> {t2!r}")
    return CheckResult(True)


def graph_relation(f, l1: LTS) -> frozenset:
    fm = _as_map(f, l1.states)
    return frozenset((s, fm[s]) for s in l1.states)


def span_image_bisimulation(f, g, lt: LTS, ls: LTS, lu: LTS) -> frozenset:
    """Image {(f(t), g(t))} of the span S <-f- T -g-> U."""
    for name, h, cod in (("f", f, ls), ("g", g, lu)):
        res = check_homomorphism(h, lt, cod)
        if not res:
            raise ValidationError(f"{name} is not a homomorphism: {res.reason}")
    fm, gm = _as_map(f, lt.states), _as_map(g, lt.states)
    return frozenset((fm[t], gm[t]) for t in lt.states)


def kernel_relation(f, l: LTS) -> frozenset:
    """{(s, s') : f(s) = f(s')}; an equivalence, and a bisimulation when f is a homomorphism."""
    fm = _as_map(f, l.states)
    return frozenset((s, t) for s in l.states for t in l.states if fm[s] == fm[t])


# streams


@dataclass
class StreamCoalgebra:
    start: Hashable
    observe: Callable
    next: Callable


def unfold_stream(c: StreamCoalgebra, k: int) -> list:
    """First k observations of the behaviour of c.start."""
    if k < 0:
        raise ValueError("k must be non-negative")
    out = []
    x = c.start
    for _ in range(k):
        out.append(c.observe(x))
        x = c.next(x)
    return out


# Markov decision processes


class MDP:
    """S, A, admissible pairs Psi, P[(s, a)] = {s': prob}, R[(s, a)] = reward."""

    def __init__(self, states, actions, P: Dict, R: Dict):
        self.states = list(dict.fromkeys(states))
        self.actions = list(dict.fromkeys(actions))
        self.P = {tuple(k): dict(v) for k, v in P.items()}
        self.R = {tuple(k): float(v) for k, v in R.items()}
        problems = mdp_diagnostics(self)
        if problems:
            raise ValidationError(problems[0])

    @property
    def psi(self):
        return sorted(self.P, key=repr)

    def prob(self, s, a, s2) -> float:
        return self.P[(s, a)].get(s2, 0.0)

    def to_dict(self):
        return {
            "states": self.states,
            "actions": self.actions,
            "P": [[s, a, t, p] for (s, a), row in sorted(self.P.items(), key=repr) for t, p in sorted(row.items(), key=repr)],
            "R": [[s, a, r] for (s, a), r in sorted(self.R.items(), key=repr)],
        }

    @classmethod
    def from_dict(cls, d):
        for key in ("states", "actions", "P", "R"):
            if key not in d:
                raise ValidationError(f"MDP is missing {key!r}")
        P = defaultdict(dict)
        for s, a, t, p in d["P"]:
            P[(s, a)][t] = P[(s, a)].get(t, 0.0) + float(p)
        R = {(s, a): r for s, a, r in d["R"]}
        return cls(d["states"], d["actions"], P, R)


def mdp_diagnostics(m: MDP) -> List[str]:
    out = []
    sset, aset = set(m.states), set(m.actions)
    for idx, ((s, a), row) in enumerate(sorted(m.P.items(), key=repr)):
        if s not in sset or a not in aset:
            out.append(f"P row {idx} ({s!r}, {a!r}) uses an undeclared state or action")
            continue
        if any(t not in sset for t in row):
            out.append(f"P row {idx} ({s!r}, {a!r}) leads to an undeclared state")
        if any(p < 0 for p in row.values()):
            out.append(f"P row {idx} ({s!r}, {a!r}) has a negative probability")
        total = sum(row.values())
        if abs(total - 1.0) > PROB_TOL:
            out.append(f"P row {idx} ({s!r}, {a!r}) sums to {total!r}, not 1")
    if set(m.R) != set(m.P):
        out.append("R must be defined exactly on the admissible pairs of P")
    return out


def check_mdp_homomorphism(m1: MDP, m2: MDP, f, g) -> CheckResult:
    """f: S -> S' and g[s]: A_s -> A'_f(s) satisfy
    P'(f(s), g_s(a), f(s')) = sum of P(s, a, s'') over s'' in [s']_f and
    R'(f(s), g_s(a)) = R(s, a) for every admissible (s, a)."""
    fm = _as_map(f, m1.states)
    if set(fm.values()) != set(m2.states):
        raise ValidationError("f must map onto the target states")
    for s in m1.states:
        if s not in g:
            raise ValidationError(f"no action map for state {s!r}")
    for s in m1.states:
        acts = [a for (s_, a) in m1.P if s_ == s]
        wanted = {a for (s_, a) in m2.P if s_ == fm[s]}
        got = set()
        for a in acts:
            if a not in g[s]:
                raise ValidationError(f"action map for {s!r} is undefined on {a!r}")
            got.add(g[s][a])
        if got != wanted:
            raise ValidationError(f"action map for {s!r} is not onto the actions of {fm[s]!r}")
    blocks = defaultdict(list)
    for s in m1.states:
        blocks[fm[s]].append(s)
    for s, a in m1.psi:
        s_img, a_img = fm[s], g[s][a]
        if (s_img, a_img) not in m2.P:
            return CheckResult(False, (s, a), f"({s_img!r}, {a_img!r}) is not admissible in the target")
        if abs(m2.R[(s_img, a_img)] - m1.R[(s, a)]) > PROB_TOL:
            return CheckResult(False, ("R", s, a), f"reward {m1.R[(s, a)]} maps to {m2.R[(s_img, a_img)]}")
        for target, members in blocks.items():
            lumped = sum(m1.prob(s, a, u) for u in members)
            if abs(m2.prob(s_img, a_img, target) - lumped) > PROB_TOL:
                return CheckResult(False, ("P", s, a, target), f"block {target!r} gets {lumped} but the image assigns {m2.prob(s_img, a_img, target)}")
    return CheckResult(True)
