"""Diversity-based representation of Moore environments.

A test is an action string followed by a predicate. Two tests are
equivalent when they agree on every state; the diversity of an environment
is the number of classes. The update graph maps each class [t] and action b
to the class [bt], which is enough to track every test value as actions
are applied.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

REGISTER_LIMIT = 20


@dataclass(frozen=True)
class Test:
    actions: tuple
    predicate: str

    def __str__(self):
        return "".join(map(str, self.actions)) + str(self.predicate)


class MooreEnv:
    """States are 0..|Q|-1; delta[q][b] and gamma[q][p] are dense tables."""

    def __init__(self, num_states: int, actions, predicates, delta, gamma, q0: int = 0, state_names=None):
        self.num_states = int(num_states)
        self.actions = list(actions)
        self.predicates = list(predicates)
        self._bidx = {b: i for i, b in enumerate(self.actions)}
        self._pidx = {p: i for i, p in enumerate(self.predicates)}
        self.delta = np.asarray(delta, dtype=np.int64).reshape(self.num_states, len(self.actions))
        self.gamma = np.asarray(gamma, dtype=bool).reshape(self.num_states, len(self.predicates))
        if self.num_states < 1 or not self.actions or not self.predicates:
            raise ValueError("need at least one state, action and predicate")
        if self.delta.min() < 0 or self.delta.max() >= self.num_states:
            raise ValueError("delta leads outside the state set")
        if not 0 <= q0 < self.num_states:
            raise ValueError("q0 is not a state")
        self.q0 = q0
        self.state_names = list(state_names) if state_names is not None else [str(q) for q in range(self.num_states)]

    def step(self, q: int, b) -> int:
        return int(self.delta[q, self._bidx[b]])

    def run(self, q: int, actions) -> int:
        for b in actions:
            q = self.step(q, b)
        return q

    def observe(self, q: int, p) -> bool:
        return bool(self.gamma[q, self._pidx[p]])

    def parse_test(self, text: str) -> Test:
        """Split a string such as "LF1" into actions and a trailing predicate."""
        for p in sorted(self.predicates, key=lambda s: -len(str(s))):
            ps = str(p)
            if text.endswith(ps):
                head = text[: len(text) - len(ps)]
                acts = []
                while head:
                    for b in sorted(self.actions, key=lambda s: -len(str(s))):
                        if head.startswith(str(b)):
                            acts.append(b)
                            head = head[len(str(b)):]
                            break
                    else:
                        raise ValueError(f"cannot parse actions in {text!r}")
                return Test(tuple(acts), p)
        raise ValueError(f"{text!r} does not end in a predicate")

    def value_vector(self, t: Test) -> np.ndarray:
        """The function q -> qt as a boolean vector over Q."""
        q = np.arange(self.num_states)
        for b in t.actions:
            q = self.delta[q, self._bidx[b]]
        return self.gamma[q, self._pidx[t.predicate]]

    def to_dict(self):
        return {
            "states": self.state_names,
            "actions": self.actions,
            "predicates": self.predicates,
            "q0": self.state_names[self.q0],
            "delta": {self.state_names[q]: {b: self.state_names[self.step(q, b)] for b in self.actions} for q in range(self.num_states)},
            "gamma": {self.state_names[q]: {p: self.observe(q, p) for p in self.predicates} for q in range(self.num_states)},
        }

    @classmethod
    def from_dict(cls, d):
        for key in ("states", "actions", "predicates", "delta", "gamma"):
            if key not in d:
                raise ValueError(f"environment is missing {key!r}")
        names = [str(s) for s in d["states"]]
        idx = {s: i for i, s in enumerate(names)}
        delta = [[idx[str(d["delta"][s][b])] for b in d["actions"]] for s in names]
        gamma = [[bool(d["gamma"][s][p]) for p in d["predicates"]] for s in names]
        q0 = idx[str(d.get("q0", names[0]))]
        return cls(len(names), d["actions"], d["predicates"], delta, gamma, q0, names)


def test_value(env: MooreEnv, q: int, t) -> bool:
    if isinstance(t, str):
        t = env.parse_test(t)
    return env.observe(env.run(q, t.actions), t.predicate)


@dataclass
class DiversityAutomaton:
    actions: list
    vectors: np.ndarray  # classes x states
    representatives: List[Test]
    edges: np.ndarray  # edges[c, b] = index of [b t] for t in class c
    predicate_classes: Dict[str, int]

    @property
    def size(self) -> int:
        return len(self.representatives)

    def signature(self, q: int) -> np.ndarray:
        return self.vectors[:, q]

    def to_dict(self):
        return {
            "diversity": self.size,
            "classes": [
                {"id": c, "test": str(t), "values": [int(v) for v in self.vectors[c]]}
                for c, t in enumerate(self.representatives)
            ],
            "edges": [
                {"from": int(self.edges[c, bi]), "to": c, "action": b}
                for c in range(self.size)
                for bi, b in enumerate(self.actions)
            ],
            "predicates": {str(p): c for p, c in self.predicate_classes.items()},
        }


def compute_classes(env: MooreEnv) -> DiversityAutomaton:
    """Breadth-first closure from the predicates under prepending actions."""
    seen: Dict[bytes, int] = {}
    vectors, reps = [], []

    def add(t):
        v = env.value_vector(t)
        key = np.packbits(v).tobytes()
        if key not in seen:
            seen[key] = len(reps)
            vectors.append(v)
            reps.append(t)
        return seen[key]

    predicate_classes = {p: add(Test((), p)) for p in env.predicates}
    edges = []
    c = 0
    while c < len(reps):
        t = reps[c]
        edges.append([add(Test((b,) + t.actions, t.predicate)) for b in env.actions])
        c += 1
    return DiversityAutomaton(list(env.actions), np.array(vectors), reps, np.array(edges, dtype=np.int64), predicate_classes)


def diversity(env: MooreEnv) -> int:
    return compute_classes(env).size


def is_reduced(env: MooreEnv) -> bool:
    da = compute_classes(env)
    cols = {da.vectors[:, q].tobytes() for q in range(env.num_states)}
    return len(cols) == env.num_states


def diversity_bounds(env: MooreEnv) -> Tuple[float, int]:
    return math.log2(env.num_states), 2**env.num_states


def initial_values(da: DiversityAutomaton, q: int) -> np.ndarray:
    return da.signature(q).copy()


def simulate(da: DiversityAutomaton, init_values, actions) -> List[Dict[str, bool]]:
    """Predicate values after each action, using only the update graph.

    The value of [t] after b is the previous value of [bt]. The returned
    list has one entry per action (empty for an empty action string).
    """
    vals = np.asarray(init_values, dtype=bool)
    if vals.shape != (da.size,):
        raise ValueError(f"need {da.size} initial values")
    if not any(np.array_equal(vals, da.vectors[:, q]) for q in range(da.vectors.shape[1])):
        raise ValueError("initial values do not match any state")
    bidx = {b: i for i, b in enumerate(da.actions)}
    out = []
    for b in actions:
        vals = vals[da.edges[:, bidx[b]]]
        out.append({p: bool(vals[c]) for p, c in da.predicate_classes.items()})
    return out


def simulate_many(da: DiversityAutomaton, init_values, actions) -> np.ndarray:
    """Batched simulate: ``actions`` is a (runs, steps) array of action indices.

    Returns predicate values of shape (runs, steps, |P|), predicates in the
    order of da.predicate_classes.
    """
    vals = np.asarray(init_values, dtype=bool)
    acts = np.asarray(actions, dtype=np.int64)
    if vals.shape != (acts.shape[0], da.size):
        raise ValueError(f"need one row of {da.size} initial values per run")
    sigs = {da.vectors[:, q].tobytes() for q in range(da.vectors.shape[1])}
    if any(row.tobytes() not in sigs for row in vals):
        raise ValueError("initial values do not match any state")
    pcls = np.array(list(da.predicate_classes.values()), dtype=np.int64)
    edges_by_action = da.edges.T  # (actions, classes)
    out = np.empty((acts.shape[0], acts.shape[1], pcls.size), dtype=bool)
    for k in range(acts.shape[1]):
        vals = np.take_along_axis(vals, edges_by_action[acts[:, k]], axis=1)
        out[:, k] = vals[:, pcls]
    return out


def ground_truth_many(env: MooreEnv, states, actions) -> np.ndarray:
    """Batched ground_truth over start states and a (runs, steps) action-index array."""
    q = np.asarray(states, dtype=np.int64).copy()
    acts = np.asarray(actions, dtype=np.int64)
    out = np.empty((acts.shape[0], acts.shape[1], len(env.predicates)), dtype=bool)
    for k in range(acts.shape[1]):
        q = env.delta[q, acts[:, k]]
        out[:, k] = env.gamma[q]
    return out


def ground_truth(env: MooreEnv, q: int, actions) -> List[Dict[str, bool]]:
    out = []
    for b in actions:
        q = env.step(q, b)
        out.append({p: env.observe(q, p) for p in env.predicates})
    return out


# builders


def _rotl(s):
    return s[1:] + s[0]


def _rotr(s):
    return s[-1] + s[:-1]


def _flip(s):
    return ("1" if s[0] == "0" else "0") + s[1:]


def make_register_env(n: int) -> MooreEnv:
    """n-bit register: L/R rotate with wraparound, F flips the leftmost bit,
    and the single predicate "1" reads the leftmost bit. Starts at all zeros."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > REGISTER_LIMIT:
        raise ValueError(f"register size {n} exceeds the limit of {REGISTER_LIMIT}")
    names = [format(q, f"0{n}b") for q in range(2**n)]
    idx = {s: i for i, s in enumerate(names)}
    delta = [[idx[_rotl(s)], idx[_rotr(s)], idx[_flip(s)]] for s in names]
    gamma = [[s[0] == "1"] for s in names]
    return MooreEnv(2**n, ["L", "R", "F"], ["1"], delta, gamma, idx["0" * n], names)


def random_env(num_states: int, actions=("a", "b"), predicates=("p",), rng=None) -> MooreEnv:
    rng = np.random.default_rng(rng)
    delta = rng.integers(num_states, size=(num_states, len(actions)))
    gamma = rng.random((num_states, len(predicates))) < 0.5
    return MooreEnv(num_states, actions, predicates, delta, gamma)


def random_reduced_env(num_states: int, actions=("a", "b"), predicates=("p",), rng=None, max_tries: int = 10_000) -> MooreEnv:
    """Rejection sampling from random_env until every pair of states is distinguishable."""
    rng = np.random.default_rng(rng)
    for _ in range(max_tries):
        env = random_env(num_states, actions, predicates, rng)
        if is_reduced(env):
            return env
    raise RuntimeError("no reduced environment found")


def env_from_spec(spec: str) -> MooreEnv:
    """Named builders such as "register:3" or "register:n=3"."""
    name, _, arg = spec.partition(":")
    if name != "register":
        raise ValueError(f"unknown environment builder {name!r}")
    arg = arg.split("=", 1)[-1]
    return make_register_env(int(arg))


def load_env(text_or_spec: str) -> MooreEnv:
    if text_or_spec.lstrip().startswith("{"):
        return MooreEnv.from_dict(json.loads(text_or_spec))
    return env_from_spec(text_or_spec)
