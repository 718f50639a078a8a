"""Command-line front end.

    equigame <noun> <verb> [options]

Exit codes: 0 success, 1 invalid input, 2 no convergence (partial output is
still written), 64 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from . import causal, coalgebra, diversity, evo, metricyoneda, netecon, vi

EXIT_OK, EXIT_INVALID, EXIT_NOCONV, EXIT_USAGE = 0, 1, 2, 64
DEFAULT_SEED = 42


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def worker_count() -> int:
    try:
        cap = int(os.environ.get("EQUIGAME_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, os.cpu_count() or 1))


# --------------------------------------------------------------------------
# input validation


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load_json(path, diags):
    try:
        return json.loads(_read(path))
    except OSError as exc:
        diags.append(f"{path}: cannot read ({exc.strerror})")
    except json.JSONDecodeError as exc:
        diags.append(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}")
    return None


def _need_keys(path, d, keys, diags, where="$"):
    if not isinstance(d, dict):
        diags.append(f"{path}: {where} must be an object")
        return False
    ok = True
    for k in keys:
        if k not in d:
            diags.append(f"{path}: {where} is missing {k!r}")
            ok = False
    return ok


def _validate_lts(path, diags):
    d = _load_json(path, diags)
    if d is None or not _need_keys(path, d, ("states", "labels", "trans"), diags):
        return
    states, labels = set(map(str, d["states"])), set(map(str, d["labels"]))
    for i, t in enumerate(d["trans"]):
        if not isinstance(t, list) or len(t) != 3:
            diags.append(f"{path}: $.trans[{i}] must be a [state, label, state] triple")
            continue
        s, a, u = map(str, t)
        if s not in states or u not in states:
            diags.append(f"{path}: $.trans[{i}] uses an undeclared state")
        if a not in labels:
            diags.append(f"{path}: $.trans[{i}] uses an undeclared label")


def _validate_relation(path, diags):
    d = _load_json(path, diags)
    if d is None:
        return
    pairs = d.get("pairs") if isinstance(d, dict) else d
    if not isinstance(pairs, list) or any(not isinstance(p, list) or len(p) != 2 for p in pairs):
        diags.append(f"{path}: $.pairs must be a list of [s, t] pairs")


def _validate_mdp(path, diags):
    d = _load_json(path, diags)
    if d is None or not _need_keys(path, d, ("states", "actions", "P", "R"), diags):
        return
    rows: Dict = {}
    for i, entry in enumerate(d["P"]):
        if not isinstance(entry, list) or len(entry) != 4:
            diags.append(f"{path}: $.P[{i}] must be [s, a, s', p]")
            continue
        s, a, _, p = entry
        if not isinstance(p, (int, float)) or p < 0:
            diags.append(f"{path}: $.P[{i}] has an invalid probability {p!r}")
            continue
        rows.setdefault((str(s), str(a)), 0.0)
        rows[(str(s), str(a))] += p
    for r, ((s, a), total) in enumerate(sorted(rows.items())):
        if abs(total - 1.0) > coalgebra.PROB_TOL:
            diags.append(f"{path}: P row {r} ({s}, {a}) sums to {total!r}, not 1")


def _validate_space(path, diags):
    d = _load_json(path, diags)
    if d is None or not _need_keys(path, d, ("points", "d"), diags):
        return
    n = len(d["points"])
    if len(d["d"]) != n or any(len(row) != n for row in d["d"]):
        diags.append(f"{path}: $.d must be a {n}x{n} matrix")
        return
    sentinel = d.get("inf", metricyoneda.INF_SENTINEL)
    for i, row in enumerate(d["d"]):
        for j, v in enumerate(row):
            if v == sentinel:
                continue
            try:
                ok = float(metricyoneda.Fraction(v) if isinstance(v, str) else v) >= 0
            except (TypeError, ValueError):
                ok = False
            if not ok:
                diags.append(f"{path}: $.d[{i}][{j}] = {v!r} is not a distance in [0, inf]")


def _validate_problem(path, diags):
    d = _load_json(path, diags)
    if d is None or not _need_keys(path, d, ("n", "M", "q", "set"), diags):
        return
    n = d["n"]
    M = np.asarray(d["M"], dtype=float) if isinstance(d["M"], list) else None
    if M is None or M.shape != (n, n):
        diags.append(f"{path}: $.M must be an n x n matrix")
    if not isinstance(d["q"], list) or len(d["q"]) != n:
        diags.append(f"{path}: $.q must have n entries")
    s = d["set"]
    if _need_keys(path, s, ("kind",), diags, "$.set") and s["kind"] not in ("orthant", "box"):
        diags.append(f"{path}: $.set.kind must be 'orthant' or 'box'")


def _validate_model(path, diags):
    d = _load_json(path, diags)
    if d is None or not _need_keys(path, d, ("m", "n", "o", "f"), diags):
        return
    try:
        netecon.NetworkEconomyModel.from_dict(d)
    except (KeyError, ValueError, TypeError) as exc:
        diags.append(f"{path}: model does not parse ({exc})")


def _validate_env(path, diags):
    d = _load_json(path, diags)
    if d is None or not _need_keys(path, d, ("states", "actions", "predicates", "delta", "gamma"), diags):
        return
    for s in d["states"]:
        for b in d["actions"]:
            if str(d["delta"].get(str(s), {}).get(b)) not in set(map(str, d["states"])):
                diags.append(f"{path}: $.delta[{s!r}][{b!r}] is missing or not a state")
        for p in d["predicates"]:
            if not isinstance(d["gamma"].get(str(s), {}).get(p), bool):
                diags.append(f"{path}: $.gamma[{s!r}][{p!r}] must be true or false")


def _validate_joint(path, diags):
    d = _load_json(path, diags)
    if d is None or not _need_keys(path, d, ("vars", "table"), diags):
        return
    k = len(d["vars"])
    t = np.asarray(d["table"], dtype=float).reshape(-1)
    if t.size != 2**k:
        diags.append(f"{path}: $.table needs {2 ** k} entries for {k} binary variables")
    elif abs(t.sum() - 1.0) > 1e-9 or np.any(t < 0):
        diags.append(f"{path}: $.table is not a normalized distribution")


def _validate_genotypes(path, diags, long=False):
    try:
        text = _read(path)
    except OSError as exc:
        diags.append(f"{path}: cannot read ({exc.strerror})")
        return
    if long:
        return
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        diags.append(f"{path}: empty CSV")
        return
    offset = 1 if rows[0] and rows[0][0].lower() in ("sample", "id", "") else 0
    for r, row in enumerate(rows[1:], start=2):
        for c, cell in enumerate(row[offset:], start=offset + 1):
            if cell.strip() not in ("0", "1"):
                diags.append(f"{path}: row {r}, column {c}: cell {cell!r} is not 0 or 1")


def _validate_maps(path, diags):
    d = _load_json(path, diags)
    if d is not None:
        _need_keys(path, d, ("f", "g"), diags)


VALIDATORS = {
    "maps": _validate_maps,
    "lts": _validate_lts,
    "relation": _validate_relation,
    "mdp": _validate_mdp,
    "space": _validate_space,
    "problem": _validate_problem,
    "model": _validate_model,
    "env": _validate_env,
    "joint": _validate_joint,
    "genotypes": _validate_genotypes,
    "genotypes_long": lambda p, d: _validate_genotypes(p, d, long=True),
}


def validate_inputs(config) -> List[str]:
    """Schema diagnostics for every input file named in ``config``.

    ``config`` maps an input kind (a key of VALIDATORS, optionally followed
    by ":label") to a path, or is an argparse namespace, whose input flags
    are collected first.
    """
    inputs = _inputs(config) if isinstance(config, argparse.Namespace) else config
    diags: List[str] = []
    for key, path in (inputs or {}).items():
        if path is None:
            continue
        VALIDATORS[key.split(":")[0]](path, diags)
    return diags


# --------------------------------------------------------------------------
# output


def emit(args, payload, csv_text: Optional[str] = None):
    """Write JSON (or CSV when requested and available) to --out or stdout."""
    if args.format == "csv" and csv_text is not None:
        text = csv_text
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# commands


def _solve(args, problem):
    algo = args.algo
    if algo == "basic":
        sol = vi.solve_basic_projection(problem, alpha=args.alpha, tol=args.tol, max_iter=args.max_iter)
    elif algo == "extragradient":
        sol = vi.solve_extragradient(problem, alpha=args.alpha, tol=args.tol, max_iter=args.max_iter)
    else:
        sampler = vi.StochasticSampler.additive_gaussian(problem, args.sigma)
        a = 0.5 if args.alpha is None else args.alpha
        sched = vi.StepSchedule.harmonic(a, 10.0, args.beta)
        sol = vi.solve_stochastic_two_step(problem, sampler, sched, seed=args.seed, iterations=args.iterations, trace_every=args.trace_every)
    emit(args, sol.to_dict(), sol.trace_csv())
    if algo == "stochastic":
        return EXIT_OK
    return EXIT_OK if sol.converged else EXIT_NOCONV


def cmd_vi_solve(args):
    return _solve(args, vi.problem_from_json(_read(args.problem)))


def _load_model(args):
    if args.paper_instance:
        return netecon.paper_instance()
    if not args.model:
        raise UsageError("give --paper-instance or --model FILE")
    return netecon.NetworkEconomyModel.from_json(_read(args.model))


def cmd_netecon_solve(args):
    return _solve(args, netecon.assemble_vi(_load_model(args)))


def cmd_netecon_evolve(args):
    trace = evo.evolutionary_vi_loop(
        _load_model(args), rounds=args.rounds, delta=args.delta, rng=args.seed,
        alpha=args.alpha, tol=args.tol, max_iter=args.max_iter,
    )
    payload = {
        "rounds": [
            {"round": r.round, "fitness": r.fitness, "extinct": r.extinct, "parent": r.parent,
             "equilibrium": r.equilibrium, "residual": r.residual}
            for r in trace.rounds
        ],
        "diagnostic": trace.diagnostic,
        "seed": args.seed,
    }
    emit(args, payload, trace.to_csv())
    return EXIT_NOCONV if trace.truncated else EXIT_OK


def cmd_moran_exact(args):
    p = evo.fixation_probability_exact(args.N, args.r, args.i0)
    emit(args, {"N": args.N, "r": args.r, "i0": args.i0, "exact": p})
    return EXIT_OK


def cmd_moran_simulate(args):
    est = evo.simulate_fixation(args.N, args.r, args.i0, args.replicas, seed=args.seed, workers=worker_count())
    emit(args, est.to_dict())
    return EXIT_OK


def cmd_evolve_conjunction(args):
    lits = {int(v) for v in args.target.split(",") if v.strip()} if args.target else set()
    target = evo.BooleanHypothesis(args.n, lits)
    tr = evo.evolve_conjunction(target, generations=args.generations, tolerance=args.tolerance, rng=args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["generation", "perf", "kind", "literals"])
    for g, (h, v, kind) in enumerate(zip(tr.hypotheses, tr.perfs, tr.kinds)):
        w.writerow([g, repr(v), kind, " ".join(map(str, sorted(h.literals)))])
    payload = {
        "target": sorted(lits),
        "final": sorted(tr.final.literals),
        "perf": tr.perfs[-1],
        "generations": len(tr.perfs) - 1,
        "reached_optimum_at": tr.generations_to(1.0),
        "seed": args.seed,
    }
    emit(args, payload, buf.getvalue())
    return EXIT_OK


def _load_relation(path):
    d = json.loads(_read(path))
    pairs = d.get("pairs") if isinstance(d, dict) else d
    return frozenset(tuple(p) for p in pairs)


def cmd_bisim_check(args):
    if args.mdp1 or args.mdp2 or args.maps:
        if not (args.mdp1 and args.mdp2 and args.maps):
            raise UsageError("MDP mode needs --mdp1, --mdp2 and --maps")
        m1 = coalgebra.MDP.from_dict(json.loads(_read(args.mdp1)))
        m2 = coalgebra.MDP.from_dict(json.loads(_read(args.mdp2)))
        maps = json.loads(_read(args.maps))
        res = coalgebra.check_mdp_homomorphism(m1, m2, maps["f"], maps["g"])
        emit(args, res.to_dict())
        return EXIT_OK
    if not (args.lts1 and args.relation):
        raise UsageError("give --lts1 and --relation (or --mdp1, --mdp2 and --maps)")
    l1 = coalgebra.LTS.from_json(_read(args.lts1))
    l2 = coalgebra.LTS.from_json(_read(args.lts2)) if args.lts2 else l1
    res = coalgebra.is_bisimulation(l1, l2, _load_relation(args.relation))
    emit(args, res.to_dict())
    return EXIT_OK


def cmd_bisim_greatest(args):
    l1 = coalgebra.LTS.from_json(_read(args.lts1))
    l2 = coalgebra.LTS.from_json(_read(args.lts2)) if args.lts2 else l1
    rel = coalgebra.greatest_bisimulation(l1, l2)
    emit(args, {"pairs": sorted([list(p) for p in rel], key=repr)})
    return EXIT_OK


def _load_env(spec):
    if os.path.exists(spec):
        return diversity.MooreEnv.from_dict(json.loads(_read(spec)))
    return diversity.env_from_spec(spec)


def cmd_diversity_build(args):
    env = _load_env(args.env)
    da = diversity.compute_classes(env)
    payload = da.to_dict()
    payload["states"] = env.num_states
    payload["reduced"] = diversity.is_reduced(env)
    emit(args, payload)
    return EXIT_OK


def cmd_diversity_simulate(args):
    env = _load_env(args.env)
    da = diversity.compute_classes(env)
    q = env.q0 if args.state is None else env.state_names.index(args.state)
    if args.actions is not None:
        acts = list(args.actions)
    else:
        rng = np.random.default_rng(args.seed)
        acts = [env.actions[i] for i in rng.integers(len(env.actions), size=args.length)]
    pred = diversity.simulate(da, da.signature(q), acts)
    truth = diversity.ground_truth(env, q, acts)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    preds = [str(p) for p in env.predicates]
    w.writerow(["step", "action"] + [f"predicted_{p}" for p in preds] + [f"true_{p}" for p in preds])
    for k, (b, a, t) in enumerate(zip(acts, pred, truth), start=1):
        w.writerow([k, b] + [int(a[p]) for p in env.predicates] + [int(t[p]) for p in env.predicates])
    emit(args, {"actions": "".join(map(str, acts)), "agree": pred == truth, "steps": len(acts)}, buf.getvalue())
    return EXIT_OK if pred == truth else EXIT_INVALID


def cmd_yoneda_check(args):
    space = metricyoneda.GenMetricSpace.from_json(_read(args.space))
    violations = metricyoneda.validate(space)
    if violations and args.strict:
        emit(args, {"valid": False, "violations": _jsonable(violations)})
        return EXIT_INVALID
    rep = metricyoneda.check_isometry(space, strict=False)
    emit(args, {
        "valid": not violations,
        "violations": _jsonable(violations),
        "isometry": rep.ok,
        "worst_pair": list(rep.worst_pair) if rep.worst_pair else None,
        "deviation": _jsonable(rep.deviation),
    })
    return EXIT_OK


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if v == metricyoneda.INF:
        return metricyoneda.INF_SENTINEL
    if isinstance(v, metricyoneda.Fraction):
        return float(v)
    return v


def cmd_separoid_check(args):
    d = json.loads(_read(args.joint))
    k = len(d["vars"])
    table = np.asarray(d["table"], dtype=float).reshape((2,) * k)
    sep = causal.separoid_from_joint(d["vars"], table)
    bad = causal.check_separoid(sep, strong=args.strong)

    def name(s):
        return sorted(s)

    emit(args, {
        "elements": len(sep.elements),
        "ci_triples": len(sep.ci),
        "violations": [{"axiom": v["axiom"], "witness": [name(w) for w in v["witness"]]} for v in bad],
    })
    return EXIT_OK


def cmd_poset_discover(args):
    text = _read(args.genotypes)
    data = causal.GenotypeDataset.from_long_csv(text) if args.long else causal.GenotypeDataset.from_wide_csv(text)
    p = causal.discover_poset(data, args.epsilon)
    if args.format == "dot":
        text = p.to_dot()
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    emit(args, p.to_dict())
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


SCHEMAS = {
    "problem": 'problem JSON: {"n": int, "M": [[...]], "q": [...], "set": {"kind": "orthant"|"box", "lo": [...], "hi": [...]}}',
    "solution": 'writes {"point", "residual", "iterations", "converged"}; --format csv writes the trace (k,residual)',
    "model": 'model JSON: {"m","n","o","f":{"1":[terms]},"rho":{"1,1,1":[terms]},"c":{...},"oc":{...}}, term = {"var":"Q[1,1,1]","pow":2,"coef":1.0}',
    "lts": 'LTS JSON: {"states": [...], "labels": [...], "trans": [["s","a","t"], ...]}; relation JSON: {"pairs": [["s","t"], ...]}',
    "mdp": 'MDP JSON: {"states","actions","P": [[s,a,t,p], ...],"R": [[s,a,r], ...]}; maps JSON: {"f": {s: s2}, "g": {s: {a: a2}}}',
    "env": 'env: builder "register:N" or JSON {"states","actions","predicates","q0","delta":{q:{b:q2}},"gamma":{q:{p:bool}}}',
    "space": 'space JSON: {"points": [...], "d": [[...]], "inf": "INF"}',
    "joint": 'joint JSON: {"vars": ["x","y","z"], "table": [...]} with 2^k probabilities, first variable slowest',
    "genotypes": "genotype CSV: header sample,e1,e2,... and 0/1 cells; --long reads sample,event rows",
}


def _common(p, formats=("json", "csv")):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed (default 42)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("-v", "--verbose", action="store_true")


def _solver_flags(p):
    p.add_argument("--algo", choices=("basic", "extragradient", "stochastic"), default="extragradient")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--alpha", type=float, default=None, help="step size (default mu/L^2, or a in a/(k+10) for stochastic)")
    p.add_argument("--beta", type=float, default=1.0, help="relaxation in (0, 2) for the stochastic method")
    p.add_argument("--sigma", type=float, default=1.0, help="Gaussian noise level for the stochastic method")
    p.add_argument("--iterations", type=int, default=200_000, help="stochastic iterations")
    p.add_argument("--trace-every", type=int, default=0, help="record the residual every K stochastic steps")


def build_parser() -> Parser:
    top = Parser(prog="equigame", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    nouns = top.add_subparsers(dest="noun", metavar="NOUN", required=True)

    def verb(group, name, func, schema_keys, help_text):
        epilog = "\n".join(SCHEMAS[k] for k in schema_keys)
        p = group.add_parser(name, help=help_text, description=help_text, epilog=epilog,
                             formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(func=func)
        return p

    g = nouns.add_parser("vi", help="variational inequalities").add_subparsers(dest="verb", metavar="VERB", required=True)
    p = verb(g, "solve", cmd_vi_solve, ("problem", "solution"), "solve an affine VI read from JSON")
    p.add_argument("--problem", required=True)
    _solver_flags(p)
    _common(p)

    g = nouns.add_parser("netecon", help="network economy").add_subparsers(dest="verb", metavar="VERB", required=True)
    p = verb(g, "solve", cmd_netecon_solve, ("model", "solution"), "solve the economy's equilibrium VI")
    p.add_argument("--paper-instance", action="store_true", help="use the built-in 2x1x1 fixture")
    p.add_argument("--model")
    _solver_flags(p)
    _common(p)
    p = verb(g, "evolve", cmd_netecon_evolve, ("model",),
             "extinction/replacement loop; CSV columns round,fitness_1..m,extinct,residual")
    p.add_argument("--paper-instance", action="store_true")
    p.add_argument("--model")
    p.add_argument("--rounds", type=int, default=50)
    p.add_argument("--delta", type=float, default=0.05, help="mutation half-width")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100_000)
    _common(p, ("csv", "json"))

    g = nouns.add_parser("moran", help="Moran process").add_subparsers(dest="verb", metavar="VERB", required=True)
    for name, func, text in (("exact", cmd_moran_exact, "exact fixation probability; writes {N, r, i0, exact}"),
                             ("simulate", cmd_moran_simulate, "Monte Carlo fixation; writes {exact, empirical, stderr, replicas, seed}")):
        p = g.add_parser(name, help=text, description=text)
        p.set_defaults(func=func)
        p.add_argument("--N", type=int, required=True)
        p.add_argument("--r", type=float, required=True)
        p.add_argument("--i0", type=int, required=True)
        if name == "simulate":
            p.add_argument("--replicas", type=int, default=100_000)
        _common(p, ("json",))

    g = nouns.add_parser("evolve", help="evolvability").add_subparsers(dest="verb", metavar="VERB", required=True)
    text = "evolve a monotone conjunction; CSV columns generation,perf,kind,literals"
    p = g.add_parser("conjunction", help=text, description=text)
    p.set_defaults(func=cmd_evolve_conjunction)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--target", default="", help="comma-separated literal indices, e.g. 2,5")
    p.add_argument("--generations", type=int, default=500)
    p.add_argument("--tolerance", type=float, default=None)
    _common(p)

    g = nouns.add_parser("bisim", help="bisimulation").add_subparsers(dest="verb", metavar="VERB", required=True)
    p = verb(g, "check", cmd_bisim_check, ("lts", "mdp"), "check a relation (or an MDP homomorphism); writes {ok, witness, reason}")
    p.add_argument("--lts1")
    p.add_argument("--lts2")
    p.add_argument("--relation")
    p.add_argument("--mdp1")
    p.add_argument("--mdp2")
    p.add_argument("--maps")
    _common(p, ("json",))
    p = verb(g, "greatest", cmd_bisim_greatest, ("lts",), "greatest bisimulation; writes {pairs}")
    p.add_argument("--lts1", required=True)
    p.add_argument("--lts2")
    _common(p, ("json",))

    g = nouns.add_parser("diversity", help="diversity automata").add_subparsers(dest="verb", metavar="VERB", required=True)
    p = verb(g, "build", cmd_diversity_build, ("env",), "build the update graph; writes {diversity, classes, edges, ...}")
    p.add_argument("--env", required=True)
    _common(p, ("json",))
    p = verb(g, "simulate", cmd_diversity_simulate, ("env",), "run the automaton against the environment")
    p.add_argument("--env", required=True)
    p.add_argument("--state", help="start state name (default q0)")
    p.add_argument("--actions", help="action string (default: random of --length)")
    p.add_argument("--length", type=int, default=50)
    _common(p)

    g = nouns.add_parser("yoneda", help="metric Yoneda").add_subparsers(dest="verb", metavar="VERB", required=True)
    p = verb(g, "check", cmd_yoneda_check, ("space",), "validate a space and check the Yoneda isometry")
    p.add_argument("--space", required=True)
    p.add_argument("--strict", action="store_true", help="exit 1 instead of probing an invalid space")
    _common(p, ("json",))

    g = nouns.add_parser("separoid", help="separoids").add_subparsers(dest="verb", metavar="VERB", required=True)
    p = verb(g, "check", cmd_separoid_check, ("joint",), "check the axioms on the CI separoid of a joint table")
    p.add_argument("--joint", required=True)
    p.add_argument("--strong", action="store_true", help="also check P6")
    _common(p, ("json",))

    g = nouns.add_parser("poset", help="poset discovery").add_subparsers(dest="verb", metavar="VERB", required=True)
    p = verb(g, "discover", cmd_poset_discover, ("genotypes",), "discover the event order; JSON or DOT")
    p.add_argument("--genotypes", required=True)
    p.add_argument("--long", action="store_true")
    p.add_argument("--epsilon", type=float, default=0.0)
    _common(p, ("json", "dot"))
    return top


INPUT_KINDS = {
    "problem": "problem", "model": "model", "lts1": "lts", "lts2": "lts", "relation": "relation",
    "mdp1": "mdp", "mdp2": "mdp", "maps": "maps", "space": "space", "joint": "joint",
}


def _inputs(args) -> Dict[str, str]:
    out = {}
    for attr, kind in INPUT_KINDS.items():
        path = getattr(args, attr, None)
        if path:
            out[f"{kind}:{attr}"] = path
    if getattr(args, "genotypes", None):
        out["genotypes_long" if args.long else "genotypes"] = args.genotypes
    env = getattr(args, "env", None)
    if env and os.path.exists(env):
        out["env"] = env
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    diags = validate_inputs(args)
    if diags:
        for d in diags:
            sys.stderr.write(d + "\n")
        return EXIT_INVALID
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"equigame: {exc}\n")
        return EXIT_USAGE
    except vi.DivergedError as exc:
        sys.stderr.write(f"equigame: {exc}\n")
        return EXIT_NOCONV
    except (ValueError, KeyError, vi.VIError, coalgebra.ValidationError) as exc:
        sys.stderr.write(f"equigame: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
