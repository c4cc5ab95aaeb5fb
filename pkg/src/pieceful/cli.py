"""Command line entry point: ``pieceful <command> --in FILE [options]``.

Exit codes: 0 for a definitive answer, 2 when a budget ran out first, 1 on
input errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

from . import analysis, composition, parallelizer
from .chase import DEFAULT_MAX_ATOMS, chase
from .logic import Null, rename_apart
from .syntax import (ParseError, Program, format_atoms, null_index, parse_atoms, parse_program, serialize_prefix,
                     serialize_report, serialize_rule)
from .unification import piece_unifiers, rewrite_closure
from .verdict import Status

EXIT_OK, EXIT_INPUT, EXIT_UNKNOWN = 0, 1, 2


class InputError(Exception):
    pass


@dataclass
class Outcome:
    report: dict
    text: list
    unknown: bool = False


def _load(path: str) -> Program:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return parse_program(text)
    except ParseError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _rule(prog: Program, rule_id: str):
    try:
        return prog.rule(rule_id)
    except KeyError:
        raise InputError(f"unknown rule id {rule_id!r}; known: {', '.join(r.id for r in prog.rules)}") from None


def _positive(name: str, value: int):
    if value is not None and value < 1:
        raise InputError(f"--{name} must be positive")


def _rules_text(rules) -> list:
    return [serialize_rule(r) for r in rules]


def _instances_from(path: str | None) -> list:
    if not path:
        return []
    prog = _load(path)
    return [prog.instances[k] for k in sorted(prog.instances)]


def cmd_chase(args, prog: Program) -> Outcome:
    if args.max_levels < 0:
        raise InputError("--max-levels must be >= 0")
    inst = prog.instances.get(args.instance) if args.instance else prog.instance
    if inst is None:
        raise InputError(f"no instance labelled {args.instance!r}")
    res = chase(inst, prog.rules, max_levels=args.max_levels, max_atoms=args.max_atoms, trace=args.trace)
    idx = null_index(res.final)
    report = {
        "command": "chase",
        "fixpoint_level": res.fixpoint_level,
        "truncated": res.truncated,
        "level_sizes": [len(lv) for lv in res.levels],
        "result": format_atoms(res.final, idx),
        "nulls": {f"_:{i}": str(n.key) for n, i in idx.items()},
    }
    text = [f"fixpoint level: {res.fixpoint_level if not res.truncated else 'none (truncated)'}",
            f"atoms: {len(res.final)}", f"result: {format_atoms(res.final, idx)}."]
    if args.verbose or args.trace:
        text += [f"# _:{i} = {n.key}" for n, i in idx.items()]
    if args.trace:
        steps = []
        for k, st in enumerate(res.derivation.steps, 1):
            hom = ", ".join(f"{v}->{_show(t, idx)}" for v, t in st.trigger.hom)
            steps.append({"step": k, "level": st.level, "rule": st.trigger.rule.id, "hom": hom,
                          "produced": format_atoms(st.produced, idx), "digest": st.digest})
            text.append(f"step {k} (level {st.level}): {st.trigger.rule.id} with {{{hom}}} produces "
                        f"{format_atoms(st.produced, idx)}")
        report["trace"] = steps
    return Outcome(report, text, res.truncated)


def _show(t, idx):
    return f"_:{idx[t]}" if isinstance(t, Null) and t in idx else str(t)


def cmd_rewrite(args, prog: Program) -> Outcome:
    _positive("max-depth", args.max_depth)
    _positive("max-size", args.max_size)
    try:
        q = parse_atoms(args.query)
    except ParseError as exc:
        raise InputError(f"query: {exc}") from exc
    answer = [a.strip() for a in args.answer_vars.split(",")] if args.answer_vars else ()
    res = rewrite_closure(q, prog.rules, args.max_depth, args.max_size, answer_vars=answer)
    elements = [format_atoms(e) for e in res.elements]
    report = {"command": "rewrite", "query": format_atoms(q), "complete": res.complete,
              "depth_reached": res.depth_reached, "rewritings": elements}
    text = [f"complete: {str(res.complete).lower()} (depth {res.depth_reached})"] + [f"  {e}" for e in elements]
    return Outcome(report, text, not res.complete)


def cmd_compose(args, prog: Program) -> Outcome:
    r2 = _rule(prog, args.r2)
    r1 = rename_apart(_rule(prog, args.r1), r2.all_vars)
    unifiers = piece_unifiers(r2.body, r1)
    if args.unifier is not None:
        if not 0 <= args.unifier < len(unifiers):
            raise InputError(f"--unifier must be in [0, {len(unifiers)})")
        chosen = [(args.unifier, unifiers[args.unifier])]
    else:
        chosen = list(enumerate(unifiers))
    items, text = [], []
    for k, mu in chosen:
        entry = {"index": k, "unifier": str(mu), "stable": composition.is_stable(r2, r1, mu)}
        if args.compact:
            f = composition.compose_compact(r2, r1, mu)
            entry["compact"] = serialize_prefix(f)
            entry["swap_condition"] = composition.check_swap_condition(f, mu, r1, r2)
            out = entry["compact"]
        elif args.skolem:
            f = composition.compose_compact(r2, r1, mu)
            entry["skolem"] = serialize_rule(composition.skolemize(f), with_id=False)
            out = entry["skolem"]
        else:
            entry["rule"] = serialize_rule(composition.compose_existential(r2, r1, mu, index=k))
            out = entry["rule"]
        items.append(entry)
        text.append(f"[{k}] {out}")
    if not items:
        text.append(f"no piece-unifier of body({r2.id}) with {r1.id}")
    return Outcome({"command": "compose", "r2": r2.id, "r1": r1.id, "compositions": items}, text)


def _log_entry(rec) -> dict:
    return {"r2": rec.r2.id, "r1": rec.r1.id, "unifier": str(rec.unifier), "stable": rec.stable,
            "depth": rec.depth, "composed": rec.composed_id}


def cmd_saturate(args, prog: Program) -> Outcome:
    _positive("max-depth", args.max_depth)
    _positive("max-rules", args.max_rules)
    sat = composition.saturate(prog.rules, args.max_depth, args.max_rules)
    report = {"command": "saturate", "fixpoint": sat.fixpoint, "depth_reached": sat.depth_reached,
              "rules": [{"rule": serialize_rule(r), "depth": sat.depth_of.get(r.id, 0)} for r in sat.rules],
              "violations": len(sat.violations)}
    text = [f"fixpoint: {str(sat.fixpoint).lower()} (depth {sat.depth_reached}, {len(sat.rules)} rules)"]
    text += [f"  [{sat.depth_of.get(r.id, 0)}] {serialize_rule(r)}" for r in sat.rules]
    if args.log_stability:
        report["stability_log"] = [_log_entry(rec) for rec in sat.stability_log]
        text += [f"  {'stable' if rec.stable else 'UNSTABLE'}: {rec.r2.id} with {rec.r1.id} via {rec.unifier}"
                 for rec in sat.stability_log]
    return Outcome(report, text, not sat.fixpoint)


def _verdict_dict(v) -> dict:
    out = {"status": v.status.value, "note": v.note}
    if v.step is not None:
        out["depth"] = v.step
    if v.witness is not None:
        out["witness"] = str(v.witness)
    if v.budget_used:
        out["budget_used"] = dict(v.budget_used)
    return out


def _sample_instances(prog: Program, n: int, seed: int) -> list:
    return parallelizer.default_instances(prog.rules, user=[prog.instances[k] for k in sorted(prog.instances)],
                                          n_random=n, seed=seed)


def cmd_classify(args, prog: Program) -> Outcome:
    _positive("max-depth", args.max_depth)
    cls = analysis.syntactic_class(prog.rules)
    local = analysis.check_stability(prog.rules)
    verdict = analysis.pieceful_verdict(prog.rules, args.max_depth, args.max_rules)
    samples = _sample_instances(prog, args.samples, args.seed)
    probe = analysis.boundedness_probe(prog.rules, samples, args.probe_bound, max_levels=args.max_levels,
                                       max_atoms=args.max_atoms)
    if verdict.fails:
        par = "Fails"
    else:
        res = parallelizer.parallelise(prog.rules, args.max_depth, args.max_rules)
        par = res.status.value
    report = {
        "command": "classify",
        "syntactic": cls.as_dict(),
        "stability_violations": [str(v) for v in local],
        "pieceful": _verdict_dict(verdict),
        "boundedness_probe": {"fixpoint_levels": probe.levels, "bound": probe.bound,
                              "consistent": probe.consistent, "note": probe.note},
        "parallelisable": par,
    }
    flags = ", ".join(k for k in ("datalog", "frontier_one", "guarded", "frontier_guarded") if getattr(cls, k))
    text = [f"syntactic classes: {flags or 'none'}",
            f"stability violations: {len(local)}"] + [f"  {v}" for v in local]
    text.append(f"pieceful: {verdict.status.value}" + (f" at depth {verdict.step}" if verdict.fails else "")
                + (f" ({verdict.note})" if verdict.note else ""))
    if verdict.fails:
        text.append(f"  violation: {verdict.witness}")
    text.append(f"boundedness probe: levels {probe.levels}, consistent with bound {probe.bound}: "
                f"{str(probe.consistent).lower()} ({probe.note})")
    text.append(f"parallelisable (bounded and pieceful): {par}")
    return Outcome(report, text, verdict.status is Status.UNKNOWN)


def cmd_parallelise(args, prog: Program) -> Outcome:
    _positive("max-depth", args.max_depth)
    res = parallelizer.parallelise(prog.rules, args.max_depth, args.max_rules)
    report = {"command": "parallelise", "status": res.status.value, "reason": res.reason}
    text = [f"status: {res.status.value} ({res.reason})"]
    unknown = res.status is Status.UNKNOWN
    candidate = res.rules
    if candidate is not None and args.project_mapping:
        try:
            candidate, warnings = parallelizer.project_mapping(candidate, prog.source_predicates)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        report["warnings"] = warnings
        text += [f"warning: {w}" for w in warnings]
    if candidate is not None:
        report["rules"] = _rules_text(candidate)
        text += [f"  {r}" for r in report["rules"]]
    if candidate is not None and args.verify:
        source = prog.source_predicates if args.project_mapping else None
        insts = parallelizer.default_instances(prog.rules, candidate, _instances_from(args.instances),
                                               n_random=args.samples, seed=args.seed, source_predicates=source)
        rep = parallelizer.verify_parallelisation(prog.rules, candidate, insts, args.max_levels, args.max_atoms,
                                                  jobs=args.jobs)
        report["verification"] = _report_dict(rep)
        text.append(f"verification: {rep.conclusion.value} on {len(rep.checks)} instances")
        unknown = unknown or rep.conclusion is Status.UNKNOWN
    return Outcome(report, text, unknown)


def _report_dict(rep) -> dict:
    return {"conclusion": rep.conclusion.value,
            "checks": [{"instance": format_atoms(c.instance), "status": c.status.value,
                        "injective": c.injective, "homomorphism": c.homomorphism} for c in rep.checks]}


def cmd_verify(args, prog: Program) -> Outcome:
    candidate = _load(args.candidate).rules
    user = _instances_from(args.instances) or [prog.instances[k] for k in sorted(prog.instances)]
    insts = parallelizer.default_instances(prog.rules, candidate, user, n_random=args.samples, seed=args.seed)
    rep = parallelizer.verify_parallelisation(prog.rules, candidate, insts, args.max_levels, args.max_atoms,
                                              jobs=args.jobs)
    text = [f"conclusion: {rep.conclusion.value} on {len(rep.checks)} instances"]
    for c in rep.checks:
        if c.status is not Status.HOLDS:
            text.append(f"  {c.status.value}: {format_atoms(c.instance)} (injective={c.injective}, "
                        f"homomorphism={c.homomorphism}) {c.note}".rstrip())
    return Outcome({"command": "verify", **_report_dict(rep)}, text, rep.conclusion is Status.UNKNOWN)


COMMANDS = {
    "chase": cmd_chase, "rewrite": cmd_rewrite, "compose": cmd_compose, "saturate": cmd_saturate,
    "classify": cmd_classify, "parallelise": cmd_parallelise, "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--in", dest="input", required=True, help="input .ruleset file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("text", "structured"), default="text")
    common.add_argument("--jobs", type=int, default=1, help="cap on worker processes")
    common.add_argument("--max-atoms", type=int, default=DEFAULT_MAX_ATOMS)
    common.add_argument("--max-levels", type=int, default=32, help="chase level budget")

    parser = argparse.ArgumentParser(prog="pieceful", description="Chase, composition and parallelisation "
                                                                  "of existential rules.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chase", parents=[common], help="breadth-first semi-oblivious chase")
    p.add_argument("--instance", help="instance label (default: all facts)")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--verbose", action="store_true", help="print the provenance of each null")

    p = sub.add_parser("rewrite", parents=[common], help="rewriting closure of a query")
    p.add_argument("--query", required=True)
    p.add_argument("--answer-vars", default="", help="comma-separated distinguished variables")
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--max-size", type=int, default=1000)

    p = sub.add_parser("compose", parents=[common], help="compose two rules")
    p.add_argument("--r2", required=True)
    p.add_argument("--r1", required=True)
    p.add_argument("--unifier", type=int)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--compact", action="store_true")
    g.add_argument("--skolem", action="store_true")

    for name, helptext in (("saturate", "bounded saturation under composition"),
                           ("classify", "syntactic classes, stability and pieceful verdict"),
                           ("parallelise", "compile into a one-step rule set")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--max-depth", type=int, default=4)
        p.add_argument("--max-rules", type=int, default=200)
        if name == "saturate":
            p.add_argument("--log-stability", action="store_true")
        if name == "classify":
            p.add_argument("--probe-bound", type=int, default=2)
            p.add_argument("--samples", type=int, default=10)
        if name == "parallelise":
            p.add_argument("--project-mapping", action="store_true")
            p.add_argument("--verify", action="store_true")
            p.add_argument("--instances", help="file with extra verification instances")
            p.add_argument("--samples", type=int, default=20)

    p = sub.add_parser("verify", parents=[common], help="check a candidate one-step rule set")
    p.add_argument("--candidate", required=True, help="file holding the candidate rules")
    p.add_argument("--instances", help="file with verification instances")
    p.add_argument("--samples", type=int, default=20)
    return parser


def run(args: argparse.Namespace, out=None) -> int:
    out = out or sys.stdout
    try:
        if args.jobs < 1:
            raise InputError("--jobs must be positive")
        _positive("max-atoms", args.max_atoms)
        prog = _load(args.input)
        outcome = COMMANDS[args.command](args, prog)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for w in prog.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.format == "structured":
        outcome.report["exit"] = "unknown" if outcome.unknown else "ok"
        out.write(serialize_report(outcome.report) + "\n")
    else:
        out.write("\n".join(outcome.text) + "\n")
    return EXIT_UNKNOWN if outcome.unknown else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
