"""Text format for rule sets, instances and queries, and deterministic printers.

Grammar (one statement per ``.``; ``#`` starts a comment)::

    @source s1, s2.                 source predicates
    r1: A(X), B(Y) -> p(X,Z).       rule (label optional); Z is existential
    i: A(a), B(b).                  facts, grouped into instances by label
    ?q: r(U,b), r(U,c).             Boolean conjunctive query

An argument starting with an uppercase letter is a variable, any other
argument is a constant.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .logic import (Atom, Constant, FunctionTerm, Null, Rule, Variable, base_name, sort_atoms, sort_terms,
                    split_single_piece, standardize_apart, substitute, term_key, variables)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.message, self.line, self.col = message, line, col


@dataclass
class Program:
    rules: list = field(default_factory=list)
    instances: dict = field(default_factory=dict)
    queries: dict = field(default_factory=dict)
    source_predicates: frozenset = frozenset()
    warnings: list = field(default_factory=list)

    @property
    def instance(self) -> frozenset:
        out: frozenset = frozenset()
        for inst in self.instances.values():
            out |= inst
        return out

    def rule(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)


_LABEL = re.compile(r"([A-Za-z0-9_()*~]+)\s*:")
_IDENT = re.compile(r"[A-Za-z0-9][A-Za-z0-9_]*")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.arity: dict = {}

    def where(self, pos: int | None = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def error(self, msg: str, pos: int | None = None):
        raise ParseError(msg, *self.where(pos))

    def skip(self):
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c.isspace():
                self.pos += 1
            elif c == "#":
                nl = self.text.find("\n", self.pos)
                self.pos = len(self.text) if nl < 0 else nl + 1
            else:
                break

    def peek(self, s: str) -> bool:
        self.skip()
        return self.text.startswith(s, self.pos)

    def expect(self, s: str):
        if not self.peek(s):
            found = self.text[self.pos:self.pos + 1] or "end of input"
            self.error(f"expected {s!r}, found {found!r}")
        self.pos += len(s)

    def ident(self, what: str) -> tuple[str, int]:
        self.skip()
        m = _IDENT.match(self.text, self.pos)
        if not m:
            if self.text.startswith("_:", self.pos):
                self.error("nulls are not allowed in input")
            self.error(f"expected {what}")
        self.pos = m.end()
        return m.group(), m.start()

    def atom(self) -> tuple[Atom, int]:
        name, start = self.ident("a predicate")
        self.expect("(")
        args = []
        if not self.peek(")"):
            while True:
                tok, _ = self.ident("an argument")
                args.append(Variable(tok) if tok[0].isupper() else Constant(tok))
                if self.peek(","):
                    self.pos += 1
                    continue
                break
        self.expect(")")
        known = self.arity.setdefault(name, len(args))
        if known != len(args):
            self.error(f"predicate {name} used with arity {len(args)} and {known}", start)
        return Atom(name, tuple(args)), start

    def atoms(self, what: str) -> list:
        self.skip()
        if self.peek(".") or self.peek("->"):
            self.error(f"empty {what}")
        out = [self.atom()]
        while self.peek(","):
            self.pos += 1
            out.append(self.atom())
        return out

    def label(self) -> str | None:
        self.skip()
        m = _LABEL.match(self.text, self.pos)
        if m and _balanced(m.group(1)):
            self.pos = m.end()
            return m.group(1)
        return None


def _balanced(s: str) -> bool:
    depth = 0
    for c in s:
        depth += (c == "(") - (c == ")")
        if depth < 0:
            return False
    return depth == 0


def parse_program(text: str) -> Program:
    """Parse a program; rules are standardized apart and split into single-piece rules."""
    p = _Parser(text)
    prog = Program()
    raw_rules: list = []
    source: set = set()
    used_ids: set = set()
    while True:
        p.skip()
        if p.pos >= len(text):
            break
        start = p.pos
        if p.peek("@"):
            p.pos += 1
            kw, kpos = p.ident("a directive")
            if kw != "source":
                p.error(f"unknown directive @{kw}", kpos)
            while True:
                source.add(p.ident("a predicate name")[0])
                if p.peek(","):
                    p.pos += 1
                    continue
                break
            p.expect(".")
            continue
        if p.peek("?"):
            p.pos += 1
            lab = p.label() or f"q{len(prog.queries) + 1}"
            q = p.atoms("query")
            p.expect(".")
            prog.queries[lab] = frozenset(a for a, _ in q)
            continue
        lab = p.label()
        body = p.atoms("body")
        if p.peek("->"):
            p.pos += 2
            head = p.atoms("head")
            p.expect(".")
            for a, apos in body + head:
                for t in a.args:
                    if isinstance(t, Constant):
                        p.error(f"constant {t} found in a rule", apos)
            rid = lab or f"r{len(raw_rules) + 1}"
            if rid in used_ids:
                p.error(f"duplicate rule label {rid}", start)
            used_ids.add(rid)
            raw_rules.append(Rule(rid, [a for a, _ in body], [a for a, _ in head]))
        else:
            p.expect(".")
            for a, apos in body:
                for t in a.args:
                    if isinstance(t, Variable):
                        p.error(f"variable {t} found in a fact", apos)
            lab = lab or "i"
            prog.instances[lab] = prog.instances.get(lab, frozenset()) | {a for a, _ in body}
    for r in raw_rules:
        parts = split_single_piece(r)
        if len(parts) > 1:
            prog.warnings.append(f"rule {r.id} has a {len(parts)}-piece head; split into "
                                 + ", ".join(x.id for x in parts))
        prog.rules.extend(parts)
    prog.rules = standardize_apart(prog.rules)
    prog.source_predicates = frozenset(source)
    return prog


def parse_atoms(text: str) -> frozenset:
    """Parse a comma-separated list of atoms, e.g. a query given on the command line."""
    p = _Parser(text)
    out = p.atoms("atom list")
    if p.peek("."):
        p.pos += 1
    p.skip()
    if p.pos < len(text):
        p.error("unexpected trailing input")
    return frozenset(a for a, _ in out)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def display_names(atom_sets) -> dict:
    """Variable -> printed variable, dropping ``_N`` suffixes where unambiguous."""
    vs = set()
    for s in atom_sets:
        vs |= variables(s)
    groups: dict = {}
    for v in vs:
        groups.setdefault(base_name(v.name), []).append(v)
    out = {}
    for base, members in groups.items():
        for v in members:
            out[v] = Variable(base) if len(members) == 1 else v
    return out


def _term(t, nulls: dict) -> str:
    if isinstance(t, Null):
        return f"_:{nulls[t]}"
    if isinstance(t, FunctionTerm):
        return f"{t.symbol}({','.join(_term(a, nulls) for a in t.args)})"
    return str(t)


def format_atoms(atoms, nulls: dict | None = None) -> str:
    nulls = nulls or {}
    return ", ".join(f"{a.predicate}({','.join(_term(t, nulls) for t in a.args)})" for a in sort_atoms(atoms))


def serialize_rule(rule, with_id: bool = True) -> str:
    names = display_names([rule.body, rule.head])
    text = f"{format_atoms(substitute(rule.body, names))} -> {format_atoms(substitute(rule.head, names))}."
    return f"{rule.id}: {text}" if with_id else text


def null_index(instance) -> dict:
    ns = sorted({t for a in instance for t in a.args if isinstance(t, Null)}, key=term_key)
    return {n: i for i, n in enumerate(ns)}


def serialize_instance(instance, label: str = "i", verbose: bool = False) -> str:
    instance = frozenset(instance)
    if not instance:
        return "# empty"
    idx = null_index(instance)
    lines = [f"{label}: {format_atoms(instance, idx)}."]
    if verbose:
        for n, i in idx.items():
            lines.append(f"# _:{i} = {n.key}")
    return "\n".join(lines)


def serialize_prefix(f) -> str:
    names = display_names([f.body, f.head])
    prefix = " ".join(f"{q} {' '.join(str(names[v]) for v in sort_terms(vs))}" for q, vs in f.prefix())
    head = format_atoms(substitute(f.head, names))
    if f.inner_exists:
        head = f"exists {' '.join(str(names[v]) for v in sort_terms(f.inner_exists))} : {head}"
    body = format_atoms(substitute(f.body, names))
    return f"{prefix} : {body} -> {head}." if prefix else f"{body} -> {head}."


def serialize_program(prog: Program) -> str:
    lines = []
    if prog.source_predicates:
        lines.append(f"@source {', '.join(sorted(prog.source_predicates))}.")
    lines.extend(serialize_rule(r) for r in prog.rules)
    for lab in sorted(prog.instances):
        if prog.instances[lab]:
            lines.append(serialize_instance(prog.instances[lab], lab))
    for lab in sorted(prog.queries):
        lines.append(f"?{lab}: {format_atoms(prog.queries[lab])}.")
    return "\n".join(lines) + "\n"


def serialize_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2)


def serialize(entity, **kwargs) -> str:
    """Dispatch on the entity type; dicts are treated as structured reports."""
    from .composition import PrefixFormula, SkolemRule

    if isinstance(entity, Program):
        return serialize_program(entity)
    if isinstance(entity, (Rule, SkolemRule)):
        return serialize_rule(entity, **kwargs)
    if isinstance(entity, PrefixFormula):
        return serialize_prefix(entity)
    if isinstance(entity, dict):
        return serialize_report(entity)
    if isinstance(entity, (set, frozenset)):
        return serialize_instance(entity, **kwargs)
    raise TypeError(f"cannot serialize {type(entity).__name__}")
