"""``.adt`` DSL and JSON (de)serialization of attack trees and scenario files.

DSL::

    # comment
    tree Name {
      root Top
      gate Top = OR(A, B)
      leaf A rate=0.0068
      leaf B "Packet spoofing" rate=0.0068
    }

An optional double-quoted label may follow a gate or leaf id. Rates are plain
decimals; exponent notation is rejected.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Iterator

from .model import (DEFAULT_COLD_RATE, AttackTree, GateKind, Node, ScenarioSpec,
                    validate_tree)

LEXICAL, SYNTAX, REFERENCE, DUPLICATE = "Lexical", "Syntax", "Reference", "Duplicate"


@dataclass(frozen=True)
class SourceSpan:
    line: int = 1
    column: int = 1
    length: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    message: str
    kind: str

    def __str__(self) -> str:
        return f"{self.span}: {self.kind} error: {self.message}"


class ModelParseError(ValueError):
    """Carries every error found in a document, not just the first."""

    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        super().__init__("\n".join(map(str, errors)))


@dataclass(frozen=True)
class _Tok:
    kind: str  # IDENT NUMBER STRING PUNCT EOF
    text: str
    span: SourceSpan


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?P<exp>[eE][+-]?\d*)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<punct>[{}()=,])
""", re.VERBOSE)


def _lex(text: str, errors: list[ParseError]) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            if ch == '"':
                errors.append(ParseError(SourceSpan(line, col, 1), "unterminated string", LEXICAL))
                nl = text.find("\n", pos)
                pos = len(text) if nl < 0 else nl
            else:
                errors.append(ParseError(SourceSpan(line, col, 1),
                                         f"unexpected character {ch!r}", LEXICAL))
                pos += 1
            continue
        kind = m.lastgroup if m.lastgroup != "exp" else "number"
        s = m.group()
        span = SourceSpan(line, col, len(s))
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "number":
            if m.group("exp") is not None:
                errors.append(ParseError(span, f"exponent notation not supported in {s!r}", LEXICAL))
            toks.append(_Tok("NUMBER", s, span))
        elif kind == "ident":
            toks.append(_Tok("IDENT", s, span))
        elif kind == "string":
            toks.append(_Tok("STRING", s[1:-1], span))
        elif kind == "punct":
            toks.append(_Tok("PUNCT", s, span))
        pos = m.end()
    toks.append(_Tok("EOF", "", SourceSpan(line, pos - line_start + 1, 0)))
    return toks


class _Syntax(Exception):
    def __init__(self, tok: _Tok, message: str):
        self.tok, self.message = tok, message


class _DslParser:
    DECL_WORDS = ("root", "gate", "leaf")

    def __init__(self, toks: list[_Tok], errors: list[ParseError]):
        self.toks, self.i, self.errors = toks, 0, errors
        self.name = ""
        self.roots: list[tuple[str, _Tok]] = []
        self.decls: list[tuple[Node, _Tok, list[_Tok]]] = []

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> _Tok:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            want = what or (repr(text) if text else kind.lower())
            got = "end of input" if t.kind == "EOF" else repr(t.text)
            raise _Syntax(t, f"expected {want}, found {got}")
        return self.advance()

    def parse(self) -> None:
        try:
            self.expect("IDENT", "tree")
            self.name = self.expect("IDENT", what="tree name").text
            self.expect("PUNCT", "{")
        except _Syntax as e:
            self.error(e)
            return
        while True:
            t = self.tok
            if t.kind == "PUNCT" and t.text == "}":
                self.advance()
                break
            if t.kind == "EOF":
                self.errors.append(ParseError(t.span, "missing closing '}'", SYNTAX))
                return
            try:
                self.decl()
            except _Syntax as e:
                self.error(e)
                self.recover()
        if self.tok.kind != "EOF":
            self.errors.append(ParseError(self.tok.span, f"unexpected {self.tok.text!r} after model", SYNTAX))

    def error(self, e: _Syntax) -> None:
        self.errors.append(ParseError(e.tok.span, e.message, SYNTAX))

    def recover(self) -> None:
        if self.tok.kind != "EOF":
            self.advance()
        while self.tok.kind != "EOF":
            t = self.tok
            if t.kind == "IDENT" and t.text in self.DECL_WORDS:
                return
            if t.kind == "PUNCT" and t.text == "}":
                return
            self.advance()

    def label(self, default: str) -> str:
        if self.tok.kind == "STRING":
            return self.advance().text
        return default

    def decl(self) -> None:
        kw = self.expect("IDENT", what="'root', 'gate' or 'leaf'")
        if kw.text == "root":
            t = self.expect("IDENT", what="node id")
            self.roots.append((t.text, t))
        elif kw.text == "gate":
            idt = self.expect("IDENT", what="node id")
            label = self.label(idt.text)
            self.expect("PUNCT", "=")
            kt = self.expect("IDENT", what="gate kind")
            if kt.text not in GateKind.__members__:
                raise _Syntax(kt, f"unknown gate kind {kt.text!r} (expected OR, AND or SAND)")
            self.expect("PUNCT", "(")
            kids = [self.expect("IDENT", what="child id")]
            while self.tok.kind == "PUNCT" and self.tok.text == ",":
                self.advance()
                kids.append(self.expect("IDENT", what="child id"))
            self.expect("PUNCT", ")")
            node = Node.make_gate(idt.text, kt.text, [k.text for k in kids], label)
            self.decls.append((node, idt, kids))
        elif kw.text == "leaf":
            idt = self.expect("IDENT", what="node id")
            label = self.label(idt.text)
            self.expect("IDENT", "rate")
            self.expect("PUNCT", "=")
            num = self.expect("NUMBER", what="decimal rate")
            rate = float(num.text)
            if not math.isfinite(rate):
                raise _Syntax(num, f"rate {num.text!r} is not finite")
            self.decls.append((Node.leaf(idt.text, rate, label), idt, []))
        else:
            raise _Syntax(kw, f"expected 'root', 'gate' or 'leaf', found {kw.text!r}")


def _parse_dsl(text: str) -> AttackTree:
    errors: list[ParseError] = []
    toks = _lex(text, errors)
    p = _DslParser(toks, errors)
    p.parse()

    nodes: dict[str, Node] = {}
    where: dict[str, _Tok] = {}
    for node, idt, _ in p.decls:
        if node.id in nodes:
            errors.append(ParseError(idt.span, f"node {node.id!r} already declared at {where[node.id].span}",
                                     DUPLICATE))
            continue
        nodes[node.id] = node
        where[node.id] = idt
    for node, _, kids in p.decls:
        for k in kids:
            if k.text not in nodes:
                errors.append(ParseError(k.span, f"reference to undeclared node {k.text!r}", REFERENCE))

    top = None
    if not p.roots:
        if not any(e.kind == SYNTAX for e in errors):
            errors.append(ParseError(toks[-1].span, "missing root declaration", SYNTAX))
    else:
        top, top_tok = p.roots[0]
        for _, t in p.roots[1:]:
            errors.append(ParseError(t.span, "more than one root declaration", DUPLICATE))
        if top not in nodes:
            errors.append(ParseError(top_tok.span, f"root refers to undeclared node {top!r}", REFERENCE))

    if errors:
        raise ModelParseError(errors)
    tree = AttackTree(name=p.name, top_event=top, nodes=nodes)
    _structural_errors(tree, lambda nid: where[nid].span if nid in where else toks[-1].span)
    return tree


_RULE_KIND = {"SandArity": SYNTAX, "EmptyGate": SYNTAX, "BadRate": SYNTAX, "DuplicateChild": DUPLICATE}


def _structural_errors(tree: AttackTree, span_of) -> None:
    errs = [ParseError(span_of(v.node), f"{v.rule}: {v.message}", _RULE_KIND.get(v.rule, REFERENCE))
            for v in validate_tree(tree)]
    if errs:
        raise ModelParseError(errs)


def _json_span(text: str, needle: str | None) -> SourceSpan:
    if needle:
        idx = text.find(json.dumps(needle))
        if idx >= 0:
            line = text.count("\n", 0, idx) + 1
            col = idx - (text.rfind("\n", 0, idx) + 1) + 1
            return SourceSpan(line, col, len(json.dumps(needle)))
    return SourceSpan(1, 1, 0)


def _load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelParseError([ParseError(SourceSpan(e.lineno, e.colno, 1), e.msg, SYNTAX)]) from None
    except RecursionError:
        raise ModelParseError([ParseError(SourceSpan(1, 1, 0), "document nested too deeply", SYNTAX)]) from None


def _parse_json(text: str) -> AttackTree:
    doc = _load_json(text)
    errors: list[ParseError] = []

    def err(msg, needle=None, kind=SYNTAX):
        errors.append(ParseError(_json_span(text, needle), msg, kind))

    if not isinstance(doc, dict):
        raise ModelParseError([ParseError(SourceSpan(1, 1, 0), "model must be a JSON object", SYNTAX)])
    name, top, raw = doc.get("name", ""), doc.get("top_event"), doc.get("nodes")
    if not isinstance(name, str):
        err("'name' must be a string", "name")
    if not isinstance(top, str):
        err("missing or non-string 'top_event'", "top_event")
    if not isinstance(raw, dict):
        err("missing or non-object 'nodes'", "nodes")
        raise ModelParseError(errors)
    nodes: dict[str, Node] = {}
    for nid, spec in raw.items():
        if not isinstance(spec, dict):
            err(f"node {nid!r} must be an object", nid)
            continue
        label = spec.get("label", nid)
        if not isinstance(label, str):
            err(f"node {nid!r}: label must be a string", nid)
            label = nid
        if ("gate" in spec) == ("leaf" in spec):
            err(f"node {nid!r} needs exactly one of 'gate' or 'leaf'", nid)
            continue
        if "gate" in spec:
            g = spec["gate"]
            kind = g.get("kind") if isinstance(g, dict) else None
            kids = g.get("children") if isinstance(g, dict) else None
            if kind not in GateKind.__members__:
                err(f"node {nid!r}: unknown gate kind {kind!r}", nid)
                continue
            if not isinstance(kids, list) or not all(isinstance(k, str) for k in kids):
                err(f"node {nid!r}: children must be a list of ids", nid)
                continue
            nodes[nid] = Node.make_gate(nid, kind, kids, label)
        else:
            lf = spec["leaf"]
            rate = lf.get("rate") if isinstance(lf, dict) else None
            if isinstance(rate, bool) or not isinstance(rate, (int, float)) or not math.isfinite(rate):
                err(f"node {nid!r}: leaf rate must be a finite number", nid)
                continue
            nodes[nid] = Node.leaf(nid, rate, label)
    for n in nodes.values():
        for c in n.children:
            if c not in nodes and c not in raw:
                err(f"reference to undeclared node {c!r}", c, REFERENCE)
    if isinstance(top, str) and top not in raw:
        err(f"top_event refers to undeclared node {top!r}", top, REFERENCE)
    if errors:
        raise ModelParseError(errors)
    tree = AttackTree(name=name, top_event=top, nodes=nodes)
    _structural_errors(tree, lambda nid: _json_span(text, nid))
    return tree


def parse_model(text: str | bytes, fmt: str | None = None) -> AttackTree:
    """Parse a DSL or JSON model; ``fmt`` is ``"dsl"``, ``"json"`` or None to sniff.

    Raises ModelParseError listing every problem found.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ModelParseError([ParseError(SourceSpan(1, e.start + 1, 1),
                                              "document is not valid UTF-8", LEXICAL)]) from None
    if text.startswith("﻿"):
        text = text[1:]
    if fmt is None:
        fmt = "json" if text.lstrip().startswith("{") else "dsl"
    if fmt == "json":
        return _parse_json(text)
    if fmt == "dsl":
        return _parse_dsl(text)
    raise ValueError(f"unknown model format {fmt!r}")


def _fmt_rate(rate: float) -> str:
    s = repr(float(rate))
    if "e" in s or "E" in s:
        s = format(rate, ".17f").rstrip("0")
        if s.endswith("."):
            s += "0"
    return s


def _ident_ok(s: str) -> bool:
    return re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", s) is not None


def _dsl_lines(tree: AttackTree) -> Iterator[str]:
    yield f"tree {tree.name or 'T'} {{"
    yield f"  root {tree.top_event}"
    for n in tree.nodes.values():
        label = f' "{n.label}"' if n.label != n.id else ""
        if n.is_leaf:
            yield f"  leaf {n.id}{label} rate={_fmt_rate(n.rate)}"
        else:
            yield f"  gate {n.id}{label} = {n.gate.value}({', '.join(n.children)})"
    yield "}"


def serialize_model(tree: AttackTree, fmt: str = "dsl") -> str:
    """Render a tree. Node order is declaration order in both formats."""
    if fmt == "json":
        nodes = {}
        for n in tree.nodes.values():
            body: dict = {"label": n.label}
            if n.is_leaf:
                body["leaf"] = {"rate": n.rate}
            else:
                body["gate"] = {"kind": n.gate.value, "children": list(n.children)}
            nodes[n.id] = body
        return json.dumps({"name": tree.name, "top_event": tree.top_event, "nodes": nodes}, indent=2) + "\n"
    if fmt != "dsl":
        raise ValueError(f"unknown model format {fmt!r}")
    for nid in [tree.name or "T", *tree.nodes]:
        if not _ident_ok(nid):
            raise ValueError(f"{nid!r} is not representable as a DSL identifier")
    for n in tree.nodes.values():
        if '"' in n.label or "\n" in n.label:
            raise ValueError(f"label of {n.id!r} cannot be written in the DSL")
    return "\n".join(_dsl_lines(tree)) + "\n"


def parse_scenarios(text: str, tree: AttackTree) -> list[ScenarioSpec]:
    """Parse ``{"cold": K, "scenarios": [{"name": ..., "hot": [...]}, ...]}``."""
    doc = _load_json(text)
    errors: list[ParseError] = []

    def err(msg, needle=None, kind=SYNTAX):
        errors.append(ParseError(_json_span(text, needle), msg, kind))

    if not isinstance(doc, dict):
        raise ModelParseError([ParseError(SourceSpan(1, 1, 0), "scenario file must be a JSON object", SYNTAX)])
    cold = doc.get("cold", DEFAULT_COLD_RATE)
    if isinstance(cold, bool) or not isinstance(cold, (int, float)) or not (math.isfinite(cold) and cold > 0):
        err(f"cold rate must be a positive number, got {cold!r}", "cold")
    items = doc.get("scenarios", [])
    if not isinstance(items, list):
        err("'scenarios' must be a list", "scenarios")
        items = []
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, dict) or not isinstance(item.get("hot", []), list):
            err(f"scenario #{i + 1} must be an object with a 'hot' list", "scenarios")
            continue
        name = item.get("name", f"S{i + 1}")
        hot = item.get("hot", [])
        ok = True
        for h in hot:
            if not isinstance(h, str) or h not in tree.nodes:
                err(f"scenario {name!r}: unknown node {h!r}", h if isinstance(h, str) else None, REFERENCE)
                ok = False
            elif not tree.nodes[h].is_leaf:
                err(f"scenario {name!r}: {h!r} is a gate, not a leaf", h, REFERENCE)
                ok = False
        if ok and not errors:
            out.append(ScenarioSpec(str(name), frozenset(hot), float(cold)))
    if errors:
        raise ModelParseError(errors)
    return out


def dump_scenarios(scenarios: list[ScenarioSpec], cold: float | None = None) -> str:
    if cold is None:
        cold = scenarios[0].cold_rate if scenarios else DEFAULT_COLD_RATE
    doc = {"cold": cold, "scenarios": [{"name": s.name, "hot": sorted(s.hot)} for s in scenarios]}
    return json.dumps(doc, indent=2) + "\n"
