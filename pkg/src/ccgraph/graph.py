"""Concept graphs of identifiers extracted from a parsed snippet.

Nodes are ``(name, kind)`` pairs; edges are typed relations between them.
Graphs are immutable values. ``canonicalize`` fixes node ids and edge order
so that serialization is byte-deterministic.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional

from .syntax import (
    Assign,
    Binary,
    Call,
    ExprStmt,
    FieldAccess,
    For,
    If,
    Name,
    New,
    Return,
    Snippet,
    Try,
    Unary,
    VarDecl,
    While,
    base_type,
    simple_name,
)


class NodeKind(str, Enum):
    METHOD_NAME = "method_name"
    PARAMETER = "parameter"
    IMPORT = "import"
    VARIABLE = "variable"
    CALL = "call"


class RelationKind(str, Enum):
    DEPENDS_ON = "dependsOn"
    DEFINES = "defines"
    CALLS = "calls"
    HAS_PARAMETER = "hasParameter"
    INVOKES = "invokes"
    RECEIVES = "receives"
    TAKES_ARGUMENT = "takesArgument"
    OF_TYPE = "ofType"
    READS = "reads"


NODE_KINDS = tuple(NodeKind)
RELATION_KINDS = tuple(RelationKind)
_NODE_ORDER = {k: i for i, k in enumerate(NODE_KINDS)}
_REL_ORDER = {k: i for i, k in enumerate(RELATION_KINDS)}

_M, _P, _I, _V, _C = NODE_KINDS
# allowed (source kinds, target kinds) per relation
ENDPOINT_KINDS: dict[RelationKind, tuple[frozenset, frozenset]] = {
    RelationKind.DEPENDS_ON: (frozenset({_M}), frozenset({_I})),
    RelationKind.DEFINES: (frozenset({_M}), frozenset({_V})),
    RelationKind.CALLS: (frozenset({_V}), frozenset({_C})),
    RelationKind.HAS_PARAMETER: (frozenset({_M}), frozenset({_P})),
    RelationKind.INVOKES: (frozenset({_M}), frozenset({_C})),
    RelationKind.RECEIVES: (frozenset({_C}), frozenset({_V, _P})),
    RelationKind.TAKES_ARGUMENT: (frozenset({_C}), frozenset({_V, _P})),
    RelationKind.OF_TYPE: (frozenset({_V, _P}), frozenset({_I})),
    RelationKind.READS: (frozenset({_V}), frozenset({_V, _P})),
}


class SchemaError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Identifier:
    name: str
    kind: NodeKind


@dataclass(frozen=True)
class Edge:
    src: int
    kind: RelationKind
    dst: int


@dataclass(frozen=True)
class ConceptGraph:
    """Node ``i`` is ``nodes[i]``; edges reference nodes by position."""

    nodes: tuple[Identifier, ...]
    edges: tuple[Edge, ...] = ()

    def node_id(self, name: str, kind: NodeKind) -> int:
        return self.nodes.index(Identifier(name, kind))


@dataclass
class GraphStats:
    node_count: int = 0
    edge_count: int = 0
    nodes_by_kind: dict = field(default_factory=dict)
    edges_by_kind: dict = field(default_factory=dict)

    def __add__(self, other: "GraphStats") -> "GraphStats":
        nk = Counter(self.nodes_by_kind)
        nk.update(other.nodes_by_kind)
        ek = Counter(self.edges_by_kind)
        ek.update(other.edges_by_kind)
        return GraphStats(
            self.node_count + other.node_count,
            self.edge_count + other.edge_count,
            {k.value: nk.get(k.value, 0) for k in NODE_KINDS},
            {k.value: ek.get(k.value, 0) for k in RELATION_KINDS},
        )

    def to_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "edge_count": self.edge_count,
            "nodes_by_kind": dict(self.nodes_by_kind),
            "edges_by_kind": dict(self.edges_by_kind),
        }


# --- AST walking helpers ----------------------------------------------------


def _statements(block) -> Iterator:
    """All statements in ``block``, nested ones included, in source order."""
    for stmt in block:
        yield stmt
        if isinstance(stmt, If):
            yield from _statements(stmt.then)
            if stmt.orelse is not None:
                yield from _statements(stmt.orelse)
        elif isinstance(stmt, While):
            yield from _statements(stmt.body)
        elif isinstance(stmt, For):
            if stmt.init is not None:
                yield from _statements((stmt.init,))
            if stmt.update is not None:
                yield from _statements((stmt.update,))
            yield from _statements(stmt.body)
        elif isinstance(stmt, Try):
            yield from _statements(stmt.body)
            if stmt.catch is not None:
                yield from _statements(stmt.catch.body)


def _statement_exprs(stmt) -> list:
    if isinstance(stmt, VarDecl):
        return [stmt.init] if stmt.init is not None else []
    if isinstance(stmt, Assign):
        return [stmt.rhs]
    if isinstance(stmt, ExprStmt):
        return [stmt.expr]
    if isinstance(stmt, Return):
        return [stmt.value] if stmt.value is not None else []
    if isinstance(stmt, (If, While)):
        return [stmt.cond]
    if isinstance(stmt, For):
        return [stmt.cond] if stmt.cond is not None else []
    return []


def _subexprs(expr) -> Iterator:
    """Pre-order walk over every sub-expression."""
    yield expr
    if isinstance(expr, Call):
        if expr.receiver is not None:
            yield from _subexprs(expr.receiver)
        for a in expr.args:
            yield from _subexprs(a)
    elif isinstance(expr, New):
        for a in expr.args:
            yield from _subexprs(a)
    elif isinstance(expr, FieldAccess):
        yield from _subexprs(expr.receiver)
    elif isinstance(expr, Binary):
        yield from _subexprs(expr.left)
        yield from _subexprs(expr.right)
    elif isinstance(expr, Unary):
        yield from _subexprs(expr.operand)


def _names_outside_calls(expr) -> Iterator[str]:
    """Names in ``expr`` not owned by a call (receiver or arguments)."""
    if isinstance(expr, Name):
        yield expr.name
    elif isinstance(expr, FieldAccess):
        yield from _names_outside_calls(expr.receiver)
    elif isinstance(expr, Binary):
        yield from _names_outside_calls(expr.left)
        yield from _names_outside_calls(expr.right)
    elif isinstance(expr, Unary):
        yield from _names_outside_calls(expr.operand)


def _calls_in(expr) -> Iterator:
    return (e for e in _subexprs(expr) if isinstance(e, (Call, New)))


def _callee(expr) -> str:
    return expr.callee if isinstance(expr, Call) else base_type(expr.type_name)


def _receiver_head(expr) -> Optional[str]:
    while isinstance(expr, FieldAccess):
        expr = expr.receiver
    return expr.name if isinstance(expr, Name) else None


# --- extraction -------------------------------------------------------------


@dataclass
class _Scan:
    method: str
    params: list  # (type, name)
    variables: list  # (type, name) in declaration order
    callees: list
    referenced: set
    imports: list  # retained simple names


def _scan(snippet: Snippet) -> _Scan:
    m = snippet.method
    params = list(m.params)
    variables = []
    callees = []
    referenced = {base_type(t) for t, _ in params} | {base_type(m.return_type)}
    for stmt in _statements(m.body):
        if isinstance(stmt, VarDecl):
            variables.append((stmt.type_name, stmt.var_name))
            referenced.add(base_type(stmt.type_name))
        elif isinstance(stmt, Try) and stmt.catch is not None:
            variables.append((stmt.catch.type_name, stmt.catch.var_name))
            referenced.add(base_type(stmt.catch.type_name))
        for expr in _statement_exprs(stmt):
            for e in _subexprs(expr):
                if isinstance(e, Name):
                    referenced.add(e.name)
                elif isinstance(e, (Call, New)):
                    callees.append(_callee(e))
                    if isinstance(e, New):
                        referenced.add(base_type(e.type_name))
    imports = []
    for q in snippet.imports:
        s = simple_name(q)
        if s in referenced and s not in imports:
            imports.append(s)
    return _Scan(m.name, params, variables, callees, referenced, imports)


def _dedup(items: Iterable) -> list:
    return list(dict.fromkeys(items))


def extract_identifiers(snippet: Snippet) -> list[Identifier]:
    """Method name, parameters, referenced imports, variables and callees."""
    s = _scan(snippet)
    ids = [Identifier(s.method, NodeKind.METHOD_NAME)]
    ids += [Identifier(n, NodeKind.PARAMETER) for _, n in s.params]
    ids += [Identifier(n, NodeKind.IMPORT) for n in s.imports]
    ids += [Identifier(n, NodeKind.VARIABLE) for _, n in s.variables]
    ids += [Identifier(n, NodeKind.CALL) for n in s.callees]
    return _dedup(ids)


def extract_graph(snippet: Snippet) -> ConceptGraph:
    """Build the canonical concept graph of ``snippet``."""
    s = _scan(snippet)
    nodes = extract_identifiers(snippet)
    index = {ident: i for i, ident in enumerate(nodes)}
    var_names = {n for _, n in s.variables}
    param_names = {n for _, n in s.params}
    imports = set(s.imports)

    def node(name, kind):
        return index[Identifier(name, kind)]

    def resolve(name) -> Optional[int]:
        if name in var_names:
            return node(name, NodeKind.VARIABLE)
        if name in param_names:
            return node(name, NodeKind.PARAMETER)
        return None

    edges = []
    R = RelationKind
    method = node(s.method, NodeKind.METHOD_NAME)
    for imp in s.imports:
        edges.append((method, R.DEPENDS_ON, node(imp, NodeKind.IMPORT)))
    for _, v in s.variables:
        edges.append((method, R.DEFINES, node(v, NodeKind.VARIABLE)))
    for _, p in s.params:
        edges.append((method, R.HAS_PARAMETER, node(p, NodeKind.PARAMETER)))
    for c in s.callees:
        edges.append((method, R.INVOKES, node(c, NodeKind.CALL)))
    for t, p in s.params:
        if base_type(t) in imports:
            edges.append((node(p, NodeKind.PARAMETER), R.OF_TYPE, node(base_type(t), NodeKind.IMPORT)))
    for t, v in s.variables:
        if base_type(t) in imports:
            edges.append((node(v, NodeKind.VARIABLE), R.OF_TYPE, node(base_type(t), NodeKind.IMPORT)))

    for stmt in _statements(snippet.method.body):
        for expr in _statement_exprs(stmt):
            for call in _calls_in(expr):
                c = node(_callee(call), NodeKind.CALL)
                if isinstance(call, Call) and call.receiver is not None:
                    head = _receiver_head(call.receiver)
                    target = resolve(head) if head is not None else None
                    if target is not None:
                        edges.append((c, R.RECEIVES, target))
                for arg in call.args:
                    for name in _names_outside_calls(arg):
                        target = resolve(name)
                        if target is not None:
                            edges.append((c, R.TAKES_ARGUMENT, target))
        if isinstance(stmt, VarDecl):
            lhs, rhs = stmt.var_name, stmt.init
        elif isinstance(stmt, Assign):
            lhs, rhs = stmt.target_name, stmt.rhs
        else:
            continue
        if rhs is None or lhs not in var_names:
            continue
        v = node(lhs, NodeKind.VARIABLE)
        for call in _calls_in(rhs):
            edges.append((v, R.CALLS, node(_callee(call), NodeKind.CALL)))
        for name in _names_outside_calls(rhs):
            target = resolve(name)
            if target is not None:
                edges.append((v, R.READS, target))

    edge_set = {Edge(a, k, b) for a, k, b in edges if a != b}
    return canonicalize(ConceptGraph(tuple(nodes), tuple(edge_set)))


# --- validation, canonical form, serialization ------------------------------


def validate(graph: ConceptGraph) -> list[str]:
    """Return human-readable invariant violations; empty means valid."""
    problems = []
    n = len(graph.nodes)
    seen_nodes = set()
    for i, ident in enumerate(graph.nodes):
        if not ident.name:
            problems.append(f"node {i} has an empty name")
        if ident in seen_nodes:
            problems.append(f"node {i} duplicates ({ident.name}, {ident.kind.value})")
        seen_nodes.add(ident)
    methods = sum(1 for ident in graph.nodes if ident.kind == NodeKind.METHOD_NAME)
    if methods != 1:
        problems.append(f"expected exactly one method_name node, found {methods}")
    seen_edges = set()
    for e in graph.edges:
        label = f"{e.kind.value}({e.src}->{e.dst})"
        if e in seen_edges:
            problems.append(f"duplicate edge {label}")
        seen_edges.add(e)
        if not (0 <= e.src < n and 0 <= e.dst < n):
            problems.append(f"edge {label} references a missing node")
            continue
        if e.src == e.dst:
            problems.append(f"self-loop {label}")
        src_kinds, dst_kinds = ENDPOINT_KINDS[e.kind]
        sk, dk = graph.nodes[e.src].kind, graph.nodes[e.dst].kind
        if sk not in src_kinds or dk not in dst_kinds:
            problems.append(f"edge {label} connects {sk.value} to {dk.value}")
    return problems


def canonicalize(graph: ConceptGraph) -> ConceptGraph:
    order = sorted(range(len(graph.nodes)), key=lambda i: (_NODE_ORDER[graph.nodes[i].kind], graph.nodes[i].name))
    new_id = {old: new for new, old in enumerate(order)}
    nodes = tuple(graph.nodes[i] for i in order)
    edges = sorted(
        {Edge(new_id[e.src], e.kind, new_id[e.dst]) for e in graph.edges},
        key=lambda e: (e.src, _REL_ORDER[e.kind], e.dst),
    )
    return ConceptGraph(nodes, tuple(edges))


def graph_to_dict(graph: ConceptGraph) -> dict:
    return {
        "nodes": [{"id": i, "name": n.name, "kind": n.kind.value} for i, n in enumerate(graph.nodes)],
        "edges": [{"src": e.src, "kind": e.kind.value, "dst": e.dst} for e in graph.edges],
    }


def graph_to_json(graph: ConceptGraph) -> str:
    return json.dumps(graph_to_dict(graph), separators=(",", ":"), ensure_ascii=False)


def graph_from_dict(doc) -> ConceptGraph:
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise SchemaError("graph document needs 'nodes' and 'edges'")
    nodes = []
    for i, item in enumerate(doc["nodes"]):
        try:
            nid, name, kind = item["id"], item["name"], item["kind"]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"node {i}: missing field {exc}") from None
        if nid != i or isinstance(nid, bool):
            raise SchemaError(f"node ids must be dense and sorted; got {nid!r} at position {i}")
        if not isinstance(name, str) or not name:
            raise SchemaError(f"node {i}: name must be a non-empty string")
        try:
            nodes.append(Identifier(name, NodeKind(kind)))
        except ValueError:
            raise SchemaError(f"node {i}: unknown kind {kind!r}") from None
    edges = []
    for j, item in enumerate(doc["edges"]):
        try:
            src, kind, dst = item["src"], item["kind"], item["dst"]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"edge {j}: missing field {exc}") from None
        try:
            rel = RelationKind(kind)
        except ValueError:
            raise SchemaError(f"edge {j}: unknown kind {kind!r}") from None
        for end in (src, dst):
            if not isinstance(end, int) or isinstance(end, bool) or not 0 <= end < len(nodes):
                raise SchemaError(f"edge {j}: endpoint {end!r} is not a node id")
        edges.append(Edge(src, rel, dst))
    return ConceptGraph(tuple(nodes), tuple(edges))


def graph_from_json(text: str) -> ConceptGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not JSON: {exc}") from None
    return graph_from_dict(doc)


def stats(graph: ConceptGraph) -> GraphStats:
    nk = Counter(n.kind for n in graph.nodes)
    ek = Counter(e.kind for e in graph.edges)
    return GraphStats(
        len(graph.nodes),
        len(graph.edges),
        {k.value: nk.get(k, 0) for k in NODE_KINDS},
        {k.value: ek.get(k, 0) for k in RELATION_KINDS},
    )
