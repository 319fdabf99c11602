import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccgraph.graph import (
    ENDPOINT_KINDS, NODE_KINDS, RELATION_KINDS, ConceptGraph, Edge, Identifier, NodeKind, RelationKind,
    SchemaError, canonicalize, extract_graph, extract_identifiers, graph_from_json, graph_to_json, stats, validate,
)
from ccgraph.syntax import parse_source
from graph_oracle import expected_json

from conftest import FIXTURES

SNIPPETS = sorted((FIXTURES / "graphs").glob("*.java"))


def graph_of(path):
    return extract_graph(parse_source(path.read_text()))


def test_fixture_count():
    assert len(SNIPPETS) >= 20


@pytest.mark.parametrize("snippet", SNIPPETS, ids=lambda p: p.stem)
def test_fixture_matches_hand_oracle(snippet):
    assert graph_to_json(graph_of(snippet)) == expected_json(snippet.with_suffix(".expected"))


@pytest.mark.parametrize("snippet", SNIPPETS, ids=lambda p: p.stem)
def test_fixture_graphs_validate(snippet):
    assert validate(graph_of(snippet)) == []


def test_sum_sizes_literal_document():
    expected = (FIXTURES / "f1_sum_sizes.json").read_text().strip()
    g = graph_of(FIXTURES / "graphs" / "f01_sum_sizes.java")
    assert graph_to_json(g) == expected
    assert (len(g.nodes), len(g.edges)) == (7, 11)
    assert g.nodes[0] == Identifier("sumSizes", NodeKind.METHOD_NAME)


def test_sum_sizes_identifiers():
    snip = parse_source((FIXTURES / "graphs" / "f01_sum_sizes.java").read_text())
    got = {(i.name, i.kind.value) for i in extract_identifiers(snip)}
    assert got == {
        ("sumSizes", "method_name"), ("items", "parameter"), ("offset", "parameter"), ("List", "import"),
        ("total", "variable"), ("n", "variable"), ("size", "call"),
    }


def test_minimal_method():
    snip = parse_source("void f() { }")
    assert extract_identifiers(snip) == [Identifier("f", NodeKind.METHOD_NAME)]
    g = extract_graph(snip)
    assert graph_to_json(g) == '{"nodes":[{"id":0,"name":"f","kind":"method_name"}],"edges":[]}'
    s = stats(g)
    assert (s.node_count, s.edge_count) == (1, 0)


def test_identity_method():
    g = extract_graph(parse_source("int h(int a){ return a; }"))
    assert [(n.name, n.kind.value) for n in g.nodes] == [("h", "method_name"), ("a", "parameter")]
    assert g.edges == (Edge(0, RelationKind.HAS_PARAMETER, 1),)


def test_unreferenced_import_absent():
    snip = parse_source("import java.io.File; int f(int x) { return x; }")
    assert "File" not in [i.name for i in extract_identifiers(snip)]


def test_sum_sizes_stats():
    s = stats(graph_of(FIXTURES / "graphs" / "f01_sum_sizes.java"))
    assert (s.node_count, s.edge_count) == (7, 11)
    assert s.edges_by_kind["reads"] == 2


def test_validate_wrong_endpoint_kind():
    g = ConceptGraph(
        (Identifier("f", NodeKind.METHOD_NAME), Identifier("a", NodeKind.VARIABLE), Identifier("b", NodeKind.VARIABLE)),
        (Edge(1, RelationKind.DEFINES, 2),),
    )
    problems = validate(g)
    assert len(problems) == 1 and "defines(1->2)" in problems[0]


def test_validate_dangling_edge():
    g = ConceptGraph((Identifier("f", NodeKind.METHOD_NAME),), (Edge(0, RelationKind.DEPENDS_ON, 5),))
    assert len(validate(g)) == 1


def test_schema_errors():
    with pytest.raises(SchemaError):
        graph_from_json('{"nodes":[{"id":0,"name":"f","kind":"method_name"}],"edges":[{"src":0,"kind":"flies","dst":0}]}')
    with pytest.raises(SchemaError):
        graph_from_json('{"nodes":[{"id":1,"name":"f","kind":"method_name"}],"edges":[]}')
    with pytest.raises(SchemaError):
        graph_from_json('{"nodes":[]}')
    with pytest.raises(SchemaError):
        graph_from_json("not json")


# --- random graphs ---------------------------------------------------------------


@st.composite
def valid_graphs(draw):
    names = st.text("abcxyz", min_size=1, max_size=3)
    nodes = [Identifier("m", NodeKind.METHOD_NAME)]
    for kind in NODE_KINDS[1:]:
        for name in draw(st.lists(names, max_size=4, unique=True)):
            nodes.append(Identifier(name, kind))
    by_kind = {k: [i for i, n in enumerate(nodes) if n.kind == k] for k in NODE_KINDS}
    edges = set()
    for _ in range(draw(st.integers(0, 15))):
        rel = draw(st.sampled_from(RELATION_KINDS))
        src_kinds, dst_kinds = ENDPOINT_KINDS[rel]
        srcs = [i for k in src_kinds for i in by_kind[k]]
        dsts = [i for k in dst_kinds for i in by_kind[k]]
        if srcs and dsts:
            s, d = draw(st.sampled_from(srcs)), draw(st.sampled_from(dsts))
            if s != d:
                edges.add(Edge(s, rel, d))
    return ConceptGraph(tuple(nodes), tuple(edges))


def permute(g, seed):
    order = list(range(len(g.nodes)))
    random.Random(seed).shuffle(order)
    pos = {old: new for new, old in enumerate(order)}
    edges = [Edge(pos[e.src], e.kind, pos[e.dst]) for e in g.edges]
    random.Random(seed + 1).shuffle(edges)
    return ConceptGraph(tuple(g.nodes[i] for i in order), tuple(edges))


@settings(max_examples=60)
@given(valid_graphs(), st.integers(0, 10_000))
def test_canonical_form_ignores_ids(g, seed):
    assert canonicalize(permute(g, seed)) == canonicalize(g)


@settings(max_examples=60)
@given(valid_graphs())
def test_canonicalize_idempotent_and_round_trip(g):
    c = canonicalize(g)
    assert canonicalize(c) == c
    assert validate(c) == []
    text = graph_to_json(c)
    assert graph_from_json(text) == c
    assert graph_to_json(graph_from_json(text)) == text


@settings(max_examples=60)
@given(valid_graphs())
def test_stats_kind_sums(g):
    s = stats(g)
    assert sum(s.nodes_by_kind.values()) == s.node_count == len(g.nodes)
    assert sum(s.edges_by_kind.values()) == s.edge_count == len(g.edges)
    assert json.loads(json.dumps(s.to_dict())) == s.to_dict()
