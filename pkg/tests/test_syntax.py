import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ccgraph.syntax import (
    Assign, Binary, Call, LexError, Literal, Name, ParseError, Return, Unary,
    lex, parse_snippet, parse_source,
)


def kinds_and_texts(src):
    return [(t.kind, t.text) for t in lex(src)]


def test_lex_simple_declaration():
    assert kinds_and_texts("int x = 1;") == [
        ("keyword", "int"), ("identifier", "x"), ("operator", "="), ("literal", "1"), ("punctuation", ";"),
    ]


def test_lex_empty():
    assert lex("") == []


def test_lex_drops_line_comment():
    toks = lex("a.b(c) // note")
    assert len(toks) == 6
    assert "note" not in [t.text for t in toks]


def test_lex_positions_are_one_based():
    toks = lex("int a;\n  a = 2;")
    assert (toks[0].line, toks[0].column) == (1, 1)
    second_a = toks[3]
    assert (second_a.text, second_a.line, second_a.column) == ("a", 2, 3)


def test_lex_longest_operator_match():
    assert [t.text for t in lex("a >>>= b >= c")] == ["a", ">>>=", "b", ">=", "c"]


@pytest.mark.parametrize("src", ['"abc', "/* open", "x # y", "'c"])
def test_lex_errors(src):
    with pytest.raises(LexError):
        lex(src)


def test_lex_error_reports_position():
    with pytest.raises(LexError) as info:
        lex("int a;\nint b = @#;")
    assert (info.value.line, info.value.column) == (2, 10)


_token = st.sampled_from(["x", "foo1", "42", "3.5", '"s t"', "'c'", "+", "==", "(", ")", ";", "int", "return", "."])


@given(st.lists(st.tuples(_token, st.sampled_from([" ", "\n", "\t", "  ", " /* c */ "])), max_size=30))
def test_lex_preserves_non_whitespace(parts):
    src = "".join(tok + sep for tok, sep in parts)
    no_comments = re.sub(r"/\*.*?\*/", "", src)
    strip = lambda s: re.sub(r"\s", "", s)
    assert strip("".join(t.text for t in lex(src))) == strip(no_comments)


def test_parse_minimal_method():
    snip = parse_snippet(lex("public int f() { return 1; }"))
    assert snip.imports == ()
    assert snip.method.name == "f"
    assert snip.method.params == ()
    assert snip.method.body == (Return(Literal("1")),)


def test_parse_import_and_param():
    snip = parse_source("import java.util.List; public int g(List xs) { return 0; }")
    assert snip.imports == ("java.util.List",)
    assert snip.method.params == (("List", "xs"),)


def test_generic_arguments_are_stripped():
    snip = parse_source("Map<String, List<Integer>> f(Map<K, V> m) { return m; }")
    assert snip.method.return_type == "Map"
    assert snip.method.params == (("Map", "m"),)


def test_compound_assignment_desugars():
    body = parse_source("void f(int a) { a += 2; }").method.body
    assert body == (Assign("a", Binary("+", Name("a"), Literal("2"))),)


def test_postfix_increment():
    stmt = parse_source("void f(int i) { i++; }").method.body[0]
    assert stmt.expr == Unary("post++", Name("i"))


def test_precedence():
    ret = parse_source("int f(int a, int b) { return a + b * g(a); }").method.body[0]
    assert ret.value == Binary("+", Name("a"), Binary("*", Name("b"), Call(None, "g", (Name("a"),))))


@pytest.mark.parametrize(
    "src",
    [
        "class A {}",
        "int f() { Runnable r = () -> 1; }",
        "@Foo(1) int f() {}",
        "int f() {} int g() {}",
        "import java.util.*; int f() {}",
        "int f() { for (String s : xs) {} }",
        "int f() { int[] a = new int[3]; }",
        "int f() { Object o = new Object() { }; }",
        "int f() { try { g(); } finally { h(); } }",
        "int f() { { g(); } }",
        "",
    ],
)
def test_unsupported_constructs(src):
    with pytest.raises(ParseError):
        parse_source(src)


def test_parse_error_fields():
    with pytest.raises(ParseError) as info:
        parse_source("int f( {")
    err = info.value
    assert (err.line, err.column) == (1, 8)
    assert err.found == "{"
