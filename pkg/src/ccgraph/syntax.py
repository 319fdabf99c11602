"""Lexer and recursive-descent parser for a method-level Java subset.

A snippet is a run of leading ``import a.b.C;`` lines followed by exactly one
method declaration. Anything outside the supported statement/expression set
raises :class:`ParseError` so callers can count and skip the record.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

KEYWORDS = frozenset(
    """
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while
    """.split()
)
LITERAL_WORDS = frozenset({"true", "false", "null"})
PRIMITIVES = frozenset({"boolean", "byte", "char", "short", "int", "long", "float", "double"})
MODIFIERS = frozenset(
    {"public", "private", "protected", "static", "final", "synchronized", "abstract", "native", "strictfp"}
)

# longest match first
OPERATORS = (
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||",
    "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "<<", ">>", "=", "+", "-", "*", "/", "%", "<", ">", "!", "~", "?", ":",
    "&", "|", "^",
)
PUNCTUATION = frozenset(";,.(){}[]@")

_NUMBER = re.compile(
    r"0[xX][0-9a-fA-F_]+[lL]?"
    r"|0[bB][01_]+[lL]?"
    r"|(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[fFdDlL]?"
)


class LexError(Exception):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message


class ParseError(Exception):
    def __init__(self, line: int, column: int, expected: str, found: str):
        super().__init__(f"{line}:{column}: expected {expected}, found {found!r}")
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found


@dataclass(frozen=True)
class LexToken:
    kind: str  # identifier | keyword | literal | operator | punctuation
    text: str
    line: int
    column: int


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch in "_$"


def _is_ident_part(ch: str) -> bool:
    return ch.isalnum() or ch in "_$"


def lex(source: str) -> list[LexToken]:
    """Split ``source`` into tokens, discarding whitespace and comments."""
    tokens: list[LexToken] = []
    i, n = 0, len(source)
    line, col = 1, 1

    def advance(count: int) -> None:
        nonlocal i, line, col
        for ch in source[i : i + count]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        i += count

    while i < n:
        ch = source[i]
        if ch.isspace():
            advance(1)
            continue
        if source.startswith("//", i):
            end = source.find("\n", i)
            advance((n if end < 0 else end) - i)
            continue
        if source.startswith("/*", i):
            end = source.find("*/", i + 2)
            if end < 0:
                raise LexError(line, col, "unterminated block comment")
            advance(end + 2 - i)
            continue

        start_line, start_col = line, col
        if _is_ident_start(ch):
            j = i + 1
            while j < n and _is_ident_part(source[j]):
                j += 1
            word = source[i:j]
            if word in LITERAL_WORDS:
                kind = "literal"
            elif word in KEYWORDS:
                kind = "keyword"
            else:
                kind = "identifier"
            tokens.append(LexToken(kind, word, start_line, start_col))
            advance(j - i)
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUMBER.match(source, i)
            tokens.append(LexToken("literal", m.group(0), start_line, start_col))
            advance(m.end() - i)
            continue
        if ch in "\"'":
            j = i + 1
            while True:
                if j >= n or source[j] == "\n":
                    raise LexError(start_line, start_col, "unterminated literal")
                if source[j] == "\\":
                    j += 2
                    continue
                if source[j] == ch:
                    break
                j += 1
            tokens.append(LexToken("literal", source[i : j + 1], start_line, start_col))
            advance(j + 1 - i)
            continue
        op = next((o for o in OPERATORS if source.startswith(o, i)), None)
        if op is not None:
            tokens.append(LexToken("operator", op, start_line, start_col))
            advance(len(op))
            continue
        if ch in PUNCTUATION:
            tokens.append(LexToken("punctuation", ch, start_line, start_col))
            advance(1)
            continue
        raise LexError(line, col, f"illegal character {ch!r}")
    return tokens


# --- abstract syntax -------------------------------------------------------


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class Literal:
    text: str


@dataclass(frozen=True)
class Call:
    receiver: Optional["Expr"]
    callee: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class New:
    type_name: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class FieldAccess:
    receiver: "Expr"
    field_name: str


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


Expr = Union[Name, Literal, Call, New, FieldAccess, Binary, Unary]


@dataclass(frozen=True)
class VarDecl:
    type_name: str
    var_name: str
    init: Optional[Expr] = None


@dataclass(frozen=True)
class Assign:
    target_name: str
    rhs: Expr


@dataclass(frozen=True)
class ExprStmt:
    expr: Expr


@dataclass(frozen=True)
class Return:
    value: Optional[Expr] = None


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple["Statement", ...]
    orelse: Optional[tuple["Statement", ...]] = None


@dataclass(frozen=True)
class While:
    cond: Expr
    body: tuple["Statement", ...]


@dataclass(frozen=True)
class For:
    init: Optional["Statement"]
    cond: Optional[Expr]
    update: Optional["Statement"]
    body: tuple["Statement", ...]


@dataclass(frozen=True)
class Catch:
    type_name: str
    var_name: str
    body: tuple["Statement", ...]


@dataclass(frozen=True)
class Try:
    body: tuple["Statement", ...]
    catch: Optional[Catch] = None


Statement = Union[VarDecl, Assign, ExprStmt, Return, If, While, For, Try]
Block = tuple  # tuple[Statement, ...]


@dataclass(frozen=True)
class MethodDecl:
    name: str
    return_type: str
    params: tuple[tuple[str, str], ...]  # (type_name, param_name)
    body: Block


@dataclass(frozen=True)
class Snippet:
    imports: tuple[str, ...]
    method: MethodDecl


def base_type(type_name: str) -> str:
    """``String[]`` -> ``String``."""
    return type_name.split("[", 1)[0]


def simple_name(qualified: str) -> str:
    return qualified.rsplit(".", 1)[-1]


# --- parser ----------------------------------------------------------------

_BINARY_LEVELS = (
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<", ">", "<=", ">="),
    ("<<", ">>", ">>>"),
    ("+", "-"),
    ("*", "/", "%"),
)
_COMPOUND_ASSIGN = {"+=": "+", "-=": "-", "*=": "*", "/=": "/", "%=": "%", "&=": "&", "|=": "|", "^=": "^",
                    "<<=": "<<", ">>=": ">>", ">>>=": ">>>"}


class _Parser:
    def __init__(self, tokens: list[LexToken]):
        self.tokens = tokens
        self.pos = 0
        # pending '>' characters left over after splitting '>>' in type arguments
        self._split_gt = 0

    # token helpers

    def peek(self, offset: int = 0) -> Optional[LexToken]:
        k = self.pos + offset
        return self.tokens[k] if k < len(self.tokens) else None

    def at(self, text: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.text == text and tok.kind != "literal"

    def error(self, expected: str) -> ParseError:
        tok = self.peek()
        if tok is None:
            if self.tokens:
                last = self.tokens[-1]
                return ParseError(last.line, last.column, expected, "<end of input>")
            return ParseError(1, 1, expected, "<end of input>")
        return ParseError(tok.line, tok.column, expected, tok.text)

    def expect(self, text: str) -> LexToken:
        if not self.at(text):
            raise self.error(repr(text))
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def ident(self) -> str:
        tok = self.peek()
        if tok is None or tok.kind != "identifier":
            raise self.error("identifier")
        self.pos += 1
        return tok.text

    # top level

    def snippet(self) -> Snippet:
        imports = []
        while self.at("import"):
            imports.append(self.import_decl())
        method = self.method()
        if self.peek() is not None:
            raise self.error("end of input")
        return Snippet(tuple(imports), method)

    def import_decl(self) -> str:
        self.expect("import")
        parts = [self.ident()]
        while self.accept("."):
            parts.append(self.ident())
        self.expect(";")
        return ".".join(parts)

    def method(self) -> MethodDecl:
        while True:
            if self.at("@"):
                self.pos += 1
                self.ident()
                while self.accept("."):
                    self.ident()
                if self.at("("):
                    raise self.error("annotation without arguments")
            elif self.peek() is not None and self.peek().text in MODIFIERS and self.peek().kind == "keyword":
                self.pos += 1
            else:
                break
        if self.at("<"):
            self.type_args()
        if self.accept("void"):
            return_type = "void"
        else:
            if not self.starts_type():
                raise self.error("method declaration")
            return_type = self.type_name()
        name = self.ident()
        self.expect("(")
        params: list[tuple[str, str]] = []
        if not self.at(")"):
            while True:
                self.accept("final")
                ptype = self.type_name()
                pname = self.ident()
                if any(p == pname for _, p in params):
                    raise ParseError(self.tokens[self.pos - 1].line, self.tokens[self.pos - 1].column,
                                     "distinct parameter name", pname)
                params.append((ptype, pname))
                if not self.accept(","):
                    break
        self.expect(")")
        if self.accept("throws"):
            self.type_name()
            while self.accept(","):
                self.type_name()
        body = self.block()
        return MethodDecl(name, return_type, tuple(params), body)

    # types

    def starts_type(self) -> bool:
        tok = self.peek()
        return tok is not None and (tok.kind == "identifier" or tok.text in PRIMITIVES)

    def type_name(self) -> str:
        tok = self.peek()
        if tok is not None and tok.text in PRIMITIVES:
            self.pos += 1
            name = tok.text
        else:
            name = self.ident()
            while self.at(".") and self.peek(1) is not None and self.peek(1).kind == "identifier":
                self.pos += 1
                name = self.ident()
            if self.at("<"):
                self.type_args()
        while self.at("[") and self.at("]", 1):
            self.pos += 2
            name += "[]"
        return name

    def close_angle(self) -> None:
        if self._split_gt:
            self._split_gt -= 1
            if self._split_gt == 0:
                self.pos += 1
            return
        tok = self.peek()
        if tok is not None and tok.kind == "operator" and tok.text in (">>", ">>>"):
            self._split_gt = len(tok.text) - 1
            return
        self.expect(">")

    def type_args(self) -> None:
        # generic arguments are discarded; the raw type name is kept
        self.expect("<")
        if self.at(">"):
            self.pos += 1
            return
        while True:
            if self.accept("?"):
                if self.accept("extends") or self.accept("super"):
                    self.type_name()
            else:
                self.type_name()
                if self.accept("extends"):
                    self.type_name()
            if self._split_gt or not self.accept(","):
                break
        self.close_angle()

    # statements

    def block(self) -> Block:
        self.expect("{")
        stmts: list = []
        while not self.at("}"):
            if self.peek() is None:
                raise self.error("'}'")
            stmts.extend(self.statement())
        self.expect("}")
        return tuple(stmts)

    def body(self) -> Block:
        if self.at("{"):
            return self.block()
        return tuple(self.statement())

    def statement(self) -> list:
        tok = self.peek()
        if tok is None:
            raise self.error("statement")
        if tok.text == "return" and tok.kind == "keyword":
            self.pos += 1
            value = None if self.at(";") else self.expression()
            self.expect(";")
            return [Return(value)]
        if tok.text == "if" and tok.kind == "keyword":
            self.pos += 1
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            then = self.body()
            orelse = self.body() if self.accept("else") else None
            return [If(cond, then, orelse)]
        if tok.text == "while" and tok.kind == "keyword":
            self.pos += 1
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            return [While(cond, self.body())]
        if tok.text == "for" and tok.kind == "keyword":
            return [self.for_statement()]
        if tok.text == "try" and tok.kind == "keyword":
            self.pos += 1
            body = self.block()
            catch = None
            if self.accept("catch"):
                self.expect("(")
                self.accept("final")
                ctype = self.type_name()
                cname = self.ident()
                self.expect(")")
                catch = Catch(ctype, cname, self.block())
            elif not self.at("catch"):
                # try without catch would need finally, which is unsupported
                raise self.error("'catch'")
            return [Try(body, catch)]
        stmts = self.simple_statement()
        self.expect(";")
        return stmts

    def for_statement(self) -> For:
        self.expect("for")
        self.expect("(")
        init = None
        if not self.at(";"):
            stmts = self.simple_statement()
            if len(stmts) != 1:
                raise self.error("single for-initializer")
            init = stmts[0]
        self.expect(";")
        cond = None if self.at(";") else self.expression()
        self.expect(";")
        update = None
        if not self.at(")"):
            stmts = self.simple_statement(allow_decl=False)
            update = stmts[0]
        self.expect(")")
        return For(init, cond, update, self.body())

    def looks_like_decl(self) -> bool:
        tok = self.peek()
        if tok is None:
            return False
        if tok.text == "final" or tok.text in PRIMITIVES:
            return True
        if tok.kind != "identifier":
            return False
        save, save_gt = self.pos, self._split_gt
        try:
            self.type_name()
            nxt = self.peek()
            return nxt is not None and nxt.kind == "identifier"
        except ParseError:
            return False
        finally:
            self.pos, self._split_gt = save, save_gt

    def simple_statement(self, allow_decl: bool = True) -> list:
        """Declaration, assignment or expression statement, without ';'."""
        if allow_decl and self.looks_like_decl():
            self.accept("final")
            vtype = self.type_name()
            decls = []
            while True:
                vname = self.ident()
                init = self.expression() if self.accept("=") else None
                decls.append(VarDecl(vtype, vname, init))
                if not self.accept(","):
                    break
            return decls
        start = self.peek()
        expr = self.expression()
        tok = self.peek()
        if tok is not None and tok.kind == "operator" and (tok.text == "=" or tok.text in _COMPOUND_ASSIGN):
            if isinstance(expr, Name):
                target = expr.name
            elif isinstance(expr, FieldAccess):
                target = expr.field_name
            else:
                raise self.error("assignable name")
            self.pos += 1
            rhs = self.expression()
            if tok.text != "=":
                rhs = Binary(_COMPOUND_ASSIGN[tok.text], Name(target), rhs)
            return [Assign(target, rhs)]
        if isinstance(expr, (Call, New)) or (isinstance(expr, Unary) and expr.op in ("++", "--", "post++", "post--")):
            return [ExprStmt(expr)]
        raise ParseError(start.line, start.column, "statement expression", start.text)

    # expressions

    def expression(self, level: int = 0) -> Expr:
        if level == len(_BINARY_LEVELS):
            return self.unary()
        left = self.expression(level + 1)
        ops = _BINARY_LEVELS[level]
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "operator" or tok.text not in ops:
                return left
            self.pos += 1
            right = self.expression(level + 1)
            left = Binary(tok.text, left, right)

    def unary(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.kind == "operator" and tok.text in ("!", "~", "-", "+", "++", "--"):
            self.pos += 1
            return Unary(tok.text, self.unary())
        expr = self.postfix()
        tok = self.peek()
        if tok is not None and tok.kind == "operator" and tok.text in ("++", "--"):
            self.pos += 1
            return Unary("post" + tok.text, expr)
        return expr

    def arguments(self) -> tuple:
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.expression())
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(args)

    def postfix(self) -> Expr:
        expr = self.primary()
        while self.at("."):
            self.pos += 1
            member = self.ident()
            if self.at("("):
                expr = Call(expr, member, self.arguments())
            else:
                expr = FieldAccess(expr, member)
        return expr

    def primary(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise self.error("expression")
        if tok.kind == "literal":
            self.pos += 1
            return Literal(tok.text)
        if tok.text == "(":
            self.pos += 1
            expr = self.expression()
            self.expect(")")
            return expr
        if tok.text == "new" and tok.kind == "keyword":
            self.pos += 1
            type_name = self.type_name()
            if "[" in type_name or self.at("["):
                raise self.error("constructor arguments")
            args = self.arguments()
            if self.at("{"):
                raise self.error("end of constructor call (anonymous classes are unsupported)")
            return New(type_name, args)
        if tok.text in ("this", "super") and tok.kind == "keyword":
            self.pos += 1
            return Name(tok.text)
        if tok.kind == "identifier":
            self.pos += 1
            if self.at("("):
                return Call(None, tok.text, self.arguments())
            return Name(tok.text)
        raise self.error("expression")


def parse_snippet(tokens: list[LexToken]) -> Snippet:
    """Parse a token stream into a :class:`Snippet`.

    Modifiers, bare annotations, ``throws`` clauses and generic arguments are
    accepted and discarded.
    """
    return _Parser(tokens).snippet()


def parse_source(source: str) -> Snippet:
    return parse_snippet(lex(source))
