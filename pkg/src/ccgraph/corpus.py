"""Documented-code corpora: reading pairs, proxy queries, triplets, splits.

Also hosts a small synthetic generator of documented Java methods used for
desk-scale training runs.
"""
from __future__ import annotations

import json
import math
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .graph import ConceptGraph, graph_from_dict, graph_to_dict, extract_graph
from .syntax import LexError, ParseError, parse_source


class MalformedLine(ValueError):
    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number


class BadFractions(ValueError):
    pass


@dataclass(frozen=True)
class CodePair:
    id: str
    code: str
    docstring: str


@dataclass(frozen=True)
class Triplet:
    id: str
    graph: ConceptGraph
    code_text: str
    query_text: str

    def to_dict(self) -> dict:
        return {"id": self.id, "query": self.query_text, "code": self.code_text, "graph": graph_to_dict(self.graph)}

    @classmethod
    def from_dict(cls, doc: dict) -> "Triplet":
        return cls(str(doc["id"]), graph_from_dict(doc["graph"]), doc["code"], doc["query"])


@dataclass
class ExtractionReport:
    total: int = 0
    parsed: int = 0
    skipped_parse_error: int = 0
    skipped_empty_query: int = 0

    def to_dict(self) -> dict:
        return dict(vars(self))


@dataclass
class CorpusSplits:
    train: list
    valid: list
    test: list
    seed: int


# --- reading and writing ------------------------------------------------------


def read_pairs(path) -> list[CodePair]:
    """Read line-delimited JSON with ``code`` and ``docstring`` fields."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(doc, dict):
                raise MalformedLine(lineno, "expected a JSON object")
            for key in ("code", "docstring"):
                if not isinstance(doc.get(key), str) or not doc[key].strip():
                    raise MalformedLine(lineno, f"missing or empty {key!r}")
            pid = doc.get("id")
            pairs.append(CodePair(f"{lineno:06d}" if pid is None else str(pid), doc["code"], doc["docstring"]))
    return pairs


def write_pairs(pairs: Iterable[CodePair], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps({"id": p.id, "code": p.code, "docstring": p.docstring}, ensure_ascii=False) + "\n")


def write_triplets(triplets: Iterable[Triplet], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triplets:
            fh.write(json.dumps(t.to_dict(), separators=(",", ":"), ensure_ascii=False) + "\n")


def read_triplets(path) -> list[Triplet]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(Triplet.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MalformedLine(lineno, str(exc)) from None
    return out


# --- queries and triplets -------------------------------------------------------

_INLINE_TAG = re.compile(r"\{@\w+\s+([^}]*)\}")
_HTML_TAG = re.compile(r"<[^>]+>")
_SENTENCE_END = re.compile(r"\.(\s|$)")


def derive_query(docstring: str) -> str:
    """First sentence of a docstring with doc markup removed.

    An empty result means the record carries no usable query.
    """
    text = _INLINE_TAG.sub(r"\1", docstring)
    kept = []
    for line in text.splitlines():
        if line.strip().startswith("@"):
            continue
        kept.append(line)
    text = "\n".join(kept)
    text = re.split(r"\n\s*\n", text.strip(), maxsplit=1)[0]
    text = re.split(r"(?:^|\s)@\w", text, maxsplit=1)[0]
    text = _HTML_TAG.sub(" ", text)
    m = _SENTENCE_END.search(text)
    if m:
        text = text[: m.start() + 1]
    return " ".join(text.split())


def _triplet_or_reason(pair: CodePair):
    try:
        snippet = parse_source(pair.code)
    except (LexError, ParseError):
        return "parse"
    query = derive_query(pair.docstring)
    if not query:
        return "query"
    return Triplet(pair.id, extract_graph(snippet), pair.code, query)


def build_triplets(pairs: Iterable[CodePair], workers: int = 1) -> tuple[list[Triplet], ExtractionReport]:
    """Parse each pair, derive its query and extract its graph.

    Records outside the syntax subset or without a query are counted and
    skipped. Output order follows input order for any ``workers``.
    """
    pairs = list(pairs)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(_triplet_or_reason, pairs))
    else:
        results = [_triplet_or_reason(p) for p in pairs]
    report = ExtractionReport(total=len(pairs))
    triplets = []
    for r in results:
        if r == "parse":
            report.skipped_parse_error += 1
        elif r == "query":
            report.skipped_empty_query += 1
        else:
            report.parsed += 1
            triplets.append(r)
    return triplets, report


def split_corpus(triplets, train_frac: float, valid_frac: float, seed: int) -> CorpusSplits:
    if train_frac <= 0 or valid_frac <= 0 or train_frac + valid_frac >= 1:
        raise BadFractions(f"need positive fractions summing below 1, got {train_frac} and {valid_frac}")
    items = list(triplets)
    random.Random(seed).shuffle(items)
    n = len(items)
    # tolerate 0.1 * 10 = 1.0000000000000002 style rounding
    n_train = math.floor(n * train_frac + 1e-9)
    n_valid = math.floor(n * valid_frac + 1e-9)
    return CorpusSplits(items[:n_train], items[n_train : n_train + n_valid], items[n_train + n_valid :], seed)


# --- synthetic corpus ------------------------------------------------------------

_VERBS = ["count", "find", "load", "save", "remove", "validate", "merge", "sort",
          "filter", "export", "compute", "update"]
_NOUNS = [
    ("order", "orders"), ("customer", "customers"), ("invoice", "invoices"), ("account", "accounts"),
    ("user", "users"), ("product", "products"), ("message", "messages"), ("event", "events"),
    ("ticket", "tickets"), ("payment", "payments"), ("report", "reports"), ("session", "sessions"),
]
_QUALIFIERS = ["active", "expired", "pending", "archived", "local", "remote", "valid", "recent"]
_SOURCES = ["cache", "database", "queue", "registry", "buffer", "store", "index", "archive", "stream", "catalog"]
_IMPORTS = {
    "List": "java.util.List",
    "Map": "java.util.Map",
    "ArrayList": "java.util.ArrayList",
    "File": "java.io.File",
    "IOException": "java.io.IOException",
}
_DOC_FORMS = [
    "{Verb} the {qual} {plural} in the {source}.\n@param {plural} the {plural} to {verb}",
    "{Verb} all {qual} {plural} of the {source} and return the result. Later sentences are ignored.\n@return the result",
    "{Verb} {qual} {plural} using the given {source}.\n\nDetails that are not part of the query.",
    "<p>{Verb} every {qual} {noun} held by the {source}.</p>\n@throws IllegalStateException never",
]


def _camel(*words: str) -> str:
    return words[0] + "".join(w[:1].upper() + w[1:] for w in words[1:])


def _cap(word: str) -> str:
    return word[:1].upper() + word[1:]


def _loop_template(rng, verb, noun, plural, qual, source):
    item, src = _cap(noun), _cap(source)
    items = _camel(qual, plural)
    lines = [
        f"public int {_camel(verb, qual, plural)}(List<{item}> {items}, {src} {source}, int limit) {{",
        "    int total = 0;",
        f"    for (int i = 0; i < {items}.size(); i++) {{",
        f"        {item} {noun} = {items}.get(i);",
        f"        if ({noun}.{_camel('is', qual)}() && total < limit) {{",
        f"            {source}.{_camel(verb, noun)}({noun});",
        "            total = total + 1;",
        "        }",
        "    }",
    ]
    if rng.random() < 0.5:
        lines.append(f"    log.info(\"{verb} {plural}\", total);")
    lines += ["    return total;", "}"]
    return ["List"], lines


def _map_template(rng, verb, noun, plural, qual, source):
    item, src = _cap(noun), _cap(source)
    key = rng.choice(["id", "key", "name", "code"])
    lines = [
        f"public {item} {_camel(verb, qual, noun)}(Map<String, {item}> {plural}, String {key}) {{",
        f"    {src} {source} = {_camel('open', source)}({key});",
        f"    {item} {noun} = {plural}.get({key});",
        f"    if ({noun} == null) {{",
        f"        {noun} = new {item}({key});",
        f"        {plural}.put({key}, {noun});",
        "    }",
        f"    {noun}.{_camel('set', qual)}(true);",
        f"    {source}.{_camel(verb, noun)}({noun});",
        f"    return {noun};",
        "}",
    ]
    return ["Map"], lines


def _file_template(rng, verb, noun, plural, qual, source):
    path = rng.choice(["path", "dir", "location"])
    items = _camel(qual, plural)
    lines = [
        f"public boolean {_camel(verb, qual, plural, 'file')}(String {path}, int count) {{",
        f"    File {source} = new File({path}, \"{qual}_{plural}.dat\");",
        "    try {",
        f"        List<String> {items} = {_camel('read', plural)}({source});",
        f"        int size = {items}.size() + count;",
        f"        {_camel(verb, plural)}({items}, size);",
        "    } catch (IOException error) {",
        "        return false;",
        "    }",
        f"    return {source}.exists();",
        "}",
    ]
    return ["File", "IOException", "List"], lines


def _builder_template(rng, verb, noun, plural, qual, source):
    item = _cap(noun)
    extra = ["limit", "offset", "depth"][: rng.randint(0, 2)]
    params = [f"{item} {noun}"] + [f"int {w}" for w in extra]
    items = _camel(qual, plural)
    lines = [
        f"public List<{item}> {_camel(verb, qual, plural)}({', '.join(params)}) {{",
        f"    List<{item}> {items} = new ArrayList<>();",
        f"    {item} current = {noun};",
        "    while (current != null) {",
        f"        if (current.{_camel('is', qual)}()) {{",
        f"            {items}.add(current);",
        "        }",
        "        current = current.next();",
        "    }",
        f"    {_camel(verb, plural, 'in', source)}({items});",
        f"    return {items};",
        "}",
    ]
    return ["List", "ArrayList"], lines


def _drain_template(rng, verb, noun, plural, qual, source):
    item, src = _cap(noun), _cap(source)
    lines = [
        f"public void {_camel(verb, qual, plural, 'from', source)}({src} {source}, int batch) {{",
        "    int processed = 0;",
        f"    while ({source}.{_camel('has', plural)}() && processed < batch) {{",
        f"        {item} {noun} = {source}.{_camel('next', noun)}();",
        f"        if ({noun}.{_camel('is', qual)}()) {{",
        f"            {_camel(verb, noun)}({noun}, {source});",
        "        }",
        "        processed++;",
        "    }",
        "}",
    ]
    return [], lines


def _guard_template(rng, verb, noun, plural, qual, source):
    item, src = _cap(noun), _cap(source)
    lines = [
        f"public boolean {_camel(verb, qual, noun)}({item} {noun}, {src} {source}) {{",
        "    try {",
        f"        {source}.lock({noun}.getId());",
        f"        boolean {qual} = {noun}.{_camel('is', qual)}();",
        f"        if ({qual}) {{",
        f"            {source}.{verb}({noun});",
        "        }",
        f"        return {qual};",
        "    } catch (IllegalStateException error) {",
        f"        {source}.unlock({noun}.getId());",
        "    }",
        "    return false;",
        "}",
    ]
    return [], lines


_TEMPLATES = [_loop_template, _map_template, _file_template, _builder_template, _drain_template, _guard_template]


def generate_synthetic(n: int, seed: int) -> list[CodePair]:
    """``n`` documented methods inside the parser's subset, deterministic in ``seed``.

    Each record draws a distinct (verb, noun, qualifier, source) combination;
    the docstring names all four, and the code uses them in identifiers.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = random.Random(seed)
    combos = [
        (v, nn, q, src)
        for v in range(len(_VERBS))
        for nn in range(len(_NOUNS))
        for q in range(len(_QUALIFIERS))
        for src in range(len(_SOURCES))
    ]
    rng.shuffle(combos)
    pairs = []
    for k in range(n):
        vi, ni, qi, si = combos[k % len(combos)]
        verb = _VERBS[vi]
        noun, plural = _NOUNS[ni]
        qual, source = _QUALIFIERS[qi], _SOURCES[si]
        template = rng.choice(_TEMPLATES)
        used, lines = template(rng, verb, noun, plural, qual, source)
        imports = [f"import {_IMPORTS[name]};" for name in used]
        if rng.random() < 0.3:
            imports.append("import java.util.logging.Logger;")  # never referenced
        doc = rng.choice(_DOC_FORMS).format(
            Verb=_cap(verb), verb=verb, qual=qual, noun=noun, plural=plural, source=source
        )
        pairs.append(CodePair(f"syn{k:05d}", "\n".join(imports + lines), doc))
    return pairs
