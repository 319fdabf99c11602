"""Token and graph encoders, sum fusion and the in-batch contrastive loss.

Queries, code tokens and graph node names share one subtoken embedding table.
Queries and code each get their own two-layer projection head. Graphs go
through relation-aware GATv2-style layers followed by gated attention pooling.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Var
from .graph import NODE_KINDS, RELATION_KINDS, ConceptGraph
from .syntax import LexError, lex

PAD, UNK = "<pad>", "<unk>"
NUM, STR = "<num>", "<str>"
N_RELATIONS = 2 * len(RELATION_KINDS) + 1
SELF_RELATION = N_RELATIONS - 1
_REL_INDEX = {k: i for i, k in enumerate(RELATION_KINDS)}
_KIND_INDEX = {k: i for i, k in enumerate(NODE_KINDS)}

_SUBTOKEN = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+|[^\W\d_]+")
_WORD = re.compile(r"\w+")


class EmptyCorpus(ValueError):
    pass


class BatchTooSmall(ValueError):
    pass


class EmptyGraph(ValueError):
    pass


def subtokenize(identifier: str) -> list[str]:
    """Split on camelCase, underscores and digit runs; lowercase.

    >>> subtokenize("parseHttpRequest")
    ['parse', 'http', 'request']
    """
    return [m.group(0).lower() for m in _SUBTOKEN.finditer(identifier)]


def code_tokens(code: str) -> list[str]:
    """Subtokens of identifiers and keywords; literals become markers."""
    try:
        toks = lex(code)
    except LexError:
        return [s for w in _WORD.findall(code) for s in subtokenize(w)]
    out = []
    for t in toks:
        if t.kind in ("identifier", "keyword"):
            out.extend(subtokenize(t.text))
        elif t.kind == "literal":
            if t.text[0] in "\"'":
                out.append(STR)
            elif t.text[0].isdigit() or t.text[0] == ".":
                out.append(NUM)
            else:
                out.append(t.text)
    return out


def query_tokens(text: str) -> list[str]:
    return [s for w in _WORD.findall(text) for s in subtokenize(w)]


def node_tokens(name: str) -> list[str]:
    return subtokenize(name)


@dataclass
class Vocab:
    itos: list
    min_freq: int = 2
    stoi: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.itos[:2] != [PAD, UNK]:
            raise ValueError("vocabulary must start with PAD and UNK")
        self.stoi = {s: i for i, s in enumerate(self.itos)}

    def __len__(self):
        return len(self.itos)

    def lookup(self, tokens) -> list[int]:
        return [self.stoi.get(t, 1) for t in tokens]


def build_vocab(train_triplets, min_freq: int = 2) -> Vocab:
    """Subtoken vocabulary from the training split only."""
    triplets = list(train_triplets)
    if not triplets:
        raise EmptyCorpus("cannot build a vocabulary from zero triplets")
    counts = Counter()
    for t in triplets:
        counts.update(code_tokens(t.code_text))
        counts.update(query_tokens(t.query_text))
        for n in t.graph.nodes:
            counts.update(node_tokens(n.name))
    kept = sorted((s for s, c in counts.items() if c >= min_freq and s not in (PAD, UNK)), key=lambda s: (-counts[s], s))
    return Vocab([PAD, UNK] + kept, min_freq)


@dataclass
class ModelConfig:
    embed_dim: int = 32
    gat_layers: int = 2
    slope: float = 0.2
    temperature: float = 0.07
    max_code_tokens: int = 128
    max_query_tokens: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.embed_dim < 2 or self.gat_layers < 1 or self.temperature <= 0:
            raise ValueError(f"invalid model config {self}")


def init_params(config: ModelConfig, vocab_size: int) -> ParamStore:
    """Uniform [-0.1, 0.1] initialisation, drawn in parameter-name order."""
    d = config.embed_dim
    shapes = {
        "embed": (vocab_size, d),
        "kind_embed": (len(NODE_KINDS), d),
        "pool.gate_w": (d,),
        "pool.gate_b": (1,),
        "pool.proj": (d, d),
    }
    for layer in range(config.gat_layers):
        p = f"gat{layer}."
        shapes.update({p + "w_v": (d, d), p + "w_s": (d, d), p + "w_t": (d, d),
                       p + "rel": (N_RELATIONS, d), p + "attn": (d,), p + "bias": (d,)})
    for head in ("query", "code"):
        shapes.update({f"{head}.w1": (d, d), f"{head}.b1": (d,), f"{head}.w2": (d, d), f"{head}.b2": (d,)})
    rng = np.random.default_rng(config.seed)
    return ParamStore({name: rng.uniform(-0.1, 0.1, size=shapes[name]) for name in sorted(shapes)})


# --- prepared inputs ----------------------------------------------------------------


@dataclass
class GraphInput:
    """Index arrays for one graph: node subtokens, kinds and message edges."""

    n_nodes: int
    token_ids: np.ndarray
    token_node: np.ndarray
    token_weight: np.ndarray  # 1 / (#subtokens of the owning node)
    kinds: np.ndarray
    recv: np.ndarray
    send: np.ndarray
    rel: np.ndarray


def prepare_graph(vocab: Vocab, graph: ConceptGraph) -> GraphInput:
    ids, owner = [], []
    for i, node in enumerate(graph.nodes):
        toks = vocab.lookup(node_tokens(node.name)) or [1]
        ids += toks
        owner += [i] * len(toks)
    owner = np.array(owner, dtype=np.intp)
    counts = np.bincount(owner, minlength=len(graph.nodes))
    n = len(graph.nodes)
    recv, send, rel = [], [], []
    for e in graph.edges:
        k = _REL_INDEX[e.kind]
        recv += [e.dst, e.src]
        send += [e.src, e.dst]
        rel += [k, k + len(RELATION_KINDS)]
    recv += range(n)
    send += range(n)
    rel += [SELF_RELATION] * n
    return GraphInput(
        n,
        np.array(ids, dtype=np.intp),
        owner,
        1.0 / counts[owner],
        np.array([_KIND_INDEX[node.kind] for node in graph.nodes], dtype=np.intp),
        np.array(recv, dtype=np.intp),
        np.array(send, dtype=np.intp),
        np.array(rel, dtype=np.intp),
    )


@dataclass
class Example:
    id: str
    query_ids: list
    code_ids: list
    graph: GraphInput


def prepare(vocab: Vocab, triplet, config: ModelConfig) -> Example:
    q = vocab.lookup(query_tokens(triplet.query_text))[: config.max_query_tokens]
    c = vocab.lookup(code_tokens(triplet.code_text))[: config.max_code_tokens]
    return Example(triplet.id, q or [1], c or [1], prepare_graph(vocab, triplet.graph))


# --- encoders -------------------------------------------------------------------------


def encode_text(P: dict, token_ids, head: str) -> Var:
    """Mean subtoken embedding through the head's affine-tanh-affine projection."""
    if head not in ("query", "code"):
        raise ValueError(f"unknown head {head!r}")
    ids = list(token_ids) or [1]
    mean = ad.mean_rows(ad.gather_rows(P["embed"], ids))
    hidden = ad.tanh(ad.affine(P[f"{head}.w1"], P[f"{head}.b1"], mean))
    return ad.affine(P[f"{head}.w2"], P[f"{head}.b2"], hidden)


def init_node_features(P: dict, g: GraphInput) -> Var:
    """Row i: mean name-subtoken embedding of node i plus its kind embedding."""
    tok = ad.gather_rows(P["embed"], g.token_ids)
    tok = ad.scale_rows(Var(g.token_weight), tok)
    names = ad.segment_sum(tok, g.token_node, g.n_nodes)
    return ad.add(names, ad.gather_rows(P["kind_embed"], g.kinds))


def gat_layer(P: dict, layer: int, g: GraphInput, H: Var, slope: float = 0.2, return_attention: bool = False):
    """One relation-aware attention layer over forward, inverse and self edges.

    score(i <- j, r) = attn . leaky_relu(W_s h_i + W_t h_j + R[r]), softmax-normalised
    over the messages received by i; h'_i = tanh(sum_j alpha_ij W_v h_j + bias).
    """
    if H.shape[0] != g.n_nodes:
        raise ad.ShapeMismatch("gat_layer", H.shape, (g.n_nodes, "d"))
    p = f"gat{layer}."
    src_proj = ad.matmul(H, ad.transpose(P[p + "w_s"]))
    dst_proj = ad.matmul(H, ad.transpose(P[p + "w_t"]))
    values = ad.matmul(H, ad.transpose(P[p + "w_v"]))
    z = ad.add(ad.gather_rows(src_proj, g.recv), ad.gather_rows(dst_proj, g.send))
    z = ad.add(z, ad.gather_rows(P[p + "rel"], g.rel))
    scores = ad.matmul(ad.leaky_relu(z, slope), P[p + "attn"])
    alpha = ad.segment_softmax(scores, g.recv, g.n_nodes)
    messages = ad.scale_rows(alpha, ad.gather_rows(values, g.send))
    out = ad.tanh(ad.add_broadcast(ad.segment_sum(messages, g.recv, g.n_nodes), P[p + "bias"]))
    if return_attention:
        return out, alpha.value
    return out


def pool_graph(P: dict, H: Var) -> Var:
    """Gated global attention pooling: sum_i sigmoid(w_g . h_i + b_g) * (W_p h_i)."""
    if H.shape[0] == 0:
        raise EmptyGraph("cannot pool a graph without nodes")
    gates = ad.sigmoid(ad.add_broadcast(ad.matmul(H, P["pool.gate_w"]), P["pool.gate_b"]))
    projected = ad.matmul(H, ad.transpose(P["pool.proj"]))
    return ad.matmul(gates, projected)


def encode_graph(P: dict, g: GraphInput, config: ModelConfig) -> Var:
    H = init_node_features(P, g)
    for layer in range(config.gat_layers):
        H = gat_layer(P, layer, g, H, config.slope)
    return pool_graph(P, H)


def fuse(h_code: Var, h_graph: Optional[Var]) -> Var:
    """Sum fusion; ``None`` stands for the zeroed graph vector of the nograph path."""
    if h_graph is None:
        return h_code
    if h_code.shape != h_graph.shape:
        raise ad.ShapeMismatch("fuse", h_code.shape, h_graph.shape)
    return ad.add(h_code, h_graph)


def encode_candidate(P: dict, ex: Example, config: ModelConfig, use_graph: bool = True) -> Var:
    h_code = encode_text(P, ex.code_ids, "code")
    return fuse(h_code, encode_graph(P, ex.graph, config) if use_graph else None)


def contrastive_loss(Q: Var, C: Var, temperature: float) -> tuple[Var, Var]:
    """Mean cross-entropy of each query row against all candidate rows.

    ``S = cosine(Q, C) / temperature``; row i's positive is column i.
    """
    if Q.shape[0] < 2:
        raise BatchTooSmall(f"contrastive loss needs at least 2 examples, got {Q.shape[0]}")
    if Q.shape != C.shape:
        raise ad.ShapeMismatch("contrastive_loss", Q.shape, C.shape)
    S = ad.scale(ad.cosine_matrix(Q, C), 1.0 / temperature)
    losses = [ad.softmax_cross_entropy_row(ad.row(S, i), i) for i in range(Q.shape[0])]
    return ad.scale(ad.sum_all(ad.stack(losses)), 1.0 / Q.shape[0]), S


def batch_loss(P: dict, batch: list, config: ModelConfig, use_graph: bool = True) -> tuple[Var, np.ndarray]:
    """In-batch contrastive loss of a list of prepared examples.

    Query i is scored against every candidate in the batch; candidate i is the
    positive. Returns the loss and the scaled similarity matrix.
    """
    if len(batch) < 2:
        raise BatchTooSmall(f"contrastive loss needs at least 2 examples, got {len(batch)}")
    Q = ad.stack([encode_text(P, ex.query_ids, "query") for ex in batch])
    C = ad.stack([encode_candidate(P, ex, config, use_graph) for ex in batch])
    loss, S = contrastive_loss(Q, C, config.temperature)
    return loss, S.value


# --- model bundle -------------------------------------------------------------------


@dataclass
class Model:
    config: ModelConfig
    vocab: Vocab
    params: ParamStore

    @classmethod
    def create(cls, config: ModelConfig, vocab: Vocab) -> "Model":
        return cls(config, vocab, init_params(config, len(vocab)))

    def prepare(self, triplet) -> Example:
        return prepare(self.vocab, triplet, self.config)

    def query_vector(self, text: str) -> np.ndarray:
        ids = self.vocab.lookup(query_tokens(text))[: self.config.max_query_tokens]
        return encode_text(self.params.as_vars(), ids, "query").value

    def candidate_vector(self, ex: Example, use_graph: bool = True) -> np.ndarray:
        return encode_candidate(self.params.as_vars(), ex, self.config, use_graph).value

    def to_json(self) -> str:
        return ad.checkpoint_to_json(asdict(self.config), self.vocab.itos, self.params)

    @classmethod
    def from_json(cls, text: str) -> "Model":
        dims, itos, params = ad.checkpoint_from_json(text)
        return cls(ModelConfig(**dims), Vocab(itos), params)
