"""Training loop, candidate indexes, ranking and MRR evaluation."""
from __future__ import annotations

import json
import logging
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import autodiff as ad
from .encoders import Model, ModelConfig, batch_loss, build_vocab

log = logging.getLogger(__name__)


class EmptySplit(ValueError):
    pass


class EmptyIndex(ValueError):
    pass


class EmptyTestSet(ValueError):
    pass


class VocabMismatch(ValueError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 16
    learning_rate: float = 3e-3
    seed: int = 0
    use_graph: bool = True
    pool_size: int = 1000
    model: ModelConfig = field(default_factory=ModelConfig)
    train_path: Optional[str] = None
    valid_path: Optional[str] = None
    out_dir: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelConfig(**self.model)
        if self.epochs < 1 or self.batch_size < 2:
            raise ValueError("need epochs >= 1 and batch_size >= 2")

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class SearchIndex:
    ids: tuple
    vectors: np.ndarray
    use_graph: bool

    def __post_init__(self):
        if len(self.ids) != self.vectors.shape[0]:
            raise ValueError("one vector per candidate id")
        self.vectors.setflags(write=False)


@dataclass
class EvalResult:
    mrr: float
    pool_size: int
    seed: int
    use_graph: bool
    reciprocal_ranks: list

    def to_dict(self) -> dict:
        return asdict(self)


# --- indexing and ranking --------------------------------------------------------


def embed_candidates(model: Model, triplets, use_graph: bool = True) -> SearchIndex:
    if model.vocab is None or len(model.vocab) < 2:
        raise VocabMismatch("checkpoint carries no vocabulary")
    triplets = list(triplets)
    vecs = [model.candidate_vector(model.prepare(t), use_graph) for t in triplets]
    d = model.config.embed_dim
    matrix = np.array(vecs).reshape(len(triplets), d)
    return SearchIndex(tuple(t.id for t in triplets), matrix, use_graph)


def embed_queries(model: Model, triplets) -> np.ndarray:
    triplets = list(triplets)
    return np.array([model.query_vector(t.query_text) for t in triplets]).reshape(len(triplets), -1)


def cosine_scores(queries: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    qn = queries / np.linalg.norm(queries, axis=1, keepdims=True)
    cn = candidates / np.linalg.norm(candidates, axis=1, keepdims=True)
    return qn @ cn.T


def rank(index: SearchIndex, query_vector) -> list:
    """Candidate ids by descending cosine score; ties keep input order."""
    if not index.ids:
        raise EmptyIndex("cannot rank an empty index")
    scores = cosine_scores(np.asarray(query_vector, dtype=float)[None, :], index.vectors)[0]
    order = sorted(range(len(index.ids)), key=lambda j: (-scores[j], j))
    return [index.ids[j] for j in order]


# --- MRR ------------------------------------------------------------------------------


def sample_pool(ids, gold: int, pool_size: int, seed: int) -> list[int]:
    """Positions of the gold candidate plus seeded distractors.

    Distractors are drawn by candidate id, so the pool does not depend on
    storage order. The returned positions follow ascending id order.
    """
    n = len(ids)
    k = min(pool_size - 1, n - 1)
    by_id = sorted(range(n), key=lambda j: ids[j])
    others = [j for j in by_id if j != gold]
    rng = random.Random(f"{seed}:{ids[gold]}")
    chosen = set(rng.sample(others, k)) | {gold}
    return [j for j in by_id if j in chosen]


def reciprocal_ranks(scores: np.ndarray, ids, pool_size: int, seed: int) -> list[float]:
    """``scores[i, j]`` scores query i against candidate j; candidate i is gold for query i."""
    n = scores.shape[0]
    out = []
    for i in range(n):
        pool = sample_pool(ids, i, pool_size, seed)
        gold_pos = pool.index(i)
        s = scores[i, pool]
        better = np.sum(s > s[gold_pos]) + np.sum(s[:gold_pos] == s[gold_pos])
        out.append(1.0 / (1 + int(better)))
    return out


def evaluate_mrr(model: Model, triplets, pool_size: int = 1000, seed: int = 0, use_graph: bool = True) -> EvalResult:
    """Mean reciprocal rank of each query's own candidate within its pool."""
    triplets = list(triplets)
    if not triplets:
        raise EmptyTestSet("no test triplets")
    index = embed_candidates(model, triplets, use_graph)
    scores = cosine_scores(embed_queries(model, triplets), index.vectors)
    rr = reciprocal_ranks(scores, index.ids, pool_size, seed)
    return EvalResult(float(np.mean(rr)), min(pool_size, len(triplets)), seed, use_graph, rr)


# --- training -------------------------------------------------------------------------


def train(config: TrainConfig, train_triplets, valid_triplets, out_dir=None) -> tuple[Model, list[dict]]:
    """Train with in-batch negatives; returns the final model and per-epoch metrics.

    When ``out_dir`` is given, writes ``final.ckpt.json``, ``best.ckpt.json``
    (highest validation MRR) and ``metrics.jsonl``.
    """
    train_triplets = list(train_triplets)
    valid_triplets = list(valid_triplets)
    if not train_triplets:
        raise EmptySplit("training split is empty")
    mcfg = config.model
    vocab = build_vocab(train_triplets)
    model = Model.create(mcfg, vocab)
    examples = [model.prepare(t) for t in train_triplets]
    state = ad.AdamState(lr=config.learning_rate)
    rng = np.random.default_rng(config.seed)
    metrics = []
    best_mrr, best_json = -1.0, None
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(examples))
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [examples[k] for k in order[start : start + config.batch_size]]
            if len(batch) < 2:
                continue
            loss, grads = ad.value_and_grad(lambda P: batch_loss(P, batch, mcfg, config.use_graph)[0], model.params)
            ad.adam_step(model.params, grads, state)
            losses.append(loss)
        valid_mrr = (
            evaluate_mrr(model, valid_triplets, config.pool_size, config.seed, config.use_graph).mrr
            if valid_triplets
            else float("nan")
        )
        row = {"epoch": epoch, "train_loss": float(np.mean(losses)) if losses else float("nan"), "valid_mrr": valid_mrr}
        metrics.append(row)
        log.info("epoch %d loss %.4f valid mrr %.4f", epoch, row["train_loss"], valid_mrr)
        if valid_mrr > best_mrr:
            best_mrr, best_json = valid_mrr, model.to_json()
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "final.ckpt.json").write_text(model.to_json())
        (out / "best.ckpt.json").write_text(best_json or model.to_json())
        with open(out / "metrics.jsonl", "w") as fh:
            for row in metrics:
                fh.write(json.dumps(row) + "\n")
    return model, metrics


def load_model(path) -> Model:
    try:
        return Model.from_json(Path(path).read_text())
    except KeyError as exc:
        raise VocabMismatch(f"checkpoint is missing {exc}") from None
