"""A three-example batch of small graphs shared by gradient tests.

``trained_toy_point`` fits the batch for a few Adam steps first. At the
seeded initialisation many gradient entries are exactly zero (a receiver
projection shifts every score of a softmax segment equally) or ~1e-9, where
central differences only see rounding noise amplified by 1 / (2 eps). Near a
fitted point the loss itself is small, so that noise falls far below the
checker's 1e-8 floor while every parameter is still exercised.
"""
from ccgraph import autodiff as ad
from ccgraph.corpus import CodePair, build_triplets
from ccgraph.encoders import Model, ModelConfig, batch_loss, build_vocab

PAIRS = [
    CodePair("a", "int h(int a){ return a; }", "Returns the value."),
    CodePair("b", "import java.util.List; int count(List xs){ int n = xs.size(); return n; }", "Counts the items."),
    CodePair("c", "void log(String msg, int level){ print(msg, level); }", "Logs a message."),
]


def toy_model(seed=0, embed_dim=32):
    triplets, _ = build_triplets(PAIRS)
    config = ModelConfig(embed_dim=embed_dim, seed=seed)
    model = Model.create(config, build_vocab(triplets, min_freq=1))
    examples = [model.prepare(t) for t in triplets]
    return model, examples


def toy_loss_fn(model, examples, use_graph=True):
    return lambda P: batch_loss(P, examples, model.config, use_graph)[0]


def trained_toy_point(seed=0, steps=100, lr=1e-2, embed_dim=32):
    model, examples = toy_model(seed, embed_dim)
    loss_fn = toy_loss_fn(model, examples)
    state = ad.AdamState(lr=lr)
    for _ in range(steps):
        _, grads = ad.value_and_grad(loss_fn, model.params)
        ad.adam_step(model.params, grads, state)
    return model, examples, loss_fn
