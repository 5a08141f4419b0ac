from importlib import resources

import numpy as np
import pytest

from s2srl.corpus import AnnotatedSentence, LabeledSpan, Predicate, load_props


def numeric_grad(f, x, h=1e-5):
    """Central finite differences of scalar ``f()`` with respect to array ``x`` (in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def rel_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b)))


@pytest.fixture(scope="session")
def toy_path():
    return resources.files("s2srl") / "data" / "toy.props"


@pytest.fixture(scope="session")
def toy(toy_path):
    return load_props(toy_path)


def sentence(tokens, *preds):
    """Build a sentence from (index, lemma, [(start, end, role), ...]) tuples."""
    return AnnotatedSentence(
        list(tokens),
        [Predicate(i, lemma, sorted(LabeledSpan(*s) for s in spans)) for i, lemma, spans in preds],
    )


@pytest.fixture
def bonds_sentence():
    return sentence(
        "The trade figures turn out well , and all those recently unloaded bonds spurt in price .".split(),
        (3, "turn", [(0, 2, "A1"), (3, 4, "V"), (5, 5, "A2")]),
        (11, "unload", [(10, 10, "AM-TMP"), (11, 11, "V"), (12, 12, "A1")]),
        (13, "spurt", [(8, 12, "A1"), (13, 13, "V"), (14, 15, "AM-ADV")]),
    )


def tiny_setup(dim=8, n_words=20, copy=True, attention_state="previous", seed=0):
    """A 3-token instance (one word outside V) and a model with |V| = ``n_words``."""
    from s2srl.linearize import SPECIALS, apply_vocab, linearize, labels_of
    from s2srl.model import ModelConfig, Seq2SeqModel, encode_instance
    from s2srl.vocab import Vocab, order_labels

    s = sentence(["Bob", "ate", "zyx"], (1, "eat", [(0, 0, "A0"), (1, 1, "V"), (2, 2, "A1")]))
    raw = linearize(s, 0)
    fillers = [f"w{i}" for i in range(n_words - len(SPECIALS) - 2)]
    vocab = Vocab(list(SPECIALS) + ["bob", "ate"] + fillers, order_labels(labels_of(raw.target)))
    assert vocab.n_words == n_words
    inst = apply_vocab(raw, vocab.words)
    config = ModelConfig(
        embed_dim=dim, hidden_dim=dim, dropout_rate=0.0, vocab_size=vocab.n_words,
        label_count=vocab.n_labels, copy=copy, attention_state=attention_state,
    )
    model = Seq2SeqModel(config, seed=seed)
    # spread the scores so no gradient is vanishingly small
    rng = np.random.default_rng(seed + 1)
    for p in model.parameters():
        p.data = rng.uniform(-0.5, 0.5, size=p.shape)
    return model, vocab, inst, encode_instance(inst, vocab)


# Entries whose gradient is below this are compared on an absolute scale: central
# differences of a loss near 1 carry about 1e-11 of roundoff.
GRAD_FLOOR = 1e-6


def model_grad_check(model, vocab, enc, per_tensor=30, seed=0, h=1e-5):
    """Max relative error of loss gradients vs central differences on sampled entries.

    Parameters without a gradient path (copy weights when copying is off)
    must have a numerical gradient of zero.
    """
    from s2srl import tensor as T

    model.zero_grad()
    T.backward(model.sequence_loss(enc, vocab))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, p in model.params.items():
        flat = p.data.reshape(-1)
        grad = p.grad.reshape(-1) if p.grad is not None else np.zeros_like(flat)
        picks = rng.choice(flat.size, size=min(per_tensor, flat.size), replace=False)
        for i in picks:
            old = flat[i]
            with T.no_grad():
                flat[i] = old + h
                up = model.sequence_loss(enc, vocab).item()
                flat[i] = old - h
                down = model.sequence_loss(enc, vocab).item()
            flat[i] = old
            num = (up - down) / (2 * h)
            err = abs(num - grad[i]) / max(GRAD_FLOOR, abs(num) + abs(grad[i]))
            worst = max(worst, err)
    return worst


# Acceptance verdict lines, echoed in the terminal summary so they show up
# even when output capture hides prints from passing tests.
VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
