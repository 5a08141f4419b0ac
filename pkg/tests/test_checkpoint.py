import numpy as np
import pytest

from s2srl.checkpoint import CheckpointError, dumps, load_checkpoint, loads, save_checkpoint
from s2srl.vocab import Vocab

from conftest import tiny_setup


def test_round_trip(tmp_path):
    model, vocab, _, _ = tiny_setup()
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model, vocab, {"seed": 1})
    m2, v2, meta = load_checkpoint(path, vocab)
    assert meta == {"seed": 1}
    assert v2.itos == vocab.itos
    assert m2.config == model.config
    for name, t in model.params.items():
        assert np.array_equal(t.data, m2.params[name].data)
    assert dumps(m2, v2, meta) == path.read_bytes()
    assert [p.name for p in tmp_path.iterdir()] == ["m.ckpt"]


def test_header_layout():
    model, vocab, _, _ = tiny_setup()
    data = dumps(model, vocab)
    assert data[:8] == b"S2SRLCKP"
    assert int.from_bytes(data[8:12], "little") == 1


def test_errors(tmp_path):
    model, vocab, _, _ = tiny_setup()
    data = dumps(model, vocab)
    with pytest.raises(CheckpointError, match="magic"):
        loads(b"XXXXXXXX" + data[8:])
    with pytest.raises(CheckpointError, match="trailing"):
        loads(data + b"\0" * 8)
    other = Vocab(vocab.words + ["extra"], vocab.labels)
    with pytest.raises(CheckpointError, match="vocabulary mismatch"):
        loads(data, other)
    with pytest.raises(CheckpointError, match="not found"):
        load_checkpoint(tmp_path / "nope.ckpt")
    tampered = data.replace(b'"bob"', b'"bot"', 1)
    with pytest.raises(CheckpointError, match="hash"):
        loads(tampered)


def test_vocab_files_round_trip(tmp_path):
    _, vocab, _, _ = tiny_setup()
    vocab.counts = {"bob": 3}
    vocab.save(tmp_path)
    loaded = Vocab.load(tmp_path)
    assert loaded.itos == vocab.itos
    assert loaded.digest() == vocab.digest()
    assert loaded.counts["bob"] == 3
