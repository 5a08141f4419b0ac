import numpy as np
import pytest

from s2srl.corpus import ContractError, LabeledSpan, read_props, write_props
from s2srl.decode import (
    COPY,
    GENERATE,
    DecodeResult,
    Decoded,
    gold_outputs,
    greedy_decode,
    max_decode_len,
    recover_rare_words,
    teacher_forced_accuracy,
    to_conll,
)
from s2srl.linearize import PRED, UNK, apply_vocab, is_bracket, linearize

from conftest import sentence, tiny_setup


def all_instances(sentences):
    return [linearize(s, k, i) for i, s in enumerate(sentences) for k in range(len(s.predicates))]


def test_untrained_model_terminates_and_respects_contracts():
    model, vocab, inst, _ = tiny_setup()
    r = greedy_decode(model, vocab, inst)
    assert len(r.tokens) <= max_decode_len(len(inst.source))
    assert PRED not in r.tokens
    assert len(r.tokens) == len(r.modes) == len(r.positions)
    for tok, mode, pos in zip(r.tokens, r.modes, r.positions):
        if mode == COPY:
            assert 0 <= pos < len(inst.source)
            assert inst.original_source()[pos] == tok or tok == UNK
        else:
            assert pos is None and tok in vocab.stoi
    again = greedy_decode(model, vocab, inst)
    assert again == r
    assert all(np.array_equal(a, b) for a, b in zip(again.attention, r.attention))


def test_ties_break_to_lowest_index_and_cap_holds():
    model, vocab, inst, _ = tiny_setup()
    for p in model.parameters():
        p.data[:] = 0.0
    # every source word outside V: all candidates tie and UNK (id 0) wins each step
    inst = apply_vocab(inst, set())
    r = greedy_decode(model, vocab, inst)
    assert r.tokens == [UNK] * max_decode_len(len(inst.source))
    assert set(r.modes) == {GENERATE}
    assert not r.comparable


def test_explicit_length_cap():
    model, vocab, inst, _ = tiny_setup()
    for p in model.parameters():
        p.data[:] = 0.0
    assert len(greedy_decode(model, vocab, apply_vocab(inst, set()), max_len=3).tokens) == 3


def test_recover_rare_words():
    r = DecodeResult(["a", UNK, UNK, "b"], [GENERATE, COPY, GENERATE, COPY], [None, 4, None, 0])
    assert recover_rare_words(r, []) == r.tokens
    assert recover_rare_words(r, [(4, "zenith")]) == ["a", "zenith", UNK, "b"]


def test_gold_targets_round_trip_byte_identical(toy_path, toy):
    out, flags = to_conll(toy, gold_outputs(all_instances(toy)))
    assert write_props(out) == toy_path.read_text(encoding="utf-8")
    assert all(all(row) for row in flags)


def test_gold_round_trip_survives_unk_masking(toy):
    inst = [apply_vocab(i, {"the", "bank"}) for i in all_instances(toy)]
    out, _ = to_conll(toy, gold_outputs(inst))
    assert out == toy


def test_bonds_sentence_reassembles(bonds_sentence):
    out, flags = to_conll([bonds_sentence], gold_outputs(all_instances([bonds_sentence])))
    assert out == [bonds_sentence]
    text = write_props(out)
    assert all(len(line.split("\t")) == 5 for line in text.splitlines() if line)


def test_non_comparable_instance_keeps_only_verb(bonds_sentence):
    outs = gold_outputs(all_instances([bonds_sentence]))
    outs[1] = Decoded(outs[1].origin, [t for t in outs[1].tokens if t != "bonds"])
    out, flags = to_conll([bonds_sentence], outs)
    assert flags == [[True, False, True]]
    assert out[0].predicates[1].spans == [LabeledSpan(11, 11, "V")]
    assert out[0].predicates[0] == bonds_sentence.predicates[0]
    assert out[0].predicates[2] == bonds_sentence.predicates[2]


def test_malformed_output_is_sanitized(bonds_sentence):
    outs = gold_outputs(all_instances([bonds_sentence]))
    words = [t for t in outs[0].tokens if not is_bracket(t)]
    # an argument over the predicate and a nested pair; V is missing
    tokens = ["(#", "(#"] + words[:4] + ["p0:a0)", "p0:a1)"] + words[4:]
    outs[0] = Decoded(outs[0].origin, tokens)
    out, flags = to_conll([bonds_sentence], outs)
    assert flags[0][0]
    assert out[0].predicates[0].spans == [LabeledSpan(3, 3, "V")]
    out[0].validate()


def test_bookkeeping_errors(bonds_sentence):
    outs = gold_outputs(all_instances([bonds_sentence]))
    with pytest.raises(ContractError, match="missing"):
        to_conll([bonds_sentence], outs[:2])
    with pytest.raises(ContractError, match="duplicate"):
        to_conll([bonds_sentence], outs + [outs[0]])


def test_teacher_forced_accuracy_range():
    model, vocab, inst, _ = tiny_setup()
    acc = teacher_forced_accuracy(model, vocab, [inst])
    assert 0.0 <= acc <= 1.0
    assert teacher_forced_accuracy(model, vocab, []) == 0.0
