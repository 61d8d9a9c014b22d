import numpy as np
import pytest

from hedkit.errors import ConfigError, EmptyDataset, InvalidInput
from hedkit.hed import HierarchicalED
from hedkit.neural import TrainConfig, flatten_params
from hedkit.predictor import (
    MULTI_STEP,
    SINGLE_STEP,
    EdPredictor,
    build_embedding_table,
    encode,
    eval_predictor,
    load_predictor,
    new_predictor,
    predict,
    predict_phones,
    predict_utterance,
    predict_words,
    predictor_from_dict,
    predictor_to_dict,
    save_predictor,
    train_predictor,
)

VOCAB = ["AA", "B", "K", "IY", "N", "S", "T", "UW"]


def toy_corpus(rng, n_items=10):
    """Random texts with random target EDs in the sigmoid-reachable interior."""
    corpus = []
    for _ in range(n_items):
        n_words = int(rng.integers(1, 4))
        words = [tuple(rng.choice(VOCAB, size=rng.integers(1, 4)))
                 for _ in range(n_words)]
        n_phones = sum(len(w) for w in words)
        gt = HierarchicalED(
            utterance=rng.uniform(0.1, 0.9, 4),
            words=rng.uniform(0.1, 0.9, (n_words, 4)),
            phones=rng.uniform(0.1, 0.9, (n_phones, 4)))
        corpus.append((words, gt))
    return corpus


def test_encode_single_phone_pooling():
    table = build_embedding_table(VOCAB, seed=0)
    enc = encode(table, [("AA",)])
    assert np.array_equal(enc.utt_pooled, enc.word_pooled[0])
    assert np.array_equal(enc.utt_pooled, enc.phone_embeddings[0])


def test_encode_identical_phones_pool_to_shared_embedding():
    table = build_embedding_table(VOCAB, seed=0)
    enc = encode(table, [("B", "B")])
    row = table.matrix[table.index("B")]
    assert np.allclose(enc.utt_pooled, row)
    assert np.allclose(enc.word_pooled[0], row)


def test_encode_word_permutation_keeps_utt_pooled():
    table = build_embedding_table(VOCAB, seed=0)
    words = [("B", "AA"), ("K", "IY", "T"), ("S",)]
    a = encode(table, words)
    b = encode(table, words[::-1])
    assert np.allclose(a.utt_pooled, b.utt_pooled)
    assert not np.array_equal(a.word_pooled, b.word_pooled)


def test_encode_pooling_invariants_exact():
    table = build_embedding_table(VOCAB, seed=3)
    words = [("B", "IY"), ("N", "UW", "S")]
    enc = encode(table, words)
    for w, (lo, hi) in enumerate(enc.word_phone_ranges):
        assert np.array_equal(enc.word_pooled[w],
                              enc.phone_embeddings[lo:hi].mean(axis=0))
    assert np.array_equal(enc.utt_pooled, enc.phone_embeddings.mean(axis=0))


def test_encode_unknown_symbol_gets_unk_row():
    table = build_embedding_table(VOCAB, seed=0)
    enc = encode(table, [("ZZZ",)])
    assert np.array_equal(enc.phone_embeddings[0], table.matrix[0])


def test_encode_rejects_empty():
    table = build_embedding_table(VOCAB, seed=0)
    with pytest.raises(InvalidInput):
        encode(table, [])
    with pytest.raises(InvalidInput):
        encode(table, [()])


def test_predict_outputs_in_open_unit_interval():
    for mode in (MULTI_STEP, SINGLE_STEP):
        pred = new_predictor(VOCAB, mode=mode, seed=1)
        enc = encode(pred.table, [("B", "AA"), ("T",)])
        hed = predict(pred, enc)
        for arr in (hed.utterance, hed.words, hed.phones):
            assert np.all((arr > 0) & (arr < 1))
        assert hed.words.shape == (2, 4)
        assert hed.phones.shape == (3, 4)


def test_multi_step_words_depend_on_utterance_ed():
    pred = new_predictor(VOCAB, mode=MULTI_STEP, seed=2)
    enc = encode(pred.table, [("B", "AA"), ("K",)])
    utt = predict_utterance(pred, enc)
    base = predict_words(pred, enc, utt)
    shifted = predict_words(pred, enc, np.clip(utt + 0.1, 0, 1))
    assert np.max(np.abs(base - shifted)) > 1e-6


def test_single_step_ignores_injected_upstream():
    pred = new_predictor(VOCAB, mode=SINGLE_STEP, seed=2)
    enc = encode(pred.table, [("B", "AA"), ("K",)])
    rng = np.random.default_rng(0)
    words_a = predict_words(pred, enc, rng.random(4))
    words_b = predict_words(pred, enc, rng.random(4))
    assert np.array_equal(words_a, words_b)
    phones_a = predict_phones(pred, enc, rng.random((2, 4)), rng.random(4))
    phones_b = predict_phones(pred, enc, rng.random((2, 4)), rng.random(4))
    assert np.array_equal(phones_a, phones_b)


def test_identical_words_get_identical_word_eds():
    pred = new_predictor(VOCAB, mode=MULTI_STEP, seed=4)
    enc = encode(pred.table, [("N", "UW"), ("N", "UW")])
    hed = predict(pred, enc)
    assert np.array_equal(hed.words[0], hed.words[1])


def test_train_memorizes_small_corpus():
    rng = np.random.default_rng(10)
    corpus = toy_corpus(rng, n_items=10)
    pred = new_predictor(VOCAB, mode=MULTI_STEP, seed=0, hidden=32)
    cfg = TrainConfig(learning_rate=0.3, epochs=600, batch_size=8, seed=0)
    _, history = train_predictor(pred, corpus, cfg)
    assert set(history) == {"utterance", "words", "phones"}
    for level, losses in history.items():
        assert losses[-1] < 0.01, f"{level}: {losses[-1]}"


def test_train_constant_targets():
    rng = np.random.default_rng(11)
    corpus = []
    for words, gt in toy_corpus(rng, n_items=8):
        const = HierarchicalED(utterance=np.full(4, 0.5),
                               words=np.full(gt.words.shape, 0.5),
                               phones=np.full(gt.phones.shape, 0.5))
        corpus.append((words, const))
    pred = new_predictor(VOCAB, mode=SINGLE_STEP, seed=1)
    cfg = TrainConfig(learning_rate=0.3, epochs=300, batch_size=8, seed=0)
    _, history = train_predictor(pred, corpus, cfg)
    for losses in history.values():
        assert losses[-1] < 1e-3


def test_train_deterministic_history():
    rng = np.random.default_rng(12)
    corpus = toy_corpus(rng, n_items=5)
    cfg = TrainConfig(learning_rate=0.2, epochs=40, batch_size=4, seed=5)
    _, h1 = train_predictor(new_predictor(VOCAB, seed=3), corpus, cfg)
    _, h2 = train_predictor(new_predictor(VOCAB, seed=3), corpus, cfg)
    assert h1 == h2


def test_train_empty_corpus():
    pred = new_predictor(VOCAB, seed=0)
    with pytest.raises(EmptyDataset):
        train_predictor(pred, [])


def test_sequential_stages_freeze_upstream_heads():
    rng = np.random.default_rng(13)
    corpus = toy_corpus(rng, n_items=4)
    pred = new_predictor(VOCAB, mode=MULTI_STEP, seed=6)
    cfg = TrainConfig(learning_rate=0.2, epochs=10, batch_size=4, seed=0)
    # train only via the word/phone datasets by snapshotting before
    train_predictor(pred, corpus, cfg)
    utt_snapshot = flatten_params(pred.utt_net).copy()
    word_snapshot = flatten_params(pred.word_net).copy()
    # retraining only re-runs all three stages; verify the utterance head is
    # bit-identical between the end of its own stage and the end of training
    pred2 = new_predictor(VOCAB, mode=MULTI_STEP, seed=6)
    from hedkit.predictor import _level_datasets
    from hedkit.neural import fit
    from dataclasses import replace
    utt_xy, _, _ = _level_datasets(pred2, corpus)
    fit(pred2.utt_net, utt_xy[0], utt_xy[1], replace(cfg, seed=cfg.seed))
    assert np.array_equal(flatten_params(pred2.utt_net), utt_snapshot)
    assert word_snapshot.shape  # word head exists and trained


def test_eval_report_structure_and_teacher_forcing_gap():
    rng = np.random.default_rng(14)
    corpus = toy_corpus(rng, n_items=12)
    pred = new_predictor(VOCAB, mode=MULTI_STEP, seed=0, hidden=32)
    cfg = TrainConfig(learning_rate=0.3, epochs=400, batch_size=8, seed=0)
    train_predictor(pred, corpus, cfg)
    rep_gt = eval_predictor(pred, corpus, teacher_forcing="ground_truth")
    rep_pred = eval_predictor(pred, corpus, teacher_forcing="predicted")
    for rep in (rep_gt, rep_pred):
        assert {"phones", "words", "utterance", "average"} <= set(rep)
        assert rep["average"] == pytest.approx(
            (rep["phones"] + rep["words"] + rep["utterance"]) / 3.0)
    # ground-truth upstream context matches the training distribution
    assert rep_gt["words"] <= rep_pred["words"] + 1e-12


def test_eval_perfect_predictor_near_zero():
    rng = np.random.default_rng(15)
    corpus = toy_corpus(rng, n_items=6)
    pred = new_predictor(VOCAB, mode=MULTI_STEP, seed=0, hidden=32)
    cfg = TrainConfig(learning_rate=0.3, epochs=800, batch_size=4, seed=0)
    train_predictor(pred, corpus, cfg)
    rep = eval_predictor(pred, corpus, teacher_forcing="ground_truth")
    assert rep["average"] < 0.06


def test_eval_teacher_forcing_rejected_for_single_step():
    pred = new_predictor(VOCAB, mode=SINGLE_STEP, seed=0)
    rng = np.random.default_rng(16)
    corpus = toy_corpus(rng, n_items=2)
    with pytest.raises(ConfigError):
        eval_predictor(pred, corpus, teacher_forcing="ground_truth")
    rep = eval_predictor(pred, corpus, teacher_forcing="predicted")
    assert "average" in rep


def test_predictor_bundle_round_trip(tmp_path):
    pred = new_predictor(VOCAB, mode=MULTI_STEP, seed=9)
    path = tmp_path / "pred.json"
    save_predictor(pred, path)
    back = load_predictor(path)
    assert back.mode == pred.mode
    assert back.table.symbols == pred.table.symbols
    enc = encode(pred.table, [("B", "AA"), ("T",)])
    assert predict(back, enc) == predict(pred, enc)
    doc = predictor_to_dict(pred)
    assert predictor_from_dict(doc).table.k == pred.table.k


def test_predictor_dim_validation():
    pred = new_predictor(VOCAB, mode=MULTI_STEP, seed=0)
    with pytest.raises(ConfigError):
        EdPredictor(mode=SINGLE_STEP, table=pred.table, utt_net=pred.utt_net,
                    word_net=pred.word_net, phone_net=pred.phone_net)
    with pytest.raises(ConfigError):
        EdPredictor(mode="triple_step", table=pred.table, utt_net=pred.utt_net,
                    word_net=pred.word_net, phone_net=pred.phone_net)


def test_corpus_shape_mismatch_rejected():
    pred = new_predictor(VOCAB, seed=0)
    gt = HierarchicalED(utterance=np.full(4, 0.5), words=np.full((2, 4), 0.5),
                        phones=np.full((3, 4), 0.5))
    with pytest.raises(InvalidInput):
        train_predictor(pred, [([("B",)], gt)])
