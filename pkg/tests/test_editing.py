import numpy as np
import pytest

from hedkit import editing as ed
from hedkit.corpus import (
    BASE_ENERGY_LOG,
    BASE_LOGDUR,
    BASE_PITCH_LOG,
    SynthSpec,
)
from hedkit.errors import (
    ConfigError,
    InvalidInput,
    PolicyError,
    ReplayError,
)
from hedkit.hed import HierarchicalED
from hedkit.neural import Layer, MlpModel
from hedkit.predictor import encode, new_predictor, predict, predict_phones, \
    predict_words
from hedkit.ranker import EmotionSet
from hedkit.renderer import RendererModel, build_speaker_table, render, \
    aligned_from_ranges

EMO = EmotionSet()
VOCAB = ["AA", "B", "K", "IY", "N", "S", "T", "UW"]
WORDS = (("AA", "B"), ("K", "IY", "N"))

FIXED_CLOCK = lambda: 1700000000.0  # noqa: E731


def make_session(predictor_mode="multi_step", with_predictor=True, seed=0):
    pred = new_predictor(VOCAB, mode=predictor_mode, seed=seed)
    if with_predictor:
        return ed.session_from_text(pred, WORDS, clock=FIXED_CLOCK)
    enc = encode(pred.table, WORDS)
    hed = predict(pred, enc)
    return ed.session_from_hed(hed, enc=enc, clock=FIXED_CLOCK)


def rule_renderer(spec: SynthSpec):
    """Prosody head that computes the corpus rule map exactly (speaker 0)."""
    pred = new_predictor(spec.inventory, emotions=spec.emotions, seed=0)
    k = pred.table.k
    e = spec.emotions.size
    s = 4
    speakers = build_speaker_table(spec.speakers, s=s, seed=3)
    deltas = np.array([spec.rules[lab] for lab in spec.emotions.labels])
    w = np.zeros((3, k + 3 * e + s))
    for level in range(3):
        w[:, k + level * e:k + (level + 1) * e] = deltas.T / 3.0
    b = np.array([BASE_PITCH_LOG, BASE_ENERGY_LOG, BASE_LOGDUR])
    net = MlpModel(layers=[Layer(W=w, b=b, activation="identity")])
    return RendererModel(mode="va", prosody_net=net, speakers=speakers,
                         emotions=spec.emotions, predictor=pred)


class TestEditCommand:
    def test_bad_level(self):
        with pytest.raises(InvalidInput):
            ed.EditCommand(level="syllable", emotion="Sad", value=0.5)

    def test_bad_policy(self):
        with pytest.raises(InvalidInput):
            ed.EditCommand(level="word", emotion="Sad", value=0.5,
                           downstream_policy="cascade")

    @pytest.mark.parametrize("value", [1.5, -0.1, float("nan")])
    def test_out_of_range_value_rejected(self, value):
        with pytest.raises(InvalidInput):
            ed.EditCommand(level="word", emotion="Sad", value=value)

    def test_round_trip_dict(self):
        cmd = ed.EditCommand(level="phoneme", index=3, emotion="Happy",
                             value=0.75, downstream_policy="repredict")
        assert ed.command_from_dict(ed.command_to_dict(cmd)) == cmd

    def test_from_dict_bad_record(self):
        with pytest.raises(ReplayError):
            ed.command_from_dict({"level": "word"})


class TestApplyEditHold:
    def test_exactly_one_scalar_changes(self):
        s = make_session()
        before = s.current.copy()
        ed.apply_edit(s, ed.EditCommand(level="word", index=1, emotion="Angry",
                                        value=1.0))
        diff_w = s.current.words != before.words
        assert diff_w.sum() == 1
        assert s.current.words[1, EMO.index("Angry")] == 1.0
        assert np.array_equal(s.current.utterance, before.utterance)
        assert np.array_equal(s.current.phones, before.phones)

    def test_replication_matrix_word_block_locality(self):
        s = make_session()
        before = s.aligned().matrix.copy()
        ed.apply_edit(s, ed.EditCommand(level="word", index=0, emotion="Angry",
                                        value=1.0))
        after = s.aligned().matrix
        e = EMO.size
        lo, hi = s.word_ranges[0]
        changed_rows = np.where(np.any(before != after, axis=1))[0]
        assert list(changed_rows) == list(range(lo, hi))
        # only the word block moved
        assert np.array_equal(before[:, :e], after[:, :e])
        assert np.array_equal(before[:, 2 * e:], after[:, 2 * e:])

    def test_utterance_edit_ignores_index(self):
        s = make_session()
        ed.apply_edit(s, ed.EditCommand(level="utterance", index=99,
                                        emotion="Sad", value=0.9))
        assert s.current.utterance[EMO.index("Sad")] == 0.9

    def test_phoneme_edit(self):
        s = make_session()
        ed.apply_edit(s, ed.EditCommand(level="phoneme", index=4,
                                        emotion="Surprise", value=0.25))
        assert s.current.phones[4, EMO.index("Surprise")] == 0.25

    def test_word_index_out_of_range(self):
        s = make_session()
        with pytest.raises(IndexError):
            ed.apply_edit(s, ed.EditCommand(level="word", index=2,
                                            emotion="Sad", value=0.5))

    def test_phoneme_index_out_of_range(self):
        s = make_session()
        with pytest.raises(IndexError):
            ed.apply_edit(s, ed.EditCommand(level="phoneme", index=5,
                                            emotion="Sad", value=0.5))

    def test_unknown_emotion(self):
        s = make_session()
        with pytest.raises(InvalidInput):
            ed.apply_edit(s, ed.EditCommand(level="word", index=0,
                                            emotion="Bored", value=0.5))

    def test_failed_edit_leaves_state_and_log(self):
        s = make_session()
        before = s.current.copy()
        with pytest.raises(IndexError):
            ed.apply_edit(s, ed.EditCommand(level="word", index=9,
                                            emotion="Sad", value=0.5))
        assert s.current == before
        assert s.log == []


class TestRepredict:
    def test_utterance_edit_recomputes_lower_levels(self):
        s = make_session()
        cmd = ed.EditCommand(level="utterance", emotion="Happy", value=1.0,
                             downstream_policy="repredict")
        ed.apply_edit(s, cmd)
        utt = s.current.utterance
        assert utt[EMO.index("Happy")] == 1.0
        want_words = predict_words(s.predictor, s.enc, utt)
        assert np.array_equal(s.current.words, want_words)
        want_phones = predict_phones(s.predictor, s.enc, want_words, utt)
        assert np.array_equal(s.current.phones, want_phones)
        # replication matrix: every utterance row equals the edited vector
        aligned = s.aligned().matrix
        assert np.array_equal(aligned[:, :EMO.size],
                              np.tile(utt, (s.enc.n_phones, 1)))

    def test_word_edit_repredicts_phones_only(self):
        s = make_session()
        before = s.current.copy()
        cmd = ed.EditCommand(level="word", index=1, emotion="Sad", value=0.8,
                             downstream_policy="repredict")
        ed.apply_edit(s, cmd)
        assert np.array_equal(s.current.utterance, before.utterance)
        want = predict_phones(s.predictor, s.enc, s.current.words,
                              s.current.utterance)
        assert np.array_equal(s.current.phones, want)

    def test_manual_entries_survive_repredict(self):
        s = make_session()
        ed.apply_edit(s, ed.EditCommand(level="word", index=0,
                                        emotion="Angry", value=0.77))
        ed.apply_edit(s, ed.EditCommand(level="phoneme", index=2,
                                        emotion="Sad", value=0.33))
        ed.apply_edit(s, ed.EditCommand(level="utterance", emotion="Happy",
                                        value=1.0,
                                        downstream_policy="repredict"))
        assert s.current.words[0, EMO.index("Angry")] == 0.77
        assert s.current.phones[2, EMO.index("Sad")] == 0.33
        # a non-manual word entry did get re-predicted
        fresh = predict_words(s.predictor, s.enc, s.current.utterance)
        assert s.current.words[1, EMO.index("Sad")] \
            == fresh[1, EMO.index("Sad")]

    def test_repredict_without_predictor(self):
        s = make_session(with_predictor=False)
        with pytest.raises(PolicyError):
            ed.apply_edit(s, ed.EditCommand(level="utterance", emotion="Sad",
                                            value=0.5,
                                            downstream_policy="repredict"))

    def test_values_stay_in_unit_interval(self):
        s = make_session()
        rng = np.random.default_rng(11)
        levels = ["utterance", "word", "phoneme"]
        sizes = {"utterance": 1, "word": 2, "phoneme": 5}
        for _ in range(50):
            level = levels[rng.integers(0, 3)]
            cmd = ed.EditCommand(
                level=level, index=int(rng.integers(0, sizes[level])),
                emotion=EMO.labels[rng.integers(0, EMO.size)],
                value=float(rng.uniform(0, 1)),
                downstream_policy="repredict" if rng.random() < 0.5
                else "hold")
            ed.apply_edit(s, cmd)
            for arr in (s.current.utterance, s.current.words,
                        s.current.phones):
                assert np.all(arr >= 0.0) and np.all(arr <= 1.0)


class TestReplay:
    def test_empty_log_gives_base(self):
        s = make_session()
        assert ed.replay(s) == s.base

    def test_single_edit(self):
        s = make_session()
        ed.apply_edit(s, ed.EditCommand(level="word", index=1, emotion="Sad",
                                        value=0.6))
        assert ed.replay(s) == s.current

    @pytest.mark.parametrize("seed", range(5))
    def test_random_sequences_bitwise(self, seed):
        s = make_session(seed=seed)
        rng = np.random.default_rng(100 + seed)
        levels = ["utterance", "word", "phoneme"]
        sizes = {"utterance": 1, "word": 2, "phoneme": 5}
        for _ in range(10):
            level = levels[rng.integers(0, 3)]
            ed.apply_edit(s, ed.EditCommand(
                level=level, index=int(rng.integers(0, sizes[level])),
                emotion=EMO.labels[rng.integers(0, EMO.size)],
                value=float(rng.uniform(0, 1)),
                downstream_policy="repredict" if rng.random() < 0.5
                else "hold"))
        assert ed.replay(s) == s.current

    def test_corrupt_log(self):
        s = make_session()
        ed.apply_edit(s, ed.EditCommand(level="word", index=0, emotion="Sad",
                                        value=0.5))
        s.log.append((1.0, "not-a-command"))
        with pytest.raises(ReplayError):
            ed.replay(s)


class TestSweep:
    def setup_method(self):
        self.spec = SynthSpec(with_audio=False)
        self.renderer = rule_renderer(self.spec)
        words = (("AA", "B"), ("K", "IY", "N"))
        enc = encode(self.renderer.table, words)
        hed = HierarchicalED(
            utterance=np.full(4, 0.2), words=np.full((2, 4), 0.2),
            phones=np.full((5, 4), 0.2), emotions=self.spec.emotions)
        self.session = ed.session_from_hed(hed, enc=enc, clock=FIXED_CLOCK)

    def test_rule_renderer_matches_rule_map(self):
        from hedkit.corpus import contour_from_rules
        words = (("AA", "B"), ("K", "IY", "N"))
        want = contour_from_rules(self.spec, words, self.session.current,
                                  "spk0")
        got = ed.render_session(self.session, self.renderer)
        assert np.allclose(got.pitch_log_hz, want.pitch_log_hz, atol=1e-9)
        assert np.allclose(got.duration_s, want.duration_s, atol=1e-9)

    def test_angry_sweep_increases_energy(self):
        cmd = ed.EditCommand(level="utterance", emotion="Angry", value=0.0)
        results = ed.intensity_sweep(self.session, cmd, [0.0, 0.5, 1.0],
                                     self.renderer)
        energy = [st["energy_mean"] for _, st in results]
        assert energy[0] < energy[1] < energy[2]

    def test_ignored_stat_constant(self):
        # Surprise has a zero duration delta in the default rules
        cmd = ed.EditCommand(level="utterance", emotion="Surprise", value=0.0)
        results = ed.intensity_sweep(self.session, cmd, [0.0, 0.5, 1.0],
                                     self.renderer)
        durs = [st["duration_total"] for _, st in results]
        assert max(durs) - min(durs) < 1e-9

    def test_word_scope(self):
        cmd = ed.EditCommand(level="word", index=1, emotion="Sad", value=0.0)
        results = ed.intensity_sweep(self.session, cmd, [0.0, 1.0],
                                     self.renderer, scope=1)
        assert results[1][1]["duration_total"] > results[0][1]["duration_total"]
        # the other word is untouched
        other = ed.intensity_sweep(self.session, cmd, [0.0, 1.0],
                                   self.renderer, scope=0)
        assert other[0][1] == other[1][1]

    def test_compound_template(self):
        word_cmd = ed.EditCommand(level="word", index=0, emotion="Happy",
                                  value=0.0)
        phone_cmd = ed.EditCommand(level="phoneme", index=0, emotion="Happy",
                                   value=0.0)
        single = ed.intensity_sweep(self.session, word_cmd, [1.0],
                                    self.renderer, scope=0)
        compound = ed.intensity_sweep(self.session, [word_cmd, phone_cmd],
                                      [1.0], self.renderer, scope=0)
        # compound edit moves pitch further (two of three levels raised)
        assert compound[0][1]["pitch_mean"] > single[0][1]["pitch_mean"]

    def test_session_untouched(self):
        before = self.session.current.copy()
        cmd = ed.EditCommand(level="utterance", emotion="Angry", value=0.0)
        ed.intensity_sweep(self.session, cmd, [0.0, 1.0], self.renderer)
        assert self.session.current == before
        assert self.session.log == []

    def test_empty_values(self):
        cmd = ed.EditCommand(level="utterance", emotion="Angry", value=0.0)
        assert ed.intensity_sweep(self.session, cmd, [], self.renderer) == []


class TestLogIO:
    def test_round_trip(self, tmp_path):
        s = make_session()
        ed.apply_edit(s, ed.EditCommand(level="word", index=1, emotion="Sad",
                                        value=0.6))
        ed.apply_edit(s, ed.EditCommand(level="utterance", emotion="Happy",
                                        value=1.0,
                                        downstream_policy="repredict"))
        path = tmp_path / "edits.jsonl"
        ed.save_edit_log(s, path)
        records = ed.load_edit_log(path)
        assert [cmd for _, cmd in records] == [cmd for _, cmd in s.log]
        assert all(ts == FIXED_CLOCK() for ts, _ in records)

    def test_corrupt_line(self, tmp_path):
        path = tmp_path / "edits.jsonl"
        path.write_text('{"level": "word"}\n')
        with pytest.raises(ReplayError):
            ed.load_edit_log(path)

    def test_not_json(self, tmp_path):
        path = tmp_path / "edits.jsonl"
        path.write_text("level,word\n")
        with pytest.raises(ReplayError):
            ed.load_edit_log(path)


class TestSnapshot:
    def test_round_trip_with_repredict(self):
        s = make_session()
        ed.apply_edit(s, ed.EditCommand(level="word", index=0,
                                        emotion="Angry", value=0.9))
        ed.apply_edit(s, ed.EditCommand(level="utterance", emotion="Sad",
                                        value=0.7,
                                        downstream_policy="repredict"))
        doc = ed.session_to_dict(s)
        restored = ed.session_from_dict(doc, enc=s.enc, predictor=s.predictor,
                                        clock=FIXED_CLOCK)
        assert restored.current == s.current
        assert restored.base == s.base
        assert len(restored.log) == 2

    def test_snapshot_mismatch_detected(self):
        s = make_session()
        ed.apply_edit(s, ed.EditCommand(level="word", index=0,
                                        emotion="Angry", value=0.9))
        doc = ed.session_to_dict(s)
        doc["current"]["utterance"][0] = 0.123
        with pytest.raises(ReplayError):
            ed.session_from_dict(doc, enc=s.enc, predictor=s.predictor)

    def test_session_needs_text_or_timing(self):
        s = make_session()
        with pytest.raises(ConfigError):
            ed.EditSession(source=ed.PREDICTED_FROM_TEXT, base=s.base,
                           current=s.base.copy())

    def test_session_shape_mismatch(self):
        s = make_session()
        small = HierarchicalED(
            utterance=s.base.utterance, words=s.base.words[:1],
            phones=s.base.phones[:2], emotions=EMO)
        with pytest.raises(ConfigError):
            ed.EditSession(source=ed.PREDICTED_FROM_TEXT, base=small,
                           current=small.copy(), enc=s.enc)


class TestSessionConstructors:
    def test_from_text_matches_predictor(self):
        pred = new_predictor(VOCAB, seed=4)
        s = ed.session_from_text(pred, WORDS)
        enc = encode(pred.table, WORDS)
        assert s.current == predict(pred, enc)
        assert s.source == ed.PREDICTED_FROM_TEXT

    def test_bad_source(self):
        s = make_session()
        with pytest.raises(InvalidInput):
            ed.session_from_hed(s.base, enc=s.enc, source="scraped")
