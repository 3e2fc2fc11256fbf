import hashlib

import numpy as np
import pytest

from pcvc_vowels.audio_io import AudioClip, write_wav
from pcvc_vowels.errors import (
    EmptySplit,
    FeatureDimensionMismatch,
    NoTrainableExamples,
    NoVowelFound,
    UnknownSpeaker,
)
from pcvc_vowels.manifest import Manifest, ManifestEntry
from pcvc_vowels.mfcc import MfccConfig
from pcvc_vowels.mlp import TrainOptions, init_model, model_to_json
from pcvc_vowels.phonemes import CONSONANTS, VOWELS, VowelLabel
from pcvc_vowels.pipeline import (
    PUBLISHED_RECOGNITION,
    ConfusionMatrix,
    EvalReport,
    default_test_speakers,
    evaluate,
    featurize_manifest,
    file_features,
    model_settings,
    predict_file,
    report_from_predictions,
    split_by_speaker,
    train_pipeline,
)


def fake_manifest(n_speakers=4):
    entries = [ManifestEntry(f"spk{s}/{c}_{v.ascii}.wav", f"spk{s}", c, v)
               for s in range(1, n_speakers + 1) for c in CONSONANTS for v in VOWELS]
    return Manifest(entries)


def oracle(true_by_row):
    rows = iter(true_by_row)

    def predictor(model, x):
        return next(rows), np.zeros(6)
    return predictor


# split

def test_split_arithmetic():
    m = fake_manifest()
    assert len(m) == 4 * 138
    train, test = split_by_speaker(m, {"spk4"})
    assert (len(train), len(test)) == (3 * 138, 138)
    assert not {e.path for e in train} & {e.path for e in test}
    assert {e.path for e in train} | {e.path for e in test} == {e.path for e in m}


def test_split_errors():
    m = fake_manifest()
    with pytest.raises(EmptySplit):
        split_by_speaker(m, m.speakers)
    with pytest.raises(EmptySplit):
        split_by_speaker(m, [])
    with pytest.raises(UnknownSpeaker):
        split_by_speaker(m, ["spk9"])


def test_default_test_speakers():
    assert default_test_speakers(fake_manifest(10)) == ["spk8", "spk9"]
    assert default_test_speakers(fake_manifest(2)) == ["spk2"]
    with pytest.raises(EmptySplit):
        default_test_speakers(fake_manifest(1))


# training

def test_train_improves_and_records_settings(trained4):
    result, _ = trained4
    assert result.report.final_performance < result.report.initial_performance
    assert result.n_examples == 3 * 138 and result.skipped == []
    cfg = result.model.config
    assert cfg["train_speakers"] == ["spk01", "spk02", "spk03"]
    seg, mf = model_settings(result.model)
    assert mf == MfccConfig() and mf.n_coeffs == result.model.n_inputs == 50
    assert result.model.n_hidden == 50


def test_train_deterministic(small_corpus):
    opts = TrainOptions(max_epochs=40)
    a = train_pipeline(small_corpus, train_opts=opts)
    b = train_pipeline(small_corpus, train_opts=opts)
    assert model_to_json(a.model) == model_to_json(b.model)


def test_silence_manifest_has_nothing_to_train(tmp_path):
    entries = []
    for i, v in enumerate(VOWELS[:3]):
        write_wav(AudioClip(np.zeros(32000), 16000), tmp_path / f"s{i}.wav")
        entries.append(ManifestEntry(f"s{i}.wav", "spk1", "B", v))
    with pytest.raises(NoTrainableExamples):
        train_pipeline(Manifest(entries, root=tmp_path))


# evaluation

def test_oracle_predictor_scores_100(trained4):
    result, test = trained4
    feats = featurize_manifest(test, *model_settings(result.model))
    report = evaluate(result.model, test, predictor=oracle(feats.labels))
    assert report.per_class_percent == [100.0] * 6
    assert report.average_percent == 100.0


def test_row_sums_match_true_counts(trained4):
    result, test = trained4
    report = evaluate(result.model, test)
    cm = report.confusion
    for v in VOWELS:
        assert cm.class_totals()[v.index] == sum(e.vowel is v for e in test)
    assert cm.total == len(test)
    defined = [p for p in report.per_class_percent if p is not None]
    assert report.average_percent == pytest.approx(sum(defined) / len(defined), abs=1e-9)


def test_held_out_ae_accuracy(trained4):
    result, test = trained4
    ae = [e for e in test if e.vowel is VowelLabel.AE]
    hits = sum(predict_file(result.model, test.resolve(e)).label is VowelLabel.AE for e in ae)
    assert hits / len(ae) >= 0.8


def test_unsegmentable_test_clip_counts_as_miss(tmp_path, trained4):
    result, _ = trained4
    write_wav(AudioClip(np.zeros(32000), 16000), tmp_path / "quiet.wav")
    report = evaluate(result.model, Manifest([ManifestEntry("quiet.wav", "x", "B", VowelLabel.O)], root=tmp_path))
    assert report.confusion.rejected[VowelLabel.O.index] == 1
    assert report.per_class_percent[VowelLabel.O.index] == 0.0
    assert report.per_class_percent[VowelLabel.A.index] is None
    assert report.average_percent == 0.0


def test_feature_dimension_mismatch(small_corpus):
    model = init_model(13)
    model.config["mfcc"] = MfccConfig().to_dict()
    with pytest.raises(FeatureDimensionMismatch):
        evaluate(model, small_corpus)
    with pytest.raises(FeatureDimensionMismatch):
        predict_file(model, small_corpus.resolve(small_corpus.entries[0]))


def test_training_and_eval_share_features(trained4):
    result, test = trained4
    seg, cfg = model_settings(result.model)
    sub = test.subset(test.entries[:12])
    batch = featurize_manifest(sub, seg, cfg)
    for row, entry in zip(batch.X, sub):
        single = predict_file(result.model, sub.resolve(entry)).features.values
        assert hashlib.sha256(row.tobytes()).hexdigest() == hashlib.sha256(single.tobytes()).hexdigest()
        assert file_features(sub.resolve(entry), seg, cfg)[0].values.tobytes() == row.tobytes()


def test_report_average_and_na_rows():
    report = report_from_predictions([VowelLabel.A, VowelLabel.A, VowelLabel.I, VowelLabel.O],
                                     [VowelLabel.A, VowelLabel.U, VowelLabel.I, VowelLabel.A])
    assert report.per_class_percent == [50.0, 100.0, None, None, None, 0.0]
    assert report.average_percent == pytest.approx(50.0, abs=1e-9)
    doc = report.to_json()
    assert list(doc["per_class_percent"]) == [v.value for v in VOWELS]
    assert doc["per_class_percent"]["e"] is None
    assert "n/a" in report.table() and report.table().splitlines()[-1].endswith("50.0")


def test_empty_confusion():
    report = EvalReport.from_confusion(ConfusionMatrix())
    assert report.average_percent is None and report.per_class_percent == [None] * 6


def test_reference_values_are_documentation():
    assert list(PUBLISHED_RECOGNITION) == [v.value for v in VOWELS]
    assert sum(PUBLISHED_RECOGNITION.values()) / 6 == pytest.approx(94.0)


# single-file prediction

def test_silence_file_raises(tmp_path, trained4):
    write_wav(AudioClip(np.zeros(32000), 16000), tmp_path / "q.wav")
    with pytest.raises(NoVowelFound):
        predict_file(trained4[0].model, tmp_path / "q.wav")


def test_prediction_json_schema(trained4):
    result, test = trained4
    doc = predict_file(result.model, test.resolve(test.entries[0])).to_json()
    assert doc["labels"] == [v.value for v in VOWELS]
    assert len(doc["scores"]) == 6 and all(isinstance(s, float) for s in doc["scores"])
    assert doc["label"] == doc["labels"][int(np.argmax(doc["scores"]))]
    assert set(doc["segment"]) == {"start_s", "end_s", "noise_ceiling", "threshold"}
