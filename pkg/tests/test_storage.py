import json

import numpy as np
import pytest

from myoselect.domain.contamination.planning import plan_random_contamination
from myoselect.domain.learners.forest import ForestConfig, ForestModel, predict_forest_batch, train_forest
from myoselect.errors import ContaminationError, ModelIOError, SignalSetError, SignalSetIOError
from myoselect.infrastructure.storage.model_store import FORMAT_VERSION, load_model, save_model
from myoselect.infrastructure.storage.plan_store import load_plans, save_plans
from myoselect.infrastructure.storage.signalset_store import MANIFEST_NAME, load_signalset, save_signalset


def test_signalset_round_trip(signalset, tmp_path):
    """
    Test that a saved signalset loads back with identical samples and metadata.
    """
    part = signalset.subset([0, 10, 20])
    save_signalset(part, tmp_path / "ds")
    loaded = load_signalset(tmp_path / "ds")
    assert len(loaded) == 3
    assert loaded.class_count == part.class_count
    assert loaded.channels == part.channels
    assert loaded.seed == part.seed
    for a, b in zip(loaded.recordings, part.recordings, strict=True):
        assert np.array_equal(a.samples, b.samples)
        assert a.label == b.label


def test_missing_manifest(tmp_path):
    """
    Test that a directory without a manifest raises an I/O error naming the file.
    """
    with pytest.raises(SignalSetIOError, match=MANIFEST_NAME):
        load_signalset(tmp_path)


def test_trial_with_wrong_channel_count(signalset, tmp_path):
    """
    Test that a trial file whose columns disagree with the manifest is rejected.
    """
    save_signalset(signalset.subset([0, 10, 20]), tmp_path)
    manifest = json.loads((tmp_path / MANIFEST_NAME).read_text(encoding="utf-8"))
    trial = tmp_path / manifest["trials"][0]["file"]
    trial.write_text("a,b\n1.0,2.0\n3.0,4.0\n", encoding="utf-8")
    with pytest.raises(SignalSetError, match="channel mismatch"):
        load_signalset(tmp_path)


def test_plans_round_trip(tmp_path):
    """
    Test that plans written as JSON lines read back in trial order.
    """
    plans = plan_random_contamination(5, 8, 3.0, seed=2)
    save_plans(plans, tmp_path / "plans.jsonl")
    assert load_plans(tmp_path / "plans.jsonl") == plans
    lines = (tmp_path / "plans.jsonl").read_text(encoding="utf-8").splitlines()
    assert json.loads(lines[0])["trial_index"] == 0


def test_invalid_plan_line(tmp_path):
    """
    Test that a malformed plan record raises with its line number.
    """
    (tmp_path / "plans.jsonl").write_text('{"trial_index": 0}\n', encoding="utf-8")
    with pytest.raises(ContaminationError, match=":1:"):
        load_plans(tmp_path / "plans.jsonl")


def test_model_round_trip(blobs, tmp_path):
    """
    Test that a saved forest loads back and predicts identically.
    """
    X, y = blobs
    model = train_forest(X, y, ForestConfig(trees=3, seed=4))
    save_model(model, tmp_path / "forest.json")
    document = json.loads((tmp_path / "forest.json").read_text(encoding="utf-8"))
    assert document["format"] == "myoselect-model"
    assert document["version"] == FORMAT_VERSION
    loaded = load_model(tmp_path / "forest.json", expected_kind="forest")
    assert isinstance(loaded, ForestModel)
    assert np.array_equal(predict_forest_batch(loaded, X), predict_forest_batch(model, X))


def test_model_kind_and_version_checks(blobs, tmp_path):
    """
    Test that unexpected kinds, versions and types are refused.
    """
    X, y = blobs
    save_model(train_forest(X, y, ForestConfig(trees=1)), tmp_path / "forest.json")
    with pytest.raises(ModelIOError, match="expected a ecoc model"):
        load_model(tmp_path / "forest.json", expected_kind="ecoc")
    document = json.loads((tmp_path / "forest.json").read_text(encoding="utf-8"))
    document["version"] = FORMAT_VERSION + 1
    (tmp_path / "future.json").write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(ModelIOError, match="version"):
        load_model(tmp_path / "future.json")
    with pytest.raises(ModelIOError, match="unsupported model type"):
        save_model(object(), tmp_path / "x.json")
    with pytest.raises(ModelIOError):
        load_model(tmp_path / "missing.json")
