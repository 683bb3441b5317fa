"""Tests for the retraining controller: window algebra of the three data
selection strategies, collection state machine, and learning modes.

A scripted detector lets the tests fire an alarm at an exact stream index
and observe exactly what the controller feeds back to it.
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftstream.adaptation import (
    LAST,
    MIXED,
    NEXT,
    STRATEGIES,
    Controller,
    ControllerConfig,
    ControllerError,
)
from driftstream.detectors import NoDetector
from driftstream.naive_bayes import NaiveBayesModel
from driftstream.preprocess import EncoderState
from driftstream.stream_core import CATEGORICAL, FeatureSchema, Instance, LabeledInstance

SCHEMA = FeatureSchema((("tok", CATEGORICAL),), "label")


class ScriptedDetector:
    """Fires exactly when the test arms it; records every call."""

    def __init__(self):
        self.fire = False
        self.calls = 0
        self.resets = 0

    def observe(self, x):
        self.calls += 1
        armed, self.fire = self.fire, False
        return armed

    def reset(self):
        self.resets += 1
        return self


def make_stream(n):
    return [
        LabeledInstance(Instance(i, {"tok": "ab"[i % 2]}), i % 2) for i in range(n)
    ]


def run_with_alarm(strategy, batch_size, alarm_at, n=300, warmup=50, **cfg_kw):
    stream = make_stream(n)
    det = ScriptedDetector()
    cfg = ControllerConfig(strategy=strategy, batch_size=batch_size, **cfg_kw)
    ctrl = Controller.from_warmup(stream[:warmup], SCHEMA, det, cfg)
    results = []
    for rec in stream[warmup:]:
        if rec.index == alarm_at:
            det.fire = True
        results.append(ctrl.step(rec))
    return ctrl, det, results


# -- window algebra -----------------------------------------------------------


def test_last_uses_the_b_instances_before_the_alarm():
    ctrl, det, results = run_with_alarm(LAST, 10, alarm_at=100)
    (event,) = ctrl.retrain_history
    assert event.alarm_index == 100
    assert event.retrain_index == 100  # zero collection delay
    assert event.used_indices == tuple(range(90, 100))
    r = next(r for r in results if r.index == 100)
    assert r.drift and r.retrained


def test_next_uses_the_b_instances_after_the_alarm():
    ctrl, det, results = run_with_alarm(NEXT, 10, alarm_at=100)
    (event,) = ctrl.retrain_history
    assert event.alarm_index == 100
    assert event.retrain_index == 110
    assert event.used_indices == tuple(range(101, 111))
    assert not next(r for r in results if r.index == 100).retrained
    assert next(r for r in results if r.index == 110).retrained


def test_mixed_splits_half_and_half_around_the_alarm():
    ctrl, det, results = run_with_alarm(MIXED, 10, alarm_at=100)
    (event,) = ctrl.retrain_history
    assert event.retrain_index == 105
    assert event.used_indices == tuple(range(95, 100)) + tuple(range(101, 106))


def test_mixed_odd_batch_size_puts_extra_instance_before():
    ctrl, _, _ = run_with_alarm(MIXED, 7, alarm_at=100)
    (event,) = ctrl.retrain_history
    pre = [i for i in event.used_indices if i < 100]
    post = [i for i in event.used_indices if i > 100]
    assert len(pre) == 4 and len(post) == 3  # ceil(7/2) / floor(7/2)
    assert event.retrain_index == 103


def test_alarm_instance_in_no_retraining_set():
    for strategy in STRATEGIES:
        ctrl, _, _ = run_with_alarm(strategy, 8, alarm_at=100)
        (event,) = ctrl.retrain_history
        assert 100 not in event.used_indices


@settings(max_examples=30, deadline=None)
@given(
    strategy=st.sampled_from(STRATEGIES),
    batch_size=st.integers(2, 12),
    offset=st.integers(0, 40),
)
def test_window_contracts_property(strategy, batch_size, offset):
    alarm_at = 60 + offset
    ctrl, _, _ = run_with_alarm(strategy, batch_size, alarm_at, n=150, warmup=40)
    (event,) = ctrl.retrain_history
    t, B = alarm_at, batch_size
    pre = [i for i in event.used_indices if i < t]
    post = [i for i in event.used_indices if i > t]
    if strategy == LAST:
        assert not post and event.used_indices == tuple(range(t - B, t))
        assert event.retrain_index == t
    elif strategy == NEXT:
        assert not pre and event.used_indices == tuple(range(t + 1, t + B + 1))
        assert event.retrain_index == t + B
    else:
        assert len(pre) == math.ceil(B / 2) and len(post) == B // 2
        assert event.retrain_index == t + B // 2


def test_mixed_batch_size_one_retrains_immediately():
    ctrl, _, _ = run_with_alarm(MIXED, 1, alarm_at=100)
    (event,) = ctrl.retrain_history
    assert event.retrain_index == 100
    assert event.used_indices == (99,)


def test_early_drift_short_buffer_uses_what_is_available():
    ctrl, _, _ = run_with_alarm(LAST, 10, alarm_at=6, n=50, warmup=5)
    (event,) = ctrl.retrain_history
    # buffer held the 5 warm-up instances plus index 5
    assert event.used_indices == (0, 1, 2, 3, 4, 5)


def test_stream_end_mid_collection_skips_retraining():
    ctrl, _, _ = run_with_alarm(NEXT, 10, alarm_at=95, n=100, warmup=50)
    assert ctrl.n_drifts == 1
    assert ctrl.n_retrains == 0
    assert ctrl.retrain_history == []


def test_buffer_clamped_to_warmup_size():
    stream = make_stream(60)
    cfg = ControllerConfig(strategy=LAST, batch_size=5000)
    ctrl = Controller.from_warmup(stream[:50], SCHEMA, ScriptedDetector(), cfg)
    assert len(ctrl.buffer) == 50


# -- detector interaction -----------------------------------------------------


def test_detector_suppressed_during_collection():
    stream = make_stream(300)
    det = ScriptedDetector()
    cfg = ControllerConfig(strategy=NEXT, batch_size=20)
    ctrl = Controller.from_warmup(stream[:50], SCHEMA, det, cfg)
    for rec in stream[50:]:
        if rec.index == 100:
            det.fire = True
        before = det.calls
        r = ctrl.step(rec)
        if 100 < rec.index <= 120:
            assert det.calls == before  # collecting: detector not fed
        else:
            assert det.calls == before + 1


def test_detector_reset_after_each_retraining():
    for strategy in STRATEGIES:
        _, det, _ = run_with_alarm(strategy, 10, alarm_at=100)
        assert det.resets == 1


def test_at_most_one_outstanding_retraining():
    stream = make_stream(300)
    det = ScriptedDetector()
    cfg = ControllerConfig(strategy=NEXT, batch_size=30)
    ctrl = Controller.from_warmup(stream[:50], SCHEMA, det, cfg)
    results = []
    for rec in stream[50:]:
        if rec.index in (100, 110):  # second arm falls inside collection
            det.fire = True
        results.append(ctrl.step(rec))
    # the alarm armed at 110 cannot fire until collection ends at 130, so
    # the second drift lands at 131, not inside the first collection
    assert [r.index for r in results if r.drift] == [100, 131]
    assert [e.retrain_index for e in ctrl.retrain_history] == [130, 161]


# -- learning modes -----------------------------------------------------------


def test_incremental_updates_apply_every_mini_batch():
    stream = make_stream(100)
    cfg = ControllerConfig(strategy=None, incremental=True, mini_batch_size=10)
    ctrl = Controller.from_warmup(stream[:50], SCHEMA, NoDetector(), cfg)
    for rec in stream[50:65]:
        ctrl.step(rec)
    # one full mini-batch applied, five instances still pending
    assert ctrl.model.n_trained == 60
    assert len(ctrl.mini_batch) == 5


def test_incremental_pauses_during_collection():
    stream = make_stream(300)
    det = ScriptedDetector()
    cfg = ControllerConfig(
        strategy=NEXT, batch_size=20, incremental=True, mini_batch_size=5
    )
    ctrl = Controller.from_warmup(stream[:50], SCHEMA, det, cfg)
    for rec in stream[50:]:
        if rec.index == 100:
            det.fire = True
        before = ctrl.model.n_trained
        r = ctrl.step(rec)
        if 100 < rec.index < 120:
            assert ctrl.model.n_trained == before
        if r.retrained:
            # new model trained on exactly the collected batch
            assert ctrl.model.n_trained == 20
            break


def test_retraining_replaces_incrementally_updated_model():
    stream = make_stream(300)
    det = ScriptedDetector()
    cfg = ControllerConfig(strategy=LAST, batch_size=10, incremental=True)
    ctrl = Controller.from_warmup(stream[:50], SCHEMA, det, cfg)
    for rec in stream[50:]:
        if rec.index == 100:
            det.fire = True
        r = ctrl.step(rec)
        if r.retrained:
            break
    # the incrementally grown model (50 warm-up + updates) was discarded
    assert ctrl.model.n_trained == 10


def test_make_static_freezes_everything():
    stream = make_stream(200)
    cfg = ControllerConfig(strategy=LAST, batch_size=10, incremental=True)
    ctrl = Controller.from_warmup(stream[:50], SCHEMA, ScriptedDetector(), cfg)
    ctrl.make_static()
    trained = ctrl.model.n_trained
    results = [ctrl.step(rec) for rec in stream[50:]]
    assert ctrl.model.n_trained == trained
    assert not any(r.drift or r.retrained for r in results)
    assert ctrl.event_log == []


def test_static_prediction_is_pure_function_of_instance():
    stream = make_stream(100)
    cfg = ControllerConfig()
    ctrl = Controller.from_warmup(stream[:50], SCHEMA, NoDetector(), cfg)
    probe = stream[60]
    first = ctrl.step(probe).prediction
    for rec in stream[51:60]:
        ctrl.step(rec)
    assert ctrl.step(probe).prediction == first


# -- protocol -----------------------------------------------------------------


def test_test_then_train_label_cannot_leak():
    stream = make_stream(100)
    cfg = ControllerConfig(strategy=None, incremental=True, mini_batch_size=1)
    a = Controller.from_warmup(stream[:50], SCHEMA, NoDetector(), cfg)
    b = Controller.from_warmup(stream[:50], SCHEMA, NoDetector(), cfg)
    probe = stream[50]
    flipped = LabeledInstance(probe.instance, 1 - probe.label)
    assert a.step(probe).prediction == b.step(flipped).prediction


def test_replay_reproduces_events_and_predictions():
    def run():
        ctrl, _, results = run_with_alarm(MIXED, 10, alarm_at=100)
        return ctrl.retrain_history, [(r.index, r.prediction) for r in results]

    assert run() == run()


def test_step_before_warmup_rejected():
    encoder = EncoderState(SCHEMA)
    encoder.fit([Instance(0, {"tok": "a"})])
    ctrl = Controller(
        NaiveBayesModel(2, encoder.cat_cardinalities, 0),
        encoder,
        NoDetector(),
        ControllerConfig(),
    )
    with pytest.raises(ControllerError):
        ctrl.step(make_stream(1)[0])


def test_warmup_requires_labeled_instances():
    with pytest.raises(ControllerError):
        Controller.from_warmup([], SCHEMA, NoDetector(), ControllerConfig())
    bare = [Instance(0, {"tok": "a"})]
    with pytest.raises(ControllerError):
        Controller.from_warmup(bare, SCHEMA, NoDetector(), ControllerConfig())


def test_n_classes_inferred_from_warmup():
    ctrl = Controller.from_warmup(
        make_stream(50), SCHEMA, NoDetector(), ControllerConfig()
    )
    assert ctrl.model.n_classes == 2


def test_config_validation():
    with pytest.raises(ValueError):
        ControllerConfig(strategy="newest")
    with pytest.raises(ValueError):
        ControllerConfig(batch_size=0)
