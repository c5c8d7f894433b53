import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from detboost.core import Box, Detection, OrderingError, ValidationError
from detboost.trackboost import (
    BoostedDetection,
    ScoreMode,
    StreamingBooster,
    TrackBoostConfig,
    TrackCategory,
    adjust_confidence,
    boost_offline,
    boost_streaming,
    categorize,
    score_step,
    track_score,
)
from detboost.tracker import KalmanState, TrackHistory
from oracles import category_table

SEMANTIC = TrackBoostConfig()
LITERAL = TrackBoostConfig(score_mode="literal")
unit = st.floats(0, 1)


def history(confs, speeds=None, track_id=0):
    box = Box(0, 0, 10, 10)
    h = TrackHistory(track_id, KalmanState.from_box(box))
    speeds = speeds if speeds is not None else [0.0] * len(confs)
    for f, (c, s) in enumerate(zip(confs, speeds)):
        h.append(Detection(f, box, c), s)
    return h


class TestScore:
    def test_step_examples(self):
        assert score_step(0, 0.3) == 0
        assert score_step(0, 0.9) == pytest.approx(0.6)
        assert score_step(0, 0.9, LITERAL) == pytest.approx(-0.6)

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            score_step(0, math.nan)

    def test_fold(self):
        assert track_score([]) == 0
        assert track_score([0.9, 0.9, 0.9]) == pytest.approx(1.8)

    def test_fold_matches_closed_form(self):
        rng = np.random.default_rng(1)
        confs = rng.random(1000)
        assert track_score(confs) == pytest.approx(float(np.sum(confs - 0.3)), abs=1e-9)
        assert track_score(confs, LITERAL) == -track_score(confs)

    @given(st.lists(unit, max_size=50), st.integers(0, 49), st.floats(0, 1))
    def test_raising_a_confidence_never_lowers_the_score(self, confs, i, bump):
        if not confs:
            return
        i %= len(confs)
        higher = list(confs)
        higher[i] = min(1.0, confs[i] + bump)
        assert track_score(higher) >= track_score(confs) - 1e-12


class TestCategorize:
    @pytest.mark.parametrize(
        "score, speed, expected",
        [
            (30, 0.0, TrackCategory.HIGHLY_LIKELY),
            (30, 50.0, TrackCategory.HIGHLY_LIKELY),
            (-0.5, 0.0, TrackCategory.UNLIKELY),
            (3, 0.1, TrackCategory.STATIONARY),
            (3, 2.0, TrackCategory.POSSIBLE),
            (10, 0.1, TrackCategory.POSSIBLE),
            (25, 5.0, TrackCategory.POSSIBLE),
            (0, 5.0, TrackCategory.POSSIBLE),
            (0, 0.0, TrackCategory.STATIONARY),
            (5, 0.0, TrackCategory.POSSIBLE),
            (3, 0.3, TrackCategory.POSSIBLE),
        ],
    )
    def test_examples_and_boundaries(self, score, speed, expected):
        assert categorize(score, speed) is expected

    def test_grid_matches_decision_table(self):
        for score in np.arange(-10, 40.0001, 0.5):
            for speed in np.round(np.arange(0, 1.0001, 0.05), 10):
                assert categorize(float(score), float(speed)).value == category_table(float(score), float(speed))


class TestAdjust:
    def test_examples(self):
        assert adjust_confidence(0.6, 0.8, TrackCategory.HIGHLY_LIKELY) == pytest.approx(0.74, abs=1e-12)
        assert adjust_confidence(0.6, 0.8, TrackCategory.POSSIBLE) == pytest.approx(0.7, abs=1e-12)
        assert adjust_confidence(0.6, 0.9, TrackCategory.STATIONARY) == pytest.approx(0.18, abs=1e-12)
        assert adjust_confidence(0.6, 0.9, TrackCategory.UNLIKELY) == 0.6

    @given(unit, unit, st.sampled_from(list(TrackCategory)))
    def test_in_unit_interval(self, c, m, cat):
        assert 0.0 <= adjust_confidence(c, m, cat) <= 1.0

    @given(unit, unit)
    def test_boost_categories_never_lower_below_max_members(self, c, m):
        if m >= c:
            for cat in (TrackCategory.HIGHLY_LIKELY, TrackCategory.POSSIBLE):
                assert adjust_confidence(c, m, cat) >= c - 1e-12

    @given(st.floats(1e-9, 1))
    def test_stationary_lowers_unlikely_keeps(self, c):
        assert adjust_confidence(c, 1.0, TrackCategory.STATIONARY) < c
        assert adjust_confidence(c, 1.0, TrackCategory.UNLIKELY) == c


class TestOffline:
    def test_single_detection_is_stationary(self):
        (b,) = boost_offline([history([0.6])])
        assert b.category is TrackCategory.STATIONARY
        assert b.detection.conf == pytest.approx(0.18)
        assert b.raw_conf == 0.6

    def test_possible_fixed_point(self):
        out = boost_offline([history([0.9] * 10, [5.0] * 10)])
        assert {b.category for b in out} == {TrackCategory.POSSIBLE}
        assert [b.detection.conf for b in out] == pytest.approx([0.9] * 10)

    def test_highly_likely_fixed_point(self):
        out = boost_offline([history([0.6] * 100)])
        assert out[0].score == pytest.approx(30.0)
        assert {b.category for b in out} == {TrackCategory.HIGHLY_LIKELY}
        assert [b.detection.conf for b in out] == pytest.approx([0.6] * 100)

    def test_possible_raises_weak_members(self):
        out = boost_offline([history([0.4, 0.8, 0.5], [3.0, 3.0, 3.0])])
        assert [b.detection.conf for b in out] == pytest.approx([0.6, 0.8, 0.65])

    def test_geometry_and_order_preserved(self):
        a, b = history([0.5] * 3, track_id=4), history([0.7] * 2, track_id=1)
        out = boost_offline([a, b])
        assert [(o.detection.frame, o.track_id) for o in out] == [(0, 1), (0, 4), (1, 1), (1, 4), (2, 4)]
        assert all(o.detection.box == Box(0, 0, 10, 10) for o in out)

    def test_unlikely_passthrough(self):
        out = boost_offline([history([0.1, 0.2, 0.05], [4.0] * 3)])
        assert {b.category for b in out} == {TrackCategory.UNLIKELY}
        assert [b.detection.conf for b in out] == [0.1, 0.2, 0.05]


class TestStreaming:
    def test_first_detection_uses_only_itself(self):
        booster = StreamingBooster()
        b = booster.push(0, Detection(0, Box(0, 0, 10, 10), 0.9), 0.0)
        assert b.score == pytest.approx(0.6)
        assert b.category is TrackCategory.STATIONARY
        b = StreamingBooster().push(0, Detection(0, Box(0, 0, 10, 10), 0.9), 2.0)
        assert b.category is TrackCategory.POSSIBLE and b.detection.conf == pytest.approx(0.9)

    def test_last_matches_offline(self):
        rng = random.Random(3)
        for _ in range(50):
            n = rng.randint(1, 80)
            confs = [rng.random() for _ in range(n)]
            speeds = [rng.uniform(0, 1) for _ in range(n)]
            h = history(confs, speeds)
            offline = boost_offline([h])[-1]
            booster = StreamingBooster()
            for d, s in zip(h.detections, speeds):
                last = booster.push(0, d, s)
            assert last.detection.conf == pytest.approx(offline.detection.conf, abs=1e-9)
            assert last.category is offline.category

    def test_crossing_score_high(self):
        booster = StreamingBooster()
        cats = [booster.push(0, Detection(f, Box(0, 0, 10, 10), 1.0), 1.0).category for f in range(40)]
        # each detection adds 0.7; prefix score first exceeds 25 at the 36th detection
        k = next(i for i in range(40) if (i + 1) * 0.7 > 25)
        assert all(c is TrackCategory.POSSIBLE for c in cats[:k])
        assert all(c is TrackCategory.HIGHLY_LIKELY for c in cats[k:])

    def test_is_causal(self):
        confs = [0.5, 0.9, 0.2, 0.7]
        base = StreamingBooster()
        outs = [base.push(0, Detection(f, Box(0, 0, 1, 1), c), 1.0) for f, c in enumerate(confs)]
        other = StreamingBooster()
        changed = [other.push(0, Detection(f, Box(0, 0, 1, 1), c), 1.0) for f, c in enumerate(confs[:2] + [0.01, 0.01])]
        assert outs[:2] == changed[:2]

    def test_tracks_are_independent(self):
        booster = StreamingBooster()
        booster.push(0, Detection(0, Box(0, 0, 1, 1), 1.0), 1.0)
        b = booster.push(1, Detection(0, Box(5, 5, 1, 1), 0.4), 1.0)
        assert b.score == pytest.approx(0.1) and b.detection.conf == pytest.approx(0.4)

    def test_out_of_order(self):
        booster = StreamingBooster()
        booster.push(0, Detection(5, Box(0, 0, 1, 1), 0.5), 0.0)
        with pytest.raises(OrderingError):
            booster.push(1, Detection(4, Box(0, 0, 1, 1), 0.5), 0.0)
        frames = [(1, []), (0, [])]
        with pytest.raises(OrderingError):
            list(boost_streaming(frames))

    def test_boost_streaming_frames(self):
        box = Box(0, 0, 1, 1)
        frames = [(f, [(7, Detection(f, box, 0.8), 2.0)]) for f in range(3)]
        out = list(boost_streaming(frames))
        assert [f for f, _ in out] == [0, 1, 2]
        assert all(isinstance(b, BoostedDetection) and b.track_id == 7 for _, bs in out for b in bs)


def test_config_validation():
    with pytest.raises(ValidationError):
        TrackBoostConfig(w_high=(0.5, 0.6))
    with pytest.raises(ValidationError):
        TrackBoostConfig(score_low=30)
    with pytest.raises(ValidationError):
        TrackBoostConfig(t_conf=1.0)
    with pytest.raises(ValueError):
        TrackBoostConfig(score_mode="other")
    assert TrackBoostConfig(score_mode="literal").score_mode is ScoreMode.LITERAL
