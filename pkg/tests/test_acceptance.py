"""Exit criteria. Each test is one criterion at its fixed tolerance and time budget.

Run ``pytest tests/test_acceptance.py`` to get a one-line PASS/FAIL summary
per criterion at the end of the report.
"""

import math
import random
import time

import numpy as np
import pytest

from detboost.cli import main
from detboost.core import Box, Detection
from detboost.evaluation import average_precision, map50
from detboost.fusion import fuse_confidence
from detboost.pipeline import PipelineConfig, run_pipeline
from detboost.simgen import boost_wins_spec, generate_scenario, random_spec
from detboost.trackboost import TrackBoostConfig, TrackCategory, adjust_confidence, categorize, track_score
from detboost.tracker import Tracker, TrackerConfig
from oracles import brute_force_map, category_table
from test_evaluation import as_tuples, random_instance


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f}s, budget {self.seconds}s"


@pytest.mark.acceptance("score fusion exact values, betweenness and symmetry (< 1 s)")
def test_fusion_exactness():
    with Budget(1.0):
        assert abs(fuse_confidence(0.9, 0.4) - 0.6) <= 1e-12
        assert abs(fuse_confidence(0.64, 0.25) - 0.4) <= 1e-12
        rng = np.random.default_rng(0)
        pairs = rng.uniform(1e-12, 1.0, size=(100_000, 2)).tolist()
        for c, cl in pairs:
            v = fuse_confidence(c, cl)
            assert min(c, cl) - 1e-15 <= v <= max(c, cl) + 1e-15
            assert v == fuse_confidence(cl, c)


@pytest.mark.acceptance("track score fold equals closed-form sum; literal is its exact negation (< 5 s)")
def test_score_fold():
    semantic, literal = TrackBoostConfig(), TrackBoostConfig(score_mode="literal")
    rng = np.random.default_rng(1)
    seqs = [rng.random(int(n)).tolist() for n in rng.integers(0, 10_001, size=1000)]
    with Budget(5.0):
        for confs in seqs:
            s = track_score(confs, semantic)
            assert abs(s - math.fsum(c - 0.3 for c in confs)) <= 1e-9
            assert track_score(confs, literal) == -s


@pytest.mark.acceptance("category decision table over the full score x speed grid (< 1 s)")
def test_category_grid():
    scores = [-10 + 0.5 * i for i in range(101)]
    speeds = [round(0.05 * i, 10) for i in range(21)]
    assert {0.0, 5.0, 25.0} <= set(scores) and 0.3 in speeds
    with Budget(1.0):
        for s in scores:
            for v in speeds:
                assert categorize(s, v).value == category_table(s, v), (s, v)


@pytest.mark.acceptance("confidence adjustment formulas and unit-interval outputs")
def test_adjustment_formulas():
    assert abs(adjust_confidence(0.6, 0.8, TrackCategory.HIGHLY_LIKELY) - 0.74) <= 1e-12
    assert abs(adjust_confidence(0.6, 0.8, TrackCategory.POSSIBLE) - 0.7) <= 1e-12
    for m in (0.0, 0.6, 0.8, 1.0):
        assert abs(adjust_confidence(0.6, m, TrackCategory.STATIONARY) - 0.18) <= 1e-12
        assert abs(adjust_confidence(0.6, m, TrackCategory.UNLIKELY) - 0.6) <= 1e-12
    rng = random.Random(2)
    cats = list(TrackCategory)
    for _ in range(100_000):
        v = adjust_confidence(rng.random(), rng.random(), rng.choice(cats))
        assert 0.0 <= v <= 1.0


@pytest.mark.acceptance("mAP@0.5 matches the exhaustive reference on 200 random instances (< 10 s)")
def test_map_oracle_equivalence():
    assert abs(average_precision([True, False, True], 2) - 5 / 6) <= 1e-9
    rng = random.Random(3)
    instances = [random_instance(rng, max_preds=50, max_gt=20, max_frames=10) for _ in range(200)]
    with Budget(10.0):
        for preds, gts in instances:
            assert abs(map50(preds, gts) - brute_force_map(*as_tuples(preds, gts))) <= 1e-9


@pytest.mark.acceptance("tracker: constant-velocity target keeps one id, vcx within 1 of 5; long gap spawns new id (< 1 s)")
def test_tracker_behavior():
    with Budget(1.0):
        t = Tracker()
        ids = set()
        for f in range(30):
            (tid,) = t.step(f, [Detection(f, Box.from_center(100 + 5.0 * f, 200, 20, 20), 0.5)])
            ids.add(tid)
            if f >= 20:
                assert abs(t.tracks[tid].kalman.mean[4] - 5.0) <= 1.0
        assert ids == {0}

        cfg = TrackerConfig()
        t = Tracker(cfg)
        for f in range(3):
            t.step(f, [Detection(f, Box(50, 50, 20, 20), 0.5)])
        # frames 3 .. 2 + max_missed + 1 are empty
        resume = 2 + cfg.max_missed + 2
        assert t.step(resume, [Detection(resume, Box(50, 50, 20, 20), 0.5)]) == [1]


@pytest.mark.acceptance("boost-wins scenario: boosted mAP@0.5 beats raw by >= 0.05, confirmed by the reference (< 10 s)")
def test_boosting_improves_map():
    with Budget(10.0):
        dets, gts = generate_scenario(boost_wins_spec())
        res = run_pipeline(dets, PipelineConfig(apply_fusion="off"), gts)
        boosted = [b.detection for b in res.boosted]
        raw_ref = brute_force_map(*as_tuples(dets, gts))
        boosted_ref = brute_force_map(*as_tuples(boosted, gts))
        assert abs(res.report["map50_raw"] - raw_ref) <= 1e-9
        assert abs(res.report["map50_boosted"] - boosted_ref) <= 1e-9
        assert boosted_ref - raw_ref >= 0.05, (raw_ref, boosted_ref)


@pytest.mark.acceptance("streaming and offline agree on every track's last detection, 50 scenarios (< 30 s)")
def test_streaming_offline_consistency():
    offline_cfg = PipelineConfig(apply_fusion="off")
    streaming_cfg = PipelineConfig(apply_fusion="off", mode="streaming")
    checked = 0
    with Budget(30.0):
        for seed in range(50):
            dets, _ = generate_scenario(random_spec(1000 + seed))
            last_off = {b.track_id: b for b in run_pipeline(dets, offline_cfg).boosted}
            last_on = {b.track_id: b for b in run_pipeline(dets, streaming_cfg).boosted}
            assert last_off.keys() == last_on.keys()
            for tid, b in last_off.items():
                assert abs(last_on[tid].detection.conf - b.detection.conf) <= 1e-9
                checked += 1
    assert checked > 50


@pytest.mark.acceptance("pipeline is byte-deterministic end to end")
def test_end_to_end_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("DROBOOST_SEED", raising=False)
    d, g = tmp_path / "d.jsonl", tmp_path / "g.jsonl"
    assert main(["simulate", "-q", "--out-detections", str(d), "--out-gt", str(g)]) == 0
    outputs = []
    for i in range(2):
        out, rep = tmp_path / f"out{i}.jsonl", tmp_path / f"rep{i}.json"
        assert main(["pipeline", "-q", str(d), "--gt", str(g), "-o", str(out), "--report", str(rep)]) == 0
        outputs.append((out.read_bytes(), rep.read_bytes()))
    assert outputs[0] == outputs[1]
    assert outputs[0][0]
