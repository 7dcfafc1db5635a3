import os

import numpy as np
import pytest

from crossiris.evaluation import detect_mislabels, stats
from crossiris.exceptions import SEGMENTATION_ERRORS
from crossiris.iso_image import load_image
from crossiris.pipeline import encode_image
from crossiris.sigset import Label, parse_sigset
from crossiris.synth import (
    CLEAN,
    SENSOR_A,
    Defect,
    SynthConfig,
    generate_dataset,
    generate_identity_texture,
    keyed_rng,
    mislabeled_pairs,
    plan_dataset,
    read_swaps,
    render_sample,
    simulate_scores,
    true_labels,
)

from helpers import unpacked_similarity


def test_keyed_rng_is_order_independent():
    a = keyed_rng(1, 2, 3, "x").random(4)
    keyed_rng(1, 9, 9, "y").random(100)
    assert np.array_equal(a, keyed_rng(1, 2, 3, "x").random(4))
    assert not np.array_equal(a, keyed_rng(1, 2, 3, "z").random(4))


def test_render_is_deterministic():
    tex = generate_identity_texture(0, 3)
    a = render_sample(tex, SENSOR_A, 42, frozenset())
    b = render_sample(generate_identity_texture(0, 3), SENSOR_A, 42, frozenset())
    assert np.array_equal(a.pixels, b.pixels)
    assert a.pixels.shape == (480, 640) and a.pixels.min() >= 1


def test_plan_counts():
    plan = plan_dataset(SynthConfig(n_identities=10, samples_per_identity_per_sensor=2))
    s = plan.sigset
    assert len(s.enrollment_entries) == 20 and len(s.probe_entries) == 20
    labels = [c.label for c in s.comparisons]
    assert labels.count(Label.GENUINE) == 40
    assert labels.count(Label.IMPOSTER) == 20 * 20 - 40
    sampled = plan_dataset(SynthConfig(n_identities=10, imposter_sample=50))
    assert sum(c.label is Label.IMPOSTER for c in sampled.sigset.comparisons) == 50


def test_mislabel_swaps_are_consistent():
    plan = plan_dataset(SynthConfig(n_identities=60, mislabel_rate=0.1, seed=4))
    assert plan.swaps
    declared = {e.template_id: e.identity_id for e in plan.sigset.enrollment_entries}
    for sw in plan.swaps:
        assert declared[sw.template_a] == sw.true_identity_b
        assert declared[sw.template_b] == sw.true_identity_a
    truth = true_labels(plan)
    wrong = mislabeled_pairs(plan)
    swapped = {t for sw in plan.swaps for t in (sw.template_a, sw.template_b)}
    assert wrong and all(pair[1] in swapped for pair in wrong)
    for c in plan.sigset.comparisons:
        pair = (c.probe_id, c.enrolled_id)
        assert (truth[pair] != c.label) == (pair in wrong)


def test_simulated_mislabels_are_recovered():
    plan = plan_dataset(SynthConfig(n_identities=40, mislabel_rate=0.08, seed=1))
    scores = simulate_scores(plan, seed=1)
    found = detect_mislabels(scores, stats(scores.imposter_scores), stats(scores.genuine_scores))
    assert {s.pair for s in found} == mislabeled_pairs(plan)


def test_same_identity_textures_match_and_others_do_not():
    cfg = SynthConfig(n_identities=3, profiles=(CLEAN, CLEAN))
    plan = plan_dataset(cfg)
    from crossiris.synth import render_planned

    codes = {p.template_id: encode_image(render_planned(p, cfg)) for p in plan.samples}
    same = unpacked_similarity(codes["e0000_00"], codes["p0000_00"])
    other = unpacked_similarity(codes["e0000_00"], codes["p0001_00"])
    assert same > 0.8
    assert abs(other - 0.5) < 0.08


def test_no_iris_defect_fails_segmentation():
    tex = generate_identity_texture(0, 0)
    img = render_sample(tex, CLEAN, 7, frozenset({Defect.NO_IRIS}))
    with pytest.raises(SEGMENTATION_ERRORS):
        encode_image(img)


def test_generate_dataset_layout(tmp_path):
    cfg = SynthConfig(n_identities=2, samples_per_identity_per_sensor=1, mislabel_rate=1.0)
    plan = generate_dataset(cfg, tmp_path)
    assert parse_sigset(tmp_path / "sigset.csv") == plan.sigset
    for e in plan.sigset.enrollment_entries + plan.sigset.probe_entries:
        assert load_image(os.path.join(tmp_path, e.path)).pixels.shape == (480, 640)
    assert read_swaps(tmp_path / "ground_truth_swaps.csv") == list(plan.swaps)
    assert len(plan.swaps) == 1


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(n_identities=0)
    with pytest.raises(ValueError):
        SynthConfig(mislabel_rate=1.5)
    with pytest.raises(ValueError):
        SynthConfig(defect_rates={"not_a_defect": 0.1})
