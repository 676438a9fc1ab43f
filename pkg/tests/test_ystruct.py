import numpy as np
import pytest

from semalg.errors import SemalgError
from semalg.fitting import (
    FitOptions,
    SampleCov,
    random_sem,
    sample_cov_from_data,
    sample_data,
    select_class,
)
from semalg.graphs import MixedGraph, enumerate_acyclic
from semalg.halftrek import ParamPair
from semalg.ystruct import (
    battery_pass,
    is_y_pattern,
    latent_projection,
    run_experiment,
    target_class_ids,
    y_structure_graph,
)


def test_latent_projection_basics():
    # chain through a dropped node becomes a directed edge
    g = MixedGraph.from_edges(5, directed=[(0, 4), (4, 1)])
    proj = latent_projection(g, (0, 1, 2, 3))
    assert proj.directed == {(0, 1)} and not proj.bidirected
    # dropped common cause becomes confounding
    g = MixedGraph.from_edges(5, directed=[(4, 0), (4, 1)])
    proj = latent_projection(g, (0, 1, 2, 3))
    assert proj.bidirected == {(0, 1)} and not proj.directed
    # collider at the dropped node blocks
    g = MixedGraph.from_edges(5, directed=[(0, 4), (1, 4)])
    proj = latent_projection(g, (0, 1, 2, 3))
    assert not proj.directed and not proj.bidirected
    # mixed-head path: a <-> L -> b projects to confounding
    g = MixedGraph.from_edges(5, directed=[(4, 1)], bidirected=[(0, 4)])
    proj = latent_projection(g, (0, 1, 2, 3))
    assert proj.bidirected == {(0, 1)}
    # direct edges survive; positions follow the keep order
    g = MixedGraph.from_edges(5, directed=[(3, 2)])
    proj = latent_projection(g, (2, 3, 0, 1))
    assert proj.directed == {(1, 0)}
    with pytest.raises(SemalgError):
        latent_projection(g, (0, 0, 1, 2))


def test_projection_keeps_acyclicity():
    import random

    from semalg.graphs import is_acyclic

    rng = random.Random(3)
    for seed in range(30):
        g, _ = random_sem(7, seed=seed)
        keep = tuple(rng.sample(range(7), 4))
        assert is_acyclic(latent_projection(g, keep))


def test_pattern_matches_target_classes(class_table4):
    y_id, ext_id = target_class_ids(class_table4)
    target_codes = set()
    for entry in class_table4.classes:
        if entry.id in (y_id, ext_id):
            target_codes.update(entry.members)
    matches = 0
    for g in enumerate_acyclic(4):
        in_pattern = is_y_pattern(g)
        assert in_pattern == (g.code() in target_codes)
        matches += in_pattern
    assert matches == 12  # 9 plain and 3 extended labeled graphs


def test_battery_on_exact_structures():
    gy = y_structure_graph()
    lam = np.zeros((4, 4))
    lam[0, 2] = 0.8
    lam[1, 2] = 0.7
    lam[2, 3] = 0.9
    data = sample_data(gy, ParamPair(lam, np.eye(4)), 5000, seed=3)
    cov = sample_cov_from_data(data, "abcd")
    sd = np.sqrt(np.diag(cov.s))
    corr = cov.s / np.outer(sd, sd)
    assert battery_pass(corr, 5000, (0, 1, 2, 3), 0.01, "y")
    assert battery_pass(corr, 5000, (1, 0, 2, 3), 0.01, "combined")
    assert not battery_pass(corr, 5000, (0, 2, 1, 3), 0.01, "combined")
    assert not battery_pass(corr, 5000, (0, 1, 3, 2), 0.01, "combined")
    with pytest.raises(SemalgError):
        battery_pass(corr, 5000, (0, 1, 2, 3), 0.01, "bogus")


def test_filter_never_removes_selected_target(class_table4):
    # when selection picks the target class, the filter keeps the tuple by
    # construction: verified by running a tiny experiment and checking
    # passes(full) <= passes(none)
    report = run_experiment(
        p=5,
        reps=2,
        n_samples=800,
        alpha=0.01,
        seed=11,
        table=class_table4,
        filters=("none", "full"),
    )
    assert report.stats["full"].passes <= report.stats["none"].passes
    assert report.stats["none"].passes == report.battery_passes


def test_experiment_reconciles_counts(class_table4):
    report = run_experiment(
        p=5,
        reps=3,
        n_samples=600,
        alpha=0.01,
        seed=5,
        table=class_table4,
        filters=("none", "mag", "full"),
    )
    for mode in ("none", "mag", "full"):
        st = report.stats[mode]
        assert 0 <= st.true_positives <= st.passes
        assert st.passes <= report.battery_passes
    assert report.battery_true_positives <= report.battery_passes
    data = report.to_json_dict()
    assert data["filters"]["none"]["passes"] == report.battery_passes


def test_planted_y_structure_detected_and_kept(class_table4):
    # ground truth containing an exact Y-structure on nodes (0,1,2,3)
    g = MixedGraph.from_edges(
        6, directed=[(0, 2), (1, 2), (2, 3), (4, 5)]
    )
    lam = np.zeros((6, 6))
    for (u, v) in g.directed:
        lam[u, v] = 0.8
    data = sample_data(g, ParamPair(lam, np.eye(6)), 2000, seed=17)
    cov = sample_cov_from_data(data, g.names)
    sd = np.sqrt(np.diag(cov.s))
    corr = cov.s / np.outer(sd, sd)
    tup = (0, 1, 2, 3)
    assert battery_pass(corr, 2000, tup, 0.01, "combined")
    assert is_y_pattern(latent_projection(g, tup))
    sub = cov.s[np.ix_(tup, tup)]
    report = select_class(
        class_table4, SampleCov(sub, 2000, tuple(cov.names[i] for i in tup)),
        FitOptions(seed=1),
    )
    y_id, ext_id = target_class_ids(class_table4)
    assert report.best_class in (y_id, ext_id)


def test_target_classes_are_mag(class_table4):
    y_id, ext_id = target_class_ids(class_table4)
    by_id = {e.id: e for e in class_table4.classes}
    assert by_id[y_id].is_mag_describable()
    assert by_id[ext_id].is_mag_describable()
