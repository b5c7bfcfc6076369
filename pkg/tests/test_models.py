import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from support import DATA
from hmmaug.alignments import read_alignments
from hmmaug.cluster import ClusterTree, Node, accumulate_stats, grow_tree, route
from hmmaug.models import (
    AcousticModel,
    DurationModel,
    concatenate,
    dump_text,
    duration_stats,
    generate_trajectory,
    load_model,
    predict_durations,
    read_sidecar,
    read_trajectory,
    round_half_up,
    save_model,
    silence_frames,
    train_acoustic_model,
    train_duration_model,
    write_trajectory,
)
from hmmaug.phones import FullContextLabel, Question, read_question_file

LAB = FullContextLabel("sil", "sil", "a", "sil", "sil")


def single_leaf_duration(mu, sigma, rate=0.0):
    tree = ClusterTree({0: Node(0, occupancy=1.0, mean=np.array([mu]), variance=np.array([1.0]))}, 1)
    return DurationModel(tree, {0: (mu, sigma)}, rate)


def two_leaf_acoustic(m_yes, m_no):
    q = Question("C-a", "C", frozenset({"a"}))
    nodes = {0: Node(0, q, 1, 2),
             1: Node(1, occupancy=1.0, mean=np.array(m_yes), variance=np.ones(len(m_yes))),
             2: Node(2, occupancy=1.0, mean=np.array(m_no), variance=np.ones(len(m_no)))}
    tree = ClusterTree(nodes, len(m_yes))
    return AcousticModel(tree, {1: np.array(m_yes, float), 2: np.array(m_no, float)},
                         {1: np.ones(len(m_yes)), 2: np.ones(len(m_no))}, len(m_yes))


@pytest.mark.parametrize("mu,sigma,rho,frames", [
    (7.4, 2.0, 0.0, 7), (0.2, 5.0, 0.0, 1), (5.0, 2.0, 1.0, 7), (2.5, 0.0, 0.0, 3), (3.0, 2.0, -5.0, 1)])
def test_duration_formula(mu, sigma, rho, frames):
    assert predict_durations(single_leaf_duration(mu, sigma), [LAB], rho) == [frames]


def test_model_rate_default():
    assert predict_durations(single_leaf_duration(5.0, 2.0, rate=1.0), [LAB]) == [7]


def test_round_half_up():
    assert [round_half_up(x) for x in (0.5, 1.5, 2.5, 2.49, -0.5)] == [1, 2, 3, 2, 0]


def test_piecewise_constant_trajectory():
    m = two_leaf_acoustic([1.0], [2.0])
    b = FullContextLabel("sil", "a", "b", "sil", "sil")
    traj = generate_trajectory(m, [LAB, b], [2, 3])
    assert traj.frames[:, 0].tolist() == [1, 1, 2, 2, 2]
    assert traj.spans == [(0, 2), (2, 5)]
    single = generate_trajectory(m, [LAB], [4])
    assert (single.frames == 1.0).all()
    assert np.array_equal(generate_trajectory(m, [LAB, b], [2, 3], 0).frames, traj.frames)


def test_smoothing_crossfade():
    m = two_leaf_acoustic([0.0], [4.0])
    b = FullContextLabel("sil", "a", "b", "sil", "sil")
    traj = generate_trajectory(m, [LAB, b], [4, 4], smoothing_window=1)
    assert traj.frames[:, 0].tolist() == [0, 0, 0, 1, 3, 4, 4, 4]
    assert traj.num_frames == 8


def test_trajectory_errors():
    m = two_leaf_acoustic([0.0], [1.0])
    with pytest.raises(ValueError):
        generate_trajectory(m, [LAB], [1, 2])
    with pytest.raises(ValueError):
        generate_trajectory(m, [LAB], [0])


def test_duration_training_population_std():
    labs = [LAB, LAB]
    stats = duration_stats([(labs, [np.zeros((3, 1)), np.zeros((5, 1))])])
    tree = ClusterTree({0: Node(0, occupancy=2.0, mean=np.array([4.0]), variance=np.array([1.0]))}, 1)
    dm = train_duration_model(stats, tree)
    assert dm.params[0] == (4.0, 1.0)
    one = train_duration_model(duration_stats([([LAB], [np.zeros((6, 2))])]), tree)
    assert one.params[0] == (6.0, 0.0)
    assert predict_durations(one, [LAB]) == [6]


@pytest.fixture(scope="module")
def toy_models():
    utts = read_alignments(DATA / "aligned.txt")
    qs = read_question_file(DATA / "questions.hed")
    ac_stats, du_stats = accumulate_stats(utts), duration_stats(utts)
    ac = train_acoustic_model(ac_stats, grow_tree(ac_stats, qs, 10))
    du = train_duration_model(du_stats, grow_tree(du_stats, qs, 5))
    return utts, du, ac


def test_leaf_params_match_brute_force(toy_models):
    utts, du, ac = toy_models
    frames_by_leaf, durs_by_leaf = {}, {}
    for u in utts:
        for lab, block in zip(u.labels, u.blocks):
            frames_by_leaf.setdefault(route(ac.tree, lab), []).append(block)
            durs_by_leaf.setdefault(route(du.tree, lab), []).append(len(block))
    for leaf, blocks in frames_by_leaf.items():
        x = np.concatenate(blocks)
        assert np.allclose(ac.means[leaf], x.mean(0), atol=1e-9)
        assert np.allclose(ac.variances[leaf], np.maximum(x.var(0), 1e-4), atol=1e-9)
    for leaf, ds in durs_by_leaf.items():
        mu, sd = du.params[leaf]
        assert mu == pytest.approx(np.mean(ds), abs=1e-9)
        assert sd == pytest.approx(np.std(ds), abs=1e-9)


def test_toy_tree_uses_context(toy_models):
    _, du, _ = toy_models
    # the toy data lengthens phones before silence; some split should look at R
    assert any(n.question is not None and n.question.slot == "R" for n in du.tree.nodes.values())


def test_model_files_round_trip(tmp_path, toy_models):
    _, du, ac = toy_models
    save_model(du, tmp_path / "d.model")
    save_model(ac, tmp_path / "a.model")
    du2, ac2 = load_model(tmp_path / "d.model"), load_model(tmp_path / "a.model")
    assert du2.params == du.params
    assert all(np.array_equal(ac2.means[k], v) for k, v in ac.means.items())
    labs = [lab for u in toy_models[0][:3] for lab in u.labels]
    assert predict_durations(du2, labs) == predict_durations(du, labs)


def test_feature_file_and_sidecar(tmp_path):
    m = two_leaf_acoustic([1.0, -2.5], [2.0, 0.25])
    traj = generate_trajectory(m, [LAB, LAB], [2, 3])
    write_trajectory(tmp_path / "x.feat", traj)
    assert read_sidecar(tmp_path / "x.feat") == (5, 2, 5.0)
    assert (tmp_path / "x.feat").stat().st_size == 5 * 2 * 4
    back = read_trajectory(tmp_path / "x.feat")
    assert np.array_equal(back.frames, traj.frames)
    buf = io.StringIO()
    dump_text(traj, buf)
    assert buf.getvalue().splitlines()[0] == "0\t1\t-2.5"
    with open(tmp_path / "x.feat", "ab") as fh:
        fh.write(b"\0" * 8)
    with pytest.raises(ValueError):
        read_trajectory(tmp_path / "x.feat")


def test_concatenate_with_pause():
    m = two_leaf_acoustic([1.0], [2.0])
    a = generate_trajectory(m, [LAB], [2])
    b = generate_trajectory(m, [LAB], [3])
    joined = concatenate([a, b], np.zeros((4, 1)))
    assert joined.num_frames == 9 and joined.spans == [(0, 2), (6, 9)]
    assert concatenate([a, b]).num_frames == 5


label_st = st.lists(st.tuples(*[st.sampled_from(["sil", "a", "aa", "m", "n", "k", "kh", "s"])] * 5),
                    min_size=1, max_size=20)


@settings(max_examples=200, deadline=None)
@given(label_st, st.floats(-2, 2), st.floats(0, 2), st.integers(0, 4))
def test_conservation_and_rate_monotonicity(toy_models, ctxs, rho, step, window):
    _, du, ac = toy_models
    labs = [FullContextLabel(*c) for c in ctxs]
    d1 = predict_durations(du, labs, rho)
    d2 = predict_durations(du, labs, rho + step)
    assert all(x >= 1 for x in d1)
    assert all(b >= a for a, b in zip(d1, d2))
    traj = generate_trajectory(ac, labs, d1, window)
    assert traj.num_frames == sum(d1)
    assert [b - a for a, b in traj.spans] == d1
    assert traj.spans[0][0] == 0 and all(x[1] == y[0] for x, y in zip(traj.spans, traj.spans[1:]))


def test_silence_frames(toy_models):
    _, _, ac = toy_models
    f = silence_frames(ac, "sil", 3)
    assert f.shape == (3, ac.dim)
