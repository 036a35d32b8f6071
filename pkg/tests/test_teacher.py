"""Teacher training and the two distillation routines."""

import numpy as np
import pytest

from cadent.automaton import ProductState, make_dfa
from cadent.envs import EnvSpec, default_spec, make_env
from cadent.tabular import LearningParams, QTable, softmax_policy
from cadent.teacher import (AGGREGATION_MODES, TeacherError,
                            build_knowledge, dense_knowledge,
                            distill_automaton_values, distill_teacher_policy,
                            load_knowledge, save_knowledge, train_teacher)

from oracles import naive_softmax

CHAIN = make_dfa(
    states=("q0", "q1", "acc"),
    alphabet=("a", "b"),
    start="q0",
    accepting={"acc"},
    edges={("q0", "a"): "q1", ("q1", "b"): "acc"},
)


def _table(entries, n_actions=2):
    qt = QTable(n_actions)
    for (key, a), v in entries.items():
        qt.set(key, a, v)
    return qt


def _k(env_state, q):
    return ProductState(env_state, q)


# ---------------------------------------------------------------------------
# strategic value distillation


def test_distill_single_trigger():
    key = _k((0, 0), "q0")
    qt = _table({(key, 1): 3.0})
    log = {((key, 1), ("q0", "q1")), ((_k((1, 1), "q1"), 0), ("q1", "acc"))}
    out = distill_automaton_values(qt, CHAIN, log)
    assert out[("q0", "q1")] == 3.0
    assert out[("q1", "acc")] == 0.0


def test_distill_means_distinct_triggers():
    k1, k2 = _k((0, 0), "q0"), _k((5, 5), "q0")
    qt = _table({(k1, 0): 2.0, (k2, 1): 4.0})
    log = {((k1, 0), ("q0", "q1")), ((k2, 1), ("q0", "q1")),
           ((_k((1, 1), "q1"), 0), ("q1", "acc"))}
    out = distill_automaton_values(qt, CHAIN, log)
    assert out[("q0", "q1")] == pytest.approx(3.0, abs=1e-12)


def test_distill_rejects_uncovered_edge():
    key = _k((0, 0), "q0")
    qt = _table({(key, 1): 3.0})
    log = {((key, 1), ("q0", "q1"))}
    with pytest.raises(TeacherError, match="q1"):
        distill_automaton_values(qt, CHAIN, log)


def test_distill_order_invariant():
    keys = [(_k((i, i), "q0"), i % 2) for i in range(6)]
    qt = _table({ka: float(i) for i, ka in enumerate(keys)})
    tail = ((_k((9, 9), "q1"), 0), ("q1", "acc"))
    log_fwd = set([(ka, ("q0", "q1")) for ka in keys] + [tail])
    log_rev = set([(ka, ("q0", "q1")) for ka in reversed(keys)] + [tail])
    assert (distill_automaton_values(qt, CHAIN, log_fwd)
            == distill_automaton_values(qt, CHAIN, log_rev))


def test_distill_positive_scaling_equivariance():
    k1, k2 = _k((0, 0), "q0"), _k((1, 1), "q1")
    base = {(k1, 0): 2.5, (k2, 1): -1.5}
    log = {((k1, 0), ("q0", "q1")), ((k2, 1), ("q1", "acc"))}
    plain = distill_automaton_values(_table(base), CHAIN, log)
    scaled = distill_automaton_values(
        _table({ka: 3.0 * v for ka, v in base.items()}), CHAIN, log)
    for edge, v in plain.items():
        assert scaled[edge] == pytest.approx(3.0 * v, abs=1e-12)


# ---------------------------------------------------------------------------
# tactical policy distillation


def test_policy_single_state_is_softmax_of_row():
    key, tail = _k((0, 0), "q0"), _k((1, 1), "q1")
    qt = _table({(key, 0): 1.0, (key, 1): 0.0, (tail, 1): 2.0})
    vis = {(key, 0): 4, (key, 1): 2, (tail, 1): 1}
    pi = distill_teacher_policy(qt, vis, CHAIN, tau=1.0, n_actions=2)
    assert np.allclose(pi["q0"], naive_softmax([1.0, 0.0], 1.0), atol=1e-12)
    assert np.allclose(pi["q1"], naive_softmax([0.0, 2.0], 1.0), atol=1e-12)


def test_policy_visitation_weighting():
    k1, k2, tail = _k((0, 0), "q0"), _k((1, 1), "q0"), _k((2, 2), "q1")
    qt = _table({(k1, 0): 1.0, (k2, 1): 1.0})
    vis = {(k1, 0): 3, (k2, 0): 1, (tail, 0): 1}
    pi = distill_teacher_policy(qt, vis, CHAIN, tau=1.0, n_actions=2)
    # weighted mean row is (0.75, 0.25)
    assert np.allclose(pi["q0"], naive_softmax([0.75, 0.25], 1.0), atol=1e-12)
    flat = distill_teacher_policy(qt, vis, CHAIN, tau=1.0, n_actions=2,
                                  aggregation="unweighted")
    assert np.allclose(flat["q0"], naive_softmax([0.5, 0.5], 1.0), atol=1e-12)


def test_policy_rows_only_for_visited_states():
    key = _k((0, 0), "q0")
    qt = _table({(key, 0): 1.0})
    vis = {(key, 0): 1, (_k((2, 2), "q1"), 1): 2}
    pi = distill_teacher_policy(qt, vis, CHAIN, tau=2.0, n_actions=2)
    assert set(pi) == {"q0", "q1"}


def test_policy_requires_accepting_path_heads():
    key = _k((0, 0), "q0")
    qt = _table({(key, 0): 1.0})
    with pytest.raises(TeacherError, match="q1"):
        distill_teacher_policy(qt, {(key, 0): 1}, CHAIN, tau=1.0, n_actions=2)


def test_policy_validation_errors():
    key = _k((0, 0), "q0")
    qt = _table({(key, 0): 1.0})
    vis = {(key, 0): 1}
    with pytest.raises(ValueError):
        distill_teacher_policy(qt, vis, CHAIN, tau=0.0, n_actions=2)
    with pytest.raises(ValueError):
        distill_teacher_policy(qt, vis, CHAIN, tau=1.0, n_actions=2,
                               aggregation="mode")


# ---------------------------------------------------------------------------
# real teacher on the small dungeon


@pytest.fixture(scope="module")
def dungeon_teacher(dungeon_source):
    return train_teacher(dungeon_source, episodes=1200, seed=7)


@pytest.fixture(scope="module")
def dungeon_knowledge(dungeon_teacher, dungeon_source):
    return build_knowledge(dungeon_teacher, dungeon_source.dfa, tau=2.0)


def test_teacher_reaches_acceptance(dungeon_teacher):
    res = dungeon_teacher
    assert res.n_successes > 0
    assert res.ep_reward.shape == (1200,)
    assert res.ep_steps.shape == (1200,)
    assert len(res.qtable) > 0
    assert res.transition_log


def test_teacher_is_deterministic(dungeon_source, dungeon_teacher):
    again = train_teacher(dungeon_source, episodes=1200, seed=7)
    assert again.qtable == dungeon_teacher.qtable
    assert np.array_equal(again.ep_reward, dungeon_teacher.ep_reward)
    assert again.n_successes == dungeon_teacher.n_successes


def test_teacher_validation_errors(dungeon_source):
    with pytest.raises(ValueError):
        train_teacher(dungeon_source, episodes=0)
    with pytest.raises(ValueError):
        train_teacher(dungeon_source,
                      params=LearningParams(alpha=0.1), episodes=10,
                      backend="jax")


def test_teacher_with_no_successes_is_rejected():
    env = make_env(default_spec("dungeon_quest", "source").with_(max_steps=5))
    with pytest.raises(TeacherError):
        train_teacher(env, episodes=20, seed=7)


def test_knowledge_invariants(dungeon_knowledge, dungeon_source):
    from cadent.automaton import accepting_path_edges
    know = dungeon_knowledge
    assert set(know.q_ad) >= accepting_path_edges(dungeon_source.dfa)
    assert all(np.isfinite(v) for v in know.q_ad.values())
    for q, probs in know.pi.items():
        assert len(probs) == 4
        assert abs(float(np.sum(probs)) - 1.0) < 1e-9
        assert np.all(probs >= 0.0)
    assert know.tau == 2.0
    assert know.aggregation in AGGREGATION_MODES
    assert know.q_ad_max() == max(abs(v) for v in know.q_ad.values())
    prov = know.provenance
    assert prov["env"] == "dungeon_quest"
    assert prov["variant"] == "source"
    assert prov["episodes"] == 1200
    assert prov["n_successes"] > 0


def test_knowledge_round_trip(dungeon_knowledge, tmp_path):
    path = tmp_path / "knowledge.json"
    save_knowledge(dungeon_knowledge, path)
    again = load_knowledge(path)
    assert again.q_ad == dungeon_knowledge.q_ad
    assert set(again.pi) == set(dungeon_knowledge.pi)
    for q in again.pi:
        assert np.array_equal(np.asarray(again.pi[q]),
                              np.asarray(dungeon_knowledge.pi[q]))
    assert again.tau == dungeon_knowledge.tau
    assert again.alphabet == dungeon_knowledge.alphabet
    assert again.provenance == dungeon_knowledge.provenance


def _knowledge_payload(knowledge, tmp_path, **patch):
    import json
    path = tmp_path / "knowledge.json"
    save_knowledge(knowledge, path)
    payload = json.loads(path.read_text())
    payload.update(patch)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(payload))
    return bad


@pytest.mark.parametrize("patch", [
    {"format": "qtable"},
    {"version": 99},
    {"n_actions": 0},
    {"aggregation": "median"},
    {"tau": -1.0},
    {"alphabet": []},
    {"provenance": {}},
])
def test_load_knowledge_rejects_bad_header(dungeon_knowledge, tmp_path,
                                           patch):
    bad = _knowledge_payload(dungeon_knowledge, tmp_path, **patch)
    with pytest.raises(ValueError):
        load_knowledge(bad)


def test_load_knowledge_rejects_bad_rows(dungeon_knowledge, tmp_path):
    bad = _knowledge_payload(
        dungeon_knowledge, tmp_path,
        q_ad=[{"from": "q0", "to": "q_key", "value": float("nan")}])
    with pytest.raises(ValueError, match="non-finite"):
        load_knowledge(bad)
    bad = _knowledge_payload(
        dungeon_knowledge, tmp_path,
        pi=[{"q": "q0", "probs": [0.5, 0.5]}])
    with pytest.raises(ValueError, match="length"):
        load_knowledge(bad)
    bad = _knowledge_payload(
        dungeon_knowledge, tmp_path,
        pi=[{"q": "q0", "probs": [0.5, 0.1, 0.1, 0.1]}])
    with pytest.raises(ValueError, match="distribution"):
        load_knowledge(bad)


# ---------------------------------------------------------------------------
# dense form


def test_dense_knowledge_layout(dungeon_knowledge, dungeon_source):
    dfa = dungeon_source.dfa
    comp = dfa.compiled()
    q_ad, known, pi, pi_known = dense_knowledge(dungeon_knowledge, dfa, 4)
    n_q = len(dfa.states)
    assert q_ad.shape == (n_q, n_q) and known.shape == (n_q, n_q)
    assert pi.shape == (n_q, 4) and pi_known.shape == (n_q,)
    for (q, q2), v in dungeon_knowledge.q_ad.items():
        i, j = comp.state_index[q], comp.state_index[q2]
        assert known[i, j]
        assert q_ad[i, j] == v
    assert not known[comp.state_index["q_accept"],
                     comp.state_index["q0"]]
    for q, probs in dungeon_knowledge.pi.items():
        i = comp.state_index[q]
        assert pi_known[i]
        assert np.array_equal(pi[i], np.asarray(probs))


def test_dense_knowledge_rejects_mismatches(dungeon_knowledge,
                                            dungeon_source, env_cache):
    with pytest.raises(ValueError, match="alphabet"):
        dense_knowledge(dungeon_knowledge,
                        env_cache("blind_craftsman").dfa, 4)
    with pytest.raises(ValueError, match="actions"):
        dense_knowledge(dungeon_knowledge, dungeon_source.dfa, 5)


def test_dense_knowledge_rejects_unknown_state(dungeon_source):
    from cadent.teacher import TeacherKnowledge
    know = TeacherKnowledge(
        q_ad={("zz", "q0"): 1.0}, pi={}, tau=2.0, n_actions=4,
        alphabet=tuple(dungeon_source.dfa.alphabet),
        aggregation="visitation_weighted", provenance={"env": "x"})
    with pytest.raises(ValueError, match="unknown automaton"):
        dense_knowledge(know, dungeon_source.dfa, 4)


def test_build_knowledge_matches_manual_distillation(dungeon_teacher,
                                                     dungeon_source):
    know = build_knowledge(dungeon_teacher, dungeon_source.dfa, tau=2.0)
    manual_q = distill_automaton_values(
        dungeon_teacher.qtable, dungeon_source.dfa,
        dungeon_teacher.transition_log)
    assert know.q_ad == manual_q
    manual_pi = distill_teacher_policy(
        dungeon_teacher.qtable, dungeon_teacher.visits, dungeon_source.dfa,
        2.0, 4)
    assert set(know.pi) == set(manual_pi)
    for q in manual_pi:
        assert np.array_equal(know.pi[q], manual_pi[q])
