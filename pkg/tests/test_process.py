import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numba import njit
from scipy import stats as sps

from diffsim.experiments import run_replications
from diffsim.graph import Graph, make_clique, make_random_regular, make_star
from diffsim.process import (
    EventKind, InvalidStateError, ProcessKind, ProcessSpec, init_state, labeled_success_prob,
    resistance, run, state_from_labels, step, total_rate,
)
from diffsim.process import _kernels as K

KINDS = list(ProcessKind)
S, I, R = 0, 1, 2


def spec_of(kind, lam=0.7, second=1.3):
    return ProcessSpec(kind, lam, second)


# --- construction -----------------------------------------------------------

def test_init_center():
    st_ = init_state(make_star(3), ProcessSpec.sis(1.0), {0})
    assert st_.labels_str() == "ISSS"
    assert st_.counts == (3, 1, 0)
    assert st_.time == 0.0
    assert np.isnan(st_.last_heal_time).all() and np.isnan(st_.last_attempt_time).all()


def test_init_empty_is_extinct():
    st_ = init_state(make_star(3), ProcessSpec.sirs(1.0, 1.0), [])
    assert st_.counts == (4, 0, 0)
    assert st_.extinct


def test_init_all():
    g = make_random_regular(10, 3, 0)
    st_ = init_state(g, ProcessSpec.csirs(1.0, 1.0), range(10))
    assert st_.counts[1] == 10


def test_init_out_of_range():
    with pytest.raises(ValueError):
        init_state(make_star(3), ProcessSpec.sis(1.0), [4])


def test_spec_validation():
    with pytest.raises(ValueError):
        ProcessSpec.sis(-1.0)
    with pytest.raises(ValueError):
        ProcessSpec.sirs(1.0, 0.0)
    with pytest.raises(ValueError):
        ProcessSpec.csirs(math.inf, 1.0)
    assert ProcessKind.parse("labeled") is ProcessKind.LABELED_CSIRS
    assert ProcessKind.parse("cSIRS") is ProcessKind.CSIRS


def test_recovered_label_rejected_for_sis():
    with pytest.raises(ValueError):
        state_from_labels(make_star(2), ProcessSpec.sis(1.0), "IRS")
    with pytest.raises(ValueError):
        state_from_labels(make_star(2), ProcessSpec.csirs(1.0, 1.0), "IRS")


# --- resistance and labeled probability ----------------------------------------

def test_resistance_never_healed():
    st_ = init_state(make_star(2), ProcessSpec.csirs(1.0, 1.0), [0])
    assert resistance(st_, 1, 5.0) == 0.0


def test_resistance_at_heal_instant_and_half_life():
    g = make_star(2)
    st_ = state_from_labels(g, ProcessSpec.csirs(1.0, 1.0), "ISS",
                            last_heal_time=[np.nan, 2.0, np.nan], time=2.0)
    assert resistance(st_, 1, 2.0) == 1.0
    assert resistance(st_, 1, 2.0 + math.log(2)) == pytest.approx(0.5, abs=1e-15)


def test_labeled_success_prob():
    assert labeled_success_prob(1.7, 1.7, 1.0) == 0.0
    assert labeled_success_prob(math.log(2), 0.0, 1.0) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        labeled_success_prob(1.0, 2.0, 1.0)


# --- aggregate rates ------------------------------------------------------------------

@pytest.mark.parametrize("kernel", ["star", "graph"])
def test_total_rate_star6_example(kernel):
    st_ = state_from_labels(make_star(6), ProcessSpec.sirs(0.5, 1.0), "ISSSIIR", kernel=kernel)
    heal, att, deim = total_rate(st_)
    assert (heal, att, deim) == (3.0, 1.5, 1.0)
    assert heal + att + deim == 5.5


def test_total_rate_no_infected():
    st_ = state_from_labels(make_star(3), ProcessSpec.sirs(0.5, 2.0), "SRRS")
    assert total_rate(st_) == (0.0, 0.0, 4.0)


def test_total_rate_sis_has_no_deimmunization():
    st_ = init_state(make_clique(5), ProcessSpec.sis(0.3), [0, 2])
    assert total_rate(st_)[2] == 0.0


def explicit_rates(graph: Graph, spec: ProcessSpec, label) -> tuple[float, float, float]:
    """Per-clock enumeration: one heal clock per I, one deimmunization clock per R,
    one attempt clock per (infected, attemptable) directed edge."""
    kind = spec.kind
    ok = {S} | ({R} if kind == ProcessKind.LABELED_CSIRS else set())
    heal = sum(1.0 for x in label if x == I)
    att = 0.0
    for u, v in graph.edges:
        for a, b in ((u, v), (v, u)):
            if label[a] == I and label[b] in ok:
                att += spec.lam
    deim = spec.rho_or_alpha * sum(1 for x in label if x == R) if kind.has_recovered else 0.0
    return heal, att, deim


def _random_small_graph(rng, n):
    if rng.random() < 0.4:
        return make_star(n - 1)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    keep = [p for p in pairs if rng.random() < 0.5]
    return Graph.from_edges(n, keep)


def test_total_rate_matches_enumeration_on_random_states():
    rng = np.random.default_rng(20261015)
    checked = 0
    for trial in range(1000):
        n = int(rng.integers(2, 7))
        g = _random_small_graph(rng, n)
        kind = KINDS[trial % 4]
        spec = spec_of(kind, float(rng.uniform(0.1, 3)), float(rng.uniform(0.1, 3)))
        allowed = 3 if kind.has_recovered else 2
        label = rng.integers(0, allowed, size=n).astype(np.int8)
        kernels = ["graph", "star"] if g.is_star else ["graph"]
        for kernel in kernels:
            st_ = state_from_labels(g, spec, label, seed=trial, kernel=kernel)
            for _ in range(4):  # also after incremental updates
                got = total_rate(st_)
                want = explicit_rates(g, spec, st_.label)
                assert got == pytest.approx(want, rel=1e-12, abs=1e-12)
                checked += 1
                if st_.extinct:
                    break
                step(st_)
    assert checked > 1000


# --- step -----------------------------------------------------------------------------

def test_step_single_vertex_heal_time_from_stub_uniform():
    g = Graph(1, ())
    st_ = init_state(g, ProcessSpec.sis(1.0), [0], seed=123)
    stub = copy.deepcopy(st_.rng)
    u = stub.random()  # first uniform of the stream drives the waiting time
    ev = step(st_)
    assert ev.kind is EventKind.HEAL and ev.subject == 0
    assert ev.time == -math.log(1.0 - u)
    assert st_.extinct


def test_step_on_extinct_state_raises():
    st_ = init_state(make_star(2), ProcessSpec.sis(1.0), [])
    with pytest.raises(InvalidStateError):
        step(st_)


@njit(cache=True)
def _acceptance_count(kind, alpha, t, last_heal, last_attempt, label, trials, rng):
    lh = np.full(2, np.nan)
    la = np.full(2, np.nan)
    lab = np.zeros(2, np.int8)
    hits = 0
    for _ in range(trials):
        lh[1] = last_heal
        la[1] = last_attempt
        lab[1] = label
        if K.attempt_outcome(kind, alpha, t, lab, lh, la, 1, rng):
            hits += 1
    return hits


def test_csirs_attempt_at_heal_instant_always_fails():
    rng = np.random.default_rng(1)
    assert _acceptance_count(K.CSIRS, 1.0, 3.0, 3.0, np.nan, S, 10_000, rng) == 0


@pytest.mark.parametrize("r", [0.1, 0.5, 0.9])
def test_csirs_thinning_frequency(r):
    # freeze time so the resistance stays at r
    alpha = 1.0
    t = -math.log(r) / alpha
    trials = 100_000
    hits = _acceptance_count(K.CSIRS, alpha, t, 0.0, np.nan, S, trials, np.random.default_rng(7))
    p = 1 - r
    se = math.sqrt(p * (1 - p) / trials)
    assert abs(hits / trials - p) < 3 * se


def test_labeled_thinning_frequency():
    # R target healed at 0, previous attempt at 0.4, alpha 2: p = 1 - exp(-0.8)
    trials = 100_000
    hits = _acceptance_count(K.LABELED, 2.0, 1.0, 0.0, 0.4, R, trials, np.random.default_rng(8))
    p = -math.expm1(-0.8)
    assert abs(hits / trials - p) < 3 * math.sqrt(p * (1 - p) / trials)


def test_labeled_first_attempt_after_heal_fails():
    rng = np.random.default_rng(2)
    assert _acceptance_count(K.LABELED, 1.0, 5.0, 1.0, np.nan, R, 1000, rng) == 0
    # plain S target in labeled cSIRS always accepts
    assert _acceptance_count(K.LABELED, 1.0, 5.0, 1.0, np.nan, S, 1000, rng) == 1000


def _audit_run(graph, spec, init, seed, steps=400, kernel="auto"):
    """Step a run and check every transition against the process rules."""
    st_ = init_state(graph, spec, init, seed=seed, kernel=kernel)
    kind = spec.kind
    n = graph.vertex_count
    last_t = 0.0
    for _ in range(steps):
        if st_.extinct:
            break
        before = st_.label.copy()
        ev = step(st_)
        after = st_.label
        assert ev.time > last_t
        last_t = ev.time
        assert st_.time == ev.time
        assert sum(st_.counts) == n
        changed = np.flatnonzero(before != after)
        v = ev.subject
        if ev.kind is EventKind.HEAL:
            assert before[v] == I and after[v] == (R if kind.has_recovered else S)
            assert st_.last_heal_time[v] == ev.time
        elif ev.kind is EventKind.DEIMMUNIZE:
            assert kind.has_recovered and before[v] == R and after[v] == S
        elif ev.kind is EventKind.INFECT:
            assert graph.has_edge(v, ev.source) and before[ev.source] == I
            assert after[v] == I
            if kind == ProcessKind.LABELED_CSIRS:
                assert before[v] in (S, R)
            else:
                assert before[v] == S
        elif ev.kind is EventKind.FAILED_ATTEMPT:
            assert kind in (ProcessKind.CSIRS, ProcessKind.LABELED_CSIRS)
            assert before[ev.source] == I and before[v] != I
        else:
            pytest.fail(f"unexpected event {ev}")
        assert len(changed) <= 1 and (len(changed) == 0 or changed[0] == v)
        if not kind.has_recovered:
            assert not (after == R).any()
        lh, la = st_.last_heal_time, st_.last_attempt_time
        set_h = ~np.isnan(lh)
        assert (lh[set_h] <= st_.time).all()
        set_a = ~np.isnan(la)
        assert (la[set_a] >= lh[set_a]).all() and (la[set_a] <= st_.time).all()
        if kind != ProcessKind.LABELED_CSIRS:
            assert not set_a.any()
    return st_


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("graph,init", [
    (make_star(12), [0]),
    (make_random_regular(20, 4, 3), [0, 5]),
    (make_clique(6), [1]),
])
def test_transition_audit(kind, graph, init):
    for seed in range(15):
        _audit_run(graph, spec_of(kind, 1.2, 0.8), init, seed)


@pytest.mark.parametrize("kind", KINDS)
def test_transition_audit_graph_kernel_on_star(kind):
    for seed in range(15):
        _audit_run(make_star(12), spec_of(kind, 1.2, 0.8), [0], seed, kernel="graph")


def test_labeled_does_infect_recovered_vertices():
    # on a clique with fast attempts R targets get hit often enough to see successes
    spec = ProcessSpec.labeled(3.0, 0.5)
    hits = 0
    for seed in range(30):
        st_ = init_state(make_clique(6), spec, [0], seed=seed)
        for _ in range(300):
            if st_.extinct:
                break
            before = st_.label.copy()
            ev = step(st_)
            if ev.kind is EventKind.INFECT and before[ev.subject] == R:
                hits += 1
    assert hits > 0


# --- run ------------------------------------------------------------------------------

def test_run_empty_init():
    o = run(init_state(make_star(3), ProcessSpec.sis(1.0), []), 10.0)
    assert (o.survival_time, o.censored, o.event_count) == (0.0, False, 0)


def _mean_within_3se(times, target):
    se = times.std(ddof=1) / math.sqrt(len(times))
    assert abs(times.mean() - target) < 3 * se, (times.mean(), target, se)


def test_star_without_infection_rate_survives_exp1():
    b = run_replications(make_star(3), ProcessSpec.sis(0.0), [0], 100_000, 100.0, seed=11)
    assert not b.censored.any()
    _mean_within_3se(b.survival_times, 1.0)


def test_single_vertex_sis_mean_one():
    b = run_replications(Graph(1, ()), ProcessSpec.sis(1.0), [0], 100_000, 100.0, seed=12)
    _mean_within_3se(b.survival_times, 1.0)


@pytest.mark.parametrize("kind", KINDS)
def test_censoring_at_tmax(kind):
    g = make_clique(8)
    o = run(init_state(g, spec_of(kind, 3.0, 1.0), range(8), seed=3), 2.5, record_trajectory=True)
    assert o.censored and o.survival_time == 2.5
    tr = o.trajectory
    assert tr.kind[-1] == K.EV_CENSOR and tr.time[-1] == 2.5
    assert (tr.time[:-1] < 2.5).all()
    assert (np.diff(tr.time[:-1]) > 0).all()


def test_extinction_marker():
    o = run(init_state(make_star(4), ProcessSpec.sirs(0.5, 1.0), [0], seed=5), 1e6, record_trajectory=True)
    assert not o.censored
    tr = o.trajectory
    assert tr.kind[-1] == K.EV_EXTINCTION
    assert tr.time[-1] == tr.time[-2] == o.survival_time
    assert tr.kind[-2] == K.EV_HEAL
    assert len(tr) == o.event_count + 1
    assert list(tr)[0].time == tr.time[0]


def test_trajectory_spans_log_chunks():
    # more events than one log chunk; chunks must stitch in order
    o = run(init_state(make_clique(30), ProcessSpec.sis(1.0), range(30), seed=1), 3000.0,
            record_trajectory=True)
    assert o.event_count > 70_000
    assert len(o.trajectory) == o.event_count + 1
    assert (np.diff(o.trajectory.time) >= 0).all()


def test_max_recovered_fraction_uses_vertex_count():
    o = run(init_state(make_clique(4), ProcessSpec.sirs(0.0, 1e-9), range(4), seed=2), 1e3)
    assert o.max_recovered == 4 and o.max_recovered_fraction == 1.0


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("graph", [make_star(9), make_random_regular(16, 3, 2)])
def test_runs_are_deterministic(kind, graph):
    a = run(init_state(graph, spec_of(kind), [0], seed=99, replication=4), 50.0, True)
    b = run(init_state(graph, spec_of(kind), [0], seed=99, replication=4), 50.0, True)
    for col in ("time", "kind", "subject", "source"):
        assert np.array_equal(getattr(a.trajectory, col), getattr(b.trajectory, col))
    c = run(init_state(graph, spec_of(kind), [0], seed=99, replication=5), 50.0, True)
    assert not np.array_equal(a.trajectory.time, c.trajectory.time)


@pytest.mark.parametrize("kind", [ProcessKind.CSIRS, ProcessKind.LABELED_CSIRS, ProcessKind.SIS])
def test_star_and_graph_kernels_agree_in_distribution(kind):
    g = make_star(8)
    spec = spec_of(kind, 0.6, 1.0)
    a = run_replications(g, spec, [0], 5000, 1e4, seed=1, kernel="star").survival_times
    b = run_replications(g, spec, [0], 5000, 1e4, seed=2, kernel="graph").survival_times
    # three comparisons in this family, so a stricter level than 0.01
    assert sps.ks_2samp(a, b).pvalue > 0.001


def test_star_kernel_refuses_non_star():
    with pytest.raises(ValueError):
        init_state(make_clique(4), ProcessSpec.sis(1.0), [0], kernel="star")


@settings(max_examples=30, deadline=None)
@given(kind=st.sampled_from(KINDS), lam=st.floats(0.0, 4.0), second=st.floats(0.05, 4.0),
       seed=st.integers(0, 2**63), n=st.integers(2, 9))
def test_conservation_and_legality_property(kind, lam, second, seed, n):
    g = make_star(n - 1) if seed % 2 else make_clique(n)
    _audit_run(g, spec_of(kind, lam, second), [0], seed, steps=150)
