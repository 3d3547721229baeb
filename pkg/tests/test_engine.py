import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import QuadraticProblem, StaticTopology, complete, path
from dpdcc.compress import Compressor
from dpdcc.engine import (
    Schedule,
    baseline_round,
    compressed_round,
    initial_state,
    positive_part,
    project_box,
    schedule_at,
    simulate,
)
from dpdcc.graph import RandomRingTopology
from dpdcc.problem import BoxSet, LocalizationProblem, generate_instance, localization_constraint, localization_loss_gradient


def small_setup(n=5, seed=0, rho=0.3):
    prob = LocalizationProblem(generate_instance(n, seed=seed))
    return prob, RandomRingTopology(n, rho, seed)


# schedules --------------------------------------------------------------


def test_polynomial_first_round():
    sch = Schedule("polynomial", alpha0=0.7, gamma0=0.05, s0=2.0)
    assert schedule_at(sch, 1) == (0.7, 0.05 / 0.7, 2.0)


def test_geometric_first_round():
    sch = Schedule("geometric", alpha0=0.7, gamma0=0.05, s0=2.0, mu=0.9)
    a, g, s = schedule_at(sch, 1)
    assert a == pytest.approx(0.7 * math.sqrt(0.9), rel=1e-15)
    assert s == pytest.approx(1.8, rel=1e-15)


def test_polynomial_fourth_round():
    assert schedule_at(Schedule(alpha0=1.0, theta1=0.5), 4)[0] == 0.5


@settings(max_examples=100, deadline=None)
@given(family=st.sampled_from(["polynomial", "geometric"]), t=st.integers(1, 10**6),
       alpha0=st.floats(1e-3, 10), gamma0=st.floats(1e-4, 1), theta1=st.floats(0.05, 0.95),
       mu=st.floats(0.05, 0.99))
def test_step_product_is_constant(family, t, alpha0, gamma0, theta1, mu):
    sch = Schedule(family, alpha0=alpha0, gamma0=gamma0, theta1=theta1, theta2=1.0, mu=mu)
    a, g, _ = schedule_at(sch, t)
    assert a * g == pytest.approx(gamma0, rel=1e-12)


def test_scaling_underflow_is_floored(caplog):
    sch = Schedule("geometric", mu=0.5)
    with caplog.at_level(logging.WARNING):
        _, _, s = schedule_at(sch, 2000)
    assert s == np.finfo(float).tiny
    assert "underflow" in caplog.text


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(theta1=1.2)
    with pytest.raises(ValueError):
        Schedule(theta1=0.5, theta2=0.4)
    with pytest.raises(ValueError):
        Schedule("geometric", mu=1.0)
    with pytest.raises(ValueError):
        Schedule(gamma0=0.0)
    with pytest.raises(ValueError):
        schedule_at(Schedule(), 0)
    with pytest.raises(ValueError):
        Schedule(gamma0=0.1).check_gamma0(2.0)
    Schedule(gamma0=0.06).check_gamma0(2.0)


# primitives -------------------------------------------------------------


def test_positive_part_examples(rng):
    assert np.array_equal(positive_part(np.array([-1.0, 2.0])), [0.0, 2.0])
    assert positive_part(np.array(0.0)) == 0.0
    v = rng.normal(size=500)
    out = positive_part(v)
    assert np.all(out >= 0)
    assert out.tolist() == [max(x, 0.0) for x in v]


def test_projection_examples():
    box = BoxSet.cube(2, 5.0)
    x = np.array([1.0, -2.0])
    assert np.array_equal(project_box(x, box), x)
    assert np.array_equal(project_box(np.array([7.0, -9.0]), box), [5.0, -5.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.lists(st.floats(-50, 50), min_size=2, max_size=2))
def test_projection_inequalities(by, c):
    from dpdcc.checks import projection_slacks

    box = BoxSet.cube(2, 5.0)
    b, y = np.array(by[:2]), np.array(by[2:])
    first, second = projection_slacks(box, b[None], np.array(c)[None], y[None])
    assert first[0] >= -1e-10 and second[0] >= -1e-10


# reference implementation ------------------------------------------------


def reference_trajectory(inst, topo, sch, comp, T):
    """Agent-by-agent loop transcription of the compressed algorithm."""
    n, p = inst.n, inst.p
    lo, hi = inst.box.lower, inst.box.upper
    clip = lambda v: [min(max(v[k], lo[k]), hi[k]) for k in range(p)]  # noqa: E731
    z = [[0.0] * p for _ in range(n)]
    zh = [[0.0] * p for _ in range(n)]
    out = []
    for t in range(1, T + 1):
        if sch.family == "polynomial":
            alpha = sch.alpha0 / t**sch.theta1
            s = sch.s0 / t**sch.theta2
        gamma = sch.gamma0 / alpha
        for j in range(n):
            k = [math.floor((z[j][d] - zh[j][d]) / s / comp.delta + 0.5) for d in range(p)]
            zh[j] = clip([zh[j][d] + s * comp.delta * k[d] for d in range(p)])
        W = topo.mixing(t).W
        x = [clip([math.fsum(W[i, j] * zh[j][d] for j in range(n)) for d in range(p)]) for i in range(n)]
        v = []
        for i in range(n):
            xi = np.array(x[i])
            g, B = localization_constraint(inst, i, t, xi)
            vi = [gamma * max(gk, 0.0) for gk in g]
            grad = localization_loss_gradient(inst, i, t, xi)
            omega = [grad[d] + sum(B[k, d] * vi[k] for k in range(len(vi))) for d in range(p)]
            z[i] = clip([x[i][d] - alpha * omega[d] for d in range(p)])
            v.append(vi)
        out.append((np.array(x), np.array(z), np.array(v)))
    return out


def test_matches_reference_implementation():
    inst = generate_instance(3, seed=21)
    prob = LocalizationProblem(inst)
    topo = RandomRingTopology(3, 0.5, 21)
    sch = Schedule(alpha0=0.05, gamma0=0.02)
    comp = Compressor("round", delta=1)
    hist = simulate(prob, topo, sch, comp, T=3, trace=True)
    ref = reference_trajectory(generate_instance(3, seed=21), topo, sch, comp, 3)
    for t, (x, z_next, v) in enumerate(ref):
        assert np.allclose(hist.trace["x"][t], x, rtol=0, atol=1e-12)
        assert np.allclose(hist.trace["v"][t], v, rtol=0, atol=1e-12)
        if t + 1 < 3:
            assert np.allclose(hist.trace["z"][t + 1], z_next, rtol=0, atol=1e-12)
    assert np.allclose(hist.final_state.z, ref[-1][1], rtol=0, atol=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_identity_compressor_is_baseline(seed):
    prob, topo = small_setup(seed=seed)
    sch = Schedule(alpha0=0.5, gamma0=0.02)
    a = simulate(prob, topo, sch, Compressor("identity"), T=60, trace=True)
    b = simulate(prob, topo, sch, None, T=60, trace=True)
    for key in ("x", "z", "v", "omega"):
        assert np.array_equal(a.trace[key], b.trace[key])
    assert np.array_equal(a.violation, b.violation)


def test_single_agent_is_projected_gradient_descent():
    prob = QuadraticProblem([[9.0, -1.0]])
    topo = StaticTopology(np.zeros((1, 1), bool))
    sch = Schedule(alpha0=0.3, gamma0=0.1)
    hist = simulate(prob, topo, sch, None, T=30, trace=True, z0=np.array([[-4.0, 3.0]]))
    z = np.array([-4.0, 3.0])
    for t in range(1, 31):
        assert np.array_equal(hist.trace["z"][t - 1][0], z)
        alpha = 0.3 / math.sqrt(t)
        z = np.clip(z - alpha * (z - prob.anchors[0]), -5, 5)
    assert np.array_equal(hist.final_state.z[0], z)
    assert hist.final_state.z[0][0] == 5.0  # anchor outside the box


def test_single_agent_compressed_steps_from_estimate():
    prob = QuadraticProblem([[2.0, -1.0]])
    topo = StaticTopology(np.zeros((1, 1), bool))
    sch = Schedule(alpha0=0.3, gamma0=0.1)
    hist = simulate(prob, topo, sch, Compressor("round"), T=20, trace=True, z0=np.array([[-4.0, 3.0]]))
    for t in range(1, 20):
        x = hist.trace["x"][t - 1][0]
        expected = np.clip(x - 0.3 / math.sqrt(t) * (x - prob.anchors[0]), -5, 5)
        assert np.array_equal(hist.trace["z"][t][0], expected)
    assert np.all(hist.trace["v"] == 0)


def test_symmetry_on_complete_graph():
    prob = QuadraticProblem([[1.0, 2.0]] * 4)
    topo = StaticTopology(complete(4))
    for comp in (None, Compressor("round")):
        hist = simulate(prob, topo, Schedule(), comp, T=50, trace=True)
        for key in ("x", "z"):
            arr = hist.trace[key]
            assert np.all(arr == arr[:, :1, :])


def test_complete_graph_mixes_exactly():
    prob = LocalizationProblem(generate_instance(4, seed=0))
    hist = simulate(prob, StaticTopology(complete(4)), Schedule(alpha0=0.5, gamma0=0.02),
                    Compressor("round"), T=30, trace=True)
    x = hist.trace["x"]
    assert np.all(x == x[:, :1, :])


def test_consensus_trend_on_static_path():
    anchors = np.random.default_rng(0).uniform(-4, 4, (6, 2))
    prob = QuadraticProblem(anchors)
    z0 = np.random.default_rng(1).uniform(-5, 5, (6, 2))
    for comp in (None, Compressor("round")):
        hist = simulate(prob, StaticTopology(path(6)), Schedule(alpha0=0.5), comp, T=400, z0=z0, trace=True)
        x = hist.trace["x"]
        spread = lambda a: max(np.linalg.norm(a[i] - a[j]) for i in range(6) for j in range(6))  # noqa: E731
        first = spread(x[0]) if comp is None else spread(hist.trace["z"][0])
        assert spread(x[-1]) < first


def test_constant_violation_drives_dual():
    prob = QuadraticProblem([[0.0, 0.0]], g_value=2.0)
    hist = simulate(prob, StaticTopology(np.zeros((1, 1), bool)), Schedule(gamma0=0.1), None, T=5, trace=True)
    for t in range(1, 6):
        assert hist.trace["v"][t - 1][0, 0] == pytest.approx(2.0 * 0.1 * math.sqrt(t))
    assert hist.violation.sum() == pytest.approx(10.0)


def test_empty_run():
    prob, topo = small_setup()
    hist = simulate(prob, topo, Schedule(), Compressor(), T=0)
    assert hist.T == 0
    assert hist.cumulative_bits().size == 0


def test_determinism():
    prob, topo = small_setup(seed=4)
    a = simulate(prob, topo, Schedule(gamma0=0.02), Compressor("dithered"), T=80, seed=4, trace=True)
    prob, topo = small_setup(seed=4)
    b = simulate(prob, topo, Schedule(gamma0=0.02), Compressor("dithered"), T=80, seed=4, trace=True)
    for key in a.trace:
        assert np.array_equal(a.trace[key], b.trace[key], equal_nan=True)
    assert np.array_equal(a.inner, b.inner)


def test_feasibility_invariants_all_compressors():
    for comp in (None, Compressor("round"), Compressor("dithered"), Compressor("round", delta=2, q=4)):
        prob, topo = small_setup(n=6, seed=2)
        hist = simulate(prob, topo, Schedule(alpha0=2.0, gamma0=0.02), comp, T=200, trace=True)
        assert hist.infeasible == {"x": 0, "z": 0, "zhat": 0, "v": 0}
        for key in ("x", "z"):
            assert np.all(np.abs(hist.trace[key]) <= 5.0)
        assert np.all(hist.trace["v"] >= 0)


def test_hundred_agents_bits_monotone():
    prob, topo = small_setup(n=100, seed=0, rho=0.1)
    hist = simulate(prob, topo, Schedule(gamma0=0.02), Compressor("round"), T=40, metrics=False)
    cum = hist.cumulative_bits()
    assert np.all(np.diff(cum) >= 0)
    assert np.array_equal(hist.bits, hist.edges * 16)
    assert np.all(hist.messages == 100)


def test_stale_tables_equal_canonical_on_complete_graph():
    prob = LocalizationProblem(generate_instance(4, seed=1))
    topo = StaticTopology(complete(4))
    a = simulate(prob, topo, Schedule(gamma0=0.02), Compressor("round"), T=40, trace=True)
    b = simulate(prob, topo, Schedule(gamma0=0.02), Compressor("round"), T=40, trace=True, stale=True)
    assert np.array_equal(a.trace["x"], b.trace["x"])


def test_stale_tables_stay_feasible():
    prob, topo = small_setup(n=6, seed=3, rho=0.1)
    hist = simulate(prob, topo, Schedule(gamma0=0.02), Compressor("round"), T=100, stale=True)
    assert hist.infeasible == {"x": 0, "z": 0, "zhat": 0, "v": 0}


def test_single_round_functions():
    prob, topo = small_setup()
    st0 = initial_state(prob)
    sch = Schedule(gamma0=0.02)
    st1, rec = compressed_round(st0, prob, topo.graph(1), topo.mixing(1), sch, Compressor("round"))
    assert st1.t == 2 and rec.t == 1
    assert rec.bits == topo.graph(1).edge_count * 16
    st2, rec2 = baseline_round(st0, prob, topo.graph(1), topo.mixing(1), sch)
    assert rec2.bits == topo.graph(1).edge_count * 128
    assert np.array_equal(st0.z, initial_state(prob).z)  # inputs are not mutated


def test_initial_state_rejects_outside_points():
    prob, _ = small_setup()
    with pytest.raises(ValueError):
        initial_state(prob, z0=np.full((5, 2), 6.0))


def test_divergence_raises():
    prob, topo = small_setup()
    with pytest.raises(FloatingPointError, match="round"):
        simulate(prob, topo, Schedule(alpha0=1e300, gamma0=1e308), Compressor(), T=10)
