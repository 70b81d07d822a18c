import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqhj import (
    ContourSpec,
    ContourThroughPole,
    ConvergedToNode,
    DegenerateScenario,
    GaussianPacket,
    NoConvergence,
    ScenarioShape,
    Superposition,
    characteristic_points,
    circulation,
    nodal_angle,
    nodal_line_state,
    nodal_rate,
    nodal_trajectory,
    node_position,
    node_spacing,
    pole_local_div_vort,
    psi_scale,
    qmf,
    refine_node,
    refine_stagnation,
    superposition_dz,
    superposition_value,
    symmetric_params,
    theta_limits,
)
from cqhj.nodal import pole_streamlines

SQ2 = math.sqrt(2.0)
CASE1 = Superposition.symmetric(10, 2, SQ2)
CASE2 = Superposition.symmetric(5, 1, SQ2 / 4)


def test_node_positions_match_frozen_oracle(frozen):
    for key, n, t in [("case1_node0_t0", 0, 0.0), ("case1_node0_t5", 0, 5.0),
                      ("case1_node1_t5", 1, 5.0), ("case1_node0_t2", 0, 2.0)]:
        assert node_position(CASE1, n, t) == pytest.approx(complex(*frozen[key]), abs=1e-12)
    assert node_position(CASE1, 0, 0.0) == pytest.approx(0.3065 - 0.3831j, abs=5e-5)
    assert node_position(CASE1, 0, 5.0) == pytest.approx(math.pi / 4, abs=1e-15)


@settings(max_examples=100)
@given(n=st.integers(-5, 5), t=st.floats(0.0, 10.0), case=st.sampled_from([CASE1, CASE2]))
def test_closed_form_nodes_zero_psi(n, t, case):
    z = node_position(case, n, t)
    assert abs(superposition_value(case, z, t)) < 1e-10 * max(1.0, psi_scale(case, t))


def test_node_position_accepts_arrays():
    ts = np.linspace(0, 10, 11)
    zs = node_position(CASE1, 2, ts)
    assert zs.shape == ts.shape
    assert zs[3] == node_position(CASE1, 2, ts[3])


def test_nodes_are_antisymmetric():
    for t in (0.0, 3.3, 5.0, 9.0):
        for n in range(5):
            assert node_position(CASE1, -n - 1, t) == pytest.approx(-node_position(CASE1, n, t), abs=1e-14)


def test_angle_is_increasing_and_matches_atan2():
    ts = np.linspace(0, 50, 2001)
    for sup in (CASE1, CASE2):
        theta = nodal_angle(sup, ts)
        assert np.all(np.diff(theta) > 0)
        z = node_position(sup, 0, ts)
        mask = z.real > 0
        assert np.allclose(theta[mask], np.arctan2(z.imag, z.real)[mask], atol=1e-14, rtol=0)
        # the nodal line passes through the nodes at angle theta
        zn = node_position(sup, 3, ts) - node_position(sup, -2, ts)
        assert np.allclose(np.tan(theta), zn.imag / zn.real, rtol=1e-9)


def test_rate_values_and_monotonicity():
    assert nodal_rate(CASE1, 0.0) == pytest.approx(0.25, rel=1e-15)
    assert nodal_rate(CASE2, 0.0) == pytest.approx(4.0, rel=1e-15)
    ts = np.linspace(0, 20, 401)
    for sup in (CASE1, CASE2):
        rate = nodal_rate(sup, ts)
        assert np.all(rate > 0) and np.all(np.diff(rate) < 0)


def test_spacing():
    assert node_spacing(CASE1, 5.0) == pytest.approx(math.pi / 2, rel=1e-14)
    ts = np.linspace(0, 20, 201)
    for sup in (CASE1, CASE2):
        d = node_spacing(sup, ts)
        assert np.all(np.diff(d) > 0)
        for t in (0.0, 2.5, 7.5):
            gaps = [abs(node_position(sup, n + 1, t) - node_position(sup, n, t)) for n in range(-5, 5)]
            assert np.allclose(gaps, node_spacing(sup, t), atol=1e-10, rtol=0)


def test_nodal_trajectory_lines():
    line = nodal_trajectory(CASE1, 0)
    assert line.slope == pytest.approx(0.8)
    assert line.intercept == pytest.approx(-0.2 * math.pi)
    th0, thinf = theta_limits(CASE1)
    assert math.tan(th0) * line.slope == pytest.approx(-1.0, rel=1e-14)
    assert math.tan(thinf) == pytest.approx(line.slope, rel=1e-12)
    for sup in (CASE1, CASE2):
        slopes = {nodal_trajectory(sup, n).slope for n in range(-3, 3)}
        assert len(slopes) == 1
        for n in range(-3, 3):
            ln = nodal_trajectory(sup, n)
            for t in np.linspace(0, 10, 21):
                assert ln.residual(node_position(sup, n, t)) < 1e-10


def test_degenerate_scenarios():
    with pytest.raises(DegenerateScenario):
        nodal_trajectory(Superposition.symmetric(0.0, 1.0, 1.0), 0)
    with pytest.raises(DegenerateScenario):
        theta_limits(Superposition.symmetric(3.0, 0.0, 1.0))


def test_symmetric_params_rejects_other_shapes():
    with pytest.raises(ScenarioShape):
        symmetric_params(Superposition((GaussianPacket(0, 1, 1),)))
    with pytest.raises(ScenarioShape):
        symmetric_params(Superposition((GaussianPacket(-3, 1, 1), GaussianPacket(4, -1, 1))))
    with pytest.raises(ScenarioShape):
        node_position(Superposition((GaussianPacket(-3, 1, 1), GaussianPacket(3, -1, 2))), 0, 1.0)
    sp = symmetric_params(CASE1)
    assert (sp.x0, sp.vp, sp.tau, sp.wavelength, sp.t_max_interference) == pytest.approx((10, 2, 4, math.pi, 5))


def test_nodal_line_state():
    st_ = nodal_line_state(CASE1, 5.0)
    assert st_.theta == pytest.approx(0.0, abs=1e-15)
    assert st_.spacing == pytest.approx(math.pi / 2)
    assert [n for n, _ in st_.node_positions] == list(range(-5, 5))


@pytest.mark.parametrize("t", [0.0, 2.5, 5.0, 7.5])
@pytest.mark.parametrize("n", [-2, 0, 3])
def test_refine_node_recovers_closed_form(n, t):
    exact = node_position(CASE1, n, t)
    pt = refine_node(CASE1, exact + 0.01 * (1 + 1j), t)
    assert pt.kind == "node" and pt.order == 1
    assert abs(pt.z - exact) < 1e-10
    assert pt.residual < 1e-10
    assert abs(superposition_dz(CASE1, pt.z, t)) > 0


def test_refined_node_moves_continuously():
    z = node_position(CASE1, 1, 3.0)
    for k in range(1, 50):
        t = 3.0 + 0.01 * k
        new = refine_node(CASE1, z, t).z
        zdot = (node_position(CASE1, 1, t + 1e-6) - node_position(CASE1, 1, t - 1e-6)) / 2e-6
        assert abs(new - z) < 2 * abs(zdot) * 0.01
        z = new


def test_refine_node_far_seed_fails():
    with pytest.raises(NoConvergence):
        refine_node(CASE1, 40.0 + 30.0j, 5.0)


@pytest.mark.parametrize("t", [0.0, 1.0, 4.851, 5.0, 9.0])
def test_origin_is_a_persistent_stagnation_point(t):
    pt = refine_stagnation(CASE1, 0.1 + 0.1j, t)
    assert abs(pt.z) < 1e-12
    assert pt.kind == "stagnation"
    assert abs(qmf(CASE1, pt.z, t)) < 1e-12


def test_single_packet_stagnation_point():
    pk = GaussianPacket(-1.0, 0.7, 0.6)
    sup = Superposition((pk,))
    pt = refine_stagnation(sup, -1.0 + 0.3j, 0.0)
    assert pt.z == pytest.approx(pk.x0 + 2j * pk.sigma0**2 * pk.momentum / pk.hbar, abs=1e-12)


def test_stagnation_refinement_rejects_nodes():
    # seeded exactly on a node, the refinement must not report the node as a stagnation point
    node = node_position(CASE1, 0, 5.0)
    try:
        pt = refine_stagnation(CASE1, node, 5.0)
    except (ConvergedToNode, NoConvergence):
        return
    assert abs(pt.z - node) > 0.1


@pytest.mark.parametrize("sup,ns", [(CASE1, range(-3, 3)), (CASE2, range(-2, 2))], ids=["case1", "case2"])
@pytest.mark.parametrize("t", [2.5, 5.0, 7.5])
def test_nodes_and_stagnation_points_alternate(sup, ns, t):
    # Case 2 spreads fast: beyond two spacings the stagnation points leave the line
    pts = characteristic_points(sup, t, ns)
    kinds = [p.kind for _, p in pts]
    assert kinds == ["node", "stagnation"] * (len(ns) - 1) + ["node"]
    # ordered along the line: projections onto the line direction increase
    u = np.exp(1j * nodal_angle(sup, t))
    proj = [(p.z * np.conj(u)).real for _, p in pts]
    assert np.all(np.diff(proj) > 0)


def test_characteristic_points_can_skip_failures():
    pts = characteristic_points(CASE2, 9.0, range(-5, 5), skip_failures=True)
    assert sum(p.kind == "node" for _, p in pts) == 10


def test_circulation_examples():
    t = 5.0
    d = node_spacing(CASE1, t)
    node = refine_node(CASE1, node_position(CASE1, 0, t), t).z
    gamma, flux = circulation(CASE1, ContourSpec(node, 0.3 * d), t)
    assert gamma == pytest.approx(2 * math.pi, abs=1e-6)
    assert abs(flux) < 1e-6
    # centred between nodes 0 and 1, radius 0.3 d: no node inside
    mid = 0.5 * (node_position(CASE1, 0, t) + node_position(CASE1, 1, t))
    assert abs(circulation(CASE1, ContourSpec(mid, 0.3 * d), t)[0]) < 1e-8
    # same centre, radius 0.7 d: both nodes inside
    assert circulation(CASE1, ContourSpec(mid, 0.7 * d), t)[0] == pytest.approx(4 * math.pi, abs=1e-6)


def test_circulation_counts_enclosed_nodes():
    rng = np.random.default_rng(5)
    for _ in range(50):
        sup = CASE1 if rng.random() < 0.5 else CASE2
        t = rng.uniform(1.0, 9.0)
        center = complex(rng.uniform(-3, 3), rng.uniform(-2, 2))
        radius = rng.uniform(0.2, 3.0)
        nodes = np.array([node_position(sup, n, t) for n in range(-30, 30)])
        dist = np.abs(nodes - center)
        if np.min(np.abs(dist - radius)) < 0.05:
            continue
        gamma, _ = circulation(sup, ContourSpec(center, radius), t)
        count = int(np.sum(dist < radius))
        assert abs(gamma / (2 * math.pi) - count) < 1e-5


def test_contour_through_a_node_is_rejected():
    node = node_position(CASE1, 0, 5.0)
    with pytest.raises(ContourThroughPole):
        circulation(CASE1, ContourSpec(node - 0.5, 0.5, n_points=64), 5.0)


def test_contour_spec_validation():
    with pytest.raises(ValueError):
        ContourSpec(0j, 0.0)
    with pytest.raises(ValueError):
        ContourSpec(0j, 1.0, n_points=8)


def test_pole_local_values():
    assert pole_local_div_vort(1, 0.1 + 0j) == pytest.approx((0.0, 200.0))
    x = 0.05
    gamma, omega = pole_local_div_vort(1, complex(x, x))
    assert gamma == pytest.approx(1 / x**2) and omega == pytest.approx(0.0, abs=1e-9)
    assert pole_local_div_vort(2, 0.1 + 0j, hbar=0.5) == pytest.approx((0.0, 200.0))
    with pytest.raises(ZeroDivisionError):
        pole_local_div_vort(1, 0j)


def test_pole_streamlines_are_hyperbolae():
    lines = pole_streamlines(n_samples=51, radius=0.1)
    assert sorted(lines) == [1, 2, 3, 4]
    for label, (s, dz) in lines.items():
        assert s[0] == pytest.approx(-math.pi / 3) and s[-1] == pytest.approx(math.pi / 3)
        x, y = dz.real, dz.imag
        # 1 and 3 open along the real axis, 2 and 4 along the imaginary axis
        h = x**2 - y**2 if label in (1, 3) else y**2 - x**2
        assert np.allclose(h, 0.01)
    assert np.all(lines[1][1].real < 0) and np.all(lines[3][1].real > 0)
    assert np.all(lines[2][1].imag < 0) and np.all(lines[4][1].imag > 0)
