import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridgame.errors import (
    ImbalancedCase,
    InconsistentTopology,
    InvalidCoherency,
    MalformedCase,
    UnknownLine,
    UnknownSubstation,
    ZeroReactance,
)
from gridgame.grid import (
    CoherencyConfig,
    Generator,
    PowerNetwork,
    Substation,
    TransmissionLine,
    bundled_case,
    dc_power_flow,
    disruption,
    dumps_network,
    incident_lines,
    line_weight,
    loads_network,
    network_schema,
    network_to_dict,
    parse_matpower_case,
)

from conftest import random_network, star_network

TWO_BUS = """
function mpc = two
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0   0 0 0 1 1 0 345 1 1.1 0.9;
  2 1 100 0 0 0 1 1 0 345 1 1.1 0.9;
];
mpc.gen = [
  1 100 0 300 -300 1 100 1 250 0;
];
mpc.branch = [
  1 2 0 0.1 0 0 0 0 0 0 1 -360 360;
];
"""


def _two_bus(**edits):
    text = TWO_BUS
    for old, new in edits.items():
        text = text.replace(old, new)
    return text


def triangle():
    subs = [Substation(1, 0.0), Substation(2, 45.0), Substation(3, 45.0)]
    gens = [Generator(1, 0.0, 200.0, 90.0)]
    lines = [TransmissionLine(1, 2, 10.0), TransmissionLine(1, 3, 10.0), TransmissionLine(2, 3, 10.0)]
    return PowerNetwork(subs, gens, lines, name="triangle")


# -- data model -----------------------------------------------------------------

class TestDataModel:
    def test_substation_invariants(self):
        with pytest.raises(ValueError):
            Substation(1, -1.0)
        with pytest.raises(ValueError):
            Substation(1, 0.0, 0.5, -0.5)

    def test_generator_invariants(self):
        with pytest.raises(ValueError):
            Generator(1, 10.0, 5.0, 7.0)
        with pytest.raises(ValueError):
            Generator(1, 0.0, 5.0, 7.0)

    def test_line_invariants(self):
        with pytest.raises(ValueError):
            TransmissionLine(1, 1, 1.0)
        with pytest.raises(ValueError):
            TransmissionLine(1, 2, 1.0, flow_min_mw=5.0)

    def test_network_rejects_bad_topology(self):
        subs = [Substation(1), Substation(2), Substation(3)]
        gen = [Generator(1, 0, 10, 0)]
        with pytest.raises(InconsistentTopology):
            PowerNetwork(subs, gen, [TransmissionLine(1, 2, 1.0)])  # bus 3 isolated
        with pytest.raises(InconsistentTopology):
            PowerNetwork(subs, gen, [TransmissionLine(1, 2, 1.0), TransmissionLine(2, 1, 1.0),
                                     TransmissionLine(2, 3, 1.0)])
        with pytest.raises(InconsistentTopology):
            PowerNetwork(subs, gen, [TransmissionLine(1, 2, 1.0), TransmissionLine(2, 4, 1.0)])
        with pytest.raises(InconsistentTopology):
            PowerNetwork(subs + [Substation(1)], gen, [TransmissionLine(1, 2, 1.0)])

    def test_line_lookup(self):
        net = triangle()
        assert net.line_index(2, 1) == net.line_index(1, 2)
        with pytest.raises(UnknownLine):
            net.line_index(1, 9)
        with pytest.raises(UnknownSubstation):
            net.check_bus(42)

    def test_coherency_invariants(self):
        with pytest.raises(InvalidCoherency):
            CoherencyConfig.from_lists([])
        with pytest.raises(InvalidCoherency):
            CoherencyConfig.from_lists([[1, 2], [2, 3]])
        with pytest.raises(InvalidCoherency):
            CoherencyConfig.from_lists([[1, 2]], [3])
        net = bundled_case("case9")
        with pytest.raises(InvalidCoherency, match="hosts no generator"):
            CoherencyConfig.from_lists([[1, 4]]).validate_for(net)
        coh = CoherencyConfig.from_lists([[1, 2], [3]], [1, 3])
        coh.validate_for(net)
        assert coh.K == 2 and coh.group_of(2) == 0 and coh.group_of(5) is None
        assert CoherencyConfig.from_dict(coh.to_dict()) == coh


# -- parsing --------------------------------------------------------------------

class TestParse:
    def test_two_bus(self):
        net = parse_matpower_case(TWO_BUS)
        assert (net.n_bus, net.n_line, len(net.generators)) == (2, 1, 1)
        assert net.lines[0].susceptance_pu == pytest.approx(10.0)
        assert net.bus(2).load_mw == 100.0
        assert math.isinf(net.lines[0].flow_max_mw)  # RATE_A = 0 means unlimited

    @pytest.mark.parametrize("name, counts", [
        ("case9", (9, 9, 3)), ("case14", (14, 20, 5)), ("case30", (30, 41, 6)),
        ("case39", (39, 46, 10)), ("case57", (57, 78, 7)),
    ])
    def test_bundled_counts(self, name, counts):
        net = bundled_case(name)
        assert (net.n_bus, net.n_line, len(net.generators)) == counts

    def test_unknown_bus(self):
        with pytest.raises(InconsistentTopology):
            parse_matpower_case(_two_bus(**{"1 2 0 0.1": "1 99 0 0.1"}))

    def test_zero_reactance(self):
        with pytest.raises(ZeroReactance):
            parse_matpower_case(_two_bus(**{"1 2 0 0.1": "1 2 0 0"}))

    def test_missing_matrix(self):
        with pytest.raises(MalformedCase):
            parse_matpower_case(TWO_BUS.replace("mpc.gen", "mpc.gens"))

    def test_out_of_service_branch_dropped(self):
        extra = "  1 2 0 0.2 0 0 0 0 0 0 0 -360 360;\n];"
        net = parse_matpower_case(TWO_BUS.replace("1 -360 360;\n];", "1 -360 360;\n" + extra, 1))
        assert net.lines[0].susceptance_pu == pytest.approx(10.0)

    def test_parallel_branches_merged(self):
        extra = "  2 1 0 0.2 0 50 0 0 0 0 1 -360 360;\n];"
        text = TWO_BUS.replace("0 0.1 0 0 0", "0 0.1 0 70 0").replace(
            "1 -360 360;\n];", "1 -360 360;\n" + extra, 1)
        net = parse_matpower_case(text)
        assert net.n_line == 1
        assert net.lines[0].susceptance_pu == pytest.approx(15.0)
        assert net.lines[0].flow_max_mw == pytest.approx(120.0)

    def test_comments_ignored(self):
        net = parse_matpower_case(TWO_BUS.replace("mpc.baseMVA = 100;", "mpc.baseMVA = 100; % MVA"))
        assert net.base_mva == 100.0

    @pytest.mark.parametrize("name", ["case9", "case14", "case30", "case39", "case57"])
    def test_json_round_trip(self, name):
        net = bundled_case(name)
        assert network_to_dict(loads_network(dumps_network(net))) == network_to_dict(net)

    def test_schema_validates_bundled(self):
        jsonschema = pytest.importorskip("jsonschema")
        jsonschema.validate(json.loads(dumps_network(bundled_case("case14"))), network_schema())


# -- power flow -----------------------------------------------------------------

def _oracle_angles(net, slack):
    """Least-squares solve of the full Laplacian system, shifted so the slack angle is 0."""
    p = np.zeros(net.n_bus)
    for gen in net.generators:
        p[net.bus_index[gen.substation_id]] += gen.initial_dispatch_mw
    p -= net.loads
    p[net.bus_index[slack]] -= p.sum()
    inc = np.zeros((net.n_line, net.n_bus))
    for k, ln in enumerate(net.lines):
        inc[k, net.bus_index[ln.from_id]] = 1.0
        inc[k, net.bus_index[ln.to_id]] = -1.0
    B = inc.T @ np.diag([ln.susceptance_pu * net.base_mva for ln in net.lines]) @ inc
    theta = np.linalg.lstsq(B, p, rcond=None)[0]
    return theta - theta[net.bus_index[slack]], inc


class TestFlow:
    def test_two_bus(self):
        fs = dc_power_flow(parse_matpower_case(TWO_BUS))
        assert fs.flow(1, 2) == pytest.approx(100.0)
        assert fs.angle_rad[2] == pytest.approx(-0.1)

    def test_triangle_symmetry(self):
        fs = dc_power_flow(triangle())
        assert fs.flow(1, 2) == pytest.approx(45.0)
        assert fs.flow(1, 3) == pytest.approx(45.0)
        assert fs.flow(2, 3) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("name", ["case9", "case14", "case30", "case39", "case57"])
    def test_against_independent_solve(self, name):
        net = bundled_case(name)
        fs = dc_power_flow(net)
        slack = min(net.generator_at)
        theta, inc = _oracle_angles(net, slack)
        flows = np.array([ln.susceptance_pu * net.base_mva for ln in net.lines]) * (inc @ theta)
        np.testing.assert_allclose(fs.angles, theta, atol=1e-10)
        np.testing.assert_allclose(fs.flows, flows, atol=1e-8)

    @pytest.mark.parametrize("name", ["case9", "case14", "case30", "case39", "case57"])
    def test_conservation(self, name):
        fs = dc_power_flow(bundled_case(name))
        assert np.abs(fs.balance_residual()).max() <= 1e-8

    def test_antisymmetry_exact(self, case9):
        net, _, fs = case9
        for ln in net.lines:
            assert fs.flow(ln.from_id, ln.to_id) == -fs.flow(ln.to_id, ln.from_id)

    def test_slack_defaults_to_first_reference(self, case14):
        net, coh, fs = case14
        assert fs.angle_rad[coh.reference_generators[0]] == 0.0

    def test_slack_must_host_generator(self):
        with pytest.raises(UnknownSubstation):
            dc_power_flow(triangle(), slack=2)

    def test_imbalance_beyond_slack_capacity(self):
        subs = [Substation(1, 0.0), Substation(2, 500.0)]
        net = PowerNetwork(subs, [Generator(1, 0.0, 200.0, 100.0)], [TransmissionLine(1, 2, 10.0)])
        with pytest.raises(ImbalancedCase):
            dc_power_flow(net)

    def test_slack_absorbs_small_mismatch(self):
        subs = [Substation(1, 0.0), Substation(2, 101.0)]
        net = PowerNetwork(subs, [Generator(1, 0.0, 200.0, 100.0)], [TransmissionLine(1, 2, 10.0)])
        fs = dc_power_flow(net)
        assert fs.dispatch_mw[1] == pytest.approx(101.0)
        assert np.abs(fs.balance_residual()).max() <= 1e-8


# -- weights and disruption -----------------------------------------------------

class TestDisruption:
    def test_line_weight(self):
        fs = dc_power_flow(parse_matpower_case(TWO_BUS))
        assert line_weight(fs, (1, 2)) == pytest.approx(100.0)
        assert line_weight(fs, (2, 1)) == pytest.approx(100.0)
        z = dc_power_flow(triangle())
        assert line_weight(z, (2, 3)) == pytest.approx(0.0, abs=1e-12)

    def test_line_weight_matches_flows(self, case9):
        net, _, fs = case9
        for ln in net.lines:
            assert line_weight(fs, ln) == abs(fs.flow(ln.from_id, ln.to_id))

    def test_empty_and_full(self, case9):
        net, _, fs = case9
        assert disruption(fs, []) == 0.0
        assert disruption(fs, [ln.key for ln in net.lines]) == pytest.approx(
            sum(abs(p) for p in fs.flows))

    def test_random_subsets_by_hand(self):
        fs = dc_power_flow(triangle())
        rng = np.random.default_rng(3)
        keys = [ln.key for ln in fs.network.lines]
        for _ in range(20):
            pick = [k for k in keys if rng.random() < 0.5]
            assert disruption(fs, pick) == pytest.approx(sum(abs(fs.flow(*k)) for k in pick))

    def test_incident_lines(self):
        star = star_network(5)
        assert incident_lines(star, []) == frozenset()
        assert incident_lines(star, [1]) == frozenset(ln.key for ln in star.lines)

    def test_incident_lines_random(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            net = random_network(rng, int(rng.integers(3, 11)), extra=3)
            comp = {s.id for s in net.substations if rng.random() < 0.3}
            scan = {ln.key for ln in net.lines if ln.from_id in comp or ln.to_id in comp}
            assert incident_lines(net, comp) == scan


@st.composite
def _two_subsets(draw):
    seed = draw(st.integers(0, 10_000))
    rng = np.random.default_rng(seed)
    net = random_network(rng, draw(st.integers(2, 12)), extra=draw(st.integers(0, 4)))
    keys = [ln.key for ln in net.lines]
    s1 = draw(st.sets(st.sampled_from(keys)))
    s2 = draw(st.sets(st.sampled_from(keys)))
    return net, s1, s2


@settings(max_examples=60, deadline=None)
@given(_two_subsets())
def test_disruption_is_modular_and_monotone(data):
    net, s1, s2 = data
    fs = dc_power_flow(net)
    d = lambda s: disruption(fs, s)  # noqa: E731
    assert d(s1 | s2) + d(s1 & s2) == pytest.approx(d(s1) + d(s2), abs=1e-9)
    assert d(s1 & s2) <= d(s1) + 1e-12 <= d(s1 | s2) + 2e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 14))
def test_random_networks_balance(seed, n):
    fs = dc_power_flow(random_network(np.random.default_rng(seed), n, extra=3))
    assert np.abs(fs.balance_residual()).max() <= 1e-8
