import csv

import numpy as np
import pytest

from lyapnet.net import init_network
from lyapnet.sampler import SamplingDomain, sample_budget
from lyapnet.systems import BUILTINS, DynamicalSystem
from lyapnet.verifier import UnsupportedDimension, export_grid, grid_values, verify

from oracles import quadratic_network


def decay(d):
    return DynamicalSystem.from_text(f"decay{d}", [f"-x{i + 1}" for i in range(d)])


def growth(d):
    return DynamicalSystem.from_text(f"growth{d}", [f"x{i + 1}" for i in range(d)])


@pytest.mark.parametrize("d, delta", [(1, 0.001), (2, 0.01), (3, 0.05), (5, 0.5)])
def test_norm_squared_passes_on_decay(d, delta):
    dom = SamplingDomain(d, 1.0, delta)
    rep = verify(quadratic_network(np.eye(d)), decay(d), dom, np.random.default_rng(0))
    assert rep.passed
    assert rep.fraction_V_positive == 1.0 and rep.fraction_Vdot_negative == 1.0
    assert rep.samples_checked == sample_budget(dom)
    assert rep.min_V > 0 and rep.max_Vdot < 0


def test_norm_squared_fails_on_growth():
    rep = verify(quadratic_network(np.eye(2)), growth(2), SamplingDomain(2, 1.0, 0.05), np.random.default_rng(0))
    assert not rep.passed
    assert rep.fraction_V_positive == 1.0 and rep.fraction_Vdot_negative == 0.0


def test_constant_network_fails():
    net = init_network(2, [(3, "tanh"), (1, "linear")], seed=0)
    theta = net.get_params()
    theta[:] = 0.0
    theta[-1] = 1.0  # output bias only; anchored value is identically zero
    net.set_params(theta)
    rep = verify(net, decay(2), SamplingDomain(2, 1.0, 0.05), np.random.default_rng(0))
    assert not rep.passed
    assert rep.min_V == 0.0 and rep.fraction_V_positive == 0.0


def test_verify_is_deterministic():
    net = init_network(2, "tanh3", seed=3)
    dom = SamplingDomain(2, 1.0, 0.05)
    a = verify(net, BUILTINS["s2_pendulum"], dom, np.random.default_rng(9))
    b = verify(net, BUILTINS["s2_pendulum"], dom, np.random.default_rng(9))
    assert a == b


def test_threshold_monotone():
    net = init_network(2, "tanh3", seed=3)
    dom = SamplingDomain(2, 1.0, 0.05)
    reps = [verify(net, BUILTINS["s2_pendulum"], dom, np.random.default_rng(1), t)
            for t in (0.01, 0.5, 0.9, 0.999, 1.0)]
    passed = [r.passed for r in reps]
    # once a threshold fails every stricter one fails too
    assert passed == sorted(passed, reverse=True)
    with pytest.raises(ValueError):
        verify(net, BUILTINS["s2_pendulum"], dom, np.random.default_rng(1), 0.0)


def test_budget_cap(caplog):
    dom = SamplingDomain(3, 1.0, 0.001)  # 2000^3 points requested
    rep = verify(quadratic_network(np.eye(3)), decay(3), dom, np.random.default_rng(0), cap=5000)
    assert rep.samples_checked == 5000
    assert "exceeds cap" in caplog.text


def test_report_dict_keys():
    rep = verify(quadratic_network(np.eye(1)), decay(1), SamplingDomain(1, 1.0, 0.1), np.random.default_rng(0))
    d = rep.as_dict()
    assert d["pass"] is True
    assert set(d) >= {"samples_checked", "min_V", "max_Vdot", "fraction_V_positive", "fraction_Vdot_negative"}


def test_grid_values_layout():
    pts, v, vd = grid_values(quadratic_network(np.eye(2)), decay(2), 1.0, 3)
    assert pts.shape == (9, 2)
    # ij indexing: x1 is the slow index
    np.testing.assert_array_equal(pts[:3, 0], [-1, -1, -1])
    np.testing.assert_array_equal(pts[:3, 1], [-1, 0, 1])
    np.testing.assert_allclose(v, np.sum(pts ** 2, axis=1))
    np.testing.assert_allclose(vd, -2 * np.sum(pts ** 2, axis=1))


def test_export_grid(tmp_path):
    path = tmp_path / "grid.csv"
    export_grid(quadratic_network(np.eye(2)), decay(2), 1.0, 5, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x1", "x2", "V", "Vdot"]
    assert len(rows) == 26
    corner = [float(c) for c in rows[-1]]
    assert corner == [1.0, 1.0, 2.0, -4.0]


def test_grid_needs_planar_system():
    with pytest.raises(UnsupportedDimension):
        grid_values(quadratic_network(np.eye(3)), decay(3), 1.0, 5)
