import csv

import numpy as np
import pytest

from lyapnet.loss import LossConfig
from lyapnet.net import Layer, LyapunovNetwork, init_network
from lyapnet.sampler import SamplingDomain, rng_streams
from lyapnet.systems import BUILTINS, DynamicalSystem
from lyapnet.trainer import (
    CERTIFICATE_FOUND,
    NO_CERTIFICATE,
    TRACE_HEADER,
    NumericalAbort,
    TrainConfig,
    export_trace,
    train,
)

PENDULUM = BUILTINS["s2_pendulum"]
DOMAIN = SamplingDomain(2, 1.0, 0.02, inner_radius=0.1)


def fresh(seed=0, dim=2):
    return init_network(dim, "tanh3", seed=seed, rng=rng_streams(seed)["init"])


def test_zero_learning_rate_freezes_everything():
    net = fresh()
    theta = net.get_params()
    rep = train(PENDULUM, net, DOMAIN, LossConfig(), TrainConfig(learning_rate=0.0, max_steps=300), 0)
    assert net.get_params().tobytes() == theta.tobytes()
    losses = {r.breakdown.total for r in rep.trace}
    assert len(losses) == 1
    assert [r.step for r in rep.trace] == [0, 100, 200, 300]


def test_training_is_deterministic():
    cfg = TrainConfig(max_steps=500)
    a_net, b_net = fresh(4), fresh(4)
    a = train(PENDULUM, a_net, DOMAIN, LossConfig(), cfg, 4)
    b = train(PENDULUM, b_net, DOMAIN, LossConfig(), cfg, 4)
    assert a_net.get_params().tobytes() == b_net.get_params().tobytes()
    assert a.trace == b.trace


def test_different_seeds_differ():
    cfg = TrainConfig(max_steps=200)
    a_net, b_net = fresh(0), fresh(0)
    train(PENDULUM, a_net, DOMAIN, LossConfig(), cfg, 0)
    train(PENDULUM, b_net, DOMAIN, LossConfig(), cfg, 1)
    assert not np.array_equal(a_net.get_params(), b_net.get_params())


def test_one_parameter_descent_reaches_zero_loss():
    # V = w * x^2 on f = -x: loss is zero once w * x^2 > m1 and -2 w x^2 < -m2 on the domain
    net = LyapunovNetwork(
        [Layer(np.array([[1.0]]), np.zeros(1), "poly2"), Layer(np.array([[0.01]]), np.zeros(1), "linear")]
    )
    sys_ = DynamicalSystem.from_text("decay", ["-x1"])
    dom = SamplingDomain(1, 1.0, 0.001, inner_radius=0.1)
    cfg = TrainConfig(learning_rate=0.5, max_steps=20000, loss_tol=1e-12, patience_windows=3)
    rep = train(sys_, net, dom, LossConfig(0.05, 0.05, "state_scaled"), cfg, 0)
    assert rep.final_loss == 0.0
    assert rep.converged and rep.verdict == CERTIFICATE_FOUND
    assert net.layers[1].weight[0, 0] > 0.05
    losses = [r.breakdown.total for r in rep.trace]
    assert losses[0] > 0


def test_certificate_requires_verification():
    # V = 4 x^2 already satisfies the margins: converges at once, then verifies
    sys_ = DynamicalSystem.from_text("decay", ["-x1"])
    net = LyapunovNetwork([Layer(np.array([[2.0]]), np.array([0.0]), "poly2"),
                           Layer(np.array([[1.0]]), np.array([0.0]), "linear")])
    dom = SamplingDomain(1, 1.0, 0.001, inner_radius=0.5)
    cfg = TrainConfig(learning_rate=0.0, max_steps=100, loss_tol=1e-9, patience_windows=1)
    rep = train(sys_, net, dom, LossConfig(0.05, 0.05), cfg, 0)
    assert rep.converged and rep.verification is not None and rep.verdict == CERTIFICATE_FOUND

    # same network on the growing system: loss stays positive, verification never runs
    grow = DynamicalSystem.from_text("grow", ["x1"])
    rep = train(grow, net, dom, LossConfig(0.05, 0.05), cfg, 0)
    assert not rep.converged and rep.verification is None and rep.verdict == NO_CERTIFICATE


def test_converged_but_verification_fails():
    # an absurd tolerance forces convergence; the strict check must still reject
    sys_ = DynamicalSystem.from_text("grow", ["x1"])
    net = LyapunovNetwork([Layer(np.array([[1.0]]), np.array([0.0]), "poly2"),
                           Layer(np.array([[1.0]]), np.array([0.0]), "linear")])
    dom = SamplingDomain(1, 1.0, 0.001, inner_radius=0.1)
    cfg = TrainConfig(learning_rate=0.0, max_steps=100, loss_tol=1e9, patience_windows=1)
    rep = train(sys_, net, dom, LossConfig(0.05, 0.05), cfg, 0)
    assert rep.converged
    assert not rep.verification.passed
    assert rep.verdict == NO_CERTIFICATE


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        train(PENDULUM, fresh(dim=3), DOMAIN, LossConfig(), TrainConfig(max_steps=1), 0)


def test_numerical_abort_reports_step():
    net = LyapunovNetwork([Layer(np.full((2, 2), 1e150), np.zeros(2), "poly3"),
                           Layer(np.ones((1, 2)), np.zeros(1), "linear")])
    with pytest.raises(NumericalAbort) as info:
        train(PENDULUM, net, DOMAIN, LossConfig(), TrainConfig(max_steps=10), 0)
    assert info.value.step == 0
    assert len(info.value.sample) == 2
    assert "step 0" in str(info.value)


@pytest.mark.parametrize("max_steps, eval_every, rows", [(250, 100, 4), (300, 100, 4), (50, 100, 2), (7, 1, 8)])
def test_export_trace_rows(tmp_path, max_steps, eval_every, rows):
    rep = train(PENDULUM, fresh(), DOMAIN, LossConfig(),
                TrainConfig(max_steps=max_steps, eval_every=eval_every), 0)
    path = tmp_path / "trace.csv"
    export_trace(rep, path)
    with open(path) as fh:
        data = list(csv.reader(fh))
    assert data[0] == TRACE_HEADER
    assert len(data) == rows + 1
    assert int(data[-1][0]) == max_steps
    for line in data[1:]:
        assert all(np.isfinite(float(c)) for c in line)


def test_summary_mentions_caveat():
    rep = train(PENDULUM, fresh(), DOMAIN, LossConfig(), TrainConfig(max_steps=10), 0)
    assert "not that instability was proven" in rep.summary()


def test_bad_train_config():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)
