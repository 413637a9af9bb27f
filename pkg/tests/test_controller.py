import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mannctl.controller import (ControllerConfig, LoopLayout, build_controller, closed_loop_field, control,
                                q_mu, robust_term, theorem_gains)
from mannctl.memory import MemoryState
from mannctl.metrics import scalar_plant
from mannctl.nn import NnGains, TwoLayerNet, hidden
from mannctl.numerics import lyapunov_residual
from mannctl.scenario import b747_plant, get_scenario, init_weights


def test_build_b747():
    p = b747_plant()
    c = build_controller(p, ControllerConfig())
    assert np.all(np.linalg.eigvals(c.A_ref).real < 0)
    assert lyapunov_residual(c.A_ref, c.P, np.eye(3)) <= 1e-10 * math.sqrt(3)
    assert np.all(np.linalg.eigvalsh(c.P) > 0) and np.all(np.linalg.eigvalsh(c.P_tilde) > 0)


def test_build_scalar():
    p = scalar_plant(0.0, 1.0)
    c = build_controller(p, ControllerConfig())
    assert c.K_lqr[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert c.A_ref[0, 0] == pytest.approx(-1.0, abs=1e-12)
    assert c.P[0, 0] == pytest.approx(0.5, abs=1e-12)
    c2 = build_controller(p, ControllerConfig(lyapunov_rhs_factor=2))
    assert c2.P[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_q_mu_cases():
    assert np.array_equal(q_mu(np.zeros(3), np.eye(3), np.ones((3, 1))), [0.0])
    assert q_mu([1.0, 2.0, 3.0], np.eye(3), np.array([[0.0], [0.0], [1.0]]))[0] == 3.0
    c = build_controller(b747_plant(), ControllerConfig())
    e = np.array([0.3, -0.1, 0.7])
    B = b747_plant().B
    ref = sum(e[i] * c.P[i, k] * B[k, 0] for i in range(3) for k in range(3))
    assert q_mu(e, c.P, B)[0] == pytest.approx(ref, abs=1e-15)


def test_robust_term_cases():
    net = TwoLayerNet(np.array([[1.0]]), np.array([[2.0]]), [0.0], [0.0])
    assert robust_term(net, 3.0, [0.3, 0.4], 1.0)[0] == pytest.approx(-3.0)
    assert robust_term(net, 3.0, [0.3, 0.4], 0.0)[0] == 0.0
    assert robust_term(net, 3.0, [0.0, 0.0], 1.0)[0] == 0.0
    net2 = TwoLayerNet(np.ones((1, 2)), np.ones((1, 1)), np.zeros(2), np.zeros(1))
    assert robust_term(net2, 1.0, [1.0], 1.0).shape == (2,)


def test_control_pure_lqr():
    cfg = ControllerConfig(memory_enabled=False)
    c = build_controller(b747_plant(), cfg)
    net, mu = init_weights((3, 4, 1, 1), 0)
    x = np.array([0.01, -0.02, 0.03])
    u, d = control(c, cfg, net, MemoryState(mu), x, np.zeros(3))
    assert u[0] == pytest.approx(-(c.K_lqr @ x)[0], abs=1e-16)
    assert not np.any(d["M_r"])


def test_control_sum_of_parts():
    rng = np.random.default_rng(0)
    cfg = ControllerConfig(k_z=0.5)
    p = b747_plant()
    c = build_controller(p, cfg)
    net = TwoLayerNet(rng.normal(size=(4, 1)), rng.normal(size=(3, 4)), rng.normal(size=1), rng.normal(size=4))
    mu = rng.uniform(size=(4, 2))
    x, xr = rng.normal(size=3) * 0.1, rng.normal(size=3) * 0.1
    u, d = control(c, cfg.with_(n_s=2), net, MemoryState(mu), x, xr, p.B)
    h = hidden(net, x)
    logits = mu.T @ h
    z = np.exp(logits - logits.max()) / np.exp(logits - logits.max()).sum()
    Mr = mu @ z
    e = x - xr
    ubl = -(c.K_lqr @ x)
    uad = -(net.W.T @ (h + Mr)) - net.bw
    v = -0.5 * (np.linalg.norm(net.W) + np.linalg.norm(net.V) + 1.0) * np.linalg.norm(e)
    assert u[0] == pytest.approx((ubl + uad + v)[0], abs=1e-14)
    assert d["q_mu"][0] == pytest.approx(float(e @ c.P @ p.B[:, 0]), abs=1e-15)


def test_zero_error_freezes_learning():
    cfg = ControllerConfig()
    sc = get_scenario("b747-ex2")
    c = build_controller(sc.plant, cfg)
    lay = LoopLayout(3, 4, 1, 1)
    net, mu = init_weights((3, 4, 1, 1), 1)
    x = np.array([0.01, 0.02, -0.01])
    dy = closed_loop_field(sc.plant, c, cfg, sc).fn(1.0, lay.pack(x, x, net, mu))
    o = lay.offsets()
    assert not np.any(dy[o[2]:o[6]])


@given(arrays(np.float64, 3 + 3 + 4 + 12 + 1 + 4 + 8, elements=st.floats(-10, 10, allow_nan=False)))
def test_pack_round_trip(y):
    lay = LoopLayout(3, 4, 1, 2)
    x, xr, net, mu = lay.unpack(y)
    assert np.array_equal(lay.pack(x, xr, net, mu), y)


def test_layout_rejects_wrong_size():
    with pytest.raises(ValueError):
        LoopLayout(3, 4, 1, 1).unpack(np.zeros(5))


def test_config_validation():
    with pytest.raises(ValueError):
        ControllerConfig(K_v=0.0)
    with pytest.raises(ValueError):
        ControllerConfig(lyapunov_rhs_factor=3)
    with pytest.raises(ValueError):
        ControllerConfig(k_z=-1.0)
    with pytest.raises(ValueError):
        ControllerConfig(n_s=0)


def test_theorem_gains():
    g = theorem_gains(16.0)
    assert (g.gamma_w, g.gamma_v, g.kappa) == (16.0, 16.0, pytest.approx(8.0))
    assert isinstance(g, NnGains)
