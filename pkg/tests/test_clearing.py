import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import appb_p02, appb_p10, make_cycle, random_net
from netval import (
    build_network,
    delta_matrix,
    delta_vector,
    greatest_clearing,
    greatest_clearing_batch,
    psi_star,
)

ALPHAS = [1.0, 0.5]


@pytest.mark.parametrize("alpha", ALPHAS)
def test_cycle_payment_vectors(alpha):
    net = make_cycle(alpha)
    assert np.allclose(greatest_clearing(net, [0.0, 2.0]).p, appb_p02(alpha, alpha), atol=1e-12)
    assert np.allclose(greatest_clearing(net, [1.0, 0.0]).p, appb_p10(alpha, alpha), atol=1e-12)
    assert np.allclose(greatest_clearing(net, [1.0, 2.0]).p, [2.0, 3.0], atol=1e-12)
    assert np.allclose(greatest_clearing(net, [0.0, 0.0]).p, [0.0, 0.0], atol=1e-12)


def test_two_bank_clearing(two_bank):
    res = greatest_clearing(two_bank, [3.0, 4.0])
    assert np.allclose(res.V, [-4.0, 2.2], atol=1e-12)
    assert np.allclose(res.p, [6.0, 6.0], atol=1e-12)
    assert np.allclose(res.E, [0.0, 2.2], atol=1e-12)
    assert list(res.z) == [1, 0]
    assert res.iterations <= two_bank.n + 1


@pytest.mark.parametrize("alpha", ALPHAS)
def test_zero_endowment_wipes_out(alpha):
    net = make_cycle(alpha)
    res = greatest_clearing(net, [0.0, 0.0])
    assert np.allclose(res.V, -net.p_bar, atol=1e-12)
    assert np.allclose(res.p, 0.0, atol=1e-12)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_rich_endowment_all_solvent(alpha):
    net = make_cycle(alpha)
    x = net.p_bar + 1.0
    res = greatest_clearing(net, x)
    assert not res.z.any()
    assert np.allclose(res.p, net.p_bar)
    assert np.allclose(res.V, x + net.interbank_assets() - net.p_bar, atol=1e-12)


def test_clearing_result_consistency(two_bank):
    res = greatest_clearing(two_bank, [3.0, 4.0])
    assert np.allclose(res.p, two_bank.p_bar + np.minimum(res.V, 0.0))
    assert np.allclose(res.E, np.maximum(res.V, 0.0))
    assert np.isclose(res.societal_payment, float(res.p @ two_bank.pi_soc))


def test_psi_star_fixed_point(cycle_half, two_bank):
    for net, x in ((cycle_half, [0.7, 1.3]), (two_bank, [3.0, 4.0])):
        res = greatest_clearing(net, x)
        assert np.allclose(psi_star(net, x, res.V), res.V, atol=1e-10)


def test_psi_star_monotone_in_V(cycle_half):
    rng = np.random.default_rng(3)
    x = np.array([0.5, 1.5])
    for _ in range(50):
        V = rng.uniform(-3.0, 3.0, 2)
        W = V + rng.uniform(0.0, 2.0, 2)
        assert np.all(
            psi_star(cycle_half, x, W) >= psi_star(cycle_half, x, V) - 1e-12
        )


@pytest.mark.parametrize("alpha", ALPHAS)
def test_delta_endpoints(alpha):
    net = make_cycle(alpha)
    n = net.n
    assert np.allclose(delta_matrix(net, np.zeros(n)), np.eye(n))
    assert np.allclose(
        delta_vector(net, np.zeros(n)), net.p_bar - net.Pi.T @ net.p_bar
    )
    assert np.allclose(delta_vector(net, np.ones(n)), net.p_bar)
    expected = net.alpha_x * np.linalg.inv(np.eye(n) - net.alpha_L * net.Pi.T)
    assert np.allclose(delta_matrix(net, np.ones(n)), expected)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_linear_representation(alpha):
    net = make_cycle(alpha)
    rng = np.random.default_rng(11)
    for _ in range(100):
        x = rng.uniform(0.0, 3.0, 2)
        res = greatest_clearing(net, x)
        z = res.z.astype(float)
        V = delta_matrix(net, z) @ x - delta_vector(net, z)
        assert np.allclose(V, res.V, atol=1e-10)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_batch_matches_scalar(alpha):
    rng = np.random.default_rng(5)
    net = random_net(rng, n=4, alpha=alpha)
    X = rng.uniform(0.0, 4.0, (60, 4))
    V, p, E, Z = greatest_clearing_batch(net, X)
    for k in range(X.shape[0]):
        res = greatest_clearing(net, X[k])
        assert np.allclose(V[k], res.V, atol=1e-10)
        assert np.allclose(p[k], res.p, atol=1e-10)
        assert np.allclose(E[k], res.E, atol=1e-10)
        assert np.array_equal(Z[k], res.z)


@given(seed=st.integers(0, 2**32 - 1), alpha=st.sampled_from(ALPHAS))
def test_monotonicity_in_endowments(seed, alpha):
    rng = np.random.default_rng(seed)
    net = random_net(rng, alpha=alpha)
    x = rng.uniform(0.0, 3.0, net.n)
    y = x + rng.uniform(0.0, 2.0, net.n)
    lo, hi = greatest_clearing(net, x), greatest_clearing(net, y)
    assert np.all(hi.V >= lo.V - 1e-10)
    assert np.all(hi.p >= lo.p - 1e-10)
    assert np.all(hi.E >= lo.E - 1e-10)


@given(seed=st.integers(0, 2**32 - 1))
def test_concavity_full_recovery(seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng, alpha=1.0)
    x = rng.uniform(0.0, 3.0, net.n)
    y = rng.uniform(0.0, 3.0, net.n)
    mid = greatest_clearing(net, (x + y) / 2.0)
    px = greatest_clearing(net, x).p
    py = greatest_clearing(net, y).p
    assert np.all(mid.p >= (px + py) / 2.0 - 1e-10)


@given(seed=st.integers(0, 2**32 - 1))
def test_submodularity_full_recovery(seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng, alpha=1.0)
    x = rng.uniform(0.0, 3.0, net.n)
    y = rng.uniform(0.0, 3.0, net.n)
    p = lambda v: greatest_clearing(net, v).p
    lhs = p(x) + p(y)
    rhs = p(np.minimum(x, y)) + p(np.maximum(x, y))
    assert np.all(lhs >= rhs - 1e-10)


@given(seed=st.integers(0, 2**32 - 1))
def test_conservation_full_recovery(seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng, alpha=1.0)
    x = rng.uniform(0.0, 3.0, net.n)
    res = greatest_clearing(net, x)
    assert abs(res.E.sum() + res.societal_payment - x.sum()) < 1e-10


@given(seed=st.integers(0, 2**32 - 1), alpha=st.sampled_from(ALPHAS))
@settings(max_examples=40)
def test_iteration_budget(seed, alpha):
    rng = np.random.default_rng(seed)
    net = random_net(rng, alpha=alpha)
    x = rng.uniform(0.0, 2.0, net.n)
    res = greatest_clearing(net, x)
    assert res.iterations <= net.n + 1
    flagged = res.V < -1e-12
    assert np.array_equal(res.z.astype(bool), flagged)


def test_cross_ownership_consistency():
    net = build_network(
        [[0.0, 1.0, 1.0], [1.0, 0.0, 2.0]], 1.0, 1.0, Gamma=[[0.0, 0.2], [0.3, 0.0]]
    )
    rng = np.random.default_rng(9)
    for _ in range(60):
        x = rng.uniform(0.0, 3.0, 2)
        res = greatest_clearing(net, x)
        z = res.z.astype(float)
        V = delta_matrix(net, z) @ x - delta_vector(net, z)
        assert np.allclose(V, res.V, atol=1e-10)
        assert np.all(res.V[res.z == 1] < 1e-12)
        assert np.all(res.V[res.z == 0] >= -1e-12)


def test_cross_ownership_shares_equity():
    plain = build_network([[0.0, 1.0, 1.0], [1.0, 0.0, 2.0]], 1.0, 1.0)
    cross = build_network(
        [[0.0, 1.0, 1.0], [1.0, 0.0, 2.0]], 1.0, 1.0, Gamma=[[0.0, 0.4], [0.0, 0.0]]
    )
    x = np.array([3.0, 0.4])
    a = greatest_clearing(plain, x)
    b = greatest_clearing(cross, x)
    # bank 2 holds 40% of solvent bank 1's equity, so its wealth rises
    assert a.z[0] == 0 and b.V[1] > a.V[1]
