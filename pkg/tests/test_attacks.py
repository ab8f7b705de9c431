import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rldefense.agent import QNetwork, greedy_action
from rldefense.attacks import FgsmConfig, attack_gradient, attack_success_probe, fgsm_perturb
from rldefense.numerics import MlpParams, MlpSpec

NET = QNetwork.initialize(np.random.default_rng(0))
states = arrays(np.float64, 25, elements=st.floats(-1, 1, allow_nan=False))


def linear_net(rng):
    w = rng.normal(size=(5, 25))
    b = rng.normal(size=5)
    return QNetwork(MlpParams(MlpSpec((25, 5)), [w], [b])), w, b


def softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


@settings(max_examples=200, deadline=None)
@given(states, st.sampled_from([0.0, 0.01, 0.05, 0.2]), st.sampled_from(["cross_entropy", "neg_q"]))
def test_perturbation_is_a_signed_step(s, eps, loss):
    adv = fgsm_perturb(NET, s, FgsmConfig(eps, loss))
    assert_signed_step(s, adv, eps)


def assert_signed_step(s, adv, eps):
    """``adv`` must be exactly ``s + eps * sigma`` for some sigma in {-1, 0, 1}^25.

    Subtracting back (adv - s) can round by an ulp, so the step pattern is
    recovered first and the forward sum compared bit for bit.
    """
    if eps == 0.0:
        assert np.array_equal(adv, s)
        return
    sigma = np.round((adv - s) / eps)
    assert np.all(np.isin(sigma, [-1.0, 0.0, 1.0]))
    assert np.array_equal(adv, s + eps * sigma)
    assert np.max(np.abs(adv - s)) <= eps * (1 + 1e-12) + np.finfo(float).eps * np.max(np.abs(s))


def test_zero_epsilon_is_identity_copy():
    s = np.linspace(-1, 1, 25)
    adv = fgsm_perturb(NET, s, FgsmConfig(0.0))
    assert np.array_equal(adv, s) and adv is not s


def test_no_clipping():
    s = np.ones(25)
    adv = fgsm_perturb(NET, s, FgsmConfig(0.5))
    assert np.max(adv) > 1.0 or np.min(adv) < 1.0
    assert np.max(np.abs(adv - s)) == 0.5


def test_matrix_state_keeps_shape():
    s = np.random.default_rng(1).uniform(-1, 1, (5, 5))
    adv = fgsm_perturb(NET, s, FgsmConfig(0.1))
    assert adv.shape == (5, 5)
    assert np.array_equal(adv.reshape(-1), fgsm_perturb(NET, s.reshape(-1), FgsmConfig(0.1)))


def test_wrong_size_rejected():
    with pytest.raises(ValueError):
        fgsm_perturb(NET, np.zeros(24), FgsmConfig(0.1))
    with pytest.raises(ValueError):
        FgsmConfig(-0.1)
    with pytest.raises(ValueError):
        FgsmConfig(0.1, loss="hinge")


def test_linear_policy_gradients_match_closed_form():
    rng = np.random.default_rng(4)
    for _ in range(20):
        q, w, b = linear_net(rng)
        s = rng.uniform(-1, 1, 25)
        a = int(np.argmax(w @ s + b))
        # neg_q: J = -(W s + b)_a  ->  grad = -W[a]
        assert np.allclose(attack_gradient(q, s, "neg_q"), -w[a], atol=1e-12)
        # cross-entropy at label a: grad = W^T (softmax(Ws+b) - e_a)
        p = softmax(w @ s + b)
        onehot = np.eye(5)[a]
        assert np.allclose(attack_gradient(q, s, "cross_entropy"), w.T @ (p - onehot), atol=1e-12)
        adv = fgsm_perturb(q, s, FgsmConfig(0.1, "neg_q"))
        assert np.array_equal(adv, s - 0.1 * np.sign(w[a]))


def test_attack_does_not_raise_greedy_probability():
    rng = np.random.default_rng(5)
    cfg = FgsmConfig(1e-3)
    kept_down = 0
    n = 1000
    for _ in range(n):
        s = rng.uniform(-1, 1, 25)
        a = greedy_action(NET, s)
        before = softmax(NET.q_values(s))[a]
        after = softmax(NET.q_values(fgsm_perturb(NET, s, cfg)))[a]
        kept_down += after <= before
    assert kept_down / n >= 0.95


def test_flip_rate_grows_with_epsilon():
    rng = np.random.default_rng(6)
    batch = rng.uniform(-1, 1, (1000, 25))
    rates = {eps: np.mean([attack_success_probe(NET, s, FgsmConfig(eps)) for s in batch]) for eps in (0.0, 0.01, 0.2, 10.0)}
    assert rates[0.0] == 0.0
    assert rates[0.2] >= rates[0.01]
    assert rates[10.0] > 0


def test_perturbation_is_deterministic():
    s = np.random.default_rng(8).uniform(-1, 1, 25)
    assert np.array_equal(fgsm_perturb(NET, s, FgsmConfig(0.1)), fgsm_perturb(NET, s, FgsmConfig(0.1)))


def test_nonfinite_gradient_is_an_attack_error():
    from rldefense.attacks import AttackError

    bad = NET.copy()
    bad.params.weights[0][0, 0] = np.inf
    with pytest.raises(AttackError):
        fgsm_perturb(bad, np.ones(25), FgsmConfig(0.1))


def test_interval_schedule():
    every = FgsmConfig(0.1)
    sparse = FgsmConfig(0.1, apply_every_step=False, interval=3)
    assert all(every.attacks_step(t) for t in range(10))
    assert [t for t in range(10) if sparse.attacks_step(t)] == [0, 3, 6, 9]
