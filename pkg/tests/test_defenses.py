import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rldefense.defenses import (
    AE_SPEC,
    AutoencoderDefense,
    DefenseConfigError,
    DefenseStack,
    IdentityDefense,
    NoiseConfig,
    PcaDefense,
    RandomNoiseDefense,
    build_stack,
    fit_autoencoder,
    fit_pca,
    random_noise_apply,
    reconstruction_mse,
)
from rldefense.numerics import init_params

states = arrays(np.float64, 25, elements=st.floats(-3, 3, allow_nan=False))


def low_rank_data(n=600, rank=4, seed=0):
    rng = np.random.default_rng(seed)
    basis = np.linalg.qr(rng.normal(size=(25, rank)))[0].T
    return 0.3 + rng.normal(size=(n, rank)) @ basis * 0.4


class Recorder:
    kind = "recorder"

    def __init__(self, shift):
        self.shift = shift
        self.seen = []

    def apply(self, s):
        self.seen.append(np.array(s))
        return np.asarray(s) + self.shift


# -- random noise -----------------------------------------------------------


@given(arrays(np.float64, 25, elements=st.floats(-1, 1, allow_nan=False)))
def test_zero_eta_is_identity_inside_clip_range(s):
    out = random_noise_apply(NoiseConfig(0.0), s, np.random.default_rng(0))
    assert np.array_equal(out, s)


def test_clamp_saturation():
    s = np.zeros(25)
    s[3], s[7] = 6.0, -9.0
    out = random_noise_apply(NoiseConfig(0.1), s, np.random.default_rng(0))
    assert out[3] == 1.0 and out[7] == -1.0
    out01 = random_noise_apply(NoiseConfig(0.0, 0.0, 1.0), s, np.random.default_rng(0))
    assert out01[7] == 0.0 and out01[3] == 1.0


def test_noise_is_uniform_with_expected_moments():
    eta = 0.2
    rng = np.random.default_rng(1)
    draws = np.array([random_noise_apply(NoiseConfig(eta), np.zeros(25), rng) for _ in range(2000)]).ravel()
    assert np.all(np.abs(draws) <= eta)
    n = draws.size
    # U(-eta, eta): mean 0, variance eta^2 / 3
    assert abs(draws.mean()) < 4 * eta / np.sqrt(3 * n)
    assert draws.var() == pytest.approx(eta**2 / 3, rel=0.02)


def test_noise_on_fixed_interior_coordinate():
    rng = np.random.default_rng(13)
    s = np.full(25, 0.3)
    draws = np.array([random_noise_apply(NoiseConfig(0.1), s, rng)[7] for _ in range(10_000)])
    assert abs(draws.mean() - 0.3) <= 0.005
    assert np.max(np.abs(draws - 0.3)) <= 0.1


def test_noise_reset_reproduces_stream():
    d = RandomNoiseDefense(NoiseConfig(0.1, seed=3))
    d.reset(42)
    a = [d.apply(np.zeros(25)) for _ in range(3)]
    d.reset(42)
    b = [d.apply(np.zeros(25)) for _ in range(3)]
    d.reset(43)
    c = d.apply(np.zeros(25))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[0], c)


def test_noise_config_validation():
    with pytest.raises(DefenseConfigError):
        NoiseConfig(-0.1)
    with pytest.raises(DefenseConfigError):
        NoiseConfig(0.1, 1.0, 1.0)


# -- ensemble ---------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(states)
def test_ensemble_matches_independent_member_mean(s):
    data = low_rank_data()
    ae = init_params(AE_SPEC, np.random.default_rng(2))
    pca = fit_pca(data)
    noise = NoiseConfig(0.1, seed=5)
    stack = build_stack(["random_noise", "autoencoder", "pca"], noise=noise, autoencoder=ae, pca=pca)
    stack.reset(9)
    fused = stack.apply(s)
    # members recomputed separately from fresh copies
    rn = RandomNoiseDefense(noise)
    rn.reset(9)
    outs = np.stack([rn.apply(s), AutoencoderDefense(ae).apply(s), PcaDefense(pca).apply(s)])
    assert np.max(np.abs(fused - outs.mean(axis=0))) <= 1e-12


def test_identity_members_pass_input_through():
    s = np.random.default_rng(2).uniform(-5, 5, 25)
    assert np.array_equal(DefenseStack([IdentityDefense()] * 3).apply(s), s)


class Constant:
    kind = "constant"

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)

    def apply(self, s):
        return self.value.copy()


def test_constant_members_average():
    u, v, w = np.full(25, 3.0), np.arange(25.0) * 3, np.full(25, -6.0)
    out = DefenseStack([Constant(u), Constant(v), Constant(w)]).apply(np.zeros(25))
    # small multiples of three keep every intermediate exact
    assert np.array_equal(out, (u + v + w) / 3)
    rng = np.random.default_rng(3)
    u, v, w = rng.normal(size=(3, 25))
    out = DefenseStack([Constant(u), Constant(v), Constant(w)]).apply(np.zeros(25))
    assert np.max(np.abs(out - (u + v + w) / 3)) <= 1e-15


def test_identical_members_reproduce_member_bit_exactly():
    rng = np.random.default_rng(3)
    pca = fit_pca(low_rank_data())
    for _ in range(50):
        s = rng.uniform(-2, 2, 25)
        single = PcaDefense(pca).apply(s)
        for n in (2, 3, 5):
            assert np.array_equal(DefenseStack([PcaDefense(pca)] * n).apply(s), single)


def test_members_receive_the_same_input_in_order():
    members = [Recorder(1.0), Recorder(2.0), Recorder(-3.0)]
    trace = []
    s = np.arange(25.0)
    out = DefenseStack(members).apply(s, trace=trace)
    assert all(np.array_equal(m.seen[0], s) for m in members)
    assert [float(t[0] - s[0]) for t in trace] == [1.0, 2.0, -3.0]
    assert np.allclose(out, s + 0.0)


@settings(max_examples=100, deadline=None)
@given(states)
def test_fused_residual_bounded_by_mean_member_residual(s):
    ae = init_params(AE_SPEC, np.random.default_rng(4))
    pca = fit_pca(low_rank_data())
    stack = build_stack(["autoencoder", "pca", "identity"], autoencoder=ae, pca=pca)
    trace = []
    fused = stack.apply(s, trace=trace)
    bound = np.mean([np.linalg.norm(o - s) for o in trace])
    assert np.linalg.norm(fused - s) <= bound + 1e-9


def test_stack_validation():
    with pytest.raises(DefenseConfigError):
        DefenseStack([])
    with pytest.raises(DefenseConfigError):
        DefenseStack([IdentityDefense()], fusion="median")
    with pytest.raises(DefenseConfigError):
        build_stack(["autoencoder"])
    with pytest.raises(DefenseConfigError):
        build_stack(["median_filter"])
    assert build_stack(["identity", "random_noise"]).label == "identity+random_noise"


# -- PCA --------------------------------------------------------------------


def test_pca_full_rank_reconstruction_is_identity():
    rng = np.random.default_rng(5)
    data = rng.normal(size=(400, 25)) * np.linspace(0.1, 2.0, 25)
    model = fit_pca(data, variance_target=1.0)
    assert model.k == 25
    probe = rng.uniform(-3, 3, (50, 25))
    assert np.max(np.abs(PcaDefense(model).apply(probe) - probe)) <= 1e-6


@settings(max_examples=100, deadline=None)
@given(states)
def test_pca_projection_is_idempotent(s):
    d = PcaDefense(fit_pca(low_rank_data(), 0.95))
    once = d.apply(s)
    assert np.max(np.abs(d.apply(once) - once)) <= 1e-9


def test_pca_recovers_planted_rank():
    model = fit_pca(low_rank_data(rank=4), 0.95)
    assert model.k <= 4


# -- autoencoder ------------------------------------------------------------


def test_autoencoder_fit_lowers_mse():
    data = low_rank_data(n=512)
    fit = fit_autoencoder(data, epochs=20, seed=1)
    assert fit.final_mse < fit.initial_mse
    assert fit.final_mse == pytest.approx(reconstruction_mse(fit.params, data))
    assert len(fit.epoch_losses) == 20


def test_autoencoder_learns_constant_vector():
    c = np.linspace(-0.5, 0.5, 25)
    fit = fit_autoencoder(np.tile(c, (128, 1)), epochs=150, lr=3e-3, batch_size=32, seed=0)
    out = AutoencoderDefense(fit.params).apply(c)
    assert np.mean((out - c) ** 2) < 1e-4 < fit.initial_mse


def test_zero_autoencoder_outputs_its_bias():
    from rldefense.numerics import zero_params

    params = zero_params(AE_SPEC)
    assert np.array_equal(AutoencoderDefense(params).apply(np.ones(25)), np.zeros(25))
    params.biases[-1][:] = 0.25
    assert np.array_equal(AutoencoderDefense(params).apply(np.ones(25)), np.full(25, 0.25))


def test_autoencoder_zero_epochs_returns_initialization():
    data = low_rank_data(n=128)
    fit = fit_autoencoder(data, epochs=0, seed=7)
    expected = init_params(AE_SPEC, np.random.default_rng(np.random.SeedSequence(7).spawn(2)[0]))
    assert fit.params.allclose(expected, atol=0.0)
    assert fit.initial_mse == fit.final_mse


def test_autoencoder_fit_deterministic():
    data = low_rank_data(n=256)
    a = fit_autoencoder(data, epochs=3, seed=2)
    b = fit_autoencoder(data, epochs=3, seed=2)
    assert all(np.array_equal(x, y) for x, y in zip(a.params.arrays(), b.params.arrays()))


def test_autoencoder_input_validation():
    with pytest.raises(DefenseConfigError):
        fit_autoencoder(np.zeros((100, 24)))
    with pytest.raises(DefenseConfigError):
        fit_autoencoder(np.zeros((10, 25)), batch_size=64)
