import numpy as np
import pytest

from fewtopic import diffcalc as dc
from fewtopic.errors import ConfigError, DimensionError, ParseError
from fewtopic.priornet import PriorNet, encode_corpus, generate_alpha, generate_beta, generate_priors
from fewtopic.store import load_priornet, save_priornet

from conftest import central_difference, relative_error

J, K = 12, 3


def small_net(**kw):
    args = dict(M=5, hidden=8, seed=3)
    args.update(kw)
    return PriorNet(J, K, **args)


@pytest.fixture
def support(rng):
    return rng.poisson(1.5, size=(4, J))


def test_encoder_is_permutation_invariant(support):
    net = small_net()
    r = encode_corpus(support, net).data
    for perm in ([3, 2, 1, 0], [1, 3, 0, 2]):
        np.testing.assert_allclose(encode_corpus(support[perm], net).data, r, atol=1e-9)


def test_encoder_singleton_and_duplicates(support):
    net = small_net()
    one = encode_corpus(support[:1], net).data
    np.testing.assert_allclose(encode_corpus(np.repeat(support[:1], 2, axis=0), net).data, one, atol=1e-12)


def test_alpha_nonnegative_and_rowwise(rng, support):
    net = small_net()
    X = support.copy()
    X[2] = X[0]
    r = encode_corpus(X, net)
    alpha = generate_alpha(X, r, net).data
    assert alpha.shape == (4, K) and (alpha >= 0).all()
    np.testing.assert_array_equal(alpha[0], alpha[2])


def test_alpha_without_representation_ignores_other_documents(support):
    net = small_net(use_representation=False)
    a = generate_alpha(support, None, net).data
    swapped = support.copy()
    swapped[[1, 2]] = swapped[[2, 1]]
    b = generate_alpha(swapped, None, net).data
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[3], b[3])


def test_beta_pooling_properties(support):
    net = small_net()
    r = encode_corpus(support, net)
    zero = generate_beta(support, np.zeros((4, K)), r, net).data
    assert zero.shape == (K, J) and (zero >= 0).all()
    alpha = generate_alpha(support, r, net)
    doubled = generate_beta(np.vstack([support, support]), np.vstack([alpha.data, alpha.data]) / 2, r, net).data
    np.testing.assert_allclose(doubled, generate_beta(support, alpha, r, net).data, rtol=1e-12)


@pytest.mark.parametrize("N", [1, 3, 10])
def test_prior_shapes_for_any_support_size(rng, N):
    for net in (small_net(), small_net(use_representation=False), small_net(prior_mode="dir")):
        priors = generate_priors(rng.poisson(1.0, size=(N, J)), net)
        assert priors.alpha.shape == (N, K) and priors.beta.shape == (K, J)
        assert (priors.alpha.data >= 0).all() and (priors.beta.data >= 0).all()


def test_dir_mode_broadcasts_alpha(support):
    alpha = generate_priors(support, small_net(prior_mode="dir")).alpha.data
    np.testing.assert_array_equal(alpha, np.repeat(alpha[:1], 4, axis=0))


def test_zero_width_representation_matches_nn_variant(support):
    full = generate_priors(support, small_net(M=0))
    nn = generate_priors(support, small_net(M=0, use_representation=False))
    np.testing.assert_array_equal(full.alpha.data, nn.alpha.data)
    np.testing.assert_array_equal(full.beta.data, nn.beta.data)


def test_unknown_prior_mode():
    with pytest.raises(ConfigError):
        small_net(prior_mode="maml")


def test_wrong_vocabulary_size(rng):
    with pytest.raises(DimensionError):
        generate_priors(rng.poisson(1.0, size=(2, J + 1)), small_net())


@pytest.mark.parametrize("kw", [{}, {"use_representation": False}, {"prior_mode": "dir"}, {"log_features": True}])
def test_parameter_gradients_match_finite_differences(rng, support, kw):
    net = small_net(**kw)
    weights = rng.normal(size=(1, K))
    wbeta = rng.normal(size=(K, J))

    def loss():
        pri = generate_priors(support, net)
        return (dc.log(pri.alpha + 1.0) * weights).sum() + (dc.log(pri.beta + 1.0) * wbeta).sum()

    params = net.parameters()
    analytic = dc.grad(loss(), params)
    numeric = central_difference(lambda: loss().item(), [p.data for p in params])
    for p, a, n in zip(params, analytic, numeric):
        assert relative_error(a, n) <= 1e-4, p.name


def test_dropout_only_in_training(rng, support):
    net = small_net(dropout=0.5)
    a = generate_priors(support, net, training=False).alpha.data
    b = generate_priors(support, net, training=False).alpha.data
    np.testing.assert_array_equal(a, b)
    c = generate_priors(support, net, training=True, rng=np.random.default_rng(0)).alpha.data
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("kw", [{}, {"use_representation": False}, {"prior_mode": "dir"}])
def test_serialization_roundtrip(tmp_path, support, kw):
    net = small_net(**kw)
    save_priornet(tmp_path / "m.bin", net)
    back = load_priornet(tmp_path / "m.bin")
    assert back.declared_shapes() == net.declared_shapes()
    for name in net.params:
        np.testing.assert_array_equal(back.params[name].data, net.params[name].data)
    np.testing.assert_array_equal(generate_priors(support, back).beta.data, generate_priors(support, net).beta.data)


def test_serialized_layout_is_little_endian_row_major(tmp_path):
    net = small_net(prior_mode="dir")
    save_priornet(tmp_path / "m.bin", net)
    blob = (tmp_path / "m.bin").read_bytes()
    header, payload = blob.split(b"end\n", 1)
    assert header.startswith(b"FEWTOPIC-PRIORNET 1\n")
    assert b"tensor dir.a 1 3\n" in header and b"tensor dir.b 3 12\n" in header
    a = np.frombuffer(payload[: 3 * 8], dtype="<f8")
    np.testing.assert_array_equal(a, net.params["dir.a"].data.ravel())


def test_corrupt_model_rejected(tmp_path):
    net = small_net()
    save_priornet(tmp_path / "m.bin", net)
    blob = (tmp_path / "m.bin").read_bytes()
    (tmp_path / "short.bin").write_bytes(blob[:-8])
    with pytest.raises(ParseError):
        load_priornet(tmp_path / "short.bin")
    (tmp_path / "bad.bin").write_bytes(blob.replace(b"hidden 8", b"hidden 9"))
    with pytest.raises(ParseError):
        load_priornet(tmp_path / "bad.bin")
    (tmp_path / "junk.bin").write_bytes(b"hello\n")
    with pytest.raises(ParseError):
        load_priornet(tmp_path / "junk.bin")
