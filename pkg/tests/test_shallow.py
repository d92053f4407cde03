import numpy as np
import pytest

import oracles
from ctxhar.context import load_step_priors
from ctxhar.segments import SegmentTable
from ctxhar.shallow import (
    ForestModel,
    decode_step,
    encode_batch,
    encode_features,
    fit_head,
    hmm_decode,
    hmm_fit,
    hmm_path_log_prob,
    load_head,
    qda_fit,
    qda_predict,
    rf_fit,
    rf_predict,
    save_head,
)
from ctxhar.shallow._kernels import get_kernels
from ctxhar.shallow.forest import rf_votes
from ctxhar.shallow.hmm import HmmModel, count_transitions, viterbi
from ctxhar.shallow.qda import GaussianClassModel, GaussianObservations
from ctxhar.simgen import default_scenario, generate

try:
    get_kernels("cython")
    HAVE_EXT = True
except ImportError:
    HAVE_EXT = False


def _two_blobs(n=100, seed=0, sep=3.0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(-sep, 1, (n, 2)), rng.normal(sep, 1, (n, 2))])
    y = np.repeat([0, 1], n)
    return X, y


# --- QDA ---------------------------------------------------------------

def test_qda_means():
    X = np.array([[-1.0], [-1.2], [-0.8], [1.0], [1.2], [0.8]])
    m = qda_fit(X, [0, 0, 0, 1, 1, 1])
    np.testing.assert_allclose(m.obs.means[:, 0], [-1.0, 1.0], atol=1e-12)
    for c in range(2):
        assert np.linalg.eigvalsh(m.obs.covs[c]).min() > 0


def test_qda_single_step_prior_identity():
    X, y = _two_blobs()
    y = np.where(np.arange(len(y)) < 150, 0, 1)
    m = qda_fit(X, y, steps=np.zeros(len(y), int), n_steps=3)
    np.testing.assert_allclose(m.step_priors[0], m.priors, atol=1e-15)
    np.testing.assert_allclose(m.step_priors[1], [0.5, 0.5])
    np.testing.assert_allclose(m.step_priors.sum(axis=1), 1.0, atol=1e-9)


def test_qda_known_gaussians_train_accuracy():
    X, y = _two_blobs(seed=1)
    m = qda_fit(X, y)
    pred, post = qda_predict(m, X)
    assert np.mean(pred == y) >= 0.95
    np.testing.assert_allclose(np.exp(post).sum(axis=1), 1.0, atol=1e-9)


def test_qda_loglik_matches_oracle():
    X, y = _two_blobs(seed=2)
    m = qda_fit(X, y)
    ll = m.obs.log_likelihood(X[:5])
    for i in range(5):
        for c in range(2):
            expect = oracles.gaussian_logpdf(X[i], m.obs.means[c], m.obs.covs[c])
            assert ll[i, c] == pytest.approx(expect, abs=1e-10)


def _symmetric_model(step_priors=None):
    obs = GaussianObservations(np.array([[-1.0], [1.0]]), np.ones((2, 1, 1)))
    return GaussianClassModel(obs, np.array([0.5, 0.5]), step_priors)


def test_qda_midpoint_tie_and_prior_decides():
    m = _symmetric_model(np.array([[0.5, 0.5], [0.9, 0.1], [0.1, 0.9]]))
    assert qda_predict(m, np.array([0.0]))[0] == 0
    assert qda_predict(m, np.array([0.0]), 1)[0] == 0
    assert qda_predict(m, np.array([0.0]), 2)[0] == 1


def test_qda_prior_only_limit_on_default_table():
    table = load_step_priors()
    k = 6
    obs = GaussianObservations(np.zeros((7, k)), np.tile(np.eye(k), (7, 1, 1)))
    m = GaussianClassModel(obs, np.full(7, 1 / 7)).with_step_priors(table.probs)
    x = np.full((5, k), 0.3)
    pred, _ = qda_predict(m, x, np.arange(5))
    np.testing.assert_array_equal(pred, np.argmax(table.probs, axis=1))
    assert table.class_names[qda_predict(m, x[0], 2)[0]] == "Cart"


def test_qda_errors():
    m = _symmetric_model(np.array([[0.5, 0.5]]))
    with pytest.raises(ValueError, match="unknown step"):
        qda_predict(m, np.array([0.0]), 4)
    with pytest.raises(ValueError, match="class 1"):
        qda_fit(np.array([[0.0], [1.0], [2.0]]), [0, 0, 1])


# --- HMM ---------------------------------------------------------------

def test_hmm_transition_counts():
    counts = count_transitions([([0, 0, 1, 1], [0, 0, 0, 0])], 2, 1, use_steps=False)
    np.testing.assert_array_equal(counts[0], [[1, 1], [0, 1]])


def _seq(classes, steps, seed=0):
    rng = np.random.default_rng(seed)
    classes = np.asarray(classes)
    X = rng.normal(classes[:, None] * 2.0, 0.5, (len(classes), 2))
    return X, classes, np.asarray(steps)


def test_hmm_single_step_equals_pooled():
    rng = np.random.default_rng(0)
    c = rng.integers(0, 3, 300)
    seqs = [_seq(c, np.zeros(300, int))]
    per_step = hmm_fit(seqs, use_steps=True, n_steps=2)
    pooled = hmm_fit(seqs, use_steps=False)
    np.testing.assert_allclose(per_step.transitions[0], pooled.transitions[0], atol=1e-15)
    np.testing.assert_allclose(per_step.transitions[1], 1 / 3, atol=1e-15)
    np.testing.assert_allclose(per_step.transitions.sum(axis=2), 1.0, atol=1e-9)


def test_hmm_recovers_known_chain():
    rng = np.random.default_rng(3)
    truth = np.array([
        [[0.8, 0.1, 0.1], [0.2, 0.7, 0.1], [0.3, 0.3, 0.4]],
        [[0.1, 0.1, 0.8], [0.5, 0.5, 0.0], [0.0, 0.2, 0.8]],
    ])
    n = 20_001
    steps = (np.arange(n) // 50) % 2
    c = np.zeros(n, dtype=int)
    for t in range(1, n):
        c[t] = rng.choice(3, p=truth[steps[t], c[t - 1]])
    m = hmm_fit([_seq(c, steps)], use_steps=True)
    np.testing.assert_allclose(m.transitions, truth, atol=0.05)


def test_hmm_length_one_equals_qda():
    X, c, s = _seq(np.repeat([0, 1, 2], 20), np.zeros(60, int))
    m = hmm_fit([(X, c, s)], use_steps=False)
    x = np.array([[1.1, 0.9]])
    expect = np.argmax(np.log(m.initial) + m.obs.log_likelihood(x)[0])
    assert hmm_decode(m, x)[0] == expect


def _random_problem(rng, n, c):
    log_init = np.log(rng.dirichlet(np.ones(c)))
    log_trans = np.log(rng.dirichlet(np.ones(c), size=(n - 1, c)))
    log_obs = rng.normal(0, 2, (n, c))
    return log_init, log_trans, log_obs


def test_viterbi_matches_exhaustive_oracle():
    rng = np.random.default_rng(7)
    for _ in range(30):
        n, c = int(rng.integers(1, 7)), int(rng.integers(2, 5))
        li, lt, lo = _random_problem(rng, n, c)
        path, score = viterbi(li, lt, lo)
        padded = [None] + list(lt)  # oracle indexes transitions by destination frame
        best, _ = oracles.best_path(li, padded, lo)
        assert score == pytest.approx(best, abs=1e-9)
        assert oracles.path_log_prob(li, padded, lo, path) == pytest.approx(best, abs=1e-9)


def test_viterbi_beats_true_path_on_simulated():
    rng = np.random.default_rng(11)
    X, c, s = _seq(rng.integers(0, 3, 200), rng.integers(0, 2, 200))
    m = hmm_fit([(X, c, s)], use_steps=True)
    for _ in range(50):
        steps = rng.integers(0, 2, 8)
        path = np.zeros(8, dtype=int)
        path[0] = rng.choice(3, p=m.initial)
        for t in range(1, 8):
            path[t] = rng.choice(3, p=m.transitions[steps[t], path[t - 1]])
        x = rng.normal(path[:, None] * 2.0, 1.5, (8, 2))
        dec = hmm_decode(m, x, steps)
        assert hmm_path_log_prob(m, x, steps, dec) >= hmm_path_log_prob(m, x, steps, path) - 1e-9


def test_hmm_sticky_dynamics_give_constant_path():
    obs = GaussianObservations(np.array([[0.0], [1.0], [2.0]]), np.ones((3, 1, 1)))
    trans = np.full((1, 3, 3), 0.005)
    for i in range(3):
        trans[0, i, i] = 0.99
    m = HmmModel(obs, trans, np.full(3, 1 / 3), use_steps=False)
    x = np.array([[0.4], [0.55]] * 4)  # weakly alternating between classes 0 and 1
    path = hmm_decode(m, x)
    assert len(set(path.tolist())) == 1
    best, oracle_path = oracles.best_path(
        np.log(m.initial), [None] + [np.log(trans[0])] * 7, m.obs.log_likelihood(x)
    )
    assert tuple(path.tolist()) == oracle_path


def test_hmm_uniform_dynamics_is_framewise():
    rng = np.random.default_rng(2)
    obs = GaussianObservations(rng.normal(0, 1, (4, 2)), np.tile(np.eye(2), (4, 1, 1)))
    m = HmmModel(obs, np.full((1, 4, 4), 0.25), np.full(4, 0.25), use_steps=False)
    x = rng.normal(0, 1.5, (30, 2))
    np.testing.assert_array_equal(hmm_decode(m, x), np.argmax(obs.log_likelihood(x), axis=1))
    np.testing.assert_array_equal(hmm_decode(m, x, mode="filter"), np.argmax(obs.log_likelihood(x), axis=1))


def test_hmm_errors():
    X, c, s = _seq(np.repeat([0, 1], 10), np.zeros(20, int))
    m = hmm_fit([(X, c, s)], use_steps=True)
    with pytest.raises(ValueError, match="empty"):
        hmm_decode(m, np.empty((0, 2)), np.empty(0, int))
    with pytest.raises(ValueError, match="unknown step"):
        hmm_decode(m, X[:3], [0, 0, 5])
    with pytest.raises(ValueError, match="empty"):
        hmm_fit([(X, c, s), (X[:0], c[:0], s[:0])])


# --- RF ----------------------------------------------------------------

def test_rf_separable_perfect():
    X, y = _two_blobs(seed=4)
    m = rf_fit(X, y, trees=50, seed=1)
    assert np.mean(rf_predict(m, X)[0] == y) == 1.0


def test_rf_thread_count_determinism():
    X, y = _two_blobs(seed=5, sep=0.7)
    a = rf_fit(X, y, trees=40, seed=3, n_jobs=1)
    b = rf_fit(X, y, trees=40, seed=3, n_jobs=4)
    probes = np.random.default_rng(0).uniform(-4, 4, (1000, 2))
    np.testing.assert_array_equal(rf_votes(a, probes), rf_votes(b, probes))
    np.testing.assert_array_equal(a.threshold, b.threshold)


def test_rf_xor():
    g = np.linspace(0, 1, 20)
    X = np.array([(u, v) for u in g for v in g])
    y = ((X[:, 0] > 0.5) ^ (X[:, 1] > 0.5)).astype(int)
    m = rf_fit(X, y, trees=500, seed=0)
    assert np.mean(rf_predict(m, X)[0] == y) >= 0.95


def test_rf_stump():
    m = ForestModel(
        feature=np.array([0, -1, -1], np.int32),
        threshold=np.array([0.5, 0.0, 0.0]),
        left=np.array([1, -1, -1], np.int32),
        right=np.array([2, -1, -1], np.int32),
        counts=np.array([[5, 5], [4, 1], [1, 3]], np.int32),
        offsets=np.array([0, 3]),
        n_classes=2, width=2, mtry=1, seed=0,
    )
    c, frac = rf_predict(m, np.array([0.9, 0.0]))
    assert c == 1 and frac.tolist() == [0.0, 1.0]
    assert rf_predict(m, np.array([0.1, 0.0]))[0] == 0


def test_rf_vote_fractions_and_errors():
    X, y = _two_blobs(seed=6, sep=0.5)
    m = rf_fit(X, y, trees=25, seed=2)
    _, frac = rf_predict(m, np.random.default_rng(1).normal(0, 2, (100, 2)))
    assert np.all(np.abs(frac.sum(axis=1) - 1.0) < 1e-12)
    with pytest.raises(ValueError, match="width"):
        rf_predict(m, np.zeros((3, 3)))
    with pytest.raises(ValueError, match="two classes"):
        rf_fit(X, np.zeros(len(X), int))


@pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")
def test_rf_backends_bit_identical():
    rng = np.random.default_rng(8)
    X = rng.random((150, 5))
    y = rng.integers(0, 3, 150)
    a = rf_fit(X, y, trees=15, seed=9, backend="python")
    b = rf_fit(X, y, trees=15, seed=9, backend="cython")
    for name in ("feature", "threshold", "left", "right", "counts", "offsets"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    probes = rng.random((300, 5))
    np.testing.assert_array_equal(rf_votes(a, probes, "python"), rf_votes(b, probes, "cython"))


# --- features and heads ------------------------------------------------

def test_encode_features():
    assert encode_features([0.2, 0.8], 1, 3).tolist() == [0.2, 0.8, 0, 1, 0]
    assert encode_features([0.2, 0.8], None, 3).tolist() == [0.2, 0.8]
    assert encode_features([0.2, 0.8], 2, 3, mode="integer").tolist() == [0.2, 0.8, 2.0]
    for s in range(5):
        assert decode_step(encode_features([0.5] * 4, s, 5), 4) == s
    with pytest.raises(ValueError, match="out of range"):
        encode_features([0.2], 3, 3)
    rows = encode_batch(np.full((5, 2), 0.5), np.arange(5), 5)
    assert [decode_step(r, 2) for r in rows] == list(range(5))


@pytest.fixture(scope="module")
def tables():
    spec = default_scenario(seed=1, n_recordings=4, length=120)
    d = generate(spec)
    rows = d.recordings()
    train = d.subset(np.concatenate(rows[:3]))
    test = d.subset(rows[3])
    return spec, train, test


@pytest.mark.parametrize("kind,use_steps", [
    ("gdap", False), ("nn", False), ("qda", False), ("qda", True),
    ("hmm", False), ("hmm", True), ("rf", False), ("rf", True),
])
@pytest.mark.filterwarnings("ignore:all-zero candidate")
def test_head_save_load_round_trip(tmp_path, tables, kind, use_steps):
    spec, train, test = tables
    head = fit_head(kind, train, use_steps, spec.n_classes, spec.n_steps,
                    gmap=spec.class_map(), options={"trees": 20})
    path = tmp_path / "m.npz"
    save_head(head, path)
    back = load_head(path)
    np.testing.assert_array_equal(back.predict(test), head.predict(test))
    assert back.kind == kind and back.use_steps == use_steps


def test_head_rejects_context_for_attribute_heads(tables):
    spec, train, _ = tables
    with pytest.raises(ValueError, match="process-step"):
        fit_head("gdap", train, True, gmap=spec.class_map())
    with pytest.raises(ValueError, match="K="):
        head = fit_head("qda", train)
        head.predict(SegmentTable([0, 0], [0, 1], [0, 0], [0, 1], np.full((2, 3), 0.5)))


def test_pure_python_fallback_selected_by_env():
    import os
    import subprocess
    import sys

    env = dict(os.environ, CTXHAR_PURE="1")
    res = subprocess.run([sys.executable, "-c", "from ctxhar.shallow import BACKEND; print(BACKEND)"],
                         capture_output=True, text=True, env=env)
    assert res.stdout.strip() == "python"
