import numpy as np
import pytest

from escrowdetect.kernels import linear_gram
from escrowdetect.learners.pca import (PcaModel, center_gram, classify_pca, classify_projected,
                                       kaiser_guttman, pca_eigen, project, train_kernel_pca,
                                       train_pca)

import oracles


def data_with_covariance(eigs, n=50, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, len(eigs)))
    A -= A.mean(axis=0)
    Q, _ = np.linalg.qr(A)
    return Q * np.sqrt(n * np.asarray(eigs))


def test_kaiser_guttman_is_strict():
    assert kaiser_guttman([2.5, 1.1, 0.9]) == 2
    assert kaiser_guttman([1.5, 1.0, 1.0]) == 1
    assert kaiser_guttman([1.0 + 1e-12, 1.0]) == 1
    with pytest.warns(UserWarning):
        assert kaiser_guttman([1.0, 0.5]) == 1


def test_constructed_covariance_keeps_two_components():
    X = data_with_covariance([2.5, 1.1, 0.9])
    m = train_pca(X, standardize=False)
    assert m.n_components == 2
    assert np.allclose(m.all_eigenvalues, [2.5, 1.1, 0.9], atol=1e-10)


def test_eigenpairs_match_svd_oracle():
    X = np.random.default_rng(2).normal(size=(10, 6))
    evals, evecs, *_ = pca_eigen(X)
    o_vals, o_vecs = oracles.pca_oracle(X)
    assert np.allclose(evals, o_vals, atol=1e-10)
    for i in range(6):
        if o_vals[i] > 1e-10:
            assert min(np.abs(evecs[:, i] - o_vecs[:, i]).max(),
                       np.abs(evecs[:, i] + o_vecs[:, i]).max()) < 1e-6


def test_wide_data_uses_gram_side():
    X = np.random.default_rng(4).normal(size=(5, 12))
    evals, evecs, Z, *_ = pca_eigen(X)
    o_vals, _ = oracles.pca_oracle(X)
    assert np.allclose(evals[:5], o_vals[:5], atol=1e-10)
    kept = evals > 1e-10
    assert np.allclose(evecs[:, kept].T @ evecs[:, kept], np.eye(kept.sum()), atol=1e-10)


def test_components_orthonormal_and_reconstruct():
    X = np.random.default_rng(1).normal(size=(30, 4))
    evals, evecs, Z, *_ = pca_eigen(X)
    assert np.allclose(evecs.T @ evecs, np.eye(4), atol=1e-12)
    assert np.allclose(Z @ evecs @ evecs.T, Z, atol=1e-12)


def test_constant_columns_dropped():
    X = np.column_stack([np.random.default_rng(0).normal(size=8), np.full(8, 3.0)])
    with pytest.warns(UserWarning):
        m = train_pca(X)
    assert m.kept_columns.tolist() == [0]
    with pytest.raises(ValueError):
        train_pca(np.ones((4, 2)))


def test_linear_kernel_pca_reproduces_linear_pca():
    X = np.random.default_rng(7).normal(size=(12, 5))
    lin = train_pca(X)
    Z = (X - X.mean(0)) / X.std(0)
    ker = train_kernel_pca(linear_gram(Z))
    assert ker.n_components == lin.n_components
    for i in range(lin.n_components):
        a, b = lin.projections[:, i], ker.projections[:, i]
        assert min(np.abs(a - b).max(), np.abs(a + b).max()) < 1e-6
    new = np.random.default_rng(8).normal(size=(3, 5))
    Zn = (new - X.mean(0)) / X.std(0)
    pl, pk = project(lin, new), project(ker, linear_gram(Zn, Z))
    for i in range(lin.n_components):
        assert min(np.abs(pl[:, i] - pk[:, i]).max(), np.abs(pl[:, i] + pk[:, i]).max()) < 1e-6


def test_duplicate_pages_project_together():
    X = np.random.default_rng(3).normal(size=(6, 3))
    X = np.vstack([X, X[:1]])
    m = train_kernel_pca(linear_gram(X))
    assert np.allclose(m.projections[0], m.projections[-1], atol=1e-10)


def test_centered_gram_rows_sum_to_zero():
    K = linear_gram(np.random.default_rng(0).normal(size=(5, 2)))
    assert np.allclose(center_gram(K).sum(axis=0), 0.0, atol=1e-12)


def one_dim_model(fake, real):
    proj = np.array([[v] for v in list(fake) + list(real)], float)
    labels = np.array([1] * len(fake) + [-1] * len(real))
    return PcaModel("linear", np.ones(1), np.eye(1), proj, labels)


def test_mean_distance_hand_case():
    m = one_dim_model([1.9, 2.0], [1.0, 2.0, 3.0])
    labels, score = classify_projected(m, [[0.0]])
    assert labels[0] == 1
    assert score[0] == pytest.approx(2.0 - 1.95)
    assert labels[0] == oracles.mean_distance_label([0.0], [[1.9], [2.0]],
                                                    [[1.0], [2.0], [3.0]])


def test_midpoint_tie_goes_to_fake():
    m = one_dim_model([0.0], [1.0])
    assert classify_projected(m, [[0.5]])[0][0] == 1


def test_point_on_real_cluster_is_real():
    X = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0]])
    m = train_pca(X, [-1, -1, 1, 1])
    assert classify_pca(m, X[0]) == -1
    assert classify_pca(m, X[3]) == 1


def test_classification_needs_both_classes():
    m = one_dim_model([1.0], [])
    with pytest.raises(ValueError):
        classify_projected(m, [[0.0]])
