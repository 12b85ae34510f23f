"""SVM (SMO), PCA / kernel PCA and per-category ensembles."""
from .ensemble import EnsembleError, EnsembleModel, combine_votes, train_ensemble
from .pca import (PcaModel, center_gram, classify_pca, classify_projected, kaiser_guttman,
                  pca_eigen, project, train_kernel_pca, train_pca)
from .svm import (ConvergenceError, SvmModel, decision_function, kkt_residuals, predict_svm,
                  train_svm)

__all__ = [
    "EnsembleError", "EnsembleModel", "combine_votes", "train_ensemble",
    "PcaModel", "center_gram", "classify_pca", "classify_projected", "kaiser_guttman",
    "pca_eigen", "project", "train_kernel_pca", "train_pca",
    "ConvergenceError", "SvmModel", "decision_function", "kkt_residuals", "predict_svm",
    "train_svm",
]
