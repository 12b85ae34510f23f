"""Soft-margin kernel SVM trained by sequential minimal optimisation.

Works on a precomputed Gram matrix. Each step picks the maximal violating
pair (lowest index on ties), solves the two-variable subproblem in closed
form and updates the gradient; training stops once the largest KKT
violation drops below ``tol``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numba
import numpy as np

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SvmModel:
    """Support coefficients, labels and bias of a trained SVM.

    ``support`` indexes the training rows with alpha > 0; prediction needs
    kernel values against exactly those rows, in that order.
    """

    alpha: np.ndarray       # all training multipliers, 0 <= alpha <= C
    y: np.ndarray           # training labels, +1 Fake / -1 Real
    bias: float
    C: float
    kernel: str = "precomputed"
    iterations: int = 0
    kkt_gap: float = 0.0

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.alpha > 0)

    @property
    def dual_coef(self) -> np.ndarray:
        s = self.support
        return self.alpha[s] * self.y[s]

    def dual_objective(self, gram: np.ndarray) -> float:
        """W(alpha) = sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij."""
        v = self.alpha * self.y
        return float(self.alpha.sum() - 0.5 * v @ gram @ v)


@numba.njit(cache=True)
def _smo(K, y, C, tol, max_iter):
    n = y.size
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - e'a
    it = 0
    gap = np.inf
    while it < max_iter:
        # i: argmax over I_up of -y*G ; j: argmin over I_low of -y*G
        i = -1
        j = -1
        g_max = -np.inf
        g_min = np.inf
        for t in range(n):
            v = -y[t] * grad[t]
            up = (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0)
            low = (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0)
            if up and v > g_max:
                g_max = v
                i = t
            if low and v < g_min:
                g_min = v
                j = t
        gap = g_max - g_min
        if i < 0 or j < 0 or gap < tol:
            break
        a = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if a <= 0:
            a = 1e-12
        step = gap / a
        # feasible step along alpha_i += y_i t, alpha_j -= y_j t
        bound_i = C - alpha[i] if y[i] > 0 else alpha[i]
        bound_j = alpha[j] if y[j] > 0 else C - alpha[j]
        if step > bound_i:
            step = bound_i
        if step > bound_j:
            step = bound_j
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        # snap to the box to keep the support set clean
        for t in (i, j):
            if alpha[t] < 1e-14:
                alpha[t] = 0.0
            elif alpha[t] > C - 1e-14 * C:
                alpha[t] = C
        for t in range(n):
            grad[t] += step * y[t] * (K[t, i] - K[t, j])
        it += 1
    return alpha, grad, it, gap


def _rho(alpha, y, grad, C):
    """Offset rho (bias = -rho): mean of y*G over free vectors, otherwise the
    midpoint of the interval allowed by the bounded ones."""
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yg[free].mean())
    at_upper = alpha >= C
    at_lower = alpha <= 0
    lb_mask = ((y > 0) & at_upper) | ((y < 0) & at_lower)
    ub_mask = ((y > 0) & at_lower) | ((y < 0) & at_upper)
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    if np.isfinite(lb) and np.isfinite(ub):
        return float((lb + ub) / 2)
    return float(lb if np.isfinite(lb) else ub)


def train_svm(gram, labels, C: float = 1.0, *, tol: float = 1e-3,
              max_iter: int | None = None) -> SvmModel:
    """Solve the soft-margin SVM dual on a precomputed kernel matrix.

    ``labels`` are +1 (Fake) / -1 (Real). Raises ``ValueError`` for a
    non-symmetric Gram matrix and ``ConvergenceError`` if ``max_iter`` steps
    do not bring the KKT violation under ``tol``.
    """
    K = np.ascontiguousarray(gram, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n = y.size
    if K.shape != (n, n):
        raise ValueError(f"gram shape {K.shape} does not match {n} labels")
    if not np.allclose(K, K.T, atol=1e-10, rtol=0):
        raise ValueError("gram matrix is not symmetric")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise ValueError("labels must be +1 or -1")
    if C <= 0:
        raise ValueError("C must be positive")
    if np.unique(y).size < 2:
        warnings.warn("all training labels identical; model predicts that class")
        return SvmModel(np.zeros(n), y, float(y[0]), float(C))
    if max_iter is None:
        max_iter = max(10_000_000, 100 * n)
    alpha, grad, it, gap = _smo(K, y, float(C), float(tol), int(max_iter))
    if gap >= tol:
        raise ConvergenceError(f"SMO stopped after {it} iterations with KKT gap {gap:.3g} "
                               f"(tol {tol}); n={n}, C={C}")
    rho = _rho(alpha, y, grad, C)
    return SvmModel(alpha, y, -rho, float(C), iterations=int(it), kkt_gap=float(gap))


def decision_function(model: SvmModel, kernel_rows) -> np.ndarray:
    """Margins for a (n_test x n_support) block of kernel values."""
    rows = np.atleast_2d(np.asarray(kernel_rows, dtype=float))
    if rows.shape[1] != model.support.size:
        raise ValueError(f"kernel row has {rows.shape[1]} entries, model has "
                         f"{model.support.size} support vectors")
    return rows @ model.dual_coef + model.bias


def predict_svm(model: SvmModel, kernel_row) -> tuple[int, float]:
    """(label, margin) of one instance; label +1 Fake / -1 Real, 0 margin -> Fake."""
    margin = float(decision_function(model, kernel_row)[0])
    return (1 if margin >= 0 else -1), margin


def kkt_residuals(model: SvmModel, gram: np.ndarray) -> np.ndarray:
    """Per-point KKT violation of a trained model (0 when satisfied)."""
    f = np.asarray(gram) @ (model.alpha * model.y) + model.bias
    yf = model.y * f
    a, C = model.alpha, model.C
    r = np.zeros_like(a)
    lower = a <= 0
    upper = a >= C
    free = ~lower & ~upper
    r[lower] = np.maximum(0.0, 1.0 - yf[lower])
    r[upper] = np.maximum(0.0, yf[upper] - 1.0)
    r[free] = np.abs(yf[free] - 1.0)
    return r
