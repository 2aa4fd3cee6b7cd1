"""Learners: kernel-density Naive Bayes, SMO-trained RBF epsilon-SVR,
IRLS logistic regression, and the SOM-size grid search.

All solvers are deterministic for fixed inputs. The SVR dual is solved with
sequential minimal optimization over the stacked (alpha, alpha*) variables
using maximal-violating-pair working sets, the same stationarity conditions
giving the bias from free support vectors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import adr
from .errors import ConvergenceError, DataError, NumericalError
from .features import FrameFeatureMatrix

MMSE_RANGE = (0.0, 30.0)


# ---------------------------------------------------------------------------
# kernel-smoothed Naive Bayes


@dataclass
class KdeNaiveBayesModel:
    classes: list[str]
    priors: np.ndarray                    # (n_classes,)
    values: list[np.ndarray]              # per class: (n_c, d) training values
    bandwidths: np.ndarray                # (n_classes, d)

    @property
    def n_features(self) -> int:
        return self.bandwidths.shape[1]


def _silverman_bandwidth(col: np.ndarray) -> float:
    """1.06 * sigma_hat * n^(-1/5), sigma_hat = min(std, IQR/1.349), floor 1e-6."""
    n = len(col)
    std = float(col.std(ddof=1)) if n > 1 else 0.0
    q75, q25 = np.percentile(col, [75.0, 25.0])
    sigma = min(std, (q75 - q25) / 1.349)
    return max(1.06 * sigma * n ** (-0.2), 1e-6)


def _class_order(labels: np.ndarray) -> list[str]:
    # CN first so that posterior ties resolve to the control class
    return sorted({str(c) for c in labels}, key=lambda c: (c != "CN", c))


def train_nb(X: np.ndarray, y: np.ndarray) -> KdeNaiveBayesModel:
    """Gaussian-KDE class-conditional densities per feature, empirical priors."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[1] < 1:
        raise DataError("training matrix must be N x d with d >= 1")
    classes = _class_order(y)
    if len(classes) < 2:
        raise DataError("training data contains a single class")
    values = []
    bandwidths = np.empty((len(classes), X.shape[1]))
    priors = np.empty(len(classes))
    for ci, c in enumerate(classes):
        rows = X[y == c]
        values.append(rows.copy())
        priors[ci] = len(rows) / len(X)
        for j in range(X.shape[1]):
            bandwidths[ci, j] = _silverman_bandwidth(rows[:, j])
    return KdeNaiveBayesModel(classes=classes, priors=priors,
                              values=values, bandwidths=bandwidths)


def predict_nb(model: KdeNaiveBayesModel, x: np.ndarray
               ) -> tuple[str, dict[str, float]]:
    """argmax over prior x product of per-feature KDEs, in log space."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != model.n_features:
        raise DataError(f"query has {x.shape[0]} features, model expects {model.n_features}")
    log_scores = np.empty(len(model.classes))
    for ci in range(len(model.classes)):
        rows = model.values[ci]
        h = model.bandwidths[ci]
        z = (x[None, :] - rows) / h
        feat_log = logsumexp(-0.5 * z * z, axis=0) \
            - np.log(len(rows) * h * np.sqrt(2.0 * np.pi))
        log_scores[ci] = np.log(model.priors[ci]) + feat_log.sum()
    log_scores -= logsumexp(log_scores)
    posterior = np.exp(log_scores)
    winner = int(np.argmax(log_scores))
    return model.classes[winner], {c: float(p) for c, p in zip(model.classes, posterior)}


# ---------------------------------------------------------------------------
# epsilon-SVR with an SMO solver


@dataclass
class SvrModel:
    support_vectors: np.ndarray          # (n_sv, d), in scaled input space
    dual_coef: np.ndarray                # (n_sv,) = alpha - alpha*
    bias: float
    gamma: float
    epsilon: float
    c_box: float
    scaler_mean: np.ndarray
    scaler_std: np.ndarray
    clamp: tuple[float, float] | None
    converged: bool
    iterations: int
    kkt_residual: float
    dual_objective: float

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1] if self.support_vectors.size else len(self.scaler_mean)


def _rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * d2)


def svr_dual_objective(k: np.ndarray, y: np.ndarray, epsilon: float,
                       alpha: np.ndarray, alpha_star: np.ndarray) -> float:
    """(1/2) beta' K beta + eps * sum(alpha+alpha*) - y' beta (minimized)."""
    beta = alpha - alpha_star
    return float(0.5 * beta @ k @ beta + epsilon * (alpha + alpha_star).sum()
                 - y @ beta)


def train_svr(X: np.ndarray, y: np.ndarray, gamma: float | None = None,
              epsilon: float = 0.5, c_box: float = 1.0, tol: float = 1e-3,
              max_iter: int = 200_000,
              clamp: tuple[float, float] | None = MMSE_RANGE) -> SvrModel:
    """Fit epsilon-SVR (RBF kernel) by sequential minimal optimization.

    Inputs are standardized internally (statistics stored on the model).
    gamma defaults to 1/(d * var) of the scaled inputs. Hitting the iteration
    cap flags the model as unconverged but still returns the best iterate.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or len(X) != len(y) or len(y) < 2:
        raise DataError("SVR needs an N x d matrix and N targets, N >= 2")
    n, d = X.shape

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0.0] = 1.0
    xs = (X - mean) / std

    if gamma is None:
        var = float(xs.var())
        gamma = 1.0 / (d * var) if var > 0 else 1.0 / d
    if gamma <= 0:
        raise NumericalError(f"RBF gamma must be positive, got {gamma}")

    k = _rbf_kernel(xs, xs, gamma)

    # stacked variables theta = [alpha; alpha*], signs u = [+1...; -1...]
    u = np.concatenate((np.ones(n), -np.ones(n)))
    p = np.concatenate((epsilon - y, epsilon + y))
    theta = np.zeros(2 * n)
    grad = p.copy()                      # Q @ theta + p at theta = 0
    q_diag = np.concatenate((np.diag(k), np.diag(k)))

    def q_col(t: int) -> np.ndarray:
        col = k[:, t % n] * (1.0 if t < n else -1.0)
        return np.concatenate((col, -col))

    it = 0
    residual = np.inf
    for it in range(1, max_iter + 1):
        crit = -u * grad
        up = np.where(u > 0, theta < c_box, theta > 0)
        low = np.where(u > 0, theta > 0, theta < c_box)
        if not up.any() or not low.any():
            residual = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(crit[up])])
        j = int(np.flatnonzero(low)[np.argmin(crit[low])])
        residual = crit[i] - crit[j]
        if residual < tol:
            break

        qi = q_col(i)
        qj = q_col(j)
        # Q_ii + Q_jj - 2 u_i u_j Q_ij collapses to the plain kernel expression
        # because the block signs and the constraint signs coincide
        curv = max(q_diag[i] + q_diag[j] - 2.0 * k[i % n, j % n], 1e-12)
        step = residual / curv
        # box limits along the feasible direction (theta_i += u_i*s, theta_j -= u_j*s)
        if u[i] > 0:
            s_hi, s_lo = c_box - theta[i], -theta[i]
        else:
            s_hi, s_lo = theta[i], theta[i] - c_box
        if u[j] > 0:
            s_hi = min(s_hi, theta[j])
            s_lo = max(s_lo, theta[j] - c_box)
        else:
            s_hi = min(s_hi, c_box - theta[j])
            s_lo = max(s_lo, -theta[j])
        step = min(max(step, s_lo), s_hi)
        if step == 0.0:
            residual = 0.0
            break
        theta[i] += u[i] * step
        theta[j] -= u[j] * step
        grad += step * (u[i] * qi - u[j] * qj)

    converged = bool(residual < tol)
    if not converged:
        warnings.warn(f"SVR SMO hit the {max_iter}-iteration cap "
                      f"(KKT residual {residual:.3g})", RuntimeWarning, stacklevel=2)

    alpha, alpha_star = theta[:n], theta[n:]
    beta = alpha - alpha_star

    free = (theta > 1e-9) & (theta < c_box - 1e-9)
    b_vals = (-u * grad)[free]
    if b_vals.size:
        bias = float(b_vals.mean())
    else:
        crit = -u * grad
        up = np.where(u > 0, theta < c_box, theta > 0)
        low = np.where(u > 0, theta > 0, theta < c_box)
        hi = crit[up].max() if up.any() else 0.0
        lo = crit[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)

    sv = np.abs(beta) > 1e-12
    return SvrModel(
        support_vectors=xs[sv], dual_coef=beta[sv], bias=bias, gamma=float(gamma),
        epsilon=float(epsilon), c_box=float(c_box),
        scaler_mean=mean, scaler_std=std, clamp=clamp,
        converged=converged, iterations=it, kkt_residual=float(residual),
        dual_objective=svr_dual_objective(k, y, epsilon, alpha, alpha_star),
    )


def svr_decision(model: SvrModel, x: np.ndarray) -> float:
    """Unclamped kernel expansion value at x."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != model.n_features:
        raise DataError(f"query has {x.shape[0]} features, model expects {model.n_features}")
    xs = (x - model.scaler_mean) / model.scaler_std
    if model.support_vectors.size == 0:
        return model.bias
    d2 = ((model.support_vectors - xs) ** 2).sum(axis=1)
    return float(model.dual_coef @ np.exp(-model.gamma * d2) + model.bias)


def predict_svr(model: SvrModel, x: np.ndarray) -> float:
    """Kernel expansion clamped to the valid score range."""
    value = svr_decision(model, x)
    if model.clamp is not None:
        value = min(max(value, model.clamp[0]), model.clamp[1])
    return value


# ---------------------------------------------------------------------------
# logistic regression via iteratively reweighted least squares


@dataclass
class LogisticModel:
    coef: np.ndarray
    intercept: float
    converged: bool
    separable: bool
    iterations: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        z = X @ self.coef + self.intercept
        return 1.0 / (1.0 + np.exp(-z))


def logistic_log_likelihood(X: np.ndarray, t: np.ndarray,
                            coef: np.ndarray, intercept: float) -> float:
    z = np.asarray(X, dtype=np.float64) @ coef + intercept
    # log sigma(z)*t + log(1-sigma(z))*(1-t), stable form
    return float(np.sum(t * z - np.logaddexp(0.0, z)))


def fit_logistic(X: np.ndarray, t: np.ndarray, tol: float = 1e-8,
                 max_iter: int = 100) -> LogisticModel:
    """Maximum likelihood by IRLS; flags perfectly separable data.

    Separation shows up either as diverging weights or as a "converged" fit
    that reproduces every response to within 1e-6 (the MLE ran off to
    infinity in some direction); both raise the flag.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    t = np.asarray(t, dtype=np.float64).ravel()
    n, d = X.shape
    if n < d + 1:
        raise DataError(f"logistic fit needs at least {d + 1} rows, got {n}")
    z = np.column_stack((X, np.ones(n)))
    w = np.zeros(d + 1)
    separable = False
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = z @ w
        prob = 1.0 / (1.0 + np.exp(-eta))
        grad = z.T @ (t - prob)
        if np.abs(grad).max() < tol:
            converged = True
            break
        weight = np.maximum(prob * (1.0 - prob), 1e-12)
        hess = (z * weight[:, None]).T @ z
        hess[np.diag_indices_from(hess)] += 1e-10
        try:
            delta = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            separable = True
            break
        w += delta
        if np.abs(w).max() > 1e4:
            separable = True
            break
    prob = 1.0 / (1.0 + np.exp(-(z @ w)))
    if np.abs(t - prob).max() < 1e-6:
        separable = True
    return LogisticModel(coef=w[:d], intercept=float(w[d]),
                         converged=converged, separable=separable, iterations=it)


# ---------------------------------------------------------------------------
# grid search over the SOM node count


@dataclass
class GridSearchResult:
    candidates: list[int]
    scores: dict[int, float]
    chosen: int
    objective: str
    fold_scores: dict[int, list[float]] = field(default_factory=dict)


@dataclass
class _Example:
    """One recording ready for the ADR stage of a grid-search fit."""

    features: FrameFeatureMatrix
    age: float
    gender: int
    label: str | None = None            # classification target
    mmse: float | None = None           # regression target


def _stratified_folds(keys: np.ndarray, n_folds: int, seed: int) -> list[np.ndarray]:
    """Round-robin fold assignment inside each stratum, seeded shuffle."""
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(keys), dtype=int)
    for stratum in np.unique(keys):
        idx = np.flatnonzero(keys == stratum)
        rng.shuffle(idx)
        fold_of[idx] = np.arange(len(idx)) % n_folds
    return [np.flatnonzero(fold_of == f) for f in range(n_folds)]


def _fit_and_score(train: list[_Example], val: list[_Example], c_nodes: int,
                   objective: str, seed: int, epochs: int,
                   svr_params: dict | None) -> float:
    pooled = np.vstack([ex.features.values for ex in train])
    stats = adr.fit_standardizer(pooled)
    codebook = adr.train_som(stats.transform(pooled), c_nodes,
                             epochs=epochs, seed=seed)

    def vectors(examples: list[_Example]) -> np.ndarray:
        return np.array([adr.represent_recording(codebook, ex.features, stats,
                                                 ex.age, ex.gender).as_array()
                         for ex in examples])

    xtr, xva = vectors(train), vectors(val)
    if objective == "accuracy":
        model = train_nb(xtr, np.array([ex.label for ex in train]))
        hits = sum(predict_nb(model, x)[0] == ex.label
                   for x, ex in zip(xva, val))
        return hits / len(val)
    svr = train_svr(xtr, np.array([ex.mmse for ex in train]), **(svr_params or {}))
    err = [predict_svr(svr, x) - ex.mmse for x, ex in zip(xva, val)]
    return float(np.sqrt(np.mean(np.square(err))))


def grid_search_C(examples: list[_Example], objective: str,
                  candidates: tuple[int, ...] = (5, 10, 15, 20, 25),
                  validation: list[_Example] | None = None,
                  n_folds: int = 5, seed: int = 0, epochs: int = 100,
                  svr_params: dict | None = None) -> GridSearchResult:
    """Evaluate each SOM size and keep the winner (ties -> smallest C).

    With an explicit ``validation`` set, a single train/validate split is
    scored; otherwise stratified n-fold cross-validation with a fixed seed
    (labels stratify classification; quartile-binned scores stratify
    regression). Any stage failure aborts naming the candidate.
    """
    if objective not in ("accuracy", "rmse"):
        raise DataError(f"objective must be accuracy or rmse, got {objective!r}")
    maximize = objective == "accuracy"

    if validation is None:
        if objective == "accuracy":
            keys = np.array([ex.label for ex in examples])
        else:
            scores = np.array([ex.mmse for ex in examples], dtype=float)
            edges = np.quantile(scores, [0.25, 0.5, 0.75])
            keys = np.searchsorted(edges, scores)
        counts = np.unique(keys, return_counts=True)[1]
        folds = _stratified_folds(keys, max(2, min(n_folds, int(counts.min()))), seed)
    else:
        folds = None

    all_scores: dict[int, float] = {}
    fold_scores: dict[int, list[float]] = {}
    for c_nodes in candidates:
        try:
            if folds is None:
                per_fold = [_fit_and_score(examples, validation, c_nodes,
                                           objective, seed, epochs, svr_params)]
            else:
                per_fold = []
                for val_idx in folds:
                    if len(val_idx) == 0:
                        continue
                    held_out = set(val_idx.tolist())
                    val = [examples[i] for i in val_idx]
                    train = [ex for i, ex in enumerate(examples)
                             if i not in held_out]
                    per_fold.append(_fit_and_score(train, val, c_nodes,
                                                   objective, seed, epochs,
                                                   svr_params))
        except Exception as exc:
            raise type(exc)(f"grid search failed at C={c_nodes}: {exc}") from exc
        fold_scores[c_nodes] = per_fold
        all_scores[c_nodes] = float(np.mean(per_fold))

    ordered = sorted(candidates)
    best = ordered[0]
    for c_nodes in ordered[1:]:
        better = (all_scores[c_nodes] > all_scores[best]) if maximize \
            else (all_scores[c_nodes] < all_scores[best])
        if better:
            best = c_nodes
    return GridSearchResult(candidates=list(candidates), scores=all_scores,
                            chosen=best, objective=objective,
                            fold_scores=fold_scores)


GridSearchExample = _Example
