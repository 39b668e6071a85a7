"""Classifier heads over reduced firing features: QDA and SVMs.

These replace the dense head once the firing matrix has been cut down to a
few selected neurons. All of them are binary: classes 0 and 1 (the SVMs
use -1/+1 internally). Decision ties at exactly 0 go to +1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError


@dataclass
class QdaModel:
    """Gaussian class models with full covariances, solved via Cholesky."""

    means: np.ndarray  # (2, d)
    cov: np.ndarray  # (2, d, d), regularization already added
    chol: np.ndarray  # (2, d, d) lower factors
    logdet: np.ndarray  # (2,)
    logprior: np.ndarray  # (2,)
    lam: float


@dataclass
class SvmModel:
    kind: str  # "linear" or "rbf"
    c: float
    w: np.ndarray | None = None  # linear
    b: float = 0.0
    sv_x: np.ndarray | None = None  # rbf
    sv_y: np.ndarray | None = None
    alpha: np.ndarray | None = None
    gamma: float = 0.0
    iterations: int = 0
    seed: int = 0
    converged: bool = True


def _check_features(features, labels):
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels).ravel()
    if x.ndim != 2:
        raise DimensionError(f"features must be (n,d), got {x.shape}")
    if x.shape[0] != y.shape[0]:
        raise DimensionError("one label per feature row required")
    return x, y


def qda_fit(features, labels, lam=1e-3) -> QdaModel:
    """Per-class mean + regularized covariance (1/(N_i-1) scaling).

    Needs more samples than dimensions in every class; with too few, the
    covariance estimate is rank-deficient, so the fit is refused with a
    pointer at the cure (fewer selected neurons, or a larger lam).
    """
    x, y = _check_features(features, labels)
    n, d = x.shape
    if lam < 0:
        raise ConfigurationError(f"lam must be >= 0, got {lam}")
    means, covs, chols, logdets, logpriors = [], [], [], [], []
    for cls in (0, 1):
        xc = x[y == cls]
        ni = xc.shape[0]
        if ni == 0:
            raise ConfigurationError(f"class {cls} absent from training data")
        if ni <= d:
            raise DimensionError(
                f"class {cls} has {ni} samples for {d} dimensions; "
                f"covariance needs more samples than dimensions: "
                f"select fewer neurons (smaller k) or raise lam"
            )
        mu = xc.mean(axis=0)
        centered = xc - mu
        cov = centered.T @ centered / (ni - 1) + lam * np.eye(d)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ConfigurationError(
                f"class {cls} covariance not positive definite even with "
                f"lam={lam}; raise lam"
            ) from None
        means.append(mu)
        covs.append(cov)
        chols.append(chol)
        logdets.append(2.0 * np.log(np.diag(chol)).sum())
        logpriors.append(np.log(ni / n))
    return QdaModel(
        means=np.array(means), cov=np.array(covs), chol=np.array(chols),
        logdet=np.array(logdets), logprior=np.array(logpriors), lam=float(lam),
    )


def qda_predict(model: QdaModel, x):
    """(label, per-class log-posterior up to a shared constant)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    d = model.means.shape[1]
    if x.shape[0] != d:
        raise DimensionError(f"expected {d}-dim input, got {x.shape[0]}")
    scores = np.empty(2)
    for cls in (0, 1):
        diff = x - model.means[cls]
        z = np.linalg.solve(model.chol[cls], diff)
        quad = float(z @ z)
        scores[cls] = model.logprior[cls] - 0.5 * model.logdet[cls] - 0.5 * quad
    return int(np.argmax(scores)), scores


def linear_svm_fit(features, labels, c=1.0, epochs=2000, seed=0) -> SvmModel:
    """Subgradient descent on 0.5*|w|^2 + c * sum hinge(y(wx+b)).

    Full-batch steps on the 1/t schedule (the objective's quadratic modulus
    is 1). The returned model is the average of the second half of the
    iterates; the early ones overshoot and would pollute a full average.
    Deterministic; the seed is kept as metadata only since no randomness is
    consumed.
    """
    x, y = _check_features(features, labels)
    y = y.astype(np.float64)
    if not (set(np.unique(y)) <= {-1.0, 1.0}):
        raise ConfigurationError("labels must be in {-1,+1}")
    if len(np.unique(y)) < 2:
        raise ConfigurationError("both classes required to fit an SVM")
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    w_avg = np.zeros(d)
    b_avg = 0.0
    tail_start = epochs // 2
    kept = 0
    for t in range(1, epochs + 1):
        margins = y * (x @ w + b)
        viol = margins < 1.0
        gw = w - c * (y[viol, None] * x[viol]).sum(axis=0)
        gb = -c * y[viol].sum()
        eta = 1.0 / t
        w = w - eta * gw
        b = b - eta * gb
        if t > tail_start:
            kept += 1
            w_avg += (w - w_avg) / kept
            b_avg += (b - b_avg) / kept
    return SvmModel(kind="linear", c=float(c), w=w_avg, b=float(b_avg),
                    iterations=epochs, seed=seed)


def svm_objective(w, b, features, labels, c=1.0) -> float:
    """0.5*|w|^2 + c * sum of hinge losses; the quantity the fit minimizes."""
    x, y = _check_features(features, labels)
    w = np.asarray(w, dtype=np.float64).ravel()
    hinge = np.maximum(0.0, 1.0 - y * (x @ w + float(b)))
    return float(0.5 * (w @ w) + c * hinge.sum())


def _rbf_kernel(a, b, gamma):
    aa = (a * a).sum(axis=1)[:, None]
    bb = (b * b).sum(axis=1)[None, :]
    d2 = aa + bb - 2.0 * (a @ b.T)
    return np.exp(-gamma * np.maximum(d2, 0.0))


def rbf_svm_fit(features, labels, c=1.0, gamma=None, tol=1e-3,
                max_passes=200) -> SvmModel:
    """Pairwise dual (SMO-style) optimization of the RBF-kernel SVM.

    gamma defaults to 1/d. Sweeps all samples; the partner index is the one
    with the largest error gap, so runs are deterministic. Stops when a full
    sweep finds no KKT violation beyond tol; hitting max_passes first
    returns the partial model with converged=False and a warning.
    """
    x, y = _check_features(features, labels)
    y = y.astype(np.float64)
    if not (set(np.unique(y)) <= {-1.0, 1.0}):
        raise ConfigurationError("labels must be in {-1,+1}")
    if len(np.unique(y)) < 2:
        raise ConfigurationError("both classes required to fit an SVM")
    n, d = x.shape
    if n > 5000:
        raise DimensionError(f"kernel SVM supports at most 5000 samples, got {n}")
    if gamma is None:
        gamma = 1.0 / d
    kmat = _rbf_kernel(x, x, gamma)
    alpha = np.zeros(n)
    b = 0.0
    passes = 0
    converged = False
    while passes < max_passes:
        changed = 0
        for i in range(n):
            e_i = float((alpha * y) @ kmat[:, i] + b - y[i])
            r_i = e_i * y[i]
            if not ((r_i < -tol and alpha[i] < c) or (r_i > tol and alpha[i] > 0)):
                continue
            errors = (alpha * y) @ kmat + b - y
            gap = np.abs(errors - e_i)
            gap[i] = -1.0
            j = int(np.argmax(gap))
            e_j = float(errors[j])
            if y[i] != y[j]:
                lo, hi = max(0.0, alpha[j] - alpha[i]), min(c, c + alpha[j] - alpha[i])
            else:
                lo, hi = max(0.0, alpha[i] + alpha[j] - c), min(c, alpha[i] + alpha[j])
            if lo >= hi:
                continue
            eta = 2.0 * kmat[i, j] - kmat[i, i] - kmat[j, j]
            if eta >= 0:
                continue
            a_j = alpha[j] - y[j] * (e_i - e_j) / eta
            a_j = min(max(a_j, lo), hi)
            if abs(a_j - alpha[j]) < 1e-12:
                continue
            a_i = alpha[i] + y[i] * y[j] * (alpha[j] - a_j)
            b1 = b - e_i - y[i] * (a_i - alpha[i]) * kmat[i, i] \
                - y[j] * (a_j - alpha[j]) * kmat[i, j]
            b2 = b - e_j - y[i] * (a_i - alpha[i]) * kmat[i, j] \
                - y[j] * (a_j - alpha[j]) * kmat[j, j]
            alpha[i], alpha[j] = a_i, a_j
            if 0 < a_i < c:
                b = b1
            elif 0 < a_j < c:
                b = b2
            else:
                b = (b1 + b2) / 2.0
            changed += 1
        passes += 1
        if changed == 0:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"kernel SVM stopped after {max_passes} passes with KKT "
            f"violations above tol={tol}; returning the partial model",
            RuntimeWarning,
        )
    sv = alpha > 1e-10
    return SvmModel(kind="rbf", c=float(c), b=float(b), sv_x=x[sv].copy(),
                    sv_y=y[sv].copy(), alpha=alpha[sv].copy(),
                    gamma=float(gamma), iterations=passes, converged=converged)


def svm_decision(model: SvmModel, x):
    x = np.asarray(x, dtype=np.float64).ravel()
    if model.kind == "linear":
        if x.shape[0] != model.w.shape[0]:
            raise DimensionError(
                f"expected {model.w.shape[0]}-dim input, got {x.shape[0]}"
            )
        return float(model.w @ x + model.b)
    if model.sv_x.shape[0] == 0:
        return float(model.b)
    if x.shape[0] != model.sv_x.shape[1]:
        raise DimensionError(
            f"expected {model.sv_x.shape[1]}-dim input, got {x.shape[0]}"
        )
    k = _rbf_kernel(model.sv_x, x[None, :], model.gamma)[:, 0]
    return float((model.alpha * model.sv_y) @ k + model.b)


def svm_predict(model: SvmModel, x) -> int:
    """Sign of the decision value; exactly 0 counts as +1."""
    return 1 if svm_decision(model, x) >= 0.0 else -1


def evaluate_accuracy(model, features, labels):
    """(accuracy, 2x2 confusion counts[true][pred]) on 0/1 labels.

    SVM predictions in {-1,+1} are mapped to {0,1}; QDA already emits 0/1.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels).ravel()
    if x.shape[0] == 0:
        raise ConfigurationError("evaluation set is empty")
    confusion = np.zeros((2, 2), dtype=np.int64)
    for row, truth in zip(x, y):
        if isinstance(model, QdaModel):
            pred, _ = qda_predict(model, row)
        else:
            pred = (svm_predict(model, row) + 1) // 2
        confusion[int(truth), int(pred)] += 1
    acc = float(np.trace(confusion) / confusion.sum())
    return acc, confusion


def to_arrays(model):
    """Flatten a classifier into the container's auxiliary-section form."""
    if isinstance(model, QdaModel):
        return {"kind": "qda", "meta": {"lam": model.lam},
                "tensors": {"means": model.means, "cov": model.cov,
                            "logprior": model.logprior}}
    if model.kind == "linear":
        return {"kind": "svml", "meta": {"c": model.c, "b": model.b,
                                         "iterations": model.iterations,
                                         "seed": model.seed},
                "tensors": {"w": model.w}}
    return {"kind": "svmr",
            "meta": {"c": model.c, "b": model.b, "gamma": model.gamma,
                     "iterations": model.iterations,
                     "converged": model.converged},
            "tensors": {"sv_x": model.sv_x, "sv_y": model.sv_y,
                        "alpha": model.alpha}}


def from_arrays(section):
    """Rebuild a classifier from a loaded auxiliary section."""
    kind = section["kind"]
    t = section["tensors"]
    meta = section.get("meta", {})
    if kind == "qda":
        cov = np.asarray(t["cov"], dtype=np.float64)
        chol = np.linalg.cholesky(cov)
        logdet = np.array([2.0 * np.log(np.diag(chol[i])).sum() for i in (0, 1)])
        return QdaModel(means=np.asarray(t["means"], dtype=np.float64),
                        cov=cov, chol=chol, logdet=logdet,
                        logprior=np.asarray(t["logprior"], dtype=np.float64),
                        lam=float(meta.get("lam", 0.0)))
    if kind == "svml":
        return SvmModel(kind="linear", c=float(meta["c"]),
                        w=np.asarray(t["w"], dtype=np.float64),
                        b=float(meta["b"]),
                        iterations=int(meta.get("iterations", 0)),
                        seed=int(meta.get("seed", 0)))
    if kind == "svmr":
        return SvmModel(kind="rbf", c=float(meta["c"]), b=float(meta["b"]),
                        sv_x=np.asarray(t["sv_x"], dtype=np.float64),
                        sv_y=np.asarray(t["sv_y"], dtype=np.float64),
                        alpha=np.asarray(t["alpha"], dtype=np.float64),
                        gamma=float(meta["gamma"]),
                        iterations=int(meta.get("iterations", 0)),
                        converged=bool(meta.get("converged", True)))
    raise ConfigurationError(f"unknown classifier kind {kind!r}")
