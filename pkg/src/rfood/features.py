"""Random feature maps, the min-norm estimator, θ* and ensembles.

A feature model maps x to φ(xᵀW)/√m with W having N(0, 1/p) entries; only the
output coefficients θ are fitted.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from rfood.datagen import GroundTruth, sample_inputs
from rfood.errors import DomainError
from rfood.rng import as_generator
from rfood.spectra import Spectrum

__all__ = [
    "EnsembleModel",
    "FeatureModel",
    "FitDiagnostics",
    "FittedModel",
    "ThetaStarFit",
    "feature_map",
    "fit",
    "fit_min_norm",
    "estimate_theta_star",
    "predict",
    "sample_feature_model",
    "theta_star_linear",
]

ACTIVATIONS = ("relu", "identity")
RANK_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class FeatureModel:
    W: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")
        W = np.asarray(self.W, dtype=float)
        if W.ndim != 2:
            raise DomainError("W must be a p x m matrix")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def p(self) -> int:
        return self.W.shape[0]

    @property
    def m(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class FitDiagnostics:
    residual_max: float
    gram_condition: float
    rank: int
    rank_deficient: bool


@dataclass(frozen=True, eq=False)
class FittedModel:
    feature_model: FeatureModel
    theta_hat: np.ndarray
    theta_star: np.ndarray | None = None
    diagnostics: FitDiagnostics | None = None
    X_train: np.ndarray | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.feature_model.m

    @property
    def p(self) -> int:
        return self.feature_model.p

    def with_theta_star(self, theta_star):
        return FittedModel(
            self.feature_model,
            self.theta_hat,
            np.asarray(theta_star, dtype=float),
            self.diagnostics,
            self.X_train,
        )


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise DomainError("an ensemble needs at least one member")
        p = members[0].p
        act = members[0].feature_model.activation
        for mem in members[1:]:
            if mem.p != p or mem.feature_model.activation != act:
                raise DomainError("ensemble members must share input dimension and activation")
        object.__setattr__(self, "members", members)

    @property
    def K(self) -> int:
        return len(self.members)

    @property
    def p(self) -> int:
        return self.members[0].p


@dataclass(frozen=True)
class ThetaStarFit:
    theta: np.ndarray
    population_mse: float
    n_pop: int
    reg_pop: float


def sample_feature_model(p: int, m: int, activation: str = "relu", seed=None) -> FeatureModel:
    if p < 1 or m < 1:
        raise DomainError("p and m must be >= 1")
    rng = as_generator(seed)
    W = rng.standard_normal((p, m)) / np.sqrt(p)
    return FeatureModel(W, activation)


def feature_map(fm: FeatureModel, X) -> np.ndarray:
    """Φ with rows φ(x_iᵀW)/√m."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != fm.p:
        raise DomainError(f"X has {X.shape[1]} columns, feature model expects {fm.p}")
    Z = X @ fm.W
    if fm.activation == "relu":
        np.maximum(Z, 0.0, out=Z)
    Z /= np.sqrt(fm.m)
    return Z


def fit_min_norm(Phi, y, reg: float = 0.0, rtol: float = RANK_RTOL):
    """Min-norm interpolant Φᵀ(ΦΦᵀ)⁺y, or the ridge solution when reg > 0.

    Works on the n x n Gram side. With ``reg == 0`` eigenvalues of ΦΦᵀ below
    ``rtol * max eigenvalue`` are dropped, which yields the pseudoinverse
    solution for rank-deficient inputs.

    Returns
    -------
    theta : ndarray of shape (m,)
    diagnostics : FitDiagnostics
    """
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if Phi.shape[0] != y.size:
        raise DomainError(f"Phi has {Phi.shape[0]} rows but y has {y.size} entries")
    if reg < 0:
        raise DomainError("reg must be nonnegative")
    if not (np.all(np.isfinite(Phi)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite values in Phi or y")

    n = Phi.shape[0]
    G = Phi @ Phi.T
    evals, evecs = np.linalg.eigh(G)
    top = evals[-1] if evals.size else 0.0
    if top <= 0:
        keep = np.zeros(n, dtype=bool)
    else:
        keep = evals > rtol * top
    rank = int(keep.sum())
    cond = float(top / evals[keep][0]) if rank else float("inf")

    if reg > 0:
        alpha = np.linalg.solve(G + reg * np.eye(n), y)
    else:
        V = evecs[:, keep]
        alpha = V @ ((V.T @ y) / evals[keep])
    theta = Phi.T @ alpha
    resid = Phi @ theta - y
    diag = FitDiagnostics(
        residual_max=float(np.max(np.abs(resid))) if n else 0.0,
        gram_condition=cond,
        rank=rank,
        rank_deficient=rank < n,
    )
    return theta, diag


def fit(fm: FeatureModel, X, y, reg: float = 0.0) -> FittedModel:
    """Fit θ̂ for a feature model on training data and keep X for later analysis."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    theta, diag = fit_min_norm(feature_map(fm, X), y, reg=reg)
    return FittedModel(fm, theta, None, diag, X)


def predict(model, X) -> np.ndarray:
    """Single model: φ(xᵀW)θ/√m. Ensemble: the mean of member predictions."""
    if isinstance(model, EnsembleModel):
        out = predict(model.members[0], X)
        for mem in model.members[1:]:
            out = out + predict(mem, X)
        return out / model.K
    return feature_map(model.feature_model, X) @ model.theta_hat


def predict_reference(model, X) -> np.ndarray:
    """Prediction with θ* in place of θ̂ (averaged for ensembles)."""
    if isinstance(model, EnsembleModel):
        return sum(predict_reference(mem, X) for mem in model.members) / model.K
    if model.theta_star is None:
        raise DomainError("model has no theta_star")
    return feature_map(model.feature_model, X) @ model.theta_star


def estimate_theta_star(
    fm: FeatureModel,
    g: GroundTruth,
    spec: Spectrum,
    n_pop: int | None = None,
    reg_pop: float | None = None,
    seed=None,
) -> ThetaStarFit:
    """Approximate the population minimizer of E[g(x) - f(θ, x)]².

    Noiseless ridge regression of g on ``n_pop`` fresh inputs (default
    ``max(10 m, 10_000)``) with ``reg_pop`` defaulting to 1e-8·tr(ΦᵀΦ)/n_pop.
    The reported MSE is measured on an independent draw of the same size.
    """
    m = fm.m
    if n_pop is None:
        n_pop = max(10 * m, 10_000)
    if n_pop < m:
        warnings.warn(f"n_pop={n_pop} < m={m}: theta_star is poorly determined", stacklevel=2)
    rng = as_generator(seed)
    X = sample_inputs(spec, n_pop, seed=rng)
    Phi = feature_map(fm, X)
    target = g(X)
    A = Phi.T @ Phi
    if reg_pop is None:
        reg_pop = 1e-8 * float(np.trace(A)) / n_pop
    A /= n_pop
    A[np.diag_indices_from(A)] += reg_pop
    rhs = Phi.T @ target / n_pop
    try:
        theta = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        theta = np.linalg.lstsq(A, rhs, rcond=None)[0]

    X_val = sample_inputs(spec, n_pop, seed=rng)
    mse = float(np.mean((feature_map(fm, X_val) @ theta - g(X_val)) ** 2))
    return ThetaStarFit(theta, mse, n_pop, reg_pop)


def theta_star_linear(fm: FeatureModel, spec: Spectrum, beta) -> np.ndarray:
    """Exact θ* = (WᵀΣW)⁺ WᵀΣβ for identity features and a linear target.

    Computed as the min-norm least-squares solution of Σ^{1/2}Wθ = Σ^{1/2}β
    (the same vector at O(p²m) instead of O(m³) cost), scaled by √m because
    the feature map carries a 1/√m factor.
    """
    if fm.activation != "identity":
        raise DomainError("closed-form theta_star needs identity activation")
    root = np.sqrt(spec.eigenvalues)
    A = fm.W * root[:, None]
    rhs = root * np.asarray(beta, dtype=float)
    return np.sqrt(fm.m) * np.linalg.lstsq(A, rhs, rcond=1e-12)[0]
