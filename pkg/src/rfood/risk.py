"""Excess and prediction risks, their bias-variance split, and bound shapes.

The bound constants are unknown, so every ``*_shape`` function sets them to 1;
those values are only meaningful for trend and monotonicity comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from rfood.datagen import GroundTruth, NoiseModel, ShiftModel, sample_inputs, sample_shift, split_sets
from rfood.errors import DomainError
from rfood.features import EnsembleModel, FittedModel, feature_map, predict, predict_reference
from rfood.kernels import expected_feature_second_moment
from rfood.rng import substream
from rfood.spectra import Spectrum, critical_index

__all__ = [
    "METRICS",
    "MODEL_KINDS",
    "BoundEvaluation",
    "OODBoundShapes",
    "RiskEstimate",
    "evaluate_bounds",
    "id_bias_variance_decompose",
    "id_bound_shape",
    "id_excess_risk",
    "improvement_ratio",
    "linear_feature_improvement_prediction",
    "ood_bound_shapes",
    "ood_excess_risk",
    "prediction_mse",
]

METRICS = ("id_excess", "ood_excess", "id_mse", "ood_mse")
MODEL_KINDS = ("single_avg", "ensemble")
CLOSED_FORM_MAX_M = 2048


@dataclass(frozen=True)
class RiskEstimate:
    metric: str
    model_kind: str
    mean: float
    stderr: float
    trials: int
    m: int
    K: int

    def __post_init__(self):
        if self.metric not in METRICS:
            raise DomainError(f"unknown metric {self.metric!r}")
        if self.model_kind not in MODEL_KINDS:
            raise DomainError(f"unknown model kind {self.model_kind!r}")


def _shape_of(model):
    if isinstance(model, EnsembleModel):
        return "ensemble", model.members[0].m, model.K
    return "single_avg", model.m, 1


def _estimate(metric, model, sq_err):
    kind, m, K = _shape_of(model)
    n = sq_err.size
    stderr = float(np.std(sq_err, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return RiskEstimate(metric, kind, float(np.mean(sq_err)), stderr, 1, m, K)


def _require_theta_star(model):
    members = model.members if isinstance(model, EnsembleModel) else (model,)
    if any(mem.theta_star is None for mem in members):
        raise DomainError("excess risk needs theta_star on every model")


def _test_inputs(spec, n_test, noise, seed):
    return sample_inputs(spec, n_test, noise, seed=substream(seed, "test_inputs"))


def id_excess_risk(model, spec: Spectrum, g: GroundTruth | None, n_test: int, seed=None, noise=None):
    """Mean of (f(θ̂, x) - f(θ*, x))² over fresh in-distribution inputs."""
    _require_theta_star(model)
    X = _test_inputs(spec, n_test, noise, seed)
    return _estimate("id_excess", model, (predict(model, X) - predict_reference(model, X)) ** 2)


def ood_excess_risk(
    model, spec: Spectrum, g: GroundTruth | None, shift: ShiftModel, n_test: int, seed=None, noise=None
):
    """Mean of (f(θ̂, x+δ) - f(θ*, x+δ))² over fresh (x, δ) pairs.

    Uses the same input stream as :func:`id_excess_risk`, so a null shift
    reproduces the in-distribution value exactly.
    """
    _require_theta_star(model)
    X = _test_inputs(spec, n_test, noise, seed)
    Xs = X + sample_shift(shift, n_test, seed=substream(seed, "test_shift"))
    return _estimate("ood_excess", model, (predict(model, Xs) - predict_reference(model, Xs)) ** 2)


def prediction_mse(
    model, spec: Spectrum, g: GroundTruth, noise: NoiseModel, shift: ShiftModel | None, n_test: int, seed=None
):
    """Mean of (prediction - y)² with y = g(x + δ) + ε (δ = 0 without a shift)."""
    X = _test_inputs(spec, n_test, noise, seed)
    metric = "id_mse"
    if shift is not None:
        X = X + sample_shift(shift, n_test, seed=substream(seed, "test_shift"))
        metric = "ood_mse"
    y = g(X)
    if noise.sigma > 0:
        y = y + noise.sigma * substream(seed, "test_noise").standard_normal(n_test)
    return _estimate(metric, model, (predict(model, X) - y) ** 2)


def improvement_ratio(single_risks, ensemble_risk: float) -> float:
    """R_K = 1 - L(ensemble) / mean(L(single))."""
    singles = np.asarray(single_risks, dtype=float).ravel()
    if singles.size == 0:
        raise DomainError("need at least one single-model risk")
    base = float(np.mean(singles))
    if base == 0:
        raise DomainError("mean single-model risk is zero")
    return 1.0 - ensemble_risk / base


def linear_feature_improvement_prediction(p: int, m: int, K: int) -> float:
    """(1 - 1/K)(p/m)/(1 + p/m), the linear-feature ensemble gain."""
    if p < 1 or m < 1 or K < 1:
        raise DomainError("p, m, K must be >= 1")
    ratio = p / m
    return (1.0 - 1.0 / K) * ratio / (1.0 + ratio)


def id_bias_variance_decompose(
    fitted: FittedModel,
    spec: Spectrum,
    noise: NoiseModel,
    use_closed_form: bool = True,
    n_mc: int = 200_000,
    seed=None,
):
    """Split the expected ID excess risk into bias and variance.

    bias     = θ*ᵀ P⊥ M₁ P⊥ θ*,  P⊥ = I - Φᵀ(ΦΦᵀ)⁻¹Φ
    variance = σ² tr{(ΦΦᵀ)⁻² Φ M₁ Φᵀ}

    with M₁ = (1/m) E_x φ(Wᵀx)φ(Wᵀx)ᵀ. The closed form assumes Gaussian
    inputs; set ``use_closed_form=False`` to estimate M₁ by sampling.
    """
    if fitted.theta_star is None:
        raise DomainError("decomposition needs theta_star")
    if fitted.X_train is None:
        raise DomainError("decomposition needs the training inputs")
    fm = fitted.feature_model
    if use_closed_form:
        if fm.m > CLOSED_FORM_MAX_M:
            raise DomainError(
                f"m={fm.m} exceeds {CLOSED_FORM_MAX_M}; use use_closed_form=False (Monte Carlo)"
            )
        M1 = expected_feature_second_moment(fm, spec)
    else:
        Xs = sample_inputs(spec, n_mc, noise, seed=substream(seed, "population"))
        F = feature_map(fm, Xs)
        M1 = F.T @ F / n_mc

    Phi = feature_map(fm, fitted.X_train)
    Ginv = np.linalg.pinv(Phi @ Phi.T, hermitian=True)
    theta = fitted.theta_star
    resid = theta - Phi.T @ (Ginv @ (Phi @ theta))
    bias = float(resid @ M1 @ resid)
    B = Ginv @ Phi
    variance = noise.sigma**2 * float(np.sum((B @ M1) * B))
    return bias, variance


def _small_mass(spec: Spectrum, b: float, n: int) -> float:
    _, small = split_sets(spec, b, n)
    return float(np.sum(spec.eigenvalues[small])) / spec.trace


def id_bound_shape(spec: Spectrum, n: int, m: int, theta_star_norm_sq: float, sigma: float, b: float, xi: float):
    """tr/p·‖θ*‖²/n^{1/4} + σ²(n^{-1/8} + k*/n + nΣ_{j>k*}λ_j²/tr²), or None if k* is undefined."""
    kstar = critical_index(spec, b, n)
    if kstar is None:
        return None
    lam = spec.eigenvalues
    tr = spec.trace
    tail = float(np.sum(lam[kstar:] ** 2))
    return (tr / spec.p) * theta_star_norm_sq / n**0.25 + sigma**2 * (
        n ** (-1 / 8) + kstar / n + n * tail / tr**2
    )


class OODBoundShapes(NamedTuple):
    lower: float
    upper: float
    r2_lower: float


def ood_bound_shapes(
    spec: Spectrum, n: int, m: int, sigma: float, tau: float, b: float, g_grad_sq: float
) -> OODBoundShapes:
    """Lower and upper OOD excess shapes and the R₂ lower-bound shape."""
    ratio = spec.p / m
    small = _small_mass(spec, b, n)
    s2t = sigma**2 * tau
    lower = s2t * ratio + s2t * small
    upper = tau * g_grad_sq + s2t * (ratio + 1.0) + s2t * small
    r2 = 0.5 * s2t * ratio / upper if upper > 0 else 0.0
    return OODBoundShapes(lower, upper, r2)


@dataclass(frozen=True)
class BoundEvaluation:
    id_upper_shape: float | None
    ood_lower_shape: float
    ood_upper_shape: float
    r2_lower_shape: float
    constants_assumed_one: bool = True


def evaluate_bounds(spec, n, m, theta_star_norm_sq, sigma, tau, b, xi, g_grad_sq) -> BoundEvaluation:
    ood = ood_bound_shapes(spec, n, m, sigma, tau, b, g_grad_sq)
    return BoundEvaluation(
        id_bound_shape(spec, n, m, theta_star_norm_sq, sigma, b, xi),
        ood.lower,
        ood.upper,
        ood.r2_lower,
    )
