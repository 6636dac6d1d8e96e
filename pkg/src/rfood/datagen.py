"""Inputs x = Σ^{1/2} η, labels y = g(x) + ε, and covariate shifts δ."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from rfood.errors import DomainError
from rfood.rng import as_generator, substream
from rfood.spectra import Spectrum

__all__ = [
    "ConstraintCheck",
    "GroundTruth",
    "NoiseModel",
    "ShiftModel",
    "ShiftReport",
    "build_shift_model",
    "expected_grad_sq",
    "make_beta",
    "sample_inputs",
    "sample_labels",
    "sample_shift",
    "shifted_labels",
    "split_sets",
    "validate_shift",
]

GROUND_TRUTH_KINDS = ("linear", "softplus", "custom")
ETA_DISTS = ("gaussian", "rademacher")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Labelling function g; ``linear`` is βᵀx, ``softplus`` is log(1 + e^{βᵀx})."""

    kind: str
    beta: np.ndarray
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in GROUND_TRUTH_KINDS:
            raise DomainError(f"unknown ground truth kind {self.kind!r}")
        beta = np.asarray(self.beta, dtype=float).ravel()
        object.__setattr__(self, "beta", beta)
        if self.kind == "custom" and self.func is None:
            raise DomainError("custom ground truth needs a callable")

    @classmethod
    def linear(cls, beta):
        return cls("linear", beta)

    @classmethod
    def softplus(cls, beta):
        return cls("softplus", beta)

    @classmethod
    def custom(cls, func, p):
        return cls("custom", np.zeros(p), func)

    @property
    def p(self) -> int:
        return self.beta.size

    @property
    def beta_norm(self) -> float:
        return float(np.linalg.norm(self.beta))

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.p:
            raise DomainError(f"input has {X.shape[1]} columns, ground truth expects {self.p}")
        if self.kind == "custom":
            return np.asarray(self.func(X), dtype=float).ravel()
        z = X @ self.beta
        if self.kind == "linear":
            return z
        return np.logaddexp(0.0, z)

    def gradient(self, X) -> np.ndarray:
        """Row-wise ∇g(x); undefined for custom targets."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "linear":
            return np.broadcast_to(self.beta, X.shape).copy()
        if self.kind == "softplus":
            s = 1.0 / (1.0 + np.exp(-(X @ self.beta)))
            return s[:, None] * self.beta[None, :]
        raise DomainError("gradient not available for custom ground truth")


@dataclass(frozen=True)
class NoiseModel:
    sigma: float = 0.0
    eta_dist: str = "gaussian"

    def __post_init__(self):
        if self.sigma < 0:
            raise DomainError("sigma must be nonnegative")
        if self.eta_dist not in ETA_DISTS:
            raise DomainError(f"unknown eta distribution {self.eta_dist!r}")

    @property
    def sigma_x(self) -> float:
        # both supported η laws are 1-subgaussian
        return 1.0


@dataclass(frozen=True, eq=False)
class ShiftModel:
    """Diagonal shift covariance Σ_δ = diag(alphas) with strength τ."""

    alphas: np.ndarray
    tau: float
    construction: str = "custom"

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float).ravel()
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise DomainError("shift variances must be finite and >= 0")
        if self.tau < 0:
            raise DomainError("tau must be nonnegative")
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)

    @property
    def p(self) -> int:
        return self.alphas.size

    @property
    def is_null(self) -> bool:
        return not np.any(self.alphas)


class ConstraintCheck(NamedTuple):
    value: float
    bound: float
    passed: bool


class ShiftReport(NamedTuple):
    max_shift: ConstraintCheck  # max α_i <= τ
    large_budget: ConstraintCheck  # Σ_{C1} α_i/λ_i <= τ n
    small_cap: ConstraintCheck  # max_{C2} α_i <= τ max_{C2} λ_i

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self)


def make_beta(p: int, mode: str = "uniform", seed=None) -> np.ndarray:
    """Unit-norm direction: ``uniform`` (1/√p each), ``e1``, or ``random``."""
    if mode == "uniform":
        return np.full(p, 1.0 / np.sqrt(p))
    if mode == "e1":
        beta = np.zeros(p)
        beta[0] = 1.0
        return beta
    if mode == "random":
        v = as_generator(seed).standard_normal(p)
        return v / np.linalg.norm(v)
    raise DomainError(f"unknown beta mode {mode!r}")


def _eta(rng, shape, dist):
    if dist == "gaussian":
        return rng.standard_normal(shape)
    return rng.choice(np.array([-1.0, 1.0]), size=shape)


def sample_inputs(spec: Spectrum, n: int, noise: NoiseModel | None = None, seed=None):
    """n rows x_i = diag(√λ) η_i."""
    dist = noise.eta_dist if noise is not None else "gaussian"
    rng = as_generator(seed)
    return _eta(rng, (n, spec.p), dist) * np.sqrt(spec.eigenvalues)


def sample_labels(g: GroundTruth, X, noise: NoiseModel, seed=None) -> np.ndarray:
    """y_i = g(x_i) + ε_i with ε_i ~ N(0, σ²) drawn independently of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != g.p:
        raise DomainError(f"X has {X.shape[1]} columns but beta has length {g.p}")
    y = g(X)
    if noise.sigma > 0:
        y = y + noise.sigma * as_generator(seed).standard_normal(X.shape[0])
    return y


def shifted_labels(g: GroundTruth, X, D, noise: NoiseModel, seed=None) -> np.ndarray:
    """OOD labels y = g(x + δ) + ε."""
    return sample_labels(g, np.asarray(X) + np.asarray(D), noise, seed)


def split_sets(spec: Spectrum, b: float, n: int):
    """Index masks of the large (C1) and small (C2) eigenvalue sets."""
    cut = spec.trace / (b * n)
    large = spec.eigenvalues > cut
    return large, ~large


def build_shift_model(
    spec: Spectrum,
    b: float,
    n: int,
    tau: float,
    construction: str = "assumption2_default",
    c: float | None = None,
    alphas=None,
) -> ShiftModel:
    """Build Σ_δ for a spectrum.

    ``assumption2_default`` puts no shift on large-eigenvalue directions and
    τ·min(1, tr{Σ}/n, max_{C2} λ) on every small one; ``isotropic`` uses
    ``c`` everywhere; ``custom`` takes ``alphas`` as given.
    """
    p = spec.p
    if construction == "assumption2_default":
        large, small = split_sets(spec, b, n)
        a = np.zeros(p)
        if small.any():
            cap_small = float(spec.eigenvalues[small].max())
            a[small] = tau * min(1.0, spec.trace / n, cap_small)
        return ShiftModel(a, tau, construction)
    if construction == "isotropic":
        if c is None or c < 0:
            raise DomainError("isotropic shift needs a variance c >= 0")
        return ShiftModel(np.full(p, float(c)), tau, f"isotropic({c:g})")
    if construction == "custom":
        a = np.asarray(alphas, dtype=float).ravel()
        if a.size != p:
            raise DomainError(f"alphas has length {a.size}, spectrum has {p}")
        return ShiftModel(a, tau, "custom")
    raise DomainError(f"unknown shift construction {construction!r}")


def validate_shift(shift: ShiftModel, spec: Spectrum, b: float, n: int) -> ShiftReport:
    if shift.p != spec.p:
        raise DomainError("shift and spectrum lengths differ")
    a, lam, tau = shift.alphas, spec.eigenvalues, shift.tau
    large, small = split_sets(spec, b, n)

    max_a = float(a.max())
    budget = float(np.sum(a[large] / lam[large]))
    if small.any():
        small_a = float(a[small].max())
        small_bound = tau * float(lam[small].max())
    else:
        small_a = small_bound = 0.0
    return ShiftReport(
        ConstraintCheck(max_a, tau, max_a <= tau),
        ConstraintCheck(budget, tau * n, budget <= tau * n),
        ConstraintCheck(small_a, small_bound, small_a <= small_bound),
    )


def sample_shift(shift: ShiftModel, n_test: int, seed=None) -> np.ndarray:
    """Rows δ ~ N(0, diag(α)); the generator should be dedicated to shifts."""
    if shift.is_null:
        return np.zeros((n_test, shift.p))
    rng = as_generator(seed)
    return rng.standard_normal((n_test, shift.p)) * np.sqrt(shift.alphas)


def expected_grad_sq(g: GroundTruth, spec: Spectrum, n_mc: int = 100_000, seed=None) -> float:
    """E_x ‖∇g(x)‖²: exact for linear g, Monte Carlo for softplus."""
    if g.kind == "linear":
        return g.beta_norm**2
    X = sample_inputs(spec, n_mc, seed=substream(seed, "population"))
    s = 1.0 / (1.0 + np.exp(-(X @ g.beta)))
    return float(np.mean(s**2)) * g.beta_norm**2
