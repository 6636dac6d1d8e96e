"""Closed-form Gaussian expectations for ReLU random features.

Everything here is an exact expectation (arc-cosine kernels and friends), the
three-term linearized kernel that approximates them, and a checker for the
trace-comparison inequalities used when swapping one for the other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from rfood.datagen import ShiftModel
from rfood.errors import DomainError
from rfood.features import FeatureModel, feature_map, sample_feature_model
from rfood.rng import as_generator
from rfood.spectra import Spectrum

__all__ = [
    "InequalityCheck",
    "KernelReport",
    "arccos_kernel_matrix",
    "expected_feature_second_moment",
    "expected_kernel_entry",
    "expected_kernel_matrix",
    "kernel_linearization_report",
    "linearized_kernel",
    "ood_moment_closed_form",
    "relu_gradient_kernel",
    "relu_gradient_kernel_entry",
    "trace_comparison_check",
]

TWO_PI = 2.0 * np.pi


def _cosine(dot, na, nb):
    # clamp absorbs rounding just outside [-1, 1]
    return np.clip(dot / (na * nb), -1.0, 1.0)


def expected_kernel_entry(xs, xt, p: int) -> float:
    """E_W[ΦΦᵀ]_{st} for ReLU features with N(0, 1/p) weights."""
    xs = np.asarray(xs, dtype=float)
    xt = np.asarray(xt, dtype=float)
    ns, nt = np.linalg.norm(xs), np.linalg.norm(xt)
    if ns == 0 or nt == 0:
        return 0.0
    dot = float(xs @ xt)
    rho = _cosine(dot, ns, nt)
    return float((dot * np.arccos(-rho) + ns * nt * np.sqrt(1.0 - rho * rho)) / (TWO_PI * p))


def arccos_kernel_matrix(G: np.ndarray) -> np.ndarray:
    """Degree-1 arc-cosine kernel (1/2π)[g·arccos(-ρ) + √(g_ii g_jj)·√(1-ρ²)] from a Gram matrix g."""
    d = np.sqrt(np.clip(np.diag(G), 0.0, None))
    outer = np.outer(d, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(outer > 0, G / np.where(outer > 0, outer, 1.0), 0.0)
    rho = np.clip(rho, -1.0, 1.0)
    K = (G * np.arccos(-rho) + outer * np.sqrt(1.0 - rho * rho)) / TWO_PI
    K[outer == 0] = 0.0
    # exact diagonal: ρ = 1 gives g_ii / 2
    K[np.diag_indices_from(K)] = 0.5 * np.diag(G)
    return K


def expected_kernel_matrix(X, p: int | None = None) -> np.ndarray:
    """Closed-form E_W[ΦΦᵀ] on the rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = X.shape[1] if p is None else p
    return arccos_kernel_matrix(X @ X.T) / p


def linearized_kernel(X, spec: Spectrum, r0_reading: str = "trace") -> np.ndarray:
    """K̃ = (tr/p)(1/2π + 3c/(4π tr²))11ᵀ + XXᵀ/(4p) + (tr/p)(1/4 - 1/2π)I.

    ``c`` is tr{Σ²} by default (``r0_reading="trace"``); ``"effective_rank"``
    uses r₀(Σ²) = tr{Σ²}/λ₁² instead.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = spec.p
    if X.shape[1] != p:
        raise DomainError(f"X has {X.shape[1]} columns, spectrum has {p}")
    tr = spec.trace
    if r0_reading == "trace":
        c = spec.trace_sq
    elif r0_reading == "effective_rank":
        c = spec.trace_sq / spec.eigenvalues[0] ** 2
    else:
        raise DomainError(f"unknown r0 reading {r0_reading!r}")
    n = X.shape[0]
    K = np.full((n, n), (tr / p) * (1.0 / TWO_PI + 3.0 * c / (4.0 * np.pi * tr**2)))
    K += (X @ X.T) / (4.0 * p)
    K[np.diag_indices(n)] += (tr / p) * (0.25 - 1.0 / TWO_PI)
    return K


@dataclass(frozen=True, eq=False)
class KernelReport:
    empirical_or_expected: np.ndarray
    linearized: np.ndarray
    op_norm_error: float
    relative_error: float
    mode: str = "closed_form"
    m: int | None = None

    def csv_row(self, p: int):
        n = self.linearized.shape[0]
        m_or_closed = "closed" if self.m is None else str(self.m)
        return [str(p), str(n), m_or_closed, f"{self.op_norm_error:.17g}", f"{self.relative_error:.17g}"]


KERNEL_CSV_HEADER = ["p", "n", "m_or_closed", "op_norm_error", "relative_error"]


def kernel_linearization_report(
    X,
    spec: Spectrum,
    mode: str = "closed_form",
    fm: FeatureModel | None = None,
    m: int | None = None,
    n_rep: int = 1,
    seed=None,
    r0_reading: str = "trace",
) -> KernelReport:
    """Compare K (closed form, or averaged ΦΦᵀ) with K̃ in operator norm.

    ``mode="monte_carlo"`` averages ``n_rep`` realized Gram matrices; the
    first uses ``fm`` if given, later ones draw fresh W with ``m`` features.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = spec.p
    Kt = linearized_kernel(X, spec, r0_reading=r0_reading)
    if mode == "closed_form":
        K = expected_kernel_matrix(X, p)
        m_used = None
    elif mode == "monte_carlo":
        if fm is None and m is None:
            raise DomainError("monte_carlo mode needs a feature model or m")
        m_used = fm.m if fm is not None else m
        rng = as_generator(seed)
        K = np.zeros((X.shape[0], X.shape[0]))
        for rep in range(n_rep):
            cur = fm if (rep == 0 and fm is not None) else sample_feature_model(p, m_used, "relu", rng)
            Phi = feature_map(cur, X)
            K += Phi @ Phi.T
        K /= n_rep
    else:
        raise DomainError(f"unknown mode {mode!r}")
    err = float(np.linalg.norm(K - Kt, 2))
    return KernelReport(K, Kt, err, err / (spec.trace / p), mode, m_used)


def expected_feature_second_moment(fm: FeatureModel, spec: Spectrum) -> np.ndarray:
    """M₁ = (1/m) E_x φ(Wᵀx)φ(Wᵀx)ᵀ for x ~ N(0, Σ)."""
    W = fm.W
    if W.shape[0] != spec.p:
        raise DomainError("feature model and spectrum dimensions differ")
    G = W.T @ (W * spec.eigenvalues[:, None])
    if fm.activation == "identity":
        return G / fm.m
    return arccos_kernel_matrix(G) / fm.m


def relu_gradient_kernel_entry(wi, wj, spec: Spectrum, shift: ShiftModel) -> float:
    """E_x[1(w_iᵀx ≥ 0) 1(w_jᵀx ≥ 0)] · w_iᵀΣ_δw_j."""
    wi = np.asarray(wi, dtype=float)
    wj = np.asarray(wj, dtype=float)
    lam = spec.eigenvalues
    if wi.size != lam.size or wj.size != lam.size or shift.p != lam.size:
        raise DomainError("dimension mismatch")
    shift_dot = float(wi @ (shift.alphas * wj))
    if np.array_equal(wi, wj):
        return 0.5 * shift_dot
    ni = np.sqrt(wi @ (lam * wi))
    nj = np.sqrt(wj @ (lam * wj))
    rho = _cosine(float(wi @ (lam * wj)), ni, nj)
    return float(np.arccos(-rho) / TWO_PI * shift_dot)


def relu_gradient_kernel(fm: FeatureModel, spec: Spectrum, shift: ShiftModel) -> np.ndarray:
    """Matrix of :func:`relu_gradient_kernel_entry` over all feature pairs."""
    W = fm.W
    G = W.T @ (W * spec.eigenvalues[:, None])
    d = np.sqrt(np.diag(G))
    rho = np.clip(G / np.outer(d, d), -1.0, 1.0)
    prob = np.arccos(-rho) / TWO_PI
    np.fill_diagonal(prob, 0.5)
    return prob * (W.T @ (W * shift.alphas[:, None]))


def ood_moment_closed_form(H_diag, a, b) -> float:
    """E_w[wᵀHw · aᵀw · bᵀw · 1(aᵀw ≥ 0) 1(bᵀw ≥ 0)] for w ~ N(0, I), H diagonal.

    Exact at finite p; the Rayleigh quotients aᵀHa/‖a‖² and bᵀHb/‖b‖² are
    kept rather than absorbed into the tr{H} term.
    """
    h = np.asarray(H_diag, dtype=float).ravel()
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if not (h.size == a.size == b.size):
        raise DomainError("H, a and b must have the same length")
    if np.any(h < 0):
        raise DomainError("H must be positive semidefinite")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DomainError("a and b must be nonzero")
    trH = h.sum()
    rho = _cosine(float(a @ b), na, nb)
    aHb = float(a @ (h * b))
    first = (na * nb * trH * rho / TWO_PI + aHb / np.pi) * np.arccos(-rho)
    rayleigh = float(a @ (h * a)) / na**2 + float(b @ (h * b)) / nb**2
    second = (trH + rayleigh) * na * nb / TWO_PI * np.sqrt(1.0 - rho * rho)
    return float(first + second)


class InequalityCheck(NamedTuple):
    lhs: float
    rhs: float
    passed: bool


def _psd_extremes(M):
    ev = np.linalg.eigvalsh((M + M.T) / 2)
    return ev[0], ev[-1]


def trace_comparison_check(A, B, C, rtol: float = 1e-10):
    """Evaluate the four trace inequalities for PD A, PSD B with μ_n(A) > μ₁(B), PSD C.

    Returns four :class:`InequalityCheck` in order:
    tr{AC} <= tr{(A+B)C}; tr{(A+B)C} <= (1 + μ₁(B)/μ_n(A)) tr{AC};
    (1 - μ₁(B)/μ_n(A)) tr{A⁻¹C} <= tr{(A+B)⁻¹C}; tr{(A+B)⁻¹C} <= tr{A⁻¹C}.
    A relative slack of ``rtol`` is allowed in each comparison.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    if not (A.shape == B.shape == C.shape and A.shape[0] == A.shape[1]):
        raise DomainError("A, B, C must be square and of equal size")
    a_min, _ = _psd_extremes(A)
    b_min, b_max = _psd_extremes(B)
    c_min, _ = _psd_extremes(C)
    scale = max(1.0, float(np.abs(A).max()))
    tol = 1e-12 * scale
    if a_min <= 0:
        raise DomainError("A must be positive definite")
    if b_min < -tol or c_min < -tol * max(1.0, float(np.abs(C).max())):
        raise DomainError("B and C must be positive semidefinite")
    if not a_min > b_max:
        raise DomainError("need mu_n(A) > mu_1(B)")

    ratio = max(b_max, 0.0) / a_min
    AB = A + B
    tr_AC = float(np.trace(A @ C))
    tr_ABC = float(np.trace(AB @ C))
    tr_AinvC = float(np.trace(np.linalg.solve(A, C)))
    tr_ABinvC = float(np.trace(np.linalg.solve(AB, C)))

    def check(lhs, rhs):
        slack = rtol * max(abs(lhs), abs(rhs), 1e-300)
        return InequalityCheck(lhs, rhs, lhs <= rhs + slack)

    return (
        check(tr_AC, tr_ABC),
        check(tr_ABC, (1.0 + ratio) * tr_AC),
        check((1.0 - ratio) * tr_AinvC, tr_ABinvC),
        check(tr_ABinvC, tr_AinvC),
    )
