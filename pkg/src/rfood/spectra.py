"""Covariance spectra and the benign-overfitting diagnostics built on them.

All spectra are diagonal: a :class:`Spectrum` is the non-increasing list of
eigenvalues of the input covariance.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rfood.errors import DomainError

__all__ = [
    "BenignDiagnostics",
    "HighDimDiagnostics",
    "Spectrum",
    "benign_diagnostics",
    "critical_index",
    "effective_rank",
    "effective_ranks",
    "highdim_diagnostics",
    "identity_spectrum",
    "make_example_spectrum",
    "power_law_spectrum",
    "read_spectrum",
    "write_spectrum",
]


class Spectrum:
    """Positive, non-increasing eigenvalues of a diagonal covariance."""

    __slots__ = ("eigenvalues", "label")

    def __init__(self, eigenvalues, label=""):
        lam = np.array(eigenvalues, dtype=float, copy=True).ravel()
        if lam.size == 0:
            raise DomainError("spectrum must contain at least one eigenvalue")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise DomainError("eigenvalues must be finite and strictly positive")
        if lam.size > 1 and np.any(lam[1:] > lam[:-1]):
            raise DomainError("eigenvalues must be sorted non-increasing")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "label", str(label))

    def __setattr__(self, name, value):
        raise AttributeError("Spectrum is immutable")

    @classmethod
    def from_unsorted(cls, values, label=""):
        return cls(np.sort(np.asarray(values, dtype=float))[::-1], label=label)

    @property
    def p(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def trace(self) -> float:
        return float(np.sum(self.eigenvalues))

    @property
    def trace_sq(self) -> float:
        """tr{Σ²}."""
        return float(np.sum(self.eigenvalues**2))

    def scaled(self, c):
        return Spectrum(self.eigenvalues * c, label=self.label)

    def __len__(self):
        return self.p

    def __eq__(self, other):
        if not isinstance(other, Spectrum):
            return NotImplemented
        return self.label == other.label and np.array_equal(
            self.eigenvalues, other.eigenvalues
        )

    def __hash__(self):
        return hash((self.label, self.eigenvalues.tobytes()))

    def __repr__(self):
        head = ", ".join(f"{v:.4g}" for v in self.eigenvalues[:4])
        more = ", ..." if self.p > 4 else ""
        return f"Spectrum([{head}{more}], p={self.p}, label={self.label!r})"


@dataclass(frozen=True)
class BenignDiagnostics:
    r0_over_n: float
    kstar: int | None
    kstar_over_n: float | None
    tail_ratio: float
    xi: float
    b: float
    n: int


@dataclass(frozen=True)
class HighDimDiagnostics:
    """High-dimension conditions at finite (n, p, m).

    ``≫`` conditions are reported as raw ratios and judged against
    ``threshold``.
    """

    n_le_p_quarter: bool
    p_quarter_margin: float  # p^{1/4} / n
    trace_ratio: float  # tr{Σ} / n^{3/4}
    trace_ok: bool
    log_ratio: float  # n / ln m
    log_ok: bool
    m_ge_p: bool
    m_over_p: float
    threshold: float

    @property
    def all_ok(self) -> bool:
        return self.n_le_p_quarter and self.trace_ok and self.log_ok and self.m_ge_p


def effective_rank(spec: Spectrum, k: int) -> float:
    """r_k = (sum of eigenvalues after index k) / λ_{k+1}, for 0 <= k < p."""
    if not 0 <= k < spec.p:
        raise DomainError(f"k={k} outside [0, {spec.p - 1}]")
    lam = spec.eigenvalues
    return float(np.sum(lam[k:]) / lam[k])


def effective_ranks(spec: Spectrum) -> np.ndarray:
    """All r_k for k = 0..p-1 in one pass."""
    lam = spec.eigenvalues
    tails = np.cumsum(lam[::-1])[::-1]
    return tails / lam


def critical_index(spec: Spectrum, b: float, n: int) -> int | None:
    """Smallest k with r_k >= b*n, or ``None`` when no k in [0, p-1] qualifies."""
    if b <= 0:
        raise DomainError("b must be positive")
    if n < 1:
        raise DomainError("n must be >= 1")
    hits = np.flatnonzero(effective_ranks(spec) >= b * n)
    return int(hits[0]) if hits.size else None


def benign_diagnostics(spec: Spectrum, n: int, b: float = 1.0, xi: float = 0.5):
    lam = spec.eigenvalues
    tr = spec.trace
    kstar = critical_index(spec, b, n)
    tail_ratio = n ** (1.0 + xi) * float(np.sum(lam**2)) / tr**2
    return BenignDiagnostics(
        r0_over_n=effective_rank(spec, 0) / n,
        kstar=kstar,
        kstar_over_n=None if kstar is None else kstar / n,
        tail_ratio=tail_ratio,
        xi=xi,
        b=b,
        n=n,
    )


def highdim_diagnostics(spec: Spectrum, n: int, m: int, threshold: float = 2.0):
    p = spec.p
    log_m = math.log(m)
    return HighDimDiagnostics(
        # integer comparison so p = n^4 is not lost to rounding in p**0.25
        n_le_p_quarter=n**4 <= p,
        p_quarter_margin=p**0.25 / n,
        trace_ratio=spec.trace / n**0.75,
        trace_ok=spec.trace / n**0.75 >= threshold,
        log_ratio=math.inf if log_m == 0 else n / log_m,
        log_ok=log_m == 0 or n / log_m >= threshold,
        m_ge_p=m >= p,
        m_over_p=m / p,
        threshold=threshold,
    )


def identity_spectrum(p: int) -> Spectrum:
    return Spectrum(np.ones(p), label="identity")


def power_law_spectrum(p: int, exponent: float, label=None) -> Spectrum:
    """λ_k = k^{-exponent}, k = 1..p."""
    lam = np.arange(1, p + 1, dtype=float) ** (-exponent)
    return Spectrum(lam, label=label or f"power({exponent:g})")


def _example1(n: int, s: float) -> np.ndarray:
    p = n**5
    k = np.arange(2, p + 1, dtype=float)
    k *= math.pi / (p + 1)
    np.cos(k, out=k)
    k *= -2.0 * s
    k += 1.0 + s * s
    k /= (1.0 + s * s - 2.0 * s * math.cos(math.pi / (p + 1))) * n ** (21 / 5)
    # the tail is increasing in k and stays below 1, so reversing sorts it
    lam = np.empty(p)
    lam[0] = 1.0
    lam[1:] = k[::-1]
    # absorbs 1-ulp reversals from cos near its extremes
    np.minimum.accumulate(lam, out=lam)
    return lam


def make_example_spectrum(kind: str, n_or_p: int, s: float | None = None) -> Spectrum:
    """Build one of the named spectra.

    ``example1`` and ``example2`` take ``n`` and use ``p = n**5``; ``sim1`` and
    ``sim2`` take ``p`` directly.
    """
    if n_or_p < 1:
        raise DomainError("n_or_p must be >= 1")
    if kind == "example1":
        if s is None or not 0 < s < 1:
            raise DomainError(f"example1 needs s in (0, 1), got {s}")
        return Spectrum(_example1(n_or_p, s), label=f"example1(s={s:g},n={n_or_p})")
    if kind == "example2":
        return power_law_spectrum(n_or_p**5, 5 / 6, label=f"example2(n={n_or_p})")
    if kind == "sim1":
        lam = np.full(n_or_p, 0.25)
        lam[0] = 1.0
        return Spectrum(lam, label="sim1")
    if kind == "sim2":
        return power_law_spectrum(n_or_p, 5 / 12, label="sim2")
    raise DomainError(f"unknown spectrum kind {kind!r}")


_KIND_RE = re.compile(r"^\s*([a-z_0-9]+)\s*(?:\(\s*([^)]*?)\s*\))?\s*$")


def spectrum_from_text(text: str, n: int, p: int) -> Spectrum:
    """Resolve a config-style spectrum descriptor.

    Accepted forms: ``sim1``, ``sim2``, ``identity``, ``example1(s)``,
    ``example2``, ``power(a)`` and ``file:<path>``.
    """
    text = text.strip()
    if text.startswith("file:"):
        return read_spectrum(text[5:].strip())
    match = _KIND_RE.match(text)
    if not match:
        raise DomainError(f"cannot parse spectrum {text!r}")
    kind, arg = match.groups()
    if kind in ("sim1", "sim2"):
        return make_example_spectrum(kind, p)
    if kind == "identity":
        return identity_spectrum(p)
    if kind == "power":
        return power_law_spectrum(p, float(arg))
    if kind == "example1":
        return make_example_spectrum(kind, n, s=float(arg) if arg else None)
    if kind == "example2":
        return make_example_spectrum(kind, n)
    raise DomainError(f"unknown spectrum kind {kind!r}")


def write_spectrum(spec: Spectrum, path) -> None:
    lines = []
    if spec.label:
        lines.append(f"# label: {spec.label}")
    lines.extend(
        np.format_float_positional(v, unique=True, trim="0") for v in spec.eigenvalues
    )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_spectrum(path) -> Spectrum:
    """Read a one-eigenvalue-per-line file (``#`` lines are comments)."""
    label = ""
    values = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("label:"):
                label = body[6:].strip()
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise DomainError(f"{path}:{lineno}: not a number: {line!r}") from None
    return Spectrum(values, label=label)
