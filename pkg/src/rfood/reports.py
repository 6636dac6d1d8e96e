"""Report files: kernel verification, spectral-ratio audit and diagnostics."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from rfood.datagen import build_shift_model, sample_inputs, validate_shift
from rfood.errors import DomainError
from rfood.kernels import KERNEL_CSV_HEADER, kernel_linearization_report
from rfood.rng import stream
from rfood.spectra import (
    Spectrum,
    benign_diagnostics,
    critical_index,
    effective_rank,
    highdim_diagnostics,
    power_law_spectrum,
    read_spectrum,
    spectrum_from_text,
)


def _write(text, out_path):
    if out_path is not None:
        Path(out_path).write_text(text, encoding="utf-8")
    return text


def _f(x):
    return f"{x:.17g}"


def kernel_spectrum(spec_kind: str, p: int, n: int) -> Spectrum:
    """Spectrum of dimension p for a kernel check.

    ``example2`` means the Example-2 decay k^{-5/6} truncated at the given p
    instead of p = n⁵; any other kind goes through :func:`spectrum_from_text`.
    """
    if spec_kind == "example2":
        return power_law_spectrum(p, 5 / 6, label="example2-style")
    return spectrum_from_text(spec_kind, n, p)


def kernel_verify(p_values, n: int, spec_kind: str = "example2", seed: int = 0, out_path=None) -> str:
    """One closed-form K vs K̃ row per p; the inputs for each p come from
    ``stream(seed, "inputs", p)`` so rows do not depend on list order."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(KERNEL_CSV_HEADER)
    for p in p_values:
        spec = kernel_spectrum(spec_kind, int(p), n)
        X = sample_inputs(spec, n, seed=stream(seed, "inputs", int(p)))
        writer.writerow(kernel_linearization_report(X, spec).csv_row(spec.p))
    return _write(buf.getvalue(), out_path)


def spectral_ratio_report(baseline_path, shifted_path, out_path=None, tau: float = 1.0, n: int = 1, b: float = 1.0):
    """Per-index eigenvalue ratios plus a ``#`` summary block.

    The summary gives r₀ and k*(b) of both spectra and the shift-constraint
    checks for Σ_δ = diag|λ' - λ| against ``tau`` (checked relative to the
    baseline spectrum).
    """
    base = read_spectrum(baseline_path)
    shifted = read_spectrum(shifted_path)
    if base.p != shifted.p:
        raise DomainError(f"spectrum lengths differ: {base.p} vs {shifted.p}")
    lam, lam2 = base.eigenvalues, shifted.eigenvalues

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "lambda_base", "lambda_shifted", "ratio"])
    for i, (a, c) in enumerate(zip(lam, lam2), 1):
        writer.writerow([i, _f(a), _f(c), _f(c / a)])

    shift = build_shift_model(base, b, n, tau, "custom", alphas=np.abs(lam2 - lam))
    rep = validate_shift(shift, base, b, n)
    lines = [f"# summary: tau={_f(tau)} n={n} b={_f(b)}"]
    for name, spec in (("base", base), ("shifted", shifted)):
        k = critical_index(spec, b, n)
        lines.append(f"# {name}: r0={_f(effective_rank(spec, 0))} kstar={'undefined' if k is None else k}")
    for name, chk in zip(("max_shift", "large_budget", "small_cap"), rep):
        lines.append(f"# check {name}: value={_f(chk.value)} bound={_f(chk.bound)} {'pass' if chk.passed else 'FAIL'}")
    lines.append(f"# shift_constraints: {'pass' if rep.passed else 'FAIL'}")
    return _write(buf.getvalue() + "\n".join(lines) + "\n", out_path)


def diagnose(spec: Spectrum, n: int, m: int, b: float = 1.0, xi: float = 0.5, threshold: float = 2.0) -> str:
    """Benign-overfitting and high-dimension diagnostics as ``key,value`` lines."""
    bd = benign_diagnostics(spec, n, b, xi)
    hd = highdim_diagnostics(spec, n, m, threshold)
    rows = [("spectrum", spec.label or "unnamed"), ("p", spec.p), ("n", n), ("m", m), ("b", _f(b)), ("xi", _f(xi))]
    for key, value in list(vars(bd).items()) + list(vars(hd).items()):
        if key in ("n", "b", "xi"):
            continue
        if isinstance(value, float):
            value = _f(value)
        elif value is None:
            value = "undefined"
        rows.append((key, value))
    rows.append(("highdim_all_ok", hd.all_ok))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    writer.writerows(rows)
    return buf.getvalue()
