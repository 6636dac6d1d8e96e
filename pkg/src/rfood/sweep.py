"""Seeded Monte Carlo sweeps over the feature count m.

Each (m, trial) task is independent and derives all of its randomness from
``(master_seed, stream, trial, ...)``; the aggregator only reads results by
index, so the output does not depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from rfood.config import ExperimentConfig
from rfood.datagen import (
    GroundTruth,
    NoiseModel,
    build_shift_model,
    make_beta,
    sample_inputs,
    sample_labels,
    sample_shift,
)
from rfood.errors import DomainError
from rfood.features import (
    estimate_theta_star,
    feature_map,
    fit,
    sample_feature_model,
    theta_star_linear,
)
from rfood.rng import stream
from rfood.spectra import spectrum_from_text

log = logging.getLogger("rfood")

CSV_HEADER = [
    "setting", "activation", "n", "p", "m", "K", "trials",
    "metric", "model_kind", "mean", "stderr", "failures",
]
MAX_FAILURE_RATE = 0.05


class SweepAborted(RuntimeError):
    pass


class SweepRow(NamedTuple):
    setting: str
    activation: str
    n: int
    p: int
    m: int
    K: int
    trials: int
    metric: str
    model_kind: str
    mean: float
    stderr: float
    failures: int


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


@dataclass
class SweepResult:
    rows: list

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def cell(self, m, metric, model_kind) -> SweepRow:
        for row in self.rows:
            if row.m == m and row.metric == metric and row.model_kind == model_kind:
                return row
        raise KeyError((m, metric, model_kind))

    def improvement_ratios(self, metric="ood_mse") -> dict:
        """R_K per m from the aggregated single-average and ensemble means."""
        out = {}
        for row in self.rows:
            if row.metric == metric and row.model_kind == "ensemble":
                single = self.cell(row.m, metric, "single_avg").mean
                out[row.m] = 1.0 - row.mean / single
        return out


@lru_cache(maxsize=8)
def _resolve(cfg: ExperimentConfig):
    spec = spectrum_from_text(cfg.spectrum, cfg.n, cfg.p)
    if spec.p != cfg.p:
        raise DomainError(f"spectrum {cfg.spectrum!r} has length {spec.p}, config p = {cfg.p}")
    beta = make_beta(cfg.p, cfg.beta, seed=stream(cfg.master_seed, "beta"))
    g = GroundTruth(cfg.ground_truth, beta)
    noise = NoiseModel(cfg.sigma, cfg.eta_dist)
    kind, arg = cfg.shift_kind
    if kind == "none":
        shift = None
    elif kind == "isotropic":
        shift = build_shift_model(spec, cfg.b, cfg.n, arg, "isotropic", c=arg)
    else:
        shift = build_shift_model(spec, cfg.b, cfg.n, arg, "assumption2_default")
    return spec, g, noise, shift


def _theta_star(cfg, fm, g, spec, trial, m_index, r):
    if fm.activation == "identity" and g.kind == "linear":
        return theta_star_linear(fm, spec, g.beta)
    seed = stream(cfg.master_seed, "population", trial, m_index, r)
    return estimate_theta_star(fm, g, spec, seed=seed).theta


def run_trial(cfg: ExperimentConfig, m_index: int, trial: int):
    """All metrics for one (m, trial) cell.

    Returns an array of shape (len(metrics), 2) holding the single-model
    average and the ensemble value, or ``None`` if the trial failed
    numerically.
    """
    spec, g, noise, shift = _resolve(cfg)
    m = cfg.m_values[m_index]
    n, n_test = cfg.n, cfg.n_test

    X = sample_inputs(spec, n, noise, seed=stream(cfg.master_seed, "inputs", trial))
    y = sample_labels(g, X, noise, seed=stream(cfg.master_seed, "noise", trial))
    X_test = sample_inputs(spec, n_test, noise, seed=stream(cfg.master_seed, "test_inputs", trial))
    eps = noise.sigma * stream(cfg.master_seed, "test_noise", trial).standard_normal(n_test)
    if shift is None:
        X_ood = X_test
    else:
        X_ood = X_test + sample_shift(shift, n_test, seed=stream(cfg.master_seed, "test_shift", trial))
    y_id = g(X_test) + eps
    y_ood = g(X_ood) + eps

    need_star = any(metric.endswith("_excess") for metric in cfg.metrics)
    preds = {"id": [], "ood": []}
    refs = {"id": [], "ood": []}
    try:
        with np.errstate(all="raise"):
            for r in range(cfg.K):
                fm = sample_feature_model(
                    cfg.p, m, cfg.activation, seed=stream(cfg.master_seed, "features", trial, m_index, r)
                )
                model = fit(fm, X, y)
                F_id = feature_map(fm, X_test)
                F_ood = F_id if X_ood is X_test else feature_map(fm, X_ood)
                preds["id"].append(F_id @ model.theta_hat)
                preds["ood"].append(F_ood @ model.theta_hat)
                if need_star:
                    theta_star = _theta_star(cfg, fm, g, spec, trial, m_index, r)
                    refs["id"].append(F_id @ theta_star)
                    refs["ood"].append(F_ood @ theta_star)
    except (np.linalg.LinAlgError, FloatingPointError, DomainError) as err:
        log.debug("trial %d at m=%d failed: %s", trial, m, err)
        return None

    out = np.empty((len(cfg.metrics), 2))
    for i, metric in enumerate(cfg.metrics):
        domain, kind = metric.split("_")
        P = np.array(preds[domain])
        if kind == "mse":
            target = np.broadcast_to(y_id if domain == "id" else y_ood, P.shape)
        else:
            target = np.array(refs[domain])
        single = np.mean((P - target) ** 2, axis=1).mean()
        ens = np.mean((P.mean(axis=0) - target.mean(axis=0)) ** 2)
        out[i] = single, ens
    if not np.all(np.isfinite(out)):
        return None
    return out


def _run_chunk(args):
    cfg, tasks = args
    return [run_trial(cfg, mi, t) for mi, t in tasks]


def run_sweep(cfg: ExperimentConfig, workers: int = 1, chunk_size: int = 25) -> SweepResult:
    """Run every (m, trial) task and aggregate per (m, metric, model kind)."""
    tasks = [(mi, t) for mi in range(len(cfg.m_values)) for t in range(cfg.trials)]
    chunks = [tasks[i:i + chunk_size] for i in range(0, len(tasks), chunk_size)]
    if workers <= 1:
        results = [r for chunk in chunks for r in _run_chunk((cfg, chunk))]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for batch in pool.map(_run_chunk, [(cfg, c) for c in chunks]) for r in batch]

    rows = []
    for mi, m in enumerate(cfg.m_values):
        cell = results[mi * cfg.trials:(mi + 1) * cfg.trials]
        ok = [r for r in cell if r is not None]
        failures = len(cell) - len(ok)
        if failures > MAX_FAILURE_RATE * cfg.trials:
            raise SweepAborted(f"{failures}/{cfg.trials} trials failed at m={m}")
        if not ok:
            raise SweepAborted(f"no successful trials at m={m}")
        stack = np.stack(ok)  # trials x metrics x 2
        T = stack.shape[0]
        means = stack.mean(axis=0)
        if T > 1:
            errs = stack.std(axis=0, ddof=1) / np.sqrt(T)
        else:
            errs = np.zeros_like(means)
        for i, metric in enumerate(cfg.metrics):
            for j, kind in enumerate(("single_avg", "ensemble")):
                rows.append(SweepRow(
                    cfg.setting_name, cfg.activation, cfg.n, cfg.p, m, cfg.K, T,
                    metric, kind, float(means[i, j]), float(errs[i, j]), failures,
                ))
    return SweepResult(rows)
