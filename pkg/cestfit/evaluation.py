"""
Quantitative evaluation of fitted parameters: zero-intercept regression of
contrast against known concentration, R² per fold, and per-datapoint
runtime.
"""
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .errors import DegenerateDesign, DegenerateTarget, IndexOutOfRange, InsufficientData, LengthMismatch
from .models import ModelKind, ModelSpec, area_under_curve

VOLUME_VOXELS = 10 * 10 * 10


class EvalConfig(BaseModel):
    grouping: Literal["pixel", "phantom"] = "pixel"
    std: Literal["sample", "population"] = "sample"
    contrast: Literal["amplitude", "auc"] = "amplitude"

    @property
    def ddof(self) -> int:
        return 1 if self.std == "sample" else 0


@dataclass
class SoluteScore:
    solute: str
    slope: float
    r2_mean: float
    r2_std: float
    fold_r2: List[float] = field(default_factory=list)
    fold_slopes: List[float] = field(default_factory=list)


@dataclass
class RuntimeStats:
    mean_ms: float
    std_ms: float
    datapoints: int
    repeats: int


@dataclass
class EvalReport:
    method: str
    model: str
    solutes: List[SoluteScore]
    runtime: Optional[RuntimeStats] = None
    failed_rows: int = 0

    def score(self, solute: str) -> SoluteScore:
        for s in self.solutes:
            if s.solute == solute:
                return s
        raise KeyError(solute)

    def as_dict(self) -> dict:
        return asdict(self)


def extract_contrast(params, spec: ModelSpec, pool, mode: str = "amplitude") -> np.ndarray:
    """
    Per-sample contrast of one solute pool: the amplitude (or, with
    mode="auc", the area under the line in rad/s) for the Lorentzian model,
    f/R1a otherwise. The Lorentzian water line is never a contrast.

    Args:
        params: fitted vectors (N, P) or a single vector (P,)
        pool: pool name or 0-based pool index
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    names = spec.pool_names
    if isinstance(pool, str):
        if pool not in names:
            raise IndexOutOfRange(f"unknown pool {pool!r}; model pools are {names}")
        index = names.index(pool)
    else:
        index = int(pool)
        if not (0 <= index < len(names)):
            raise IndexOutOfRange(f"pool index {index} out of range for {len(names)} pools")
    name = names[index]

    if spec.kind == ModelKind.LORENTZIAN:
        if mode == "auc":
            ctx = spec.model.ctx
            return np.array([area_under_curve(spec.unflatten(row), index, ctx) if np.all(np.isfinite(row)) else np.nan
                             for row in params])
        column = f"{name}.amplitude"
    else:
        column = f"{name}.f_over_r1a"
    values = spec.columns(params)[column]
    return np.broadcast_to(np.asarray(values, dtype=float), (len(params),)).copy()


def ols_zero_intercept(x, y) -> float:
    """Least-squares slope of y = s * x through the origin."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} concentrations but {len(y)} contrasts")
    if len(x) < 2:
        raise InsufficientData("regression needs at least 2 points")
    sxx = float(np.dot(x, x))
    if sxx == 0:
        raise DegenerateDesign("all concentrations are zero")
    return float(np.dot(x, y)) / sxx


def r2_zero_intercept(y, y_hat) -> float:
    """1 - Σ(y - ŷ)² / Σy²; negative when the fit is worse than ŷ = 0."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if len(y) != len(y_hat):
        raise LengthMismatch(f"{len(y)} targets but {len(y_hat)} predictions")
    if len(y) < 2:
        raise InsufficientData("R² needs at least 2 points")
    syy = float(np.dot(y, y))
    if syy == 0:
        raise DegenerateTarget("all contrasts are zero")
    residual = y - y_hat
    return 1.0 - float(np.dot(residual, residual)) / syy


def cross_val_summary(values: Sequence[float], ddof: int = 1) -> Tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        raise InsufficientData("a fold summary needs at least 2 folds")
    return float(np.mean(values)), float(np.std(values, ddof=ddof))


def _group_means(x, y, groups):
    keys = np.unique(groups)
    return (np.array([x[groups == k].mean() for k in keys]),
            np.array([y[groups == k].mean() for k in keys]))


def score_solute(solute: str, concentrations, contrasts, splits: Sequence[Tuple[np.ndarray, np.ndarray]],
                 cfg: Optional[EvalConfig] = None, groups=None) -> SoluteScore:
    """Regression and R² on every fold's test split, summarized over folds."""
    cfg = cfg or EvalConfig()
    x_all = np.asarray(concentrations, dtype=float)
    y_all = np.asarray(contrasts, dtype=float)
    fold_r2, fold_slopes = [], []
    for _, test in splits:
        keep = test[np.isfinite(y_all[test])]
        if len(keep) < len(test):
            logging.warning(f"{solute}: dropping {len(test) - len(keep)} failed rows from a fold")
        x, y = x_all[keep], y_all[keep]
        if cfg.grouping == "phantom" and groups is not None:
            x, y = _group_means(x, y, np.asarray(groups)[keep])
        slope = ols_zero_intercept(x, y)
        fold_slopes.append(slope)
        fold_r2.append(r2_zero_intercept(y, slope * x))
    mean, std = cross_val_summary(fold_r2, cfg.ddof)
    return SoluteScore(solute, float(np.mean(fold_slopes)), mean, std, fold_r2, fold_slopes)


def evaluate(params, spec: ModelSpec, labels: Sequence[Dict[str, float]], splits, method: str,
             cfg: Optional[EvalConfig] = None, groups=None) -> EvalReport:
    cfg = cfg or EvalConfig()
    params = np.atleast_2d(np.asarray(params, dtype=float))
    failed = int(np.sum(~np.all(np.isfinite(params), axis=1)))
    scores = []
    for pool in spec.pool_names:
        concentrations = [label[pool] for label in labels]
        contrasts = extract_contrast(params, spec, pool, cfg.contrast)
        scores.append(score_solute(pool, concentrations, contrasts, splits, cfg, groups))
        logging.info(f"{method}/{spec.kind.value} {pool}: R² {scores[-1].r2_mean:.4f} ± {scores[-1].r2_std:.4f}")
    return EvalReport(method, spec.kind.value, scores, failed_rows=failed)


def runtime_bench(fn: Callable, items: Sequence, repeats: int = 3, warmup: int = 2,
                  batched: bool = False) -> RuntimeStats:
    """
    Wall-clock milliseconds per datapoint over `repeats` runs. Per-item
    methods (solvers) are called once per item; batched methods (the
    network) once per run on the whole batch. Warm-up calls are discarded.
    """
    if len(items) == 0:
        raise InsufficientData("nothing to benchmark")
    for _ in range(warmup):
        if batched:
            fn(items)
        else:
            fn(items[0])
    per_point = []
    for _ in range(repeats):
        started = time.perf_counter()
        if batched:
            fn(items)
        else:
            for item in items:
                fn(item)
        per_point.append((time.perf_counter() - started) * 1e3 / len(items))
    std = float(np.std(per_point, ddof=1)) if repeats > 1 else 0.0
    return RuntimeStats(float(np.mean(per_point)), std, len(items), repeats)


def volume_seconds(stats: RuntimeStats, voxels: int = VOLUME_VOXELS) -> float:
    return stats.mean_ms * voxels / 1e3


def r2_table(reports: Sequence[EvalReport]) -> str:
    """Rows: methods. Columns: model / solute, cells mean ± std."""
    cells: Dict[str, Dict[str, str]] = {}
    for report in reports:
        row = cells.setdefault(report.method, {})
        for s in report.solutes:
            row[f"{report.model} {s.solute}"] = f"{s.r2_mean:.4f} ± {s.r2_std:.4f}"
    return pd.DataFrame.from_dict(cells, orient="index").fillna("-").to_string()


def runtime_table(timings: Dict[str, Dict[str, RuntimeStats]], reference: str = "lbfgsb",
                  network: str = "network") -> str:
    """Rows: methods, columns: models, cells mean ± std ms per datapoint, plus speedup and volume rows."""
    cells = {method: {model: f"{s.mean_ms:.3f} ± {s.std_ms:.3f}" for model, s in row.items()}
             for method, row in timings.items()}
    if reference in timings and network in timings:
        cells[f"speedup {network} vs {reference}"] = {
            model: f"{timings[reference][model].mean_ms / timings[network][model].mean_ms:.1f}x"
            for model in timings[network] if model in timings[reference] and timings[network][model].mean_ms > 0
        }
    for method, row in timings.items():
        cells[f"{method} 10x10x10 volume (s)"] = {model: f"{volume_seconds(s):.2f}" for model, s in row.items()}
    return pd.DataFrame.from_dict(cells, orient="index").fillna("-").to_string()


def plot_contrast(concentrations, contrasts, other_concentrations, slope: float, path,
                  solute: str = "", other: str = ""):
    """
    SVG scatter of contrast against concentration: one point per phantom
    (mean ± std over its samples), colored by the other solute's
    concentration, with the zero-intercept regression line.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = np.asarray(concentrations, dtype=float)
    y = np.asarray(contrasts, dtype=float)
    c = np.asarray(other_concentrations, dtype=float)
    keep = np.isfinite(y)
    x, y, c = x[keep], y[keep], c[keep]

    fig, ax = plt.subplots(figsize=(5, 4))
    pairs = sorted(set(zip(x.tolist(), c.tolist())))
    colors = plt.cm.viridis(np.linspace(0, 1, max(len(np.unique(c)), 1)))
    color_of = {v: colors[i] for i, v in enumerate(np.unique(c))}
    for xv, cv in pairs:
        sel = (x == xv) & (c == cv)
        ax.errorbar(xv, y[sel].mean(), yerr=y[sel].std(), fmt="o", color=color_of[cv], capsize=3)
    for cv, color in color_of.items():
        ax.plot([], [], "o", color=color, label=f"{other} {cv:g} mM")
    grid = np.linspace(0, x.max() if len(x) else 1.0, 50)
    ax.plot(grid, slope * grid, "k--", label=f"slope {slope:.3g}")
    ax.set_xlabel(f"{solute} concentration (mM)")
    ax.set_ylabel("contrast")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path
