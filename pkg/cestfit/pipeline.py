import json
import logging
import os
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from . import dataio
from .config import DEFAULT_SEED, FieldConfig, ModelConfig, default_model_config, load_document
from .errors import CestError, ConfigError
from .evaluation import (
    EvalConfig,
    evaluate,
    ols_zero_intercept,
    plot_contrast,
    r2_table,
    runtime_bench,
    runtime_table,
)
from .folds import fold_splits
from .models import ModelKind, ModelSpec
from .solvers import FitOutcome, SolverConfig, SolverManager, fit, fit_many
from .spectra import FieldContext, SpectrumSet, b0_correct_report
from .synth import PhantomSpec, generate, inject_b0_shift

DEFAULT_JOBS = int(os.getenv("CESTFIT_JOBS", "1"))
NETWORK = "network"
PARAMS_FILE = "params.csv"
RESULTS_META = "results.json"


class CestPipeline:
    """
    Runs one action per call: synth, preprocess, fit, train, predict, eval
    or bench. Every action returns {"status": ..., "message": ...} plus its
    own summary fields; paths in the payload are plain strings.
    """

    def __init__(self):
        self.logs: List[str] = []
        self.solver_manager = SolverManager()

    def log(self, message: str, level: int = logging.INFO):
        timestamp = time.strftime("%H:%M:%S")
        self.logs.append(f"[{timestamp}] {message}")
        if len(self.logs) > 100:
            self.logs.pop(0)
        logging.log(level, message)

    def process_task(self, payload: Dict[str, Any]) -> Dict[str, Any]:
        action = payload.get("action")
        handler = {
            "synth": self.synth,
            "preprocess": self.preprocess,
            "fit": self.fit,
            "train": self.train,
            "predict": self.predict,
            "eval": self.eval,
            "bench": self.bench,
        }.get(action)
        if handler is None:
            return {"status": "error", "message": f"Unknown action {action!r}"}
        return handler(payload)

    # configuration helpers

    def _model_spec(self, payload, field: Optional[FieldContext] = None) -> ModelSpec:
        if payload.get("bounds"):
            cfg = load_document(payload["bounds"], ModelConfig)
        else:
            field_cfg = FieldConfig(b0=field.b0, gamma_bar=field.gamma_bar) if field else None
            cfg = default_model_config(payload.get("model", "z"), payload.get("gamma_preset", "standard"),
                                       field=field_cfg)
        if payload.get("model") and cfg.kind != ModelKind(payload["model"]):
            raise ConfigError(f"bounds file is for model {cfg.kind.value!r}, not {payload['model']!r}")
        return ModelSpec.from_config(cfg)

    def _solver_config(self, payload) -> SolverConfig:
        cfg = load_document(payload["solver_config"], SolverConfig) if payload.get("solver_config") else SolverConfig()
        if payload.get("seed") is not None:
            cfg = cfg.model_copy(update={"seed": int(payload["seed"])})
        if payload.get("init"):
            cfg = cfg.model_copy(update={"init": payload["init"]})
        return cfg

    @staticmethod
    def _out(payload) -> Path:
        out = Path(payload.get("out") or "out")
        out.mkdir(parents=True, exist_ok=True)
        return out

    # actions

    def synth(self, payload):
        spec = load_document(payload["spec"], PhantomSpec) if payload.get("spec") else PhantomSpec()
        if payload.get("seed") is not None:
            spec = spec.model_copy(update={"seed": int(payload["seed"])})
        dataset = generate(spec)
        if payload.get("b0_shift"):
            dataset = inject_b0_shift(dataset, float(payload["b0_shift"]), jitter_ppm=float(payload.get("b0_jitter", 0.0)))
        out = self._out(payload)
        manifest = dataset.manifest()
        dataio.write_dataset(dataset.sets, out, spec.field.context(), manifest)
        self.log(f"Synthesized {len(dataset.phantoms)} phantoms, {len(dataset)} spectrum sets into {out}")
        return {
            "status": "success",
            "message": f"{len(dataset.phantoms)} phantoms, {len(dataset)} sets, {len(spec.b1)} B1 curves each",
            "phantoms": len(dataset.phantoms),
            "sets": len(dataset),
            "hash": manifest["hash"],
        }

    def preprocess(self, payload):
        data = Path(payload["data"])
        sets = dataio.read_dataset(data)
        window = float(payload.get("search_window", 1.0))
        strict = bool(payload.get("strict", False))
        corrected, shifts = [], []
        for i, sset in enumerate(sets):
            spectra = []
            for s in sset.spectra:
                report = b0_correct_report(s, window, strict)
                spectra.append(report.spectrum)
                shifts.append({"set": i, "b1": s.b1, "shift_ppm": report.shift_ppm, "clamped": len(report.clamped)})
            corrected.append(SpectrumSet(tuple(spectra), sset.label))
        out = self._out(payload)
        manifest = dataio.read_manifest(data) if (data / dataio.MANIFEST).is_file() else None
        dataio.write_dataset(corrected, out, dataio.read_field(data), manifest)
        dataio.write_frame(pd.DataFrame(shifts), out / "b0_shifts.csv")
        mean_shift = float(np.mean([row["shift_ppm"] for row in shifts]))
        clamped = int(sum(row["clamped"] for row in shifts))
        self.log(f"B0-corrected {len(corrected)} sets, mean shift {mean_shift:+.4f} ppm, {clamped} samples clamped")
        return {"status": "success", "message": f"corrected {len(corrected)} sets, {clamped} samples clamped",
                "mean_shift_ppm": mean_shift, "clamped": clamped}

    def fit(self, payload):
        if payload.get("solver") == NETWORK:
            trained = self.train(payload)
            if trained["status"] != "success":
                return trained
            return self.predict({**payload, "checkpoints": trained["checkpoints"]})

        data = Path(payload["data"])
        sets = dataio.read_dataset(data, with_labels=False)
        spec = self._model_spec(payload, dataio.read_field(data))
        solver = payload.get("solver", "lbfgsb")
        self.solver_manager.get_solver(solver)
        cfg = self._solver_config(payload)
        out = self._out(payload)
        self._write_results_meta(out, spec, solver, data)

        rows_path = out / "fits.jsonl"
        outcomes: List[FitOutcome] = []
        with open(rows_path, "w", encoding="utf-8") as rows:
            def flush(outcome: FitOutcome):
                outcomes.append(outcome)
                rows.write(json.dumps(_outcome_row(outcome)) + "\n")
                rows.flush()

            try:
                fit_many(spec, sets, solver, cfg, jobs=int(payload.get("jobs") or DEFAULT_JOBS), on_result=flush)
            except KeyboardInterrupt:
                self._write_params(out, spec, outcomes)
                self.log(f"Interrupted after {len(outcomes)}/{len(sets)} fits; partial results in {out}",
                         logging.WARNING)
                raise

        self._write_params(out, spec, outcomes)
        converged = sum(1 for o in outcomes if o.ok and o.result.converged)
        failed = sum(1 for o in outcomes if not o.ok)
        self.log(f"{solver}/{spec.kind.value}: {converged}/{len(outcomes)} converged, {failed} failed")
        return {
            "status": "success",
            "message": f"{len(outcomes)} fits, {converged} converged, {failed} failed",
            "fits": len(outcomes),
            "converged": converged,
            "failed": failed,
            "summary": _param_summary(spec, outcomes),
        }

    def train(self, payload):
        from .neural import NetworkConfig, TrainConfig, loss_history_frame, save_state, train

        data = Path(payload["data"])
        sets = dataio.read_dataset(data, with_labels=False)
        spec = self._model_spec(payload, dataio.read_field(data))
        inputs, targets = self._targets(spec, sets)

        preset = payload.get("preset", "desk")
        net_cfg = NetworkConfig.preset(preset)
        overrides = {k: payload[k] for k in ("epochs", "folds", "batch_size", "learning_rate") if payload.get(k)}
        overrides["seed"] = int(payload["seed"]) if payload.get("seed") is not None else DEFAULT_SEED
        train_cfg = TrainConfig.preset(spec.kind, preset, **overrides)

        out = self._out(payload)
        checkpoints = out / "checkpoints"
        history: List = []
        try:
            folds = train(targets, spec, inputs, net_cfg, train_cfg, on_epoch=history.append)
        except KeyboardInterrupt:
            dataio.write_frame(pd.DataFrame([vars(r) for r in history]), out / "loss_history.csv")
            self.log(f"Training interrupted after {len(history)} epochs; loss history flushed", logging.WARNING)
            raise
        for fold in folds:
            save_state(fold.state, checkpoints / f"fold_{fold.fold}.pt", spec, fold.test_index)
        dataio.write_frame(loss_history_frame(folds), out / "loss_history.csv")
        first = float(np.mean([f.history[0].train_loss for f in folds]))
        last = float(np.mean([f.history[-1].train_loss for f in folds]))
        self.log(f"Trained {len(folds)} folds x {train_cfg.epochs} epochs: loss {first:.3e} -> {last:.3e}")
        return {
            "status": "success",
            "message": f"{len(folds)} folds trained, loss {first:.3e} -> {last:.3e}",
            "checkpoints": str(checkpoints),
            "initial_loss": first,
            "final_loss": last,
        }

    def predict(self, payload):
        from .neural import load_state, predict

        data = Path(payload["data"])
        sets = dataio.read_dataset(data, with_labels=False)
        paths = sorted(Path(payload["checkpoints"]).glob("fold_*.pt"))
        if not paths:
            raise ConfigError(f"no fold checkpoints in {payload['checkpoints']}")

        states = [load_state(p) for p in paths]
        spec = ModelSpec.from_config(ModelConfig.model_validate(states[0][1]["model"]))
        inputs, targets = self._targets(spec, sets)
        params = np.full((len(sets), len(spec.bounds)), np.nan)
        fold_of = np.full(len(sets), -1)
        for fold, (state, meta) in enumerate(states):
            index = np.asarray(meta.get("test_index") or range(len(sets)), dtype=int)
            if index.max(initial=-1) >= len(sets):
                raise ConfigError(f"checkpoint fold {fold} was trained on a larger dataset than {data}")
            params[index], _ = predict(state, targets[index], spec, inputs)
            fold_of[index] = fold

        out = self._out(payload)
        self._write_results_meta(out, spec, NETWORK, data)
        frame = pd.DataFrame(params, columns=list(spec.fitted_names))
        frame.insert(0, "fold", fold_of)
        frame.insert(0, "index", np.arange(len(sets)))
        dataio.write_frame(frame, out / PARAMS_FILE)
        self.log(f"Predicted {len(sets)} sets with {len(states)} fold networks")
        return {"status": "success", "message": f"predicted {len(sets)} sets", "sets": len(sets)}

    def eval(self, payload):
        data = Path(payload["data"])
        results = Path(payload["results"])
        meta = dataio.read_json(results / RESULTS_META)
        spec = ModelSpec.from_config(ModelConfig.model_validate(meta["model"]))
        frame = pd.read_csv(results / PARAMS_FILE, float_precision="round_trip")
        params = frame[list(spec.fitted_names)].to_numpy(float)
        labels = dataio.read_labels(data)
        if len(labels) != len(params) or any(label is None for label in labels):
            raise ConfigError(f"{data} has {len(labels)} labeled sets for {len(params)} result rows")

        cfg = EvalConfig(**{k: payload[k] for k in ("grouping", "std", "contrast") if payload.get(k)})
        if "fold" in frame.columns and (frame["fold"] >= 0).all():
            fold_ids = frame["fold"].to_numpy(int)
            splits = [(np.flatnonzero(fold_ids != f), np.flatnonzero(fold_ids == f)) for f in np.unique(fold_ids)]
        else:
            seed = int(payload["seed"]) if payload.get("seed") is not None else DEFAULT_SEED
            splits = fold_splits(len(params), int(payload.get("folds") or 5), seed)
        groups = dataio.phantom_groups(data)
        report = evaluate(params, spec, labels, splits, meta["method"], cfg, groups)

        out = self._out(payload)
        dataio.write_json(report.as_dict(), out / "eval_report.json")
        table = r2_table([report])
        (out / "eval_table.txt").write_text(table + "\n", encoding="utf-8")
        if payload.get("plot"):
            self._plot(out, spec, params, labels, cfg)
        self.log(f"Evaluated {meta['method']}/{spec.kind.value} on {len(params)} rows")
        return {"status": "success", "message": table, "report": report.as_dict()}

    def bench(self, payload):
        from .neural import NetworkConfig, NetworkState, TrainConfig, predict

        data = Path(payload["data"])
        sets = dataio.read_dataset(data, with_labels=False)
        limit = payload.get("limit")
        if limit:
            sets = sets[:int(limit)]
        field = dataio.read_field(data)
        models = payload.get("models") or [k.value for k in ModelKind]
        methods = payload.get("solvers") or ["nelder-mead", "powell", "lbfgsb", NETWORK]
        repeats = int(payload.get("repeats", 3))
        cfg = self._solver_config(payload)

        timings: Dict[str, Dict[str, Any]] = {}
        for kind in models:
            spec = self._model_spec({**payload, "model": kind, "bounds": None}, field)
            for method in methods:
                if method == NETWORK:
                    inputs, targets = self._targets(spec, sets)
                    state = NetworkState.create(targets.shape[1], targets.shape[2], len(spec.bounds),
                                                NetworkConfig.preset(payload.get("preset", "desk")),
                                                TrainConfig.preset(spec.kind, payload.get("preset", "desk")))
                    stats = runtime_bench(lambda x: predict(state, x, spec, inputs), targets, repeats, batched=True)
                else:
                    stats = runtime_bench(lambda s: fit(spec, s, method, cfg), sets, repeats)
                timings.setdefault(method, {})[kind] = stats
                self.log(f"{method}/{kind}: {stats.mean_ms:.3f} ± {stats.std_ms:.3f} ms per datapoint")

        table = runtime_table(timings)
        out = self._out(payload)
        (out / "bench_table.txt").write_text(table + "\n", encoding="utf-8")
        dataio.write_json({m: {k: vars(s) for k, s in row.items()} for m, row in timings.items()},
                          out / "bench.json")
        return {"status": "success", "message": table}

    # helpers

    def _targets(self, spec: ModelSpec, sets):
        inputs, first = spec.prepare_targets(sets[0])
        targets = np.stack([first] + [spec.prepare_targets(s)[1] for s in sets[1:]])
        return inputs, targets

    def _write_results_meta(self, out: Path, spec: ModelSpec, method: str, data: Path):
        dataio.write_json({"method": method, "data": str(data), "model": spec.to_config().model_dump(mode="json")},
                          out / RESULTS_META)

    def _write_params(self, out: Path, spec: ModelSpec, outcomes: List[FitOutcome]):
        rows = []
        for o in outcomes:
            row = {"index": o.index}
            if o.ok:
                row.update(zip(spec.fitted_names, (float(v) for v in o.result.params)))
                row.update(objective=o.result.objective_value, converged=o.result.converged,
                           termination=o.result.termination, error="")
            else:
                row.update({name: np.nan for name in spec.fitted_names})
                row.update(objective=np.nan, converged=False, termination="error", error=o.error)
            rows.append(row)
        columns = ["index", *spec.fitted_names, "objective", "converged", "termination", "error"]
        dataio.write_frame(pd.DataFrame(rows, columns=columns), out / PARAMS_FILE)

    def _plot(self, out: Path, spec: ModelSpec, params, labels, cfg: EvalConfig):
        from .evaluation import extract_contrast

        pools = spec.pool_names
        for i, pool in enumerate(pools):
            other = pools[1 - i] if len(pools) == 2 else pool
            x = np.array([label[pool] for label in labels])
            c = np.array([label[other] for label in labels])
            y = extract_contrast(params, spec, pool, cfg.contrast)
            keep = np.isfinite(y)
            slope = ols_zero_intercept(x[keep], y[keep])
            plot_contrast(x, y, c, slope, out / f"contrast_{pool}.svg", solute=pool, other=other)


def _outcome_row(outcome: FitOutcome) -> Dict[str, Any]:
    row: Dict[str, Any] = {"index": outcome.index}
    if outcome.ok:
        row.update(outcome.result.as_dict())
    else:
        row.update(converged=False, termination="error", error=outcome.error)
    return row


def _param_summary(spec: ModelSpec, outcomes: List[FitOutcome]) -> Dict[str, Dict[str, float]]:
    fitted = np.array([o.result.params for o in outcomes if o.ok])
    if len(fitted) == 0:
        return {}
    return {
        name: {"median": float(np.median(fitted[:, j])), "min": float(fitted[:, j].min()),
               "max": float(fitted[:, j].max())}
        for j, name in enumerate(spec.fitted_names)
    }


def run(payload: Dict[str, Any]) -> Dict[str, Any]:
    """Convenience wrapper: one action, one fresh pipeline; CestErrors become error results."""
    try:
        return CestPipeline().process_task(payload)
    except CestError as e:
        logging.error(f"{payload.get('action')}: {e}")
        return {"status": "error", "message": str(e)}
