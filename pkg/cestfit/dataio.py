"""
On-disk layout of spectra, datasets and result payloads.

A spectrum is a CSV with header ``offset_ppm,z`` and a JSON sidecar (b1, b0,
label). A spectrum set is a directory of such CSVs plus one ``meta.json``;
a dataset is a directory of set directories plus ``manifest.json``. Labels
only ever live in the JSON metadata, never in the value payloads.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, InvalidInput
from .spectra import FieldContext, Spectrum, SpectrumSet, normalize

FLOAT_FORMAT = "%.17g"
SET_META = "meta.json"
MANIFEST = "manifest.json"


def write_json(data, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=False), encoding="utf-8")
    return path


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e


def write_frame(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def _b1_file(b1: float) -> str:
    return f"b1_{b1:g}.csv"


def _write_curve(s: Spectrum, path: Path):
    write_frame(pd.DataFrame({"offset_ppm": s.offsets_ppm, "z": s.z}), path)


def write_spectrum(s: Spectrum, path, ctx: Optional[FieldContext] = None,
                   label: Optional[Dict[str, float]] = None) -> Path:
    """CSV payload at `path` plus a JSON sidecar with the same stem."""
    path = Path(path)
    ctx = ctx or FieldContext()
    _write_curve(s, path)
    write_json({"b1": s.b1, "b0": ctx.b0, "gamma_bar": ctx.gamma_bar, "label": label},
               path.with_suffix(".json"))
    return path


def _read_curve(path: Path, b1: float, ref_offset: float = 5.0) -> Spectrum:
    if not path.is_file():
        raise ConfigError(f"spectrum file not found: {path}")
    frame = pd.read_csv(path, float_precision="round_trip")
    if "offset_ppm" not in frame.columns:
        raise InvalidInput(f"{path}: missing offset_ppm column")
    if "z" in frame.columns:
        return Spectrum(frame["offset_ppm"].to_numpy(float), frame["z"].to_numpy(float), b1)
    if "signal" in frame.columns:
        logging.debug(f"{path}: raw signal, normalizing at {ref_offset} ppm")
        return normalize(frame[["offset_ppm", "signal"]].to_numpy(float), ref_offset, b1)
    raise InvalidInput(f"{path}: expected a z or signal column, got {list(frame.columns)}")


def read_spectrum(path, with_label: bool = True):
    """Returns (spectrum, field context, label)."""
    path = Path(path)
    meta = read_json(path.with_suffix(".json"))
    s = _read_curve(path, float(meta["b1"]), float(meta.get("ref_offset", 5.0)))
    ctx = FieldContext(float(meta.get("b0", 9.4)), float(meta.get("gamma_bar", FieldContext().gamma_bar)))
    return s, ctx, (meta.get("label") if with_label else None)


def write_spectrum_set(sset: SpectrumSet, directory, ctx: Optional[FieldContext] = None) -> Path:
    directory = Path(directory)
    ctx = ctx or FieldContext()
    files = []
    for s in sset.spectra:
        name = _b1_file(s.b1)
        _write_curve(s, directory / name)
        files.append({"file": name, "b1": s.b1})
    write_json({"spectra": files, "b0": ctx.b0, "gamma_bar": ctx.gamma_bar, "label": sset.label},
               directory / SET_META)
    return directory


def read_spectrum_set(directory, with_labels: bool = True) -> SpectrumSet:
    directory = Path(directory)
    meta = read_json(directory / SET_META)
    ref_offset = float(meta.get("ref_offset", 5.0))
    spectra = [_read_curve(directory / item["file"], float(item["b1"]), ref_offset) for item in meta["spectra"]]
    return SpectrumSet(tuple(spectra), meta.get("label") if with_labels else None)


def _set_dirs(directory: Path) -> List[Path]:
    return sorted(p for p in directory.iterdir() if p.is_dir() and (p / SET_META).is_file())


def write_dataset(sets: Sequence[SpectrumSet], directory, ctx: Optional[FieldContext] = None,
                  manifest: Optional[dict] = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, sset in enumerate(sets):
        write_spectrum_set(sset, directory / f"set_{i:05d}", ctx)
    if manifest is not None:
        write_json(manifest, directory / MANIFEST)
    logging.info(f"Wrote {len(sets)} spectrum sets to {directory}")
    return directory


def read_dataset(directory, with_labels: bool = True) -> List[SpectrumSet]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"dataset directory not found: {directory}")
    sets = [read_spectrum_set(d, with_labels) for d in _set_dirs(directory)]
    if not sets:
        raise ConfigError(f"no spectrum sets under {directory}")
    logging.debug(f"Read {len(sets)} spectrum sets from {directory}")
    return sets


def read_field(directory) -> FieldContext:
    """Field context recorded with a dataset (first set's metadata)."""
    first = _set_dirs(Path(directory))
    if not first:
        return FieldContext()
    meta = read_json(first[0] / SET_META)
    return FieldContext(float(meta.get("b0", 9.4)), float(meta.get("gamma_bar", FieldContext().gamma_bar)))


def read_manifest(directory) -> dict:
    return read_json(Path(directory) / MANIFEST)


def read_labels(directory) -> List[Dict[str, float]]:
    return [read_json(d / SET_META).get("label") for d in _set_dirs(Path(directory))]


def phantom_groups(directory) -> Optional[np.ndarray]:
    """Phantom index of every set, if the dataset has a manifest listing them."""
    path = Path(directory) / MANIFEST
    if not path.is_file():
        return None
    return np.array([entry["phantom"] for entry in read_json(path)["sets"]], dtype=int)
