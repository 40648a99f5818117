"""Deterministic serialization: solutions, branches, diagrams, manifests.

Every float is written in 17-significant-digit decimal form, which is enough
to reproduce the exact binary double on reload without committing to a binary
container. Output layout per run: `summary.json` plus `branches/`,
`trajectories/`, `diagrams/` subdirectories.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigInvalid, MissingInput
from .model import ModelParams, params_to_dict
from .shooting import ConvergedSolution
from .spectral import SpectralState

__all__ = [
    "fmt17", "dumps_json17", "write_json17", "save_solution", "load_solution",
    "write_branch_csv", "write_phase_csv", "export_figure_data",
    "ExperimentManifest", "config_hash", "TOOL_VERSION",
]

TOOL_VERSION = "0.1.0"


# ------------------------------------------------------------- float encoding

def fmt17(x: float) -> str:
    """17-significant-digit decimal form; round-trips any float64 exactly."""
    if isinstance(x, float) and (np.isnan(x) or np.isinf(x)):
        raise ValueError(f"non-finite float {x!r} cannot be serialized")
    return format(float(x), ".17g")


def _emit(obj, parts: list) -> None:
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(fmt17(float(obj)))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), parts)
    elif isinstance(obj, complex):
        _emit({"re": obj.real, "im": obj.imag}, parts)
    elif isinstance(obj, dict):
        parts.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                parts.append(",")
            parts.append(json.dumps(str(k)))
            parts.append(":")
            _emit(v, parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, v in enumerate(obj):
            if i:
                parts.append(",")
            _emit(v, parts)
        parts.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps_json17(obj) -> str:
    """JSON text with every float in 17-significant-digit decimal form."""
    parts: list = []
    _emit(obj, parts)
    return "".join(parts)


def write_json17(obj, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json17(obj) + "\n")
    return path


# ---------------------------------------------------------- solution <-> JSON

def save_solution(sol: ConvergedSolution, path: Union[str, Path],
                  params: ModelParams, *, bump=None,
                  extra: Optional[dict] = None) -> Path:
    doc = {
        "format": "pulsekit-solution-1",
        "params": params_to_dict(params, bump),
        "kind": sol.kind,
        "U": sol.U,
        "beta": sol.beta,
        "residual": sol.residual,
        "parameter_tag": sol.parameter_tag,
        "iterations": sol.iterations,
        "time": sol.state.time,
        "coeffs_re": sol.state.coeffs.real,
        "coeffs_im": sol.state.coeffs.imag,
    }
    if extra:
        doc["extra"] = extra
    return write_json17(doc, path)


def load_solution(path: Union[str, Path]) -> tuple[ConvergedSolution, ModelParams]:
    from .model import load_config

    raw = json.loads(Path(path).read_text())
    if raw.get("format") != "pulsekit-solution-1":
        raise ConfigInvalid("format", f"unsupported solution file {path}")
    params, _bump = load_config(raw["params"])
    coeffs = np.asarray(raw["coeffs_re"], dtype=float) + \
        1j * np.asarray(raw["coeffs_im"], dtype=float)
    state = SpectralState(coeffs=coeffs, time=float(raw.get("time", 0.0)))
    sol = ConvergedSolution(
        state=state, kind=raw["kind"], U=float(raw["U"]),
        beta=(None if raw["beta"] is None else float(raw["beta"])),
        residual=float(raw["residual"]),
        parameter_tag=(None if raw.get("parameter_tag") is None
                       else float(raw["parameter_tag"])),
        iterations=int(raw.get("iterations", 0)), probes=raw.get("extra", {}))
    return sol, params


# ------------------------------------------------------------------ CSV sinks

def _cell(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, (float, np.floating)):
        if np.isnan(v) or np.isinf(v):
            return str(float(v))  # CSV tolerates nan/inf; JSON does not
        return fmt17(float(v))
    return str(v)


def write_branch_csv(rows: Sequence[dict], path: Union[str, Path]) -> Path:
    """Branch table with the canonical column order."""
    cols = ["param", "norm", "U", "beta", "n_unstable", "barcode", "event"]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in cols])
    return path


def write_phase_csv(rows: Sequence[dict], path: Union[str, Path]) -> Path:
    cols = ["d", "epsilon", "outcome", "pin_location", "period"]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in cols])
    return path


def write_table_csv(cols: Sequence[str], rows: Sequence[Sequence],
                    path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


# ------------------------------------------------------------- figure exports

_FIGURE_KINDS = ("snaking", "isola", "hiop", "phase", "transition", "basin")


def export_figure_data(kind: str, inputs: dict, outdir: Union[str, Path],
                       stem: Optional[str] = None) -> list[Path]:
    """Column-documented CSV plus a JSON sidecar describing axes and legend."""
    if kind not in _FIGURE_KINDS:
        raise MissingInput(f"unknown figure kind {kind!r}; "
                           f"expected one of {_FIGURE_KINDS}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = stem or kind
    written: list[Path] = []

    def need(key):
        if key not in inputs:
            raise MissingInput(f"figure kind {kind!r} needs input {key!r}")
        return inputs[key]

    sidecar = {"kind": kind, "tool_version": TOOL_VERSION}
    if kind in ("snaking", "isola"):
        branches = need("branches")
        for i, br in enumerate(branches):
            rows = br.to_rows() if hasattr(br, "to_rows") else br
            out_rows = [[r["param"], r["norm"],
                         ("stable" if r.get("n_unstable") == 0 else "unstable"
                          if r.get("n_unstable") != "" else ""),
                         r.get("barcode", "")] for r in rows]
            written.append(write_table_csv(
                ["kappa1", "norm", "stability", "barcode"], out_rows,
                outdir / f"{stem}_branch{i}.csv"))
        sidecar.update({
            "x": "kappa1", "y": "L2 norm of u",
            "legend": "solid stable, dashed unstable",
            "files": [p.name for p in written]})
    elif kind == "hiop":
        branches = need("branches")
        colors = {}
        for i, br in enumerate(branches):
            rows = br.to_rows() if hasattr(br, "to_rows") else br
            out_rows = [[r["param"], r["norm"],
                         ("stable" if r.get("n_unstable") == 0 else "unstable"
                          if r.get("n_unstable") != "" else ""),
                         r.get("barcode", "")] for r in rows]
            label = getattr(br, "label", f"branch{i}")
            written.append(write_table_csv(
                ["epsilon", "norm", "stability", "barcode"], out_rows,
                outdir / f"{stem}_{i}.csv"))
            code = getattr(br, "barcode", "") or ""
            colors[label] = code
        sidecar.update({
            "x": "epsilon", "y": "L2 norm of u",
            "legend": "color keyed by shift index of the barcode",
            "shift_index_colors": colors,
            "hubs": inputs.get("hubs", []),
            "files": [p.name for p in written]})
    elif kind == "phase":
        rows = need("rows")
        written.append(write_phase_csv(rows, outdir / f"{stem}.csv"))
        sidecar.update({
            "x": "epsilon", "y": "d", "cell": "outcome",
            "boundaries": inputs.get("boundaries", []),
            "admissible_epsilon": inputs.get("admissible_epsilon"),
            "files": [written[-1].name]})
    elif kind == "transition":
        curves = need("curves")  # list of dicts: label + (N,2) points
        for i, cur in enumerate(curves):
            pts = np.asarray(cur["points"])
            written.append(write_table_csv(
                ["p", "alpha"], pts.tolist(),
                outdir / f"{stem}_{cur.get('label', i)}.csv"))
        sidecar.update({
            "x": "p", "y": "alpha",
            "curves": [c.get("label", str(i)) for i, c in enumerate(curves)],
            "events": inputs.get("events", []),
            "files": [p.name for p in written]})
    elif kind == "basin":
        part = need("partition")
        labels = np.asarray(part["labels"], dtype=object)
        pg = np.asarray(part["p_grid"])
        ag = np.asarray(part["alpha_grid"])
        rows = [[pg[j], ag[i], labels[i, j]]
                for i in range(len(ag)) for j in range(len(pg))]
        written.append(write_table_csv(["p", "alpha", "outcome"], rows,
                                       outdir / f"{stem}_grid.csv"))
        for name, curve in part.get("boundary", {}).items():
            pts = getattr(curve, "points", curve)
            written.append(write_table_csv(
                ["p", "alpha"], np.asarray(pts).tolist(),
                outdir / f"{stem}_boundary_{name}.csv"))
        sidecar.update({
            "x": "p", "y": "alpha", "cell": "outcome",
            "reverse_destination": {
                k: str(v) for k, v in part.get("reverse_destination", {}).items()},
            "files": [p.name for p in written]})
    sidecar_path = outdir / f"{stem}.json"
    write_json17(sidecar, sidecar_path)
    written.append(sidecar_path)
    return written


# ------------------------------------------------------------------ manifests

def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ExperimentManifest:
    """A reproducible run: command, inputs, grids, outputs, budget."""

    command: str
    config: dict
    parameter_grid: dict = field(default_factory=dict)
    seed_files: list = field(default_factory=list)
    output_dir: str = "out"
    tool_version: str = TOOL_VERSION
    wall_clock_budget: Optional[float] = None

    @property
    def config_digest(self) -> str:
        return config_hash(self.config)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["config_hash"] = self.config_digest
        return d

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ExperimentManifest":
        raw = json.loads(Path(path).read_text())
        raw.pop("config_hash", None)
        known = {f for f in cls.__dataclass_fields__}
        bad = [k for k in raw if k not in known]
        if bad:
            raise ConfigInvalid(bad[0], "unknown manifest field")
        if "command" not in raw or "config" not in raw:
            raise ConfigInvalid("command", "manifest needs command and config")
        return cls(**raw)


def manifest_layout(outdir: Union[str, Path]) -> dict:
    outdir = Path(outdir)
    layout = {
        "root": outdir,
        "summary": outdir / "summary.json",
        "branches": outdir / "branches",
        "trajectories": outdir / "trajectories",
        "diagrams": outdir / "diagrams",
    }
    for key in ("branches", "trajectories", "diagrams"):
        layout[key].mkdir(parents=True, exist_ok=True)
    return layout
