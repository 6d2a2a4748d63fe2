"""Batch entry point: ``galerkin-bilinear --config run.json``.

The configuration is one JSON document; its ``command`` field selects
``simulate``, ``estimate`` or ``converge``. See ``docs/config.md`` for the
schema. Exit codes: 0 success, 2 configuration/usage error, 3 numerical
accuracy failure, 4 threshold not met.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .controls import Control, control_from_dict, random_control_family
from .estimates import coupling_constant, growth_check, kato_constants
from .exceptions import AccuracyError, ModelDiagnosticsError
from .galerkin_harness import FamilySpec, find_truncation, heldout_validation
from .propagator import propagate, trajectory_to_csv
from .spectral_model import (Potential, build_box_model, build_torus_model, eigenstate,
                             model_to_json, rebuild)
from ._fmt import fmt_float, rows_to_csv

log = logging.getLogger("galerkin_bilinear")

EXIT_OK, EXIT_CONFIG, EXIT_ACCURACY, EXIT_THRESHOLD = 0, 2, 3, 4
COMMANDS = ("simulate", "estimate", "converge")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    model: dict
    controls: dict = field(default_factory=dict)
    states: dict = field(default_factory=dict)
    norms: list = field(default_factory=list)
    record: object = 101
    out: Path = Path("out")
    seed: Optional[int] = None
    converge: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# config parsing


def _read_json(path: Path, what: str):
    if not path.is_file():
        raise ConfigError(f"{what} file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {path} is not valid JSON: {exc}") from None


def _safe_id(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.+-]", "_", str(text))


def _model_from_config(spec: dict, dim: Optional[int] = None):
    geometry = spec.get("geometry", "dirichlet_box")
    n = int(dim if dim is not None else spec.get("dim", 0))
    v = Potential.from_dict(spec.get("V"))
    w = Potential.from_dict(spec.get("W"))
    qp = spec.get("quad_points")
    if geometry == "dirichlet_box":
        return build_box_model(n, v, w, qp)
    if geometry == "flat_torus":
        return build_torus_model(n, v, w, qp, shift=float(spec.get("shift", 1.0)))
    raise ConfigError(f"unknown geometry {geometry!r}")


def _controls_from_config(entries, family, seed, base: Path) -> dict:
    out = {}
    for i, entry in enumerate(entries or []):
        if isinstance(entry, str):
            entry = {"file": entry}
        cid = _safe_id(entry.get("id", f"c{i:03d}"))
        if "file" in entry:
            path = Path(entry["file"])
            if not path.is_absolute():
                path = base / path
            doc = _read_json(path, "control")
        elif "control" in entry:
            doc = entry["control"]
        else:
            raise ConfigError(f"control entry {i} has neither 'file' nor 'control'")
        try:
            out[cid] = control_from_dict(doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid control {cid}: {exc}") from None
    if family:
        if seed is None:
            raise ConfigError("a control family needs a seed")
        members = random_control_family(int(seed), float(family["tv_budget"]),
                                        float(family.get("horizon", 1.0)),
                                        int(family.get("pieces", 8)), int(family.get("count", 4)),
                                        amplitude_cap=family.get("amplitude_cap"))
        for i, c in enumerate(members):
            out[f"fam{i:03d}"] = c
    return out


def _states_from_config(entries, dim: int, base: Path) -> dict:
    out = {}
    for i, entry in enumerate(entries or []):
        if isinstance(entry, int):
            entry = {"index": entry}
        if "index" in entry:
            sid = _safe_id(entry.get("id", f"phi{entry['index']}"))
            out[sid] = eigenstate(dim, int(entry["index"]))
            continue
        sid = _safe_id(entry.get("id", f"psi{i}"))
        if "file" in entry:
            path = Path(entry["file"])
            if not path.is_absolute():
                path = base / path
            coeffs = _read_json(path, "state")
        else:
            coeffs = entry.get("coefficients")
        arr = np.asarray(coeffs, dtype=float)
        vec = arr[:, 0] + 1j * arr[:, 1] if arr.ndim == 2 else arr.astype(complex)
        if vec.size > dim:
            raise ConfigError(f"state {sid} has {vec.size} coefficients for dim {dim}")
        full = np.zeros(dim, dtype=complex)
        full[:vec.size] = vec
        out[sid] = full
    return out


def load_config(path: Path, out: Optional[str] = None, seed: Optional[int] = None,
                eps: Optional[float] = None) -> RunConfig:
    raw = _read_json(path, "config")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    command = raw.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"config 'command' must be one of {COMMANDS}, got {command!r}")
    if "model" not in raw:
        raise ConfigError("config needs a 'model' section")
    if seed is not None:
        raw["seed"] = seed
    conv = dict(raw.get("converge", {}))
    if eps is not None:
        conv["eps"] = eps
    norms = [float(k) for k in raw.get("norms", [])]
    if any(k < 0 for k in norms):
        raise ConfigError("norm orders k must be non-negative")
    out_dir = Path(out if out is not None else raw.get("out", "out"))
    if not out_dir.is_absolute() and out is None:
        out_dir = path.parent / out_dir
    return RunConfig(command=command, model=dict(raw["model"]), controls=raw.get("controls", []),
                     states=raw.get("states", []), norms=norms, record=raw.get("record", 101),
                     out=out_dir, seed=raw.get("seed"), converge=conv, raw=raw)


# ---------------------------------------------------------------------------
# commands


class _Outputs:
    """Collects written files for the manifest."""

    def __init__(self, out: Path):
        self.out = out
        self.files = []
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str):
        (self.out / name).write_text(text)
        self.files.append(name)

    def manifest(self, cfg: RunConfig, started: float, extra: dict):
        doc = {"command": cfg.command, "version": __version__, "inputs": cfg.raw,
               "norms": cfg.norms, "files": self.files, **extra,
               "wall_time_s": time.perf_counter() - started}
        (self.out / "manifest.json").write_text(json.dumps(doc, indent=2, default=str))


def run_simulate(cfg: RunConfig, base: Path) -> int:
    started = time.perf_counter()
    model = _model_from_config(cfg.model)
    controls = _controls_from_config(cfg.controls, cfg.raw.get("family"), cfg.seed, base)
    states = _states_from_config(cfg.states, model.dim, base)
    if not controls or not states:
        raise ConfigError("simulate needs at least one control and one state")
    outputs = _Outputs(cfg.out)
    outputs.write("model.json", model_to_json(model, indent=1))
    for cid, c in controls.items():
        for sid, psi in states.items():
            traj = propagate(model, c, 0.0, c.horizon, psi, record=cfg.record, norms=cfg.norms)
            outputs.write(f"traj_{cid}_{sid}.csv", trajectory_to_csv(traj))
            log.info("simulated %s/%s: %d rows", cid, sid, len(traj))
    outputs.manifest(cfg, started, {})
    return EXIT_OK


def run_estimate(cfg: RunConfig, base: Path) -> int:
    started = time.perf_counter()
    model = _model_from_config(cfg.model)
    controls = _controls_from_config(cfg.controls, cfg.raw.get("family"), cfg.seed, base)
    states = _states_from_config(cfg.states, model.dim, base)
    if not controls or not states:
        raise ConfigError("estimate needs at least one control and one state")
    ks = [float(k) for k in cfg.raw.get("k_values", cfg.norms or [0.0])]
    cap = cfg.raw.get("amplitude_cap")
    outputs = _Outputs(cfg.out)
    rows = []
    violated = False

    def record(report, k, cid, sid):
        nonlocal violated
        name = report.bound_name
        tag = "" if k is None else f"_k{fmt_float(k)}"
        outputs.write(f"report_{name}{tag}_{cid}_{sid}.json", report.to_json(indent=1))
        guaranteed = name in ("kato", "growth_k")
        violated |= guaranteed and report.violated
        rows.append([name, "" if k is None else float(k), cid, sid,
                     float(report.constant_values.get("c_k", float("nan"))) if k is not None else "",
                     float(report.margin), str(report.violated).lower(),
                     str(bool(report.extras.get("literal_flagged", False))).lower()])

    for cid, c in controls.items():
        for sid, psi in states.items():
            if not c.has_atoms:
                record(kato_constants(model, c, psi, record=cfg.record), None, cid, sid)
            for k in ks:
                item1, item2 = growth_check(model, c, psi, k, record=cfg.record,
                                            amplitude_cap=cap)
                record(item1, k, cid, sid)
                record(item2, k, cid, sid)
    outputs.write("estimates.csv", rows_to_csv(
        ["bound_name", "k", "control_id", "state_id", "c_k", "margin", "violated",
         "literal_flagged"], rows))
    constants = {fmt_float(k): coupling_constant(model, k) for k in ks}
    outputs.manifest(cfg, started, {"coupling_constants": constants, "violated": violated})
    return EXIT_ACCURACY if violated else EXIT_OK


def run_converge(cfg: RunConfig, base: Path) -> int:
    started = time.perf_counter()
    conv = cfg.converge
    for key in ("eps", "L", "T", "s", "dims"):
        if key not in conv:
            raise ConfigError(f"converge section needs '{key}'")
    dims = [int(d) for d in conv["dims"]]
    if len(dims) < 2:
        raise ConfigError("converge needs at least two tested dims")
    s, k = float(conv["s"]), float(conv.get("k", 2.0))
    if s >= k:
        raise ConfigError(f"error norm order s={s} must be below k={k}")
    if cfg.seed is None:
        raise ConfigError("converge needs a seed for its control family")
    ref_dim = int(conv.get("reference_dim", cfg.model.get("dim", 64)))
    reference = _model_from_config(cfg.model, ref_dim)
    states = _states_from_config(cfg.states, reference.dim, base)
    fam = dict(conv.get("family", {}))
    fam["seed"] = int(fam.get("seed", cfg.seed))
    spec = FamilySpec.from_dict(fam)
    doubled = rebuild(reference, 2 * ref_dim) if conv.get("check_reference", True) else None
    try:
        report = find_truncation(reference, float(conv["eps"]), float(conv["L"]), float(conv["T"]),
                                 states, s, spec, dims, k=k, grid=cfg.record,
                                 doubled_reference=doubled)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    outputs = _Outputs(cfg.out)
    outputs.write("convergence.json", report.to_json(indent=1))
    outputs.write("convergence.csv", report.to_csv())
    extra = {"selected_N": report.selected_N, "reference_change": report.reference_change}
    status = EXIT_OK
    if report.converged is False:
        log.error("reference not converged: doubling moved errors by %.3e", report.reference_change)
        status = EXIT_ACCURACY
    elif report.selected_N is None:
        log.warning("no tested dim meets eps=%g", report.eps)
        status = EXIT_THRESHOLD
    else:
        fresh = int(conv.get("heldout_seed", fam["seed"] + 1))
        held = heldout_validation(report, reference, fresh, count=conv.get("heldout_count"))
        extra["heldout"] = {"seed": fresh, "passed": held.passed, "worst_error": held.worst_error,
                            "threshold": held.threshold, "count": held.count}
        if not held.passed:
            status = EXIT_THRESHOLD
    outputs.manifest(cfg, started, extra)
    return status


RUNNERS = {"simulate": run_simulate, "estimate": run_estimate, "converge": run_converge}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="galerkin-bilinear", description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, type=Path, help="run configuration (JSON)")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="random seed (overrides the config)")
    parser.add_argument("--eps", type=float, help="convergence target (overrides the config)")
    parser.add_argument("--quiet", action="store_true", help="only report errors")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config, args.out, args.seed, args.eps)
        return RUNNERS[cfg.command](cfg, args.config.parent)
    except (AccuracyError, ModelDiagnosticsError) as exc:
        log.error("numerical accuracy failure: %s", exc)
        return EXIT_ACCURACY
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
