"""Command-line front end: oracle evaluation, the sweep/fit/assembly pipeline,
circuit lowering against a coupling map, and the denominator correction.

Exit codes: 0 success, 2 validation failure, 3 numerical failure.
All runs are deterministic given config + seed; a manifest listing input
digests and outputs is written next to every pipeline run.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, estimate, hfdata, lowering, mp2
from .circuits import Circuit
from .coupling import CouplingMap, named_map, validate_connectivity
from .errors import LoweringError, NumericalError, SchemaError


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_oracle(args) -> int:
    data = hfdata.load(args.hf_data)
    per_block = data.n_occupied == 1 and data.n_orbitals - data.n_occupied == 8
    result = mp2.mp2_energy(data, args.formula, per_block=per_block)
    doc = {
        "formula": result.formula,
        "e2_total_hartree": result.e2_total,
        "per_block_hartree": {k: v for k, v in sorted(result.per_block.items())},
    }
    print(json.dumps(doc, indent=1))
    return 0


def _load_config(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _per_part(value, parts, cast=float) -> dict:
    if isinstance(value, dict):
        return {p: cast(value[p]) for p in parts}
    return {p: cast(value) for p in parts}


def cmd_pipeline(args) -> int:
    config = _load_config(args.config) if args.config else {}
    hf_path = args.hf_data or config.get("hf_data")
    if hf_path is None:
        raise SchemaError("pipeline needs --hf-data or an hf_data config entry")
    data = hfdata.load(hf_path)
    parts = args.parts.split(",") if args.parts else config.get("parts", ["I", "III", "IV"])
    mode = args.mode or config.get("mode", estimate.EXACT)
    if mode == "exact":
        mode = estimate.EXACT
    seed = args.seed if args.seed is not None else int(config.get("seed", 7))
    shots = args.shots if args.shots is not None else int(config.get("shots", 100_000))
    defaults = estimate.DEFAULT_HELIUM_GRIDS[mode]
    steps = _per_part(config.get("lambda_step", {p: defaults[p][0] for p in parts}), parts)
    totals = _per_part(config.get("total_steps", {p: defaults[p][1] for p in parts}), parts, int)
    start_candidates = int(config.get("start_candidates", 4))
    grids = {p: (steps[p], totals[p]) for p in parts}
    multiplicity = {p: estimate.HELIUM_PARTS.get(p, 1) for p in parts}
    c_e_cfg = config.get("c_e", "auto")
    c_e = None if c_e_cfg == "auto" else _per_part(c_e_cfg, parts)

    result = estimate.estimate_helium(data, mode=mode, shots=shots, seed=seed,
                                      grids=grids, parts=multiplicity,
                                      start_candidates=start_candidates, c_e=c_e)
    oracle = mp2.mp2_energy(data, mp2.HELIUM_GROUND).e2_total
    rel = result.e2 / oracle - 1.0

    out_dir = Path(args.out_dir or config.get("out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    sweep_csv = out_dir / "sweep.csv"
    fit_json = out_dir / "fits.json"
    manifest_json = out_dir / "manifest.json"
    _write_sweep_csv(sweep_csv, result)
    _write_fit_json(fit_json, result, oracle, rel)
    manifest = {
        "command": "pipeline",
        "tool_version": __version__,
        "config_path": str(args.config) if args.config else None,
        "config": {"hf_data": str(hf_path), "parts": parts, "mode": mode,
                   "seed": seed, "shots": shots,
                   "lambda_step": steps, "total_steps": totals,
                   "start_candidates": start_candidates,
                   "c_e": c_e_cfg},
        "inputs": {str(hf_path): _sha256(hf_path)},
        "outputs": [str(sweep_csv), str(fit_json)],
    }
    manifest_json.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    print(f"E2 = {_fmt(result.e2)} hartree")
    print(f"oracle = {_fmt(oracle)} hartree")
    print(f"relative error = {rel * 100:.4f}%")
    return 0


def _write_sweep_csv(path, result: estimate.PipelineEstimate):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["part", "step", "lambda", "lambda_sq", "outcome", "count", "shots", "zeta"])
        for part, detail in sorted(result.parts.items()):
            for row in detail.sweep.rows:
                shots = row.counts.shots if row.counts is not None else 0
                for outcome, value in sorted(row.outcome_fractions().items()):
                    count = (row.counts.counts[outcome] if row.counts is not None
                             else value)
                    w.writerow([part, row.step, _fmt(row.lam), _fmt(row.lam_sq),
                                outcome, _fmt(count) if shots == 0 else count,
                                shots, _fmt(row.zeta)])


def _write_fit_json(path, result: estimate.PipelineEstimate, oracle: float, rel: float):
    doc = {"e2_hartree": result.e2, "oracle_e2_hartree": oracle,
           "relative_error": rel, "parts": {}}
    for part, detail in sorted(result.parts.items()):
        fit = detail.selection.best
        doc["parts"][part] = {
            "part": part,
            "start_step": detail.selection.best_start,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "lse": fit.lse,
            "c_e_hartree": detail.sweep.c_e,
            "epsilon_part_hartree": detail.epsilon,
        }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _coupling_from_arg(arg: str) -> CouplingMap:
    if Path(arg).exists():
        return CouplingMap.load(arg)
    return named_map(arg)


def cmd_lower(args) -> int:
    circuit = Circuit.load(args.circuit)
    coupling = _coupling_from_arg(args.coupling)
    layout = None
    if args.layout:
        with open(args.layout) as fh:
            layout = {int(k): int(v) for k, v in json.load(fh).items()}
    try:
        lowered = lowering.lower(circuit, coupling, layout)
    except LoweringError as exc:
        print(json.dumps({"violations": None, "error": str(exc)}, indent=1))
        return 2
    violations = validate_connectivity(lowered, coupling)
    out_path = Path(args.out or "lowered.json")
    lowered.save(out_path)
    report = {"violations": [[i, list(pair)] for i, pair in violations],
              "n_gates": len(lowered), "output": str(out_path)}
    if args.pack:
        from .coupling import pack_parallel_ue

        embeddings = pack_parallel_ue(coupling, args.pack)
        report["parallel_embeddings"] = [sorted(e.values()) for e in embeddings]
    print(json.dumps(report, indent=1))
    return 2 if violations else 0


def _read_counts_csv(path) -> dict[int, dict[str, float]]:
    tables: dict[int, dict[str, float]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            tables.setdefault(int(row["input"]), {})[row["outcome"]] = float(row["count"])
    return tables


def cmd_correct(args) -> int:
    counts_all = _read_counts_csv(args.counts_all)
    counts_lite = _read_counts_csv(args.counts_lite)
    n_inputs = len(counts_all)
    q = (n_inputs - 1).bit_length()
    missing = [x for x in range(1 << q) if x not in counts_all or x not in counts_lite]
    if missing:
        raise SchemaError(f"count tables missing inputs {missing}")
    corrected = estimate.correct_denominators(counts_all, counts_lite, q)
    theory = None
    if args.theory:
        theory = {}
        with open(args.theory, newline="") as fh:
            for row in csv.DictReader(fh):
                theory[int(row["input"])] = float(row["value"])
    out_path = Path(args.out or "corrected.csv")
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["input", "raw_ratio", "corrected"]
        if theory is not None:
            header += ["theory", "abs_dev"]
        w.writerow(header)
        for x in range(1 << q):
            table = counts_all[x]
            lo = table.get(estimate.bitstring(x, q + 1), 0.0)
            hi = table.get(estimate.bitstring(x | (1 << q), q + 1), 0.0)
            raw = hi / (lo + hi)
            row = [x, _fmt(raw), _fmt(corrected[x])]
            if theory is not None:
                row += [_fmt(theory[x]), _fmt(abs(corrected[x] - theory[x]))]
            w.writerow(row)
    print(json.dumps({"output": str(out_path),
                      "max_corrected": _fmt(float(np.max(corrected)))}, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mp2q", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle", help="classical MP2 reference energy")
    p.add_argument("--hf-data", required=True)
    p.add_argument("--formula", default=mp2.HELIUM_GROUND,
                   choices=[mp2.HELIUM_GROUND, mp2.CLOSED_SHELL, mp2.SPIN_ORBITAL])
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("pipeline", help="lambda sweeps, fits, and energy assembly")
    p.add_argument("--config")
    p.add_argument("--hf-data")
    p.add_argument("--parts", help="comma-separated, e.g. I,III,IV")
    p.add_argument("--mode", choices=[estimate.EXACT, estimate.SAMPLED, "exact"])
    p.add_argument("--seed", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("lower", help="lower a circuit JSON onto a coupling map")
    p.add_argument("--circuit", required=True)
    p.add_argument("--coupling", required=True, help="JSON path or a named map")
    p.add_argument("--layout", help="JSON object mapping logical to physical")
    p.add_argument("--pack", type=int, help="also report K disjoint H-shape embeddings")
    p.add_argument("--out")
    p.set_defaults(func=cmd_lower)

    p = sub.add_parser("correct", help="denominator correction from lite/all counts")
    p.add_argument("--counts-all", required=True)
    p.add_argument("--counts-lite", required=True)
    p.add_argument("--theory")
    p.add_argument("--out")
    p.set_defaults(func=cmd_correct)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, LoweringError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
