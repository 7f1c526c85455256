"""Command-line front end.

    pathtomo simulate --state ideal --plan plan.json --out records.csv
    pathtomo tomo --records records.csv --mode mle --out rho.json
    pathtomo scan --records records.csv --grid 10x10 --jobs 4 --out scan.csv
    pathtomo curves --state dashed-theta=0.2 --out curves.csv

Every output file names the manifest JSON written next to it. Exit codes:
2 bad config, plan or state; 3 generation failure; 4 singular design;
5 non-convergence (or more than 10% failed scan cells).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .correlations import KIND_PAIRS, rate_curves
from .distinguishability import hom_source_vis, mle_reconstruct_vis, normalized_rate_vis, vis_unvectorize
from .exceptions import ConvergenceWarning, NonConvergence, PathTomoError, SingularTransferMatrix
from .optics import SetupConfig
from .records import dump_records, read_records
from .states import FIXTURES, PSI_2002, PathDensityMatrix, VisDensityMatrix, fixture
from .synth import ExperimentPlan, run_campaign
from .tomography import (
    _infer_bin_width,
    fidelity,
    fidelity_scan,
    linear_reconstruct,
    mle_reconstruct,
    scan_grid,
    select_minimal_set,
    unvectorize,
)
from .validation import check_records

EXIT_CONFIG, EXIT_GENERATION, EXIT_SINGULAR, EXIT_CONVERGENCE = 2, 3, 4, 5
CURVE_POINTS = 64


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def load_config(path) -> SetupConfig:
    if path is None:
        return SetupConfig()
    try:
        return SetupConfig.from_json(Path(path).read_text())
    except (OSError, ValueError, TypeError, KeyError) as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_CONFIG) from exc


def load_plan(path, seed=None) -> ExperimentPlan:
    try:
        data = {} if path is None else json.loads(Path(path).read_text())
        if seed is not None:
            data["seed"] = seed
        return ExperimentPlan.from_dict(data)
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(f"cannot read plan {path}: {exc}", EXIT_CONFIG) from exc


def _complex_matrix(obj) -> np.ndarray:
    real = np.asarray(obj["real"], dtype=float)
    imag = np.asarray(obj.get("imag", np.zeros_like(real)), dtype=float)
    return real + 1j * imag


def load_state(spec: str):
    """A fixture name, ``hom:R:overlap``, or a JSON file.

    JSON files hold ``{"real": ..., "imag": ...}`` for a 3x3 path state or
    ``{"symBlock": {"real": ..., "imag": ...}, "antisymPop": p}``.
    """
    if spec in FIXTURES:
        return fixture(spec)
    try:
        if spec.startswith("hom:"):
            _, r, m = spec.split(":")
            return hom_source_vis(float(r), float(m))
        path = Path(spec)
        if not path.exists():
            raise ValueError(f"unknown state {spec!r}; fixtures are {sorted(FIXTURES)}")
        data = json.loads(path.read_text())
        if "symBlock" in data:
            return VisDensityMatrix(_complex_matrix(data["symBlock"]), float(data["antisymPop"]))
        return PathDensityMatrix(_complex_matrix(data))
    except (OSError, ValueError, TypeError, KeyError) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc


def config_hash(cfg: SetupConfig) -> str:
    return hashlib.sha256(cfg.to_json().encode()).hexdigest()[:16]


def manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def write_manifest(command, inputs, cfg, seed, outputs) -> Path:
    out = Path(outputs[0])
    doc = {
        "command": command,
        "inputs": {k: (None if v is None else str(v)) for k, v in inputs.items()},
        "configHash": config_hash(cfg),
        "seed": seed,
        "outputs": [str(p) for p in outputs],
        "version": __version__,
    }
    path = manifest_path(out)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _csv(header, rows, manifest) -> str:
    lines = [f"# manifest={manifest.name}", ",".join(header)]
    lines += [",".join("" if v is None else repr(v) if isinstance(v, float) else str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _matrix_json(m) -> dict:
    m = np.asarray(m)
    return {"real": m.real.tolist(), "imag": m.imag.tolist()}


def _read_records(path):
    try:
        return check_records(read_records(path))
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(f"cannot read records {path}: {exc}", EXIT_CONFIG) from exc


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    plan = load_plan(args.plan, args.seed)
    state = load_state(args.state)
    try:
        campaign = run_campaign(state, cfg, plan)
    except (PathTomoError, ValueError, ArithmeticError) as exc:
        raise CliError(f"generation failed: {exc}", EXIT_GENERATION) from exc
    out = Path(args.out)
    man = write_manifest("simulate", {"config": args.config, "plan": args.plan, "state": args.state},
                         cfg, plan.seed, [out])
    out.write_text(dump_records(campaign.records, f"manifest={man.name}"))
    return 0


def cmd_tomo(args) -> int:
    cfg = load_config(args.config)
    arr = _read_records(args.records)
    out = Path(args.out)
    doc = {"mode": args.mode, "rates": args.rates}
    code = 0
    if args.mode == "linear":
        if args.phi1 is None or args.phi2 is None:
            raise CliError("linear mode needs --phi1 and --phi2", EXIT_CONFIG)
        try:
            sub = select_minimal_set(arr, args.phi1, args.phi2, _infer_bin_width(arr))
            raw, rho = linear_reconstruct(sub, cfg, sub.phases[3], sub.phases[6], rates=args.rates)
        except SingularTransferMatrix as exc:
            raise CliError(str(exc), EXIT_SINGULAR) from exc
        except PathTomoError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from exc
        mat = rho.matrix
        doc.update(rawMatrix=_matrix_json(raw.matrix), objective=None, converged=True,
                   phases=[float(sub.phases[3]), float(sub.phases[6])])
    else:
        fit = mle_reconstruct_vis if args.mode == "vis" else mle_reconstruct
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            try:
                res = fit(arr, cfg, rates=args.rates, random_state=args.seed, strict=True)
            except NonConvergence as exc:
                res, code = exc.result, EXIT_CONVERGENCE
            except PathTomoError as exc:
                raise CliError(str(exc), EXIT_SINGULAR) from exc
        if args.mode == "vis":
            vis = vis_unvectorize(res.x)
            mat = vis.matrix
            doc.update(symBlock=_matrix_json(vis.sym_block), antisymPop=float(vis.antisym_pop))
        else:
            mat = unvectorize(res.x)
        doc.update(objective=res.objective, converged=res.converged, evaluations=res.n_evals)
    fid_state = mat[:3, :3]
    man = write_manifest("tomo", {"records": args.records, "config": args.config}, cfg, args.seed, [out])
    doc.update(
        manifest=man.name,
        matrix=_matrix_json(mat),
        trace=float(np.trace(mat).real),
        eigenvalues=np.linalg.eigvalsh(mat).tolist(),
        fidelity=fidelity(fid_state, PSI_2002),
    )
    out.write_text(json.dumps(doc, indent=2) + "\n")
    if code:
        print(f"optimizer did not converge; best point written to {out}", file=sys.stderr)
    return code


def parse_grid(spec: str) -> tuple[int, int]:
    try:
        n1, n2 = (int(v) for v in spec.lower().split("x"))
    except ValueError as exc:
        raise CliError(f"grid must look like 10x10, got {spec!r}", EXIT_CONFIG) from exc
    if n1 < 0 or n2 < 0:
        raise CliError("grid sizes must be non-negative", EXIT_CONFIG)
    return n1, n2


def cmd_scan(args) -> int:
    cfg = load_config(args.config)
    n1, n2 = parse_grid(args.grid)
    arr = _read_records(args.records)
    grid = scan_grid(n1, n2) if n1 and n2 else []
    jobs = args.jobs or os.cpu_count() or 1
    try:
        res = fidelity_scan(arr, cfg, grid, n_jobs=jobs, random_state=args.seed)
    except PathTomoError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    out = Path(args.out)
    summary = out.with_name(out.stem + "_summary" + out.suffix)
    man = write_manifest("scan", {"records": args.records, "config": args.config}, cfg, args.seed,
                         [out, summary])
    out.write_text(_csv(("phi1", "phi2", "fidelity", "converged", "singular"), res.rows(), man))
    rows = [(float(s), float(m), float(d), int(c)) for s, m, d, c in zip(res.separation, res.mean, res.std, res.count)]
    summary.write_text(_csv(("separation", "mean", "std", "count"), rows, man))
    usable = ~res.singular
    failed = usable & (~res.converged | ~np.isfinite(res.fidelity))
    if usable.sum() and failed.sum() > 0.1 * usable.sum():
        print(f"{int(failed.sum())} of {int(usable.sum())} grid cells failed", file=sys.stderr)
        return EXIT_CONVERGENCE
    return 0


def cmd_curves(args) -> int:
    cfg = load_config(args.config)
    state = load_state(args.state)
    phis = np.linspace(0.0, 2 * np.pi, CURVE_POINTS, endpoint=False)
    kinds = tuple(KIND_PAIRS)
    if isinstance(state, VisDensityMatrix):
        cols = {k: np.array([normalized_rate_vis(state, cfg, p, *KIND_PAIRS[k]) for p in phis]) for k in kinds}
    else:
        cols = rate_curves(state, cfg, phis, kinds, normalized=not args.raw)
    out = Path(args.out)
    man = write_manifest("curves", {"state": args.state, "config": args.config}, cfg, None, [out])
    rows = [(float(p), *(float(cols[k][i]) for k in kinds)) for i, p in enumerate(phis)]
    out.write_text(_csv(("phi", *kinds), rows, man))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathtomo", description="Two-photon path tomography on synthetic data.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="setup JSON (defaults to a balanced lossless setup)")
        p.add_argument("--out", required=True, help="output file")
        if seed:
            p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("simulate", help="generate a synthetic record CSV")
    common(p)
    p.add_argument("--plan", help="experiment plan JSON")
    p.add_argument("--state", default="ideal", help=f"fixture ({', '.join(FIXTURES)}), hom:R:overlap, or JSON file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tomo", help="reconstruct a density matrix from records")
    common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--mode", choices=("linear", "mle", "vis"), default="mle")
    p.add_argument("--rates", choices=("normalized", "raw"), default="normalized")
    p.add_argument("--phi1", type=float)
    p.add_argument("--phi2", type=float)
    p.set_defaults(func=cmd_tomo)

    p = sub.add_parser("scan", help="minimal-set fidelity over a grid of phase pairs")
    common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--grid", default="10x10", help="n1xn2 bin-centred grid over [0, pi)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("curves", help="64-point phase sweep of every rate kind")
    common(p, seed=False)
    p.add_argument("--state", default="ideal")
    p.add_argument("--raw", action="store_true", help="unnormalized rates (path states only)")
    p.set_defaults(func=cmd_curves)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"pathtomo {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
