"""Command-line entry point: ``onlinematch <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 a certificate or hardness check failed.
Every command prints a short human summary, or one JSON document with ``--json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import hardness as hd
from .algorithms import Algorithm, ModelMismatchError, RunConfig, batch_run, run_script
from .factor_lp import Family, FactorLPSpec, save_result, solve_factor_lp
from .instances import random_script
from .model import InstanceScript, Model, ScriptValidationError
from .pricing import GridError, HGrid, PriceSystem, certify_continuous_feasibility

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3
DEFAULT_SEED = 0
DEFAULT_SAMPLES = 100_000

log = logging.getLogger("onlinematch")


class InputError(Exception):
    """Bad arguments or unreadable input files."""


@dataclass
class CommandResult:
    payload: dict
    summary: list[str] = field(default_factory=list)
    code: int = EXIT_OK


# -- helpers -----------------------------------------------------------------

def _read_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such file: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}: not valid JSON ({exc})") from exc


def _load_grid(path) -> tuple[HGrid, Optional[float]]:
    d = _read_json(path)
    try:
        return HGrid.from_dict(d), d.get("gamma")
    except (GridError, KeyError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_script(path) -> InstanceScript:
    try:
        return InstanceScript.from_dict(_read_json(path))
    except ScriptValidationError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _algorithm(name: str, grid_path: Optional[str], model: Model) -> Algorithm:
    name = name.lower().replace("-", "").replace("_", "")
    if name == "greedy":
        return Algorithm.greedy()
    if name == "waterfilling":
        return Algorithm.water_filling()
    if grid_path is None:
        prices = PriceSystem.identity()
    else:
        prices = PriceSystem(_load_grid(grid_path)[0])
    if name == "eager":
        return Algorithm.eager(PriceSystem(prices.grid, certified=prices.certified, a_independent=True))
    if name == "history":
        return Algorithm.history_fully(prices) if model is Model.FULLY else Algorithm.history_general(prices)
    if name == "historyfully":
        return Algorithm.history_fully(prices)
    if name == "historygeneral":
        return Algorithm.history_general(prices)
    raise InputError(f"unknown algorithm {name!r}")


# -- commands ----------------------------------------------------------------

def cmd_solve_h(args) -> CommandResult:
    family = Family.parse(args.family)
    rowgen = args.row_generation if args.row_generation is not None else (family is Family.FULLY and args.n > 20)
    spec = FactorLPSpec(family, args.n, use_row_generation=rowgen, use_auxiliary_H=not args.no_aux_h,
                        max_rounds=args.max_rounds, backend=args.backend, lipschitz=not args.no_lipschitz)
    result = solve_factor_lp(spec)
    if result.grid is None:
        return CommandResult({"status": result.status, "family": family.value, "n": args.n},
                             [f"LP status {result.status}"], EXIT_FAILED)
    cert = result.certificate(num_samples=args.samples, seed=args.seed)
    out = Path(args.out or f"h_{family.value}_n{args.n}.json")
    save_result(result, out)
    doc = json.loads(out.read_text())
    doc.update({"family": family.value, "gamma": result.gamma})
    _write_json(out, doc)
    cert_path = Path(args.cert or out.with_name(out.stem + "_certificate.json"))
    # wall-clock time lives only in the certificate file; the printed report stays reproducible
    _write_json(cert_path, {**cert, "solve_seconds": round(result.solve_seconds, 3)})
    payload = {"family": family.value, "n": args.n, "gamma": result.gamma, "status": result.status,
               "grid": str(out), "certificate": str(cert_path), "certified": cert["pass"]}
    summary = [f"{family.value} n={args.n}: gamma = {result.gamma:.6f}",
               f"certificate {'passed' if cert['pass'] else 'FAILED'} -> {cert_path}"]
    return CommandResult(payload, summary, EXIT_OK if cert["pass"] else EXIT_FAILED)


def cmd_simulate(args) -> CommandResult:
    script = _load_script(args.instance)
    algo = _algorithm(args.algo, args.grid, script.model)
    config = RunConfig(step=args.step, seed=args.seed, record_trace=args.trace is not None)
    report = run_script(script, algo, config)
    if args.trace is not None:
        report.write_trace_csv(args.trace)
    payload = report.to_dict(include_state=not args.no_state)
    if args.out:
        _write_json(args.out, payload)
    summary = [f"{report.algorithm} on {script.model.value}: P = {report.primal:.6f}, D = {report.dual:.6f}",
               f"offline optimum {report.offline_opt:.6f}, ratio {report.ratio:.6f}"]
    return CommandResult(payload, summary)


def cmd_batch(args) -> CommandResult:
    paths = list(args.instances)
    for d in args.dir or []:
        paths += sorted(str(p) for p in Path(d).glob("*.json"))
    if not paths:
        raise InputError("no instances given")
    scripts = [_load_script(p) for p in paths]
    models = {s.model for s in scripts}
    if len(models) != 1:
        raise InputError("a batch must use a single arrival model")
    algo = _algorithm(args.algo, args.grid, models.pop())
    result = batch_run(scripts, algo, RunConfig(step=args.step, seed=args.seed), parallelism=args.workers)
    payload = result.to_dict()
    for rep, p in zip(payload["reports"], paths):
        rep["instance"] = p
    if args.out:
        _write_json(args.out, payload)
    agg = result.aggregate
    return CommandResult(payload, [f"{agg['runs']} runs, {agg['errors']} errors, min ratio {agg['min_ratio']}"])


def cmd_hardness(args) -> CommandResult:
    if args.kind == "fully":
        return _hardness_fully(args)
    if args.kind == "general":
        return _hardness_general(args)
    if args.kind == "triangle":
        matched = hd.simulate_upper_triangle(args.k, args.prefill, config=RunConfig(step=args.step))
        payload = {"k": args.k, "prefill": args.prefill, "matched": matched, "matched_per_vertex": matched / args.k,
                   "bound": hd.triangle_bound(args.prefill)}
        return CommandResult(payload, [f"matched/k = {matched / args.k:.6f}, bound {payload['bound']:.6f}"])
    # adversary
    target = args.gamma if args.gamma is not None else 0.526
    params = hd.GeneralHardParams(args.n or 20, args.k, target, target)
    algo = _algorithm(args.algo, args.grid, Model.GENERAL)
    res = hd.run_adaptive_general_adversary(params, algo, RunConfig(step=args.step))
    if args.out:
        Path(args.out).write_text(res.to_json() + "\n")
    return CommandResult(res.to_dict(), [f"stopped after stage {res.stage_stopped}, ratio {res.observed_ratio:.6f}"])


def _hardness_fully(args) -> CommandResult:
    if args.minimize:
        r = hd.fully_minimize_ratio(args.tolerance)
        payload = {"alpha_star": r.alpha_star, "value": r.value}
        return CommandResult(payload, [f"min ratio {r.value:.6f} at alpha = {r.alpha_star:.6f}"])
    alpha = 0.43 if args.alpha is None else args.alpha
    payload = {"alpha": alpha, "closed_form": hd.fully_ratio_closed_form(alpha),
               "fixed_point": hd.fully_fixed_point(alpha)}
    summary = [f"alpha = {alpha}: closed-form ratio {payload['closed_form']:.6f}"]
    if args.ell is not None:
        n = args.n or 500
        rec = hd.fully_recurrence(n, args.ell, alpha)
        payload["recurrence"] = {"n": n, "ell": args.ell, "limit_ratio": rec.limit_ratio,
                                 "per_stage_ratios": rec.per_stage_ratios}
        summary.append(f"recurrence n={n}, ell={args.ell}: {rec.limit_ratio:.6f}")
        if args.simulate:
            rep = hd.simulate_fully_hardness(hd.FullyHardParams(n, args.ell, alpha), config=RunConfig(step=args.step))
            payload["simulation"] = rep.to_dict(include_state=False)
            summary.append(f"water-filling ratio {rep.ratio:.6f}")
    if args.csv:
        grid = [i / 1000 for i in range(0, 951)]
        _write_rows(args.csv, ["alpha", "ratio"], [(a, hd.fully_ratio_closed_form(a)) for a in grid])
    return CommandResult(payload, summary)


def _hardness_general(args) -> CommandResult:
    n = args.n or 500
    target = 0.584 if args.gamma is None else args.gamma
    res = hd.general_hardness_sweep(n, target, args.grid_step, workers=args.workers)
    csv_path = args.csv or f"r_curve_n{n}_G{target}.csv"
    hd.write_sweep_csv(res, csv_path)
    payload = res.to_dict()
    payload["csv"] = str(csv_path)
    if not args.full_curve:
        payload.pop("r_curve")
    summary = [f"max r = {res.max_r:.6f} at gamma = {res.argmax_gamma:.4f} -> {'pass' if res.passed else 'FAIL'}",
               f"curve written to {csv_path}"]
    return CommandResult(payload, summary, EXIT_OK if res.passed else EXIT_FAILED)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows([[repr(float(v)) for v in row] for row in rows])


def cmd_certify(args) -> CommandResult:
    grid, stored = _load_grid(args.grid)
    gamma = args.gamma if args.gamma is not None else stored
    if gamma is None:
        raise InputError("no --gamma given and the grid file does not record one")
    rep = certify_continuous_feasibility(grid, gamma, num_samples=args.samples, seed=args.seed, family=args.family)
    payload = rep.to_dict()
    return CommandResult(payload, [f"gamma {gamma:.6f}: {'passed' if rep.passed else 'FAILED'}"],
                         EXIT_OK if rep.passed else EXIT_FAILED)


def cmd_gen_instance(args) -> CommandResult:
    if args.kind == "hardness":
        script = hd.build_fully_instance(hd.FullyHardParams(args.n, args.ell, args.alpha))
    else:
        script = random_script(Model(args.model), args.n, args.edge_prob, args.seed,
                               bipartite=args.kind == "bipartite")
    script.save(args.out)
    payload = {"out": args.out, "model": script.model.value, "vertices": script.num_vertices,
               "events": len(script.events)}
    return CommandResult(payload, [f"wrote {len(script.events)} events to {args.out}"])


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onlinematch", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="print one JSON document instead of a summary")
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)

    s = sub.add_parser("solve-h", help="solve a factor-revealing LP and certify the grid")
    common(s)
    s.add_argument("--family", required=True, choices=["fully", "general", "naive"])
    s.add_argument("--n", type=int, required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--row-generation", dest="row_generation", action="store_true", default=None)
    g.add_argument("--no-row-generation", dest="row_generation", action="store_false")
    s.add_argument("--no-aux-h", action="store_true", help="enumerate integrals directly instead of via H")
    s.add_argument("--no-lipschitz", action="store_true", help="general family ablation without Lipschitz rows")
    s.add_argument("--max-rounds", type=int, default=200)
    s.add_argument("--backend", default="auto", choices=["auto", "highs", "simplex", "external"])
    s.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    s.add_argument("--out", help="grid JSON path")
    s.add_argument("--cert", help="certificate JSON path")
    s.set_defaults(func=cmd_solve_h)

    s = sub.add_parser("simulate", help="run one algorithm on one instance script")
    common(s)
    s.add_argument("instance")
    s.add_argument("--algo", default="history",
                   help="greedy | waterfilling | eager | history (model picked from the script)")
    s.add_argument("--grid", help="h-grid JSON; identity prices when omitted")
    s.add_argument("--step", type=float, default=1e-4)
    s.add_argument("--trace", help="write per-event levels to this CSV")
    s.add_argument("--out", help="write the report JSON here")
    s.add_argument("--no-state", action="store_true", help="omit the final matching from the report")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("batch", help="run one algorithm over many scripts")
    common(s)
    s.add_argument("instances", nargs="*")
    s.add_argument("--dir", action="append", help="directory of *.json scripts")
    s.add_argument("--algo", default="history")
    s.add_argument("--grid")
    s.add_argument("--step", type=float, default=1e-4)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_batch)

    s = sub.add_parser("hardness", help="hardness constructions and their numerics")
    common(s)
    s.add_argument("kind", choices=["fully", "general", "triangle", "adversary"])
    s.add_argument("--minimize", action="store_true")
    s.add_argument("--tolerance", type=float, default=1e-6)
    s.add_argument("--alpha", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--ell", type=int)
    s.add_argument("--simulate", action="store_true", help="also run water-filling on the built instance")
    s.add_argument("--gamma", type=float, help="target ratio (general sweep, adversary)")
    s.add_argument("--grid-step", type=float, default=1e-3)
    s.add_argument("--full-curve", action="store_true", help="include the r-curve in the JSON output")
    s.add_argument("--k", type=int, default=50)
    s.add_argument("--prefill", type=float, default=0.0)
    s.add_argument("--algo", default="history")
    s.add_argument("--grid")
    s.add_argument("--step", type=float, default=1e-3)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--csv", help="plot data path")
    s.add_argument("--out", help="adversary transcript JSON")
    s.set_defaults(func=cmd_hardness)

    s = sub.add_parser("certify", help="sample-check a grid against its gain bounds")
    common(s)
    s.add_argument("--grid", required=True)
    s.add_argument("--gamma", type=float)
    s.add_argument("--family", choices=["fully", "general"], default="fully")
    s.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("gen-instance", help="write a random or hardness instance script")
    common(s)
    s.add_argument("kind", choices=["random", "bipartite", "hardness"])
    s.add_argument("--model", choices=["FullyOnline", "GeneralArrival"], default="FullyOnline")
    s.add_argument("--n", type=int, default=20, help="vertices (random) or group size (hardness)")
    s.add_argument("--edge-prob", type=float, default=0.3)
    s.add_argument("--ell", type=int, default=3)
    s.add_argument("--alpha", type=float, default=0.43)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_instance)
    return p


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        result = args.func(args)
    except ScriptValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InputError, ModelMismatchError, GridError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.json:
        print(json.dumps(_jsonable(result.payload), indent=2, sort_keys=True))
    else:
        print("\n".join(result.summary))
    return result.code


if __name__ == "__main__":
    sys.exit(main())
