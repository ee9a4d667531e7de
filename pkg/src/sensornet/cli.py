"""Command-line entry point.

Commands: analyze, select-random, select-greedy, fuse, simulate.  Every run
writes ``manifest.json`` (resolved config, tool version, timestamp) next to
its artifacts in ``--output-dir``.  ``--config run.json`` replays a run
described as ``{"command": ..., <option>: <value>, ...}``.

Exit codes:
  0  success
  1  unexpected internal error
  2  usage error
  3  I/O error (missing/unreadable input, unwritable output)
  4  malformed input (CSV/JSON format)
  5  validation error (arguments violate preconditions)
  6  empty input file
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import metadata
from pathlib import Path

import numpy as np

from . import data as D
from .empirical import EntropyVector, check_lattice_size, empirical_entropy_vector
from .errors import EmptyInputError, InputFormatError, SensorNetError
from .fusion import (
    LossFunction,
    alternating_trap_truth,
    competitor_grid,
    default_eta,
    online_fusion,
    online_fusion_stream,
    parse_family,
)
from .lz78 import dump_phrases, lz_entropy_vector
from .polymatroid import MatroidRoundingError, check_polymatroid, independence_defect, round_to_matroid
from .selection import (
    EntropyOracle,
    greedy_selection,
    random_selection,
    sized_random_draws,
)
from .sources import analytic_entropy_vector, generate, load_spec, observer_readings, scenario_from_dict

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_VALIDATION = 5
EXIT_EMPTY = 6

TOOL = "sensornet"


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# ---------------------------------------------------------------- helpers

def _write(outdir: Path, name: str, text: str) -> None:
    (outdir / name).write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _parse_subset(text: str) -> int:
    try:
        ids = [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise SensorNetError(f"bad subset {text!r}; expected comma-separated 1-based sensor ids") from None
    if not ids:
        raise SensorNetError("empty subset")
    return D.mask_of(ids)


def _load(args) -> D.SensorMatrix:
    return D.load_matrix(args.input, bins=args.bins, alphabet_size=args.alphabet)


def _oracle(matrix, estimator) -> EntropyOracle:
    return EntropyOracle.lz(matrix) if estimator == "lz" else EntropyOracle.empirical(matrix)


# ---------------------------------------------------------------- commands

def cmd_analyze(args, outdir: Path) -> dict:
    matrix = _load(args)
    subsets = [_parse_subset(s) for s in args.subset] if args.subset else None
    if subsets is not None:
        for m in subsets:
            matrix.check_mask(m)
    if args.estimator == "lz":
        if subsets is None:
            check_lattice_size(matrix.num_sensors, args.lattice_cap)
            subsets = list(D.all_masks(matrix.num_sensors))
        vec = lz_entropy_vector(matrix, subsets)
    else:
        vec = empirical_entropy_vector(matrix, subsets, lattice_cap=args.lattice_cap)
    _write(outdir, "entropy.json", vec.to_json())
    _write(outdir, "entropy.csv", vec.to_csv())
    summary = {"k": vec.num_sensors, "n": matrix.num_steps, "kind": vec.kind, "evaluated": len(vec.values)}
    if matrix.alphabet.degenerate:
        summary["warning"] = "alphabet of size 1: every entropy is 0"
    if vec.is_complete():
        report = check_polymatroid(vec, args.tolerance)
        _write(outdir, "axioms.json", report.to_json())
        summary["is_polymatroid"] = report.is_polymatroid
        if args.round:
            try:
                cand = round_to_matroid(vec, args.unit)
                _write(outdir, "matroid.csv", cand.to_csv())
                summary["matroid_rank"] = cand.rank
                summary["rounding_residual"] = cand.rounding_residual
            except MatroidRoundingError as exc:
                doc = {"error": str(exc), "report": exc.report.to_dict()}
                _write(outdir, "matroid_failure.json", _dump(doc))
                summary["matroid_rank"] = None
    if args.phrases is not None:
        seq, product = D.project_subset(matrix, _parse_subset(args.phrases))
        _write(outdir, "phrases.txt", dump_phrases(seq, product))
    return summary


def cmd_select_random(args, outdir: Path) -> dict:
    matrix = _load(args) if args.input else None
    k = matrix.num_sensors if matrix is not None else args.k
    if k is None:
        raise SensorNetError("select-random needs an input CSV or --k")
    if args.size is not None:
        draws = sized_random_draws(k, args.q, args.size, args.trials, args.seed)
    else:
        draws = [(args.seed + i, random_selection(k, args.q, args.seed + i)) for i in range(args.trials)]
    oracle = _oracle(matrix, args.estimator) if matrix is not None and args.estimator else None
    rows = []
    for seed, mask in draws:
        row = {"seed": seed, "mask": mask, "members": list(D.members(mask))}
        if oracle is not None and mask:
            vec = EntropyVector(k, "lz78" if args.estimator == "lz" else "empirical-first-order")
            vec.values[mask] = oracle(mask)
            for i in D.members(mask):
                vec.values[1 << (i - 1)] = oracle(1 << (i - 1))
            row["entropy_bits"] = vec[mask]
            row["independence_defect"] = independence_defect(vec, mask)
        rows.append(row)
    doc = {"k": k, "q": args.q, "estimator": args.estimator if oracle else None, "draws": rows}
    _write(outdir, "selection.json", _dump(doc))
    for r in rows:
        line = f"seed {r['seed']:>6}  {D.format_members(r['mask']):<24}"
        if "entropy_bits" in r:
            line += f"  H={r['entropy_bits']:.4f}  defect={r['independence_defect']:.4f}"
        print(line)
    return {"k": k, "draws": len(rows)}


def cmd_select_greedy(args, outdir: Path) -> dict:
    matrix = _load(args)
    oracle = _oracle(matrix, args.estimator)
    if args.workers and args.workers > 1:
        with ThreadPoolExecutor(args.workers) as ex:
            trace = greedy_selection(oracle, matrix.num_sensors, args.epsilon, executor=ex)
    else:
        trace = greedy_selection(oracle, matrix.num_sensors, args.epsilon)
    doc = trace.to_dict()
    doc["estimator"] = args.estimator
    doc["oracle_evaluations"] = oracle.evaluation_count
    _write(outdir, "greedy.json", _dump(doc))
    print(f"{'step':>4}  {'sensor':>6}  {'entropy':>10}  {'gain':>10}")
    for i, s in enumerate(trace.steps, start=1):
        print(f"{i:>4}  {s.sensor:>6}  {s.entropy:>10.4f}  {s.gain:>10.4f}")
    print(f"final {D.format_members(trace.final_subset)}  stopped_early={trace.stopped_early}  "
          f"residual_bound={trace.residual_bound:.4f}")
    return {"final_subset": trace.final_subset, "entropy": trace.entropy}


def cmd_fuse(args, outdir: Path) -> dict:
    readings, truth = D.load_readings(args.input)
    if args.truth:
        truth = D.load_truth(args.truth)
    loss = LossFunction("log-loss" if args.loss == "logloss" else "hamming", args.delta)
    families = [parse_family(f, readings.shape[0]) for f in args.family]
    eta = None if args.eta == "auto" else float(args.eta)
    if truth is None:
        if not args.adversarial:
            raise SensorNetError("fuse needs truth bits: an 'x' column, --truth, or --adversarial")
        grid, _ = competitor_grid(readings, families)
        rate = eta if eta is not None else default_eta(grid.shape[0], grid.shape[1], loss.d_max)
        truth = alternating_trap_truth(grid, loss, rate)
    if truth.shape[0] != readings.shape[1]:
        raise SensorNetError(f"truth has {truth.shape[0]} steps, readings have {readings.shape[1]}")
    if args.stream:
        if args.doubling:
            raise SensorNetError("--stream and --doubling cannot be combined")
        run = online_fusion_stream(readings, families, truth, loss, eta, args.seed, record_weights=True)
    else:
        grid, names = competitor_grid(readings, families)
        run = online_fusion(grid, truth, loss, eta, args.seed, doubling=args.doubling, names=names)
    _write(outdir, "fusion.json", _dump(run.to_dict()))
    _write(outdir, "weights.csv", run.weights_csv(args.weights_stride))
    top = run.top(2)
    return {
        "num_competitors": run.num_competitors,
        "regret": run.regret,
        "regret_bound": run.regret_bound,
        "top2": [run.names[i] for i in top],
        "top2_weight": float(run.final_weights[top].sum()),
    }


def cmd_simulate(args, outdir: Path) -> dict:
    try:
        doc = json.loads(Path(args.spec).read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{args.spec}: invalid JSON ({exc})") from exc
    if isinstance(doc, dict) and doc.get("scenario") == "observers":
        n = args.n or int(doc.get("n", 0))
        if n < 1:
            raise SensorNetError("scenario needs n >= 1")
        readings, truth = observer_readings(scenario_from_dict(doc), n)
        D.write_wide_csv(outdir / "readings.csv", readings, truth)
        return {"scenario": "observers", "k": readings.shape[0], "n": n}
    spec = load_spec(args.spec)
    n = args.n
    if n is None:
        n = int(doc.get("n", 0)) if isinstance(doc, dict) else 0
    matrix = generate(spec, n)
    D.write_wide_csv(outdir / "matrix.csv", matrix.symbols)
    summary = {"k": matrix.num_sensors, "n": n, "analytic": spec.memoryless}
    if spec.memoryless:
        _write(outdir, "analytic.json", analytic_entropy_vector(spec).to_json())
    return summary


COMMANDS = {
    "analyze": cmd_analyze,
    "select-random": cmd_select_random,
    "select-greedy": cmd_select_greedy,
    "fuse": cmd_fuse,
    "simulate": cmd_simulate,
}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog=TOOL,
        description="Dependence analysis, subset selection and online fusion for sensor streams.",
        epilog="Exit codes:" + __doc__.split("Exit codes:")[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--config", help="JSON run config; replaces the command line")
    p.add_argument("--version", action="version", version=f"{TOOL} {_version()}")
    sub = p.add_subparsers(dest="command")

    def common(sp, needs_input=True):
        if needs_input:
            sp.add_argument("input", help="wide (t,s1..sK) or long (epoch,sensor_id,value) CSV")
        sp.add_argument("--output-dir", "-o", default="out")
        sp.add_argument("--seed", type=int, default=0)

    def matrix_opts(sp):
        sp.add_argument("--bins", type=int, default=2, help="quantization bins for long-layout readings")
        sp.add_argument("--alphabet", type=int, default=None, help="alphabet size for wide CSVs (default: max symbol + 1)")

    a = sub.add_parser("analyze", help="entropy vector + polymatroid diagnostics")
    common(a)
    matrix_opts(a)
    a.add_argument("--estimator", choices=["empirical", "lz"], default="empirical")
    a.add_argument("--subset", action="append", help="subset as comma-separated sensor ids (repeatable)")
    a.add_argument("--lattice-cap", type=int, default=24)
    a.add_argument("--tolerance", type=float, default=1e-9)
    a.add_argument("--round", action="store_true", help="round to a candidate matroid")
    a.add_argument("--unit", type=float, default=None, help="rounding unit in bits (default log2 alphabet)")
    a.add_argument("--phrases", metavar="SUBSET", help="dump the LZ78 phrases of this subset to phrases.txt")

    r = sub.add_parser("select-random", help="Bernoulli(q) random sensor selection")
    r.add_argument("input", nargs="?", default=None)
    r.add_argument("--output-dir", "-o", default="out")
    r.add_argument("--seed", type=int, default=0)
    matrix_opts(r)
    r.add_argument("--k", type=int, default=None, help="number of sensors when no input is given")
    r.add_argument("--q", type=float, required=True)
    r.add_argument("--trials", type=int, default=1)
    r.add_argument("--size", type=int, default=None, help="keep only draws of exactly this size")
    r.add_argument("--estimator", choices=["empirical", "lz"], default=None)

    g = sub.add_parser("select-greedy", help="threshold greedy selection")
    common(g)
    matrix_opts(g)
    g.add_argument("--epsilon", type=float, default=0.0)
    g.add_argument("--estimator", choices=["empirical", "lz"], default="empirical")
    g.add_argument("--workers", type=int, default=1)

    f = sub.add_parser("fuse", help="online fusion by exponential weighting")
    common(f)
    f.add_argument("--truth", help="CSV with header t,x (otherwise the input's x column)")
    f.add_argument("--adversarial", action="store_true", help="generate an alternating-trap truth when none is given")
    f.add_argument("--family", action="append", default=[], help="pair-average | ordered-pairs | max:m | median:m (repeatable)")
    f.add_argument("--loss", choices=["hamming", "logloss"], default="logloss")
    f.add_argument("--delta", type=float, default=1e-3, help="log-loss clamp")
    f.add_argument("--eta", default="auto")
    f.add_argument("--doubling", action="store_true", help="restart per doubling block")
    f.add_argument("--stream", action="store_true", help="expand synthesized sensors step by step")
    f.add_argument("--weights-stride", type=int, default=1)

    s = sub.add_parser("simulate", help="generate a synthetic ensemble")
    s.add_argument("spec", help="SourceSpec or scenario JSON")
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--output-dir", "-o", default="out")
    s.add_argument("--seed", type=int, default=None, help="unused; the seed lives in the spec")
    return p


def config_to_argv(cfg: dict) -> list[str]:
    """``{"command": "fuse", "input": "x.csv", "family": ["max:2"], ...}`` -> argv."""
    cfg = dict(cfg)
    try:
        command = cfg.pop("command")
    except KeyError:
        raise InputFormatError("run config needs a 'command'") from None
    argv = [command]
    for key in ("input", "spec"):
        if key in cfg:
            val = cfg.pop(key)
            if val is not None:
                argv.append(str(val))
    for key, val in cfg.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
        elif isinstance(val, list):
            for v in val:
                argv += [flag, str(v)]
        elif val is not None:
            argv += [flag, str(val)]
    return argv


def _error(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    config_path = None
    if args.config:
        config_path = args.config
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            return _error(EXIT_IO, "io", str(exc))
        except json.JSONDecodeError as exc:
            return _error(EXIT_FORMAT, "format", f"{args.config}: {exc}")
        try:
            argv = config_to_argv(cfg)
            args = parser.parse_args(argv)
        except InputFormatError as exc:
            return _error(EXIT_FORMAT, "format", str(exc))
        except SystemExit as exc:
            return int(exc.code or EXIT_USAGE)
    if not args.command:
        parser.print_help()
        return EXIT_USAGE

    outdir = Path(args.output_dir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](args, outdir)
        resolved = {k: v for k, v in vars(args).items() if k != "config"}
        manifest = {
            "tool": TOOL,
            "version": _version(),
            "command": args.command,
            "config": resolved,
            "config_file": config_path,
            "argv": argv,
            "summary": summary,
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        }
        _write(outdir, "manifest.json", json.dumps(manifest, indent=2, default=_jsonable) + "\n")
    except EmptyInputError as exc:
        return _error(EXIT_EMPTY, "empty_input", str(exc))
    except InputFormatError as exc:
        return _error(EXIT_FORMAT, "format", str(exc))
    except SensorNetError as exc:
        return _error(EXIT_VALIDATION, "validation", str(exc))
    except OSError as exc:
        return _error(EXIT_IO, "io", str(exc))
    return EXIT_OK


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


if __name__ == "__main__":
    sys.exit(main())
