"""``svrobust`` command line.

Each subcommand first resolves its flags into a plain JSON config (absolute
paths, full bounds table, MC settings, seeds), then executes from that config
alone. ``run.json`` in the output directory records the config, so
``svrobust replay run.json --out DIR`` re-executes the command and compares
output digests.

Exit status: 0 success, 1 invalid input or usage, 2 numerical or run failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import artifacts
from .artifacts import RunArtifact, SchemaError, read_json, validate_json, write_json
from .bootstrap import DEFAULT_TRIALS, BootstrapConfig, BootstrapError, run_bootstrap
from .calibration import (
    CalibrationError,
    Objective,
    ObjectiveEvaluationError,
    UndefinedMeasureError,
    calibrate,
)
from .market_data import QuoteParseError, QuoteValidationError, load_meta, load_surface, write_surface
from .mc_filter import PRESETS, filter_test
from .models import DEFAULT_EPSILON, MODELS, FSVParams, ParamBounds, from_dict, to_dict, validate
from .pricing import McConfig, PricingError, PricingRequest, price_bates, price_fsv, price_heston
from .robustness import kxt_bubble_data, pairwise_correlations, price_dispersion, qn_plot_data, scatter_data
from .synthetic import SynthSpec, generate_surface

log = logging.getLogger("svrobust")

EXIT_OK, EXIT_INPUT, EXIT_RUN = 0, 1, 2

RUN_ERRORS = (PricingError, CalibrationError, ObjectiveEvaluationError, BootstrapError,
              UndefinedMeasureError, FloatingPointError)
INPUT_ERRORS = (OSError, QuoteParseError, QuoteValidationError, SchemaError, json.JSONDecodeError,
                ValueError, KeyError, TypeError)


class UsageError(Exception):
    pass


class ReplayMismatch(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _json_arg(text: str):
    """A JSON document given inline or as a file path."""
    path = Path(text)
    if not text.lstrip().startswith(("{", "[")):
        if not path.exists():
            raise FileNotFoundError(f"no such file: {text}")
        return read_json(path)
    return json.loads(text)


# ---------------------------------------------------------------------------
# config resolution (flags -> JSON config)


def _resolve_surface(args) -> dict:
    path = Path(args.surface)
    if not path.is_file():
        raise FileNotFoundError(f"surface file not found: {args.surface}")
    meta_path = Path(args.meta) if args.meta else path.with_name("meta.json")
    meta = {}
    if args.meta or meta_path.is_file():
        if not meta_path.is_file():
            raise FileNotFoundError(f"meta file not found: {args.meta}")
        meta = load_meta(meta_path)
        validate_json(meta, "meta")
    spot = args.spot if args.spot is not None else meta.get("spot")
    rate = args.rate if args.rate is not None else meta.get("rate")
    if spot is None or rate is None:
        raise ValueError("spot and rate are required: pass --meta or --spot/--rate")
    return {
        "path": str(path.resolve()),
        "meta": str(meta_path.resolve()) if meta else None,
        "spot": float(spot),
        "rate": float(rate),
        "valuation_date": meta.get("valuation_date"),
    }


def _resolve_bounds(args) -> dict:
    bounds = ParamBounds.default()
    if args.bounds:
        overrides = _json_arg(args.bounds)
        if not isinstance(overrides, dict):
            raise ValueError("bounds override must be a JSON object of name: [lower, upper]")
        bounds = bounds.with_overrides(overrides)
    return bounds.to_dict()


def _resolve_mc(args, model: str) -> dict | None:
    if model != "fsv":
        return None
    seed = args.mc_seed if args.mc_seed is not None else args.seed
    return McConfig(paths=args.mc_paths, steps_per_year=args.mc_steps, seed=seed).to_dict()


def _mc(config: dict | None, workers: int = 1) -> McConfig | None:
    if config is None:
        return None
    return McConfig(**{**config, "workers": workers})


def _surface_from(config: dict):
    s = config["surface"]
    return load_surface(s["path"], s["spot"], s["rate"], s["valuation_date"])


def _surface_inputs(art: RunArtifact, config: dict) -> None:
    art.add_input("surface", config["surface"]["path"])
    if config["surface"]["meta"]:
        art.add_input("meta", config["surface"]["meta"])


def resolve_config(args) -> dict:
    cmd = args.command
    if cmd == "price":
        params = _json_arg(args.params)
        if args.model == "fsv":
            params.setdefault("epsilon", args.epsilon)
        return {
            "model": args.model,
            "params": params,
            "spot": args.spot,
            "strike": args.strike,
            "maturity": args.maturity,
            "rate": args.rate,
            "mc": _resolve_mc(args, args.model),
        }
    if cmd == "calibrate":
        return {
            "model": args.model,
            "surface": _resolve_surface(args),
            "bounds": _resolve_bounds(args),
            "budget": args.budget,
            "seed": args.seed,
            "epsilon": args.epsilon,
            "mc": _resolve_mc(args, args.model),
        }
    if cmd == "bootstrap-run":
        return {
            "model": args.model,
            "surface": _resolve_surface(args),
            "bounds": _resolve_bounds(args),
            "trials": args.trials,
            "budget": args.budget,
            "seed": args.seed,
            "epsilon": args.epsilon,
            "mc": _resolve_mc(args, args.model),
            "reference": not args.no_reference,
        }
    if cmd in ("robustness-report", "mc-filter"):
        path = Path(args.run)
        if path.is_dir():
            path = path / "bootstrap_run.json"
        if not path.is_file():
            raise FileNotFoundError(f"bootstrap run artifact not found: {args.run}")
        config = {"run": str(path.resolve())}
        if cmd == "mc-filter":
            if args.jumps:
                config["param"] = PRESETS["jumps"]
            elif args.hurst:
                config["param"] = PRESETS["hurst"]
            else:
                config["param"] = args.param
        return config
    if cmd == "synth-gen":
        path = Path(args.spec)
        if not path.is_file():
            raise FileNotFoundError(f"spec file not found: {args.spec}")
        spec = read_json(path)
        validate_json(spec, "synth_spec")
        return {"spec_path": str(path.resolve()), "spec": SynthSpec.from_dict(spec).to_dict()}
    raise UsageError(f"unknown command {cmd!r}")


# ---------------------------------------------------------------------------
# executors (JSON config -> outputs)


def _exec_price(config: dict, out: Path | None, workers: int) -> dict:
    params = from_dict(config["model"], config["params"])
    bad = validate(params)
    if bad:
        raise ValueError("parameters out of bounds: " + "; ".join(map(str, bad)))
    req = PricingRequest(config["spot"], config["strike"], config["maturity"], config["rate"], params)
    if isinstance(params, FSVParams):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = price_fsv(req, _mc(config["mc"], workers))
        result = {"model": "fsv", "price": res.price, "stderr": res.stderr,
                  "floor_fraction": res.floor_fraction, "warning": res.warning}
        if res.warning:
            log.warning("FSV price: %s", res.warning)
    elif config["model"] == "bates":
        result = {"model": "bates", "price": price_bates(req)}
    else:
        result = {"model": "heston", "price": price_heston(req)}
    validate_json(result, "price")
    print(json.dumps(result))
    if out is not None:
        art = RunArtifact("price", config)
        path = out / "price.json"
        write_json(path, result)
        art.add_output("price", path)
        art.write(out)
    return result


def _exec_calibrate(config: dict, out: Path, workers: int) -> dict:
    surface = _surface_from(config)
    art = RunArtifact("calibrate", config)
    _surface_inputs(art, config)
    obj = Objective.for_surface(surface, config["model"], _mc(config["mc"], workers), config["epsilon"])
    log.info("calibrating %s to %d quotes, budget %d, seed %d",
             config["model"], len(surface), config["budget"], config["seed"])
    result = calibrate(obj, ParamBounds(config["bounds"]), config["budget"], config["seed"])
    data = result.to_dict()
    validate_json(data, "calibration")
    path = out / "calibration.json"
    write_json(path, data)
    art.add_output("calibration", path)
    art.write(out)
    log.info("AARE %.4g, Fval %.4g, %d evaluations, converged=%s",
             result.aare, result.objective_value, result.evaluations, result.converged)
    print(json.dumps(data))
    return data


def _bootstrap_config(config: dict) -> BootstrapConfig:
    return BootstrapConfig(
        model=config["model"],
        bounds=ParamBounds(config["bounds"]),
        trials=config["trials"],
        budget=config["budget"],
        master_seed=config["seed"],
        mc=_mc(config["mc"]),
        epsilon=config["epsilon"],
    )


def write_trials_csv(run, path: Path) -> None:
    names = run.param_names
    rows = []
    for o in run.successful:
        vec = [to_dict(o.result.theta_hat)[n] for n in names]
        rows.append([o.trial, *map(_fmt, vec), _fmt(o.result.objective_value), _fmt(o.full_aare)])
    _write_csv(path, ["trial", *names, "fval", "aare"], rows)


def _exec_bootstrap(config: dict, out: Path, workers: int) -> dict:
    surface = _surface_from(config)
    art = RunArtifact("bootstrap-run", config)
    _surface_inputs(art, config)
    bcfg = _bootstrap_config(config)
    log.info("bootstrap: %s, M=%d, budget %d, master seed %d, %d worker(s)",
             bcfg.model, bcfg.trials, bcfg.budget, bcfg.master_seed, workers)
    run = run_bootstrap(surface, bcfg, workers=workers, with_reference=config["reference"])
    if run.failures:
        log.warning("%d trial(s) failed: %s", len(run.failures), sorted(run.failures))
    run_path = out / "bootstrap_run.json"
    artifacts.save_bootstrap(run, run_path)
    trials_path = out / "trials.csv"
    write_trials_csv(run, trials_path)
    art.add_output("bootstrap_run", run_path)
    art.add_output("trials", trials_path)
    art.write(out)
    summary = {"trials": bcfg.trials, "successful": len(run.successful), "theta_bar": to_dict(run.theta_bar)}
    print(json.dumps(summary))
    return summary


def _exec_robustness(config: dict, out: Path, workers: int) -> dict:
    run = artifacts.load_bootstrap(config["run"])
    art = RunArtifact("robustness-report", config)
    art.add_input("bootstrap_run", config["run"])
    surface = run.surface

    disp = price_dispersion(run)
    path = out / "dispersion.csv"
    _write_csv(path, ["j", "K", "T", "mid", "Cbar", "BRE", "V"], [
        [j, _fmt(q.strike), _fmt(q.maturity), _fmt(disp.mid[j]), _fmt(disp.mean_price[j]),
         _fmt(disp.bre[j]), _fmt(disp.variance[j])]
        for j, q in enumerate(surface.quotes)
    ])
    art.add_output("dispersion", path)

    scatter = scatter_data(run)
    path = out / "scatter.json"
    data = scatter.to_dict()
    validate_json(data, "scatter")
    write_json(path, data)
    art.add_output("scatter", path)

    names, corr = pairwise_correlations(run)
    path = out / "correlations.csv"
    _write_csv(path, ["param", *names], [
        [a, *(artifacts.UNDEFINED if math.isnan(c) else _fmt(c) for c in corr[i])]
        for i, a in enumerate(names)
    ])
    art.add_output("correlations", path)

    values = run.thetas
    for i, name in enumerate(names):
        qn = qn_plot_data(values[:, i])
        path = out / f"qn_{name}.csv"
        _write_csv(path, ["k", "normal_quantile", "value"],
                   [[k + 1, _fmt(z), _fmt(x)] for k, (z, x) in enumerate(qn)])
        art.add_output(f"qn_{name}", path)

    bubbles = kxt_bubble_data(disp, surface)
    path = out / "bubbles.csv"
    rows = [["BRE", _fmt(k), _fmt(t), _fmt(v), _fmt(bubbles.spot)] for k, t, v in bubbles.bre]
    rows += [["V", _fmt(k), _fmt(t), _fmt(v), _fmt(bubbles.spot)] for k, t, v in bubbles.variance]
    _write_csv(path, ["measure", "K", "T", "value", "spot"], rows)
    art.add_output("bubbles", path)

    art.write(out)
    summary = {"options": len(surface), "trials": int(values.shape[0]),
               "max_BRE": float(disp.bre.max()), "max_V": float(disp.variance.max())}
    print(json.dumps(summary))
    return summary


def _exec_filter(config: dict, out: Path, workers: int) -> dict:
    run = artifacts.load_bootstrap(config["run"])
    art = RunArtifact("mc-filter", config)
    art.add_input("bootstrap_run", config["run"])
    report = filter_test(run, config["param"])
    data = report.to_dict()
    validate_json(data, "filter_report")
    path = out / "filter_report.json"
    write_json(path, data)
    art.add_output("filter_report", path)
    path = out / f"ecdf_{report.param}.csv"
    rows = []
    for group, (x, f) in report.ecdfs().items():
        rows += [[group, _fmt(a), _fmt(b)] for a, b in zip(x, f)]
    _write_csv(path, ["group", "x", "F"], rows)
    art.add_output(f"ecdf_{report.param}", path)
    art.write(out)
    summary = {k: data[k] for k in ("param", "ks_statistic", "p_value", "reject_at_5pct")}
    print(json.dumps(summary))
    return summary


def _exec_synth(config: dict, out: Path, workers: int) -> dict:
    spec = SynthSpec.from_dict(config["spec"])
    art = RunArtifact("synth-gen", config)
    art.add_input("spec", config["spec_path"])
    surface = generate_surface(spec)
    quotes, meta = out / "quotes.csv", out / "meta.json"
    write_surface(surface, quotes, meta)
    art.add_output("quotes", quotes)
    art.add_output("meta", meta)
    art.write(out)
    summary = {"quotes": len(surface), "path": str(quotes)}
    print(json.dumps(summary))
    return summary


EXECUTORS = {
    "price": _exec_price,
    "calibrate": _exec_calibrate,
    "bootstrap-run": _exec_bootstrap,
    "robustness-report": _exec_robustness,
    "mc-filter": _exec_filter,
    "synth-gen": _exec_synth,
}


def execute(command: str, config: dict, out: Path | None, workers: int = 1) -> dict:
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    return EXECUTORS[command](config, out, workers)


def replay(run_path: str | Path, out: Path, workers: int = 1) -> dict:
    """Re-execute a recorded run into ``out`` and compare output digests."""
    run_path = Path(run_path)
    if run_path.is_dir():
        run_path = run_path / "run.json"
    if not run_path.is_file():
        raise FileNotFoundError(f"run artifact not found: {run_path}")
    recorded = RunArtifact.read(run_path)
    for name, ref in recorded.inputs.items():
        if not Path(ref["path"]).is_file():
            raise FileNotFoundError(f"input {name} not found: {ref['path']}")
        digest = artifacts.sha256_file(ref["path"])
        if digest != ref["sha256"]:
            raise ValueError(f"input {name} changed since the run: {ref['path']}")
    execute(recorded.command, recorded.config, out, workers)
    fresh = RunArtifact.read(out / "run.json")
    comparison = {}
    for name, ref in recorded.outputs.items():
        got = fresh.outputs.get(name, {}).get("sha256")
        comparison[name] = {"expected": ref["sha256"], "actual": got, "match": got == ref["sha256"]}
    extra = sorted(set(fresh.outputs) - set(recorded.outputs))
    summary = {"command": recorded.command, "match": all(c["match"] for c in comparison.values()) and not extra,
               "outputs": comparison, "unexpected_outputs": extra}
    print(json.dumps(summary))
    if not summary["match"]:
        raise ReplayMismatch(f"replay of {run_path} produced different outputs")
    return summary


# ---------------------------------------------------------------------------
# argument parsing


def _add_model(p, required=True):
    p.add_argument("--model", choices=MODELS, required=required, help="model family")


def _add_surface(p):
    p.add_argument("--surface", required=True, help="quote CSV (strike,maturity,bid,ask)")
    p.add_argument("--meta", help="JSON sidecar with spot, rate, valuation_date (default: meta.json next to the CSV)")
    p.add_argument("--spot", type=float, help="spot price (overrides the sidecar)")
    p.add_argument("--rate", type=float, help="risk-free rate (overrides the sidecar)")


def _add_calibration(p):
    p.add_argument("--bounds", help="JSON object (inline or file) overriding parameter bounds")
    p.add_argument("--budget", type=int, default=3000, help="objective evaluations per calibration")


def _add_seed(p, help_text="random seed"):
    p.add_argument("--seed", type=_u64, default=0, help=help_text)


def _add_mc(p):
    p.add_argument("--epsilon", type=_positive, default=DEFAULT_EPSILON, help="FSV approximation factor")
    p.add_argument("--mc-paths", type=int, default=20_000, help="FSV simulation paths")
    p.add_argument("--mc-steps", type=int, default=252, help="FSV time steps per year")
    p.add_argument("--mc-seed", type=_u64, help="FSV path seed (default: --seed)")


def _add_out(p, required=True):
    p.add_argument("--out", required=required, help="output directory")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"{text} must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="svrobust", description="Calibration robustness workbench for SV option models.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("price", help="price one European call")
    _add_model(p)
    p.add_argument("--params", required=True, help="parameter JSON (inline or file)")
    p.add_argument("--spot", type=float, required=True)
    p.add_argument("--strike", type=float, required=True)
    p.add_argument("--maturity", type=float, required=True)
    p.add_argument("--rate", type=float, default=0.0)
    _add_seed(p, "FSV path seed")
    _add_mc(p)
    p.add_argument("--workers", type=int, default=1, help="threads for FSV path blocks")
    _add_out(p, required=False)

    p = sub.add_parser("calibrate", help="weighted least-squares calibration")
    _add_model(p)
    _add_surface(p)
    _add_calibration(p)
    _add_seed(p)
    _add_mc(p)
    p.add_argument("--workers", type=int, default=1, help="threads for FSV path blocks")
    _add_out(p)

    p = sub.add_parser("bootstrap-run", help="bootstrap the option structure and calibrate each resample")
    _add_model(p)
    _add_surface(p)
    _add_calibration(p)
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS, help="bootstrap trials M")
    _add_seed(p, "master seed")
    _add_mc(p)
    p.add_argument("--workers", type=int, default=1, help="parallel trial processes")
    p.add_argument("--no-reference", action="store_true", help="skip the full-surface reference calibration")
    _add_out(p)

    p = sub.add_parser("robustness-report", help="BRE, variance measure and plot data from a bootstrap run")
    p.add_argument("run", help="bootstrap_run.json or the directory holding it")
    _add_out(p)

    p = sub.add_parser("mc-filter", help="Monte-Carlo filtering KS test on one parameter")
    p.add_argument("run", help="bootstrap_run.json or the directory holding it")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--param", help="parameter name")
    g.add_argument("--jumps", action="store_true", help="test the jump intensity lambda")
    g.add_argument("--hurst", action="store_true", help="test the Hurst exponent")
    _add_out(p)

    p = sub.add_parser("synth-gen", help="synthetic surface from a spec JSON")
    p.add_argument("--spec", required=True, help="SynthSpec JSON file")
    _add_out(p)

    p = sub.add_parser("replay", help="re-run a command from its run.json and compare outputs")
    p.add_argument("artifact", help="run.json or the directory holding it")
    p.add_argument("--workers", type=int, default=1)
    _add_out(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    np.seterr(all="ignore")
    try:
        workers = getattr(args, "workers", 1)
        if workers < 1:
            raise ValueError("--workers must be at least 1")
        if args.command == "replay":
            replay(args.artifact, Path(args.out), workers)
        else:
            config = resolve_config(args)
            out = Path(args.out) if args.out else None
            execute(args.command, config, out, workers)
    except RUN_ERRORS + (ReplayMismatch,) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUN
    except INPUT_ERRORS as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
