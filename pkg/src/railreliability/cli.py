"""Command-line pipeline: ingest, train, predict, evaluate.

One JSON config document drives every subcommand; unknown keys are
rejected, flags override config values, and the fully resolved config
(every default filled in) is printed in the run header and hashed into
every output file. With the defaults, the whole chain runs inside one
output directory:

    railrel synth-gen --out out
    railrel ingest --out out
    railrel build-transfers --out out
    railrel train-transfer --out out
    railrel train-delay --out out
    railrel predict-journey --out out
    railrel evaluate --out out
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .boosting import TransferMissBooster
from .delaymodel import (
    DELAY_FEATURE_NAMES,
    McmcConfig,
    MixturePosterior,
    delay_training_matrix,
    fit_mcmc,
)
from .delaymodel.posterior import elpd as posterior_elpd
from .errors import (
    MissingDataError,
    ModelNotAcceptedError,
    RailReliabilityError,
    SchemaError,
)
from .events import (
    ClassificationRules,
    FilterConfig,
    RuntimeTable,
    count_unknown_categories,
    filter_events,
    join_runtimes,
    read_events_csv,
    write_events_csv,
)
from .gtfs import read_runtime_table_from_gtfs
from .journey import (
    BoosterTransferModel,
    JourneySpec,
    LegCatalog,
    NextTrainAlternatives,
    PosteriorDelayModel,
    sample_many,
)
from .metrics import auroc, calibration_bins, reliability_buffer_time, reliability_rating, summary_stats
from .synth import (
    DEFAULT_DELAY_COEFFICIENTS,
    INTERCEPT_ONLY_DELAY_COEFFICIENTS,
    DelayGroundTruth,
    SynthConfig,
    TransferGroundTruth,
    emit_corpus,
)
from .times import parse_service_date
from .transfers import FEATURE_NAMES, build_transfer_dataset, read_transfers_matrix, write_transfers_csv

COMMANDS = (
    "ingest",
    "build-transfers",
    "train-transfer",
    "train-delay",
    "predict-journey",
    "evaluate",
    "synth-gen",
)


def default_config() -> dict:
    return {
        "seed": 0,
        "paths": {
            "out_dir": "out",
            "events": "",
            "runtimes": "",
            "gtfs_trips": "",
            "gtfs_stop_times": "",
            "filtered_events": "",
            "filter_report": "",
            "transfers": "",
            "transfer_model": "",
            "delay_posterior": "",
            "delay_diagnostics": "",
            "journey": "",
            "legs": "",
            "samples": "",
            "report": "",
            "eval_transfers": "",
            "eval_events": "",
            "rules_file": "",
        },
        "filter": {"min_delay_minutes": -60.0, "max_delay_minutes": 600.0},
        "transfer_window": {"min_ptt_minutes": 3.0, "max_ptt_minutes": 60.0},
        "transfer_model": {
            "n_rounds": 500,
            "max_depth": 5,
            "learning_rate": 0.1,
            "subsample": 0.8,
            "gamma": 0.1,
            "reg_lambda": 1.0,
            "min_child_weight": 1.0,
            "monotone_ptt": -1,
        },
        "delay_model": {
            "n_components": 2,
            "shift_minutes": 6.0,
            "n_chains": 4,
            "n_warmup": 1000,
            "n_samples": 1000,
            "thin": 3,
            "rhat_threshold": 1.01,
            "ess_threshold": 400.0,
        },
        "journey": {"n_samples": 1000, "max_consecutive_misses": 3, "rbt_upper_pct": 95.0},
        "synth": {
            "n_stations": 6,
            "trains_per_day": 40,
            "days": 40,
            "headway_minutes": 20.0,
            "hop_minutes": 22.0,
            "dwell_minutes": 2.0,
            "intercity_fraction": 0.4,
            "start_date": "2024-01-15",
            "intercept_only_delays": False,
            "misspecified_delays": False,
        },
    }


def _merge_checked(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise SchemaError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise SchemaError(f"config key {where!r} must be an object")
            out[key] = _merge_checked(base[key], value, where)
        else:
            out[key] = value
    return out


def resolve_config(args: argparse.Namespace) -> dict:
    config = default_config()
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        config = _merge_checked(config, raw)
    if args.out is not None:
        config["paths"]["out_dir"] = args.out
    if args.seed is not None:
        config["seed"] = args.seed
    if args.samples is not None:
        config["journey"]["n_samples"] = args.samples

    out_dir = config["paths"]["out_dir"]
    defaults = {
        "events": "events.csv",
        "runtimes": "runtimes.csv",
        "filtered_events": "filtered_events.csv",
        "filter_report": "filter_report.json",
        "transfers": "transfers.csv",
        "transfer_model": "transfer_model.json",
        "delay_posterior": "delay_posterior.json",
        "delay_diagnostics": "delay_diagnostics.csv",
        "journey": "journey.json",
        "legs": "legs.csv",
        "samples": "samples.csv",
        "report": "report.json",
    }
    for key, name in defaults.items():
        if not config["paths"][key]:
            config["paths"][key] = str(Path(out_dir) / name)
    if not config["paths"]["eval_transfers"]:
        config["paths"]["eval_transfers"] = config["paths"]["transfers"]
    if not config["paths"]["eval_events"]:
        config["paths"]["eval_events"] = config["paths"]["filtered_events"]
    return config


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _rules(config: dict) -> ClassificationRules:
    path = config["paths"]["rules_file"]
    return ClassificationRules.from_json(path) if path else ClassificationRules()


def _write_json(path: str, doc: dict, chash: str):
    doc = dict(doc)
    doc["config_hash"] = chash
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")


def _write_table(path: str, header: list, rows: list, chash: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# config_hash={chash}\n")
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_synth_gen(config: dict, chash: str) -> dict:
    s = config["synth"]
    coeffs = INTERCEPT_ONLY_DELAY_COEFFICIENTS if s["intercept_only_delays"] else DEFAULT_DELAY_COEFFICIENTS
    synth_config = SynthConfig(
        n_stations=s["n_stations"],
        trains_per_day=s["trains_per_day"],
        headway_minutes=s["headway_minutes"],
        hop_minutes=s["hop_minutes"],
        dwell_minutes=s["dwell_minutes"],
        intercity_fraction=s["intercity_fraction"],
        start_date=parse_service_date(s["start_date"]),
        transfer_truth=TransferGroundTruth(),
        delay_truth=DelayGroundTruth(
            coefficients=coeffs, shift=config["delay_model"]["shift_minutes"]
        ),
        misspecified_delays=s["misspecified_delays"],
        seed=config["seed"],
    )
    return emit_corpus(synth_config, s["days"], config["paths"]["out_dir"], config_hash=chash)


def cmd_ingest(config: dict, chash: str) -> dict:
    paths = config["paths"]
    events, n_bad = read_events_csv(paths["events"])
    if paths["gtfs_trips"] and paths["gtfs_stop_times"]:
        table = read_runtime_table_from_gtfs(paths["gtfs_trips"], paths["gtfs_stop_times"])
    elif Path(paths["runtimes"]).exists():
        table = RuntimeTable.from_csv(paths["runtimes"])
    else:
        raise MissingDataError(
            "no runtime source: provide paths.runtimes or paths.gtfs_trips + paths.gtfs_stop_times"
        )
    joined = join_runtimes(events, table)
    kept, report = filter_events(
        joined,
        FilterConfig(
            min_delay=config["filter"]["min_delay_minutes"],
            max_delay=config["filter"]["max_delay_minutes"],
        ),
    )
    write_events_csv(paths["filtered_events"], kept, config_hash=chash, include_runtimes=True)
    summary = report.to_json_dict()
    summary["n_unparseable_rows"] = n_bad
    summary["n_unknown_category_events"] = count_unknown_categories(kept, _rules(config))
    _write_json(paths["filter_report"], summary, chash)
    return summary


def cmd_build_transfers(config: dict, chash: str) -> dict:
    paths = config["paths"]
    events, _ = read_events_csv(paths["filtered_events"])
    records = build_transfer_dataset(
        events,
        _rules(config),
        min_ptt=config["transfer_window"]["min_ptt_minutes"],
        max_ptt=config["transfer_window"]["max_ptt_minutes"],
    )
    write_transfers_csv(paths["transfers"], records, config_hash=chash)
    labelled = [r for r in records if r.reached is not None]
    missed = sum(1 for r in labelled if r.reached is False)
    return {
        "n_records": len(records),
        "n_labelled": len(labelled),
        "miss_rate": missed / len(labelled) if labelled else None,
    }


def cmd_train_transfer(config: dict, chash: str) -> dict:
    paths = config["paths"]
    X, y = read_transfers_matrix(paths["transfers"])
    params = config["transfer_model"]
    monotone = {"ptt": params["monotone_ptt"]} if params["monotone_ptt"] else None
    model = TransferMissBooster(
        n_rounds=params["n_rounds"],
        max_depth=params["max_depth"],
        learning_rate=params["learning_rate"],
        subsample=params["subsample"],
        gamma=params["gamma"],
        reg_lambda=params["reg_lambda"],
        min_child_weight=params["min_child_weight"],
        monotone_constraints=monotone,
        feature_names=FEATURE_NAMES,
        random_state=config["seed"],
    )
    model.fit(X, y)
    model.save(paths["transfer_model"], config_hash=chash)
    return {
        "n_rows": int(X.shape[0]),
        "miss_rate": float(np.mean(y)),
        "train_auroc": auroc(model.predict_miss_probability(X), y),
        "final_train_logloss": model.train_logloss_[-1] if model.train_logloss_ else None,
    }


def cmd_train_delay(config: dict, chash: str) -> dict:
    paths = config["paths"]
    events, _ = read_events_csv(paths["filtered_events"])
    X, y = delay_training_matrix(events, _rules(config))
    if y.size == 0:
        raise MissingDataError("no arrival events with delays in the filtered event file")
    params = config["delay_model"]
    posterior = fit_mcmc(
        X,
        y,
        n_components=params["n_components"],
        shift=params["shift_minutes"],
        feature_names=DELAY_FEATURE_NAMES,
        config=McmcConfig(
            n_chains=params["n_chains"],
            n_warmup=params["n_warmup"],
            n_samples=params["n_samples"],
            thin=params["thin"],
            rhat_threshold=params["rhat_threshold"],
            ess_threshold=params["ess_threshold"],
        ),
        random_state=config["seed"],
    )
    posterior.save(paths["delay_posterior"], config_hash=chash)
    rows = [
        [
            r["parameter"],
            repr(r["mean"]),
            repr(r["q2.5"]),
            repr(r["q97.5"]),
            repr(r["rhat"]) if r["rhat"] != "" else "",
            repr(r["ess"]) if r["ess"] != "" else "",
        ]
        for r in posterior.summary_rows()
    ]
    _write_table(
        paths["delay_diagnostics"],
        ["parameter", "mean", "q2.5", "q97.5", "rhat", "ess"],
        rows,
        chash,
    )
    worst_rhat = max(d.rhat for d in posterior.diagnostics.values())
    worst_ess = min(d.ess for d in posterior.diagnostics.values())
    if not posterior.accepted:
        raise ModelNotAcceptedError(
            "delay model failed convergence diagnostics",
            worst_rhat=worst_rhat,
            worst_ess=worst_ess,
            rhat_threshold=params["rhat_threshold"],
            ess_threshold=params["ess_threshold"],
            posterior=str(paths["delay_posterior"]),
        )
    return {
        "n_rows": int(y.size),
        "worst_rhat": worst_rhat,
        "worst_ess": worst_ess,
        "accepted": posterior.accepted,
    }


def cmd_predict_journey(config: dict, chash: str) -> dict:
    paths = config["paths"]
    plan = JourneySpec.load(paths["journey"]).validate(
        min_ptt=config["transfer_window"]["min_ptt_minutes"],
        max_ptt=config["transfer_window"]["max_ptt_minutes"],
    )
    booster = TransferMissBooster.load(paths["transfer_model"])
    posterior = MixturePosterior.load(paths["delay_posterior"])
    if not posterior.accepted:
        raise ModelNotAcceptedError("delay posterior was not accepted; refusing to predict")
    alternatives = None
    if Path(paths["legs"]).exists():
        alternatives = NextTrainAlternatives(
            LegCatalog.from_csv(paths["legs"]),
            min_transfer=config["transfer_window"]["min_ptt_minutes"],
        )
    sample_set = sample_many(
        plan,
        BoosterTransferModel(booster),
        PosteriorDelayModel(posterior),
        alternatives,
        n=config["journey"]["n_samples"],
        seed=config["seed"],
        max_consecutive_misses=config["journey"]["max_consecutive_misses"],
    )
    sample_set.write_csv(paths["samples"], config_hash=chash)
    completed = sample_set.completed_delays
    report: dict = {
        "n_samples": sample_set.n,
        "na_fraction": sample_set.na_fraction,
        "reliability_rating": reliability_rating(sample_set),
        "planned_path": list(plan.path),
    }
    try:
        report["reliability_buffer_time"] = reliability_buffer_time(
            sample_set.delays, upper_pct=config["journey"]["rbt_upper_pct"]
        )
    except RailReliabilityError as exc:
        report["reliability_buffer_time"] = None
        report["rbt_unavailable_reason"] = exc.message
    if completed.size:
        report["delay_quantiles"] = {
            f"p{int(p * 100):02d}": metrics.quantile(completed, p) for p in (0.05, 0.25, 0.5, 0.75, 0.95)
        }
    _write_json(paths["report"], report, chash)
    return report


def cmd_evaluate(config: dict, chash: str) -> dict:
    paths = config["paths"]
    out_dir = Path(paths["out_dir"])
    result: dict = {}

    if Path(paths["eval_transfers"]).exists() and Path(paths["transfer_model"]).exists():
        X, y = read_transfers_matrix(paths["eval_transfers"])
        model = TransferMissBooster.load(paths["transfer_model"])
        scores = model.predict_miss_probability(X)
        bins = calibration_bins(scores, y, bins=10)
        _write_table(
            str(out_dir / "calibration.csv"),
            ["bin_low", "bin_high", "mean_predicted", "frequency", "count"],
            [[r["bin_low"], r["bin_high"], r["mean_predicted"], r["frequency"], r["count"]] for r in bins.to_rows()],
            chash,
        )
        transfer_eval = {
            "auroc": auroc(scores, y),
            "n_rows": int(X.shape[0]),
            "miss_rate": float(np.mean(y)),
            "calibration_max_deviation": bins.max_deviation(),
        }
        _write_json(str(out_dir / "eval_transfer.json"), transfer_eval, chash)
        result["transfer"] = transfer_eval

    if Path(paths["eval_events"]).exists() and Path(paths["delay_posterior"]).exists():
        events, _ = read_events_csv(paths["eval_events"])
        X, y = delay_training_matrix(events, _rules(config))
        posterior = MixturePosterior.load(paths["delay_posterior"])
        rng = np.random.default_rng(config["seed"])
        predictive = _predictive_for_rows(posterior, X, rng)
        qq = metrics.qq_points(predictive, y, k=99)
        _write_table(
            str(out_dir / "qq.csv"),
            ["predictive_quantile", "actual_quantile"],
            [[repr(a), repr(b)] for a, b in qq],
            chash,
        )
        delay_eval = {
            "elpd": posterior_elpd(posterior, X, y),
            "n_rows": int(y.size),
            "delay_summary": summary_stats(y).to_json_dict(),
        }
        _write_json(str(out_dir / "eval_delay.json"), delay_eval, chash)
        result["delay"] = delay_eval

    if not result:
        raise MissingDataError("nothing to evaluate: no model/posterior + holdout pair found")
    return result


def _predictive_for_rows(posterior: MixturePosterior, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One posterior-predictive delay per holdout row (vectorized)."""
    from .delaymodel.density import design_matrix

    design = design_matrix(X)
    weights, beta_mu, beta_ls = posterior._coef_arrays()
    idx = rng.integers(0, weights.shape[0], size=design.shape[0])
    mu = np.einsum("np,ncp->nc", design, beta_mu[idx])
    sigma = np.exp(np.einsum("np,ncp->nc", design, beta_ls[idx]))
    if posterior.n_components == 2:
        comp = (rng.random(design.shape[0]) >= weights[idx, 0]).astype(int)
    else:
        comp = np.zeros(design.shape[0], dtype=int)
    rows = np.arange(design.shape[0])
    z = rng.lognormal(mean=mu[rows, comp], sigma=sigma[rows, comp])
    return z - posterior.shift


_DISPATCH = {
    "synth-gen": cmd_synth_gen,
    "ingest": cmd_ingest,
    "build-transfers": cmd_build_transfers,
    "train-transfer": cmd_train_transfer,
    "train-delay": cmd_train_delay,
    "predict-journey": cmd_predict_journey,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="railrel",
        description="Reliability modeling for train journeys with transfers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", "-c", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        p.add_argument("--samples", type=int, default=None, help="journey sample count (overrides config)")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        chash = config_hash(config)
        Path(config["paths"]["out_dir"]).mkdir(parents=True, exist_ok=True)
        print(f"railrel {args.command} config_hash={chash}")
        print(json.dumps(config, sort_keys=True))
        summary = _DISPATCH[args.command](config, chash)
        print(json.dumps({"command": args.command, "ok": True, "summary": summary}, sort_keys=True))
        return 0
    except ModelNotAcceptedError as exc:
        json.dump(exc.to_json_dict(), sys.stderr)
        sys.stderr.write("\n")
        return 3
    except RailReliabilityError as exc:
        json.dump(exc.to_json_dict(), sys.stderr)
        sys.stderr.write("\n")
        return 2
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        json.dump({"code": "io", "message": str(exc), "context": {}}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
