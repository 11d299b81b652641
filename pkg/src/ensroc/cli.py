"""Command-line interface.

Subcommands: synth, train, votes, roc, compare, oracle, pipeline.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
Settings resolve as flags > ``--config`` TOML file > built-in defaults; each
run writes ``<output>.manifest.json`` with the resolved values.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .bands import build_bands, default_log_floor, simultaneous_bands, write_bands_csv
from .binomial import threshold_profile
from .experiments import write_overlay_csv
from .forest import ForestConfig, load_forest, predict_votes, save_forest, train_forest
from .oracle import OracleConfig, compare_to_analytic, run_oracle, write_oracle_summary
from .roc import auc, compare_curves, estimate_roc
from .synth import GENERATORS, synth_dataset
from .votes import load_dataset, load_votes, save_dataset, save_votes

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
log = logging.getLogger("ensroc")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# argument types


def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _seed(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {s!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def _depth(s: str):
    if s.lower() in ("none", "unlimited"):
        return None
    return _positive_int(s)


def _features(s: str):
    return "sqrt" if s == "sqrt" else _positive_int(s)


def _level(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {v}")
    return v


def _fraction(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}") from None
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {v}")
    return v


def _positive_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


# --------------------------------------------------------------------------
# flag tables: dest -> (flag, type, default, help).  A default of REQUIRED
# means the value must come from the command line or the config file.

REQUIRED = object()

FOREST_FLAGS = {
    "trees": ("--trees", _positive_int, REQUIRED, "number of trees"),
    "max_depth": ("--max-depth", _depth, None, "depth bound, or 'none'"),
    "min_leaf": ("--min-leaf", _positive_int, 1, "minimum samples per leaf"),
    "max_features": ("--max-features", _features, "sqrt", "features tried per split, or 'sqrt'"),
    "resampling": ("--resampling", str, "bootstrap", "bootstrap | none | subsample"),
    "subsample_fraction": ("--subsample-fraction", _fraction, 1.0, "fraction of rows for subsample mode"),
}
ROC_FLAGS = {
    "m_eval": ("--m-eval", _positive_int, None, "ensemble size to evaluate (default: observed)"),
    "confidence": ("--confidence", _level, 0.95, "band confidence level"),
    "mode": ("--mode", str, "full", "full (with test-set resampling) | classifier"),
    "simultaneous": ("--simultaneous", None, False, "Bonferroni bands over thresholds"),
    "log_floor": ("--log-floor", _positive_float, None, "FPR floor before log10 (default 1/(10 n_neg))"),
}

COMMANDS = {
    "synth": {
        "generator": ("--generator", str, "two-gaussians", f"one of {', '.join(GENERATORS)}"),
        "n": ("--n", _positive_int, REQUIRED, "number of rows"),
        "d": ("--d", _positive_int, REQUIRED, "number of features"),
        "separation": ("--separation", float, 1.0, "two-gaussians: distance between class means"),
        "noise": ("--noise", _positive_float, 0.5, "xor-blobs: noise scale"),
        "seed": ("--seed", _seed, REQUIRED, "random seed"),
        "output": ("-o", str, REQUIRED, "output CSV"),
    },
    "train": {
        "data": ("--data", str, REQUIRED, "training dataset CSV"),
        "label_col": ("--label-col", str, "label", "label column name or index"),
        **FOREST_FLAGS,
        "seed": ("--seed", _seed, REQUIRED, "random seed"),
        "output": ("-o", str, REQUIRED, "output model file"),
    },
    "votes": {
        "model": ("--model", str, REQUIRED, "model file from 'train'"),
        "data": ("--data", str, REQUIRED, "test dataset CSV"),
        "label_col": ("--label-col", str, "label", "label column name or index"),
        "compact": ("--compact", None, False, "write label,count instead of the full matrix"),
        "seed": ("--seed", _seed, REQUIRED, "seed recorded in the manifest"),
        "output": ("-o", str, REQUIRED, "output vote CSV"),
    },
    "roc": {
        "votes": ("--votes", str, REQUIRED, "vote CSV"),
        **ROC_FLAGS,
        "output": ("-o", str, REQUIRED, "output band CSV"),
    },
    "compare": {
        "a": ("--a", str, REQUIRED, "first vote CSV"),
        "b": ("--b", str, REQUIRED, "second vote CSV"),
        "m_eval_a": ("--m-eval-a", _positive_int, None, "ensemble size for a"),
        "m_eval_b": ("--m-eval-b", _positive_int, None, "ensemble size for b"),
        "confidence": ("--confidence", _level, 0.95, "band confidence level"),
        "mode": ("--mode", str, "full", "full | classifier"),
        "output": ("-o", str, REQUIRED, "output overlay CSV"),
    },
    "oracle": {
        "votes": ("--votes", str, REQUIRED, "vote CSV"),
        "replicates": ("--replicates", _positive_int, REQUIRED, "Monte Carlo replicates"),
        "seed": ("--seed", _seed, REQUIRED, "random seed"),
        "classifier_mode": ("--classifier-mode", str, "independent-binomial",
                            "independent-binomial | shared-column-bootstrap"),
        "poisson": ("--poisson", None, False, "Poisson(1)-resample the test set"),
        "m_eval": ("--m-eval", _positive_int, None, "ensemble size (default: observed)"),
        "n_se": ("--n-se", _positive_float, 4.0, "mean tolerance in standard errors"),
        "min_pass": ("--min-pass", _fraction, 0.99, "required fraction of passing mean checks"),
        "var_rel_tol": ("--var-rel-tol", _positive_float, 0.10, "relative variance tolerance"),
        "var_min_pass": ("--var-min-pass", _fraction, 0.95, "required fraction of passing variance checks"),
        "output": ("-o", str, REQUIRED, "output summary CSV (JSON header written next to it)"),
    },
    "pipeline": {
        "train": ("--train", str, REQUIRED, "training dataset CSV"),
        "test": ("--test", str, REQUIRED, "test dataset CSV"),
        "label_col": ("--label-col", str, "label", "label column name or index"),
        **FOREST_FLAGS,
        **ROC_FLAGS,
        "compact": ("--compact", None, False, "write compact votes"),
        "seed": ("--seed", _seed, REQUIRED, "random seed"),
        "out_dir": ("--out-dir", str, REQUIRED, "directory for model, votes and bands"),
    },
}

SUMMARIES = {
    "synth": "write a synthetic labeled dataset",
    "train": "train a random forest",
    "votes": "tabulate forest votes on a test set",
    "roc": "mean ROC curve with confidence bands from a vote file",
    "compare": "difference the mean curves of two vote files",
    "oracle": "check the analytic estimates against Monte Carlo resampling",
    "pipeline": "train, vote and band in one run",
}

CHOICES = {
    "mode": ("full", "classifier"),
    "resampling": ("bootstrap", "none", "subsample"),
    "generator": GENERATORS,
    "classifier_mode": ("independent-binomial", "shared-column-bootstrap"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ensroc", description="Analytic ROC curves and confidence bands for voting ensembles."
    )
    parser.add_argument("--version", action="version", version=f"ensroc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, flags in COMMANDS.items():
        p = sub.add_parser(name, help=SUMMARIES[name])
        p.add_argument("--config", help="TOML file with defaults ([<command>] table or top level)")
        p.add_argument("-v", "--verbose", action="store_true")
        for dest, (flag, typ, _default, help_) in flags.items():
            kw = dict(dest=dest, default=argparse.SUPPRESS, help=help_)
            if typ is None:
                kw["action"] = argparse.BooleanOptionalAction if flag == "--poisson" else "store_true"
            else:
                kw["type"] = typ
                if dest in CHOICES:
                    kw["choices"] = CHOICES[dest]
            p.add_argument(flag, **kw)
    return parser


def _load_config(path, command: str) -> dict:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    table = doc.get(command, {}) if isinstance(doc.get(command), dict) else {}
    flat = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    flat.update(table)
    return {k.replace("-", "_"): v for k, v in flat.items()}


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and explicit flags; validate config values."""
    flags = COMMANDS[args.command]
    settings = {dest: spec[2] for dest, spec in flags.items()}
    if getattr(args, "config", None):
        try:
            conf = _load_config(args.config, args.command)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise UsageError(f"--config: cannot read {args.config}: {exc}") from exc
        for key, val in conf.items():
            if key not in flags:
                raise UsageError(f"--config: unknown setting {key!r} for '{args.command}'")
            flag, typ = flags[key][0], flags[key][1]
            if typ is not None and not isinstance(val, bool):
                try:
                    val = typ(str(val))
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise UsageError(f"{flag} (from --config): {exc}") from exc
            if key in CHOICES and val not in CHOICES[key]:
                raise UsageError(f"{flag} (from --config): must be one of {CHOICES[key]}")
            settings[key] = val
    for dest in flags:
        if hasattr(args, dest):
            settings[dest] = getattr(args, dest)
    missing = [flags[d][0] for d, v in settings.items() if v is REQUIRED]
    if missing:
        raise UsageError(f"missing required flag(s): {', '.join(missing)}")
    return settings


# --------------------------------------------------------------------------
# manifests


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def write_manifest(output_path, command: str, settings: dict, outputs: list[str], started: float, extra=None):
    manifest = {
        "subcommand": command,
        "config": {k: _jsonable(v) for k, v in sorted(settings.items())},
        "outputs": outputs,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "started_at": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "duration_s": round(time.time() - started, 3),
    }
    if extra:
        manifest.update({k: _jsonable(v) for k, v in extra.items()})
    path = f"{output_path}.manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


# --------------------------------------------------------------------------
# commands


def _forest_config(s: dict) -> ForestConfig:
    return ForestConfig(
        n_trees=s["trees"],
        seed=s["seed"],
        max_depth=s["max_depth"],
        min_samples_leaf=s["min_leaf"],
        max_features=s["max_features"],
        resampling=s["resampling"],
        subsample_fraction=s["subsample_fraction"],
    )


def _check_max_features(s: dict, d: int):
    mf = s["max_features"]
    if mf != "sqrt" and mf > d:
        raise UsageError(f"--max-features: {mf} exceeds the number of features ({d})")


def cmd_synth(s: dict, started: float) -> int:
    params = {"separation": s["separation"]} if s["generator"] == "two-gaussians" else {"noise": s["noise"]}
    if s["generator"] == "xor-blobs" and s["d"] < 2:
        raise UsageError("--d: xor-blobs needs at least 2 features")
    if s["n"] < 2:
        raise UsageError("--n: need at least 2 rows")
    data = synth_dataset(s["generator"], s["n"], s["d"], s["seed"], **params)
    save_dataset(data, s["output"])
    write_manifest(s["output"], "synth", s, [s["output"]], started)
    return 0


def cmd_train(s: dict, started: float) -> int:
    data = load_dataset(s["data"], s["label_col"])
    _check_max_features(s, data.d)
    model = train_forest(data, _forest_config(s))
    log.info("trained %d trees in %.2fs", model.n_trees, time.time() - started)
    save_forest(model, s["output"])
    write_manifest(
        s["output"], "train", s, [s["output"]], started,
        {"resolved_max_features": model.max_features, "n_train": data.n, "d": data.d},
    )
    print(f"trained {model.n_trees} trees on {data.n} x {data.d} (max_features={model.max_features})")
    return 0


def cmd_votes(s: dict, started: float) -> int:
    model = load_forest(s["model"])
    data = load_dataset(s["data"], s["label_col"])
    votes = predict_votes(model, data)
    save_votes(votes, s["output"], compact=s["compact"])
    write_manifest(s["output"], "votes", s, [s["output"]], started, {"m_observed": votes.m_observed, "n": votes.n})
    return 0


def _roc_outputs(votes, s: dict, out_path: str):
    est = estimate_roc(threshold_profile(votes, s["m_eval"]), votes.labels)
    make = simultaneous_bands if s["simultaneous"] else build_bands
    band = make(est, s["confidence"], s["mode"])
    write_bands_csv(band, out_path, s["log_floor"])
    floor = s["log_floor"] if s["log_floor"] is not None else default_log_floor(est.class_counts.n_neg)
    return est, band, floor


def cmd_roc(s: dict, started: float) -> int:
    votes = load_votes(s["votes"])
    est, band, floor = _roc_outputs(votes, s, s["output"])
    a = auc(est)
    write_manifest(
        s["output"], "roc", s, [s["output"]], started,
        {"auc": a, "m_observed": votes.m_observed, "m_eval": est.m_eval, "z": band.z, "log_floor": floor},
    )
    print(f"AUC {a:.6f} over {len(est)} thresholds (m_eval={est.m_eval})")
    return 0


def cmd_compare(s: dict, started: float) -> int:
    va, vb = load_votes(s["a"]), load_votes(s["b"])
    if not np.array_equal(np.sort(va.labels), np.sort(vb.labels)):
        raise UsageError("--a/--b: the two vote files have different label multisets")
    ea = estimate_roc(threshold_profile(va, s["m_eval_a"]), va.labels)
    eb = estimate_roc(threshold_profile(vb, s["m_eval_b"]), vb.labels)
    cmp = compare_curves(ea, eb, s["mode"])
    floor = default_log_floor(ea.class_counts.n_neg)
    write_overlay_csv(cmp, s["output"], s["confidence"], floor)
    write_manifest(
        s["output"], "compare", s, [s["output"]], started,
        {"auc_a": cmp.auc_a, "auc_b": cmp.auc_b, "delta_auc": cmp.delta_auc, "grid_points": len(cmp.fpr)},
    )
    print(f"AUC a={cmp.auc_a:.6f} b={cmp.auc_b:.6f} delta={cmp.delta_auc:+.6f}")
    return 0


def cmd_oracle(s: dict, started: float) -> int:
    votes = load_votes(s["votes"])
    if s["classifier_mode"] == "shared-column-bootstrap" and votes.full_votes is None:
        raise UsageError("--classifier-mode: shared-column-bootstrap needs a full-format vote file")
    config = OracleConfig(
        replicates=s["replicates"],
        seed=s["seed"],
        classifier_mode=s["classifier_mode"],
        poisson_resampling=s["poisson"],
        m_eval=s["m_eval"],
    )
    summary = run_oracle(votes, config)
    log.info("oracle: %d replicates in %.2fs", config.replicates, time.time() - started)
    est = estimate_roc(threshold_profile(votes, summary.m_eval), votes.labels)
    report = compare_to_analytic(summary, est, s["n_se"], s["var_rel_tol"])
    json_path = os.path.splitext(s["output"])[0] + ".json"
    write_oracle_summary(summary, s["output"], json_path)

    print(f"{'t':>5} {'fpr_analytic':>13} {'fpr_oracle':>11} {'fpr_se':>9} {'ok':>3}"
          f" {'tpr_analytic':>13} {'tpr_oracle':>11} {'tpr_se':>9} {'ok':>3}")
    for t in summary.thresholds.tolist():
        print(
            f"{t:>5} {est.mean_fpr[t]:>13.6f} {summary.mean_fpr[t]:>11.6f} {summary.se_fpr[t]:>9.2e}"
            f" {'y' if report.mean_pass_fpr[t] else 'n':>3}"
            f" {est.mean_tpr[t]:>13.6f} {summary.mean_tpr[t]:>11.6f} {summary.se_tpr[t]:>9.2e}"
            f" {'y' if report.mean_pass_tpr[t] else 'n':>3}"
        )
    mean_ok = report.mean_pass_fraction >= s["min_pass"]
    var_ok = report.var_pass_fraction >= s["var_min_pass"]
    print(f"mean checks: {report.mean_pass_fraction:.4f} pass (need {s['min_pass']}) -> {'PASS' if mean_ok else 'FAIL'}")
    print(f"variance checks: {report.var_pass_fraction:.4f} pass (need {s['var_min_pass']}) -> {'PASS' if var_ok else 'FAIL'}")
    write_manifest(
        s["output"], "oracle", s, [s["output"], json_path], started,
        {"mean_pass_fraction": report.mean_pass_fraction, "var_pass_fraction": report.var_pass_fraction},
    )
    return 0 if (mean_ok and var_ok) else 1


def cmd_pipeline(s: dict, started: float) -> int:
    out = s["out_dir"]
    os.makedirs(out, exist_ok=True)
    train = load_dataset(s["train"], s["label_col"])
    test = load_dataset(s["test"], s["label_col"])
    _check_max_features(s, train.d)
    model = train_forest(train, _forest_config(s))
    log.info("trained %d trees in %.2fs", model.n_trees, time.time() - started)
    paths = {k: os.path.join(out, f) for k, f in
             (("model", "forest.json"), ("votes", "votes.csv"), ("bands", "bands.csv"))}
    save_forest(model, paths["model"])
    write_manifest(paths["model"], "train", s, [paths["model"]], started,
                   {"resolved_max_features": model.max_features})
    votes = predict_votes(model, test)
    save_votes(votes, paths["votes"], compact=s["compact"])
    write_manifest(paths["votes"], "votes", s, [paths["votes"]], started)
    est, band, floor = _roc_outputs(votes, s, paths["bands"])
    a = auc(est)
    write_manifest(paths["bands"], "roc", s, [paths["bands"]], started,
                   {"auc": a, "m_eval": est.m_eval, "z": band.z, "log_floor": floor})
    write_manifest(os.path.join(out, "pipeline"), "pipeline", s, list(paths.values()), started, {"auc": a})
    print(f"AUC {a:.6f}; outputs in {out}")
    return 0


HANDLERS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "votes": cmd_votes,
    "roc": cmd_roc,
    "compare": cmd_compare,
    "oracle": cmd_oracle,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    try:
        settings = resolve(args)
        return HANDLERS[args.command](settings, started)
    except UsageError as exc:
        parser.exit(2, f"ensroc {args.command}: error: {exc}\n")
    except (OSError, ValueError) as exc:
        print(f"ensroc {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
