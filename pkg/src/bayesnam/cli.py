"""Command-line entry point.

Subcommands: ``synth``, ``train``, ``explain``, ``theory``, ``eval``. On
success stdout carries a single JSON document; progress and diagnostics go
to stderr. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import analytic, data_io
from .dataset import Dataset
from .errors import BayesNamError, ConfigError
from .explain import explain
from .metrics import accuracy, auc, rmse
from .model import NamConfig, fit, predict, train_ensemble
from .nn import SgdConfig, make_rng
from .synthetic import ToySpec, gen_toy

log = logging.getLogger("bayesnam")

CONFIG_VERSION = "1"

DATA_DEFAULTS = {
    "target": "y",
    "features": None,
    "task": "classification",
    "delimiter": ",",
    "normalize": False,
    "holdout": None,
    "split_seed": 0,
}
RUN_DEFAULTS = {"eval_samples": 10, "eval_seed": 0}


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """``section.key=value`` (or ``key=value``) pairs; values parsed as JSON when possible."""
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        node = cfg
        *path, leaf = key.split(".")
        for part in path:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} does not address a section")
        node[leaf] = _parse_value(value)
    return cfg


def _load_json(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return doc


def _check_version(doc: dict, what: str):
    version = str(doc.pop("version", CONFIG_VERSION))
    if version != CONFIG_VERSION:
        raise ConfigError(f"{what}: unsupported config version {version!r}")


def _strict(cls, values: dict, what: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown {what} keys: {', '.join(unknown)}")
    return cls(**values)


def toy_spec_from(doc: dict) -> ToySpec:
    doc = dict(doc)
    _check_version(doc, "synth spec")
    if "lambda" in doc:
        doc["lam"] = doc.pop("lambda")
    return _strict(ToySpec, doc, "synth spec")


def run_config_from(doc: dict):
    doc = dict(doc)
    _check_version(doc, "train config")
    sections = {"data", "model", "sgd", *RUN_DEFAULTS}
    unknown = sorted(set(doc) - sections)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    data = dict(DATA_DEFAULTS)
    extra = sorted(set(doc.get("data", {})) - set(DATA_DEFAULTS))
    if extra:
        raise ConfigError(f"unknown data keys: {', '.join(extra)}")
    data.update(doc.get("data", {}))
    model_doc = dict(doc.get("model", {}))
    model_doc.setdefault("task", data["task"])
    model = _strict(NamConfig, model_doc, "model")
    if model.task != data["task"]:
        raise ConfigError(f"model task {model.task!r} disagrees with data task {data['task']!r}")
    sgd = _strict(SgdConfig, doc.get("sgd", {}), "sgd")
    run = dict(RUN_DEFAULTS)
    run.update({k: doc[k] for k in RUN_DEFAULTS if k in doc})
    return data, model, sgd, run


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` (stop included within half a step) or ``a,b,c``."""
    if ":" in text:
        try:
            start, stop, step = (float(p) for p in text.split(":"))
        except ValueError:
            raise ConfigError(f"bad range {text!r}") from None
        if step <= 0 or stop < start:
            raise ConfigError(f"bad range {text!r}")
        n = int(math.floor((stop - start) / step + 0.5))
        return [round(start + i * step, 12) for i in range(n + 1)]
    return [float(p) for p in text.split(",") if p.strip()]


def parse_ints(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _emit(doc: dict):
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def metrics_for(models, data: Dataset, n_samples: int, seed: int) -> dict:
    scores = predict(models, data.X, n_samples, make_rng(seed))
    if data.task == "classification":
        out = {"accuracy": accuracy(scores, data.y)}
        if 0 < data.y.sum() < data.n:
            out["auc"] = auc(scores, data.y)
        return out
    return {"rmse": rmse(scores, data.y)}


def cmd_synth(args) -> int:
    doc = apply_overrides(_load_json(args.spec), args.set)
    spec = toy_spec_from(doc)
    data = gen_toy(spec)
    data_io.dump_csv(data, args.out)
    log.info("wrote %d rows to %s", data.n, args.out)
    _emit({"out": str(args.out), "n": data.n, "d": data.d, "spec": asdict(spec)})
    return 0


def _schema(data_cfg: dict) -> data_io.CsvSchema:
    return data_io.CsvSchema(data_cfg["target"], data_cfg["features"], data_cfg["task"], data_cfg["delimiter"])


def cmd_train(args) -> int:
    doc = apply_overrides(_load_json(args.config), args.set)
    data_cfg, model_cfg, sgd, run = run_config_from(doc)
    schema = _schema(data_cfg)
    train_set = data_io.load_csv(args.data, schema)
    if args.test:
        test_set = data_io.load_csv(args.test, schema)
    elif data_cfg["holdout"]:
        train_set, test_set = data_io.split(train_set, "holdout", ratio=data_cfg["holdout"], seed=data_cfg["split_seed"])
    else:
        test_set = None
    stats = None
    if data_cfg["normalize"]:
        stats = data_io.fit_norm(train_set)
        train_set = stats.apply(train_set)
        test_set = stats.apply(test_set) if test_set is not None else None

    if args.ensemble and args.ensemble > 1:
        models, histories = train_ensemble(train_set.d, model_cfg, args.ensemble, train_set, sgd, model_cfg.seed)
        saved = models
    else:
        m, h = fit(train_set.d, model_cfg, train_set, sgd)
        models, histories, saved = [m], [h], m

    meta = {
        "data": {**data_cfg, "features": list(train_set.feature_names)},
        "norm": stats.to_dict() if stats else None,
        "sgd": asdict(sgd),
        "eval_samples": run["eval_samples"],
        "eval_seed": run["eval_seed"],
    }
    data_io.save_model(saved, args.out, meta)
    hist_path = Path(args.out).with_suffix(".history.json")
    hist_path.write_text(json.dumps([asdict(h) for h in histories], indent=1) + "\n")

    result = {"model": str(args.out), "history": str(hist_path)}
    result["train"] = metrics_for(models, train_set, run["eval_samples"], run["eval_seed"])
    if test_set is not None:
        result["test"] = metrics_for(models, test_set, run["eval_samples"], run["eval_seed"])
    log.info("training done: %s", result)
    _emit(result)
    return 0


def _load_for_inference(model_path, data_path):
    mf = data_io.read_model_file(model_path)
    models = mf.models if mf.ensemble else mf.models[0]
    data_cfg = mf.meta.get("data") or dict(DATA_DEFAULTS, task=mf.models[0].config.task)
    data = data_io.load_csv(data_path, _schema(data_cfg))
    stats = data_io.NormStats.from_dict(mf.meta["norm"]) if mf.meta.get("norm") else None
    if stats is not None:
        data = stats.apply(data)
    return mf, models, data, stats


def cmd_eval(args) -> int:
    mf, models, data, _ = _load_for_inference(args.model, args.data)
    n_samples = args.samples or mf.meta.get("eval_samples", 10)
    seed = args.seed if args.seed is not None else mf.meta.get("eval_seed", 0)
    _emit(metrics_for(models, data, n_samples, seed))
    return 0


def cmd_explain(args) -> int:
    mf, models, data, stats = _load_for_inference(args.model, args.data)
    point = None
    if args.point:
        point = np.array(parse_range(args.point))
        if point.shape != (data.d,):
            raise ConfigError(f"--point needs {data.d} values, got {point.size}")
        if stats is not None:
            point = (point - stats.mean) / stats.std
    report = explain(models, data, args.samples, make_rng(args.seed), point=point, n_points=args.points)
    report.write(args.out)
    summary = report.to_dict()
    summary.pop("centers")
    summary["out"] = str(args.out)
    _emit(summary)
    return 0


def cmd_theory(args) -> int:
    ks = parse_ints(args.k)
    taus = parse_range(args.tau)
    if any(not 0 <= t <= 1 for t in taus):
        raise ConfigError("tau values must lie in [0, 1]")
    report = analytic.theorem1_report(ks, taus, args.lam, args.sigma)
    if args.mc:
        analytic.mc_crosscheck(report, args.mc, seed=args.mc_seed)
    report.to_csv(args.out)
    if args.json:
        report.to_json(args.json)
    summary = {
        "out": str(args.out),
        "tau_star": {str(k): v for k, v in report.tau_star.items()},
        "all_delta_positive": {str(k): all(r["positive"] for r in report.rows if r["k"] == k) for k in ks},
        "mc": report.mc,
    }
    _emit(summary)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bayesnam", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a toy dataset as CSV")
    s.add_argument("--spec", help="JSON toy spec (n, d, p, lambda, sigma2, seed)")
    s.add_argument("--out", required=True)
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train a NAM / BayesNAM / ensemble")
    t.add_argument("--data", required=True)
    t.add_argument("--test", help="held-out CSV for reporting")
    t.add_argument("--config", help="JSON run config (data, model, sgd sections)")
    t.add_argument("--out", required=True)
    t.add_argument("--ensemble", type=int, default=0, metavar="N")
    t.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("explain", help="export mapping grids and contributions")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True, help="training CSV (used for centering and grid ranges)")
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--point", help="comma-separated query point in raw feature units")
    e.add_argument("--samples", type=int, default=30)
    e.add_argument("--points", type=int, default=101, help="grid points per feature")
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_explain)

    th = sub.add_parser("theory", help="tabulate the dropout accuracy gap")
    th.add_argument("--k", required=True, help="comma-separated feature counts")
    th.add_argument("--tau", required=True, help="start:stop:step or comma list")
    th.add_argument("--lambda", dest="lam", type=float, required=True)
    th.add_argument("--sigma", type=float, required=True)
    th.add_argument("--out", required=True)
    th.add_argument("--json", help="also write the full report as JSON")
    th.add_argument("--mc", type=int, default=0, metavar="N", help="cross-check with N simulated draws per point")
    th.add_argument("--mc-seed", type=int, default=0)
    th.set_defaults(func=cmd_theory)

    ev = sub.add_parser("eval", help="score a saved model on a CSV")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--samples", type=int, default=0)
    ev.add_argument("--seed", type=int, default=None)
    ev.set_defaults(func=cmd_eval)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (BayesNamError, OSError) as exc:
        print(f"bayesnam {args.command}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
