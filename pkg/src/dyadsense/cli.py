"""Command-line pipeline: simulate, ingest, thresholds, extract, select, evaluate, report.

Every stage reads and writes inside one work directory and records the
sha256 of its inputs and outputs in ``manifest.json``. Re-running a stage
whose parameters, inputs and outputs are unchanged does nothing.

Exit codes: 0 success, 2 input contract violation, 3 missing upstream
artifact, 4 internal invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from ._random import child_seed
from .evalkit import EvalReport, assign_folds, metric_suite
from .features import FeatureMatrix, FeatureSchema, extract_matrix, schema_json
from .geodyads import eligible_dyads, haversine_array, prepare_grids
from .ingest import IngestError, IngestReport, StudyConfig, _read_surveys, build_grid, coverage_survival, parse_inputs, \
    read_grids, write_grids
from .networks import build_label_tables, build_networks, similarity_grid, tie_type_distance_profile
from .thresholds import DistanceThresholder, ThresholdSet, eccdf

log = logging.getLogger("dyadsense")

EXIT_OK, EXIT_CONTRACT, EXIT_MISSING, EXIT_INVARIANT = 0, 2, 3, 4
TARGET_ALIASES = {"friend": "friend", "close": "close_given_friend", "change": "change"}
CV_ALIASES = {"unrestricted": "unrestricted", "dyadic": "dyadic", "temporal": "temporal_block",
              "temporal_block": "temporal_block"}


class StageError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------- manifest


class Manifest:
    """``manifest.json`` of a work directory."""

    def __init__(self, work: Path):
        self.work = work
        self.path = work / "manifest.json"
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                self.doc = json.load(fh)
        else:
            self.doc = {"format": "dyadsense-manifest/1", "stages": {}}

    def rel(self, p: Path) -> str:
        p = Path(p).resolve()
        try:
            return p.relative_to(self.work.resolve()).as_posix()
        except ValueError:
            return str(p)

    def hashes(self, paths) -> dict[str, str]:
        return {self.rel(p): sha256_file(p) for p in sorted(Path(p) for p in paths)}

    def up_to_date(self, stage, params, inputs) -> bool:
        rec = self.doc["stages"].get(stage)
        if rec is None or rec.get("params") != params or rec.get("inputs") != self.hashes(inputs):
            return False
        for rel, digest in rec.get("outputs", {}).items():
            p = Path(rel) if Path(rel).is_absolute() else self.work / rel
            if not p.exists() or sha256_file(p) != digest:
                return False
        return True

    def record(self, stage, params, inputs, outputs, seed=None):
        self.doc["stages"][stage] = {
            "params": params,
            "inputs": self.hashes(inputs),
            "outputs": self.hashes(outputs),
        }
        if seed is not None:
            self.doc["seed"] = seed
        self.doc["version"] = __version__
        self.work.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump(self.doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def stage(self, name):
        return self.doc["stages"].get(name)


def _require(stage, *paths):
    for p in paths:
        if not Path(p).exists():
            raise StageError(EXIT_MISSING, f"{stage}: missing upstream artifact {p}")


def _work(args) -> Path:
    return Path(args.out)


def _config(args, work: Path) -> tuple[StudyConfig, Path]:
    """Config for a downstream stage: the ingested copy, or ``--config`` if it matches it."""
    stored = work / "config.json"
    if args.config:
        if stored.exists() and sha256_file(stored) != sha256_file(args.config):
            # compare semantically before refusing (formatting may differ)
            if StudyConfig.from_json(args.config).to_dict() != StudyConfig.from_json(stored).to_dict():
                raise StageError(EXIT_CONTRACT, f"config {args.config} differs from the one used by ingest; "
                                                "refusing to mix artifacts")
        if stored.exists():
            return StudyConfig.from_json(stored), stored
        return StudyConfig.from_json(args.config), Path(args.config)
    _require(args.command, stored)
    return StudyConfig.from_json(stored), stored


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_ties(path, config):
    report = IngestReport()
    ties = _read_surveys(path, config, report)
    if report.rejected:
        raise StageError(EXIT_CONTRACT, f"{path}: {len(report.rejected)} malformed survey rows")
    return ties


def _write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def _skip(stage):
    print(f"{stage}: up to date")
    return EXIT_OK


# ------------------------------------------------------------------ stages


def cmd_simulate(args):
    from .synth import SynthConfig, write_cohort

    out = _work(args)
    overrides = {}
    if args.synth_config:
        with open(args.synth_config, encoding="utf-8") as fh:
            overrides = json.load(fh)
    for key in ("n_nodes", "co_location_lift", "reciprocity_boost", "missing_rate", "change_rate"):
        v = getattr(args, key)
        if v is not None:
            overrides[key] = v
    overrides["seed"] = args.seed
    try:
        cfg = SynthConfig(**overrides)
    except (TypeError, ValueError) as exc:
        raise StageError(EXIT_CONTRACT, f"simulate: bad synthetic config: {exc}") from exc
    params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()}
    m = Manifest(out)
    if m.up_to_date("simulate", params, []):
        return _skip("simulate")
    write_cohort(out, cfg)
    names = ["locations.csv", "wifi.csv", "surveys.csv", "config.json", "ground_truth.json"]
    m.record("simulate", params, [], [out / n for n in names], seed=args.seed)
    print(f"simulate: wrote {len(names)} files to {out}")
    return EXIT_OK


def cmd_ingest(args):
    work = _work(args)
    src = Path(args.input) if args.input else None
    loc = Path(args.locations) if args.locations else (src / "locations.csv" if src else None)
    wifi = Path(args.wifi) if args.wifi else (src / "wifi.csv" if src else None)
    surv = Path(args.surveys) if args.surveys else (src / "surveys.csv" if src else None)
    cfg_path = Path(args.config) if args.config else (src / "config.json" if src else None)
    if loc is None or surv is None or cfg_path is None:
        raise StageError(EXIT_CONTRACT, "ingest: need --input DIR or --locations/--surveys/--config")
    _require("ingest", loc, surv, cfg_path)
    if wifi is not None and not wifi.exists():
        wifi = None
    inputs = [p for p in (loc, wifi, surv, cfg_path) if p is not None]
    params = {"min_accuracy": args.min_accuracy, "carry_forward_bins": args.carry_forward}
    m = Manifest(work)
    if m.up_to_date("ingest", params, inputs):
        return _skip("ingest")
    config = StudyConfig.from_json(cfg_path)
    samples, wobs, ties, report = parse_inputs(loc, wifi, surv, config, args.min_accuracy)
    grids = build_grid(samples, wobs, config, devices=config.roster, carry_forward_bins=args.carry_forward)
    work.mkdir(parents=True, exist_ok=True)
    grid_dir = work / "grids"
    if grid_dir.exists():
        for p in grid_dir.glob("*.csv"):
            p.unlink()
    outputs = write_grids(grids, grid_dir)
    config.dump_json(work / "config.json")
    _write_csv(work / "ties.csv", [["wave", "ego", "alter", "tie_type", "value"]]
               + [[t.wave, t.ego, t.alter, t.tie_type, t.value] for t in ties])
    _write_json(work / "ingest_report.json", report.to_dict())
    outputs += [work / "config.json", work / "ties.csv", work / "ingest_report.json"]
    m.record("ingest", params, inputs, outputs)
    print(f"ingest: {len(grids)} grids, {report.counts.get('rejected', 0)} rejected rows")
    return EXIT_OK


def _grids(work, stage):
    grid_dir = work / "grids"
    _require(stage, grid_dir)
    files = sorted(grid_dir.glob("*.csv"))
    if not files:
        raise StageError(EXIT_MISSING, f"{stage}: no grids in {grid_dir} (run ingest first)")
    return read_grids(grid_dir), files


def _survey_nodes(config, ties):
    return sorted(set(config.roster) if config.roster else {v for t in ties for v in (t.ego, t.alter)})


def _pooled_distances(grids, dyads, resolution=1.0):
    """Distances of every co-located bin, as a histogram at ``resolution`` meters."""
    acc = np.zeros(0)
    for a, b in dyads:
        ga, gb = grids[a], grids[b]
        d = haversine_array(ga.lat, ga.lon, gb.lat, gb.lon)
        d = d[~np.isnan(d)]
        if not d.size:
            continue
        r = np.round(d / resolution).astype(np.int64)
        c = np.bincount(r)
        if c.size > acc.size:
            acc = np.concatenate([acc, np.zeros(c.size - acc.size)])
        acc[: c.size] += c
    nz = np.flatnonzero(acc)
    return nz * resolution, acc[nz]


def cmd_thresholds(args):
    work = _work(args)
    config, cfg_path = _config(args, work)
    grids, files = _grids(work, "thresholds")
    _require("thresholds", work / "ties.csv")
    inputs = files + [cfg_path, work / "ties.csv"]
    params = {"mode": config.threshold_mode, "k": config.n_thresholds, "cutoff": config.distance_elbow}
    m = Manifest(work)
    if m.up_to_date("thresholds", params, inputs):
        return _skip("thresholds")
    ties = _read_ties(work / "ties.csv", config)
    dyads, _ = eligible_dyads(grids, _survey_nodes(config, ties))
    values, counts = _pooled_distances(grids, dyads)
    minutes = counts * (config.bin_width / 60_000.0)
    if config.threshold_mode == "static":
        ts = ThresholdSet.static(config.static_thresholds)
    else:
        if not values.size:
            raise StageError(EXIT_CONTRACT, "thresholds: no co-located bins to cluster")
        try:
            fitted = DistanceThresholder(config.n_thresholds, config.distance_elbow, resolution=None).fit(
                values, sample_weight=minutes)
        except ValueError as exc:
            raise StageError(EXIT_CONTRACT, f"thresholds: {exc}") from exc
        ts = fitted.threshold_set_
    with open(work / "thresholds.json", "w", encoding="utf-8") as fh:
        fh.write(ts.to_json())
    outputs = [work / "thresholds.json"]
    if values.size:
        x, s = eccdf(values, minutes)
        _write_csv(work / "eccdf.csv", [["distance_m", "fraction_exceeding"]]
                   + [[repr(float(a)), repr(float(b))] for a, b in zip(x, s)])
        outputs.append(work / "eccdf.csv")
    m.record("thresholds", params, inputs, outputs)
    print("thresholds: " + ", ".join(f"{b:g}" for b in ts.breaks))
    return EXIT_OK


def cmd_extract(args):
    work = _work(args)
    config, cfg_path = _config(args, work)
    grids, files = _grids(work, "extract")
    _require("extract", work / "thresholds.json", work / "ties.csv")
    inputs = files + [cfg_path, work / "thresholds.json", work / "ties.csv"]
    params = {}
    m = Manifest(work)
    if m.up_to_date("extract", params, inputs):
        return _skip("extract")
    ts = ThresholdSet.from_json((work / "thresholds.json").read_text(encoding="utf-8"))
    ties = _read_ties(work / "ties.csv", config)
    dyads, summary = eligible_dyads(grids, _survey_nodes(config, ties))
    if not dyads:
        raise StageError(EXIT_CONTRACT, "extract: no eligible dyads")
    wifi = any(g.scanned.any() for g in grids.values())
    schema = FeatureSchema.default(wifi=wifi, n_thresholds=len(ts.breaks))
    fm = extract_matrix(prepare_grids(grids, config), dyads, ts.breaks, config, schema, jobs=args.jobs)
    if np.isinf(fm.values).any():
        raise StageError(EXIT_INVARIANT, "extract: infinite feature values")
    if fm.values.shape[1] != schema.n_features:
        raise StageError(EXIT_INVARIANT, "extract: column count does not match the schema")
    fm.to_csv(work / "features.csv")
    (work / "schema.json").write_text(schema_json(schema), encoding="utf-8")
    _write_json(work / "dyads.json", {**summary, "dyads": [list(d) for d in dyads]})
    m.record("extract", params, inputs, [work / "features.csv", work / "schema.json", work / "dyads.json"])
    print(f"extract: {fm.values.shape[0]} rows x {fm.values.shape[1]} features")
    return EXIT_OK


def _design(work, config, target_name, stage):
    _require(stage, work / "features.csv", work / "schema.json", work / "ties.csv")
    fm = FeatureMatrix.from_csv(work / "features.csv")
    schema = json.loads((work / "schema.json").read_text(encoding="utf-8"))
    if fm.columns != schema["feature_names"]:
        raise StageError(EXIT_CONTRACT, f"{stage}: features.csv does not match schema.json")
    fm.meta["schema_hash"] = schema["hash"]
    ties = _read_ties(work / "ties.csv", config)
    nets = build_networks(ties, config.roster)
    table = build_label_tables(nets, fm, TARGET_ALIASES[target_name])
    return fm, table


def cmd_select(args):
    from .learn import stability_select

    work = _work(args)
    config, cfg_path = _config(args, work)
    _require("select", work / "features.csv")
    inputs = [cfg_path, work / "features.csv", work / "schema.json", work / "ties.csv"]
    params = {"target": args.target, "folds": args.folds, "seed": args.seed, "stability_min": args.stability_min}
    out = work / f"selected_{args.target}.json"
    m = Manifest(work)
    if m.up_to_date(f"select:{args.target}", params, inputs):
        return _skip("select")
    fm, table = _design(work, config, args.target, "select")
    if not len(table):
        raise StageError(EXIT_CONTRACT, f"select: no labelled rows for target {args.target}")
    X, y, _, periods = table.design(fm)
    # selection sees only the temporal-block training split
    train = periods == "P1"
    if not train.any():
        raise StageError(EXIT_CONTRACT, "select: no P1 rows to select features on")
    res = stability_select(X[train], y[train], k=args.folds, stability_min=args.stability_min,
                           seed=child_seed(args.seed, "select-folds"), feature_names=fm.columns)
    doc = json.loads(res.to_json())
    doc["schema_hash"] = fm.meta["schema_hash"]
    doc["target"] = args.target
    _write_json(out, doc)
    m.record(f"select:{args.target}", params, inputs, [out], seed=args.seed)
    print(f"select: {len(res.final)} stable features for {args.target}")
    return EXIT_OK


def _model(name, seed, trees, jobs):
    from .learn import MissingAwareAdaBoostClassifier, MissingAwareForestClassifier, MissingAwareTreeClassifier

    rs = child_seed(seed, "bootstrap")
    if name == "forest":
        return MissingAwareForestClassifier(n_estimators=trees, random_state=rs, n_jobs=jobs)
    if name == "adaboost":
        return MissingAwareAdaBoostClassifier(n_estimators=trees, random_state=rs)
    return MissingAwareTreeClassifier(random_state=rs)


def cmd_evaluate(args):
    from .learn import save_model

    work = _work(args)
    config, cfg_path = _config(args, work)
    _require("evaluate", work / "features.csv")
    inputs = [cfg_path, work / "features.csv", work / "schema.json", work / "ties.csv"]
    sel_path = None
    if args.features != "all":
        if not args.features.startswith("selected:"):
            raise StageError(EXIT_CONTRACT, "evaluate: --features must be 'all' or 'selected:<path>'")
        sel_path = Path(args.features.split(":", 1)[1])
        _require("evaluate", sel_path)
        inputs.append(sel_path)
    schemas = [CV_ALIASES[c] for c in (args.cv or ["unrestricted", "dyadic", "temporal"])]
    schemas = list(dict.fromkeys(schemas))
    params = {"target": args.target, "cv": schemas, "folds": args.folds, "model": args.model,
              "features": args.features, "seed": args.seed, "trees": args.trees}
    tag = f"{args.target}_{args.model}"
    outdir = work / "eval"
    stage = f"evaluate:{tag}"
    m = Manifest(work)
    if m.up_to_date(stage, params, inputs):
        return _skip("evaluate")
    fm, table = _design(work, config, args.target, "evaluate")
    if sel_path is not None:
        sel = json.loads(sel_path.read_text(encoding="utf-8"))
        if sel.get("schema_hash") != fm.meta["schema_hash"]:
            raise StageError(EXIT_CONTRACT, "evaluate: selection was made on a different feature schema")
        if not sel.get("final"):
            raise StageError(EXIT_CONTRACT, "evaluate: the feature selection is empty")
        fm = fm.select(sel["final"])
    if not len(table):
        raise StageError(EXIT_CONTRACT, f"evaluate: no labelled rows for target {args.target}")
    X, y, _, _ = table.design(fm)
    outdir.mkdir(parents=True, exist_ok=True)
    report = EvalReport(table.target, args.model, meta={
        "rows": int(len(y)), "positives": int(y.sum()), "features": len(fm.columns), "seed": args.seed,
        "folds": args.folds, "schema_hash": fm.meta.get("schema_hash"), "feature_set": args.features})
    outputs = []
    fold_seed = child_seed(args.seed, "folds")
    for cv in schemas:
        try:
            plan = assign_folds(table, cv, args.folds, fold_seed)
        except ValueError as exc:
            report.blocks[cv] = {"notes": [f"skipped: {exc}"]}
            continue
        scores = np.full(len(y), np.nan)
        for train, test in plan.splits():
            model = _model(args.model, args.seed, args.trees, args.jobs).fit(X[train], y[train])
            proba = model.predict_proba(X[test])
            scores[test] = proba[:, 1] if proba.shape[1] == 2 else float(model.classes_[0])
        scored = ~np.isnan(scores)
        block = metric_suite(scores[scored], y[scored])
        if cv == "temporal_block":
            block["notes"].append("train P1 rows, test P2 rows")
        report.blocks[cv] = block
        fold_path = outdir / f"folds_{args.target}_{cv}.json"
        _write_json(fold_path, plan.to_dict())
        outputs.append(fold_path)
    final = _model(args.model, args.seed, args.trees, args.jobs).fit(X, y)
    model_path = outdir / f"model_{tag}.json"
    save_model(final, model_path, fm.columns, fm.meta.get("schema_hash"))
    rep_path = outdir / f"report_{tag}.json"
    rep_path.write_text(report.to_json(), encoding="utf-8")
    csv_path = outdir / f"report_{tag}.csv"
    _write_csv(csv_path, report.to_csv_rows())
    outputs += [model_path, rep_path, csv_path]
    m.record(stage, params, inputs, outputs, seed=args.seed)
    for cv, block in report.blocks.items():
        mcc = block.get("mcc")
        print(f"evaluate: {args.target} {cv}: MCC={mcc if mcc is None else round(mcc, 4)} "
              f"{'; '.join(block.get('notes', []))}")
    return EXIT_OK


def cmd_report(args):
    from . import plots
    from .geodyads import build_dyad_series

    work = _work(args)
    config, cfg_path = _config(args, work)
    grids, files = _grids(work, "report")
    _require("report", work / "ties.csv", work / "thresholds.json")
    inputs = files + [cfg_path, work / "ties.csv", work / "thresholds.json"]
    params = {"similarity": args.similarity, "profile_wave": args.profile_wave}
    m = Manifest(work)
    if m.up_to_date("report", params, inputs):
        return _skip("report")
    rdir = work / "report"
    rdir.mkdir(parents=True, exist_ok=True)
    ties = _read_ties(work / "ties.csv", config)
    nets = build_networks(ties, config.roster)
    outputs = []

    sim = similarity_grid(nets, args.similarity)
    sim.to_csv(rdir / "similarity.csv", float_format=repr, lineterminator="\n")
    plots.heatmap_svg(sim, rdir / "similarity.svg", f"network similarity ({args.similarity})")
    outputs += [rdir / "similarity.csv", rdir / "similarity.svg"]

    dyads, _ = eligible_dyads(grids, _survey_nodes(config, ties))
    values, counts = _pooled_distances(grids, dyads)
    if values.size:
        x, s = eccdf(values, counts * config.bin_width / 60_000.0)
        _write_csv(rdir / "eccdf.csv", [["distance_m", "fraction_exceeding"]]
                   + [[repr(float(a)), repr(float(b))] for a, b in zip(x, s)])
        plots.survival_svg(x, s, rdir / "eccdf.svg", "distance (m)", "pairwise distance survival",
                           cutoff=config.distance_elbow)
        outputs += [rdir / "eccdf.csv", rdir / "eccdf.svg"]

    cov = coverage_survival(grids)
    _write_csv(rdir / "coverage.csv", [["gap_minutes", "fraction_of_time"]]
               + [[repr(g / 60_000.0), repr(f)] for g, f in cov])
    plots.survival_svg([g / 60_000.0 for g, _ in cov], [f for _, f in cov], rdir / "coverage.svg",
                       "gap length (minutes)", "time in location gaps longer than x", logx=False)
    outputs += [rdir / "coverage.csv", rdir / "coverage.svg"]

    net = nets.get((args.profile_wave, "friend"))
    if net is not None and config.campus_geobox is not None:
        ts = ThresholdSet.from_json((work / "thresholds.json").read_text(encoding="utf-8"))
        prepared = prepare_grids(grids, config)
        series = (build_dyad_series(prepared[a], prepared[b], ts.breaks, config) for a, b in dyads)
        prof = tie_type_distance_profile(series, net, config)
        prof.to_csv(rdir / "tie_profile.csv", index=False, float_format=repr, lineterminator="\n")
        plots.profile_svg(prof, rdir / "tie_profile.svg", "median on-campus distance by tie class")
        outputs += [rdir / "tie_profile.csv", rdir / "tie_profile.svg"]
    m.record("report", params, inputs, outputs)
    print(f"report: {len(outputs)} files in {rdir}")
    return EXIT_OK


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dyadsense", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("--out", required=True, help="work directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for parallel stages")
        if config:
            sp.add_argument("--config", help="study config JSON (defaults to the ingested copy)")

    sp = sub.add_parser("simulate", help="write a synthetic cohort in the ingest formats")
    common(sp, config=False)
    sp.add_argument("--synth-config", help="JSON of SynthConfig fields")
    sp.add_argument("--nodes", dest="n_nodes", type=int)
    sp.add_argument("--lift", dest="co_location_lift", type=float)
    sp.add_argument("--reciprocity-boost", dest="reciprocity_boost", type=float)
    sp.add_argument("--missing-rate", dest="missing_rate", type=float)
    sp.add_argument("--change-rate", dest="change_rate", type=float)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ingest", help="parse raw logs into per-device grids")
    common(sp)
    sp.add_argument("--input", help="directory holding locations.csv, wifi.csv, surveys.csv, config.json")
    sp.add_argument("--locations")
    sp.add_argument("--wifi")
    sp.add_argument("--surveys")
    sp.add_argument("--min-accuracy", type=float)
    sp.add_argument("--carry-forward", type=int, default=0, help="fill gaps of up to N bins with the last fix")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("thresholds", help="fit distance thresholds and write the ECCDF")
    common(sp)
    sp.set_defaults(func=cmd_thresholds)

    sp = sub.add_parser("extract", help="build the dyad x period feature matrix")
    common(sp)
    sp.set_defaults(func=cmd_extract)

    for name, func in (("select", cmd_select), ("evaluate", cmd_evaluate)):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--target", choices=sorted(TARGET_ALIASES), default="friend")
        sp.add_argument("--folds", type=int, default=10)
        sp.set_defaults(func=func)
        if name == "select":
            sp.help = "stable CFS feature selection"
            sp.add_argument("--stability-min", type=int, default=9)
        else:
            sp.add_argument("--cv", action="append", choices=sorted(CV_ALIASES),
                            help="CV schema (repeatable; default: all three)")
            sp.add_argument("--model", choices=["forest", "adaboost", "tree"], default="forest")
            sp.add_argument("--features", default="all", help="'all' or 'selected:<path>'")
            sp.add_argument("--trees", type=int, default=100, help="ensemble size")

    sp = sub.add_parser("report", help="similarity grid, ECCDF, coverage and tie profile")
    common(sp)
    sp.add_argument("--similarity", choices=["pairs", "standard"], default="pairs")
    sp.add_argument("--profile-wave", type=int, default=2)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except IngestError as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except FileNotFoundError as exc:
        print(f"error: {args.command}: missing upstream artifact {exc.filename}", file=sys.stderr)
        return EXIT_MISSING
    except (AssertionError, FloatingPointError) as exc:
        print(f"error: {args.command}: invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
