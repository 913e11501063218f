"""Pipeline CLI: composable subcommands over a shared cache directory.

Each stage reads the caches of its prerequisites and writes versioned outputs
of its own; rerunning a stage with unchanged inputs and seed reproduces its
files byte for byte. Exit codes: 0 success, 1 config error, 2 missing
prerequisite stage, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import multiprocessing
import pickle
import sys
from pathlib import Path

import cascademine.cascades as casc
import cascademine.census as census_mod
import cascademine.features as feat
import cascademine.learner as learn
import cascademine.stats as stats_mod
from cascademine.config import RunConfig, build_config
from cascademine.errors import ConfigError, DataError, MissingStageError
from cascademine.ingest import (DatasetPaths, ingest_dataset, load_ingest, save_ingest,
                                yearly_activity_counts)
from cascademine.social import build_graph
from cascademine.synth import SynthConfig, generate_synthetic
from cascademine.util import substream_seed

SCHEMA_VERSION = 1

INGEST_CACHE = "ingest.pkl"
CASCADES_CACHE = "cascades.jsonl"

MODELS_CACHE_FORMAT = "cascademine.models"


def _require(cfg: RunConfig, name: str, stage: str) -> Path:
    path = cfg.cache_path(name)
    if not path.is_file():
        raise MissingStageError(stage, path)
    return path


def _dataset_paths(cfg: RunConfig) -> DatasetPaths:
    missing = [n for n in ("business_path", "user_path", "review_path", "tip_path")
               if getattr(cfg, n) is None]
    if missing:
        raise ConfigError("dataset paths not configured: " + ", ".join(missing))
    return DatasetPaths(business=Path(cfg.business_path), user=Path(cfg.user_path),
                        review=Path(cfg.review_path), tip=Path(cfg.tip_path))


def _load_graph(result):
    return build_graph(result.users.values(), n_nodes=len(result.user_ids))


# ---------------------------------------------------------------------------
# stages


def stage_ingest(cfg: RunConfig) -> None:
    paths = _dataset_paths(cfg)
    result = ingest_dataset(paths)
    Path(cfg.cache_dir).mkdir(parents=True, exist_ok=True)
    save_ingest(result, cfg.cache_path(INGEST_CACHE))
    with open(cfg.cache_path("yearly.csv"), "w", encoding="ascii", newline="") as fh:
        fh.write("year,review_count,tip_count\n")
        for year, reviews, tips in yearly_activity_counts(result.all_events()):
            fh.write(f"{year},{reviews},{tips}\n")
    for name, counts in sorted(result.drop_counts.items()):
        dropped = {k: v for k, v in counts.items() if k not in ("lines", "retained")}
        print(f"[ingest] {name}: {counts.get('retained', 0)}/{counts.get('lines', 0)} "
              f"lines retained, drops={dropped}")
    print(f"[ingest] {result.n_events} events across {len(result.events_by_city)} cities")


def stage_build_cascades(cfg: RunConfig) -> None:
    result = load_ingest(_require(cfg, INGEST_CACHE, "ingest"))
    graph = _load_graph(result)
    by_city = casc.build_cascades(result.events_by_city, graph, cfg.window_days)
    casc.write_cascades(by_city, cfg.cache_path(CASCADES_CACHE))
    total = sum(len(v) for v in by_city.values())
    print(f"[build-cascades] {total} cascades in {len(by_city)} cities "
          f"(window_days={cfg.window_days})")


def stage_summary(cfg: RunConfig) -> None:
    by_city = casc.read_cascades(_require(cfg, CASCADES_CACHE, "build-cascades"))
    rows = casc.cascade_summary(by_city)
    casc.write_summary_csv(rows, cfg.cache_path("summary.csv"))
    for r in rows:
        print(f"[summary] {r.city}: n={r.cascade_count} p50={r.p50_size} "
              f"p90={r.p90_size} max={r.max_size}")


def stage_census(cfg: RunConfig) -> None:
    by_city = casc.read_cascades(_require(cfg, CASCADES_CACHE, "build-cascades"))
    table = census_mod.census(by_city, cfg.census_max_rank)
    census_mod.write_census_csv(table, cfg.cache_path("census.csv"))
    for city in sorted(table):
        if table[city]:
            top = table[city][0]
            print(f"[census] {city}: rank1 {top.signature.serialize()} "
                  f"share={top.share:.3f}")


def stage_purity(cfg: RunConfig) -> None:
    by_city = casc.read_cascades(_require(cfg, CASCADES_CACHE, "build-cascades"))
    rows_by_city = {
        city: census_mod.bucket_purity(by_city[city], cfg.node_cap, cfg.purity_samples)
        for city in sorted(by_city)
    }
    census_mod.write_purity_csv(rows_by_city, cfg.cache_path("purity.csv"))
    checked = sum(r.checked for rows in rows_by_city.values() for r in rows)
    impure = sum(1 for rows in rows_by_city.values() for r in rows
                 if r.purity is not None and r.purity < 1.0)
    print(f"[purity] {checked} exact isomorphism checks, {impure} impure buckets")


def stage_fit(cfg: RunConfig) -> None:
    by_city = casc.read_cascades(_require(cfg, CASCADES_CACHE, "build-cascades"))
    dist = stats_mod.size_distribution(by_city)
    stats_mod.write_distribution_csv(dist, cfg.cache_path("distribution.csv"))
    fits = {}
    for city in sorted(by_city):
        sizes = [c.size for c in by_city[city]]
        try:
            fits[city] = stats_mod.fit_power_law(sizes)
        except ValueError as exc:
            print(f"[fit] {city}: skipped ({exc})")
            continue
        try:
            slope = stats_mod.ccdf_tail_slope(sizes)
        except ValueError:
            slope = None
        f = fits[city]
        slope_txt = "n/a" if slope is None else f"{slope:.3f}"
        print(f"[fit] {city}: slope={-f.alpha:.3f} (alpha={f.alpha:.3f}) xmin={f.xmin} "
              f"ks={f.ks_statistic:.4f} n_tail={f.n_tail} ccdf_ls_slope={slope_txt}")
    stats_mod.write_fit_csv(fits, cfg.cache_path("fit.csv"))


def stage_longest(cfg: RunConfig) -> None:
    by_city = casc.read_cascades(_require(cfg, CASCADES_CACHE, "build-cascades"))
    top = stats_mod.longest_cascades(by_city, cfg.top_k_longest)
    with open(cfg.cache_path("longest.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write("city,rank,cascade_id,size\n")
        for city in sorted(top):
            for rank, cascade in enumerate(top[city], start=1):
                cid = "{}:{}:{}".format(*cascade.cascade_id)
                fh.write(f"{city},{rank},{cid},{cascade.size}\n")
    for city in sorted(top):
        if top[city]:
            print(f"[longest] {city}: max size {top[city][0].size}")


def stage_export_dot(cfg: RunConfig, census_reps: bool = False) -> None:
    by_city = casc.read_cascades(_require(cfg, CASCADES_CACHE, "build-cascades"))
    out_dir = cfg.cache_path("dot")
    out_dir.mkdir(parents=True, exist_ok=True)
    top = stats_mod.longest_cascades(by_city, cfg.top_k_longest)
    n = 0
    for city in sorted(top):
        for rank, cascade in enumerate(top[city], start=1):
            name = f"{city.replace(' ', '_')}_rank{rank}.dot"
            (out_dir / name).write_text(stats_mod.export_dot(cascade), encoding="ascii")
            n += 1
    if census_reps:
        table = census_mod.census(by_city, cfg.census_max_rank)
        reps = {c.cascade_id: c for cs in by_city.values() for c in cs}
        for city in sorted(table):
            for row in table[city]:
                cascade = reps[row.representative]
                name = f"{city.replace(' ', '_')}_census{row.rank}.dot"
                (out_dir / name).write_text(stats_mod.export_dot(cascade),
                                            encoding="ascii")
                n += 1
    print(f"[export-dot] wrote {n} DOT files to {out_dir}")


_WORKER_EXTRACTOR = None


def _worker_init(extractor):
    global _WORKER_EXTRACTOR
    _WORKER_EXTRACTOR = extractor


def _worker_extract(cascade):
    before = _WORKER_EXTRACTOR.imputed.copy()
    vec = _WORKER_EXTRACTOR.extract(cascade)
    return vec, dict(_WORKER_EXTRACTOR.imputed - before)


def stage_features(cfg: RunConfig) -> None:
    result = load_ingest(_require(cfg, INGEST_CACHE, "ingest"))
    by_city = casc.read_cascades(_require(cfg, CASCADES_CACHE, "build-cascades"))
    graph = _load_graph(result)
    fc = feat.FeatureConfig(k=cfg.k, percentile=cfg.percentile,
                            min_big_cascades=cfg.min_big_cascades,
                            balance_seed=cfg.seed)
    labeling = feat.label_cascades(by_city, fc)
    balanced = feat.balance(labeling.labeled, fc)
    extractor = feat.FeatureExtractor(result.users, result.businesses, graph, cfg.k)

    if cfg.workers > 1:
        rows = [(city, r) for city in sorted(balanced)
                for r in sorted(balanced[city], key=lambda r: r.cascade.cascade_id)]
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(cfg.workers, initializer=_worker_init, initargs=(extractor,)) as pool:
            outputs = pool.map(_worker_extract, [r.cascade for _, r in rows], chunksize=64)
        examples = []
        for (city, row), (vec, imputed) in zip(rows, outputs):
            examples.append(feat.LabeledExample(row.cascade.cascade_id, city, vec, row.label))
            extractor.imputed.update(imputed)
    else:
        examples = feat.build_examples(balanced, extractor)

    feat.write_features_csv(examples, cfg.cache_path("features.csv"))
    feat.save_examples(examples, cfg.cache_path("features.pkl"))
    labeling_doc = {
        "schema_version": SCHEMA_VERSION,
        "thresholds": labeling.thresholds,
        "excluded": [[city, n_long] for city, n_long in labeling.excluded],
        "included": sorted(labeling.labeled),
        "imputed_values": {k: v for k, v in sorted(extractor.imputed.items())},
    }
    with open(cfg.cache_path("labeling.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(labeling_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for city, n_long in labeling.excluded:
        print(f"[features] excluded {city}: only {n_long} long cascades "
              f"(floor {cfg.min_big_cascades})")
    print(f"[features] {len(examples)} balanced examples from "
          f"{len(labeling.labeled)} cities")


def _gbdt_fit(cfg: RunConfig):
    return lambda X, y: learn.train_gbdt(X, y, n_trees=cfg.n_trees,
                                         max_depth=cfg.max_depth,
                                         learning_rate=cfg.learning_rate,
                                         min_leaf=cfg.min_leaf)


def _logreg_fit(cfg: RunConfig):
    return lambda X, y: learn.train_logreg(X, y, l1=cfg.l1, l2=cfg.l2,
                                           epochs=cfg.logreg_epochs)


def _examples_by_city(cfg: RunConfig):
    examples = feat.load_examples(_require(cfg, "features.pkl", "features"))
    by_city: dict[str, list] = {}
    for e in examples:
        by_city.setdefault(e.city, []).append(e)
    return {city: by_city[city] for city in sorted(by_city)}


def stage_train(cfg: RunConfig) -> None:
    by_city = _examples_by_city(cfg)
    models = {}
    importance_rows = []
    for city, examples in by_city.items():
        X, y = feat.examples_matrix(examples)
        try:
            gbdt = _gbdt_fit(cfg)(X, y)
            logreg = _logreg_fit(cfg)(X, y)
        except ValueError as exc:
            raise DataError(f"{city}: {exc}") from exc
        models[city] = {"gbdt": gbdt, "logreg": logreg}
        level = learn.feature_importance(gbdt, feat.FEATURE_NAMES)
        gain = dict(learn.split_gain_importance(gbdt, feat.FEATURE_NAMES))
        for rank, (name, score) in enumerate(level, start=1):
            importance_rows.append((city, rank, name, score, gain[name]))
    payload = {"format": MODELS_CACHE_FORMAT, "version": SCHEMA_VERSION, "models": models}
    with open(cfg.cache_path("models.pkl"), "wb") as fh:
        pickle.dump(payload, fh, protocol=4)
    with open(cfg.cache_path("importance.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["city", "rank", "feature", "level_score", "gain_score"])
        for city, rank, name, score, gain_score in importance_rows:
            writer.writerow([city, rank, name, repr(score), repr(gain_score)])
    print(f"[train] fitted models for {len(models)} cities")


def stage_evaluate(cfg: RunConfig) -> None:
    by_city = _examples_by_city(cfg)
    report = {"schema_version": SCHEMA_VERSION, "cities": {}}
    acc_rows = []
    roc_rows = []
    for city, examples in by_city.items():
        X, y = feat.examples_matrix(examples)
        try:
            gbdt_rep = learn.cross_validate(
                X, y, _gbdt_fit(cfg), folds=cfg.folds,
                seed=substream_seed(cfg.seed, "cv", "gbdt", city),
                feature_names=feat.FEATURE_NAMES)
            logreg_rep = learn.cross_validate(
                X, y, _logreg_fit(cfg), folds=cfg.folds,
                seed=substream_seed(cfg.seed, "cv", "logreg", city))
        except ValueError as exc:
            raise DataError(f"{city}: {exc}") from exc
        report["cities"][city] = {
            "n_examples": len(examples),
            "gbdt": {
                "fold_accuracies": gbdt_rep.fold_accuracies,
                "mean_accuracy": gbdt_rep.mean_accuracy,
                "auc": gbdt_rep.auc,
                "importance": gbdt_rep.importance,
                "importance_gain": gbdt_rep.importance_gain,
            },
            "logreg": {
                "fold_accuracies": logreg_rep.fold_accuracies,
                "mean_accuracy": logreg_rep.mean_accuracy,
                "auc": logreg_rep.auc,
            },
        }
        for fold, acc in enumerate(gbdt_rep.fold_accuracies):
            acc_rows.append((city, fold, acc))
        for fpr, tpr, thr in gbdt_rep.roc:
            roc_rows.append((city, fpr, tpr, thr))
        print(f"[evaluate] {city}: gbdt acc={gbdt_rep.mean_accuracy:.3f} "
              f"auc={gbdt_rep.auc:.3f} | logreg acc={logreg_rep.mean_accuracy:.3f} "
              f"auc={logreg_rep.auc:.3f}")
    with open(cfg.cache_path("eval.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(cfg.cache_path("accuracy.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write("city,fold,accuracy\n")
        for city, fold, acc in acc_rows:
            fh.write(f"{city},{fold},{acc!r}\n")
    with open(cfg.cache_path("roc.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write("city,fpr,tpr,threshold\n")
        for city, fpr, tpr, thr in roc_rows:
            fh.write(f"{city},{fpr!r},{tpr!r},{thr!r}\n")


ALL_STAGES = [
    ("ingest", stage_ingest),
    ("build-cascades", stage_build_cascades),
    ("summary", stage_summary),
    ("census", stage_census),
    ("purity", stage_purity),
    ("fit", stage_fit),
    ("longest", stage_longest),
    ("features", stage_features),
    ("train", stage_train),
    ("evaluate", stage_evaluate),
]

STAGE_BY_NAME = dict(ALL_STAGES)
STAGE_BY_NAME["export-dot"] = stage_export_dot


def stage_all(cfg: RunConfig) -> None:
    for name, fn in ALL_STAGES:
        print(f"=== {name} ===")
        fn(cfg)


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


_CONFIG_FLAGS = [
    # (flag, dest, type, help)
    ("--business", "business_path", str, "business JSON-lines file"),
    ("--user", "user_path", str, "user JSON-lines file"),
    ("--review", "review_path", str, "review JSON-lines file"),
    ("--tip", "tip_path", str, "tip JSON-lines file"),
    ("--cache-dir", "cache_dir", str, "directory for stage outputs"),
    ("--window-days", "window_days", int, "max influence window in days (default: unlimited)"),
    ("--census-max-rank", "census_max_rank", int, "topology ranks per city"),
    ("--node-cap", "node_cap", int, "max nodes for exact isomorphism checks"),
    ("--purity-samples", "purity_samples", int, "bucket members checked per signature"),
    ("--top-k", "top_k_longest", int, "longest cascades kept per city"),
    ("--k", "k", int, "prefix size in nodes for features"),
    ("--percentile", "percentile", float, "long/short threshold percentile"),
    ("--min-big-cascades", "min_big_cascades", int, "city floor on long-cascade count"),
    ("--n-trees", "n_trees", int, "boosting rounds"),
    ("--max-depth", "max_depth", int, "tree depth limit"),
    ("--learning-rate", "learning_rate", float, "boosting shrinkage"),
    ("--min-leaf", "min_leaf", int, "minimum samples per leaf"),
    ("--l1", "l1", float, "elastic-net L1 penalty"),
    ("--l2", "l2", float, "elastic-net L2 penalty"),
    ("--logreg-epochs", "logreg_epochs", int, "proximal gradient iterations"),
    ("--folds", "folds", int, "cross-validation folds"),
    ("--seed", "seed", int, "global seed, substreamed per stage"),
    ("--workers", "workers", int, "worker pool size for parallel stages"),
]

_DEFAULTS = RunConfig()


def _build_parser() -> _Parser:
    parser = _Parser(prog="cascademine",
                     description="Mine influence cascades from review/tip logs and "
                                 "predict their growth.")
    sub = parser.add_subparsers(dest="command", required=True)

    stage_names = [name for name, _ in ALL_STAGES] + ["export-dot", "all"]
    for name in stage_names:
        p = sub.add_parser(name, help=f"run the {name} stage",
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.add_argument("--config", help="key=value config file; flags override it")
        for flag, dest, ftype, helptext in _CONFIG_FLAGS:
            p.add_argument(flag, dest=dest, type=ftype, default=None,
                           help=f"{helptext} (default: {getattr(_DEFAULTS, dest)})")
        if name == "export-dot":
            p.add_argument("--census-reps", action="store_true",
                           help="also export census representative cascades")

    p = sub.add_parser("synth", help="generate a synthetic dataset in Yelp format",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--out-dir", required=True, help="output directory for the files")
    p.add_argument("--users", type=int, default=50)
    p.add_argument("--businesses", type=int, default=10)
    p.add_argument("--events", type=int, default=200)
    p.add_argument("--friend-prob", type=float, default=0.1)
    p.add_argument("--influence-prob", type=float, default=0.3)
    p.add_argument("--cities", type=int, default=2)
    p.add_argument("--topology", choices=("random", "chain"), default="random")
    p.add_argument("--seed", type=int, default=0)
    return parser


def run(argv=None) -> None:
    args = _build_parser().parse_args(argv)
    if args.command == "synth":
        try:
            scfg = SynthConfig(n_users=args.users, n_businesses=args.businesses,
                               n_events=args.events, friend_prob=args.friend_prob,
                               influence_prob=args.influence_prob, seed=args.seed,
                               n_cities=args.cities, topology=args.topology)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        result = generate_synthetic(scfg, args.out_dir)
        print(f"[synth] {result.n_events} events, {result.n_truth_edges} ground-truth "
              f"influence edges -> {args.out_dir}")
        return

    overrides = {dest: getattr(args, dest) for _, dest, _, _ in _CONFIG_FLAGS}
    cfg = build_config(args.config, overrides)
    Path(cfg.cache_dir).mkdir(parents=True, exist_ok=True)
    if args.command == "all":
        stage_all(cfg)
    else:
        STAGE_BY_NAME[args.command](cfg)


def main(argv=None) -> int:
    try:
        run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except MissingStageError as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
