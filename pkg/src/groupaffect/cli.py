"""Pipeline command line: synth, ingest, mobility, features, profile,
evaluate, and report subcommands over one shared run configuration.

Every stage appends an entry to out_dir/manifest.json recording the
digests of what it read and wrote, the config digest, and the root seed,
so a finished directory is self-describing and reruns are comparable
byte for byte. Manifests carry no timestamps on purpose.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from groupaffect import __version__
from groupaffect.config import (
    MODEL_KINDS,
    RunConfig,
    digest_file,
    load_config,
)
from groupaffect.errors import ValidationError
from groupaffect.evaluation import (
    GENERALIZED_ID,
    EvalReport,
    FoldCell,
    GroupResult,
    evaluate,
    make_folds,
    write_plotdata_csv,
    write_report_csv,
    write_summary_csv,
)
from groupaffect.features import (
    FeatureTable,
    build_feature_table,
    build_profiles,
    write_features_csv,
    write_profiles_csv,
)
from groupaffect.ingest import load_cohort
from groupaffect.mobility import (
    DEFAULT_TAG_MAP,
    compute_mobility,
    parse_tag_map,
    write_timelines,
)
from groupaffect.profiling import Grouping, strategy_groups, write_groups_csv
from groupaffect.synthgen import (
    benchmark_spec,
    generate,
    homogeneous_spec,
    imbalanced_spec,
    write_bundle,
)

DATA_FILES = ("gps.csv", "accel.csv", "sms.csv", "calls.csv", "ema.csv",
              "sias.csv", "poi.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groupaffect",
        description="Grouped negative-affect prediction pipeline.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="TOML run configuration; flags override it")
    common.add_argument("--data-dir", default=None,
                        help="raw channel CSV directory")
    common.add_argument("--out", default=None, help="artifact directory")
    common.add_argument("--seed", type=int, default=None, help="root seed")
    common.add_argument("--jobs", type=int, default=None,
                        help="model-fitting worker count")
    common.add_argument("--tag-map", type=Path, default=None,
                        help="tag=value<TAB>category map file; default built in")
    common.add_argument("--json-logs", action="store_true",
                        help="one JSON event per stage on stdout")

    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic cohort bundle")
    p.add_argument("--preset",
                   choices=("benchmark", "homogeneous", "imbalanced"),
                   default="benchmark")
    p.add_argument("--participants", type=int, default=None)
    p.add_argument("--days", type=int, default=None)

    sub.add_parser("ingest", parents=[common],
                   help="load and validate the raw channels")
    sub.add_parser("mobility", parents=[common],
                   help="stay points, labels, and semantic timelines")
    sub.add_parser("features", parents=[common],
                   help="per-EMA predictor table")
    sub.add_parser("profile", parents=[common],
                   help="behavior profiles and strategy groupings")

    p = sub.add_parser("evaluate", parents=[common],
                       help="grouped vs generalized cross-validation")
    p.add_argument("--strategy", action="append", default=None,
                   help="grouping strategy; repeatable, overrides config")
    p.add_argument("--model", action="append", default=None,
                   choices=MODEL_KINDS,
                   help="model kind; repeatable, overrides config")
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--gp-restarts", type=int, default=None)
    p.add_argument("--gp-max-iter", type=int, default=None)
    p.add_argument("--rf-trees", type=int, default=None)

    sub.add_parser("report", parents=[common],
                   help="plot data and run summary from evaluation output")
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.data_dir is not None:
        cfg.data_dir = args.data_dir
    elif cfg.data_dir == "data" and args.out is not None:
        # single-directory convenience: data and artifacts share --out
        cfg.data_dir = args.out
    if args.out is not None:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if getattr(args, "strategy", None):
        cfg.strategies = list(args.strategy)
    if getattr(args, "model", None):
        cfg.models = list(args.model)
    if getattr(args, "folds", None) is not None:
        cfg.folds = args.folds
    cfg.validate()
    return cfg


def _emit(args: argparse.Namespace, stage: str, **fields) -> None:
    if args.json_logs:
        print(json.dumps({"stage": stage, **fields}, sort_keys=True))
    else:
        detail = " ".join(f"{k}={v}" for k, v in fields.items())
        print(f"[{stage}] {detail}")


def _tag_map(args: argparse.Namespace) -> dict[str, str]:
    if args.tag_map is None:
        return DEFAULT_TAG_MAP
    mapping, warnings = parse_tag_map(args.tag_map)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    return mapping


def _digest_existing(directory: Path, names) -> dict[str, str]:
    return {name: digest_file(directory / name)
            for name in names if (directory / name).exists()}


def _update_manifest(cfg: RunConfig, stage: str, inputs: dict[str, str],
                     outputs: dict[str, str]) -> None:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.json"
    manifest = {"version": __version__, "stages": {}}
    if path.exists():
        try:
            prior = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            prior = None
        if isinstance(prior, dict) and isinstance(prior.get("stages"), dict):
            manifest["stages"] = prior["stages"]
    manifest["stages"][stage] = {"config_digest": cfg.digest(),
                                 "seed": cfg.seed,
                                 "inputs": inputs, "outputs": outputs}
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _load(cfg: RunConfig) -> tuple:
    data_dir = Path(cfg.data_dir)
    cohort = load_cohort(data_dir, utc_offset_hours=cfg.utc_offset_hours)
    return cohort, _digest_existing(data_dir, DATA_FILES)


def _mobility(cohort, cfg: RunConfig, args: argparse.Namespace):
    return compute_mobility(cohort, _tag_map(args), d_max_m=cfg.d_max_m,
                            t_min_s=cfg.t_min_s,
                            out_of_town_km=cfg.out_of_town_km,
                            unmatched_label=cfg.unmatched_label)


def cmd_synth(args: argparse.Namespace, cfg: RunConfig) -> int:
    if args.preset == "benchmark":
        spec = benchmark_spec(cfg.seed, args.participants or 30,
                              args.days or 14)
    elif args.preset == "homogeneous":
        spec = homogeneous_spec(cfg.seed, args.participants or 18,
                                args.days or 14)
    else:
        if args.participants is not None:
            raise ValidationError(
                "the imbalanced preset has fixed group sizes; "
                "--participants is not supported")
        spec = imbalanced_spec(cfg.seed, args.days or 14)
    cohort, truth = generate(spec)
    dest = Path(cfg.data_dir)
    write_bundle(spec, cohort, truth, dest)
    outputs = {p.name: digest_file(p) for p in sorted(dest.iterdir())
               if p.is_file()}
    _update_manifest(cfg, "synth", {}, outputs)
    _emit(args, "synth", preset=args.preset, seed=cfg.seed,
          participants=spec.n_participants, days=spec.days, dest=str(dest))
    return 0


def cmd_ingest(args: argparse.Namespace, cfg: RunConfig) -> int:
    cohort, inputs = _load(cfg)
    rows = {
        "gps": int(sum(len(cohort.gps[p]) for p in cohort.participants)),
        "accel": int(sum(len(cohort.accel[p]) for p in cohort.participants)),
        "sms": int(sum(len(cohort.sms[p]) for p in cohort.participants)),
        "calls": int(sum(len(cohort.calls[p]) for p in cohort.participants)),
        "ema": int(sum(len(cohort.ema[p]) for p in cohort.participants)),
    }
    payload = {
        "participants": len(cohort.participants),
        "rows": rows,
        "duplicates": cohort.load_report.duplicates,
        "warnings": cohort.load_report.warnings,
    }
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "load_report.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    _update_manifest(cfg, "ingest", inputs,
                     {"load_report.json": digest_file(path)})
    _emit(args, "ingest", participants=len(cohort.participants),
          warnings=len(cohort.load_report.warnings))
    return 0


def cmd_mobility(args: argparse.Namespace, cfg: RunConfig) -> int:
    cohort, inputs = _load(cfg)
    results = _mobility(cohort, cfg, args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "timelines.csv"
    write_timelines(results, path)
    no_home = sum(1 for r in results.values() if "no_home" in r.flags)
    _update_manifest(cfg, "mobility", inputs,
                     {"timelines.csv": digest_file(path)})
    _emit(args, "mobility", participants=len(results), no_home=no_home)
    return 0


def cmd_features(args: argparse.Namespace, cfg: RunConfig) -> int:
    cohort, inputs = _load(cfg)
    results = _mobility(cohort, cfg, args)
    table = build_feature_table(cohort, results,
                                epoch_minutes=cfg.epoch_minutes,
                                hour_of_day=cfg.hour_of_day)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "features.csv"
    write_features_csv(table, path)
    _update_manifest(cfg, "features", inputs,
                     {"features.csv": digest_file(path)})
    _emit(args, "features", rows=len(table), columns=len(table.columns))
    return 0


def cmd_profile(args: argparse.Namespace, cfg: RunConfig) -> int:
    cohort, inputs = _load(cfg)
    results = _mobility(cohort, cfg, args)
    profiles = build_profiles(cohort, results)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prof_path = out / "profiles.csv"
    write_profiles_csv(profiles, cohort.sias, prof_path)
    groupings = []
    sizes = {}
    for strategy in cfg.strategies:
        grouping = strategy_groups(strategy, profiles, cohort.sias,
                                   seed=cfg.seed, alpha=cfg.gmeans_alpha,
                                   standardize=cfg.standardize_profiles)
        sizes[strategy] = grouping.sizes()
        groupings.append(grouping)
    groups_path = out / "groups.csv"
    write_groups_csv(groupings, groups_path)
    _update_manifest(cfg, "profile", inputs,
                     {"profiles.csv": digest_file(prof_path),
                      "groups.csv": digest_file(groups_path)})
    _emit(args, "profile", participants=len(profiles),
          groups={s: v for s, v in sorted(sizes.items())})
    return 0


def _read_features_csv(path: Path) -> FeatureTable:
    if not path.exists():
        raise ValidationError(f"{path} not found; run the features stage first")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        columns = header[2:-1]
        pids, prompts, rows, targets = [], [], [], []
        for rec in reader:
            pids.append(rec[0])
            prompts.append(int(rec[1]))
            rows.append([float(v) for v in rec[2:-1]])
            targets.append(float(rec[-1]))
    if not rows:
        raise ValidationError(f"{path} holds no feature rows")
    return FeatureTable(pids, np.asarray(prompts, dtype=np.int64),
                        np.asarray(rows, dtype=float),
                        np.asarray(targets, dtype=float), columns)


def _read_groups_csv(path: Path) -> dict[str, Grouping]:
    if not path.exists():
        raise ValidationError(f"{path} not found; run the profile stage first")
    per: dict[str, dict[str, int]] = defaultdict(dict)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for pid, strategy, gid in reader:
            per[strategy][pid] = int(gid)
    return {s: Grouping(s, assignment, max(assignment.values()) + 1)
            for s, assignment in per.items()}


def cmd_evaluate(args: argparse.Namespace, cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    feat_path = out / "features.csv"
    groups_path = out / "groups.csv"
    table = _read_features_csv(feat_path)
    groupings = _read_groups_csv(groups_path)
    fit_kwargs = {}
    if args.gp_restarts is not None:
        fit_kwargs["gp_restarts"] = args.gp_restarts
    if args.gp_max_iter is not None:
        fit_kwargs["gp_max_iter"] = args.gp_max_iter
    if args.rf_trees is not None:
        fit_kwargs["rf_trees"] = args.rf_trees

    reports = []
    weight_by = "participants" if cfg.weight_by_participants else "obs"
    for strategy in cfg.strategies:
        if strategy not in groupings:
            raise ValidationError(
                f"strategy {strategy!r} missing from {groups_path}; "
                f"rerun the profile stage with it enabled")
        grouping = groupings[strategy]
        plan = make_folds(grouping, k=cfg.folds, seed=cfg.seed)
        for kind in cfg.models:
            report = evaluate(table, grouping, kind, plan, seed=cfg.seed,
                              weight_by=weight_by,
                              config_digest=cfg.digest(),
                              n_jobs=cfg.jobs, **fit_kwargs)
            reports.append(report)
            _emit(args, "evaluate", strategy=strategy, model=kind,
                  wrmse=round(report.wrmse, 6),
                  generalized=round(report.generalized_rmse, 6),
                  delta=round(report.delta, 6))
    report_path = out / "report.csv"
    summary_path = out / "summary.csv"
    write_report_csv(reports, report_path)
    write_summary_csv(reports, summary_path)
    _update_manifest(cfg, "evaluate",
                     {"features.csv": digest_file(feat_path),
                      "groups.csv": digest_file(groups_path)},
                     {"report.csv": digest_file(report_path),
                      "summary.csv": digest_file(summary_path)})
    return 0


def _reports_from_csv(cfg: RunConfig, report_path: Path,
                      summary_path: Path) -> list[EvalReport]:
    if not report_path.exists() or not summary_path.exists():
        raise ValidationError(
            f"{report_path} and {summary_path} are required; "
            f"run the evaluate stage first")
    cells: dict[tuple[str, str], list[FoldCell]] = defaultdict(list)
    with open(report_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for strategy, model, fold, gid, n_part, n_obs, rmse in reader:
            cells[(strategy, model)].append(
                FoldCell(int(fold), int(gid), int(n_part), int(n_obs),
                         float(rmse)))
    reports = []
    with open(summary_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for strategy, model, wrmse_s, gen_s, _delta in reader:
            key = (strategy, model)
            if not cells[key]:
                raise ValidationError(
                    f"summary row {key} has no cells in {report_path}")
            by_group: dict[int, list[FoldCell]] = defaultdict(list)
            for c in cells[key]:
                if c.group_id != GENERALIZED_ID:
                    by_group[c.group_id].append(c)
            groups = []
            for gid in sorted(by_group):
                gcells = by_group[gid]
                n_obs = sum(c.n_obs for c in gcells)
                pooled = float(np.sqrt(
                    sum(c.n_obs * c.rmse ** 2 for c in gcells) / n_obs))
                groups.append(GroupResult(gid, gcells[0].n_participants,
                                          n_obs, pooled))
            reports.append(EvalReport(
                strategy=strategy, kind=model,
                generalized_rmse=float(gen_s), groups=tuple(groups),
                wrmse=float(wrmse_s), seed=cfg.seed,
                config_digest=cfg.digest(), cells=tuple(cells[key])))
    return reports


def cmd_report(args: argparse.Namespace, cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    report_path = out / "report.csv"
    summary_path = out / "summary.csv"
    reports = _reports_from_csv(cfg, report_path, summary_path)
    plot_path = out / "plotdata.csv"
    write_plotdata_csv(reports, plot_path)
    for rep in reports:
        _emit(args, "report", strategy=rep.strategy, model=rep.kind,
              wrmse=round(rep.wrmse, 6),
              generalized=round(rep.generalized_rmse, 6),
              delta=round(rep.delta, 6), groups=len(rep.groups))
    _update_manifest(cfg, "report",
                     {"report.csv": digest_file(report_path),
                      "summary.csv": digest_file(summary_path)},
                     {"plotdata.csv": digest_file(plot_path)})
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "mobility": cmd_mobility,
    "features": cmd_features,
    "profile": cmd_profile,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(file=sys.stderr)
        return 2
    try:
        cfg = _resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
