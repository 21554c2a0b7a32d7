"""Single command-line entry point for the augmentation pipeline.

Subcommands: ingest, scenario, plan, convert, train, eval, simulate.
Exit codes: 0 success, 1 usage error, 2 data error. All outputs are
written atomically (temp file + rename), and every stage is re-run safe:
identical inputs give byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import conversion, metrics, plots, scenarios, selection, simulate, trainer
from .errors import DataError, VcaError
from .records import load_manifest, save_manifest
from .store import load_store, save_store

log = logging.getLogger("vca")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

KIND_ALIASES = {"semi": "semi", "small": "small", "imb": "imbalanced", "imbalanced": "imbalanced"}


class _UsageExit(Exception):
    def __init__(self, message: str):
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    """argparse variant that signals usage problems instead of exiting 2."""

    def error(self, message):
        raise _UsageExit(f"{self.format_usage()}{self.prog}: error: {message}")


def _threads_from(args) -> int:
    value = args.threads
    if value is None:
        env = os.environ.get("VCA_THREADS")
        value = int(env) if env else 1
    if value < 1:
        raise DataError(f"--threads must be >= 1, got {value}")
    return value


def _read_json(path: str | Path) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise DataError(f"{path}: expected a JSON object")
    return obj


def cmd_ingest(args) -> int:
    records = load_manifest(args.manifest)
    store = load_store(args.embeddings)
    missing = [r.utt_id for r in records if r.utt_id not in store]
    if missing:
        raise DataError(
            f"{len(missing)} manifest records lack embeddings (first: {missing[0]!r})"
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_manifest(records, out / "manifest.jsonl")
    save_store(store, out / "embeddings.vcae")
    log.info("ingested %d records, %d embeddings (dim %d)", len(records), len(store), store.dim)
    return EXIT_OK


def cmd_scenario(args) -> int:
    cfg_obj = _read_json(args.config)
    base = Path(args.config).parent
    manifest_path = args.manifest or cfg_obj.get("corpus_manifest")
    embeddings_path = args.embeddings or cfg_obj.get("embeddings")
    if manifest_path is None or embeddings_path is None:
        raise DataError("scenario config must name corpus_manifest and embeddings (or pass --manifest/--embeddings)")
    corpus = load_manifest(_resolve(base, manifest_path))
    store = load_store(_resolve(base, embeddings_path))
    seed = args.seed if args.seed is not None else cfg_obj.get("seed", 0)
    cfg = scenarios.ScenarioConfig(
        kind=KIND_ALIASES[args.kind],
        n_labelled_speakers=cfg_obj["n_labelled_speakers"],
        utts_per_labelled_speaker=cfg_obj["utts_per_labelled_speaker"],
        seed=seed,
        n_unlabelled_utts=cfg_obj.get("n_unlabelled_utts"),
        n_minority_speakers=cfg_obj.get("n_minority_speakers"),
        utts_per_minority_speaker=cfg_obj.get("utts_per_minority_speaker"),
    )
    scenario = scenarios.build_scenario(corpus, store, cfg)
    scenarios.save_scenario(scenario, args.out)
    log.info("built %s scenario: |T|=%d |S|=%d", scenario.kind, len(scenario.targets), len(scenario.sources))
    return EXIT_OK


def _resolve(base: Path, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base / p


def _train_config(args, seed_default: int = 0) -> trainer.TrainConfig:
    obj = _read_json(args.train_config) if getattr(args, "train_config", None) else {}
    cfg = trainer.TrainConfig(
        epochs=obj.get("epochs", 20),
        batch=obj.get("batch", 64),
        lr=obj.get("lr", 0.1),
        seed=obj.get("seed", seed_default),
    )
    cfg.validate()
    return cfg


def cmd_plan(args) -> int:
    scenario = scenarios.load_scenario(args.scenario)
    store = load_store(args.embeddings)
    if args.strategy == "rs":
        seed = args.seed if args.seed is not None else 0
        plan = selection.plan_rs(scenario, args.k, seed=seed)
    else:
        if args.phi == trainer.PHI_TRAINED:
            phi_model = trainer.train_phi(
                scenario, store, _train_config(args, seed_default=args.seed or 0)
            )
            tag = simulate._phi_tag(phi_model)
        else:
            phi_model = trainer.identity_model(store.dim)
            tag = trainer.PHI_IDENTITY
        needed = sorted(
            {r.utt_id for r in scenario.targets} | {r.utt_id for r in scenario.sources}
        )
        phi_store = trainer.transform_store(phi_model, store, needed)
        plan = selection.plan_nn(
            scenario,
            args.k,
            phi_store,
            min_similarity=args.min_similarity,
            phi_tag=tag,
            threads=_threads_from(args),
        )
    selection.write_plan(plan, args.out)
    log.info("wrote %s plan with %d jobs (K=%d)", plan.strategy, len(plan.jobs), plan.k)
    return EXIT_OK


def cmd_convert(args) -> int:
    if args.backend == "synthetic":
        plan = selection.read_plan(args.plan)
        store = load_store(args.store)
        records = load_manifest(args.manifest) if args.manifest else []
        params = conversion.SyntheticVCParams(
            sigma_base=args.sigma_base,
            lambda_noise=args.lambda_noise,
            lambda_drift=args.lambda_drift,
            seed=args.seed if args.seed is not None else 0,
        )
        augmented = conversion.apply_plan(plan, records, store, params=params)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_manifest(augmented.records, out / "manifest.jsonl")
        save_store(augmented.store, out / "embeddings.vcae")
        log.info("converted %d jobs; corpus now %d records", len(plan.jobs), len(augmented.records))
        return EXIT_OK
    if args.backend == "external-emit":
        plan = selection.read_plan(args.plan)
        records = load_manifest(args.manifest) if args.manifest else None
        conversion.emit_external_jobs(plan, args.out, records=records)
        log.info("emitted %d jobs to %s", len(plan.jobs), args.out)
        return EXIT_OK
    # external-ingest
    if not args.results or not args.result_store:
        raise DataError("external-ingest requires --results and --result-store")
    plan = selection.read_plan(args.plan) if args.plan else None
    base = load_store(args.store)
    records = load_manifest(args.manifest) if args.manifest else []
    pseudo_records, merged = conversion.ingest_external_results(
        args.results, args.result_store, base, plan=plan
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_manifest(list(records) + pseudo_records, out / "manifest.jsonl")
    save_store(merged, out / "embeddings.vcae")
    log.info("ingested %d pseudo records", len(pseudo_records))
    return EXIT_OK


def cmd_train(args) -> int:
    records = load_manifest(args.corpus)
    store = load_store(args.store)
    cfg = _train_config(args, seed_default=args.seed if args.seed is not None else 0)
    model = trainer.train(records, store, cfg)
    trainer.save_model(model, args.out)
    log.info(
        "trained on %d records, %d speakers; final loss %.6f",
        len(records), len(model.class_index), model.loss_history[-1],
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    trials = metrics.load_trials(args.trials)
    model = trainer.load_model(args.model)
    store = load_store(args.store)
    report, scores = metrics.evaluate(
        trials, model, store, p_target=args.p_target, c_miss=args.c_miss, c_fa=args.c_fa
    )
    metrics.save_report(report, args.report)
    if args.scores:
        metrics.save_scores(trials, scores, args.scores)
    if args.figures:
        fig_path = Path(args.report).with_suffix("")
        plots.plot_score_distributions(
            scores, [t.label for t in trials], report.threshold_at_eer,
            str(fig_path) + "_scores.png",
        )
    log.info("eer=%.4f min_dcf=%.4f over %d trials", report.eer, report.min_dcf, report.n_trials)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = simulate.load_experiment_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, universe=replace(cfg.universe, master_seed=args.seed))
    report = simulate.run_experiment(
        cfg.universe,
        cfg.scenario,
        strategies=cfg.strategies,
        k_values=cfg.k_values,
        n_seeds=cfg.n_seeds,
        train_cfg=cfg.train,
        vc_params=cfg.vc,
        phi=cfg.phi,
        min_similarity=cfg.min_similarity,
        p_target=cfg.p_target,
        c_miss=cfg.c_miss,
        c_fa=cfg.c_fa,
    )
    simulate.save_report_json(report, args.report)
    stem = Path(args.report).with_suffix("")
    from .records import atomic_write_text

    atomic_write_text(str(stem) + "_runs.csv", simulate.report_runs_csv(report))
    atomic_write_text(str(stem) + "_summary.csv", simulate.report_summary_csv(report))
    if args.figures:
        plots.plot_eer_by_k(report, str(stem) + "_eer_by_k.png")
        plots.plot_arm_means(report, str(stem) + "_arm_means.png")
    for arm, k in report.cells():
        log.info("%s@k=%d: mean eer %.4f", arm, k, report.mean_eer(arm, k))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="vca", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="global seed override")
    parser.add_argument(
        "--log-level", default="warning", choices=["debug", "info", "warning", "error"]
    )
    parser.add_argument(
        "--threads", type=int, default=None,
        help="worker cap for parallel stages (env VCA_THREADS as fallback)",
    )
    sub = parser.add_subparsers(dest="command", metavar="subcommand")

    p = sub.add_parser("ingest", help="validate and canonicalize a manifest + embedding store")
    p.add_argument("--manifest", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("scenario", help="build a defective-dataset scenario")
    p.add_argument("--kind", required=True, choices=sorted(KIND_ALIASES))
    p.add_argument("--config", required=True, help="scenario config JSON")
    p.add_argument("--manifest", help="corpus manifest (overrides config)")
    p.add_argument("--embeddings", help="embedding store (overrides config)")
    p.add_argument("--out", required=True, help="output scenario directory")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("plan", help="produce an augmentation plan")
    p.add_argument("--strategy", required=True, choices=["rs", "nn"])
    p.add_argument("--k", required=True, type=int, help="generation coefficient")
    p.add_argument("--scenario", required=True, help="scenario directory")
    p.add_argument("--embeddings", required=True, help="embedding store")
    p.add_argument("--phi", default="trained", choices=["identity", "trained"])
    p.add_argument("--min-similarity", type=float, default=None)
    p.add_argument("--train-config", help="stage-1 training config JSON")
    p.add_argument("--out", required=True, help="output plan file")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("convert", help="execute a plan")
    p.add_argument(
        "--backend", required=True, choices=["synthetic", "external-emit", "external-ingest"]
    )
    p.add_argument("--plan", help="plan file")
    p.add_argument("--store", help="base embedding store")
    p.add_argument("--manifest", help="corpus manifest to carry through")
    p.add_argument("--results", help="external result manifest (ingest)")
    p.add_argument("--result-store", help="external result embeddings (ingest)")
    p.add_argument("--sigma-base", type=float, default=0.05)
    p.add_argument("--lambda-noise", type=float, default=0.5)
    p.add_argument("--lambda-drift", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="train the linear speaker classifier")
    p.add_argument("--corpus", required=True, help="labelled manifest")
    p.add_argument("--store", required=True, help="embedding store")
    p.add_argument("--config", dest="train_config", help="training config JSON")
    p.add_argument("--out", required=True, help="output model checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score trials and report EER / minDCF")
    p.add_argument("--trials", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--report", required=True, help="output report JSON")
    p.add_argument("--scores", help="optional score file output")
    p.add_argument("--p-target", type=float, default=0.01)
    p.add_argument("--c-miss", type=float, default=1.0)
    p.add_argument("--c-fa", type=float, default=1.0)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="run a synthetic-universe experiment")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--report", required=True, help="output report JSON")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    # Subcommand-specific preconditions that argparse cannot express.
    try:
        _validate_flag_combinations(args)
        return args.func(args)
    except (VcaError, OSError) as exc:
        print(f"vca: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def _validate_flag_combinations(args) -> None:
    if args.command == "plan":
        if args.k < 1:
            raise DataError("--k must be >= 1")
    if args.command == "convert":
        if args.backend in ("synthetic", "external-emit") and not args.plan:
            raise DataError(f"{args.backend} requires --plan")
        if args.backend in ("synthetic", "external-ingest") and not args.store:
            raise DataError(f"{args.backend} requires --store")


if __name__ == "__main__":
    sys.exit(main())
