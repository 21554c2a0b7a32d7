import json

import pytest

from conftest import make_corpus
from vca.cli import main
from vca.records import save_manifest
from vca.store import load_store, save_store


@pytest.fixture
def workspace(tmp_path):
    """Corpus manifest + embeddings + scenario config on disk."""
    records, store = make_corpus(n_speakers=10, utts_per_speaker=5, dim=8, seed=1)
    manifest = tmp_path / "corpus.jsonl"
    embeddings = tmp_path / "corpus.vcae"
    save_manifest(records, manifest)
    save_store(store, embeddings)
    scenario_cfg = tmp_path / "scenario.json"
    scenario_cfg.write_text(
        json.dumps(
            {
                "corpus_manifest": str(manifest),
                "embeddings": str(embeddings),
                "n_labelled_speakers": 4,
                "utts_per_labelled_speaker": 3,
                "seed": 5,
            }
        )
    )
    return tmp_path, manifest, embeddings, scenario_cfg


def test_no_arguments_prints_usage_and_exits_1(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_subcommand_exits_1(capsys):
    assert main(["frobnicate"]) == 1
    assert "error" in capsys.readouterr().err.lower()


def test_unknown_flag_exits_1(capsys):
    assert main(["ingest", "--manifest", "x", "--embeddings", "y", "--out", "z", "--bogus"]) == 1
    err = capsys.readouterr().err
    assert "usage" in err.lower()


def test_missing_file_is_data_error(tmp_path, capsys):
    code = main(
        ["ingest", "--manifest", str(tmp_path / "no.jsonl"), "--embeddings", str(tmp_path / "no.vcae"), "--out", str(tmp_path / "out")]
    )
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_ingest_writes_canonical_copies(workspace):
    tmp_path, manifest, embeddings, _ = workspace
    out = tmp_path / "ingested"
    assert main(["ingest", "--manifest", str(manifest), "--embeddings", str(embeddings), "--out", str(out)]) == 0
    assert (out / "manifest.jsonl").exists()
    assert load_store(out / "embeddings.vcae") == load_store(embeddings)


def test_full_pipeline_rs(workspace):
    tmp_path, manifest, embeddings, scenario_cfg = workspace
    scn_dir = tmp_path / "scn"
    assert main(["scenario", "--kind", "small", "--config", str(scenario_cfg), "--out", str(scn_dir)]) == 0
    plan_path = tmp_path / "plan.jsonl"
    assert main([
        "--seed", "11", "plan", "--strategy", "rs", "--k", "2",
        "--scenario", str(scn_dir), "--embeddings", str(embeddings), "--out", str(plan_path),
    ]) == 0
    header = json.loads(plan_path.read_text().splitlines()[0])
    assert header["strategy"] == "rs" and header["K"] == 2
    conv_dir = tmp_path / "aug"
    assert main([
        "convert", "--backend", "synthetic", "--plan", str(plan_path),
        "--store", str(embeddings), "--manifest", str(scn_dir / "targets.jsonl"),
        "--out", str(conv_dir),
    ]) == 0
    aug_records = (conv_dir / "manifest.jsonl").read_text().splitlines()
    assert len(aug_records) == 12 + 24  # |T| + K*|T|
    model_path = tmp_path / "model.vcam"
    assert main([
        "train", "--corpus", str(conv_dir / "manifest.jsonl"),
        "--store", str(conv_dir / "embeddings.vcae"), "--out", str(model_path),
    ]) == 0
    # Trials among the scenario's utterances.
    targets = [json.loads(l)["utt_id"] for l in (scn_dir / "targets.jsonl").read_text().splitlines()]
    speakers = {json.loads(l)["utt_id"]: json.loads(l)["speaker_id"] for l in (scn_dir / "targets.jsonl").read_text().splitlines()}
    trials_path = tmp_path / "trials.txt"
    lines = []
    for i, a in enumerate(targets):
        for b in targets[i + 1 :]:
            label = 1 if speakers[a] == speakers[b] else 0
            lines.append(f"{label} {a} {b}")
    trials_path.write_text("".join(l + "\n" for l in lines))
    report_path = tmp_path / "report.json"
    scores_path = tmp_path / "scores.txt"
    assert main([
        "eval", "--trials", str(trials_path), "--model", str(model_path),
        "--store", str(conv_dir / "embeddings.vcae"), "--report", str(report_path),
        "--scores", str(scores_path),
    ]) == 0
    report = json.loads(report_path.read_text())
    assert set(report) == {"n_trials", "eer", "min_dcf", "p_target", "c_miss", "c_fa", "threshold_at_eer"}
    assert (tmp_path / "report_scores.png").exists()
    assert len(scores_path.read_text().splitlines()) == len(lines)


def test_plan_nn_with_trained_phi(workspace):
    tmp_path, manifest, embeddings, scenario_cfg = workspace
    scn_dir = tmp_path / "scn"
    assert main(["scenario", "--kind", "small", "--config", str(scenario_cfg), "--out", str(scn_dir)]) == 0
    plan_path = tmp_path / "plan_nn.jsonl"
    assert main([
        "plan", "--strategy", "nn", "--k", "2", "--scenario", str(scn_dir),
        "--embeddings", str(embeddings), "--phi", "trained", "--out", str(plan_path),
    ]) == 0
    header = json.loads(plan_path.read_text().splitlines()[0])
    assert header["strategy"] == "nn"
    assert header["phi_tag"].startswith("trained:")
    assert header["seed"] is None


def test_rerun_byte_identical(workspace):
    tmp_path, manifest, embeddings, scenario_cfg = workspace
    outputs = []
    for name in ("s1", "s2"):
        scn_dir = tmp_path / name
        assert main(["scenario", "--kind", "small", "--config", str(scenario_cfg), "--out", str(scn_dir)]) == 0
        plan_path = tmp_path / f"{name}.plan"
        assert main([
            "--seed", "3", "plan", "--strategy", "rs", "--k", "1",
            "--scenario", str(scn_dir), "--embeddings", str(embeddings), "--out", str(plan_path),
        ]) == 0
        outputs.append(plan_path.read_bytes())
    assert outputs[0] == outputs[1]


def test_convert_emit_and_ingest_round_trip(workspace):
    tmp_path, manifest, embeddings, scenario_cfg = workspace
    scn_dir = tmp_path / "scn"
    main(["scenario", "--kind", "small", "--config", str(scenario_cfg), "--out", str(scn_dir)])
    plan_path = tmp_path / "plan.jsonl"
    main([
        "--seed", "1", "plan", "--strategy", "rs", "--k", "1",
        "--scenario", str(scn_dir), "--embeddings", str(embeddings), "--out", str(plan_path),
    ])
    jobs_path = tmp_path / "jobs.jsonl"
    assert main([
        "convert", "--backend", "external-emit", "--plan", str(plan_path),
        "--manifest", str(manifest), "--out", str(jobs_path),
    ]) == 0
    jobs = jobs_path.read_text().splitlines()
    assert len(jobs) == 1 + 12
    # Fake an external VC: echo each job's target embedding as the result.
    from vca.store import EmbeddingStore

    base = load_store(embeddings)
    result_store = EmbeddingStore(base.dim)
    result_lines = []
    for line in jobs[1:]:
        job = json.loads(line)
        result_lines.append(json.dumps({
            "utt_id": job["pseudo_utt_id"], "speaker_id": job["assigned_speaker"],
            "audio_path": None, "origin": "pseudo", "source_utt": job["source_utt"],
            "target_utt": job["target_utt"], "k_index": job["k_index"], "status": "ok",
        }))
        result_store.add(job["pseudo_utt_id"], base.get(job["target_utt"]))
    results_path = tmp_path / "results.jsonl"
    results_path.write_text("".join(l + "\n" for l in result_lines))
    results_store_path = tmp_path / "results.vcae"
    save_store(result_store, results_store_path)
    ingest_dir = tmp_path / "ingested"
    assert main([
        "convert", "--backend", "external-ingest", "--plan", str(plan_path),
        "--store", str(embeddings), "--manifest", str(scn_dir / "targets.jsonl"),
        "--results", str(results_path), "--result-store", str(results_store_path),
        "--out", str(ingest_dir),
    ]) == 0
    merged = load_store(ingest_dir / "embeddings.vcae")
    assert len(merged) == len(base) + 12


def test_simulate_with_shipped_default_config(tmp_path):
    from pathlib import Path

    cfg_src = Path(__file__).parent.parent / "configs" / "sim-default.json"
    cfg = json.loads(cfg_src.read_text())
    cfg["n_seeds"] = 1
    cfg["universe"].update(n_train_speakers=16, n_eval_speakers=8, utts_per_train_speaker=4,
                           utts_per_eval_speaker=3, dim=8)
    cfg["scenario"].update(n_labelled_speakers=5, n_minority_speakers=6)
    cfg["scenario"]["utts_per_labelled_speaker"] = 4
    cfg["train"] = {"epochs": 5, "batch": 64, "lr": 0.3, "seed": 0}
    cfg_path = tmp_path / "sim.json"
    cfg_path.write_text(json.dumps(cfg))
    report_path = tmp_path / "report.json"
    assert main(["simulate", "--config", str(cfg_path), "--report", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    arms = {run["arm"] for run in report["runs"]}
    assert arms == {"baseline", "rs", "nn"}
    assert (tmp_path / "report_runs.csv").exists()
    assert (tmp_path / "report_summary.csv").exists()
    assert (tmp_path / "report_eer_by_k.png").exists()
    assert (tmp_path / "report_arm_means.png").exists()


def test_threads_env_fallback(workspace, monkeypatch):
    tmp_path, manifest, embeddings, scenario_cfg = workspace
    scn_dir = tmp_path / "scn"
    main(["scenario", "--kind", "small", "--config", str(scenario_cfg), "--out", str(scn_dir)])
    monkeypatch.setenv("VCA_THREADS", "2")
    plan_env = tmp_path / "env.plan"
    assert main([
        "plan", "--strategy", "nn", "--k", "1", "--phi", "identity",
        "--scenario", str(scn_dir), "--embeddings", str(embeddings), "--out", str(plan_env),
    ]) == 0
    monkeypatch.delenv("VCA_THREADS")
    plan_one = tmp_path / "one.plan"
    assert main([
        "plan", "--strategy", "nn", "--k", "1", "--phi", "identity",
        "--scenario", str(scn_dir), "--embeddings", str(embeddings), "--out", str(plan_one),
    ]) == 0
    assert plan_env.read_bytes() == plan_one.read_bytes()


def test_plan_k_zero_is_usage_like_data_error(workspace, capsys):
    tmp_path, manifest, embeddings, scenario_cfg = workspace
    scn_dir = tmp_path / "scn"
    main(["scenario", "--kind", "small", "--config", str(scenario_cfg), "--out", str(scn_dir)])
    code = main([
        "plan", "--strategy", "rs", "--k", "0",
        "--scenario", str(scn_dir), "--embeddings", str(embeddings),
        "--out", str(tmp_path / "x.plan"),
    ])
    assert code == 2


def test_simulate_golden_run_shipped_config(tmp_path):
    """Pinned values produced once from the shipped default config."""
    from pathlib import Path

    cfg_path = Path(__file__).parent.parent / "configs" / "sim-default.json"
    report_path = tmp_path / "report.json"
    assert main(["simulate", "--config", str(cfg_path), "--report", str(report_path), "--no-figures"]) == 0
    means = json.loads(report_path.read_text())["means"]
    assert set(means) == {"baseline@k=0", "rs@k=9", "nn@k=9"}
    golden = {
        "baseline@k=0": 0.29642857142857143,
        "rs@k=9": 0.27678571428571425,
        "nn@k=9": 0.2738095238095238,
    }
    for cell, eer_value in golden.items():
        assert abs(means[cell]["eer"] - eer_value) < 1e-12
