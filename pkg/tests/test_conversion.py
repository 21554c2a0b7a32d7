import numpy as np
import pytest

from vca.conversion import (
    SyntheticVCParams,
    apply_plan,
    convert_synthetic,
    emit_external_jobs,
    ingest_external_results,
)
from vca.errors import ConversionError, DataError
from vca.records import UtteranceRecord
from vca.scenarios import Scenario
from vca.selection import ConversionJob, plan_rs, read_plan
from vca.store import EmbeddingStore, save_store


def job(target="t", source="s", k=0, speaker="spk"):
    pid = f"{target}#vca{k}"
    return ConversionJob(
        job_id=pid, target_utt=target, source_utt=source,
        assigned_speaker=speaker, k_index=k, pseudo_utt_id=pid,
    )


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


class TestConvertSynthetic:
    def test_identical_endpoints_with_zero_sigma_reproduce_target(self):
        store = EmbeddingStore(3)
        store.add("t", [3.0, 0.0, 0.0])
        store.add("s", [3.0, 0.0, 0.0])
        params = SyntheticVCParams(sigma_base=0.0, seed=1)
        record, vec = convert_synthetic(job(), store, params)
        assert np.array_equal(vec, unit(store.get("t")))
        assert record.origin == "pseudo"
        assert record.speaker_id == "spk"
        assert record.source_utt == "s" and record.target_utt == "t" and record.k_index == 0

    def test_noiseless_limit_ignores_source(self):
        store = EmbeddingStore(3)
        store.add("t", [1.0, 2.0, -1.0])
        store.add("s", [-5.0, 0.5, 2.0])
        params = SyntheticVCParams(sigma_base=0.0, lambda_noise=0.0, lambda_drift=0.0, seed=2)
        _, vec = convert_synthetic(job(), store, params)
        assert np.allclose(vec, unit(store.get("t")), atol=1e-15)

    def test_deterministic_per_job(self):
        store = EmbeddingStore(4)
        store.add("t", [1.0, 0.2, 0.0, 0.0])
        store.add("s", [0.1, 1.0, 0.5, 0.0])
        params = SyntheticVCParams(seed=7)
        _, v1 = convert_synthetic(job(), store, params)
        _, v2 = convert_synthetic(job(), store, params)
        assert np.array_equal(v1, v2)
        _, v3 = convert_synthetic(job(k=1), store, params)
        assert not np.array_equal(v1, v3)

    def test_quality_decreases_with_mismatch(self):
        # Closer sources must yield pseudo embeddings closer to the target
        # on average; full Monte-Carlo decile check lives in acceptance.
        rng = np.random.default_rng(3)
        dim = 16
        store = EmbeddingStore(dim)
        t = unit(rng.standard_normal(dim))
        store.add("t", t)
        near = unit(t + 0.1 * rng.standard_normal(dim))
        far = unit(-t + 0.1 * rng.standard_normal(dim))
        store.add("near", near)
        store.add("far", far)
        params = SyntheticVCParams(seed=11)
        sims_near, sims_far = [], []
        for k in range(200):
            _, v = convert_synthetic(job(source="near", k=k), store, params)
            sims_near.append(float(np.dot(v, unit(store.get("t")))))
            _, v = convert_synthetic(job(source="far", k=k), store, params)
            sims_far.append(float(np.dot(v, unit(store.get("t")))))
        assert np.mean(sims_near) > np.mean(sims_far) + 0.2

    def test_missing_embedding_and_zero_norm(self):
        store = EmbeddingStore(2)
        store.add("t", [1.0, 0.0])
        with pytest.raises(ConversionError, match="source 's'"):
            convert_synthetic(job(), store, SyntheticVCParams())
        with pytest.raises(ConversionError, match="sigma_base"):
            SyntheticVCParams(sigma_base=-1.0).validate()


def small_plan_fixture(n_speakers=4, k=2, dim=6, seed=0):
    rng = np.random.default_rng(seed)
    store = EmbeddingStore(dim)
    targets = []
    for i in range(n_speakers):
        utt = f"u{i:02d}"
        targets.append(UtteranceRecord(utt_id=utt, speaker_id=f"spk{i}", audio_path=f"/audio/{utt}.wav"))
        store.add(utt, rng.standard_normal(dim))
    scenario = Scenario(kind="small", targets=targets, sources=list(targets))
    plan = plan_rs(scenario, k, seed=5)
    return scenario, plan, store


class TestApplyPlan:
    def test_count_identity_and_labels(self):
        scenario, plan, store = small_plan_fixture(n_speakers=5, k=3)
        augmented = apply_plan(plan, scenario.targets, store, params=SyntheticVCParams(seed=1))
        assert len(augmented.records) == len(scenario.targets) + 3 * len(scenario.targets)
        assert len(augmented.store) == len(store) + 3 * len(scenario.targets)
        labels = {r.utt_id: r.speaker_id for r in scenario.targets}
        for rec in augmented.records:
            if rec.origin == "pseudo":
                assert rec.speaker_id == labels[rec.target_utt]

    def test_rerun_bit_identical(self):
        scenario, plan, store = small_plan_fixture()
        params = SyntheticVCParams(seed=3)
        a = apply_plan(plan, scenario.targets, store, params=params)
        b = apply_plan(plan, scenario.targets, store, params=params)
        assert a.records == b.records
        assert a.store == b.store

    def test_unknown_backend(self):
        scenario, plan, store = small_plan_fixture()
        with pytest.raises(ConversionError, match="backend"):
            apply_plan(plan, scenario.targets, store, backend="quantum")


class TestExternalBridge:
    def test_emit_line_count_and_round_trip(self, tmp_path):
        scenario, plan, store = small_plan_fixture(n_speakers=3, k=1)
        out = tmp_path / "jobs.jsonl"
        emit_external_jobs(plan, out, records=scenario.targets)
        lines = out.read_text().splitlines()
        assert len(lines) == 1 + len(plan.jobs)
        parsed = read_plan(out)
        assert parsed == plan
        import json

        first = json.loads(lines[1])
        assert first["target_audio_path"].startswith("/audio/")
        assert first["source_audio_path"].startswith("/audio/")

    def test_emit_without_audio_paths_is_null(self, tmp_path):
        scenario, plan, store = small_plan_fixture(n_speakers=3, k=1)
        out = tmp_path / "jobs.jsonl"
        emit_external_jobs(plan, out)
        import json

        first = json.loads(out.read_text().splitlines()[1])
        assert first["target_audio_path"] is None

    def result_fixture(self, tmp_path, plan, store, statuses=None):
        rng = np.random.default_rng(9)
        result_store = EmbeddingStore(store.dim)
        lines = []
        import json

        for i, j in enumerate(plan.jobs):
            status = statuses[i] if statuses else "ok"
            rec = {
                "utt_id": j.pseudo_utt_id,
                "speaker_id": j.assigned_speaker,
                "audio_path": None,
                "origin": "pseudo",
                "source_utt": j.source_utt,
                "target_utt": j.target_utt,
                "k_index": j.k_index,
                "status": status,
            }
            lines.append(json.dumps(rec))
            if status == "ok":
                result_store.add(j.pseudo_utt_id, rng.standard_normal(store.dim))
        manifest = tmp_path / "results.jsonl"
        manifest.write_text("".join(l + "\n" for l in lines))
        store_path = tmp_path / "results.vcae"
        save_store(result_store, store_path)
        return manifest, store_path

    def test_empty_results_leave_base_unchanged(self, tmp_path):
        scenario, plan, store = small_plan_fixture()
        manifest = tmp_path / "results.jsonl"
        manifest.write_text("")
        store_path = tmp_path / "results.vcae"
        save_store(EmbeddingStore(store.dim), store_path)
        records, merged = ingest_external_results(manifest, store_path, store)
        assert records == []
        assert merged == store

    def test_single_result_merges(self, tmp_path):
        scenario, plan, store = small_plan_fixture(n_speakers=3, k=1)
        one_job_plan_jobs = plan.jobs[:1]
        import dataclasses

        short_plan = dataclasses.replace(plan, jobs=one_job_plan_jobs)
        manifest, store_path = self.result_fixture(tmp_path, short_plan, store)
        records, merged = ingest_external_results(manifest, store_path, store, plan=plan)
        assert len(records) == 1
        assert len(merged) == len(store) + 1

    def test_failed_results_are_skipped(self, tmp_path):
        scenario, plan, store = small_plan_fixture(n_speakers=3, k=1)
        manifest, store_path = self.result_fixture(
            tmp_path, plan, store, statuses=["ok", "failed:missing-source", "ok"]
        )
        records, merged = ingest_external_results(manifest, store_path, store, plan=plan)
        assert len(records) == 2

    def test_collision_with_existing_id_is_error(self, tmp_path):
        scenario, plan, store = small_plan_fixture(n_speakers=3, k=1)
        import dataclasses
        import json

        # Forge a result claiming an id that already exists in the base store.
        existing = scenario.targets[0].utt_id
        rec = {
            "utt_id": existing, "speaker_id": "spk0", "audio_path": None,
            "origin": "pseudo", "source_utt": "x", "target_utt": "y", "k_index": 0,
            "status": "ok",
        }
        manifest = tmp_path / "results.jsonl"
        manifest.write_text(json.dumps(rec) + "\n")
        result_store = EmbeddingStore(store.dim)
        result_store.add(existing, np.ones(store.dim))
        store_path = tmp_path / "results.vcae"
        save_store(result_store, store_path)
        with pytest.raises(DataError, match="duplicate"):
            ingest_external_results(manifest, store_path, store)

    def test_unknown_pseudo_id_against_plan(self, tmp_path):
        scenario, plan, store = small_plan_fixture(n_speakers=3, k=1)
        import json

        rec = {
            "utt_id": "ghost#vca0", "speaker_id": "spk0", "audio_path": None,
            "origin": "pseudo", "source_utt": "a", "target_utt": "ghost", "k_index": 0,
            "status": "ok",
        }
        manifest = tmp_path / "results.jsonl"
        manifest.write_text(json.dumps(rec) + "\n")
        result_store = EmbeddingStore(store.dim)
        result_store.add("ghost#vca0", np.ones(store.dim))
        store_path = tmp_path / "results.vcae"
        save_store(result_store, store_path)
        with pytest.raises(ConversionError, match="unknown pseudo id"):
            ingest_external_results(manifest, store_path, store, plan=plan)

    def test_dim_mismatch_rejected(self, tmp_path):
        scenario, plan, store = small_plan_fixture(n_speakers=3, k=1)
        import json

        j = plan.jobs[0]
        rec = {
            "utt_id": j.pseudo_utt_id, "speaker_id": j.assigned_speaker, "audio_path": None,
            "origin": "pseudo", "source_utt": j.source_utt, "target_utt": j.target_utt,
            "k_index": j.k_index, "status": "ok",
        }
        manifest = tmp_path / "results.jsonl"
        manifest.write_text(json.dumps(rec) + "\n")
        other = EmbeddingStore(store.dim + 1)
        other.add(j.pseudo_utt_id, np.ones(store.dim + 1))
        store_path = tmp_path / "results.vcae"
        save_store(other, store_path)
        with pytest.raises(ConversionError, match="dim"):
            ingest_external_results(manifest, store_path, store, plan=plan)

    def test_missing_embedding_for_listed_record(self, tmp_path):
        scenario, plan, store = small_plan_fixture(n_speakers=3, k=1)
        import json

        j = plan.jobs[0]
        rec = {
            "utt_id": j.pseudo_utt_id, "speaker_id": j.assigned_speaker, "audio_path": None,
            "origin": "pseudo", "source_utt": j.source_utt, "target_utt": j.target_utt,
            "k_index": j.k_index, "status": "ok",
        }
        manifest = tmp_path / "results.jsonl"
        manifest.write_text(json.dumps(rec) + "\n")
        store_path = tmp_path / "results.vcae"
        save_store(EmbeddingStore(store.dim), store_path)
        with pytest.raises(ConversionError, match="missing embedding"):
            ingest_external_results(manifest, store_path, store, plan=plan)
