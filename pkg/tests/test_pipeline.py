"""
Tests for the corpus pipeline: manifests, persistence, audit trail, evaluation,
the synthetic corpus, end-to-end training / conversion and the CLI
"""

import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from cyclevc.__main__ import cli
from cyclevc.config import Config, FeatureConfig
from cyclevc.error_handling import ConfigurationError, DataError, PersistenceError, SpeakerError
from cyclevc.modules.autodiff import make_rng, rng_state
from cyclevc.modules.cyclevae import SpeakerCode
from cyclevc.modules.dsp import AcousticFrameSequence, Waveform, read_wav
from cyclevc.modules.pipeline import (
    AccessPurpose,
    Checkpoint,
    CheckpointKind,
    CorpusManifest,
    FileAuditTrail,
    InMemoryAuditTrail,
    NullAuditTrail,
    Split,
    checkpoint_summary,
    compute_all_stats,
    convert_utterance,
    dtw_align,
    evaluate,
    evaluate_pair,
    ingest,
    load_checkpoint,
    load_features,
    make_synthetic_corpus,
    read_pairs,
    render_utterance,
    save_checkpoint,
    save_features,
    train_vae,
    train_vocoder,
)
from cyclevc.modules.pipeline.synthetic import default_speakers
from cyclevc.modules.pipeline.training import VAE_COLUMNS, VOCODER_COLUMNS, corpus_config, pivot_codes

from tests.helpers import random_sequence, small_pipeline_config


def manifest_data(**overrides):
    data = {"speakers": [
        {"id": "alice", "f0_min": 120, "f0_max": 300, "train": ["a/1.wav", "a/2.wav"], "validation": ["a/3.wav"]},
        {"id": "bob", "train": ["b/1.wav"], "validation": ["b/2.wav"]},
    ]}
    data.update(overrides)
    return data


def make_checkpoint() -> Checkpoint:
    rng = np.random.default_rng(0)
    return Checkpoint(
        kind=CheckpointKind.VAE,
        config=Config().to_dict(),
        step=12,
        parameters={"encoder.w": rng.standard_normal((3, 2)), "decoder.b": rng.standard_normal(4)},
        optimizer_state={"encoder.w/adam_m": np.zeros((3, 2))},
        buffers={"normalizer.mean": np.arange(3.0)},
        rng_state=rng_state(make_rng(5)),
        metadata={"epoch": 2, "speakers": ["a", "b"]},
    )


class TestManifest:

    def test_codes_follow_list_order(self, tmp_path):
        manifest = CorpusManifest.from_dict(manifest_data(), root=str(tmp_path))

        assert manifest.n_speakers == 2
        assert manifest.speaker("alice").code.index == 0
        assert manifest.speaker("bob").code.index == 1
        assert manifest.speaker("alice").f0_min == 120.0
        assert manifest.speaker("bob").f0_max == 400.0

    def test_utterance_ids_and_splits(self, tmp_path):
        manifest = CorpusManifest.from_dict(manifest_data(), root=str(tmp_path))

        assert [u.utterance_id for u in manifest.split(Split.TRAIN)] == ["alice/1", "alice/2", "bob/1"]
        assert [u.utterance_id for u in manifest.split(Split.VALIDATION, "bob")] == ["bob/2"]
        assert manifest.resolve("a/1.wav") == tmp_path / "a/1.wav"

    def test_save_and_load(self, tmp_path):
        path = tmp_path / "corpus" / "manifest.json"
        CorpusManifest.from_dict(manifest_data()).save(str(path))
        loaded = CorpusManifest.load(str(path))

        assert loaded.root == str(path.parent)
        assert len(loaded.utterances) == 5

    def test_single_speaker(self):
        with pytest.raises(DataError, match="two speakers"):
            CorpusManifest.from_dict({"speakers": [{"id": "solo", "train": ["x.wav"]}]})

    def test_duplicate_speakers(self):
        data = manifest_data()
        data["speakers"][1]["id"] = "alice"
        with pytest.raises(DataError, match="duplicate"):
            CorpusManifest.from_dict(data)

    def test_file_in_both_splits(self):
        data = manifest_data()
        data["speakers"][1]["validation"] = ["b/1.wav"]
        with pytest.raises(DataError, match="both"):
            CorpusManifest.from_dict(data)

    def test_unknown_speaker(self):
        with pytest.raises(SpeakerError, match="carol"):
            CorpusManifest.from_dict(manifest_data()).speaker("carol")

    def test_missing_or_invalid_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            CorpusManifest.load(str(tmp_path / "missing.json"))
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        with pytest.raises(DataError, match="JSON"):
            CorpusManifest.load(str(broken))

    def test_missing_statistics(self):
        with pytest.raises(SpeakerError, match="statistics"):
            CorpusManifest.from_dict(manifest_data()).speaker("bob").require_stats()

    def test_speaker_count_comes_from_the_corpus(self):
        config = corpus_config(Config(), CorpusManifest.from_dict(manifest_data()))
        assert config.model.n_speakers == 2

    def test_pivots_are_the_other_speakers(self):
        codes = [SpeakerCode(i, 4) for i in range(4)]
        assert [c.index for c in pivot_codes(codes[1], codes, None)] == [0, 2, 3]
        assert [c.index for c in pivot_codes(codes[0], codes, 2)] == [1, 2]
        with pytest.raises(ConfigurationError):
            pivot_codes(codes[0], codes, 4)


class TestPersistence:

    def test_feature_round_trip(self, tmp_path, rng):
        features = random_sequence(rng, n_frames=7, mcep_dim=5, bands=3)
        wave = Waveform(rng.uniform(-0.5, 0.5, 7 * 120), 24000)
        path = save_features(tmp_path / "utt.vcft", features, wave)

        loaded, loaded_wave = load_features(path)

        np.testing.assert_array_equal(loaded.to_array(), features.to_array())
        np.testing.assert_array_equal(loaded_wave.samples, wave.samples)
        assert loaded.spectral_dim == 5 and loaded.coded_ap.shape == (7, 3)

    def test_truncated_and_padded_feature_files(self, tmp_path, rng):
        path = save_features(tmp_path / "utt.vcft", random_sequence(rng, 4, 3, 2), Waveform(np.zeros(480)))
        data = path.read_bytes()

        path.write_bytes(data[:-9])
        with pytest.raises(PersistenceError):
            load_features(path)
        path.write_bytes(data + b"\x00" * 8)
        with pytest.raises(PersistenceError, match="trailing"):
            load_features(path)

    def test_checkpoint_round_trip(self, tmp_path):
        checkpoint = make_checkpoint()
        loaded = load_checkpoint(save_checkpoint(tmp_path / "model.vcck", checkpoint), CheckpointKind.VAE)

        assert loaded.kind == CheckpointKind.VAE and loaded.step == 12
        assert loaded.config == checkpoint.config
        assert loaded.metadata == checkpoint.metadata
        assert loaded.rng_state == checkpoint.rng_state
        for group in ("parameters", "optimizer_state", "buffers"):
            saved = getattr(checkpoint, group)
            assert set(getattr(loaded, group)) == set(saved)
            for name, value in saved.items():
                np.testing.assert_array_equal(getattr(loaded, group)[name], value)

    def test_corruption_is_detected(self, tmp_path):
        path = save_checkpoint(tmp_path / "model.vcck", make_checkpoint())
        data = bytearray(path.read_bytes())
        data[len(data) // 2] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(PersistenceError, match="checksum"):
            load_checkpoint(path)

    def test_truncation_is_detected(self, tmp_path):
        path = save_checkpoint(tmp_path / "model.vcck", make_checkpoint())
        path.write_bytes(path.read_bytes()[:-20])
        with pytest.raises(PersistenceError):
            load_checkpoint(path)

    def test_foreign_file(self, tmp_path):
        path = tmp_path / "notes.txt"
        path.write_text("hello world")
        with pytest.raises(PersistenceError, match="not a checkpoint"):
            load_checkpoint(path)

    def test_kind_mismatch(self, tmp_path):
        path = save_checkpoint(tmp_path / "model.vcck", make_checkpoint())
        with pytest.raises(PersistenceError, match="expected vocoder"):
            load_checkpoint(path, CheckpointKind.VOCODER)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(PersistenceError, match="directory"):
            save_checkpoint(tmp_path / "nowhere" / "model.vcck", make_checkpoint())

    def test_summary(self):
        summary = checkpoint_summary(make_checkpoint())

        assert summary["kind"] == "vae" and summary["step"] == 12
        assert summary["arrays"]["p:encoder.w"] == [3, 2]
        assert summary["arrays"]["o:encoder.w/adam_m"] == [3, 2]
        assert summary["arrays"]["x:normalizer.mean"] == [3]


class TestAuditTrail:

    def log_some(self, audit):
        audit.log_access("spk1/000", "spk1", Split.TRAIN, AccessPurpose.TRAIN)
        audit.log_access("spk1/009", "spk1", Split.VALIDATION, AccessPurpose.VALIDATE)
        audit.log_access("spk1/009", "spk1", Split.VALIDATION, AccessPurpose.INGEST)

    def test_filtering_and_summary(self):
        audit = InMemoryAuditTrail()
        self.log_some(audit)

        assert audit.accessed(AccessPurpose.TRAIN) == ["spk1/000"]
        assert audit.accessed(split=Split.VALIDATION) == ["spk1/009", "spk1/009"]
        assert audit.leaked_validation() == []
        summary = audit.get_summary()
        assert summary["total_accesses"] == 3
        assert summary["by_purpose_and_split"]["validate/validation"] == 1
        assert summary["validation_leaks"] == 0

    @pytest.mark.parametrize("purpose", [AccessPurpose.STATS, AccessPurpose.TRAIN, AccessPurpose.AUGMENT])
    def test_learning_from_validation_is_a_leak(self, purpose):
        audit = InMemoryAuditTrail()
        audit.log_access("spk2/009", "spk2", Split.VALIDATION, purpose)
        assert [e.utterance_id for e in audit.leaked_validation()] == ["spk2/009"]

    def test_file_trail_reloads(self, tmp_path):
        path = tmp_path / "logs" / "audit.jsonl"
        self.log_some(FileAuditTrail(str(path)))
        reloaded = FileAuditTrail(str(path))

        assert len(reloaded.entries()) == 3
        assert reloaded.entries()[1].purpose == AccessPurpose.VALIDATE
        assert len(path.read_text().strip().splitlines()) == 3

    def test_null_trail_keeps_nothing(self):
        audit = NullAuditTrail()
        self.log_some(audit)
        assert audit.entries() == []


class TestEvaluation:

    def sequence(self, mcep, voiced=True) -> AcousticFrameSequence:
        frames = len(mcep)
        uv = np.ones(frames) if voiced else np.zeros(frames)
        return AcousticFrameSequence(mcep, np.full(frames, np.log(150.0)), uv, np.zeros((frames, 2)))

    def test_identical_sequences_align_on_the_diagonal(self, rng):
        a = rng.standard_normal((6, 4))
        np.testing.assert_array_equal(dtw_align(a, a), np.stack([np.arange(6)] * 2, axis=1))

    def test_path_is_monotone_with_fixed_endpoints(self, rng):
        path = dtw_align(rng.standard_normal((9, 3)), rng.standard_normal((5, 3)))

        assert tuple(path[0]) == (0, 0) and tuple(path[-1]) == (8, 4)
        steps = np.diff(path, axis=0)
        assert np.all(steps >= 0) and np.all(steps.sum(axis=1) >= 1) and np.all(steps <= 1)

    def test_time_stretched_copy_has_zero_distortion(self, rng):
        mcep = rng.standard_normal((8, 5))
        metrics = evaluate_pair(self.sequence(mcep), self.sequence(np.repeat(mcep, 2, axis=0)))

        assert metrics.mcd == pytest.approx(0.0, abs=1e-12)
        assert metrics.f0_rmse == pytest.approx(0.0, abs=1e-12)
        assert metrics.uv_error == 0.0
        assert metrics.frames >= 16

    def test_no_common_voicing_gives_nan_f0_error(self, rng):
        mcep = rng.standard_normal((5, 4))
        metrics = evaluate_pair(self.sequence(mcep, voiced=False), self.sequence(mcep))
        assert np.isnan(metrics.f0_rmse)
        assert metrics.uv_error == 1.0

    def test_read_pairs(self, tmp_path):
        pairs_file = tmp_path / "pairs.txt"
        pairs_file.write_text("# converted reference\n\nout/a.wav ref/a.wav\n/abs/b.wav ref/b.wav\n")
        pairs = read_pairs(pairs_file)

        assert pairs[0] == (tmp_path / "out/a.wav", tmp_path / "ref/a.wav")
        assert str(pairs[1][0]) == "/abs/b.wav"

    def test_malformed_pairs(self, tmp_path):
        pairs_file = tmp_path / "pairs.txt"
        pairs_file.write_text("only-one.wav\n")
        with pytest.raises(DataError, match="pairs.txt:1"):
            read_pairs(pairs_file)
        with pytest.raises(DataError, match="not found"):
            read_pairs(tmp_path / "missing.txt")

    def test_empty_pairing_list(self):
        with pytest.raises(DataError):
            evaluate([], FeatureConfig())


class TestSyntheticCorpus:

    def test_files_and_manifest(self, tmp_path):
        manifest = make_synthetic_corpus(str(tmp_path), n_speakers=3, n_train=2, n_validation=1, duration=0.2)

        assert [p.speaker_id for p in manifest.speakers] == ["spk1", "spk2", "spk3"]
        assert len(manifest.split(Split.TRAIN)) == 6 and len(manifest.split(Split.VALIDATION)) == 3
        assert (tmp_path / "manifest.json").exists()
        wave = read_wav(tmp_path / "wav/spk2/002.wav", expected_rate=24000)
        assert len(wave) == int(round(0.5 * 24000))
        assert np.max(np.abs(wave.samples)) <= 0.5 + 1e-4

    def test_speakers_are_ordered_by_pitch(self):
        speakers = default_speakers(4)
        assert all(a.f0_mean < b.f0_mean for a, b in zip(speakers, speakers[1:]))
        for speaker in speakers:
            low, high = speaker.f0_range
            assert low < speaker.f0_mean < high

    @pytest.mark.parametrize("count", [1, 5])
    def test_speaker_count_bounds(self, count):
        with pytest.raises(DataError):
            default_speakers(count)

    def test_rendering_is_deterministic(self):
        speaker = default_speakers(2)[1]
        first = render_utterance(speaker, 3, duration=0.2, seed=4)
        np.testing.assert_array_equal(first.samples, render_utterance(speaker, 3, duration=0.2, seed=4).samples)
        assert not np.array_equal(first.samples, render_utterance(speaker, 4, duration=0.2, seed=4).samples)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """A tiny corpus taken through ingest, statistics, both training stages and conversion"""
    root = tmp_path_factory.mktemp("e2e")
    config = small_pipeline_config(str(root / "exp"))
    manifest = make_synthetic_corpus(str(root / "corpus"), n_speakers=2, n_train=2, n_validation=1,
                                     duration=0.4, seed=config.seed)
    audit = InMemoryAuditTrail()
    index = ingest(manifest, config.features, config.output_dir, audit)
    stats = compute_all_stats(manifest, index, str(root / "exp" / "stats.json"), audit)
    vae = train_vae(manifest, index, config, str(root / "exp" / "vae"), audit=audit, progress=False)
    vocoder = train_vocoder(manifest, index, config, str(vae.checkpoint_path), str(root / "exp" / "vocoder"),
                            audit=audit, progress=False)
    source_wav = manifest.resolve(manifest.split(Split.VALIDATION, "spk1")[0].wav_path)
    conversion = convert_utterance(source_wav, "spk1", "spk2", vae.checkpoint_path, vocoder.checkpoint_path,
                                   root / "converted" / "spk1_to_spk2.wav", audit=audit)
    return {"root": root, "config": config, "manifest": manifest, "index": index, "stats": stats,
            "vae": vae, "vocoder": vocoder, "conversion": conversion, "audit": audit}


@pytest.mark.integration
class TestEndToEnd:

    def test_ingest_covers_the_corpus(self, trained):
        index = trained["index"]
        assert len(index.records) == 6 and index.failures == []
        assert (trained["root"] / "exp" / "features" / "index.json").exists()
        for record in index.records:
            features, wave = load_features(index.resolve(record))
            assert len(wave) == features.n_frames * trained["config"].features.hop
            assert features.spectral_dim == 9

    def test_statistics_follow_speaker_pitch(self, trained):
        stats = trained["stats"]
        assert stats["spk2"].logf0.mean > stats["spk1"].logf0.mean
        assert stats["spk1"].logf0.mean == pytest.approx(np.log(100.0), abs=0.15)
        assert json.loads((trained["root"] / "exp" / "stats.json").read_text()).keys() == {"spk1", "spk2"}

    def test_validation_is_never_learned_from(self, trained):
        audit = trained["audit"]
        assert audit.leaked_validation() == []
        assert set(audit.accessed(AccessPurpose.STATS)) == {"spk1/000", "spk1/001", "spk2/000", "spk2/001"}
        assert set(audit.accessed(AccessPurpose.VALIDATE)) <= {"spk1/002", "spk2/002"}

    def test_vae_outputs(self, trained):
        vae_dir = trained["root"] / "exp" / "vae"
        result = trained["vae"]

        assert result.steps == 4
        for name in ("vae_epoch0001.vcck", "vae_epoch0002.vcck", "vae_last.vcck"):
            assert (vae_dir / name).exists()
        train_log = pd.read_csv(vae_dir / "vae_train.csv")
        assert list(train_log.columns) == VAE_COLUMNS
        assert list(train_log["epoch"]) == [1, 2]
        assert np.all(np.isfinite(train_log["rec_mcd"]))
        assert len(pd.read_csv(vae_dir / "vae_validation.csv")) == 2

    def test_resume_reproduces_the_run(self, trained):
        vae_dir = trained["root"] / "exp" / "vae"
        resumed_dir = trained["root"] / "resumed"
        result = train_vae(trained["manifest"], trained["index"], trained["config"], str(resumed_dir),
                           resume=str(vae_dir / "vae_epoch0001.vcck"), progress=False)

        assert result.steps == 4
        original = load_checkpoint(vae_dir / "vae_last.vcck")
        resumed = load_checkpoint(result.checkpoint_path)
        assert set(resumed.parameters) == set(original.parameters)
        for name, value in original.parameters.items():
            np.testing.assert_array_equal(resumed.parameters[name], value)
        assert resumed.rng_state == original.rng_state

    def test_resume_with_changed_model(self, trained):
        config = trained["config"]
        changed = replace(config, model=replace(config.model, latent_dim=config.model.latent_dim + 1))
        with pytest.raises(ConfigurationError, match="model"):
            train_vae(trained["manifest"], trained["index"], changed, str(trained["root"] / "changed"),
                      resume=str(trained["vae"].checkpoint_path), progress=False)

    def test_vocoder_stages(self, trained):
        vocoder_dir = trained["root"] / "exp" / "vocoder"
        log = pd.read_csv(vocoder_dir / "vocoder_train.csv")

        assert list(log.columns) == VOCODER_COLUMNS
        assert list(log["stage"]) == ["pretrain", "adversarial"]
        assert (vocoder_dir / "vocoder_pretrain.vcck").exists()
        checkpoint = load_checkpoint(trained["vocoder"].checkpoint_path, CheckpointKind.VOCODER)
        assert checkpoint.metadata["variants"] == 3
        assert checkpoint.metadata["generator_steps"] == 2
        assert checkpoint.metadata["discriminator_steps"] == 1

    def test_vocoder_rejects_mismatched_features(self, trained):
        config = trained["config"]
        changed = replace(config, features=replace(config.features, mcep_dim=11))
        with pytest.raises(ConfigurationError, match="feature"):
            train_vocoder(trained["manifest"], trained["index"], changed, str(trained["vae"].checkpoint_path),
                          str(trained["root"] / "bad_vocoder"), progress=False)

    def test_conversion_output(self, trained):
        result = trained["conversion"]
        wave = read_wav(result.output_path, expected_rate=24000)

        assert len(wave) == result.n_frames * trained["config"].features.hop
        assert result.duration == pytest.approx(len(wave) / 24000.0)
        assert np.all(np.isfinite(wave.samples))
        assert trained["audit"].accessed(AccessPurpose.CONVERT)

    def test_conversion_to_unknown_speaker(self, trained):
        source_wav = trained["manifest"].resolve("wav/spk1/002.wav")
        with pytest.raises(SpeakerError, match="carol"):
            convert_utterance(source_wav, "spk1", "carol", trained["vae"].checkpoint_path,
                              trained["vocoder"].checkpoint_path, trained["root"] / "never.wav")


class TestCLI:

    @pytest.fixture
    def runner(self):
        return CliRunner()

    def test_missing_config_file(self, runner, tmp_path):
        result = runner.invoke(cli, ["--config", str(tmp_path / "missing.yml"), "inspect-checkpoint", "x"])
        assert result.exit_code == 1
        assert '"error": "configuration"' in result.output

    def test_make_synthetic(self, runner, tmp_path):
        out = tmp_path / "corpus"
        result = runner.invoke(cli, ["-q", "make-synthetic", str(out), "--train", "1", "--validation", "1",
                                     "--duration", "0.2"])
        assert result.exit_code == 0, result.output
        assert "4 utterances" in result.output
        assert CorpusManifest.load(str(out / "manifest.json")).n_speakers == 2

    def test_ingest_lists_failures(self, runner, tmp_path):
        make_synthetic_corpus(str(tmp_path / "corpus"), n_train=1, n_validation=0, duration=0.2)
        manifest_path = tmp_path / "corpus" / "manifest.json"
        data = json.loads(manifest_path.read_text())
        data["speakers"][0]["train"].append("wav/broken.wav")
        manifest_path.write_text(json.dumps(data))
        (tmp_path / "corpus" / "wav" / "broken.wav").write_bytes(b"RIFF garbage")

        result = runner.invoke(cli, ["-q", "--out-dir", str(tmp_path / "exp"), "ingest",
                                     "--manifest", str(manifest_path)])

        assert result.exit_code == 0, result.output
        assert "2 utterances (1 failures)" in result.output
        assert "spk1/broken" in result.output

    def test_inspect_non_checkpoint(self, runner, tmp_path):
        path = tmp_path / "plain.bin"
        path.write_bytes(b"\x00" * 32)
        result = runner.invoke(cli, ["inspect-checkpoint", str(path)])
        assert result.exit_code == 1
        assert '"error": "persistence"' in result.output

    def test_inspect_checkpoint(self, runner, tmp_path):
        path = save_checkpoint(tmp_path / "model.vcck", make_checkpoint())
        result = runner.invoke(cli, ["inspect-checkpoint", str(path)])
        assert result.exit_code == 0, result.output
        assert '"kind": "vae"' in result.output

    def test_evaluate(self, runner, tmp_path):
        make_synthetic_corpus(str(tmp_path), n_train=1, n_validation=0, duration=0.3)
        pairs = tmp_path / "pairs.txt"
        pairs.write_text("wav/spk1/000.wav wav/spk1/000.wav\nwav/spk1/000.wav wav/spk2/000.wav\n")
        output = tmp_path / "metrics.csv"

        result = runner.invoke(cli, ["-q", "evaluate", "--pairs", str(pairs), "--output", str(output)])

        assert result.exit_code == 0, result.output
        metrics = pd.read_csv(output)
        assert list(metrics["pair"].astype(str)) == ["0", "1", "mean"]
        assert metrics.loc[0, "mcd"] == pytest.approx(0.0, abs=1e-9)
        assert metrics.loc[1, "mcd"] > 0.5
