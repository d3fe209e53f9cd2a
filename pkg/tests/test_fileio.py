import numpy as np
import pytest

from emg2text import fileio
from emg2text.errors import IngestionError
from emg2text.nn import init_encoder_params, toy_preset
from emg2text.signals import EmgRecording, FeatureMatrix


class TestEmgContainer:
    def test_binary_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        rec = EmgRecording(
            samples=rng.normal(size=(8, 500)),
            sample_rate_hz=1000.0,
            session_id="s3",
            utterance_id="u42",
            mode="vocalized",
        )
        path = tmp_path / "rec.emg"
        fileio.save_emg(rec, path)
        loaded = fileio.load_emg(path)
        np.testing.assert_array_equal(loaded.samples, rec.samples)
        assert loaded.session_id == "s3"
        assert loaded.utterance_id == "u42"
        assert loaded.mode == "vocalized"
        assert loaded.sample_rate_hz == 1000.0

    def test_header_is_readable_json_line(self, tmp_path):
        import json

        rec = EmgRecording(samples=np.zeros((2, 10)))
        path = tmp_path / "rec.emg"
        fileio.save_emg(rec, path)
        header = json.loads(path.open("rb").readline().decode())
        assert header["kind"] == "emg"
        assert header["channels"] == 2

    def test_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        rec = EmgRecording(
            samples=rng.normal(size=(3, 40)), session_id="sX", utterance_id="uY"
        )
        path = tmp_path / "rec.csv"
        fileio.save_emg_csv(rec, path)
        loaded = fileio.load_emg(path)  # dispatches on extension
        np.testing.assert_allclose(loaded.samples, rec.samples, rtol=1e-15)
        assert loaded.session_id == "sX"

    def test_csv_handmade_vector(self, tmp_path):
        path = tmp_path / "hand.csv"
        path.write_text(
            "# channels=2\n# sample_rate_hz=1000\n# mode=silent\n"
            "0.0,1.0\n0.5,-1.0\n1.0,1.0\n"
        )
        rec = fileio.load_emg(path)
        assert rec.samples.shape == (2, 3)
        np.testing.assert_array_equal(rec.samples[1], [1.0, -1.0, 1.0])

    def test_csv_channel_mismatch(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# channels=3\n0.0,1.0\n")
        with pytest.raises(IngestionError):
            fileio.load_emg(path)

    def test_corrupt_header(self, tmp_path):
        path = tmp_path / "bad.emg"
        path.write_bytes(b"not json\x00\x01\n1234")
        with pytest.raises(IngestionError):
            fileio.load_emg(path)

    def test_truncated_payload(self, tmp_path):
        rec = EmgRecording(samples=np.ones((2, 50)))
        path = tmp_path / "rec.emg"
        fileio.save_emg(rec, path)
        data = path.read_bytes()
        path.write_bytes(data[:-16])
        with pytest.raises(IngestionError):
            fileio.load_emg(path)


class TestAudioAndFeatures:
    def test_audio_round_trip(self, tmp_path):
        audio = np.random.default_rng(2).normal(size=1000)
        path = tmp_path / "a.aud"
        fileio.save_audio(audio, 16000.0, "u1", path)
        loaded, rate = fileio.load_audio(path)
        np.testing.assert_array_equal(loaded, audio)
        assert rate == 16000.0

    def test_features_round_trip(self, tmp_path):
        fm = FeatureMatrix(
            data=np.random.default_rng(3).normal(size=(20, 14)),
            dim_labels=[f"d{i}" for i in range(14)],
            frame_stride_s=0.0116,
            frame_length_s=0.031,
        )
        path = tmp_path / "f.fm"
        fileio.save_features(fm, path)
        loaded = fileio.load_features(path)
        np.testing.assert_array_equal(loaded.data, fm.data)
        assert loaded.dim_labels == fm.dim_labels
        assert loaded.frame_stride_s == fm.frame_stride_s

    def test_wrong_kind_rejected(self, tmp_path):
        audio = np.zeros(10)
        path = tmp_path / "a.aud"
        fileio.save_audio(audio, 16000.0, "u1", path)
        with pytest.raises(IngestionError):
            fileio.load_features(path)


class TestCheckpoint:
    def test_round_trip_with_vocab(self, tmp_path):
        params = init_encoder_params(
            toy_preset(seed=5, n_dec_layers=1), d_in=6, d_out=0,
            session_ids=["s0", "s1"], vocab_size=9,
        )
        path = tmp_path / "model.ckpt"
        fileio.save_checkpoint(params, path, vocab_tokens=["<pad>", "<bos>", "<eos>", "a"])
        loaded, vocab = fileio.load_checkpoint(path)
        assert vocab == ["<pad>", "<bos>", "<eos>", "a"]
        assert loaded.session_ids == ["s0", "s1"]
        assert loaded.config == params.config
        assert set(loaded.tensors) == set(params.tensors)
        for name in params.tensors:
            np.testing.assert_array_equal(loaded.tensors[name].data, params.tensors[name].data)

    def test_loaded_tensors_are_trainable(self, tmp_path):
        params = init_encoder_params(toy_preset(seed=6), d_in=4, d_out=3)
        path = tmp_path / "m.ckpt"
        fileio.save_checkpoint(params, path)
        loaded, _ = fileio.load_checkpoint(path)
        assert all(t.requires_grad for t in loaded.tensors.values())

    def test_loss_curve_round_trip(self, tmp_path):
        losses = [3.5, 2.25, 1.125, 0.0625]
        path = tmp_path / "loss.csv"
        fileio.save_loss_curve(losses, path)
        assert fileio.load_loss_curve(path) == losses
        assert path.read_text().splitlines()[0] == "step,loss"


class TestJsonl:
    def test_round_trip(self, tmp_path):
        records = [{"utterance_id": "u1", "transcript": "hello"}, {"utterance_id": "u2"}]
        path = tmp_path / "r.jsonl"
        fileio.write_jsonl(records, path)
        assert fileio.read_jsonl(path) == records

    def test_bad_json_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"ok": 1}\nnot-json\n')
        with pytest.raises(IngestionError, match=":2"):
            fileio.read_jsonl(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            fileio.read_jsonl(tmp_path / "absent.jsonl")
