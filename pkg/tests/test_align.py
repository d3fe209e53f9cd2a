import numpy as np
import pytest

from emg2text import fileio, signals
from emg2text.acoustic import MelConfig, MelSpectrogram, log_mel
from emg2text.align import (
    AlignmentPath,
    _distance_matrix,
    audio_target_transfer,
    cca_fit,
    dtw_align,
    load_alignment_path,
    save_alignment_path,
)
from emg2text.errors import AlignmentError, ParameterError


def enumerate_min_path_cost(dist: np.ndarray) -> float:
    """Oracle: literal enumeration of every monotone path, no DP."""
    n, m = dist.shape
    best = [np.inf]

    def walk(i, j, cost):
        if cost >= best[0]:
            return
        if i == n - 1 and j == m - 1:
            best[0] = min(best[0], cost)
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, cost + dist[i + 1, j + 1])
        if i + 1 < n:
            walk(i + 1, j, cost + dist[i + 1, j])
        if j + 1 < m:
            walk(i, j + 1, cost + dist[i, j + 1])

    walk(0, 0, dist[0, 0])
    return best[0]


class TestDtwAlign:
    def test_identical_inputs_diagonal_zero_cost(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(6, 4))
        path = dtw_align(a, a.copy())
        assert path.total_cost == 0.0
        assert path.pairs == [(i, i) for i in range(6)]

    def test_single_frame_pairs_with_everything(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(1, 3))
        b = rng.normal(size=(5, 3))
        path = dtw_align(a, b)
        assert path.pairs == [(0, j) for j in range(5)]
        expected = sum(np.linalg.norm(a[0] - b[j]) for j in range(5))
        assert path.total_cost == pytest.approx(expected, rel=1e-12)

    def test_cost_matches_bruteforce_enumeration(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(5, 3))
        b = rng.normal(size=(7, 3))
        dist = _distance_matrix(a, b, "euclidean")
        assert dtw_align(a, b).total_cost == enumerate_min_path_cost(dist)

    @pytest.mark.parametrize("seed", range(12))
    def test_bruteforce_random_sizes(self, seed):
        rng = np.random.default_rng(seed)
        n, m = rng.integers(1, 8, size=2)
        a = rng.normal(size=(n, 3))
        b = rng.normal(size=(m, 3))
        dist = _distance_matrix(a, b, "euclidean")
        assert dtw_align(a, b).total_cost == enumerate_min_path_cost(dist)

    def test_path_validity_invariants(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(9, 4))
        b = rng.normal(size=(6, 4))
        path = dtw_align(a, b)
        assert path.pairs[0] == (0, 0)
        assert path.pairs[-1] == (8, 5)
        steps = {(1, 0), (0, 1), (1, 1)}
        for (i0, j0), (i1, j1) in zip(path.pairs, path.pairs[1:]):
            assert (i1 - i0, j1 - j0) in steps
        dist = _distance_matrix(a, b, "euclidean")
        assert path.total_cost == pytest.approx(
            sum(dist[i, j] for i, j in path.pairs), rel=1e-12
        )

    def test_cost_symmetric_under_swap(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(6, 5))
        b = rng.normal(size=(9, 5))
        assert dtw_align(a, b).total_cost == pytest.approx(
            dtw_align(b, a).total_cost, rel=1e-12
        )

    def test_cost_bounded_by_diagonal_plus_tail(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(5, 4))
        b = rng.normal(size=(8, 4))
        dist = _distance_matrix(a, b, "euclidean")
        naive = sum(dist[i, i] for i in range(5)) + sum(dist[4, j] for j in range(5, 8))
        assert dtw_align(a, b).total_cost <= naive + 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(ParameterError):
            dtw_align(np.zeros((3, 4)), np.zeros((3, 5)))

    def test_empty_input(self):
        with pytest.raises(ParameterError):
            dtw_align(np.zeros((0, 3)), np.zeros((3, 3)))

    def test_cosine_metric(self):
        rng = np.random.default_rng(6)
        a = rng.normal(size=(4, 3))
        path = dtw_align(a, 2.5 * a, metric="cosine")  # cosine ignores scale
        assert path.total_cost == pytest.approx(0.0, abs=1e-12)

    def test_unknown_metric(self):
        with pytest.raises(ParameterError):
            dtw_align(np.zeros((2, 2)), np.zeros((2, 2)), metric="manhattan")

    def test_path_round_trip(self, tmp_path):
        rng = np.random.default_rng(7)
        path = dtw_align(rng.normal(size=(5, 3)), rng.normal(size=(4, 3)))
        f = tmp_path / "path.txt"
        save_alignment_path(path, f)
        loaded = load_alignment_path(f)
        assert loaded.pairs == path.pairs
        assert loaded.total_cost == path.total_cost


class TestCcaFit:
    def test_identical_views_perfect_correlation(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(50, 6))
        model = cca_fit(a, a.copy(), k=2)
        np.testing.assert_allclose(model.correlations, [1.0, 1.0], atol=1e-6)

    def test_invertible_transform_keeps_top_correlation(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(60, 5))
        r = rng.normal(size=(5, 5))
        assert abs(np.linalg.det(r)) > 1e-6
        model = cca_fit(a, a @ r, k=2)
        assert model.correlations[0] == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("seed", [0, 3, 7, 21, 40, 99])
    def test_independent_views_low_correlation(self, seed):
        # null-distribution bound established by pre-build simulation:
        # 4-dim views, 200 rows, max over 200 seeds was 0.334
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(200, 4))
        b = rng.normal(size=(200, 4))
        model = cca_fit(a, b, k=1)
        assert abs(model.correlations[0]) < 0.35

    def test_correlations_sorted_and_bounded(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(80, 6))
        b = a @ rng.normal(size=(6, 5)) + 0.5 * rng.normal(size=(80, 5))
        model = cca_fit(a, b, k=4)
        assert np.all(model.correlations >= -1.0) and np.all(model.correlations <= 1.0)
        assert np.all(np.diff(model.correlations) <= 1e-12)
        assert np.isfinite(model.proj_a).all() and np.isfinite(model.proj_b).all()

    def test_too_few_rows(self):
        with pytest.raises(ParameterError):
            cca_fit(np.zeros((3, 4)), np.zeros((3, 4)), k=2)

    def test_k_too_large(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ParameterError):
            cca_fit(rng.normal(size=(20, 3)), rng.normal(size=(20, 3)), k=4)

    def test_collinear_features_survive_ridge(self):
        rng = np.random.default_rng(4)
        base = rng.normal(size=(40, 2))
        a = np.hstack([base, base])  # rank-deficient
        model = cca_fit(a, a.copy(), k=2)
        assert np.isfinite(model.correlations).all()


def _mel_like(data: np.ndarray) -> MelSpectrogram:
    cfg = MelConfig(n_mels=data.shape[1], log_floor=1e-10)
    return MelSpectrogram(data=np.maximum(data, np.log(1e-10)), config=cfg)


class TestAudioTargetTransfer:
    def test_identical_views_return_mel_exactly(self):
        rng = np.random.default_rng(0)
        feats = signals.FeatureMatrix(
            data=rng.normal(size=(12, 6)), dim_labels=[f"d{i}" for i in range(6)]
        )
        mel = _mel_like(rng.normal(size=(12, 4)))
        for refine in (False, True):
            out = audio_target_transfer(feats, feats, mel, refine=refine)
            np.testing.assert_array_equal(out, mel.data)

    def test_duplicated_frames_repeat_mel_rows(self):
        rng = np.random.default_rng(1)
        vocal = rng.normal(size=(6, 5))
        silent = np.repeat(vocal, 2, axis=0)
        labels = [f"d{i}" for i in range(5)]
        mel = _mel_like(rng.normal(size=(6, 3)))
        out = audio_target_transfer(
            signals.FeatureMatrix(data=silent, dim_labels=labels),
            signals.FeatureMatrix(data=vocal, dim_labels=labels),
            mel,
            refine=False,
        )
        expected = np.repeat(mel.data, 2, axis=0)
        np.testing.assert_array_equal(out, expected)

    def test_output_row_count_always_matches_silent(self):
        rng = np.random.default_rng(2)
        labels = [f"d{i}" for i in range(4)]
        for n, m in [(5, 9), (9, 5), (1, 4), (7, 7)]:
            silent = signals.FeatureMatrix(data=rng.normal(size=(n, 4)), dim_labels=labels)
            vocal = signals.FeatureMatrix(data=rng.normal(size=(m, 4)), dim_labels=labels)
            mel = _mel_like(rng.normal(size=(m, 3)))
            out = audio_target_transfer(silent, vocal, mel, refine=True)
            assert out.shape == (n, 3)

    def test_mel_resampled_within_tolerance(self):
        rng = np.random.default_rng(3)
        labels = [f"d{i}" for i in range(4)]
        vocal = signals.FeatureMatrix(data=rng.normal(size=(10, 4)), dim_labels=labels)
        mel = _mel_like(rng.normal(size=(12, 3)))  # 2 frames long
        out = audio_target_transfer(vocal, vocal, mel, refine=False)
        assert out.shape == (10, 3)

    def test_mel_mismatch_beyond_tolerance(self):
        rng = np.random.default_rng(4)
        labels = [f"d{i}" for i in range(4)]
        vocal = signals.FeatureMatrix(data=rng.normal(size=(10, 4)), dim_labels=labels)
        mel = _mel_like(rng.normal(size=(14, 3)))
        with pytest.raises(AlignmentError):
            audio_target_transfer(vocal, vocal, mel, refine=False)


class TestAttOnSyntheticCorpus:
    def test_zero_warp_zero_noise_exact(self, tmp_path):
        from emg2text.corpus import SynthConfig, generate_corpus

        cfg = SynthConfig(seed=5, n_utterances=3, time_warp_strength=0.0, noise_sigma=0.0)
        manifest, _ = generate_corpus(cfg, tmp_path)
        for entry in manifest.entries:
            silent = signals.featurize_recording(
                fileio.load_emg(manifest.resolve(entry.silent_emg_path))
            )
            vocal = signals.featurize_recording(
                fileio.load_emg(manifest.resolve(entry.vocal_emg_path))
            )
            audio, _ = fileio.load_audio(manifest.resolve(entry.audio_path))
            mel = log_mel(audio, cfg.mel)
            np.testing.assert_array_equal(silent.data, vocal.data)
            for refine in (False, True):
                out = audio_target_transfer(silent, vocal, mel, refine=refine)
                np.testing.assert_array_equal(out, mel.data)

    def test_refinement_does_not_hurt_target_error(self, synth_corpus):
        cfg, manifest, truths = synth_corpus
        errs = {True: [], False: []}
        for entry in manifest.entries:
            silent = signals.featurize_recording(
                fileio.load_emg(manifest.resolve(entry.silent_emg_path))
            )
            vocal = signals.featurize_recording(
                fileio.load_emg(manifest.resolve(entry.vocal_emg_path))
            )
            audio, _ = fileio.load_audio(manifest.resolve(entry.audio_path))
            mel = log_mel(audio, cfg.mel)
            truth_rows = mel.data[truths[entry.utterance_id]]
            for refine in (False, True):
                out = audio_target_transfer(silent, vocal, mel, refine=refine)
                errs[refine].append(
                    float(np.linalg.norm(out - truth_rows, axis=1).mean())
                )
        assert len(errs[True]) >= 20
        assert np.mean(errs[True]) <= np.mean(errs[False]) + 1e-12
