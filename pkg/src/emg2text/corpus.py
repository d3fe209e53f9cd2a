"""Synthetic parallel silent/vocalized corpus generation + manifests.

Each word owns a deterministic per-channel EMG activation template and
a spectral audio signature, so mel targets are a learnable function of
EMG content.  The silent variant of an utterance is a monotonically
time-warped, per-channel amplitude-scaled copy of the vocalized EMG
(plus noise), and the generator records the ground-truth frame
alignment so alignment accuracy is checkable.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fileio
from .acoustic import MelConfig
from .errors import EmptyInputError, IngestionError, ParameterError
from .signals import EmgRecording, FramingConfig, _round_half_up

DEFAULT_VOCAB = [
    "alpha", "bravo", "charlie", "delta", "echo",
    "foxtrot", "golf", "hotel", "india", "juliet",
]


@dataclass
class ManifestEntry:
    utterance_id: str
    session_id: str
    transcript: str
    silent_emg_path: str
    vocal_emg_path: str | None = None
    audio_path: str | None = None
    mode: str = "silent"

    def to_record(self) -> dict:
        return {
            "utterance_id": self.utterance_id,
            "session_id": self.session_id,
            "transcript": self.transcript,
            "silent_emg_path": self.silent_emg_path,
            "vocal_emg_path": self.vocal_emg_path,
            "audio_path": self.audio_path,
            "mode": self.mode,
        }


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    root: Path = Path(".")

    def __post_init__(self):
        ids = [e.utterance_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise IngestionError("duplicate utterance ids in manifest")

    def resolve(self, rel: str) -> Path:
        return self.root / rel


def _word_rng(seed: int, word: str, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(word.encode()), stream])


def _word_duration(seed: int, word: str, emg_rate: float) -> int:
    rng = _word_rng(seed, word, 0)
    return int(rng.integers(int(0.22 * emg_rate), int(0.34 * emg_rate)))


def default_templates(
    vocab: list[str], channels: int = 8, seed: int = 0, emg_rate: float = 1000.0
) -> dict[str, np.ndarray]:
    """Per-word EMG activation templates: envelope-shaped low-frequency
    oscillations, distinct per word and channel."""
    templates = {}
    for word in vocab:
        dur = _word_duration(seed, word, emg_rate)
        rng = _word_rng(seed, word, 1)
        t = np.arange(dur) / emg_rate
        envelope = np.sin(np.pi * np.arange(dur) / dur) ** 1.5
        chans = []
        for _ in range(channels):
            amp = rng.uniform(0.25, 1.0)
            freq = rng.uniform(25.0, 95.0)
            phase = rng.uniform(0, 2 * np.pi)
            chans.append(amp * envelope * np.sin(2 * np.pi * freq * t + phase))
        templates[word] = np.stack(chans)
    return templates


def audio_signature(
    word: str, seed: int, duration_s: float, audio_rate: float = 16000.0
) -> np.ndarray:
    """Word-indexed tone mixture so the mel target identifies the word."""
    rng = _word_rng(seed, word, 2)
    n = int(round(duration_s * audio_rate))
    t = np.arange(n) / audio_rate
    envelope = np.sin(np.pi * np.arange(n) / max(n, 1)) ** 0.5
    sig = np.zeros(n)
    for _ in range(3):
        freq = rng.uniform(300.0, 3600.0)
        amp = rng.uniform(0.4, 1.0)
        phase = rng.uniform(0, 2 * np.pi)
        sig += amp * np.sin(2 * np.pi * freq * t + phase)
    return envelope * sig


@dataclass
class SynthConfig:
    seed: int = 0
    n_utterances: int = 20
    vocab: list[str] = field(default_factory=lambda: list(DEFAULT_VOCAB))
    phoneme_map: dict[str, np.ndarray] | None = None  # built from vocab when None
    time_warp_strength: float = 0.3
    noise_sigma: float = 0.02
    sessions: int = 2
    channels: int = 8
    emg_rate: float = 1000.0
    audio_rate: float = 16000.0
    words_min: int = 3
    words_max: int = 5
    framing: FramingConfig = field(default_factory=FramingConfig)
    mel: MelConfig = field(default_factory=MelConfig)

    def validate(self) -> None:
        if not self.vocab:
            raise EmptyInputError("synthesis vocab is empty")
        if self.phoneme_map is not None and not self.phoneme_map:
            raise EmptyInputError("phoneme_map is empty")
        if self.n_utterances < 1 or self.sessions < 1:
            raise ParameterError("need at least one utterance and one session")
        if self.time_warp_strength < 0 or self.noise_sigma < 0:
            raise ParameterError("warp strength and noise sigma must be >= 0")


def _emg_frame_count(n_samples: int, framing: FramingConfig, rate: float) -> int:
    frame_len = _round_half_up(framing.frame_length_s * rate)
    stride = framing.frame_stride_s * rate
    count = 0
    while _round_half_up(count * stride) + frame_len <= n_samples:
        count += 1
    return count


def _emg_frame_centers(n_frames: int, framing: FramingConfig, rate: float) -> np.ndarray:
    frame_len = _round_half_up(framing.frame_length_s * rate)
    starts = np.array([_round_half_up(k * framing.frame_stride_s * rate) for k in range(n_frames)])
    return starts + (frame_len - 1) / 2.0


def _match_audio_length(natural: int, n_frames: int, mel: MelConfig) -> int:
    """Audio length whose mel frame count equals the EMG frame count."""
    lo = mel.n_fft + mel.hop * (n_frames - 1)
    hi = mel.n_fft + mel.hop * n_frames - 1
    return min(max(natural, lo), hi)


def _monotone_warp(t_silent: int, t_vocal: int, strength: float, rng) -> np.ndarray:
    """Monotone map from silent sample index to vocal sample position.

    Integrates smoothly jittered positive slopes, rescaled to cover
    [0, t_vocal-1]; strength 0 gives the straight line.
    """
    if t_silent == 1:
        return np.zeros(1)
    knots = max(4, t_silent // 250)
    slope_knots = 1.0 + strength * rng.uniform(-0.5, 0.5, size=knots)
    slopes = np.interp(
        np.linspace(0, knots - 1, t_silent - 1), np.arange(knots), slope_knots
    )
    pos = np.concatenate([[0.0], np.cumsum(slopes)])
    return pos * (t_vocal - 1) / pos[-1]


def generate_utterance(cfg: SynthConfig, templates, idx: int) -> dict:
    """All arrays and ground truth for one synthetic utterance."""
    rng = np.random.default_rng([cfg.seed, 1000 + idx])
    n_words = int(rng.integers(cfg.words_min, cfg.words_max + 1))
    words = [cfg.vocab[int(rng.integers(len(cfg.vocab)))] for _ in range(n_words)]

    vocal = np.concatenate([templates[w] for w in words], axis=1)
    if cfg.noise_sigma > 0:
        vocal = vocal + cfg.noise_sigma * rng.normal(size=vocal.shape)
    t_vocal = vocal.shape[1]

    # audio at the same wall-clock duration, padded/trimmed so the mel
    # frame count matches the vocalized EMG frame count exactly
    audio = np.concatenate(
        [
            audio_signature(w, cfg.seed, templates[w].shape[1] / cfg.emg_rate, cfg.audio_rate)
            for w in words
        ]
    )
    n_frames_vocal = _emg_frame_count(t_vocal, cfg.framing, cfg.emg_rate)
    target_len = _match_audio_length(audio.size, n_frames_vocal, cfg.mel)
    if audio.size < target_len:
        audio = np.concatenate([audio, np.zeros(target_len - audio.size)])
    else:
        audio = audio[:target_len]

    # silent variant: length jitter + monotone warp + per-channel scale
    strength = cfg.time_warp_strength
    t_silent = int(round(t_vocal * (1.0 + strength * rng.uniform(-0.15, 0.15))))
    t_silent = max(t_silent, _round_half_up(cfg.framing.frame_length_s * cfg.emg_rate))
    warp = _monotone_warp(t_silent, t_vocal, strength, rng)
    base = np.arange(t_vocal, dtype=np.float64)
    scales = 1.0 + strength * rng.uniform(-0.35, 0.35, size=cfg.channels)
    silent = np.stack(
        [scales[c] * np.interp(warp, base, vocal[c]) for c in range(cfg.channels)]
    )
    if cfg.noise_sigma > 0:
        silent = silent + cfg.noise_sigma * rng.normal(size=silent.shape)

    # ground-truth frame alignment: silent frame center -> nearest vocal frame
    n_frames_silent = _emg_frame_count(t_silent, cfg.framing, cfg.emg_rate)
    silent_centers = _emg_frame_centers(n_frames_silent, cfg.framing, cfg.emg_rate)
    vocal_centers = _emg_frame_centers(n_frames_vocal, cfg.framing, cfg.emg_rate)
    mapped = np.interp(silent_centers, np.arange(t_silent), warp)
    truth = np.array(
        [int(np.argmin(np.abs(vocal_centers - pos))) for pos in mapped], dtype=int
    )

    session = f"s{idx % cfg.sessions}"
    return {
        "utterance_id": f"utt{idx:04d}",
        "session_id": session,
        "words": words,
        "vocal": vocal,
        "silent": silent,
        "audio": audio,
        "truth_frames": truth,
    }


def generate_corpus(cfg: SynthConfig, out_dir) -> tuple[CorpusManifest, dict[str, np.ndarray]]:
    """Write EMG/audio/ground-truth files plus manifest.jsonl.

    Returns the manifest and a map utterance_id -> ground-truth silent
    frame to vocalized frame indices.  Fully deterministic per seed.
    """
    cfg.validate()
    templates = cfg.phoneme_map or default_templates(
        cfg.vocab, cfg.channels, cfg.seed, cfg.emg_rate
    )
    missing = [w for w in cfg.vocab if w not in templates]
    if missing:
        raise ParameterError(f"phoneme_map lacks templates for {missing}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    truths = {}
    for idx in range(cfg.n_utterances):
        utt = generate_utterance(cfg, templates, idx)
        uid = utt["utterance_id"]
        silent_rel = f"{uid}_silent.emg"
        vocal_rel = f"{uid}_vocal.emg"
        audio_rel = f"{uid}.aud"
        fileio.save_emg(
            EmgRecording(
                samples=utt["silent"],
                sample_rate_hz=cfg.emg_rate,
                session_id=utt["session_id"],
                utterance_id=uid,
                mode="silent",
            ),
            out_dir / silent_rel,
        )
        fileio.save_emg(
            EmgRecording(
                samples=utt["vocal"],
                sample_rate_hz=cfg.emg_rate,
                session_id=utt["session_id"],
                utterance_id=uid,
                mode="vocalized",
            ),
            out_dir / vocal_rel,
        )
        fileio.save_audio(utt["audio"], cfg.audio_rate, uid, out_dir / audio_rel)
        np.savetxt(
            out_dir / f"{uid}.align.txt",
            np.column_stack([np.arange(utt["truth_frames"].size), utt["truth_frames"]]),
            fmt="%d",
        )
        truths[uid] = utt["truth_frames"]
        entries.append(
            ManifestEntry(
                utterance_id=uid,
                session_id=utt["session_id"],
                transcript=" ".join(utt["words"]),
                silent_emg_path=silent_rel,
                vocal_emg_path=vocal_rel,
                audio_path=audio_rel,
                mode="silent",
            )
        )
    manifest = CorpusManifest(entries=entries, root=out_dir)
    save_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest, truths


def save_manifest(manifest: CorpusManifest, path) -> None:
    fileio.write_jsonl([e.to_record() for e in manifest.entries], path)


def load_manifest(path) -> CorpusManifest:
    """Read and validate a manifest; referenced files must exist."""
    path = Path(path)
    records = fileio.read_jsonl(path)
    root = path.parent
    entries = []
    for rec in records:
        try:
            entry = ManifestEntry(
                utterance_id=rec["utterance_id"],
                session_id=rec["session_id"],
                transcript=rec["transcript"],
                silent_emg_path=rec["silent_emg_path"],
                vocal_emg_path=rec.get("vocal_emg_path"),
                audio_path=rec.get("audio_path"),
                mode=rec.get("mode", "silent"),
            )
        except KeyError as exc:
            raise IngestionError(
                f"manifest entry {rec.get('utterance_id', '<missing id>')!r} "
                f"lacks field {exc}"
            ) from exc
        if entry.mode not in ("silent", "vocalized"):
            raise IngestionError(
                f"utterance {entry.utterance_id!r}: invalid mode {entry.mode!r}"
            )
        for label, rel in (
            ("silent EMG", entry.silent_emg_path),
            ("vocalized EMG", entry.vocal_emg_path),
            ("audio", entry.audio_path),
        ):
            if rel is not None and not (root / rel).exists():
                raise IngestionError(
                    f"utterance {entry.utterance_id!r}: missing {label} file {rel}"
                )
        entries.append(entry)
    return CorpusManifest(entries=entries, root=root)
