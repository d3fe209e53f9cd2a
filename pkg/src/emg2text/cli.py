"""Pipeline orchestration: one subcommand per stage.

gen-corpus -> featurize -> align -> train-transducer -> transduce ->
train-asr -> transcribe -> correct -> evaluate -> report

Every stage reads and writes inspectable files; identical inputs and
seed reproduce identical outputs.  Config precedence: CLI flags >
EMG2TEXT_* environment variables > --config file > built-in defaults.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fileio
from .acoustic import MelConfig, log_mel, mel_to_feature_matrix
from .align import audio_target_transfer, dtw_align, save_alignment_path
from .asr import (
    AsrTrainConfig,
    AsrTrainItem,
    Vocabulary,
    beam_search,
    detokenize,
    tokenize,
    train_asr,
)
from .correction import (
    FilterConfig,
    MockProvider,
    MockProviderConfig,
    RemoteJsonlProvider,
    correct_transcript,
)
from .corpus import SynthConfig, generate_corpus, load_manifest
from .errors import ConfigError, Emg2TextError, ParameterError
from .evaluation import EvalReport, build_report, emit_report, score_system
from .nn import (
    TrainConfig,
    TrainItem,
    TransformerConfig,
    init_encoder_params,
    predict_mel,
    recognition_preset,
    toy_preset,
    train_transducer,
    transduction_preset,
)
from .signals import FeatureMatrix, FramingConfig, featurize_recording

ENV_PREFIX = "EMG2TEXT_"


@dataclass
class PipelineConfig:
    framing: FramingConfig = field(default_factory=FramingConfig)
    mel: MelConfig = field(default_factory=MelConfig)
    transducer_preset: str = "toy"  # toy | transduction
    asr_preset: str = "toy"  # toy | recognition
    beam_width: int = 500
    max_len: int = 128
    transducer_steps: int = 400
    transducer_lr: float = 3e-3
    loss_kind: str = "euclidean"
    asr_steps: int = 1500
    asr_lr: float = 3e-3
    filter: FilterConfig = field(default_factory=FilterConfig)
    seed: int = 0
    refine_alignment: bool = True

    def transducer_config(self) -> TransformerConfig:
        if self.transducer_preset == "transduction":
            return transduction_preset(seed=self.seed)
        if self.transducer_preset == "toy":
            return toy_preset(seed=self.seed)
        raise ConfigError([f"unknown transducer preset {self.transducer_preset!r}"])

    def asr_config(self) -> TransformerConfig:
        if self.asr_preset == "recognition":
            return recognition_preset(seed=self.seed + 1)
        if self.asr_preset == "toy":
            return toy_preset(seed=self.seed + 1, n_dec_layers=2)
        raise ConfigError([f"unknown ASR preset {self.asr_preset!r}"])


_CONFIG_SCHEMA = {
    # section, key -> (attr path, type)
    ("framing", "frame_length_s"): ("framing.frame_length_s", float),
    ("framing", "frame_stride_s"): ("framing.frame_stride_s", float),
    ("framing", "filter_cutoff_hz"): ("framing.filter_cutoff_hz", float),
    ("framing", "stft_points"): ("framing.stft_points", int),
    ("mel", "sample_rate_hz"): ("mel.sample_rate_hz", float),
    ("mel", "n_fft"): ("mel.n_fft", int),
    ("mel", "hop"): ("mel.hop", int),
    ("mel", "n_mels"): ("mel.n_mels", int),
    ("mel", "fmin_hz"): ("mel.fmin_hz", float),
    ("mel", "fmax_hz"): ("mel.fmax_hz", float),
    ("mel", "log_floor"): ("mel.log_floor", float),
    ("transducer", "preset"): ("transducer_preset", str),
    ("transducer", "steps"): ("transducer_steps", int),
    ("transducer", "lr"): ("transducer_lr", float),
    ("transducer", "loss"): ("loss_kind", str),
    ("asr", "preset"): ("asr_preset", str),
    ("asr", "steps"): ("asr_steps", int),
    ("asr", "lr"): ("asr_lr", float),
    ("asr", "beam_width"): ("beam_width", int),
    ("asr", "max_len"): ("max_len", int),
    ("filter", "confidence_threshold"): ("filter.confidence_threshold", float),
    ("filter", "min_edit_chars"): ("filter.min_edit_chars", int),
    ("filter", "max_seq_tokens"): ("filter.max_seq_tokens", int),
    ("pipeline", "seed"): ("seed", int),
    ("pipeline", "refine_alignment"): ("refine_alignment", lambda s: s.lower() in ("1", "true", "yes")),
}


def _set_attr_path(cfg: PipelineConfig, path: str, value) -> None:
    obj = cfg
    parts = path.split(".")
    for part in parts[:-1]:
        obj = getattr(obj, part)
    setattr(obj, parts[-1], value)


def load_config(path: str | None, env: dict | None = None) -> PipelineConfig:
    """Defaults, overlaid by a config file, overlaid by environment."""
    cfg = PipelineConfig()
    violations = []
    if path:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        read = parser.read(path)
        if not read:
            raise ConfigError([f"config file {path} not found or unreadable"])
        for (section, key), (attr, cast) in _CONFIG_SCHEMA.items():
            if parser.has_option(section, key):
                raw = parser.get(section, key)
                try:
                    _set_attr_path(cfg, attr, cast(raw))
                except (TypeError, ValueError):
                    violations.append(f"[{section}] {key}: cannot parse {raw!r}")
    env = os.environ if env is None else env
    for (section, key), (attr, cast) in _CONFIG_SCHEMA.items():
        env_key = f"{ENV_PREFIX}{section.upper()}_{key.upper()}"
        if env_key in env:
            try:
                _set_attr_path(cfg, attr, cast(env[env_key]))
            except (TypeError, ValueError):
                violations.append(f"{env_key}: cannot parse {env[env_key]!r}")
    violations.extend(validate_config(cfg))
    if violations:
        raise ConfigError(violations)
    return cfg


def validate_config(cfg: PipelineConfig) -> list[str]:
    """Collect every violated invariant (not just the first)."""
    violations = []
    for name, check in (
        ("framing", cfg.framing.validate),
        ("mel", cfg.mel.validate),
    ):
        try:
            check()
        except Emg2TextError as exc:
            violations.append(f"[{name}] {exc}")
    if cfg.beam_width < 1:
        violations.append("[asr] beam_width must be >= 1")
    if cfg.max_len < 1:
        violations.append("[asr] max_len must be >= 1")
    if not (0.0 <= cfg.filter.confidence_threshold <= 1.0):
        violations.append("[filter] confidence_threshold must lie in [0, 1]")
    if cfg.transducer_steps < 0 or cfg.asr_steps < 0:
        violations.append("[training] step counts must be >= 0")
    if cfg.loss_kind not in ("euclidean", "mse"):
        violations.append("[transducer] loss must be euclidean or mse")
    for label, preset, allowed in (
        ("transducer", cfg.transducer_preset, ("toy", "transduction")),
        ("asr", cfg.asr_preset, ("toy", "recognition")),
    ):
        if preset not in allowed:
            violations.append(f"[{label}] preset must be one of {allowed}")
    return violations


# --------------------------------------------------------------------------
# stage helpers

def _feature_paths(out_dir: Path, uid: str) -> dict[str, Path]:
    return {
        "silent": out_dir / f"{uid}_silent.fm",
        "vocal": out_dir / f"{uid}_vocal.fm",
        "mel": out_dir / f"{uid}_mel.fm",
    }


def _load_mel_matrix(path: Path, cfg: PipelineConfig):
    from .acoustic import MelSpectrogram

    fm = fileio.load_features(path)
    return MelSpectrogram(data=fm.data, config=cfg.mel)


def _mel_norm(mels: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    stacked = np.vstack(mels)
    return stacked.mean(axis=0), np.maximum(stacked.std(axis=0), 1e-6)


def _save_norm(mu: np.ndarray, sd: np.ndarray, path: Path) -> None:
    fm = FeatureMatrix(
        data=np.stack([mu, sd]),
        dim_labels=[f"band{i}" for i in range(mu.size)],
        frame_stride_s=1.0,
        frame_length_s=1.0,
    )
    fileio.save_features(fm, path)


def _load_norm(path: Path) -> tuple[np.ndarray, np.ndarray]:
    fm = fileio.load_features(path)
    return fm.data[0], fm.data[1]


# --------------------------------------------------------------------------
# subcommands

def cmd_gen_corpus(args, cfg: PipelineConfig) -> int:
    synth = SynthConfig(
        seed=args.seed if args.seed is not None else cfg.seed,
        n_utterances=args.n_utterances,
        time_warp_strength=args.time_warp_strength,
        noise_sigma=args.noise_sigma,
        sessions=args.sessions,
        framing=cfg.framing,
        mel=cfg.mel,
    )
    manifest, _ = generate_corpus(synth, args.out)
    print(f"wrote {len(manifest.entries)} utterances to {args.out}")
    return 0


def cmd_featurize(args, cfg: PipelineConfig) -> int:
    manifest = load_manifest(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for entry in manifest.entries:
        paths = _feature_paths(out_dir, entry.utterance_id)
        silent = featurize_recording(
            fileio.load_emg(manifest.resolve(entry.silent_emg_path)), cfg.framing
        )
        fileio.save_features(silent, paths["silent"])
        if entry.vocal_emg_path:
            vocal = featurize_recording(
                fileio.load_emg(manifest.resolve(entry.vocal_emg_path)), cfg.framing
            )
            fileio.save_features(vocal, paths["vocal"])
        if entry.audio_path:
            audio, rate = fileio.load_audio(manifest.resolve(entry.audio_path))
            mel_cfg = cfg.mel
            if rate != mel_cfg.sample_rate_hz:
                raise ParameterError(
                    f"audio at {rate} Hz but mel config expects {mel_cfg.sample_rate_hz}"
                )
            mel = log_mel(audio, mel_cfg)
            fileio.save_features(mel_to_feature_matrix(mel), paths["mel"])
    print(f"featurized {len(manifest.entries)} utterances into {out_dir}")
    return 0


def cmd_align(args, cfg: PipelineConfig) -> int:
    manifest = load_manifest(args.manifest)
    feat_dir = Path(args.features)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = 0
    for entry in manifest.entries:
        if not entry.vocal_emg_path or not entry.audio_path:
            continue
        paths = _feature_paths(feat_dir, entry.utterance_id)
        silent = fileio.load_features(paths["silent"])
        vocal = fileio.load_features(paths["vocal"])
        mel = _load_mel_matrix(paths["mel"], cfg)
        target = audio_target_transfer(silent, vocal, mel, refine=cfg.refine_alignment)
        fileio.save_features(
            FeatureMatrix(
                data=target,
                dim_labels=[f"band{i}" for i in range(target.shape[1])],
                frame_stride_s=silent.frame_stride_s,
                frame_length_s=silent.frame_length_s,
            ),
            out_dir / f"{entry.utterance_id}_att.fm",
        )
        save_alignment_path(
            dtw_align(silent, vocal), out_dir / f"{entry.utterance_id}_path.txt"
        )
        n += 1
    print(f"aligned {n} utterance pairs into {out_dir}")
    return 0


def cmd_train_transducer(args, cfg: PipelineConfig) -> int:
    manifest = load_manifest(args.manifest)
    feat_dir = Path(args.features)
    target_dir = Path(args.targets)
    mels = []
    for entry in manifest.entries:
        mel_path = _feature_paths(feat_dir, entry.utterance_id)["mel"]
        if mel_path.exists():
            mels.append(fileio.load_features(mel_path).data)
    if not mels:
        raise ParameterError("no mel targets found; run featurize first")
    mu, sd = _mel_norm(mels)
    items = []
    sessions = sorted({e.session_id for e in manifest.entries})
    for entry in manifest.entries:
        paths = _feature_paths(feat_dir, entry.utterance_id)
        if entry.audio_path and paths["mel"].exists() and entry.vocal_emg_path:
            vocal = fileio.load_features(paths["vocal"])
            mel = fileio.load_features(paths["mel"]).data
            items.append(
                TrainItem(
                    features=vocal.data,
                    target=(mel - mu) / sd,
                    session_id=entry.session_id,
                    mode="vocalized",
                )
            )
        att_path = target_dir / f"{entry.utterance_id}_att.fm"
        if att_path.exists():
            silent = fileio.load_features(paths["silent"])
            att = fileio.load_features(att_path).data
            items.append(
                TrainItem(
                    features=silent.data,
                    target=(att - mu) / sd,
                    session_id=entry.session_id,
                    mode="silent",
                )
            )
    d_in = items[0].features.shape[1]
    params = init_encoder_params(
        cfg.transducer_config(), d_in=d_in, d_out=cfg.mel.n_mels, session_ids=sessions
    )
    params, losses = train_transducer(
        items,
        params,
        TrainConfig(
            steps=cfg.transducer_steps, lr=cfg.transducer_lr,
            loss_kind=cfg.loss_kind, seed=cfg.seed,
        ),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fileio.save_checkpoint(params, out)
    _save_norm(mu, sd, out.with_suffix(".norm.fm"))
    fileio.save_loss_curve(losses, out.with_suffix(".loss.csv"))
    final = losses[-1] if losses else float("nan")
    print(f"trained transducer on {len(items)} items; final loss {final:.4f}")
    return 0


def cmd_transduce(args, cfg: PipelineConfig) -> int:
    manifest = load_manifest(args.manifest)
    feat_dir = Path(args.features)
    params, _ = fileio.load_checkpoint(args.checkpoint)
    mu, sd = _load_norm(Path(args.checkpoint).with_suffix(".norm.fm"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for entry in manifest.entries:
        silent = fileio.load_features(_feature_paths(feat_dir, entry.utterance_id)["silent"])
        pred = predict_mel(silent.data, params, entry.session_id) * sd + mu
        fileio.save_features(
            FeatureMatrix(
                data=pred,
                dim_labels=[f"band{i}" for i in range(pred.shape[1])],
                frame_stride_s=silent.frame_stride_s,
                frame_length_s=silent.frame_length_s,
            ),
            out_dir / f"{entry.utterance_id}_pred.fm",
        )
    print(f"transduced {len(manifest.entries)} utterances into {out_dir}")
    return 0


def cmd_train_asr(args, cfg: PipelineConfig) -> int:
    manifest = load_manifest(args.manifest)
    feat_dir = Path(args.features)
    vocab = Vocabulary.for_transcripts([e.transcript for e in manifest.entries])
    mels, items_meta = [], []
    for entry in manifest.entries:
        mel_path = _feature_paths(feat_dir, entry.utterance_id)["mel"]
        if not mel_path.exists():
            continue
        mel = fileio.load_features(mel_path).data
        mels.append(mel)
        items_meta.append((mel, entry.transcript))
    if not mels:
        raise ParameterError("no mel features found; run featurize first")
    mu, sd = _mel_norm(mels)
    items = [
        AsrTrainItem(mel=(mel - mu) / sd, token_ids=tokenize(text, vocab))
        for mel, text in items_meta
    ]
    params = init_encoder_params(
        cfg.asr_config(), d_in=cfg.mel.n_mels, d_out=0, vocab_size=vocab.size
    )
    params, losses = train_asr(
        items, params, AsrTrainConfig(steps=cfg.asr_steps, lr=cfg.asr_lr, seed=cfg.seed)
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fileio.save_checkpoint(params, out, vocab_tokens=vocab.tokens)
    _save_norm(mu, sd, out.with_suffix(".norm.fm"))
    fileio.save_loss_curve(losses, out.with_suffix(".loss.csv"))
    final = losses[-1] if losses else float("nan")
    print(f"trained ASR on {len(items)} utterances; final loss {final:.4f}")
    return 0


def cmd_transcribe(args, cfg: PipelineConfig) -> int:
    manifest = load_manifest(args.manifest)
    mel_dir = Path(args.mels)
    params, vocab_tokens = fileio.load_checkpoint(args.checkpoint)
    if not vocab_tokens:
        raise ParameterError("checkpoint carries no vocabulary; train ASR first")
    vocab = Vocabulary(vocab_tokens)
    mu, sd = _load_norm(Path(args.checkpoint).with_suffix(".norm.fm"))
    beam_width = args.beam_width if args.beam_width else cfg.beam_width
    records = []
    for entry in manifest.entries:
        pred_path = mel_dir / f"{entry.utterance_id}_pred.fm"
        if not pred_path.exists():
            pred_path = _feature_paths(mel_dir, entry.utterance_id)["mel"]
        mel = fileio.load_features(pred_path).data
        t0 = time.perf_counter()
        hyps = beam_search(
            (mel - mu) / sd, params, vocab, beam_width=beam_width, max_len=cfg.max_len
        )
        seconds = time.perf_counter() - t0
        records.append(
            {
                "utterance_id": entry.utterance_id,
                "seconds": seconds,
                "hypotheses": [
                    {
                        "rank": i + 1,
                        "log_prob": h.log_prob,
                        "transcript": detokenize(h.tokens, vocab),
                    }
                    for i, h in enumerate(hyps[: args.n_best])
                ],
            }
        )
    fileio.write_jsonl(records, args.out)
    print(f"transcribed {len(records)} utterances -> {args.out}")
    return 0


def cmd_correct(args, cfg: PipelineConfig) -> int:
    records = fileio.read_jsonl(args.nbest)
    if args.provider == "mock":
        lexicon = args.lexicon.split(",") if args.lexicon else []
        if not lexicon and args.manifest:
            manifest = load_manifest(args.manifest)
            lexicon = sorted({w for e in manifest.entries for w in e.transcript.split()})
        provider = MockProvider(MockProviderConfig(lexicon=lexicon, seed=cfg.seed))
        filt = FilterConfig(
            confidence_threshold=(
                args.confidence_threshold
                if args.confidence_threshold is not None
                else cfg.filter.confidence_threshold
            ),
            min_edit_chars=cfg.filter.min_edit_chars,
            domain_lexicon=lexicon or None,
            max_seq_tokens=cfg.filter.max_seq_tokens,
        )
    else:
        provider = RemoteJsonlProvider(
            args.provider_endpoint, timeout_s=args.timeout_s, retries=args.retries
        )
        filt = FilterConfig(
            confidence_threshold=(
                args.confidence_threshold
                if args.confidence_threshold is not None
                else cfg.filter.confidence_threshold
            ),
            min_edit_chars=cfg.filter.min_edit_chars,
            max_seq_tokens=cfg.filter.max_seq_tokens,
        )
    out_records = []
    for rec in sorted(records, key=lambda r: r["utterance_id"]):
        hyps = rec.get("hypotheses", [])
        top = hyps[0]["transcript"] if hyps else ""
        n_best = [(h["transcript"], h["log_prob"]) for h in hyps]
        t0 = time.perf_counter()
        corrected, _ = correct_transcript(top, provider, filt, n_best=n_best)
        seconds = rec.get("seconds", 0.0) + (time.perf_counter() - t0)
        out_records.append(
            {
                "utterance_id": rec["utterance_id"],
                "transcript": corrected,
                "seconds": seconds,
            }
        )
    fileio.write_jsonl(out_records, args.out)
    print(f"corrected {len(out_records)} transcripts -> {args.out}")
    return 0


def _load_transcript_set(path) -> tuple[dict[str, str], dict[str, float]]:
    texts, seconds = {}, {}
    for rec in fileio.read_jsonl(path):
        uid = rec["utterance_id"]
        if "transcript" in rec:
            texts[uid] = rec["transcript"]
            seconds[uid] = rec.get("seconds", 0.0)
        elif rec.get("hypotheses"):
            texts[uid] = rec["hypotheses"][0]["transcript"]
            seconds[uid] = rec.get("seconds", 0.0)
    return texts, seconds


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    manifest = load_manifest(args.manifest)
    refs = {e.utterance_id: e.transcript for e in manifest.entries}
    systems = []
    for spec_item in args.hyp:
        name, _, path = spec_item.partition("=")
        if not path:
            raise ParameterError(f"--hyp expects name=path, got {spec_item!r}")
        texts, seconds = _load_transcript_set(path)
        pairs = [(uid, refs[uid], texts.get(uid, "")) for uid in sorted(refs)]
        wer_pct, details = score_system(name, pairs, seconds)
        mean_s = float(np.mean([seconds.get(uid, 0.0) for uid in sorted(refs)])) if refs else 0.0
        systems.append(
            {"name": name, "wer_percent": wer_pct, "mean_seconds": mean_s, "details": details}
        )
    report = build_report(systems)
    records = [
        {
            "system": row.system_name,
            "wer_percent": row.wer_percent,
            "relative_improvement_percent": row.relative_improvement_percent,
            "mean_seconds_per_utterance": row.mean_seconds_per_utterance,
            "details": [
                {
                    "utterance_id": d.utterance_id,
                    "reference": d.reference,
                    "hypothesis": d.hypothesis,
                    "substitutions": d.substitutions,
                    "deletions": d.deletions,
                    "insertions": d.insertions,
                    "ref_words": d.ref_words,
                    "seconds": d.seconds,
                    "empty_reference": d.empty_reference,
                }
                for d in report.details.get(row.system_name, [])
            ],
        }
        for row in report.rows
    ]
    fileio.write_jsonl(records, args.out)
    for row in report.rows:
        rel = "baseline" if row.relative_improvement_percent is None else (
            f"{row.relative_improvement_percent:+.1f}%"
        )
        print(f"{row.system_name}: WER {row.wer_percent:.2f}% ({rel})")
    return 0


def load_report_jsonl(path) -> EvalReport:
    from .evaluation import SystemRow, UtteranceDetail

    rows, details = [], {}
    for rec in fileio.read_jsonl(path):
        rows.append(
            SystemRow(
                system_name=rec["system"],
                wer_percent=rec["wer_percent"],
                relative_improvement_percent=rec.get("relative_improvement_percent"),
                mean_seconds_per_utterance=rec.get("mean_seconds_per_utterance", 0.0),
            )
        )
        if rec.get("details"):
            details[rec["system"]] = [UtteranceDetail(**d) for d in rec["details"]]
    return EvalReport(rows=rows, details=details)


def cmd_report(args, cfg: PipelineConfig) -> int:
    report = load_report_jsonl(args.report)
    emit_report(report, args.format, args.out)
    print(Path(args.out).read_text(), end="")
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emg2text",
        description="Silent-speech recognition pipeline over synthetic or recorded EMG corpora",
    )
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--seed", type=int, default=None, help="override pipeline seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="synthesize a parallel silent/vocalized corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-utterances", type=int, default=20)
    p.add_argument("--time-warp-strength", type=float, default=0.3)
    p.add_argument("--noise-sigma", type=float, default=0.02)
    p.add_argument("--sessions", type=int, default=2)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("featurize", help="EMG features and mel targets per utterance")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("align", help="DTW(+CCA) audio target transfer for silent utterances")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("train-transducer", help="train the EMG-to-mel model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--targets", required=True, help="align output directory")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train_transducer)

    p = sub.add_parser("transduce", help="predict mel from silent EMG features")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transduce)

    p = sub.add_parser("train-asr", help="train the mel-to-text recognizer")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train_asr)

    p = sub.add_parser("transcribe", help="beam-search decode mel inputs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mels", required=True, help="directory of *_pred.fm or *_mel.fm")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam-width", type=int, default=None)
    p.add_argument("--n-best", type=int, default=5)
    p.set_defaults(func=cmd_transcribe)

    p = sub.add_parser("correct", help="filter provider candidates over N-best output")
    p.add_argument("--nbest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None, help="source of the mock lexicon")
    p.add_argument("--provider", choices=("mock", "remote"), default="mock")
    p.add_argument("--provider-endpoint", default="localhost:7077")
    p.add_argument("--timeout-s", type=float, default=5.0)
    p.add_argument("--retries", type=int, default=1)
    p.add_argument("--confidence-threshold", type=float, default=None)
    p.add_argument("--lexicon", default=None, help="comma-separated domain words")
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("evaluate", help="score transcript sets against manifest references")
    p.add_argument("--manifest", required=True)
    p.add_argument("--hyp", action="append", required=True, help="name=path, repeatable; first is baseline")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render an evaluation report")
    p.add_argument("--report", required=True)
    p.add_argument("--format", choices=("table-text", "csv", "plot-data"), default="table-text")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        return args.func(args, cfg)
    except ConfigError as exc:
        print("config error:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return 2
    except Emg2TextError as exc:
        print(f"{exc.category} error: {exc}", file=sys.stderr)
        return {
            "parameter": 2,
            "empty-input": 2,
            "ingestion": 3,
            "alignment": 4,
            "training-divergence": 5,
            "provider-timeout": 6,
        }.get(exc.category, 1)


if __name__ == "__main__":
    sys.exit(main())
