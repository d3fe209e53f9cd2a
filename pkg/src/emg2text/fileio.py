"""On-disk formats for every pipeline artifact.

Binary containers are one JSON header line followed by row-major
little-endian float64 payload bytes, so files are self-describing,
inspectable with head(1), and byte-identical across runs for identical
content (no timestamps or compression).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import IngestionError
from .signals import EmgRecording, FeatureMatrix

_DTYPE = "<f8"


def _dump_header(header: dict) -> bytes:
    return (json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n").encode()


def _read_container(path) -> tuple[dict, np.ndarray]:
    try:
        with open(path, "rb") as fh:
            header_line = fh.readline()
            payload = fh.read()
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    try:
        header = json.loads(header_line.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IngestionError(f"malformed header in {path}: {exc}") from exc
    values = np.frombuffer(payload, dtype=_DTYPE).astype(np.float64)
    return header, values


def save_emg(rec: EmgRecording, path) -> None:
    header = {
        "kind": "emg",
        "channels": rec.channels,
        "sample_rate_hz": rec.sample_rate_hz,
        "session_id": rec.session_id,
        "utterance_id": rec.utterance_id,
        "mode": rec.mode,
        "num_samples": rec.num_samples,
        "dtype": _DTYPE,
    }
    with open(path, "wb") as fh:
        fh.write(_dump_header(header))
        fh.write(np.ascontiguousarray(rec.samples, dtype=_DTYPE).tobytes())


def load_emg(path) -> EmgRecording:
    path = Path(path)
    if path.suffix == ".csv":
        return load_emg_csv(path)
    header, values = _read_container(path)
    if header.get("kind") != "emg":
        raise IngestionError(f"{path} is not an EMG container")
    channels, n = header["channels"], header["num_samples"]
    if values.size != channels * n:
        raise IngestionError(
            f"{path}: payload holds {values.size} values, header promises {channels * n}"
        )
    return EmgRecording(
        samples=values.reshape(channels, n),
        sample_rate_hz=header["sample_rate_hz"],
        session_id=header["session_id"],
        utterance_id=header["utterance_id"],
        mode=header["mode"],
    )


def save_emg_csv(rec: EmgRecording, path) -> None:
    """Plain-text variant: # key=value comments, one column per channel."""
    with open(path, "w") as fh:
        fh.write(f"# channels={rec.channels}\n")
        fh.write(f"# sample_rate_hz={rec.sample_rate_hz!r}\n")
        fh.write(f"# session_id={rec.session_id}\n")
        fh.write(f"# utterance_id={rec.utterance_id}\n")
        fh.write(f"# mode={rec.mode}\n")
        for row in rec.samples.T:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_emg_csv(path) -> EmgRecording:
    meta: dict[str, str] = {}
    rows = []
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    meta[key.strip()] = value.strip()
                else:
                    rows.append([float(v) for v in line.split(",")])
    except (OSError, ValueError) as exc:
        raise IngestionError(f"malformed EMG CSV {path}: {exc}") from exc
    if not rows:
        raise IngestionError(f"{path} contains no samples")
    samples = np.asarray(rows, dtype=np.float64).T
    declared = meta.get("channels")
    if declared is not None and int(declared) != samples.shape[0]:
        raise IngestionError(
            f"{path}: {samples.shape[0]} columns but header says {declared} channels"
        )
    return EmgRecording(
        samples=samples,
        sample_rate_hz=float(meta.get("sample_rate_hz", 1000.0)),
        session_id=meta.get("session_id", "default"),
        utterance_id=meta.get("utterance_id", Path(path).stem),
        mode=meta.get("mode", "silent"),
    )


def save_audio(audio: np.ndarray, sample_rate_hz: float, utterance_id: str, path) -> None:
    audio = np.asarray(audio, dtype=np.float64)
    header = {
        "kind": "audio",
        "sample_rate_hz": sample_rate_hz,
        "utterance_id": utterance_id,
        "num_samples": int(audio.size),
        "dtype": _DTYPE,
    }
    with open(path, "wb") as fh:
        fh.write(_dump_header(header))
        fh.write(np.ascontiguousarray(audio, dtype=_DTYPE).tobytes())


def load_audio(path) -> tuple[np.ndarray, float]:
    header, values = _read_container(path)
    if header.get("kind") != "audio":
        raise IngestionError(f"{path} is not an audio container")
    if values.size != header["num_samples"]:
        raise IngestionError(f"{path}: payload size mismatch")
    return values, float(header["sample_rate_hz"])


def save_features(fm: FeatureMatrix, path) -> None:
    header = {
        "kind": "features",
        "dim_labels": list(fm.dim_labels),
        "frame_stride_s": fm.frame_stride_s,
        "frame_length_s": fm.frame_length_s,
        "shape": list(fm.data.shape),
        "dtype": _DTYPE,
    }
    with open(path, "wb") as fh:
        fh.write(_dump_header(header))
        fh.write(np.ascontiguousarray(fm.data, dtype=_DTYPE).tobytes())


def load_features(path) -> FeatureMatrix:
    header, values = _read_container(path)
    if header.get("kind") != "features":
        raise IngestionError(f"{path} is not a feature container")
    shape = tuple(header["shape"])
    if values.size != shape[0] * shape[1]:
        raise IngestionError(f"{path}: payload size mismatch")
    return FeatureMatrix(
        data=values.reshape(shape),
        dim_labels=list(header["dim_labels"]),
        frame_stride_s=header["frame_stride_s"],
        frame_length_s=header["frame_length_s"],
    )


def save_checkpoint(params, path, vocab_tokens: list[str] | None = None) -> None:
    """Named tensors + config + session ids (+ vocabulary for ASR)."""
    from dataclasses import asdict

    names = sorted(params.tensors)
    header = {
        "kind": "checkpoint",
        "config": asdict(params.config),
        "session_ids": list(params.session_ids),
        "vocab": vocab_tokens,
        "tensors": [
            {"name": n, "shape": list(params.tensors[n].data.shape)} for n in names
        ],
        "dtype": _DTYPE,
    }
    with open(path, "wb") as fh:
        fh.write(_dump_header(header))
        for n in names:
            fh.write(np.ascontiguousarray(params.tensors[n].data, dtype=_DTYPE).tobytes())


def load_checkpoint(path):
    """Returns (TransformerParams, vocab tokens or None)."""
    from .nn import autograd as ag
    from .nn.transformer import TransformerConfig, TransformerParams

    header, values = _read_container(path)
    if header.get("kind") != "checkpoint":
        raise IngestionError(f"{path} is not a checkpoint container")
    cfg = TransformerConfig(**header["config"])
    tensors = {}
    offset = 0
    for rec in header["tensors"]:
        shape = tuple(rec["shape"])
        count = int(np.prod(shape)) if shape else 1
        chunk = values[offset : offset + count]
        if chunk.size != count:
            raise IngestionError(f"{path}: truncated tensor payload at {rec['name']!r}")
        tensors[rec["name"]] = ag.parameter(chunk.reshape(shape))
        offset += count
    params = TransformerParams(
        config=cfg, tensors=tensors, session_ids=list(header["session_ids"])
    )
    return params, header.get("vocab")


def save_loss_curve(losses: list[float], path) -> None:
    with open(path, "w") as fh:
        fh.write("step,loss\n")
        for i, v in enumerate(losses):
            fh.write(f"{i},{v!r}\n")


def load_loss_curve(path) -> list[float]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    return [float(line.split(",")[1]) for line in lines[1:] if line]


def write_jsonl(records: list[dict], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path) -> list[dict]:
    records = []
    try:
        with open(path) as fh:
            for ln, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise IngestionError(f"{path}:{ln}: bad JSON record: {exc}") from exc
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    return records
