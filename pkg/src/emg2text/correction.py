"""Post-recognition transcript correction with conservative filtering.

A pluggable provider proposes candidate rewrites of an ASR transcript;
filters reject low-confidence outputs, trivial edits, generic word
swaps, and out-of-domain vocabulary.  If nothing survives, the input
passes through untouched.
"""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass, field
from importlib import resources

from .errors import ParameterError, ProviderTimeoutError


def load_generic_stoplist() -> list[str]:
    """Packaged default list of articles/fillers/function words."""
    text = resources.files("emg2text.data").joinpath("generic_stoplist.txt").read_text()
    return [w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#")]


@dataclass
class CorrectionCandidate:
    text: str
    confidence: float
    provider_id: str = "unknown"

    def __post_init__(self):
        if self.text is None:
            raise ParameterError("candidate text cannot be None")
        if not (0.0 <= self.confidence <= 1.0):
            raise ParameterError("confidence must lie in [0, 1]")


@dataclass
class FilterConfig:
    confidence_threshold: float = 0.7
    min_edit_chars: int = 2
    generic_stoplist: list[str] = field(default_factory=load_generic_stoplist)
    domain_lexicon: list[str] | None = None
    max_seq_tokens: int = 128

    def __post_init__(self):
        if not (0.0 <= self.confidence_threshold <= 1.0):
            raise ParameterError("confidence threshold must lie in [0, 1]")


def levenshtein(a, b) -> int:
    """Unit-cost edit distance between two sequences."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ai in enumerate(a, start=1):
        cur = [i]
        for j, bj in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ai != bj)))
        prev = cur
    return prev[-1]


def replacement_distance(a: str, b: str) -> int:
    """Edit distance with substitution cost 1 and indel cost 2.

    The mock corrector ranks lexicon replacements with this metric, so
    same-length respellings beat candidates that change word length
    ("zat" is 1 from "sat" but 2 from "at").
    """
    prev = [2 * j for j in range(len(b) + 1)]
    for i, ai in enumerate(a, start=1):
        cur = [2 * i]
        for j, bj in enumerate(b, start=1):
            cur.append(min(prev[j] + 2, cur[j - 1] + 2, prev[j - 1] + (ai != bj)))
        prev = cur
    return prev[-1]


def word_changes(input_words: list[str], cand_words: list[str]) -> list[tuple[str | None, str | None]]:
    """Word-level diff: (dropped, introduced) pairs for every edit.

    Substitution yields (old, new); deletion (old, None); insertion
    (None, new).  Matches are omitted.
    """
    n, m = len(input_words), len(cand_words)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            dist[i][j] = min(
                dist[i - 1][j - 1] + (input_words[i - 1] != cand_words[j - 1]),
                dist[i - 1][j] + 1,
                dist[i][j - 1] + 1,
            )
    changes = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (
            input_words[i - 1] != cand_words[j - 1]
        ):
            if input_words[i - 1] != cand_words[j - 1]:
                changes.append((input_words[i - 1], cand_words[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            changes.append((input_words[i - 1], None))
            i -= 1
        else:
            changes.append((None, cand_words[j - 1]))
            j -= 1
    changes.reverse()
    return changes


def edit_region_chars(input_text: str, cand_text: str) -> int:
    """Characters touched by word-level changes.

    A substituted pair counts the longer word, insertions/deletions
    count the full inserted/removed word.  Identical texts score 0.
    This is the length the minimum-edit-size filter compares against,
    so swapping a whole word is never "trivial" merely because it
    differs by one letter.
    """
    changes = word_changes(input_text.split(), cand_text.split())
    return sum(max(len(a or ""), len(b or "")) for a, b in changes)


def filter_candidates(
    input_text: str, candidates: list[CorrectionCandidate], cfg: FilterConfig | None = None
) -> list[CorrectionCandidate]:
    """Apply the conservative acceptance rules, best candidates first.

    Drops: confidence below threshold; edits touching fewer than
    min_edit_chars characters of changed words (identity included);
    candidates whose changed words all sit on the generic stoplist;
    and, when a domain lexicon is given, candidates introducing words
    outside both the lexicon and the input.  Survivors are ranked by
    confidence descending.
    """
    cfg = cfg or FilterConfig()
    stop = {w.lower() for w in cfg.generic_stoplist}
    lexicon = None if cfg.domain_lexicon is None else {w.lower() for w in cfg.domain_lexicon}
    input_words = input_text.split()
    input_set = {w.lower() for w in input_words}
    accepted = []
    for cand in candidates:
        if cand.confidence < cfg.confidence_threshold:
            continue
        changes = word_changes(input_words, cand.text.split())
        region = sum(max(len(a or ""), len(b or "")) for a, b in changes)
        if region < cfg.min_edit_chars:
            continue
        changed_words = {w.lower() for pair in changes for w in pair if w}
        if changed_words and changed_words <= stop:
            continue
        if lexicon is not None:
            introduced = {b.lower() for _, b in changes if b}
            if any(w not in lexicon and w not in input_set for w in introduced):
                continue
        accepted.append(cand)
    accepted.sort(key=lambda c: (-c.confidence, c.text))
    return accepted


def apply_correction(input_text: str, accepted: list[CorrectionCandidate]) -> str:
    """Top accepted candidate, or the input verbatim when none survive."""
    return accepted[0].text if accepted else input_text


@dataclass
class MockProviderConfig:
    lexicon: list[str] = field(default_factory=list)
    max_candidates: int = 3
    seed: int = 0


def mock_provider(transcript: str, cfg: MockProviderConfig) -> list[CorrectionCandidate]:
    """Deterministic dictionary corrector standing in for a live model.

    Every out-of-lexicon word is mapped to its r-th nearest lexicon
    word (by edit distance, ties alphabetical); candidate r applies the
    rank-r replacement to all such words with confidence
    1 / (1 + total edit distance).  A fully in-lexicon transcript
    returns itself with confidence 1.
    """
    words = transcript.split()
    if not words:
        return []
    lexset = {w.lower() for w in cfg.lexicon}
    oov = [w for w in words if w.lower() not in lexset]
    if not oov or not cfg.lexicon:
        return [CorrectionCandidate(text=transcript, confidence=1.0, provider_id="mock")]
    ranked_fixes = {
        w: sorted(cfg.lexicon, key=lambda lw: (replacement_distance(w.lower(), lw.lower()), lw))
        for w in set(oov)
    }
    n_ranks = min(cfg.max_candidates, len(cfg.lexicon))
    candidates = []
    for r in range(n_ranks):
        total = 0
        fixed = []
        for w in words:
            if w.lower() in lexset:
                fixed.append(w)
            else:
                repl = ranked_fixes[w][r]
                total += replacement_distance(w.lower(), repl.lower())
                fixed.append(repl)
        candidates.append(
            CorrectionCandidate(
                text=" ".join(fixed), confidence=1.0 / (1.0 + total), provider_id="mock"
            )
        )
    return candidates


class MockProvider:
    """CorrectionProvider wrapper around mock_provider."""

    provider_id = "mock"

    def __init__(self, cfg: MockProviderConfig):
        self.cfg = cfg

    def propose(self, transcript: str, n_best=None, max_seq_tokens: int = 128):
        return mock_provider(transcript, self.cfg)


class RemoteJsonlProvider:
    """Client for a line-delimited JSON correction service.

    Sends one request object per line over TCP and reads one response
    line: request {"transcript", "n_best": [{"text", "log_prob"}],
    "max_tokens"}, response {"candidates": [{"text", "confidence"}]}.
    """

    provider_id = "remote"

    def __init__(self, endpoint: str, timeout_s: float = 5.0, retries: int = 1):
        host, _, port = endpoint.rpartition(":")
        if not host or not port.isdigit():
            raise ParameterError(f"endpoint must be host:port, got {endpoint!r}")
        self.host, self.port = host, int(port)
        self.timeout_s = timeout_s
        self.retries = max(retries, 0)

    def propose(self, transcript: str, n_best=None, max_seq_tokens: int = 128):
        request = {
            "transcript": transcript,
            "n_best": [{"text": t, "log_prob": lp} for t, lp in (n_best or [])],
            "max_tokens": max_seq_tokens,
        }
        payload = (json.dumps(request) + "\n").encode()
        last_err = None
        for _ in range(self.retries + 1):
            try:
                with socket.create_connection(
                    (self.host, self.port), timeout=self.timeout_s
                ) as conn:
                    conn.sendall(payload)
                    raw = b""
                    while not raw.endswith(b"\n"):
                        chunk = conn.recv(65536)
                        if not chunk:
                            break
                        raw += chunk
                response = json.loads(raw.decode())
                return [
                    CorrectionCandidate(
                        text=c["text"],
                        confidence=float(c["confidence"]),
                        provider_id=self.provider_id,
                    )
                    for c in response.get("candidates", [])
                ]
            except (socket.timeout, TimeoutError, ConnectionError, OSError) as exc:
                last_err = exc
        raise ProviderTimeoutError(
            f"remote provider at {self.host}:{self.port} failed after "
            f"{self.retries + 1} attempts: {last_err}"
        )


def correct_transcript(
    transcript: str,
    provider,
    cfg: FilterConfig | None = None,
    n_best=None,
) -> tuple[str, list[CorrectionCandidate]]:
    """Propose, filter, and apply; returns (final text, accepted list)."""
    cfg = cfg or FilterConfig()
    candidates = provider.propose(transcript, n_best=n_best, max_seq_tokens=cfg.max_seq_tokens)
    accepted = filter_candidates(transcript, candidates, cfg)
    return apply_correction(transcript, accepted), accepted
