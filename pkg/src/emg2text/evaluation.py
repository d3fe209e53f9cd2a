"""Recognition scoring: word error rate, relative improvement, timing,
and tabular/CSV/plot-data report emission.

Corpus WER aggregates total errors over total reference words, not the
mean of per-utterance rates.
"""

from __future__ import annotations

import csv
import io
import string
import time
from dataclasses import dataclass, field

from .errors import ParameterError

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_words(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return text.lower().translate(_PUNCT_TABLE).split()


def word_edit_ops(ref_words: list[str], hyp_words: list[str]) -> tuple[int, int, int]:
    """Minimal (substitutions, deletions, insertions) between word lists.

    Unit-cost Levenshtein with backtrace; among equal-cost scripts the
    backtrace prefers match/substitute, then deletion, then insertion.
    """
    n, m = len(ref_words), len(hyp_words)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = dist[i - 1][j - 1] + (ref_words[i - 1] != hyp_words[j - 1])
            dele = dist[i - 1][j] + 1
            ins = dist[i][j - 1] + 1
            dist[i][j] = min(sub, dele, ins)
    subs = dels = inss = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (
            ref_words[i - 1] != hyp_words[j - 1]
        ):
            subs += ref_words[i - 1] != hyp_words[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            inss += 1
            j -= 1
    return subs, dels, inss


def wer(reference: str, hypothesis: str) -> tuple[float, int, int, int]:
    """Word error rate and its edit counts for one utterance pair.

    Returns (wer_fraction, S, D, I).  An empty reference with a
    non-empty hypothesis reports the insertions over a length-1
    denominator so the rate stays finite.
    """
    ref_words = normalize_words(reference)
    hyp_words = normalize_words(hypothesis)
    s, d, i = word_edit_ops(ref_words, hyp_words)
    denom = len(ref_words) if ref_words else 1
    if not ref_words and not hyp_words:
        return 0.0, 0, 0, 0
    return (s + d + i) / denom, s, d, i


def relative_improvement(baseline_wer: float, system_wer: float) -> float:
    """100 * (baseline - system) / baseline, rounded to one decimal."""
    if baseline_wer <= 0:
        raise ParameterError("baseline WER must be positive")
    return round(100.0 * (baseline_wer - system_wer) / baseline_wer, 1)


def time_utterance(stage, *args, **kwargs) -> tuple[object, float]:
    """Run one stage on one utterance, returning (result, wall seconds)."""
    t0 = time.perf_counter()
    result = stage(*args, **kwargs)
    return result, time.perf_counter() - t0


@dataclass
class UtteranceDetail:
    utterance_id: str
    reference: str
    hypothesis: str
    substitutions: int
    deletions: int
    insertions: int
    ref_words: int
    seconds: float = 0.0
    empty_reference: bool = False


@dataclass
class SystemRow:
    system_name: str
    wer_percent: float
    relative_improvement_percent: float | None  # None marks the baseline row
    mean_seconds_per_utterance: float


@dataclass
class EvalReport:
    rows: list[SystemRow] = field(default_factory=list)
    details: dict[str, list[UtteranceDetail]] = field(default_factory=dict)


def score_system(
    system_name: str,
    pairs: list[tuple[str, str, str]],
    seconds: dict[str, float] | None = None,
) -> tuple[float, list[UtteranceDetail]]:
    """Corpus WER percent + per-utterance detail.

    pairs: (utterance_id, reference, hypothesis) triples.  Aggregate is
    total errors over total reference words.
    """
    details = []
    total_err = 0
    total_words = 0
    seconds = seconds or {}
    for utt_id, ref, hyp in pairs:
        ref_words = normalize_words(ref)
        _, s, d, i = wer(ref, hyp)
        total_err += s + d + i
        total_words += len(ref_words) if ref_words else 1
        details.append(
            UtteranceDetail(
                utterance_id=utt_id,
                reference=ref,
                hypothesis=hyp,
                substitutions=s,
                deletions=d,
                insertions=i,
                ref_words=len(ref_words),
                seconds=seconds.get(utt_id, 0.0),
                empty_reference=not ref_words,
            )
        )
    wer_pct = 100.0 * total_err / total_words if total_words else 0.0
    return wer_pct, details


def build_report(systems: list[dict]) -> EvalReport:
    """Assemble an EvalReport from per-system summaries.

    systems: [{"name", "wer_percent", "mean_seconds", "details"
    (optional)}], first entry is the baseline.  Relative improvements
    are computed here from the baseline row.
    """
    if not systems:
        raise ParameterError("report needs at least one system")
    baseline = systems[0]["wer_percent"]
    rows = []
    details = {}
    for idx, sysrec in enumerate(systems):
        rel = None if idx == 0 else relative_improvement(baseline, sysrec["wer_percent"])
        rows.append(
            SystemRow(
                system_name=sysrec["name"],
                wer_percent=sysrec["wer_percent"],
                relative_improvement_percent=rel,
                mean_seconds_per_utterance=sysrec.get("mean_seconds", 0.0),
            )
        )
        if sysrec.get("details"):
            details[sysrec["name"]] = sysrec["details"]
    return EvalReport(rows=rows, details=details)


def aggregate_wer_from_details(details: list[UtteranceDetail]) -> float:
    """Recompute corpus WER percent from per-utterance counts."""
    errs = sum(d.substitutions + d.deletions + d.insertions for d in details)
    words = sum(d.ref_words if d.ref_words else 1 for d in details)
    return 100.0 * errs / words if words else 0.0


def format_table_text(report: EvalReport) -> str:
    """Three-column comparison table (system, WER, improvement, seconds)."""
    header = (
        "System",
        "WER (%)",
        "Relative improvement (%)",
        "Average time taken per utterance (sec)",
    )
    lines = []
    rows = []
    for row in report.rows:
        rel = "Baseline" if row.relative_improvement_percent is None else (
            f"{row.relative_improvement_percent:.1f}"
        )
        rows.append(
            (
                row.system_name,
                f"{row.wer_percent:g}",
                rel,
                f"{row.mean_seconds_per_utterance:.2f}",
            )
        )
    widths = [max(len(header[c]), *(len(r[c]) for r in rows)) for c in range(4)]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def format_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        ["system", "wer_percent", "relative_improvement_percent", "mean_seconds_per_utterance"]
    )
    for row in report.rows:
        rel = "" if row.relative_improvement_percent is None else repr(
            row.relative_improvement_percent
        )
        writer.writerow([row.system_name, repr(row.wer_percent), rel,
                         repr(row.mean_seconds_per_utterance)])
    return buf.getvalue()


def parse_csv(text: str) -> EvalReport:
    """Re-parse format_csv output into an equal aggregate report."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[:2] != ["system", "wer_percent"]:
        raise ParameterError("unrecognized report CSV header")
    rows = []
    for rec in reader:
        rel = None if rec[2] == "" else float(rec[2])
        rows.append(SystemRow(rec[0], float(rec[1]), rel, float(rec[3])))
    return EvalReport(rows=rows)


def format_plot_data(report: EvalReport) -> str:
    """(system, wer, seconds) triples for external plotting."""
    lines = ["system,wer_percent,seconds"]
    for row in report.rows:
        lines.append(
            f"{row.system_name},{row.wer_percent:g},{row.mean_seconds_per_utterance:g}"
        )
    return "\n".join(lines) + "\n"


def emit_report(report: EvalReport, fmt: str, path) -> None:
    """Write the report in one of {table-text, csv, plot-data}."""
    formatters = {
        "table-text": format_table_text,
        "csv": format_csv,
        "plot-data": format_plot_data,
    }
    if fmt not in formatters:
        raise ParameterError(f"unknown report format {fmt!r}")
    text = formatters[fmt](report)
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise IOError(f"cannot write report to {path}: {exc}") from exc
