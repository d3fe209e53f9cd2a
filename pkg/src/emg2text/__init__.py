"""emg2text: silent-speech recognition pipeline.

EMG feature extraction, DTW+CCA audio target transfer, from-scratch
transformer transduction and recognition, beam-search decoding,
conservative transcript correction, and WER evaluation, all verifiable
end-to-end on synthetic corpora.
"""

from . import (
    acoustic,
    align,
    asr,
    correction,
    corpus,
    errors,
    evaluation,
    fileio,
    nn,
    signals,
)

__version__ = "0.1.0"

__all__ = [
    "acoustic",
    "align",
    "asr",
    "correction",
    "corpus",
    "errors",
    "evaluation",
    "fileio",
    "nn",
    "signals",
    "__version__",
]
