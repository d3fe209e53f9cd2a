"""Alignment of silent to vocalized EMG feature sequences.

DTW finds the minimal-cost monotonic frame pairing; CCA learns linear
projections of the two views that maximize correlation on the paired
frames, and a second DTW pass in that shared space refines the
alignment.  The refined pairing transfers the vocalized utterance's mel
frames onto the silent timeline as training pseudo-targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .acoustic import MelSpectrogram
from .errors import AlignmentError, ParameterError
from .signals import FeatureMatrix

_COS_EPS = 1e-12


@dataclass
class AlignmentPath:
    """Monotonic (i, j) index pairing with its accumulated cost."""

    pairs: list[tuple[int, int]]
    total_cost: float

    def __post_init__(self):
        if not self.pairs:
            raise ParameterError("alignment path cannot be empty")

    @property
    def silent_to_vocal(self) -> dict[int, int]:
        """Last vocal index paired with each silent index."""
        out: dict[int, int] = {}
        for i, j in self.pairs:
            out[i] = j
        return out

    def transpose(self) -> "AlignmentPath":
        return AlignmentPath([(j, i) for i, j in self.pairs], self.total_cost)


@dataclass
class CcaModel:
    proj_a: np.ndarray  # d_a x k
    proj_b: np.ndarray  # d_b x k
    correlations: np.ndarray  # k values, sorted non-increasing, in [-1, 1]
    mean_a: np.ndarray = field(default=None)
    mean_b: np.ndarray = field(default=None)
    k: int = 8
    ridge: float = 1e-4

    def project_a(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean_a) @ self.proj_a

    def project_b(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean_b) @ self.proj_b


def _distance_matrix(a: np.ndarray, b: np.ndarray, metric: str) -> np.ndarray:
    if metric == "euclidean":
        # explicit differences (not the a^2+b^2-2ab expansion) so equal
        # rows get distance exactly 0
        out = np.empty((a.shape[0], b.shape[0]))
        for i in range(a.shape[0]):
            diff = b - a[i]
            out[i] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        return out
    if metric == "cosine":
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        denom = np.maximum(na[:, None] * nb[None, :], _COS_EPS)
        return 1.0 - (a @ b.T) / denom
    raise ParameterError(f"unknown DTW metric {metric!r}")


def dtw_align(a, b, metric: str = "euclidean") -> AlignmentPath:
    """Globally minimal-cost monotonic alignment of two feature matrices.

    Steps are {(1,0), (0,1), (1,1)}; the path starts at (0,0), ends at
    (N-1, M-1), and its cost is the sum of pointwise distances over every
    visited cell.  Backtrace ties prefer the diagonal step, then
    advancing the first sequence, then the second.
    """
    mat_a = a.data if isinstance(a, FeatureMatrix) else np.asarray(a, dtype=np.float64)
    mat_b = b.data if isinstance(b, FeatureMatrix) else np.asarray(b, dtype=np.float64)
    if mat_a.ndim != 2 or mat_b.ndim != 2 or mat_a.size == 0 or mat_b.size == 0:
        raise ParameterError("DTW inputs must be non-empty 2-D matrices")
    if mat_a.shape[1] != mat_b.shape[1]:
        raise ParameterError(
            f"DTW dim mismatch: {mat_a.shape[1]} vs {mat_b.shape[1]}"
        )
    dist = _distance_matrix(mat_a, mat_b, metric)
    n, m = dist.shape
    acc = np.full((n, m), np.inf)
    acc[0, 0] = dist[0, 0]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + dist[0, j]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + dist[i, 0]
        for j in range(1, m):
            acc[i, j] = dist[i, j] + min(
                acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            )
    # backtrace; tie order: diagonal, advance-a, advance-b
    i, j = n - 1, m - 1
    rev = [(i, j)]
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            options = (
                (acc[i - 1, j - 1], i - 1, j - 1),
                (acc[i - 1, j], i - 1, j),
                (acc[i, j - 1], i, j - 1),
            )
        elif i > 0:
            options = ((acc[i - 1, j], i - 1, j),)
        else:
            options = ((acc[i, j - 1], i, j - 1),)
        best = min(opt[0] for opt in options)
        for cost, pi, pj in options:
            if cost == best:
                i, j = pi, pj
                break
        rev.append((i, j))
    rev.reverse()
    return AlignmentPath(pairs=rev, total_cost=float(acc[n - 1, m - 1]))


def cca_fit(pairs_a, pairs_b, k: int = 8, ridge: float = 1e-4) -> CcaModel:
    """Canonical correlation analysis on row-paired observations.

    Ridge-regularized covariance blocks keep the whitening stable on
    collinear features.  Components are sign-fixed so the reported
    training correlations are non-negative and sorted non-increasing.
    """
    xa = pairs_a.data if isinstance(pairs_a, FeatureMatrix) else np.asarray(pairs_a, dtype=np.float64)
    xb = pairs_b.data if isinstance(pairs_b, FeatureMatrix) else np.asarray(pairs_b, dtype=np.float64)
    if xa.ndim != 2 or xb.ndim != 2 or xa.shape[0] != xb.shape[0]:
        raise ParameterError("CCA inputs must share their row count")
    n = xa.shape[0]
    if k < 1 or k > min(xa.shape[1], xb.shape[1]):
        raise ParameterError(f"k={k} out of range for dims {xa.shape[1]}/{xb.shape[1]}")
    if n < k + 2:
        raise ParameterError(f"CCA needs at least k+2={k + 2} rows, got {n}")
    mean_a = xa.mean(axis=0)
    mean_b = xb.mean(axis=0)
    za = xa - mean_a
    zb = xb - mean_b
    caa = za.T @ za / (n - 1) + ridge * np.eye(xa.shape[1])
    cbb = zb.T @ zb / (n - 1) + ridge * np.eye(xb.shape[1])
    cab = za.T @ zb / (n - 1)
    # whiten view a, reduce to a symmetric eigenproblem
    eva, vecs_a = np.linalg.eigh(caa)
    inv_sqrt_a = vecs_a @ np.diag(1.0 / np.sqrt(np.maximum(eva, 1e-300))) @ vecs_a.T
    t = inv_sqrt_a @ cab @ np.linalg.solve(cbb, cab.T) @ inv_sqrt_a
    t = (t + t.T) / 2.0
    evals, evecs = np.linalg.eigh(t)
    order = np.argsort(evals)[::-1][:k]
    wa = inv_sqrt_a @ evecs[:, order]
    wb = np.linalg.solve(cbb, cab.T) @ wa
    # scale to unit variance per component on the training pairs
    pa = za @ wa
    pb = zb @ wb
    sa = np.maximum(pa.std(axis=0, ddof=1), 1e-300)
    sb = np.maximum(pb.std(axis=0, ddof=1), 1e-300)
    wa = wa / sa
    wb = wb / sb
    pa = za @ wa
    pb = zb @ wb
    corrs = np.empty(k)
    for c in range(k):
        denom = pa[:, c].std(ddof=1) * pb[:, c].std(ddof=1)
        corrs[c] = 0.0 if denom < 1e-300 else float(
            np.mean((pa[:, c] - pa[:, c].mean()) * (pb[:, c] - pb[:, c].mean()))
            * n / (n - 1) / denom
        )
        if corrs[c] < 0:  # sign convention: flip view b
            wb[:, c] = -wb[:, c]
            corrs[c] = -corrs[c]
    corrs = np.clip(corrs, -1.0, 1.0)
    order = np.argsort(-corrs, kind="stable")
    return CcaModel(
        proj_a=wa[:, order],
        proj_b=wb[:, order],
        correlations=corrs[order],
        mean_a=mean_a,
        mean_b=mean_b,
        k=k,
        ridge=ridge,
    )


def _resample_rows_nearest(mat: np.ndarray, target_rows: int) -> np.ndarray:
    src = mat.shape[0]
    if src == target_rows:
        return mat
    if src == 1 or target_rows == 1:
        idx = np.zeros(target_rows, dtype=int)
    else:
        idx = np.rint(np.arange(target_rows) * (src - 1) / (target_rows - 1)).astype(int)
    return mat[idx]


def audio_target_transfer(
    silent: FeatureMatrix,
    vocal: FeatureMatrix,
    vocal_mel: MelSpectrogram,
    refine: bool = True,
    cca_k: int = 8,
    cca_ridge: float = 1e-4,
    metric: str = "euclidean",
) -> np.ndarray:
    """Pseudo mel targets for a silent utterance from its vocalized twin.

    DTW pairs silent with vocalized frames; with refine=True a CCA model
    fit on those pairs re-embeds both views and DTW runs again in the
    shared space.  Each silent frame then receives the mel row of the
    last vocalized frame it is paired with.  Returns a
    silent-frames x n_mels matrix.
    """
    mel = vocal_mel.data
    if abs(mel.shape[0] - vocal.num_frames) > 2:
        raise AlignmentError(
            f"vocal mel has {mel.shape[0]} frames but vocal features have "
            f"{vocal.num_frames}; beyond the ±2 resampling tolerance"
        )
    mel = _resample_rows_nearest(mel, vocal.num_frames)
    path = dtw_align(silent, vocal, metric=metric)
    if refine:
        rows_a = silent.data[[i for i, _ in path.pairs]]
        rows_b = vocal.data[[j for _, j in path.pairs]]
        k = min(cca_k, silent.dims, vocal.dims, max(len(path.pairs) - 2, 0))
        if k >= 1:
            # standardize per dim before the fit (a DTW path touches every
            # frame of both sequences, so path stds cover the full data)
            # and weight projected components by their correlations so
            # weakly correlated directions contribute less distance
            std_a = np.maximum(rows_a.std(axis=0), 1e-8)
            std_b = np.maximum(rows_b.std(axis=0), 1e-8)
            model = cca_fit(rows_a / std_a, rows_b / std_b, k=k, ridge=cca_ridge)
            weights = model.correlations
            path = dtw_align(
                model.project_a(silent.data / std_a) * weights,
                model.project_b(vocal.data / std_b) * weights,
                metric=metric,
            )
    mapping = path.silent_to_vocal
    return np.stack([mel[mapping[i]] for i in range(silent.num_frames)])


def save_alignment_path(path_obj: AlignmentPath, path) -> None:
    """Two-column integer text file, one (i, j) pair per line."""
    with open(path, "w") as fh:
        fh.write(f"# total_cost {path_obj.total_cost!r}\n")
        for i, j in path_obj.pairs:
            fh.write(f"{i}\t{j}\n")


def load_alignment_path(path) -> AlignmentPath:
    pairs = []
    total = 0.0
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                total = float(line.split()[-1])
                continue
            i, j = line.split()
            pairs.append((int(i), int(j)))
    return AlignmentPath(pairs=pairs, total_cost=total)
