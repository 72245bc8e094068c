"""Rank statistics and spectral diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSample

EXACT_LIMIT = 200


@dataclass(frozen=True)
class StatResult:
    u: float
    p: float
    n_a: int
    n_b: int
    method: str  # "exact" or "normal"


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _u_distribution(n: int, m: int) -> np.ndarray:
    """Counts of arrangements giving each U in 0..n*m (exact null distribution).

    Uses the recurrence c(n, m, u) = c(n - 1, m, u - m) + c(n, m - 1, u),
    evaluated with integer arithmetic so tail sums are exact.
    """
    # table[j] holds the distribution for (i, j) while sweeping i upward
    table = [[1] for _ in range(m + 1)]  # i = 0: only U = 0
    for i in range(1, n + 1):
        row = [[1]]  # j = 0: only U = 0
        for j in range(1, m + 1):
            a = table[j]  # (i - 1, j), shifted by j
            b = row[j - 1]  # (i, j - 1)
            size = i * j + 1
            out = [0] * size
            for u, c in enumerate(a):
                out[u + j] += c
            for u, c in enumerate(b):
                out[u] += c
            row.append(out)
        table = row
    return np.array(table[m], dtype=object)


def mann_whitney_u(a, b) -> StatResult:
    """Two-sided Mann-Whitney U test; ``u`` is the statistic of sample ``a``.

    The exact null distribution is used when ``len(a) * len(b) <= 200`` and
    there are no ties; otherwise the normal approximation with tie and
    continuity corrections.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise InvalidSample("both samples must be non-empty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidSample("samples must be finite")
    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    u = float(ranks[:n].sum() - n * (n + 1) / 2.0)
    nm = n * m
    ties = len(np.unique(pooled)) < len(pooled)

    if nm <= EXACT_LIMIT and not ties:
        counts = _u_distribution(n, m)
        total = sum(counts)
        lo = int(round(min(u, nm - u)))
        tail = sum(counts[:lo + 1])
        p = min(1.0, float(2 * tail) / float(total))
        return StatResult(u, p, n, m, "exact")

    _, tie_counts = np.unique(pooled, return_counts=True)
    N = n + m
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / (N * (N - 1))
    var = nm / 12.0 * ((N + 1) - tie_term)
    if var <= 0:
        return StatResult(u, 1.0, n, m, "normal")
    dev = max(0.0, abs(u - nm / 2.0) - 0.5)
    z = dev / math.sqrt(var)
    p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    return StatResult(u, p, n, m, "normal")


def vibration_metric(trace, f_k: float = 60.0) -> float:
    """Dominant frequency (Hz) of an actuation signal sampled at ``f_k``.

    ``trace`` is one value per control step; a ``(steps, voxels)`` array is
    averaged over voxels first. The mean is removed and the strongest DFT bin
    in ``(0, f_k / 2]`` is returned; a constant signal gives 0.
    """
    x = np.asarray(trace, dtype=np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    if x.ndim != 1 or len(x) < 256:
        raise InvalidSample(f"need a 1-D trace of at least 256 steps, got shape {x.shape}")
    x = x - x.mean()
    spectrum = np.abs(np.fft.rfft(x))
    scale = max(1.0, float(np.max(np.abs(x))) * len(x))
    if spectrum[1:].max() <= 1e-12 * scale:
        return 0.0
    freqs = np.fft.rfftfreq(len(x), d=1.0 / f_k)
    return float(freqs[1 + int(np.argmax(spectrum[1:]))])
