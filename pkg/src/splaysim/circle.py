"""Circle geometry for phase configurations.

Angles are in radians on the circle of circumference 2*pi, with 0 and
2*pi identified.  A phase configuration is a plain float vector with
entries in the closed interval [0, 2*pi] and at least two entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI: float = 2.0 * np.pi


def as_phases(x) -> np.ndarray:
    """Validate and return a phase vector (1-D, n >= 2, entries in [0, 2*pi])."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"phase vector must be 1-D, got shape {arr.shape}")
    if arr.size < 2:
        raise ValueError(f"need at least 2 oscillators, got {arr.size}")
    _check_range(arr)
    return arr


def _check_range(arr: np.ndarray) -> None:
    ok = (arr >= 0.0) & (arr <= TWO_PI)
    if not np.all(ok):
        raise ValueError(f"phases must lie in [0, 2*pi], got {arr[~ok].ravel()[0]!r}")


def _as_phase_batch(x) -> tuple[np.ndarray, bool]:
    """Normalise input to shape (m, n); second value tells whether it was 1-D."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return as_phases(arr)[None, :], True
    if arr.ndim != 2:
        raise ValueError(f"expected a vector or a batch of vectors, got shape {arr.shape}")
    if arr.shape[1] < 2:
        raise ValueError(f"need at least 2 oscillators, got {arr.shape[1]}")
    _check_range(arr)
    return arr, False


def geodesic(a: float, b: float) -> float:
    """Geodesic distance between two angles, in [0, pi]."""
    for v in (a, b):
        if not 0.0 <= v <= TWO_PI:
            raise ValueError(f"angle must lie in [0, 2*pi], got {v!r}")
    diff = abs(a - b)
    return min(diff, TWO_PI - diff)


@dataclass(frozen=True)
class GapProfile:
    """Phases in ascending order and the circular gap after each one.

    gaps[i] is the counterclockwise distance from sorted[i] to its circular
    successor, so the gaps are nonnegative and sum to 2*pi.
    """

    sorted: np.ndarray
    gaps: np.ndarray


def gap_profile(x) -> GapProfile:
    """Sorted phases of x together with the circular gaps between neighbours."""
    arr = as_phases(x)
    srt = np.sort(arr)
    gaps = np.empty_like(srt)
    gaps[:-1] = np.diff(srt)
    gaps[-1] = TWO_PI - srt[-1] + srt[0]
    return GapProfile(sorted=srt, gaps=gaps)


def shortest_arc_length(x):
    """Length of the shortest closed circular arc containing every phase.

    Equals 2*pi minus the largest circular gap between consecutive sorted
    phases.  Accepts a single vector or a batch of shape (m, n); returns a
    float or an array of m floats accordingly.
    """
    arr, single = _as_phase_batch(x)
    srt = np.sort(arr, axis=1)
    inner = np.max(np.diff(srt, axis=1), axis=1)
    wrap = TWO_PI - srt[:, -1] + srt[:, 0]
    gamma = TWO_PI - np.maximum(inner, wrap)
    return float(gamma[0]) if single else gamma


def shortest_arc_oracle(x):
    """Shortest containing arc found by direct enumeration.

    A shortest containing arc can always be chosen to begin at one of the
    phases, so every phase is tried as the start: the candidate arc sweeps
    counterclockwise to the farthest of the phases, and the minimum over
    starts wins.  Quadratic in n; kept as an independent cross-check for
    shortest_arc_length.
    """
    arr, single = _as_phase_batch(x)
    # offsets[k, i, p] = counterclockwise distance from phase i to phase p
    offsets = (arr[:, None, :] - arr[:, :, None]) % TWO_PI
    gamma = offsets.max(axis=2).min(axis=1)
    return float(gamma[0]) if single else gamma


def min_pairwise_geodesic(x) -> float:
    """Smallest geodesic distance between any two phases of x.

    The closest pair is circularly adjacent, so only sorted neighbours need
    checking; each adjacent pair is geodesically min(gap, 2*pi - gap) apart.
    """
    prof = gap_profile(x)
    return float(np.min(np.minimum(prof.gaps, TWO_PI - prof.gaps)))


def splay_arc_length(n: int) -> float:
    """Shortest containing arc of n evenly spaced phases: 2*pi*(n-1)/n."""
    if n < 2:
        raise ValueError(f"need at least 2 oscillators, got {n}")
    return TWO_PI * (n - 1) / n
