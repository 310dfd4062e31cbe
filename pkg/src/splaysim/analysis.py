"""Functionals over phase configurations and verdicts over simulated arcs.

The central quantity is the Lyapunov functional V: the headroom between
the shortest containing arc and its largest possible value 2*pi*(n-1)/n.
V vanishes exactly on the splay set, is constant along nominal flow and
never increases across firings for a validated response function.  A
Euclidean comparator (distance to the splay lines, without clamping) is
provided because it looks like a natural candidate but fails the jump
condition; verify_monotone and closeness turn recorded arcs into verdicts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .circle import TWO_PI, _as_phase_batch, shortest_arc_length, splay_arc_length

if TYPE_CHECKING:  # pragma: no cover
    from .sim import HybridArc

#: n! permutations are enumerated for the Euclidean splay distances; above
#: this size the factorial cost is refused rather than silently paid.
MAX_ENUM_N = 8

_PERM_CACHE: dict[int, np.ndarray] = {}


def lyapunov(x):
    """V(x) = 2*pi*(n-1)/n - shortest_arc_length(x), clipped at 0.

    Nonnegative, at most 2*pi*(n-1)/n, and zero exactly when the phases are
    evenly spaced.  Accepts a single vector or an (m, n) batch.  The clip
    only ever removes rounding residue of order 1e-16: the shortest
    containing arc of n phases cannot exceed 2*pi*(n-1)/n.
    """
    arr, single = _as_phase_batch(x)
    v = np.maximum(splay_arc_length(arr.shape[1]) - shortest_arc_length(arr), 0.0)
    return float(v[0]) if single else v


def _permuted_offsets(n: int) -> np.ndarray:
    if n > MAX_ENUM_N:
        raise ValueError(
            f"splay distances enumerate n! permutations and are capped at n={MAX_ENUM_N}, got {n}"
        )
    mat = _PERM_CACHE.get(n)
    if mat is None:
        base = np.arange(n) * (TWO_PI / n)
        mat = np.asarray(list(itertools.permutations(base)), dtype=float)
        _PERM_CACHE[n] = mat
    return mat


def _splay_line_distance(arr: np.ndarray, clamp: bool) -> np.ndarray:
    """Min over permutations sigma of the distance from each row of arr to
    {a * 1 + v_sigma}, with a free (clamp=False) or restricted so the
    splay point stays inside the box (clamp=True)."""
    n = arr.shape[1]
    offsets = _permuted_offsets(n)
    hi = TWO_PI - offsets.max()  # largest offset is 2*pi*(n-1)/n, so hi = 2*pi/n
    out = np.empty(arr.shape[0])
    # diff has shape (chunk, n!, n); chunk keeps the intermediate small for n near the cap
    chunk = max(1, int(2e7 / (offsets.shape[0] * n)))
    for start in range(0, arr.shape[0], chunk):
        diff = arr[start:start + chunk, None, :] - offsets[None, :, :]
        a = diff.mean(axis=2)
        if clamp:
            a = np.clip(a, 0.0, hi)
        resid = diff - a[:, :, None]
        out[start:start + chunk] = np.sqrt(np.sum(resid * resid, axis=2)).min(axis=1)
    return out


def distance_to_splay(x):
    """Euclidean distance from x to the splay set inside the box.

    The splay set is the union over permutations sigma of the segments
    {a * 1 + v_sigma : 0 <= a <= 2*pi/n} where v_sigma permutes
    (0, 2*pi/n, ..., 2*pi*(n-1)/n); the common-offset parameter a is the
    clamped mean of x - v_sigma.  Accepts a vector or an (m, n) batch.
    """
    arr, single = _as_phase_batch(x)
    d = _splay_line_distance(arr, clamp=True)
    return float(d[0]) if single else d


def vtilde(x):
    """Distance from x to the splay lines, without box clamping.

    Equals distance_to_splay whenever the projected offset lands inside
    [0, 2*pi/n].  Looks like a Lyapunov candidate but is not: it can grow
    across a firing even for a validated response function.
    """
    arr, single = _as_phase_batch(x)
    d = _splay_line_distance(arr, clamp=False)
    return float(d[0]) if single else d


@dataclass(frozen=True)
class LyapunovTrace:
    """V along an arc: per-sample values, per-jump deltas V(post) - V(pre),
    and the largest |V - V(start)| within each flow interval."""

    values: np.ndarray
    jump_deltas: np.ndarray
    flow_oscillation: np.ndarray


@dataclass(frozen=True)
class MonotoneVerdict:
    """Did V behave like a Lyapunov functional along the arc?

    For a nominal arc, passed requires V constant along every flow interval
    and nonincreasing across every jump, both within tol.  For a perturbed
    arc the flow check is skipped and the jump deltas are informational
    only, so passed is vacuously True and `informational` is set.
    """

    passed: bool
    informational: bool
    flow_checked: bool
    max_flow_oscillation: float
    worst_flow_interval: int | None
    max_jump_delta: float
    worst_jump: int | None
    trace: LyapunovTrace

    def __str__(self) -> str:  # convenient for CLI/report lines
        status = "pass" if self.passed else "FAIL"
        if self.informational:
            status += " (informational: perturbed arc)"
        return (
            f"monotone {status}: max flow oscillation {self.max_flow_oscillation:.3e}, "
            f"max jump delta {self.max_jump_delta:.3e}"
        )


def verify_monotone(arc: "HybridArc", tol: float = 1e-9) -> MonotoneVerdict:
    """Check V's flow-constancy and jump-monotonicity over a recorded arc."""
    values = lyapunov(arc.states) if len(arc.states) else np.empty(0)
    if arc.events:
        deltas = np.asarray(
            [lyapunov(e.post) - lyapunov(e.pre) for e in arc.events], dtype=float
        )
    else:
        deltas = np.empty(0)

    oscillations = []
    for _, _, j in arc.intervals:
        mask = arc.js == j
        if not np.any(mask):
            oscillations.append(0.0)
            continue
        vj = values[mask]
        oscillations.append(float(np.max(np.abs(vj - vj[0]))))
    oscillations = np.asarray(oscillations, dtype=float)

    flow_checked = not arc.perturbed
    max_osc = float(oscillations.max()) if oscillations.size else 0.0
    worst_interval = int(oscillations.argmax()) if oscillations.size else None
    max_delta = float(deltas.max()) if deltas.size else 0.0
    worst_jump = int(deltas.argmax()) + 1 if deltas.size else None

    if arc.perturbed:
        passed = True
    else:
        passed = (max_osc <= tol) and (max_delta <= tol)
    return MonotoneVerdict(
        passed=passed,
        informational=bool(arc.perturbed),
        flow_checked=flow_checked,
        max_flow_oscillation=max_osc,
        worst_flow_interval=worst_interval,
        max_jump_delta=max_delta,
        worst_jump=worst_jump,
        trace=LyapunovTrace(values=values, jump_deltas=deltas,
                            flow_oscillation=oscillations),
    )


@dataclass(frozen=True)
class ClosenessReport:
    """Hybrid closeness of two arcs up to hybrid time tau.

    The arcs are (tau, eps)-close for every eps > eps_star as far as the
    recorded samples witness; eps_star is attained at sample (witness_t,
    witness_j) of the arc named by witness_direction.  Because both the
    supremum over one arc and the infimum over the other are evaluated on
    recorded samples (with linear interpolation in t), eps_star is accurate
    to about one sampling step.
    """

    tau: float
    eps_star: float
    witness_t: float
    witness_j: int
    witness_direction: str


def closeness(arc1: "HybridArc", arc2: "HybridArc", tau: float) -> ClosenessReport:
    """Compare two recorded arcs in the hybrid (tau, eps) sense.

    For every sample (t, j, x) of one arc with t + j <= tau there must be a
    time s in the other arc's j-th interval with |t - s| and the Euclidean
    state mismatch both below eps; eps_star is the largest such requirement
    over both directions.  A jump index missing entirely from the other arc
    yields eps_star = inf.
    """
    if arc1.n != arc2.n:
        raise ValueError(f"arcs have different network sizes: {arc1.n} vs {arc2.n}")
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau!r}")
    e1, t1, j1 = _one_sided(arc1, arc2, tau)
    e2, t2, j2 = _one_sided(arc2, arc1, tau)
    if e1 >= e2:
        return ClosenessReport(tau, e1, t1, j1, "first-vs-second")
    return ClosenessReport(tau, e2, t2, j2, "second-vs-first")


def _interval_index(arc: "HybridArc") -> dict[int, tuple[np.ndarray, np.ndarray]]:
    index: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for j in np.unique(arc.js):
        mask = arc.js == j
        index[int(j)] = (arc.ts[mask], arc.states[mask])
    return index


def _one_sided(a: "HybridArc", b: "HybridArc", tau: float) -> tuple[float, float, int]:
    b_index = _interval_index(b)
    worst = 0.0
    worst_t = float(a.ts[0]) if len(a.ts) else 0.0
    worst_j = int(a.js[0]) if len(a.js) else 0
    within = (a.ts + a.js) <= tau + 1e-12
    for t, j, x in zip(a.ts[within], a.js[within], a.states[within]):
        entry = b_index.get(int(j))
        if entry is None:
            return float("inf"), float(t), int(j)
        ts, xs = entry
        gap_t = np.abs(ts - t)
        gap_x = np.sqrt(np.sum((xs - x) ** 2, axis=1))
        best = float(np.minimum.reduce(np.maximum(gap_t, gap_x)))
        # interpolated candidate at s = t clamped into the interval
        s = min(max(float(t), float(ts[0])), float(ts[-1]))
        xi = np.asarray([np.interp(s, ts, xs[:, k]) for k in range(xs.shape[1])])
        cand = max(abs(t - s), float(np.sqrt(np.sum((xi - x) ** 2))))
        best = min(best, cand)
        if best > worst:
            worst, worst_t, worst_j = best, float(t), int(j)
    return worst, worst_t, worst_j
