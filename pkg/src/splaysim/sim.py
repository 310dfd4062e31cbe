"""Event-driven execution of the pulse-coupled network.

Nominal flow has every phase advancing at the same constant rate, so the
next firing time is known in closed form and phases are advanced exactly;
no integration error enters the arc and the crossing coordinate is
assigned exactly 2*pi rather than accumulated.  Under a rate perturbation
the flow is integrated on a fixed step grid (the right-hand side does not
depend on the state, so the fourth-order step reduces to Simpson
quadrature of the disturbance) and the first crossing of 2*pi is located
by bracketing and bisection down to the firing tolerance, after which the
crossing coordinates are again clamped exactly.

Executions are recorded as HybridArc objects: state samples indexed by
(t, j), the jump events with pre/post states, and the interval structure
of the hybrid time domain.  Runs are deterministic given the
configuration, including the seed that resolves set-valued jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from . import analysis
from .circle import TWO_PI, as_phases
from .model import (
    ALL_ZERO,
    DEFAULT_FIRING_TOL,
    POLICIES,
    PhaseResponse,
    in_jump_set,
    in_splay_set,
    jump_map,
)

FLOW = "flow"
PRE_JUMP = "pre-jump"
POST_JUMP = "post-jump"

#: grid step ceiling for perturbed flow integration (s)
_MAX_STEP = 1e-3
#: steps per nominal inter-firing interval when that is the binding limit
_STEPS_PER_SEGMENT = 100
_CHUNK = 4096


class ZenoViolationError(RuntimeError):
    """Two consecutive firings were separated by less flow time than the
    configured dwell guard; the execution is aborted instead of chattering."""

    def __init__(self, t: float, j: int, dwell: float, min_dwell: float):
        super().__init__(
            f"dwell {dwell!r} s between jumps {j - 1} and {j} at t={t!r} "
            f"is below the guard {min_dwell!r} s"
        )
        self.t = t
        self.j = j
        self.dwell = dwell
        self.min_dwell = min_dwell


class HybridTime(NamedTuple):
    """A point (t, j) of a hybrid time domain; tuple order is lexicographic,
    which matches the ordering of hybrid time."""

    t: float
    j: int


@dataclass(frozen=True)
class Perturbation:
    """Additive rate disturbance d(t) applied to every oscillator.

    bound is the declared per-coordinate sup of |d_i(t)|; it must stay
    below the nominal rate so phases keep advancing and crossings stay
    bracketable.  Use the constructors: none(), sinusoidal(), custom().
    """

    kind: str = "none"
    amplitude: float = 0.0
    frequency: float = 0.0
    offsets: tuple[float, ...] = ()
    func: Callable[[float], np.ndarray] | None = None
    bound: float = 0.0

    @staticmethod
    def none() -> "Perturbation":
        return Perturbation()

    @staticmethod
    def sinusoidal(amplitude: float, frequency: float,
                   offsets) -> "Perturbation":
        """d_i(t) = amplitude * sin(frequency * t + offsets[i])."""
        amplitude = float(amplitude)
        if amplitude < 0.0:
            raise ValueError(f"amplitude must be nonnegative, got {amplitude!r}")
        return Perturbation(
            kind="sinusoidal",
            amplitude=amplitude,
            frequency=float(frequency),
            offsets=tuple(float(o) for o in offsets),
            bound=amplitude,
        )

    @staticmethod
    def custom(func: Callable[[float], np.ndarray], bound: float) -> "Perturbation":
        """Arbitrary t -> vector disturbance with declared sup bound."""
        if bound < 0.0:
            raise ValueError(f"bound must be nonnegative, got {bound!r}")
        return Perturbation(kind="custom", func=func, bound=float(bound))

    @property
    def is_none(self) -> bool:
        if self.kind == "none":
            return True
        return self.kind == "sinusoidal" and self.amplitude == 0.0

    def sample(self, ts: np.ndarray, n: int) -> np.ndarray:
        """Evaluate d on an array of times; returns shape (len(ts), n)."""
        ts = np.asarray(ts, dtype=float)
        if self.kind == "sinusoidal":
            offs = np.asarray(self.offsets, dtype=float)
            return self.amplitude * np.sin(self.frequency * ts[:, None] + offs[None, :])
        if self.kind == "custom":
            return np.stack([np.asarray(self.func(float(t)), dtype=float) for t in ts])
        return np.zeros((ts.size, n))

    def at(self, t: float, n: int) -> np.ndarray:
        return self.sample(np.asarray([t]), n)[0]


@dataclass
class SimConfig:
    """Everything that determines one run, seed included."""

    prc: PhaseResponse
    x0: np.ndarray
    n: int | None = None
    omega: float = 1.0
    perturbation: Perturbation = field(default_factory=Perturbation.none)
    horizon: float = 80.0
    max_jumps: int = 100_000
    firing_tol: float = DEFAULT_FIRING_TOL
    min_dwell: float = 1e-9
    stop_v_threshold: float | None = 1e-6
    stop_splay_tol: float | None = None
    policy: str = ALL_ZERO
    seed: int | None = 0
    sample_dt: float = 0.01

    def __post_init__(self):
        self.x0 = as_phases(self.x0).copy()
        if self.n is None:
            self.n = self.x0.size
        if self.n != self.x0.size:
            raise ValueError(f"n={self.n} does not match x0 of length {self.x0.size}")
        if self.prc.n != self.n:
            raise ValueError(
                f"response function was built for n={self.prc.n}, run has n={self.n}"
            )
        if not self.omega > 0.0:
            raise ValueError(f"omega must be positive, got {self.omega!r}")
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")
        if self.max_jumps < 1:
            raise ValueError(f"max_jumps must be at least 1, got {self.max_jumps!r}")
        if not self.firing_tol > 0.0:
            raise ValueError(f"firing_tol must be positive, got {self.firing_tol!r}")
        if self.min_dwell < 0.0:
            raise ValueError(f"min_dwell must be nonnegative, got {self.min_dwell!r}")
        if not self.sample_dt > 0.0:
            raise ValueError(f"sample_dt must be positive, got {self.sample_dt!r}")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}, expected one of {POLICIES}")
        for name in ("stop_v_threshold", "stop_splay_tol"):
            val = getattr(self, name)
            if val is not None and val < 0.0:
                raise ValueError(f"{name} must be nonnegative or None, got {val!r}")
        pert = self.perturbation
        if not pert.is_none:
            if pert.kind == "sinusoidal" and len(pert.offsets) != self.n:
                raise ValueError(
                    f"perturbation has {len(pert.offsets)} phase offsets for n={self.n}"
                )
            if not pert.bound < self.omega:
                raise ValueError(
                    f"perturbation bound {pert.bound!r} must stay below omega={self.omega!r} "
                    "so phases keep advancing"
                )


@dataclass(frozen=True)
class JumpEvent:
    """One firing: the pre state at jump index j maps to the post state at
    j + 1.  firers are the coordinates at 2*pi; branch records how the
    set-valued cases were resolved."""

    t: float
    j: int
    firers: tuple[int, ...]
    branch: str
    pre: np.ndarray
    post: np.ndarray


@dataclass
class HybridArc:
    """A recorded execution.

    ts, js, states and kinds are parallel arrays of samples ordered by
    hybrid time; kinds are 'flow', 'pre-jump' or 'post-jump'.  intervals
    lists the hybrid time domain as (t_start, t_end, j) tiles; events
    holds one JumpEvent per firing.
    """

    ts: np.ndarray
    js: np.ndarray
    states: np.ndarray
    kinds: np.ndarray
    events: list[JumpEvent]
    intervals: list[tuple[float, float, int]]
    omega: float | None
    perturbed: bool
    stop_reason: str

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def jumps(self) -> int:
        return len(self.events)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_time(self) -> HybridTime:
        return HybridTime(float(self.ts[-1]), int(self.js[-1]))

    def dwells(self) -> np.ndarray:
        """Flow time between consecutive firings (length jumps - 1)."""
        times = np.asarray([e.t for e in self.events])
        return np.diff(times)

    def min_dwell_after_first(self) -> float:
        """Shortest flow time separating consecutive firings, nan if fewer
        than two firings occurred."""
        d = self.dwells()
        return float(d.min()) if d.size else float("nan")


class _Recorder:
    def __init__(self):
        self.ts: list[float] = []
        self.js: list[int] = []
        self.states: list[np.ndarray] = []
        self.kinds: list[str] = []

    def add(self, t: float, j: int, x: np.ndarray, kind: str) -> None:
        self.ts.append(float(t))
        self.js.append(int(j))
        self.states.append(np.asarray(x, dtype=float).copy())
        self.kinds.append(kind)

    def extend_flow(self, ts: np.ndarray, j: int, xs: np.ndarray) -> None:
        for t, x in zip(ts, xs):
            self.add(t, j, x, FLOW)


class _NominalFlow:
    """Closed-form flow x(t) = x0 + omega * (t - t0)."""

    def __init__(self, x0: np.ndarray, t0: float, omega: float):
        self.x0 = x0
        self.t0 = t0
        self.omega = omega

    def state(self, t: float) -> np.ndarray:
        return np.minimum(self.x0 + self.omega * (t - self.t0), TWO_PI)

    def states(self, ts: np.ndarray) -> np.ndarray:
        return np.minimum(self.x0[None, :] + self.omega * (ts - self.t0)[:, None], TWO_PI)

    def first_crossing(self, horizon: float, firing_tol: float):
        t_fire = self.t0 + (TWO_PI - self.x0.max()) / self.omega
        if t_fire > horizon:
            return None
        x = self.x0 + self.omega * (t_fire - self.t0)
        return t_fire, _clamp_firers(x, firing_tol)


class _PerturbedFlow:
    """Flow under x' = omega + d(t), integrated on a fixed grid.

    The right-hand side does not depend on the state, so the classic
    fourth-order step equals Simpson quadrature of d over each step; the
    cumulative integral is kept per grid node and states at arbitrary
    times are completed with one partial Simpson step.
    """

    def __init__(self, x0: np.ndarray, t0: float, omega: float,
                 pert: Perturbation, horizon: float):
        if not pert.bound < omega:
            raise ValueError(
                f"perturbation bound {pert.bound!r} must stay below omega={omega!r} "
                "so phases keep advancing"
            )
        self.x0 = x0
        self.t0 = t0
        self.omega = omega
        self.pert = pert
        self.n = x0.size
        nominal_dwell = (TWO_PI - x0.max()) / omega
        self.h = max(min(_MAX_STEP, nominal_dwell / _STEPS_PER_SEGMENT), 1e-12)
        self.horizon = horizon
        self.grid_ts = np.asarray([t0])
        self.cum = np.zeros((1, self.n))
        self._steps = 0

    def _extend(self) -> bool:
        """Grow the grid by one chunk; False if the horizon was already covered."""
        if self.grid_ts[-1] >= self.horizon:
            return False
        k0, k1 = self._steps, self._steps + _CHUNK
        nodes = self.t0 + self.h * np.arange(k0, k1 + 1)
        mids = nodes[:-1] + 0.5 * self.h
        d_nodes = self.pert.sample(nodes, self.n)
        d_mids = self.pert.sample(mids, self.n)
        incs = (self.h / 6.0) * (d_nodes[:-1] + 4.0 * d_mids + d_nodes[1:])
        cum_new = self.cum[-1] + np.cumsum(incs, axis=0)
        self.grid_ts = np.concatenate([self.grid_ts, nodes[1:]])
        self.cum = np.concatenate([self.cum, cum_new])
        self._steps = k1
        return True

    def _cum_at(self, t: float) -> np.ndarray:
        while t > self.grid_ts[-1]:
            if not self._extend():
                break
        i = int(np.searchsorted(self.grid_ts, t, side="right")) - 1
        i = min(max(i, 0), self.grid_ts.size - 1)
        t_i = self.grid_ts[i]
        rem = t - t_i
        if rem <= 0.0:
            return self.cum[i]
        pts = np.asarray([t_i, t_i + 0.5 * rem, t])
        d = self.pert.sample(pts, self.n)
        return self.cum[i] + (rem / 6.0) * (d[0] + 4.0 * d[1] + d[2])

    def state(self, t: float) -> np.ndarray:
        x = self.x0 + self.omega * (t - self.t0) + self._cum_at(t)
        return np.minimum(x, TWO_PI)

    def states(self, ts: np.ndarray) -> np.ndarray:
        return np.stack([self.state(float(t)) for t in ts])

    def _raw_max(self, t: float) -> float:
        return float((self.x0 + self.omega * (t - self.t0) + self._cum_at(t)).max())

    def first_crossing(self, horizon: float, firing_tol: float):
        # scan grid nodes chunkwise for the first one at or past 2*pi
        i = 1
        while True:
            while i >= self.grid_ts.size:
                if not self._extend():
                    return None  # horizon covered, no crossing
            block_ts = self.grid_ts[i:]
            block_max = (self.x0[None, :] + self.omega * (block_ts[:, None] - self.t0)
                         + self.cum[i:]).max(axis=1)
            over = np.flatnonzero(block_max >= TWO_PI)
            if over.size:
                i += int(over[0])
                break
            if block_ts[-1] > horizon:
                return None
            i = self.grid_ts.size
        if float(self.grid_ts[i - 1]) > horizon:
            return None
        lo = float(self.grid_ts[i - 1])
        hi = float(self.grid_ts[i])
        rate = self.omega + self.pert.bound
        while (hi - lo) * rate > 0.5 * firing_tol:
            mid = 0.5 * (lo + hi)
            if self._raw_max(mid) >= TWO_PI:
                hi = mid
            else:
                lo = mid
        if hi > horizon:
            return None
        x = self.x0 + self.omega * (hi - self.t0) + self._cum_at(hi)
        return hi, _clamp_firers(x, firing_tol)


def _clamp_firers(x: np.ndarray, firing_tol: float) -> np.ndarray:
    """Assign exactly 2*pi to every coordinate in the firing band.

    Coordinates can overshoot 2*pi by at most the location tolerance; they
    are all within the band and land exactly on the boundary, so the jump
    map sees an exact firing.
    """
    x = x.copy()
    x[x >= TWO_PI - firing_tol] = TWO_PI
    return x


def _flow_for(x: np.ndarray, t0: float, config: SimConfig):
    if config.perturbation.is_none:
        return _NominalFlow(x, t0, config.omega)
    return _PerturbedFlow(x, t0, config.omega, config.perturbation, config.horizon)


def flow_to_next_event(x, omega: float, perturbation: Perturbation | None,
                       t0: float, horizon: float = math.inf,
                       firing_tol: float = DEFAULT_FIRING_TOL):
    """Flow from x at t0 until the first phase reaches 2*pi.

    Returns (t_fire, x_at_fire, True) at a crossing, with the crossing
    coordinates clamped exactly to 2*pi, or (horizon, x_at_horizon, False)
    when no phase fires before the horizon.  x must be in the box with no
    coordinate already at 2*pi.
    """
    arr = as_phases(x)
    if not omega > 0.0:
        raise ValueError(f"omega must be positive, got {omega!r}")
    if in_jump_set(arr, firing_tol):
        raise ValueError("flow_to_next_event requires a state strictly below 2*pi")
    pert = perturbation or Perturbation.none()
    if pert.is_none:
        flow = _NominalFlow(arr, t0, omega)
    else:
        flow = _PerturbedFlow(arr, t0, omega, pert, horizon)
    crossing = flow.first_crossing(horizon, firing_tol)
    if crossing is None:
        if math.isinf(horizon):
            raise ValueError("flow_to_next_event needs a finite horizon when no phase fires")
        return horizon, flow.state(horizon), False
    t_fire, x_fire = crossing
    return t_fire, x_fire, True


def _sample_times(t_start: float, t_end: float, dt: float) -> np.ndarray:
    """Global grid times k * dt strictly inside (t_start, t_end)."""
    k0 = math.floor(t_start / dt + 1e-9) + 1
    k1 = math.ceil(t_end / dt - 1e-9) - 1
    if k1 < k0:
        return np.empty(0)
    return dt * np.arange(k0, k1 + 1)


def run(config: SimConfig) -> HybridArc:
    """Execute the network and record the arc.

    Jumps are taken whenever a phase sits at 2*pi (within the firing
    tolerance); otherwise the state flows to the next firing or to the
    horizon.  Stops on the horizon, on the jump budget, or once the
    configured stop rule (V below threshold and/or splay membership) has
    held for a full nominal revolution.  Raises ZenoViolationError when
    consecutive firings are closer than the dwell guard.
    """
    x = config.x0.copy()
    t = 0.0
    j = 0
    rng = np.random.default_rng(config.seed)
    rec = _Recorder()
    events: list[JumpEvent] = []
    intervals: list[tuple[float, float, int]] = []
    seg_start = 0.0
    period = TWO_PI / config.omega
    hold_since: float | None = None
    last_jump_t: float | None = None
    stop_reason = "horizon"

    if not in_jump_set(x, config.firing_tol):
        rec.add(t, j, x, FLOW)

    while True:
        if in_jump_set(x, config.firing_tol):
            if j >= config.max_jumps:
                stop_reason = "max-jumps"
                if not rec.ts or rec.ts[-1] != t or rec.js[-1] != j:
                    rec.add(t, j, x, FLOW)
                intervals.append((seg_start, t, j))
                break
            if last_jump_t is not None and t - last_jump_t < config.min_dwell:
                raise ZenoViolationError(t, j + 1, t - last_jump_t, config.min_dwell)
            branches = jump_map(x, config.prc, config.policy, config.firing_tol)
            branch = branches[0] if len(branches) == 1 else branches[int(rng.integers(len(branches)))]
            rec.add(t, j, x, PRE_JUMP)
            events.append(JumpEvent(t, j, branch.firers, branch.branch,
                                    x.copy(), branch.post.copy()))
            intervals.append((seg_start, t, j))
            last_jump_t = t
            seg_start = t
            j += 1
            x = branch.post.copy()
            rec.add(t, j, x, POST_JUMP)

            hit = False
            if config.stop_v_threshold is not None:
                hit = analysis.lyapunov(x) < config.stop_v_threshold
            if not hit and config.stop_splay_tol is not None:
                hit = in_splay_set(x, config.stop_splay_tol)
            if hit:
                if hold_since is None:
                    hold_since = t
                elif t - hold_since >= period:
                    stop_reason = "stop-rule"
                    intervals.append((t, t, j))
                    break
            else:
                hold_since = None
            continue

        flow = _flow_for(x, t, config)
        crossing = flow.first_crossing(config.horizon, config.firing_tol)
        t_end = crossing[0] if crossing is not None else config.horizon
        grid = _sample_times(t, t_end, config.sample_dt)
        if grid.size:
            rec.extend_flow(grid, j, flow.states(grid))
        if crossing is None:
            x = flow.state(config.horizon)
            t = config.horizon
            rec.add(t, j, x, FLOW)
            intervals.append((seg_start, t, j))
            stop_reason = "horizon"
            break
        t, x = crossing

    return HybridArc(
        ts=np.asarray(rec.ts),
        js=np.asarray(rec.js, dtype=int),
        states=np.asarray(rec.states) if rec.states else np.empty((0, config.n)),
        kinds=np.asarray(rec.kinds),
        events=events,
        intervals=intervals,
        omega=config.omega,
        perturbed=not config.perturbation.is_none,
        stop_reason=stop_reason,
    )


# -- CSV persistence ---------------------------------------------------------
#
# Trajectory schema: t,j,x_1..x_n,V,Vtilde,event   (event in flow|pre-jump|post-jump)
# Events schema:     t,j,firers,branch,pre_1..pre_n,post_1..post_n
#
# Floats are written with repr so rereading reproduces them bit for bit and
# rerunning the same configuration reproduces the file byte for byte.


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trajectory_csv(arc: HybridArc, path) -> None:
    """Write the sampled arc; Vtilde is nan when n is past the factorial cap."""
    n = arc.n
    v = analysis.lyapunov(arc.states) if len(arc.ts) else np.empty(0)
    if n <= analysis.MAX_ENUM_N:
        vt = analysis.vtilde(arc.states) if len(arc.ts) else np.empty(0)
    else:
        vt = np.full(len(arc.ts), np.nan)
    header = "t,j," + ",".join(f"x_{i + 1}" for i in range(n)) + ",V,Vtilde,event"
    lines = [header]
    for i in range(len(arc.ts)):
        coords = ",".join(_fmt(c) for c in arc.states[i])
        lines.append(
            f"{_fmt(arc.ts[i])},{int(arc.js[i])},{coords},{_fmt(v[i])},{_fmt(vt[i])},{arc.kinds[i]}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_events_csv(arc: HybridArc, path) -> None:
    n = arc.n
    header = ("t,j,firers,branch,"
              + ",".join(f"pre_{i + 1}" for i in range(n)) + ","
              + ",".join(f"post_{i + 1}" for i in range(n)))
    lines = [header]
    for e in arc.events:
        pre = ",".join(_fmt(c) for c in e.pre)
        post = ",".join(_fmt(c) for c in e.post)
        firers = ";".join(str(i) for i in e.firers)
        lines.append(f"{_fmt(e.t)},{e.j},{firers},{e.branch},{pre},{post}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory_csv(path) -> HybridArc:
    """Rebuild an arc from a trajectory CSV (samples and intervals only;
    the events list is empty and flow metadata is unknown)."""
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty trajectory file")
    header = text[0].split(",")
    if (len(header) < 6 or header[:2] != ["t", "j"]
            or header[-3:] != ["V", "Vtilde", "event"]):
        raise ValueError(f"{path}: not a trajectory CSV (header {text[0]!r})")
    n = len(header) - 5
    if [h for h in header[2:2 + n]] != [f"x_{i + 1}" for i in range(n)]:
        raise ValueError(f"{path}: unexpected state columns in header {text[0]!r}")
    ts, js, states, kinds = [], [], [], []
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} columns")
        ts.append(float(parts[0]))
        js.append(int(parts[1]))
        states.append([float(p) for p in parts[2:2 + n]])
        kinds.append(parts[-1])
    ts_arr = np.asarray(ts)
    js_arr = np.asarray(js, dtype=int)
    intervals = []
    for j in np.unique(js_arr):
        mask = js_arr == j
        intervals.append((float(ts_arr[mask].min()), float(ts_arr[mask].max()), int(j)))
    return HybridArc(
        ts=ts_arr,
        js=js_arr,
        states=np.asarray(states),
        kinds=np.asarray(kinds),
        events=[],
        intervals=intervals,
        omega=None,
        perturbed=False,
        stop_reason="loaded",
    )
