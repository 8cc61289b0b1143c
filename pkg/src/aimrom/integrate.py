"""Fixed-step fourth-order integration and seeded attractor sampling."""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BlowUpError",
    "Trajectory",
    "SamplerConfig",
    "SampleSet",
    "rk4",
    "sample_attractor",
]


class BlowUpError(RuntimeError):
    """Raised when a state stops being finite during integration."""

    def __init__(self, time, message=None):
        self.time = time
        super().__init__(message or f"non-finite state at t = {time:.6g}")


@dataclass(frozen=True)
class Trajectory:
    """Dense fixed-step output: times (n,), states (n, dim)."""

    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=float)
        if t.ndim != 1 or s.ndim != 2 or s.shape[0] != t.shape[0]:
            raise ValueError("times (n,) and states (n, dim) must align")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    @property
    def dim(self):
        return self.states.shape[1]

    @property
    def final_time(self):
        return float(self.times[-1])

    @property
    def final_state(self):
        return self.states[-1]


def _rk4_step(f, a, dt):
    k1 = f(a)
    k2 = f(a + 0.5 * dt * k1)
    k3 = f(a + 0.5 * dt * k2)
    k4 = f(a + dt * k3)
    return a + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4(field_, a0, t_end, dt):
    """Classical RK4 from t = 0 to t_end with step dt; the last step is shortened
    if t_end is not an integer multiple of dt.  Returns the dense trajectory."""
    a0 = np.asarray(a0, dtype=float)
    if a0.ndim != 1 or a0.shape[0] != field_.dim:
        raise ValueError(f"initial state must have shape ({field_.dim},)")
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be positive")
    if not np.all(np.isfinite(a0)):
        raise ValueError("initial state must be finite")

    n_full = int(math.floor(t_end / dt + 1e-9))
    remainder = t_end - n_full * dt
    has_tail = remainder > 1e-9 * max(1.0, abs(t_end))

    n_states = n_full + 1 + (1 if has_tail else 0)
    times = np.empty(n_states)
    times[: n_full + 1] = np.arange(n_full + 1) * dt
    if has_tail:
        times[-1] = t_end
    states = np.empty((n_states, a0.shape[0]))
    states[0] = a0

    f = field_.eval
    a = a0
    # overflow inside a step is handled by the finite check, keep it quiet
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_full):
            a = _rk4_step(f, a, dt)
            if not np.all(np.isfinite(a)):
                raise BlowUpError(time=times[i + 1])
            states[i + 1] = a
        if has_tail:
            a = _rk4_step(f, a, remainder)
            if not np.all(np.isfinite(a)):
                raise BlowUpError(time=t_end)
            states[-1] = a
    return Trajectory(times=times, states=states)


@dataclass(frozen=True)
class SamplerConfig:
    """Ensemble sampling plan.

    ic_box is (dim, 2) rows of [low, high]; each trajectory starts uniform
    in the box.  After transient_time the run continues for sample_time and
    every snapshot_stride-th stored state is kept (the first kept state is
    the one at the end of the transient).
    """

    n_trajectories: int
    ic_box: np.ndarray
    transient_time: float
    snapshot_stride: int
    seed: int
    sample_time: float

    def __post_init__(self):
        box = np.asarray(self.ic_box, dtype=float)
        if box.ndim != 2 or box.shape[1] != 2:
            raise ValueError("ic_box must have shape (dim, 2)")
        if np.any(box[:, 1] < box[:, 0]):
            raise ValueError("ic_box rows must satisfy low <= high")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be positive")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be positive")
        if self.transient_time < 0 or self.sample_time <= 0:
            raise ValueError("transient_time must be >= 0 and sample_time > 0")
        object.__setattr__(self, "ic_box", box)


@dataclass(frozen=True)
class SampleSet:
    """Stacked snapshots with their source trajectory ids and times."""

    states: np.ndarray = field(repr=False)
    traj_ids: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    failed_ids: tuple = ()

    @property
    def n_snapshots(self):
        return self.states.shape[0]


def sample_attractor(field_, cfg, dt):
    """Integrate an ensemble and collect post-transient snapshots.

    Trajectories run sequentially in index order, so results are bit
    reproducible for a fixed seed.  A trajectory that blows up is dropped
    and recorded in failed_ids; if more than half fail the whole sample
    is abandoned.
    """
    box = cfg.ic_box
    if box.shape[0] != field_.dim:
        raise ValueError("ic_box dimension does not match the field")
    rng = np.random.default_rng(cfg.seed)
    ics = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((cfg.n_trajectories, field_.dim))

    t_total = cfg.transient_time + cfg.sample_time
    first_kept = int(round(cfg.transient_time / dt))

    states, ids, times = [], [], []
    failed = []
    for i in range(cfg.n_trajectories):
        try:
            traj = rk4(field_, ics[i], t_total, dt)
        except BlowUpError:
            failed.append(i)
            continue
        keep = np.arange(first_kept, traj.times.shape[0], cfg.snapshot_stride)
        states.append(traj.states[keep])
        times.append(traj.times[keep])
        ids.append(np.full(keep.shape[0], i, dtype=int))

    if len(failed) > cfg.n_trajectories / 2:
        raise BlowUpError(
            time=t_total,
            message=f"{len(failed)} of {cfg.n_trajectories} trajectories blew up",
        )
    return SampleSet(
        states=np.concatenate(states, axis=0),
        traj_ids=np.concatenate(ids, axis=0),
        times=np.concatenate(times, axis=0),
        failed_ids=tuple(failed),
    )
