"""Discrete-event simulation of G/Mn/1 and Mn/Gn/1 queues.

Between events the exponential side (service in G/Mn/1, arrivals in
Mn/Gn/1) is redrawn at the rate of the current state, which is exact by
memorylessness.  The general side keeps its scheduled epoch, so the
residual time observed at an event is exactly ``scheduled - now``.

Every state change is fed to the segment trackers, which assert the
pathwise rate-balance bound ``|N^U - N^D| <= 1`` as the run proceeds.  Two-step
up and down transitions through each level are counted inline for all
levels at once.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .distributions import DistributionSpec
from .errors import ConfigError, EstimationError, PartitionError, RBPViolation
from .gm1 import Gm1Model
from .gmn1 import Gmn1Model
from .mngn1 import MnGn1Model

SCHEMA = "rbq.simstats/1"
BLOCK = 1 << 14
EVENT_CAP = 50_000_000
_M, _D, _U = 0, 1, 2
_CODES = {"M": _M, "D": _D, "U": _U}


# -- partitions and trackers --------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """D/M/U partition of the nonnegative integers.

    ``classes[n]`` is one of ``"D"``, ``"M"``, ``"U"`` for ``n < len(classes)``;
    every larger state belongs to ``tail``.
    """

    classes: str
    tail: str

    def __post_init__(self):
        if set(self.classes + self.tail) - set("DMU"):
            raise PartitionError(f"partition classes must be D, M or U: {self.classes!r}/{self.tail!r}")
        if len(self.tail) != 1:
            raise PartitionError("partition tail must be a single class")
        members = self.classes + self.tail
        if "D" not in members or "U" not in members:
            raise PartitionError("both D and U must be nonempty")

    @classmethod
    def level(cls, ell: int) -> "Partition":
        """Level crossing: D = {n <= ell}, U = {n > ell}, M empty."""
        return cls("D" * (ell + 1), "U")

    @classmethod
    def two_step(cls, k: int) -> "Partition":
        """Two-step transitions through ``k``: D = {n < k}, M = {k}, U = {n > k}."""
        if k < 1:
            raise PartitionError("two-step partitions need k >= 1 so that D is nonempty")
        return cls("D" * k + "M", "U")

    @classmethod
    def from_sets(cls, down: Iterable[int], up: Iterable[int], tail: str = "M") -> "Partition":
        """Finite D and U; states above both sets get ``tail``."""
        down, up = set(down), set(up)
        if down & up:
            raise PartitionError(f"D and U overlap on {sorted(down & up)}")
        if any(n < 0 for n in down | up):
            raise PartitionError("states are nonnegative integers")
        top = max(down | up, default=-1) + 1
        classes = "".join("D" if n in down else "U" if n in up else "M" for n in range(top))
        return cls(classes, tail)

    def code(self, n: int) -> int:
        return _CODES[self.classes[n] if n < len(self.classes) else self.tail]

    def to_dict(self) -> dict[str, str]:
        return {"classes": self.classes, "tail": self.tail}

    @classmethod
    def from_dict(cls, record: dict[str, Any]) -> "Partition":
        if "level" in record:
            return cls.level(int(record["level"]))
        if "two_step" in record:
            return cls.two_step(int(record["two_step"]))
        if "down" in record or "up" in record:
            return cls.from_sets(record.get("down", ()), record.get("up", ()), record.get("tail", "M"))
        return cls(record["classes"], record["tail"])


class SegmentTracker:
    """Counts completed U- and D-segments of an integer-valued path.

    A U-segment ends at an entry into U whose most recent visit to D or U
    was in D (and symmetrically for D-segments).  Time zero is not an
    entry: no segment can end before both sets have been visited.
    """

    def __init__(self, partition: Partition, record_times: bool = False):
        self.partition = partition
        self._codes = [partition.code(n) for n in range(len(partition.classes))]
        self._tail = _CODES[partition.tail]
        self.record_times = record_times
        self.count_u = 0
        self.count_d = 0
        self.max_imbalance = 0
        self.entries_u: list[float] = []
        self.entries_d: list[float] = []
        self.segment_ends: list[tuple[float, str]] = []
        self._last_set = _M
        self._last_end = _M

    def start(self, t: float, state: int) -> None:
        c = self._codes[state] if state < len(self._codes) else self._tail
        if c != _M:
            self._last_set = c

    def update(self, t: float, state: int) -> None:
        c = self._codes[state] if state < len(self._codes) else self._tail
        if c == _M or c == self._last_set:
            return
        if self._last_set != _M:
            if c == self._last_end:
                raise RBPViolation(f"two consecutive {'UD'[c == _D]}-segment ends at t={t}")
            if c == _U:
                self.count_u += 1
            else:
                self.count_d += 1
            self._last_end = c
            gap = abs(self.count_u - self.count_d)
            if gap > 1:
                raise RBPViolation(f"|N^U - N^D| = {gap} at t={t}")
            self.max_imbalance = max(self.max_imbalance, gap)
            if self.record_times:
                self.segment_ends.append((t, "U" if c == _U else "D"))
        if self.record_times:
            (self.entries_u if c == _U else self.entries_d).append(t)
        self._last_set = c

    def reset_counts(self) -> None:
        """Restart counting (after warmup); the path history is kept."""
        self.count_u = self.count_d = self.max_imbalance = 0
        self.entries_u.clear()
        self.entries_d.clear()
        self.segment_ends.clear()

    def summary(self) -> dict[str, Any]:
        return {"partition": self.partition.to_dict(), "count_u": self.count_u,
                "count_d": self.count_d, "max_imbalance": self.max_imbalance}


def attach_rbp_tracker(partition: Partition | dict, record_times: bool = False) -> SegmentTracker:
    """A fresh tracker for ``partition``; pass it to :func:`simulate_once` to have it updated."""
    if isinstance(partition, dict):
        partition = Partition.from_dict(partition)
    return SegmentTracker(partition, record_times)


# -- configuration and results ---------------------------------------------------

QueueModel = Gmn1Model | MnGn1Model | Gm1Model


@dataclass(frozen=True)
class SimConfig:
    model: Any
    seed: int = 0
    events: int | None = 1_000_000
    horizon: float | None = None
    warmup: int | None = None
    trackers: tuple[Partition, ...] = ()
    replications: int = 10
    residual_levels: int = 10
    threads: int = 1

    def __post_init__(self):
        model = self.model
        if isinstance(model, Gm1Model):
            from .schedule import RateSchedule
            model = Gmn1Model(model.inter_arrival, RateSchedule.constant(model.mu))
            object.__setattr__(self, "model", model)
        if not isinstance(model, (Gmn1Model, MnGn1Model)):
            raise ConfigError(f"unsupported model type {type(model).__name__}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if (self.events is None) == (self.horizon is None):
            raise ConfigError("give exactly one stopping rule: events or horizon")
        if self.events is not None and self.events < 1:
            raise ConfigError("events must be positive")
        if self.horizon is not None and not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        warmup = self.warmup
        if warmup is None:
            warmup = (self.events // 10) if self.events is not None else 0
        if warmup < 0 or (self.events is not None and warmup >= self.events):
            raise ConfigError("warmup must be nonnegative and below the event count")
        object.__setattr__(self, "warmup", int(warmup))
        object.__setattr__(self, "trackers", tuple(
            Partition.from_dict(p) if isinstance(p, dict) else p for p in self.trackers))


@dataclass
class RepStats:
    """Measurements of one replication (after warmup)."""

    elapsed: float
    events: int
    time_in: np.ndarray
    arrivals_found: np.ndarray
    departures_left: np.ndarray
    residuals: dict[int, np.ndarray]
    first_flags: dict[int, np.ndarray]
    idle_periods: np.ndarray
    tst_up: np.ndarray
    tst_down: np.ndarray
    trackers: list[dict[str, Any]]
    total_arrivals: int
    total_departures: int
    final_state: int

    @property
    def time_avg(self) -> np.ndarray:
        return self.time_in / self.elapsed

    @property
    def arrival_epoch(self) -> np.ndarray:
        return self.arrivals_found / max(1, self.arrivals_found.sum())

    @property
    def departure_epoch(self) -> np.ndarray:
        return self.departures_left / max(1, self.departures_left.sum())


def _pad(arrays: Sequence[np.ndarray]) -> np.ndarray:
    width = max(len(a) for a in arrays)
    out = np.zeros((len(arrays), width))
    for i, a in enumerate(arrays):
        out[i, : len(a)] = a
    return out


@dataclass
class SimStats:
    """Replications plus pooled estimates; standard errors come from the spread across replications."""

    kind: str
    seed: int
    reps: list[RepStats] = field(repr=False)

    def _mean_se(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mean = rows.mean(axis=0)
        if rows.shape[0] < 2:
            return mean, np.full_like(mean, np.nan)
        return mean, rows.std(axis=0, ddof=1) / math.sqrt(rows.shape[0])

    @property
    def time_avg(self) -> tuple[np.ndarray, np.ndarray]:
        return self._mean_se(_pad([r.time_avg for r in self.reps]))

    @property
    def arrival_epoch(self) -> tuple[np.ndarray, np.ndarray]:
        return self._mean_se(_pad([r.arrival_epoch for r in self.reps]))

    @property
    def departure_epoch(self) -> tuple[np.ndarray, np.ndarray]:
        return self._mean_se(_pad([r.departure_epoch for r in self.reps]))

    def epoch_ratio(self, n: int, epoch: str = "arrival") -> tuple[float, float]:
        """Mean and SE over replications of ``p_n / p_{n-1}`` for arrival or departure epochs."""
        vals = []
        for r in self.reps:
            p = r.arrival_epoch if epoch == "arrival" else r.departure_epoch
            vals.append(p[n] / p[n - 1] if n < len(p) and p[n - 1] > 0 else np.nan)
        mean, se = self._mean_se(np.asarray(vals)[:, None])
        return float(mean[0]), float(se[0])

    def residuals(self, n: int) -> np.ndarray:
        return np.concatenate([r.residuals.get(n, np.empty(0)) for r in self.reps])

    def first_flags(self, n: int) -> np.ndarray:
        return np.concatenate([r.first_flags.get(n, np.empty(0, dtype=bool)) for r in self.reps])

    @property
    def idle_periods(self) -> np.ndarray:
        return np.concatenate([r.idle_periods for r in self.reps])

    @property
    def events(self) -> int:
        return sum(r.events for r in self.reps)

    @property
    def rbp_max_imbalance(self) -> int:
        vals = [t["max_imbalance"] for r in self.reps for t in r.trackers]
        vals += [int(np.max(np.abs(r.tst_up - r.tst_down), initial=0)) for r in self.reps]
        return max(vals, default=0)

    def to_record(self, s_grid: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0),
                  levels: int | None = None) -> dict[str, Any]:
        """Versioned JSON-compatible summary."""
        pi, pi_se = self.time_avg
        a, a_se = self.arrival_epoch
        d, d_se = self.departure_epoch
        top = levels if levels is not None else len(pi)
        lst = {}
        for n in sorted({k for r in self.reps for k in r.residuals}):
            x = self.residuals(n)
            if x.size:
                lst[str(n)] = [{"s": s, "estimate": e, "se": se}
                               for s, (e, se) in zip(s_grid, empirical_lst(x, s_grid))]
        return {
            "schema": SCHEMA,
            "kind": self.kind,
            "seed": self.seed,
            "replications": len(self.reps),
            "events": self.events,
            "elapsed": sum(r.elapsed for r in self.reps),
            "pi_hat": _series(pi[:top], pi_se[:top]),
            "arrival_epoch": _series(a[:top], a_se[:top]),
            "departure_epoch": _series(d[:top], d_se[:top]),
            "residual_lst": lst,
            "first_fraction": {str(n): _fraction(self.first_flags(n))
                               for n in sorted({k for r in self.reps for k in r.first_flags})},
            "idle_lst": [{"s": s, "estimate": e, "se": se}
                         for s, (e, se) in zip(s_grid, empirical_lst(self.idle_periods, s_grid))]
            if self.idle_periods.size else [],
            "tst": tst_rate_report(self)[:top],
            "trackers": [[t for t in r.trackers] for r in self.reps],
            "rbp_max_imbalance": self.rbp_max_imbalance,
            "conservation": all(r.total_arrivals == r.total_departures + r.final_state for r in self.reps),
        }


def _series(mean, se):
    return {str(n): {"estimate": float(m), "se": float(s)} for n, (m, s) in enumerate(zip(mean, se))}


def _fraction(flags: np.ndarray) -> dict[str, float]:
    m = flags.size
    p = float(flags.mean()) if m else float("nan")
    return {"estimate": p, "se": math.sqrt(p * (1 - p) / m) if m else float("nan"), "samples": m}


# -- estimators ---------------------------------------------------------------------

def empirical_lst(samples, s_grid) -> list[tuple[float, float]]:
    """``(mean of exp(-s x), sample std / sqrt(m))`` for each ``s``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EstimationError("empirical LST of an empty sample")
    out = []
    for s in s_grid:
        e = np.exp(-float(s) * x)
        se = e.std(ddof=1 if x.size > 1 else 0) / math.sqrt(x.size)
        out.append((float(e.mean()), float(se)))
    return out


def tst_rate_report(stats: SimStats | RepStats) -> list[dict[str, float]]:
    """Per-level two-step up/down counts and rates.

    For pooled statistics the counts and elapsed times are summed over
    replications; ``max_count_gap`` is the largest per-replication
    ``|up - down|``, which the rate balance bounds by one.
    """
    reps = stats.reps if isinstance(stats, SimStats) else [stats]
    elapsed = sum(r.elapsed for r in reps)
    width = max(max(len(r.tst_up), len(r.tst_down)) for r in reps)
    up = _pad([r.tst_up for r in reps] + [np.zeros(width)])[:-1]
    down = _pad([r.tst_down for r in reps] + [np.zeros(width)])[:-1]
    rows = []
    for n in range(width):
        u, d = up[:, n].sum(), down[:, n].sum()
        rows.append({
            "n": n,
            "up_count": int(u),
            "down_count": int(d),
            "up_rate": float(u / elapsed) if elapsed > 0 else 0.0,
            "down_rate": float(d / elapsed) if elapsed > 0 else 0.0,
            "max_count_gap": int(np.max(np.abs(up[:, n] - down[:, n]))),
        })
    return rows


# -- the event loops -----------------------------------------------------------

def _streams(seed: int, rep: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Counter-based (Philox) streams for arrivals and services of one replication."""
    mk = lambda k: np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(rep, k))))
    return mk(0), mk(1)


class _Draws:
    """Block sampler returning Python floats."""

    __slots__ = ("fn", "buf", "i")

    def __init__(self, fn):
        self.fn = fn
        self.buf: list[float] = []
        self.i = 0

    def __call__(self) -> float:
        if self.i == len(self.buf):
            self.buf = self.fn(BLOCK).tolist()
            self.i = 0
        x = self.buf[self.i]
        self.i += 1
        return x


def _grow(lst: list, n: int) -> None:
    while len(lst) <= n:
        lst.append(0)


class _Recorder:
    """Mutable per-replication accumulators shared by both event loops."""

    def __init__(self, trackers: list[SegmentTracker], levels: int):
        self.trackers = trackers
        self.levels = levels
        self.reset(0.0, 0)
        self.total_arrivals = 0
        self.total_departures = 0

    def reset(self, t: float, state: int) -> None:
        self.t0 = t
        self.time_in = [0.0] * (state + 1)
        self.found = [0] * (state + 1)
        self.left = [0] * (state + 1)
        self.up = [0] * (state + 1)
        self.down = [0] * (state + 1)
        self.res = {n: [] for n in range(self.levels + 1)}
        self.flags = {n: [] for n in range(self.levels + 1)}
        self.idle: list[float] = []
        self.events = 0
        for tr in self.trackers:
            tr.reset_counts()

    def finish(self, t: float, final_state: int) -> RepStats:
        res = {n: np.asarray(v) for n, v in self.res.items() if v}
        flags = {n: np.asarray(v, dtype=bool) for n, v in self.flags.items() if v}
        return RepStats(
            elapsed=t - self.t0, events=self.events, time_in=np.asarray(self.time_in),
            arrivals_found=np.asarray(self.found, dtype=float),
            departures_left=np.asarray(self.left, dtype=float), residuals=res, first_flags=flags,
            idle_periods=np.asarray(self.idle), tst_up=np.asarray(self.up, dtype=float),
            tst_down=np.asarray(self.down, dtype=float),
            trackers=[tr.summary() for tr in self.trackers],
            total_arrivals=self.total_arrivals, total_departures=self.total_departures,
            final_state=final_state)


def _run_gmn1(model: Gmn1Model, cfg: SimConfig, rep: int, trackers) -> RepStats:
    rng_a, rng_s = _streams(cfg.seed, rep)
    g = model.inter_arrival
    inter = _Draws(lambda k: g.sample(rng_a, k))
    expo = _Draws(rng_s.standard_exponential)
    head = [model.rate(n) for n in range(1, model.head_length + 1)]
    tail_rate = model.mu.tail
    rec = _Recorder(trackers, cfg.residual_levels)
    n_events = cfg.events if cfg.events is not None else EVENT_CAP
    horizon = cfg.horizon if cfg.horizon is not None else math.inf
    warmup = cfg.warmup
    levels = cfg.residual_levels

    t = 0.0
    n = 0
    last_dir = 0
    first = True  # no departure yet in the current inter-arrival time
    next_arr = inter()
    for tr in trackers:
        tr.start(t, n)
    time_in, found, left, up, down = rec.time_in, rec.found, rec.left, rec.up, rec.down
    for ev in range(n_events):
        if ev == warmup:
            rec.reset(t, n)
            time_in, found, left, up, down = rec.time_in, rec.found, rec.left, rec.up, rec.down
        if n > 0:
            d = t + expo() / (head[n - 1] if n <= len(head) else tail_rate)
        else:
            d = math.inf
        if next_arr <= d:
            if next_arr > horizon:
                time_in[n] += horizon - t
                t = horizon
                break
            time_in[n] += next_arr - t
            t = next_arr
            found[n] += 1
            if last_dir == 1:
                up[n] += 1
            n += 1
            last_dir = 1
            rec.total_arrivals += 1
            if n == len(time_in):
                time_in.append(0.0)
                found.append(0)
                left.append(0)
                up.append(0)
                down.append(0)
            next_arr = t + inter()
            first = True
        else:
            if d > horizon:
                time_in[n] += horizon - t
                t = horizon
                break
            time_in[n] += d - t
            t = d
            if last_dir == -1:
                down[n] += 1
            n -= 1
            last_dir = -1
            rec.total_departures += 1
            left[n] += 1
            if n <= levels:
                rec.res[n].append(next_arr - t)
                rec.flags[n].append(first)
            if n == 0:
                rec.idle.append(next_arr - t)
            first = False
        rec.events += 1
        for tr in trackers:
            tr.update(t, n)
    return rec.finish(t, n)


def _run_mngn1(model: MnGn1Model, cfg: SimConfig, rep: int, trackers) -> RepStats:
    rng_a, rng_s = _streams(cfg.seed, rep)
    expo = _Draws(rng_a.standard_exponential)
    n_head = len(model.services)
    samplers = [_Draws(lambda k, g=g: g.sample(rng_s, k)) for g in model.services]
    samplers.append(_Draws(lambda k: model.service_tail.sample(rng_s, k)))
    lam_head = [model.arrival_rate(n) for n in range(0, model.lam.last_head_index + 1)]
    lam_tail = model.lam.tail
    rec = _Recorder(trackers, cfg.residual_levels)
    n_events = cfg.events if cfg.events is not None else EVENT_CAP
    horizon = cfg.horizon if cfg.horizon is not None else math.inf
    warmup = cfg.warmup
    levels = cfg.residual_levels

    t = 0.0
    n = 0
    last_dir = 0
    first = True  # no arrival yet during the current service
    svc_end = math.inf
    idle_start = 0.0
    for tr in trackers:
        tr.start(t, n)
    time_in, found, left, up, down = rec.time_in, rec.found, rec.left, rec.up, rec.down
    for ev in range(n_events):
        if ev == warmup:
            rec.reset(t, n)
            time_in, found, left, up, down = rec.time_in, rec.found, rec.left, rec.up, rec.down
        a = t + expo() / (lam_head[n] if n < len(lam_head) else lam_tail)
        if a < svc_end:
            if a > horizon:
                time_in[n] += horizon - t
                t = horizon
                break
            time_in[n] += a - t
            t = a
            found[n] += 1
            if n >= 1 and n <= levels:
                rec.res[n].append(svc_end - t)
                rec.flags[n].append(first)
            if n >= 1:
                first = False
            if last_dir == 1:
                up[n] += 1
            n += 1
            last_dir = 1
            rec.total_arrivals += 1
            if n == len(time_in):
                time_in.append(0.0)
                found.append(0)
                left.append(0)
                up.append(0)
                down.append(0)
            if n == 1:
                if idle_start >= rec.t0:  # skip the idle period cut by the warmup boundary
                    rec.idle.append(t - idle_start)
                svc_end = t + samplers[0 if n_head >= 1 else -1]()
                first = True
        else:
            if svc_end > horizon:
                time_in[n] += horizon - t
                t = horizon
                break
            time_in[n] += svc_end - t
            t = svc_end
            if last_dir == -1:
                down[n] += 1
            n -= 1
            last_dir = -1
            rec.total_departures += 1
            left[n] += 1
            if n > 0:
                # the next service law is chosen by the count present as it starts
                svc_end = t + samplers[n - 1 if n <= n_head else -1]()
                first = True
            else:
                svc_end = math.inf
                idle_start = t
        rec.events += 1
        for tr in trackers:
            tr.update(t, n)
    return rec.finish(t, n)


def simulate_once(cfg: SimConfig, rep: int = 0, trackers: list[SegmentTracker] | None = None) -> RepStats:
    """One replication; ``trackers`` default to fresh ones for ``cfg.trackers``."""
    if trackers is None:
        trackers = [SegmentTracker(p) for p in cfg.trackers]
    if isinstance(cfg.model, Gmn1Model):
        return _run_gmn1(cfg.model, cfg, rep, trackers)
    return _run_mngn1(cfg.model, cfg, rep, trackers)


def _check_load(model) -> None:
    if isinstance(model, Gmn1Model):
        ok = model.arrival_rate < model.mu.tail
    else:
        ok = model.tail_load < 1.0
    if not ok:
        warnings.warn("simulating an unstable model; the queue grows without bound", RuntimeWarning)


def simulate(cfg: SimConfig) -> SimStats:
    """All replications (in worker processes when ``cfg.threads > 1``)."""
    _check_load(cfg.model)
    if cfg.threads > 1 and cfg.replications > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.threads, cfg.replications)) as pool:
            reps = list(pool.map(simulate_once, [cfg] * cfg.replications, range(cfg.replications)))
    else:
        reps = [simulate_once(cfg, r) for r in range(cfg.replications)]
    kind = "gmn1" if isinstance(cfg.model, Gmn1Model) else "mngn1"
    return SimStats(kind=kind, seed=int(cfg.seed), reps=reps)


def write_residuals_csv(stats: SimStats, path) -> None:
    """Flat residual samples with columns ``n, residual, first_flag``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "residual", "first_flag"])
        for r in stats.reps:
            for n in sorted(r.residuals):
                for x, f in zip(r.residuals[n], r.first_flags[n]):
                    w.writerow([n, repr(float(x)), int(f)])
