"""Monte-Carlo survival-time estimation, sweeps and trajectory diagnostics.

Replication ``k`` of an experiment with seed ``s`` always runs on the
stream ``replication_rng(s, k)``; results are stored by replication index,
so aggregation does not depend on worker scheduling.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import stats as sps

from .graph import Graph, parse_graph_spec
from .initspec import InitSpec
from .process import ProcessSpec, Trajectory, init_state, replication_rng, run
from .process._kernels import EV_DEIMMUNIZE, EV_HEAL, EV_INFECT

__all__ = [
    "SurvivalStats",
    "RunBatch",
    "GridPoint",
    "SweepPoint",
    "FitResult",
    "PhaseStats",
    "summarize",
    "run_replications",
    "estimate_survival",
    "sweep",
    "sweep_to_csv",
    "fit_scaling_exponent",
    "phase_diagnostics",
    "phase_survey",
    "default_phase_threshold",
    "recovered_fraction_threshold",
    "recovered_fraction_report",
    "SWEEP_COLUMNS",
]

Z95 = 1.959963984540054

SWEEP_COLUMNS = ("graph", "process", "n", "lambda", "rho_or_alpha", "init", "reps", "t_max",
                 "seed", "mean_lb", "median", "ci_halfwidth", "censored_frac", "max_rec_frac")


@dataclass
class SurvivalStats:
    """Summary of censored survival times.

    ``mean_uncensored_lower_bound`` counts censored runs at ``t_max`` and is
    therefore a lower bound on E[T] whenever anything was censored.
    ``median`` is None when more than half of the runs were censored.
    """

    replications: int
    censored_count: int
    t_max: float
    mean_uncensored_lower_bound: float
    std_error: float
    ci_halfwidth: float
    median: Optional[float]
    median_beyond_tmax: bool
    survival_fraction_at_tmax: float
    max_recovered_fraction_overall: float

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(times, censored, t_max: float, max_recovered_fraction=None) -> SurvivalStats:
    times = np.asarray(times, dtype=float)
    censored = np.asarray(censored, dtype=bool)
    reps = len(times)
    if reps == 0:
        raise ValueError("no replications")
    n_cens = int(censored.sum())
    mean = float(times.mean())
    sd = float(times.std(ddof=1)) if reps > 1 else 0.0
    se = sd / math.sqrt(reps)
    beyond = n_cens > reps / 2
    max_rec = 0.0 if max_recovered_fraction is None or len(max_recovered_fraction) == 0 \
        else float(np.max(max_recovered_fraction))
    return SurvivalStats(
        replications=reps,
        censored_count=n_cens,
        t_max=float(t_max),
        mean_uncensored_lower_bound=mean,
        std_error=se,
        ci_halfwidth=Z95 * se,
        median=None if beyond else float(np.median(times)),
        median_beyond_tmax=beyond,
        survival_fraction_at_tmax=n_cens / reps,
        max_recovered_fraction_overall=max_rec,
    )


@dataclass
class RunBatch:
    """Per-replication results, in replication order."""

    t_max: float
    survival_times: np.ndarray
    censored: np.ndarray
    event_counts: np.ndarray
    max_infected: np.ndarray
    max_recovered_fraction: np.ndarray
    trajectories: Optional[list] = field(default=None, repr=False)

    @property
    def reps(self) -> int:
        return len(self.survival_times)

    def stats(self) -> SurvivalStats:
        return summarize(self.survival_times, self.censored, self.t_max, self.max_recovered_fraction)


def _as_init(init) -> Union[InitSpec, np.ndarray]:
    if isinstance(init, InitSpec):
        return init
    if isinstance(init, str):
        return InitSpec.parse(init)
    return np.asarray(sorted(set(int(v) for v in init)), dtype=np.int64)


def run_replications(graph: Graph, spec: ProcessSpec, init, reps: int, t_max: float,
                     seed: int, workers: int = 1, kernel: str = "auto",
                     record_trajectory: bool = False) -> RunBatch:
    """Run ``reps`` independent replications; replication k uses stream (seed, k)."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    init = _as_init(init)
    times = np.zeros(reps)
    cens = np.zeros(reps, dtype=bool)
    events = np.zeros(reps, dtype=np.int64)
    max_inf = np.zeros(reps, dtype=np.int64)
    max_rec = np.zeros(reps)
    trajs = [None] * reps if record_trajectory else None

    def one(k):
        rng = replication_rng(seed, k)
        vs = init.resolve(graph, rng) if isinstance(init, InitSpec) else init
        st = init_state(graph, spec, vs, kernel=kernel, rng=rng)
        o = run(st, t_max, record_trajectory)
        times[k] = o.survival_time
        cens[k] = o.censored
        events[k] = o.event_count
        max_inf[k] = o.max_infected
        max_rec[k] = o.max_recovered_fraction
        if trajs is not None:
            trajs[k] = o.trajectory

    def block(ks):
        for k in ks:
            one(k)

    if workers <= 1 or reps == 1:
        block(range(reps))
    else:
        chunks = [range(i, reps, workers) for i in range(workers)]
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(block, chunks))
    return RunBatch(float(t_max), times, cens, events, max_inf, max_rec, trajs)


def estimate_survival(graph: Graph, spec: ProcessSpec, init, reps: int, t_max: float,
                      seed: int, workers: int = 1) -> SurvivalStats:
    return run_replications(graph, spec, init, reps, t_max, seed, workers).stats()


# --- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class GridPoint:
    graph: str
    spec: ProcessSpec
    init: str = "center"
    reps: int = 1000
    t_max: float = 1e4


@dataclass
class SweepPoint:
    graph: str
    spec: ProcessSpec
    init: str
    reps: int
    t_max: float
    seed: int
    stats: SurvivalStats
    vertex_count: int

    @property
    def n(self) -> int:
        if self.graph.startswith("star:"):
            return self.vertex_count - 1
        return self.vertex_count

    @property
    def lam(self) -> float:
        return self.spec.lam

    @property
    def lambda_sq_n(self) -> float:
        return self.spec.lam ** 2 * self.n

    def row(self) -> dict:
        st = self.stats
        return {
            "graph": self.graph,
            "process": self.spec.kind.slug,
            "n": self.n,
            "lambda": self.spec.lam,
            "rho_or_alpha": self.spec.rho_or_alpha,
            "init": self.init,
            "reps": self.reps,
            "t_max": self.t_max,
            "seed": self.seed,
            "mean_lb": st.mean_uncensored_lower_bound,
            "median": "beyond_tmax" if st.median is None else st.median,
            "ci_halfwidth": st.ci_halfwidth,
            "censored_frac": st.survival_fraction_at_tmax,
            "max_rec_frac": st.max_recovered_fraction_overall,
        }


def sweep(grid: Sequence[GridPoint], seed: int, workers: int = 1) -> list[SweepPoint]:
    """Evaluate grid points in order; point i uses seed + i."""
    if not grid:
        raise ValueError("empty grid")
    out = []
    for i, gp in enumerate(grid):
        point_seed = (seed + i) & 0xFFFF_FFFF_FFFF_FFFF
        try:
            g = parse_graph_spec(gp.graph, point_seed)
            st = estimate_survival(g, gp.spec, gp.init, gp.reps, gp.t_max, point_seed, workers)
        except Exception as exc:
            raise type(exc)(f"grid point {i}: {exc}") from exc
        out.append(SweepPoint(gp.graph, gp.spec, str(gp.init), gp.reps, gp.t_max, point_seed,
                              st, g.vertex_count))
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def sweep_to_csv(points: Iterable[SweepPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for p in points:
        row = p.row()
        w.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


# --- scaling fits ---------------------------------------------------------------

class FitResult(tuple):
    """(slope, intercept, slope_stderr) of log y against log x."""

    def __new__(cls, slope, intercept, slope_stderr):
        return super().__new__(cls, (slope, intercept, slope_stderr))

    slope = property(lambda self: self[0])
    intercept = property(lambda self: self[1])
    slope_stderr = property(lambda self: self[2])


def fit_scaling_exponent(points: Sequence[tuple[float, float]]) -> FitResult:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least 3 (x, y) points")
    if (pts <= 0).any():
        raise ValueError("x and y must be positive")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(lx) == 0:
        raise ValueError("x values must not all be equal")
    res = sps.linregress(lx, ly)
    return FitResult(float(res.slope), float(res.intercept), float(res.stderr))


# --- star trajectory diagnostics -------------------------------------------------

@dataclass
class PhaseStats:
    phase_count: int
    center_infected_phase_peaks: list[int]

    def fraction_reaching_threshold(self, theta: float) -> float:
        peaks = self.center_infected_phase_peaks
        if not peaks:
            return 0.0
        return sum(p >= theta for p in peaks) / len(peaks)


def default_phase_threshold(lam: float, rho: float, leaves: int, d: Optional[float] = None) -> float:
    """lambda * d * n with d = rho / (28 (2 + rho)) unless given."""
    if d is None:
        d = rho / (28.0 * (2.0 + rho))
    return lam * d * leaves


def phase_diagnostics(trajectory: Trajectory, graph: Graph) -> PhaseStats:
    """Split a star trajectory into center-infected / center-healthy phases."""
    if not graph.is_star:
        raise ValueError("phase diagnostics need a star (center 0)")
    kind = np.asarray(trajectory.kind)
    subj = np.asarray(trajectory.subject)
    init = np.asarray(trajectory.initial_labels)
    center = subj == 0
    leaf_delta = np.where(~center & (kind == EV_INFECT), 1, 0) - np.where(~center & (kind == EV_HEAL), 1, 0)
    leaves_inf = int((init[1:] == 1).sum()) + np.concatenate([[0], np.cumsum(leaf_delta)])
    # center state after each event: +1 infected, -1 healthy, 0 unchanged
    flip = np.where(center & (kind == EV_INFECT), 1, np.where(center & ((kind == EV_HEAL) | (kind == EV_DEIMMUNIZE)), -1, 0))
    c0 = 1 if init[0] == 1 else -1
    state = np.concatenate([[c0], flip])
    idx = np.flatnonzero(state)
    filled = state[idx[np.searchsorted(idx, np.arange(len(state)), side="right") - 1]]
    c_inf = filled > 0
    starts = np.concatenate([[0], np.flatnonzero(c_inf[1:] != c_inf[:-1]) + 1])
    ends = np.concatenate([starts[1:], [len(c_inf)]])
    peaks = [int(leaves_inf[a:b].max()) for a, b in zip(starts, ends) if c_inf[a]]
    return PhaseStats(len(starts), peaks)


def phase_survey(graph: Graph, spec: ProcessSpec, init, reps: int, t_max: float,
                 seed: int) -> list[PhaseStats]:
    """Phase diagnostics of ``reps`` recorded star runs on streams (seed, k).

    Trajectories are dropped as soon as they are summarized.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if not graph.is_star:
        raise ValueError("phase diagnostics need a star (center 0)")
    init = _as_init(init)
    out = []
    for k in range(reps):
        rng = replication_rng(seed, k)
        vs = init.resolve(graph, rng) if isinstance(init, InitSpec) else init
        o = run(init_state(graph, spec, vs, rng=rng), t_max, record_trajectory=True)
        out.append(phase_diagnostics(o.trajectory, graph))
    return out


def recovered_fraction_threshold(rho: float) -> float:
    return (2.0 + rho / 2.0) / (2.0 + rho)


def recovered_fraction_report(max_recovered_fractions, rho: float) -> tuple[float, float, int]:
    """(max observed fraction, (2 + rho/2)/(2 + rho), runs reaching it)."""
    if isinstance(max_recovered_fractions, RunBatch):
        max_recovered_fractions = max_recovered_fractions.max_recovered_fraction
    fr = np.asarray(max_recovered_fractions, dtype=float)
    thr = recovered_fraction_threshold(rho)
    mx = float(fr.max()) if fr.size else 0.0
    return mx, thr, int((fr >= thr).sum())
