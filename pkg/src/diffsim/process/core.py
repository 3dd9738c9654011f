from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

import numpy as np

from ..graph import Graph
from . import _kernels as K

__all__ = [
    "ProcessKind",
    "ProcessSpec",
    "EventKind",
    "EventRecord",
    "Trajectory",
    "RunOutcome",
    "SimState",
    "InvalidStateError",
    "replication_rng",
    "init_state",
    "state_from_labels",
    "resistance",
    "labeled_success_prob",
    "total_rate",
    "step",
    "run",
]

LABELS = "SIR"
_LOG_CHUNK = 1 << 16
_NO_LIMIT = np.iinfo(np.int64).max


class InvalidStateError(RuntimeError):
    pass


class ProcessKind(enum.IntEnum):
    SIS = K.SIS
    SIRS = K.SIRS
    CSIRS = K.CSIRS
    LABELED_CSIRS = K.LABELED

    @classmethod
    def parse(cls, name: str) -> "ProcessKind":
        key = name.strip().upper().replace("-", "_")
        aliases = {"LABELED": "LABELED_CSIRS", "LABELLED": "LABELED_CSIRS",
                   "LABELED_CSIRS": "LABELED_CSIRS"}
        try:
            return cls[aliases.get(key, key)]
        except KeyError:
            raise ValueError(f"unknown process {name!r}") from None

    @property
    def slug(self) -> str:
        return {"LABELED_CSIRS": "labeled"}.get(self.name, self.name.lower())

    @property
    def has_recovered(self) -> bool:
        return self in (ProcessKind.SIRS, ProcessKind.LABELED_CSIRS)


@dataclass(frozen=True)
class ProcessSpec:
    """Process kind and rates.

    ``rho_or_alpha`` is the deimmunization rate for SIRS and the resistance
    decay rate for (labeled) cSIRS; SIS ignores it.
    """

    kind: ProcessKind
    lam: float
    rho_or_alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProcessKind(self.kind))
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError("lambda must be a finite nonnegative number")
        if self.kind != ProcessKind.SIS and not (self.rho_or_alpha > 0 and math.isfinite(self.rho_or_alpha)):
            raise ValueError("rho/alpha must be positive")

    @classmethod
    def sis(cls, lam: float) -> "ProcessSpec":
        return cls(ProcessKind.SIS, lam)

    @classmethod
    def sirs(cls, lam: float, rho: float) -> "ProcessSpec":
        return cls(ProcessKind.SIRS, lam, rho)

    @classmethod
    def csirs(cls, lam: float, alpha: float) -> "ProcessSpec":
        return cls(ProcessKind.CSIRS, lam, alpha)

    @classmethod
    def labeled(cls, lam: float, alpha: float) -> "ProcessSpec":
        return cls(ProcessKind.LABELED_CSIRS, lam, alpha)


class EventKind(enum.IntEnum):
    INFECT = K.EV_INFECT
    HEAL = K.EV_HEAL
    DEIMMUNIZE = K.EV_DEIMMUNIZE
    FAILED_ATTEMPT = K.EV_FAILED
    EXTINCTION = K.EV_EXTINCTION
    CENSOR = K.EV_CENSOR


class EventRecord(NamedTuple):
    time: float
    kind: EventKind
    subject: int
    source: Optional[int] = None


@dataclass
class Trajectory:
    """Event log of one run, columnar.

    The terminal EXTINCTION or CENSOR marker, if present, is the last row
    and shares the time of the run's end.
    """

    initial_labels: np.ndarray
    time: np.ndarray
    kind: np.ndarray
    subject: np.ndarray
    source: np.ndarray

    def __len__(self) -> int:
        return len(self.time)

    def __iter__(self):
        for t, k, s, src in zip(self.time.tolist(), self.kind.tolist(),
                                self.subject.tolist(), self.source.tolist()):
            yield EventRecord(t, EventKind(k), s, None if src < 0 else src)


@dataclass
class RunOutcome:
    survival_time: float
    censored: bool
    event_count: int
    max_infected: int
    max_recovered: int
    max_recovered_fraction: float
    trajectory: Optional[Trajectory] = None


def replication_rng(seed: int, replication: int = 0) -> np.random.Generator:
    """Independent stream for one replication of a seeded experiment."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFF_FFFF_FFFF_FFFF, spawn_key=(int(replication),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(eq=False)
class SimState:
    """Mutable state of one simulation.

    ``label`` holds 0/1/2 for S/I/R. Timestamps are NaN when unset. The
    membership arrays are kernel bookkeeping and should not be touched.
    """

    graph: Graph
    spec: ProcessSpec
    label: np.ndarray
    last_heal_time: np.ndarray
    last_attempt_time: np.ndarray
    rng: np.random.Generator
    star: bool
    members: np.ndarray = field(repr=False)
    sizes: np.ndarray = field(repr=False)
    pos: np.ndarray = field(repr=False)
    act: np.ndarray = field(repr=False)
    apos: np.ndarray = field(repr=False)
    nact: np.ndarray = field(repr=False)
    scal: np.ndarray = field(repr=False)

    @property
    def time(self) -> float:
        return float(self.scal[K.T_NOW])

    @property
    def counts(self) -> tuple[int, int, int]:
        c = np.bincount(self.label, minlength=3)
        return int(c[0]), int(c[1]), int(c[2])

    @property
    def infected(self) -> np.ndarray:
        return np.flatnonzero(self.label == K.I)

    @property
    def extinct(self) -> bool:
        return not (self.label == K.I).any()

    @property
    def event_count(self) -> int:
        return int(self.scal[K.N_EVENTS])

    def labels_str(self) -> str:
        return "".join(LABELS[x] for x in self.label)


def _pick_kernel(graph: Graph, kernel: str) -> bool:
    if kernel == "auto":
        return graph.is_star
    if kernel == "star":
        if not graph.is_star:
            raise ValueError("star kernel requested on a non-star graph")
        return True
    if kernel == "graph":
        return False
    raise ValueError(f"unknown kernel {kernel!r}")


def state_from_labels(graph: Graph, spec: ProcessSpec, labels, seed: int = 0,
                      replication: int = 0, last_heal_time=None,
                      last_attempt_time=None, time: float = 0.0,
                      kernel: str = "auto", rng: Optional[np.random.Generator] = None) -> SimState:
    """Build a state from explicit per-vertex labels (``"SIR"`` string or ints)."""
    n = graph.vertex_count
    if isinstance(labels, str):
        labels = [LABELS.index(ch) for ch in labels]
    label = np.asarray(labels, dtype=np.int8).copy()
    if label.shape != (n,):
        raise ValueError("need one label per vertex")
    if ((label < 0) | (label > 2)).any():
        raise ValueError("labels must be S, I or R")
    if not spec.kind.has_recovered and (label == K.R).any():
        raise ValueError(f"{spec.kind.name} has no recovered state")
    heal = np.full(n, np.nan) if last_heal_time is None else np.asarray(last_heal_time, float).copy()
    att = np.full(n, np.nan) if last_attempt_time is None else np.asarray(last_attempt_time, float).copy()
    star = _pick_kernel(graph, kernel)

    if star:
        leaves = np.arange(1, n, dtype=np.int64)
        cap = max(n - 1, 1)
        leaf_labels = label[1:]
    else:
        leaves = np.arange(n, dtype=np.int64)
        cap = max(n, 1)
        leaf_labels = label
    members = np.zeros((3, cap), dtype=np.int64)
    sizes = np.zeros(3, dtype=np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    for cls in range(3):
        vs = leaves[leaf_labels == cls]
        members[cls, :len(vs)] = vs
        pos[vs] = np.arange(len(vs))
        sizes[cls] = len(vs)

    m = graph.edge_count
    act = np.zeros(max(m, 1), dtype=np.int64)
    apos = np.full(max(m, 1), -1, dtype=np.int64)
    nact = np.zeros(1, dtype=np.int64)
    if not star and m:
        e = graph.edge_array
        la, lb = label[e[:, 0]], label[e[:, 1]]
        if spec.kind == ProcessKind.LABELED_CSIRS:
            ok_a, ok_b = la != K.I, lb != K.I
        else:
            ok_a, ok_b = la == K.S, lb == K.S
        want = np.flatnonzero(((la == K.I) & ok_b) | ((lb == K.I) & ok_a))
        act[:len(want)] = want
        apos[want] = np.arange(len(want))
        nact[0] = len(want)

    scal = np.zeros(4)
    scal[K.T_NOW] = time
    scal[K.MAX_I] = int((label == K.I).sum())
    scal[K.MAX_R] = int((label == K.R).sum())
    if rng is None:
        rng = replication_rng(seed, replication)
    return SimState(graph, spec, label, heal, att, rng, star,
                    members, sizes, pos, act, apos, nact, scal)


def init_state(graph: Graph, spec: ProcessSpec, initially_infected: Iterable[int],
               seed: int = 0, replication: int = 0, kernel: str = "auto",
               rng: Optional[np.random.Generator] = None) -> SimState:
    """Fresh state: listed vertices infected, all others susceptible, t = 0."""
    n = graph.vertex_count
    label = np.zeros(n, dtype=np.int8)
    for v in initially_infected:
        v = int(v)
        if not 0 <= v < n:
            raise ValueError(f"vertex {v} out of range for {n} vertices")
        label[v] = K.I
    return state_from_labels(graph, spec, label, seed, replication,
                             kernel=kernel, rng=rng)


def resistance(state: SimState, v: int, t: Optional[float] = None) -> float:
    """cSIRS resistance of ``v`` at time ``t`` (default: now)."""
    if t is None:
        t = state.time
    lh = state.last_heal_time[v]
    if math.isnan(lh):
        return 0.0
    if t < lh:
        raise ValueError("t precedes the last heal of v")
    return math.exp(-state.spec.rho_or_alpha * (t - lh))


def labeled_success_prob(t_h: float, t_i: float, alpha: float) -> float:
    """Success chance of an attempt at a recovered vertex in labeled cSIRS.

    ``t_h`` is the time since the vertex healed, ``t_i`` the time since the
    last attempt at it (equal to ``t_h`` if none).
    """
    if not 0 <= t_i <= t_h:
        raise ValueError("need 0 <= t_i <= t_h")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return -math.expm1(-alpha * (t_h - t_i))


def _attempt_slots(state: SimState) -> int:
    if not state.star:
        return int(state.nact[0])
    kind = state.spec.kind
    c = state.label[0]
    sz = state.sizes
    if c == K.I:
        return int(sz[K.S] + (sz[K.R] if kind == ProcessKind.LABELED_CSIRS else 0))
    if c == K.S or (c == K.R and kind == ProcessKind.LABELED_CSIRS):
        return int(sz[K.I])
    return 0


def total_rate(state: SimState) -> tuple[float, float, float]:
    """(heal, attempt, deimmunize) aggregate rates of the current state."""
    _, i, r = state.counts
    deim = state.spec.rho_or_alpha * r if state.spec.kind.has_recovered else 0.0
    return float(i), state.spec.lam * _attempt_slots(state), deim


def _advance(state: SimState, t_max: float, max_events: int, logs):
    g = state.graph
    sp = state.spec
    if state.star:
        return K.advance_star(int(sp.kind), sp.lam, sp.rho_or_alpha,
                              state.label, state.last_heal_time, state.last_attempt_time,
                              state.members, state.sizes, state.pos,
                              state.scal, state.rng, t_max, max_events, *logs)
    return K.advance_graph(int(sp.kind), sp.lam, sp.rho_or_alpha,
                           g.indptr, g.indices, g.adj_edge, g.edge_array,
                           state.label, state.last_heal_time, state.last_attempt_time,
                           state.members, state.sizes, state.pos,
                           state.act, state.apos, state.nact,
                           state.scal, state.rng, t_max, max_events, *logs)


def _new_logs(size: int):
    return (np.empty(size), np.empty(size, dtype=np.int8),
            np.empty(size, dtype=np.int64), np.empty(size, dtype=np.int64))


_EMPTY_LOGS = _new_logs(0)


def step(state: SimState) -> EventRecord:
    """Apply exactly one clock event and return it."""
    if state.extinct:
        raise InvalidStateError("no infected vertex left")
    logs = _new_logs(1)
    status, n = _advance(state, math.inf, 1, logs)
    t, k, s, src = logs[0][0], logs[1][0], logs[2][0], logs[3][0]
    return EventRecord(float(t), EventKind(int(k)), int(s), None if src < 0 else int(src))


def run(state: SimState, t_max: float, record_trajectory: bool = False) -> RunOutcome:
    """Step until extinction or until the next event would pass ``t_max``."""
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    n = state.graph.vertex_count
    initial = state.label.copy()
    chunks = []
    if state.extinct:
        status = K.EXTINCT
    elif record_trajectory:
        while True:
            logs = _new_logs(_LOG_CHUNK)
            status, k = _advance(state, t_max, _LOG_CHUNK, logs)
            chunks.append(tuple(a[:k] for a in logs))
            if status != K.RUNNING:
                break
    else:
        status, _ = _advance(state, t_max, _NO_LIMIT, _EMPTY_LOGS)
    censored = status == K.CENSORED
    traj = None
    if record_trajectory:
        end = np.array([state.time]), np.array([K.EV_CENSOR if censored else K.EV_EXTINCTION], np.int8), \
            np.array([-1], np.int64), np.array([-1], np.int64)
        cols = [np.concatenate([c[j] for c in chunks] + [end[j]]) for j in range(4)]
        traj = Trajectory(initial, *cols)
    max_r = int(state.scal[K.MAX_R])
    return RunOutcome(
        survival_time=state.time,
        censored=censored,
        event_count=state.event_count,
        max_infected=int(state.scal[K.MAX_I]),
        max_recovered=max_r,
        max_recovered_fraction=max_r / n if n else 0.0,
        trajectory=traj,
    )
