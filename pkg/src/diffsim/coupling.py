"""Shared-clock couplings between pairs of processes.

``SIS_DOMINATES_CSIRS``: SIS and cSIRS see the same heal and edge clock
triggers; only cSIRS draws acceptance uniforms. The infected set of the
cSIRS side must stay inside the SIS one.

``CSIRS_EQ_LABELED``: labeled cSIRS is simulated as the primary process and
the cSIRS side follows by relabeling R as S. The cSIRS side keeps its own
labels and heal times, and every acceptance is also scored against the
cSIRS acceptance probability ``1 - exp(-alpha * t_h)``, which gives a
calibration statistic for the decomposition the relabeling relies on.

Both checks are hard: the first violation stops the run.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from numba import njit

from .graph import Graph
from .initspec import InitSpec
from .process import EventKind, EventRecord, replication_rng
from .process._kernels import (
    EV_FAILED, EV_HEAL, EV_INFECT, I, R, S,
    csirs_resistance, exp_wait, labeled_prob, set_move, uniform_index,
)

__all__ = [
    "CouplingPair",
    "CoupledOutcome",
    "CoupledBatch",
    "run_coupled_sis_csirs",
    "run_coupled_csirs_labeled",
    "run_coupled_batch",
]

CAL_BINS = 10


class CouplingPair(enum.Enum):
    SIS_DOMINATES_CSIRS = "sis-csirs"
    CSIRS_EQ_LABELED = "csirs-labeled"


@dataclass
class CoupledOutcome:
    pair: CouplingPair
    violations: int
    first_violation: Optional[EventRecord]
    survival_time_a: float
    survival_time_b: float
    censored_a: bool
    censored_b: bool
    event_count: int = 0
    # csirs-labeled only: attempts scored against 1 - exp(-alpha t_h)
    calibration: Optional[np.ndarray] = field(default=None, repr=False)


# --- SIS vs cSIRS -----------------------------------------------------------

@njit(cache=True, inline="always")
def _disc(lab, a, b):
    # exactly one endpoint infected; the other susceptible
    return (lab[a] == I and lab[b] == S) or (lab[b] == I and lab[a] == S)


@njit(cache=True)
def _refresh_pair(labA, labB, v, indptr, indices, adj_edge, edges, act, apos, nact):
    for k in range(indptr[v], indptr[v + 1]):
        e = adj_edge[k]
        a = edges[e, 0]
        b = edges[e, 1]
        want = _disc(labA, a, b) or _disc(labB, a, b)
        if want:
            if apos[e] < 0:
                act[nact] = e
                apos[e] = nact
                nact += 1
        elif apos[e] >= 0:
            i = apos[e]
            last = act[nact - 1]
            act[i] = last
            apos[last] = i
            apos[e] = -1
            nact -= 1
    return nact


@njit(cache=True)
def _set_flag(members, size_box, pos, v, on):
    # membership of v in a single index set
    if on and pos[v] < 0:
        members[size_box[0]] = v
        pos[v] = size_box[0]
        size_box[0] += 1
    elif not on and pos[v] >= 0:
        i = pos[v]
        last = members[size_box[0] - 1]
        members[i] = last
        pos[last] = i
        pos[v] = -1
        size_box[0] -= 1


@njit(cache=True, nogil=True)
def _couple_sis_csirs(lam, alpha, indptr, indices, adj_edge, edges, labA, labB, healB,
                      rng, t_max, out, viol):
    n = labA.shape[0]
    m = edges.shape[0]
    umem = np.empty(n, np.int64)
    upos = np.full(n, -1, np.int64)
    usize = np.zeros(1, np.int64)
    act = np.empty(max(m, 1), np.int64)
    apos = np.full(max(m, 1), -1, np.int64)
    nact = 0
    nA = 0
    nB = 0
    for v in range(n):
        if labA[v] == I or labB[v] == I:
            _set_flag(umem, usize, upos, v, True)
        nA += labA[v] == I
        nB += labB[v] == I
    for e in range(m):
        if _disc(labA, edges[e, 0], edges[e, 1]) or _disc(labB, edges[e, 0], edges[e, 1]):
            act[nact] = e
            apos[e] = nact
            nact += 1
    t = 0.0
    tA = 0.0 if nA == 0 else -1.0
    tB = 0.0 if nB == 0 else -1.0
    events = 0
    while usize[0] > 0:
        nu = usize[0]
        heal = float(nu)
        att = lam * nact
        total = heal + att
        w = exp_wait(rng, total)
        if t + w > t_max:
            t = t_max
            break
        t += w
        events += 1
        x = rng.random() * total
        if x < heal:
            v = umem[uniform_index(rng, nu)]
            if labA[v] == I:
                labA[v] = S
                nA -= 1
            if labB[v] == I:
                labB[v] = S
                healB[v] = t
                nB -= 1
            _set_flag(umem, usize, upos, v, False)
            nact = _refresh_pair(labA, labB, v, indptr, indices, adj_edge, edges, act, apos, nact)
        else:
            e = act[uniform_index(rng, nact)]
            a = edges[e, 0]
            b = edges[e, 1]
            tgt_a = -1
            if _disc(labA, a, b):
                tgt_a = b if labA[a] == I else a
                labA[tgt_a] = I
                nA += 1
            tgt_b = -1
            src_b = -1
            if _disc(labB, a, b):
                if labB[a] == I:
                    tgt_b, src_b = b, a
                else:
                    tgt_b, src_b = a, b
                r = csirs_resistance(alpha, t, healB[tgt_b])
                if r == 0.0 or rng.random() >= r:
                    labB[tgt_b] = I
                    nB += 1
            for v in (tgt_a, tgt_b):
                if v >= 0:
                    _set_flag(umem, usize, upos, v, labA[v] == I or labB[v] == I)
                    nact = _refresh_pair(labA, labB, v, indptr, indices, adj_edge, edges, act, apos, nact)
            for v in (tgt_a, tgt_b):
                if v >= 0 and labB[v] == I and labA[v] != I:
                    viol[0] = t
                    viol[1] = EV_INFECT
                    viol[2] = v
                    viol[3] = src_b
                    out[0] = t
                    out[1] = t
                    out[4] = events
                    return 1
        if nA == 0 and tA < 0:
            tA = t
        if nB == 0 and tB < 0:
            tB = t
    out[0] = tA if tA >= 0 else t
    out[1] = tB if tB >= 0 else t
    out[2] = 1.0 if tA < 0 else 0.0
    out[3] = 1.0 if tB < 0 else 0.0
    out[4] = events
    return 0


# --- labeled cSIRS vs cSIRS ---------------------------------------------------

@njit(cache=True, nogil=True)
def _couple_labeled_csirs(lam, alpha, indptr, indices, adj_edge, edges,
                          labL, healL, attL, labC, healC, rng, t_max, out, viol, cal):
    n = labL.shape[0]
    m = edges.shape[0]
    members = np.empty((3, max(n, 1)), np.int64)
    sizes = np.zeros(3, np.int64)
    pos = np.empty(n, np.int64)
    for v in range(n):
        c = labL[v]
        members[c, sizes[c]] = v
        pos[v] = sizes[c]
        sizes[c] += 1
    act = np.empty(max(m, 1), np.int64)
    apos = np.full(max(m, 1), -1, np.int64)
    nact = 0
    for e in range(m):
        a = edges[e, 0]
        b = edges[e, 1]
        if (labL[a] == I) != (labL[b] == I):
            act[nact] = e
            apos[e] = nact
            nact += 1
    t = 0.0
    events = 0
    censored = False
    while sizes[I] > 0:
        ni = sizes[I]
        heal = float(ni)
        deim = alpha * sizes[R]
        att = lam * nact
        total = heal + deim + att
        w = exp_wait(rng, total)
        if t + w > t_max:
            t = t_max
            censored = True
            break
        t += w
        events += 1
        x = rng.random() * total
        changed = -1
        kind = EV_HEAL
        src = -1
        if x < heal:
            v = members[I, uniform_index(rng, ni)]
            set_move(members, sizes, pos, v, I, R)
            labL[v] = R
            healL[v] = t
            attL[v] = np.nan
            if labC[v] == I:
                labC[v] = S
                healC[v] = t
            changed = v
        elif x < heal + deim:
            v = members[R, uniform_index(rng, sizes[R])]
            set_move(members, sizes, pos, v, R, S)
            labL[v] = S
            # relabeling R -> S is invisible on the cSIRS side
            continue
        else:
            e = act[uniform_index(rng, nact)]
            a = edges[e, 0]
            b = edges[e, 1]
            if labL[a] == I:
                src, v = a, b
            else:
                src, v = b, a
            if labL[v] == S:
                ok = True
            else:
                p = labeled_prob(alpha, healL[v], attL[v])
                attL[v] = t
                ok = p > 0.0 and rng.random() < p
            p_c = 1.0 - csirs_resistance(alpha, t, healC[v])
            k = min(int(p_c * cal.shape[0]), cal.shape[0] - 1)
            cal[k, 0] += 1.0
            cal[k, 1] += 1.0 if ok else 0.0
            cal[k, 2] += p_c
            cal[k, 3] += p_c * (1.0 - p_c)
            kind = EV_INFECT if ok else EV_FAILED
            if ok:
                set_move(members, sizes, pos, v, labL[v], I)
                labL[v] = I
                if labC[v] == I:
                    kind = -1
                labC[v] = I
                if p_c == 0.0:
                    kind = -1  # cSIRS forbids this acceptance
            changed = v
        if changed >= 0:
            v = changed
            for kk in range(indptr[v], indptr[v + 1]):
                e = adj_edge[kk]
                want = (labL[edges[e, 0]] == I) != (labL[edges[e, 1]] == I)
                if want and apos[e] < 0:
                    act[nact] = e
                    apos[e] = nact
                    nact += 1
                elif not want and apos[e] >= 0:
                    i = apos[e]
                    last = act[nact - 1]
                    act[i] = last
                    apos[last] = i
                    apos[e] = -1
                    nact -= 1
            if kind < 0 or (labL[v] == I) != (labC[v] == I):
                viol[0] = t
                viol[1] = EV_INFECT if kind < 0 else kind
                viol[2] = v
                viol[3] = src
                out[0] = t
                out[1] = t
                out[4] = events
                return 1
    out[0] = t
    out[1] = t
    out[2] = 1.0 if censored else 0.0
    out[3] = 1.0 if censored else 0.0
    # cSIRS side extinct at exactly the same moment only if it agrees
    for v in range(n):
        if labC[v] == I and not censored:
            out[1] = np.inf
    out[4] = events
    return 0


def _violation_record(viol) -> EventRecord:
    src = int(viol[3])
    return EventRecord(float(viol[0]), EventKind(int(viol[1])), int(viol[2]), None if src < 0 else src)


def _initial(graph: Graph, init: Iterable[int]) -> np.ndarray:
    lab = np.zeros(graph.vertex_count, dtype=np.int8)
    for v in init:
        v = int(v)
        if not 0 <= v < graph.vertex_count:
            raise ValueError(f"vertex {v} out of range")
        lab[v] = I
    return lab


def run_coupled_sis_csirs(graph: Graph, lam: float, alpha: float, init: Iterable[int],
                          seed: int = 0, t_max: float = math.inf, replication: int = 0,
                          rng: Optional[np.random.Generator] = None) -> CoupledOutcome:
    """One shared-clock run of SIS (side a) and cSIRS (side b)."""
    if rng is None:
        rng = replication_rng(seed, replication)
    labA = _initial(graph, init)
    labB = labA.copy()
    healB = np.full(graph.vertex_count, np.nan)
    out = np.zeros(5)
    viol = np.zeros(4)
    bad = _couple_sis_csirs(float(lam), float(alpha), graph.indptr, graph.indices, graph.adj_edge,
                            graph.edge_array, labA, labB, healB, rng, float(t_max), out, viol)
    return CoupledOutcome(
        CouplingPair.SIS_DOMINATES_CSIRS, int(bad), _violation_record(viol) if bad else None,
        float(out[0]), float(out[1]), bool(out[2]), bool(out[3]), int(out[4]),
    )


def run_coupled_csirs_labeled(graph: Graph, lam: float, alpha: float, init: Iterable[int],
                              seed: int = 0, t_max: float = math.inf, replication: int = 0,
                              rng: Optional[np.random.Generator] = None) -> CoupledOutcome:
    """One coupled run of cSIRS (side a) and labeled cSIRS (side b).

    ``calibration`` has one row per bin of the cSIRS acceptance probability
    with columns (attempts, successes, sum of p, sum of p(1-p)).
    """
    if rng is None:
        rng = replication_rng(seed, replication)
    n = graph.vertex_count
    labL = _initial(graph, init)
    labC = labL.copy()
    healL = np.full(n, np.nan)
    attL = np.full(n, np.nan)
    healC = np.full(n, np.nan)
    out = np.zeros(5)
    viol = np.zeros(4)
    cal = np.zeros((CAL_BINS, 4))
    bad = _couple_labeled_csirs(float(lam), float(alpha), graph.indptr, graph.indices,
                                graph.adj_edge, graph.edge_array, labL, healL, attL,
                                labC, healC, rng, float(t_max), out, viol, cal)
    viol_count = int(bad)
    first = _violation_record(viol) if bad else None
    if not bad and not math.isfinite(out[1]):
        viol_count = 1
        first = EventRecord(float(out[0]), EventKind.EXTINCTION, -1)
    return CoupledOutcome(
        CouplingPair.CSIRS_EQ_LABELED, viol_count, first,
        float(out[1]), float(out[0]), bool(out[3]), bool(out[2]), int(out[4]), cal,
    )


@dataclass
class CoupledBatch:
    pair: CouplingPair
    reps: int
    violations: int
    violating_runs: int
    first_violation: Optional[EventRecord]
    first_violation_rep: Optional[int]
    survival_a: np.ndarray
    survival_b: np.ndarray
    censored_a: np.ndarray
    censored_b: np.ndarray
    calibration: Optional[np.ndarray] = None

    @property
    def identical_survival(self) -> bool:
        return bool(np.array_equal(self.survival_a, self.survival_b))

    def calibration_z(self) -> float:
        """Standardized excess of accepted attempts over the cSIRS prediction."""
        if self.calibration is None:
            raise ValueError("no calibration data for this pair")
        c = self.calibration.sum(axis=0)
        return float((c[1] - c[2]) / math.sqrt(c[3])) if c[3] > 0 else 0.0

    def to_dict(self) -> dict:
        d = {
            "pair": self.pair.value,
            "reps": self.reps,
            "violations": self.violations,
            "violating_runs": self.violating_runs,
            "first_violation": None if self.first_violation is None else {
                "replication": self.first_violation_rep,
                "time": self.first_violation.time,
                "kind": self.first_violation.kind.name,
                "subject": self.first_violation.subject,
                "source": self.first_violation.source,
            },
            "mean_survival_a": float(self.survival_a.mean()) if self.reps else 0.0,
            "mean_survival_b": float(self.survival_b.mean()) if self.reps else 0.0,
            "censored_a": int(self.censored_a.sum()),
            "censored_b": int(self.censored_b.sum()),
            "identical_survival": self.identical_survival,
        }
        if self.calibration is not None:
            d["calibration_z"] = self.calibration_z()
        return d


def run_coupled_batch(pair: CouplingPair, graph: Graph, lam: float, alpha: float,
                      init: InitSpec | Iterable[int], reps: int, seed: int,
                      t_max: float = math.inf, stop_on_violation: bool = True) -> CoupledBatch:
    """Independent coupled runs on streams (seed, 0..reps-1)."""
    pair = CouplingPair(pair)
    runner = run_coupled_sis_csirs if pair is CouplingPair.SIS_DOMINATES_CSIRS else run_coupled_csirs_labeled
    fixed = None if isinstance(init, InitSpec) else list(init)
    sa = np.zeros(reps)
    sb = np.zeros(reps)
    ca = np.zeros(reps, dtype=bool)
    cb = np.zeros(reps, dtype=bool)
    cal = np.zeros((CAL_BINS, 4)) if pair is CouplingPair.CSIRS_EQ_LABELED else None
    violations = 0
    violating = 0
    first = first_rep = None
    done = reps
    for k in range(reps):
        rng = replication_rng(seed, k)
        vs = init.resolve(graph, rng) if fixed is None else fixed
        o = runner(graph, lam, alpha, vs, t_max=t_max, rng=rng)
        sa[k], sb[k], ca[k], cb[k] = o.survival_time_a, o.survival_time_b, o.censored_a, o.censored_b
        if cal is not None:
            cal += o.calibration
        if o.violations:
            violations += o.violations
            violating += 1
            if first is None:
                first, first_rep = o.first_violation, k
            if stop_on_violation:
                done = k + 1
                break
    return CoupledBatch(pair, done, violations, violating, first, first_rep,
                        sa[:done], sb[:done], ca[:done], cb[:done], cal)
