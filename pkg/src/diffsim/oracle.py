"""Exact expected survival times and closed-form helpers.

Expected absorption times of the Markovian processes (SIS, SIRS) come from
a sparse linear solve over the transient states of the chain: for each
transient state ``x``

    out(x) * h(x) - sum_y rate(x, y) * h(y) = 1,

with ``h = 0`` on absorbing states (no infected vertex). On stars the
leaves are exchangeable, so the chain lumps to (center label, s, i, r).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .graph import Graph
from .process import ProcessKind, ProcessSpec

__all__ = [
    "LumpedStarState",
    "ExactResult",
    "OracleError",
    "BudgetExceeded",
    "sis_star_expected_survival",
    "sirs_star_expected_survival",
    "generic_expected_survival",
    "gamblers_ruin_probs",
    "gamma_ratio_product",
]

S, I, R = 0, 1, 2
RESIDUAL_TOL = 1e-10


class OracleError(ArithmeticError):
    pass


class BudgetExceeded(MemoryError):
    pass


@dataclass(frozen=True)
class LumpedStarState:
    center: str
    s: int
    i: int
    r: int = 0

    @classmethod
    def center_infected(cls, leaves: int) -> "LumpedStarState":
        return cls("I", leaves, 0, 0)

    def validate(self, leaves: int, allow_r: bool):
        if self.center not in ("S", "I", "R"):
            raise ValueError("center must be S, I or R")
        if min(self.s, self.i, self.r) < 0 or self.s + self.i + self.r != leaves:
            raise ValueError("s + i + r must equal the number of leaves")
        if not allow_r and (self.r or self.center == "R"):
            raise ValueError("SIS has no recovered state")

    @property
    def absorbed(self) -> bool:
        return self.center != "I" and self.i == 0


@dataclass(frozen=True)
class ExactResult:
    expected_survival: float
    state_count: int
    residual: float

    def to_dict(self) -> dict:
        return {"expected_survival": self.expected_survival,
                "state_count": self.state_count, "residual": self.residual}


def _solve_absorption(n_states: int, rows, cols, rates, transient: np.ndarray) -> tuple[np.ndarray, float]:
    """Expected hitting time of the absorbing set for every state.

    ``rows/cols/rates`` list the off-diagonal transitions; ``transient``
    is a boolean mask.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    rates = np.asarray(rates, dtype=float)
    idx = np.full(n_states, -1, dtype=np.int64)
    tr = np.flatnonzero(transient)
    idx[tr] = np.arange(len(tr))
    h = np.zeros(n_states)
    if len(tr) == 0:
        return h, 0.0
    keep = transient[rows]
    rows, cols, rates = rows[keep], cols[keep], rates[keep]
    out = np.bincount(idx[rows], weights=rates, minlength=len(tr))
    if (out <= 0).any():
        raise OracleError("transient state without exit: absorption time is infinite")
    inner = transient[cols]
    A = sp.csr_matrix(
        (np.concatenate([out, -rates[inner]]),
         (np.concatenate([np.arange(len(tr)), idx[rows[inner]]]),
          np.concatenate([np.arange(len(tr)), idx[cols[inner]]]))),
        shape=(len(tr), len(tr)),
    )
    b = np.ones(len(tr))
    x = spsolve(A.tocsc(), b)
    if not np.all(np.isfinite(x)):
        raise OracleError("singular absorption system")

    def rel_residual(x):
        res = np.abs(A @ x - b).max()
        return res / (abs(A).sum(axis=1).max() * np.abs(x).max() + 1.0)

    resid = rel_residual(x)
    for _ in range(5):
        if resid < RESIDUAL_TOL:
            break
        x = x + spsolve(A.tocsc(), b - A @ x)
        resid = rel_residual(x)
    if resid >= RESIDUAL_TOL:
        raise OracleError(f"residual {resid:.3g} above tolerance")
    h[tr] = x
    return h, float(resid)


def _star_chain(leaves: int, lam: float, rho: Optional[float]):
    """States and transitions of the lumped star chain.

    ``rho=None`` gives SIS (no recovered state).
    """
    centers = ("S", "I") if rho is None else ("S", "I", "R")
    states = []
    for c in centers:
        for i in range(leaves + 1):
            if rho is None:
                states.append((c, leaves - i, i, 0))
            else:
                for r in range(leaves - i + 1):
                    states.append((c, leaves - i - r, i, r))
    index = {st: k for k, st in enumerate(states)}
    heal_to = "S" if rho is None else "R"
    rows, cols, rates = [], [], []

    def add(a, b, rate):
        if rate > 0:
            rows.append(index[a])
            cols.append(index[b])
            rates.append(rate)

    for st in states:
        c, s, i, r = st
        if i:
            add(st, (c, s + 1, i - 1, 0) if rho is None else (c, s, i - 1, r + 1), i)
        if rho is not None and r:
            add(st, (c, s + 1, i, r - 1), rho * r)
        if c == "I":
            add(st, (heal_to, s, i, r), 1.0)
            if s:
                add(st, (c, s - 1, i + 1, r), lam * s)
        elif c == "S":
            if i:
                add(st, ("I", s, i, r), lam * i)
        else:
            add(st, ("S", s, i, r), rho)
    transient = np.array([c == "I" or i > 0 for c, s, i, r in states])
    return states, index, rows, cols, rates, transient


def sis_star_expected_survival(leaves: int, lam: float,
                               init: Optional[LumpedStarState] = None) -> ExactResult:
    """Exact E[T] of SIS on a star; default start is an infected center."""
    if leaves < 1:
        raise ValueError("leaves must be >= 1")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    init = init or LumpedStarState.center_infected(leaves)
    init.validate(leaves, allow_r=False)
    states, index, rows, cols, rates, transient = _star_chain(leaves, lam, None)
    h, resid = _solve_absorption(len(states), rows, cols, rates, transient)
    return ExactResult(float(h[index[(init.center, init.s, init.i, 0)]]), len(states), resid)


def sirs_star_expected_survival(leaves: int, lam: float, rho: float,
                                init: Optional[LumpedStarState] = None,
                                max_leaves: int = 200) -> ExactResult:
    """Exact E[T] of SIRS on a star over (center, s, i, r)."""
    if leaves < 1:
        raise ValueError("leaves must be >= 1")
    if lam < 0 or rho <= 0:
        raise ValueError("need lambda >= 0 and rho > 0")
    if leaves > max_leaves:
        raise BudgetExceeded(f"{leaves} leaves exceeds the budget of {max_leaves}")
    init = init or LumpedStarState.center_infected(leaves)
    init.validate(leaves, allow_r=True)
    states, index, rows, cols, rates, transient = _star_chain(leaves, lam, rho)
    h, resid = _solve_absorption(len(states), rows, cols, rates, transient)
    return ExactResult(float(h[index[(init.center, init.s, init.i, init.r)]]), len(states), resid)


def generic_expected_survival(graph: Graph, spec: ProcessSpec, init: Iterable[int],
                              max_vertices: Optional[int] = None) -> ExactResult:
    """Exact E[T] over the full labeled state space (2^n or 3^n states)."""
    kind = spec.kind
    if kind not in (ProcessKind.SIS, ProcessKind.SIRS):
        raise ValueError("exact oracle exists only for SIS and SIRS")
    n = graph.vertex_count
    base = 2 if kind == ProcessKind.SIS else 3
    if max_vertices is None:
        max_vertices = 12 if base == 2 else 8
    if n > max_vertices:
        raise BudgetExceeded(f"{n} vertices exceeds the budget of {max_vertices}")
    init = sorted(set(int(v) for v in init))
    if any(not 0 <= v < n for v in init):
        raise ValueError("initial vertex out of range")
    lam, rho = spec.lam, spec.rho_or_alpha
    weights = base ** np.arange(n)
    n_states = base ** n
    heal_to = S if base == 2 else R
    rows, cols, rates = [], [], []
    transient = np.zeros(n_states, dtype=bool)
    for code, labels in enumerate(itertools.product(range(base), repeat=n)):
        labels = labels[::-1]  # vertex 0 is the least significant digit
        if I not in labels:
            continue
        transient[code] = True
        for v, lab in enumerate(labels):
            w = int(weights[v])
            if lab == I:
                rows.append(code)
                cols.append(code + (heal_to - I) * w)
                rates.append(1.0)
            elif lab == R:
                rows.append(code)
                cols.append(code - R * w)
                rates.append(rho)
        if lam > 0:
            for u, v in graph.edges:
                lu, lv = labels[u], labels[v]
                if lu == I and lv == S:
                    tgt = v
                elif lv == I and lu == S:
                    tgt = u
                else:
                    continue
                rows.append(code)
                cols.append(code + I * int(weights[tgt]))
                rates.append(lam)
    h, resid = _solve_absorption(n_states, rows, cols, rates, transient)
    code0 = int(sum(I * int(weights[v]) for v in init))
    return ExactResult(float(h[code0]), n_states, resid)


def _one_minus_pow_ratio(a: int, b: int, log_x: float) -> float:
    """(1 - x**a) / (1 - x**b) without overflow, for b > 0 and x != 1."""
    if log_x < 0:
        return math.expm1(a * log_x) / math.expm1(b * log_x)
    # x > 1: factor out x**b
    return math.exp((a - b) * log_x) * (-math.expm1(-a * log_x)) / (-math.expm1(-b * log_x))


def gamblers_ruin_probs(p: float, lower: int, upper: int, start: int) -> tuple[float, float]:
    """Probabilities that a +-1 walk with up-probability ``p`` from ``start``
    hits ``lower`` / ``upper`` first.

    ``p = 1/2`` returns the linear limit.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if not (lower <= start <= upper and lower < upper):
        raise ValueError("need lower <= start <= upper and lower < upper")
    span = upper - lower
    if p == 0.5:
        up = (start - lower) / span
        return 1.0 - up, up
    q = 1.0 - p
    log_pq = math.log(p / q)
    # first formula: (1 - (p/q)^(u-P0)) / (1 - (p/q)^(u-l)); second with q/p
    prob_lower = _one_minus_pow_ratio(upper - start, span, log_pq)
    prob_upper = _one_minus_pow_ratio(start - lower, span, -log_pq)
    return prob_lower, prob_upper


def gamma_ratio_product(m: int, n: int, c: float) -> tuple[float, float]:
    """prod_{i=m}^{n} i/(i+c) and its scale (m/n)**c.

    The product is summed in log space in chunks, so ``n`` up to 1e7 is
    fine. ``n = m - 1`` is the empty product.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if n < m - 1:
        raise ValueError("need n >= m - 1")
    if c <= 0:
        raise ValueError("c must be positive")
    partial = []
    chunk = 1 << 18
    for lo in range(m, n + 1, chunk):
        i = np.arange(lo, min(lo + chunk, n + 1), dtype=float)
        partial.append(math.fsum(np.log1p(-c / (i + c))))
    exact = math.exp(math.fsum(partial))
    asymptotic = (m / n) ** c if n > 0 else math.inf
    return exact, asymptotic
