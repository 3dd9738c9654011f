"""Exact event-driven simulation of SIS, SIRS, cSIRS and labeled cSIRS."""

from .core import (
    EventKind,
    EventRecord,
    InvalidStateError,
    ProcessKind,
    ProcessSpec,
    RunOutcome,
    SimState,
    Trajectory,
    init_state,
    labeled_success_prob,
    replication_rng,
    resistance,
    run,
    state_from_labels,
    step,
    total_rate,
)

__all__ = [
    "EventKind",
    "EventRecord",
    "InvalidStateError",
    "ProcessKind",
    "ProcessSpec",
    "RunOutcome",
    "SimState",
    "Trajectory",
    "init_state",
    "labeled_success_prob",
    "replication_rng",
    "resistance",
    "run",
    "state_from_labels",
    "step",
    "total_rate",
]
