"""Initial infection specs: ``center``, ``all``, ``none``, ``vertices:0,3,9``, ``random:k``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph

__all__ = ["InitSpec"]


@dataclass(frozen=True)
class InitSpec:
    mode: str
    vertices: tuple[int, ...] = ()
    k: int = 0

    @classmethod
    def parse(cls, text: str) -> "InitSpec":
        text = text.strip()
        if text in ("center", "all", "none"):
            return cls(text)
        head, _, rest = text.partition(":")
        if head == "vertices":
            vs = tuple(int(x) for x in rest.split(",") if x.strip())
            return cls("vertices", vertices=vs)
        if head == "random":
            k = int(rest)
            if k < 0:
                raise ValueError("random:k needs k >= 0")
            return cls("random", k=k)
        raise ValueError(f"bad init spec {text!r}")

    def __str__(self) -> str:
        if self.mode == "vertices":
            return "vertices:" + ",".join(map(str, self.vertices))
        if self.mode == "random":
            return f"random:{self.k}"
        return self.mode

    @property
    def is_random(self) -> bool:
        return self.mode == "random"

    def resolve(self, graph: Graph, rng: np.random.Generator | None = None) -> np.ndarray:
        """Vertex ids to infect. ``random:k`` draws from ``rng``."""
        n = graph.vertex_count
        if self.mode == "center":
            vs = np.array([0] if n else [], dtype=np.int64)
        elif self.mode == "all":
            vs = np.arange(n, dtype=np.int64)
        elif self.mode == "none":
            vs = np.zeros(0, dtype=np.int64)
        elif self.mode == "vertices":
            vs = np.array(sorted(set(self.vertices)), dtype=np.int64)
        else:
            if self.k > n:
                raise ValueError(f"cannot pick {self.k} of {n} vertices")
            if rng is None:
                raise ValueError("random init needs an rng")
            vs = np.sort(rng.choice(n, size=self.k, replace=False)).astype(np.int64)
        if len(vs) and (vs.min() < 0 or vs.max() >= n):
            raise ValueError(f"init vertex out of range for {n} vertices")
        return vs
