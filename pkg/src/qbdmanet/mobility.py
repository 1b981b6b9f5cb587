"""Mobility models. Each produces node cells for a block of consecutive slots."""

from __future__ import annotations

import numpy as np

from .params import MOBILITY_MODELS


class Mobility:
    name = ""

    def __init__(self, n: int, m: int, rng: np.random.Generator):
        self.n = n
        self.m = m

    def advance(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Cells (count, n) occupied in the next ``count`` slots."""
        raise NotImplementedError


class IidMobility(Mobility):
    """Every slot each node picks one of the m^2 cells uniformly."""

    name = "iid"

    def advance(self, rng, count):
        return rng.integers(0, self.m * self.m, size=(count, self.n))


class RandomWalkMobility(Mobility):
    """Every slot each node moves to one of its 9 neighbouring cells (itself included)."""

    name = "random_walk"

    def __init__(self, n, m, rng):
        super().__init__(n, m, rng)
        self.cx = rng.integers(0, m, size=n)
        self.cy = rng.integers(0, m, size=n)

    def advance(self, rng, count):
        step = rng.integers(0, 9, size=(count, self.n))
        cx = (self.cx + np.cumsum(step // 3 - 1, axis=0)) % self.m
        cy = (self.cy + np.cumsum(step % 3 - 1, axis=0)) % self.m
        self.cx, self.cy = cx[-1], cy[-1]
        return cx * self.m + cy


class RandomWaypointMobility(Mobility):
    """Every slot each node shifts by (x, y), x and y uniform on [1/m, 3/m), on the unit torus."""

    name = "random_waypoint"

    def __init__(self, n, m, rng):
        super().__init__(n, m, rng)
        self.pos = rng.random((n, 2))
        self.trace: np.ndarray | None = None

    def advance(self, rng, count):
        shift = rng.uniform(1.0 / self.m, 3.0 / self.m, size=(count, self.n, 2))
        pos = (self.pos + np.cumsum(shift, axis=0)) % 1.0
        self.pos = pos[-1]
        self.trace = pos
        idx = np.minimum((pos * self.m).astype(np.int64), self.m - 1)
        return idx[..., 0] * self.m + idx[..., 1]


_MODELS = {cls.name: cls for cls in (IidMobility, RandomWalkMobility, RandomWaypointMobility)}
assert set(_MODELS) == set(MOBILITY_MODELS)


def make_mobility(name: str, n: int, m: int, rng: np.random.Generator) -> Mobility:
    try:
        cls = _MODELS[name]
    except KeyError:
        raise ValueError(f"unknown mobility model {name!r}; expected one of {MOBILITY_MODELS}") from None
    return cls(n, m, rng)
