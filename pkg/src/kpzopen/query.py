"""Laplace-transform queries shared by the finite-N and limiting evaluators."""
from __future__ import annotations

from dataclasses import dataclass


class NestingError(ValueError):
    pass


class QueryError(ValueError):
    pass


@dataclass(frozen=True)
class LaplaceQuery:
    """Locations 0 < X_1 < ... < X_d <= 1 and Laplace variables c_1..c_d >= 0."""
    X: tuple
    c: tuple

    def __post_init__(self):
        X = tuple(float(x) for x in self.X)
        c = tuple(float(v) for v in self.c)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "c", c)
        if len(X) != len(c):
            raise QueryError("X and c must have the same length")
        prev = 0.0
        for x in X:
            if not (prev < x <= 1.0):
                raise QueryError(f"locations must satisfy 0 < X_1 < ... < X_d <= 1, got {X}")
            prev = x
        if any(v < 0 for v in c):
            raise QueryError("Laplace variables must be >= 0")

    @property
    def d(self) -> int:
        return len(self.X)

    @property
    def s(self) -> tuple:
        """s_k = c_k + ... + c_d (k = 1..d)."""
        out = []
        acc = 0.0
        for v in reversed(self.c):
            acc += v
            out.append(acc)
        return tuple(reversed(out))

    def merged(self) -> "LaplaceQuery":
        """Drop points with c_k = 0; they do not change the functional."""
        keep = [(x, v) for x, v in zip(self.X, self.c) if v != 0]
        return LaplaceQuery(tuple(x for x, _ in keep), tuple(v for _, v in keep))
