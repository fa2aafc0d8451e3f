"""Difference-bound matrices.

Clock 0 is the constant-zero reference.  Entry ``(i, j)`` bounds
``x_i - x_j``.  Bounds are encoded as ints: ``2c + 1`` for ``<= c``,
``2c`` for ``< c``, and :data:`INF` for no bound, so that the usual integer
order is the order of bounds.
"""
from __future__ import annotations

INF = 1 << 62
LE_ZERO = 1


def le(c: int) -> int:
    return 2 * c + 1


def lt(c: int) -> int:
    return 2 * c


def add(a: int, b: int) -> int:
    if a >= INF or b >= INF:
        return INF
    return (((a >> 1) + (b >> 1)) << 1) | (a & b & 1)


def constant(b: int) -> int:
    return b >> 1


def is_strict(b: int) -> bool:
    return not b & 1


class Zone:
    __slots__ = ("dim", "m")

    def __init__(self, dim: int, m: list[int] | None = None):
        self.dim = dim
        self.m = [LE_ZERO] * (dim * dim) if m is None else m

    @classmethod
    def zero(cls, dim: int) -> "Zone":
        return cls(dim)

    def copy(self) -> "Zone":
        return Zone(self.dim, list(self.m))

    def __getitem__(self, ij: tuple[int, int]) -> int:
        return self.m[ij[0] * self.dim + ij[1]]

    def key(self) -> tuple:
        return tuple(self.m)

    def __eq__(self, other) -> bool:
        return isinstance(other, Zone) and self.m == other.m

    def __hash__(self):
        return hash(tuple(self.m))

    def is_empty(self) -> bool:
        d, m = self.dim, self.m
        return any(m[i * d + i] < LE_ZERO for i in range(d))

    def canonicalize(self) -> "Zone":
        d, m = self.dim, self.m
        for k in range(d):
            for i in range(d):
                ik = m[i * d + k]
                if ik >= INF:
                    continue
                row = i * d
                for j in range(d):
                    kj = m[k * d + j]
                    if kj >= INF:
                        continue
                    s = add(ik, kj)
                    if s < m[row + j]:
                        m[row + j] = s
        return self

    def constrain(self, i: int, j: int, b: int) -> bool:
        """Intersect with ``x_i - x_j (<|<=) c`` keeping canonical form.
        Returns False when the zone becomes empty."""
        d, m = self.dim, self.m
        if b >= m[i * d + j]:
            return True
        if add(m[j * d + i], b) < LE_ZERO:
            m[0] = lt(0)
            return False
        m[i * d + j] = b
        col_i = [m[k * d + i] for k in range(d)]
        row_j = m[j * d:(j + 1) * d]
        for k in range(d):
            ki = col_i[k]
            if ki >= INF:
                continue
            via = add(ki, b)
            row = k * d
            for l in range(d):
                s = add(via, row_j[l])
                if s < m[row + l]:
                    m[row + l] = s
        return True

    def up(self) -> "Zone":
        d, m = self.dim, self.m
        for i in range(1, d):
            m[i * d] = INF
        return self

    def reset(self, x: int) -> "Zone":
        d, m = self.dim, self.m
        for j in range(d):
            m[x * d + j] = m[j]
            m[j * d + x] = m[j * d]
        m[x * d + x] = LE_ZERO
        return self

    def includes(self, other: "Zone") -> bool:
        return all(a >= b for a, b in zip(self.m, other.m))

    def extrapolate(self, maxima: list[float]) -> "Zone":
        """Classical maximal-bounds extrapolation; ``maxima[0]`` must be 0 and
        an infinite maximum disables extrapolation of that clock."""
        d, m = self.dim, self.m
        changed = False
        for i in range(d):
            mi = maxima[i]
            for j in range(d):
                if i == j:
                    continue
                b = m[i * d + j]
                if b >= INF:
                    continue
                if mi != float("inf") and b > le(int(mi)):
                    m[i * d + j] = INF
                    changed = True
                else:
                    mj = maxima[j]
                    if mj != float("inf") and b < lt(-int(mj)):
                        m[i * d + j] = lt(-int(mj))
                        changed = True
        if changed:
            self.canonicalize()
        return self

    def upper(self, x: int) -> int:
        return self.m[x * self.dim]

    def lower(self, x: int) -> int:
        return self.m[x]

    def bounds(self, x: int) -> tuple[int, float]:
        """(min, max) of clock ``x``; max is ``inf`` when unbounded.  Assumes
        closed bounds (no extrapolation on ``x``)."""
        lo = -constant(self.m[x])
        up = self.m[x * self.dim]
        return lo, (float("inf") if up >= INF else constant(up))

    def sample(self) -> list[int]:
        """An integer point of a non-empty canonical zone with closed bounds."""
        d = self.dim
        z = self.copy()
        point = [0] * d
        for x in range(1, d):
            lo = -constant(z.m[x])
            if is_strict(z.m[x]):
                lo += 1
            point[x] = lo
            z.constrain(x, 0, le(lo))
            z.constrain(0, x, le(-lo))
        return point

    def __repr__(self) -> str:
        def show(b):
            if b >= INF:
                return "inf"
            return ("<=" if b & 1 else "<") + str(constant(b))
        rows = [" ".join(f"{show(self.m[i * self.dim + j]):>6}" for j in range(self.dim)) for i in range(self.dim)]
        return "Zone(\n  " + "\n  ".join(rows) + ")"
