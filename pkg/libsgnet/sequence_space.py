"""Nonnegative bounded sequences with exact finite representations.

A `LinfVector` is either finite (an explicit list of components) or eventually
periodic (a prefix followed by an endlessly repeated block). Both forms have
finitely many distinct values, so norms, order comparisons and linear
combinations are computed exactly from the stored blocks.
"""

import dataclasses
import math
from typing import Iterable, Tuple

import numpy as np

__all__ = ["LinfVector",
           "sup_norm", "inf_component",
           "partial_leq", "affine_combine", "scale",
           "canonicalize", "window",
           "max_difference", "max_ratio"]


def _as_tuple(values: Iterable[float]) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclasses.dataclass(frozen=True, eq=False)
class LinfVector:
    """Element of the positive cone of l-infinity.

    Use the `finite`, `periodic`, `ones`, `constant` and `zeros` constructors
    rather than the raw initializer, they canonicalize periodic vectors.

    Attributes:
        prefix (Tuple[float, ...]): Leading components. For a finite vector
            these are all of its components.
        block (Tuple[float, ...]): Repeated block. Empty for finite vectors.
    """
    prefix: Tuple[float, ...]
    block: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        arr = np.asarray(self.prefix + self.block, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("components must be finite")
        if np.any(arr < 0):
            raise ValueError("components must be nonnegative")

    @classmethod
    def finite(cls, values: Iterable[float]) -> "LinfVector":
        """Vector over exactly the given components."""
        return cls(_as_tuple(values))

    @classmethod
    def periodic(cls, prefix: Iterable[float], block: Iterable[float]) -> "LinfVector":
        """Eventually periodic vector in canonical form.

        Raises:
            ValueError: If the block is empty.
        """
        block = _as_tuple(block)
        if not block:
            raise ValueError("period block must be nonempty")

        return canonicalize(cls(_as_tuple(prefix), block))

    @classmethod
    def constant(cls, c: float) -> "LinfVector":
        return cls.periodic((), (c,))

    @classmethod
    def ones(cls) -> "LinfVector":
        return cls.constant(1.0)

    @classmethod
    def zeros(cls) -> "LinfVector":
        return cls.constant(0.0)

    @property
    def is_finite(self) -> bool:
        return not self.block

    @property
    def period(self) -> int:
        """Length of the repeated block, 0 for finite vectors."""
        return len(self.block)

    def component(self, i: int) -> float:
        """Value of the i-th component (finite vectors read as zero past their end)."""
        if i < 0:
            raise IndexError("component index must be nonnegative")

        if i < len(self.prefix):
            return self.prefix[i]
        if self.is_finite:
            return 0.0

        return self.block[(i - len(self.prefix)) % len(self.block)]

    def _key(self) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
        v = self
        if v.is_finite:
            v = LinfVector(v.prefix, (0.0,))

        v = canonicalize(v)
        return v.prefix, v.block

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinfVector):
            return NotImplemented

        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __str__(self) -> str:
        if self.is_finite:
            return f"Finite{list(self.prefix)}"

        return f"EventuallyPeriodic(prefix={list(self.prefix)}, block={list(self.block)})"


def canonicalize(v: LinfVector) -> LinfVector:
    """Return the minimal-period, minimal-prefix representation of `v`.

    Finite vectors are returned unchanged because their stored length matters
    for `inf_component`.
    """
    if v.is_finite:
        return v

    block = v.block
    size = len(block)
    for d in range(1, size + 1):
        if size % d == 0 and block == block[:d] * (size // d):
            block = block[:d]
            break

    prefix = v.prefix
    while prefix and prefix[-1] == block[-1]:
        block = (prefix[-1],) + block[:-1]
        prefix = prefix[:-1]

    if prefix == v.prefix and block == v.block:
        return v

    return LinfVector(prefix, block)


def _alignment_length(*vectors: LinfVector) -> int:
    """Number of leading components that decide any componentwise relation."""
    if all(v.is_finite for v in vectors):
        return max((len(v.prefix) for v in vectors), default=0)

    prefix_len = max(len(v.prefix) for v in vectors)
    period = math.lcm(*(v.period or 1 for v in vectors))
    return prefix_len + period


def window(v: LinfVector, length: int) -> np.ndarray:
    """First `length` components of `v` as an array."""
    out = np.zeros(length)
    head = min(length, len(v.prefix))
    out[:head] = v.prefix[:head]

    if not v.is_finite and length > head:
        reps = -(-(length - head) // v.period)
        out[head:] = np.tile(v.block, reps)[:length - head]

    return out


def sup_norm(v: LinfVector) -> float:
    """Supremum norm, 0 for the empty finite vector."""
    return max(v.prefix + v.block, default=0.0)


def inf_component(v: LinfVector) -> float:
    """Infimum over the components of `v`.

    A finite vector is taken over exactly its stored components, so
    ``inf_component(s) > 0`` decides interiority.
    """
    return min(v.prefix + v.block, default=0.0)


def partial_leq(u: LinfVector, v: LinfVector, slack: float = 0.0) -> bool:
    """Whether ``u_i <= v_i + slack`` for every index i."""
    n = _alignment_length(u, v)
    return bool(np.all(window(u, n) <= window(v, n) + slack))


def affine_combine(a: float, u: LinfVector, b: float, v: LinfVector) -> LinfVector:
    """Componentwise ``a*u + b*v`` for nonnegative coefficients.

    Raises:
        ValueError: If a coefficient is negative.
    """
    if a < 0 or b < 0:
        raise ValueError("coefficients must be nonnegative")

    n = _alignment_length(u, v)
    combined = a * window(u, n) + b * window(v, n)
    if u.is_finite and v.is_finite:
        return LinfVector.finite(combined)

    prefix_len = max(len(u.prefix), len(v.prefix))
    return LinfVector.periodic(combined[:prefix_len], combined[prefix_len:])


def scale(c: float, v: LinfVector) -> LinfVector:
    """Multiply every component by the nonnegative scalar `c`."""
    if c < 0:
        raise ValueError("scale must be nonnegative")

    if v.is_finite:
        return LinfVector.finite(c * x for x in v.prefix)

    return LinfVector.periodic((c * x for x in v.prefix), (c * x for x in v.block))


def max_difference(u: LinfVector, v: LinfVector) -> float:
    """Supremum of ``u_i - v_i`` over all indices, may be negative."""
    n = _alignment_length(u, v)
    if n == 0:
        return 0.0

    return float(np.max(window(u, n) - window(v, n)))


def max_ratio(u: LinfVector, v: LinfVector) -> float:
    """Smallest c with ``u <= c*v``.

    Components where both vectors vanish are ignored, a positive component of
    `u` over a zero of `v` makes the ratio infinite.
    """
    n = _alignment_length(u, v)
    uw, vw = window(u, n), window(v, n)

    if np.any((vw == 0) & (uw > 0)):
        return math.inf

    mask = vw > 0
    if not np.any(mask):
        return 0.0

    return float(np.max(uw[mask] / vw[mask]))
