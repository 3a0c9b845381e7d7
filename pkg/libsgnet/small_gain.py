"""Spectral-radius estimation and points of strict decay for gain operators.

The small-gain condition r(Gamma) < 1 is equivalent to
``||Gamma^n(1)|| < 1`` for some n, to exponential stability of the
discrete-time system ``x(k+1) = Gamma(x(k))``, and to the existence of an
interior point s0 with ``Gamma(s0) <= lambda * s0`` for some lambda < 1.
This module computes the first, synthesizes the last by summing
``Gamma^k(y) / lambda^(k+1)``, and cross-checks the estimates with
independent oracles on finite matrices.
"""

import dataclasses
import enum
import itertools
import logging
import math
from typing import List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy import stats

from .gain_operator import FiniteOperator, GainOperator, PeriodicOperator, apply
from .sequence_space import LinfVector, affine_combine, inf_component, max_difference, max_ratio, scale, \
    sup_norm, window

__all__ = ["SpectralEstimate", "DecayCertificate", "SmallGainStatus", "SmallGainVerdict", "UgesFit",
           "GainOverflowError", "DivergenceError", "NotInteriorError", "OracleError",
           "iterate_ones", "small_gain_check",
           "synthesize_decay_point", "verify_decay_point", "default_lambda", "uges_constants",
           "uges_fit",
           "perron_oracle", "max_cycle_mean_oracle"]

logger = logging.getLogger(__name__)

OVERFLOW_LIMIT = 1e100
UNDERFLOW_GUARD = 1e-250
RATIO_WINDOW = 8
DIVERGENCE_WINDOW = 5


class GainOverflowError(OverflowError):
    """Iterates of the gain operator grew beyond the overflow guard."""


class DivergenceError(ArithmeticError):
    """The decay-point series doesn't converge for the chosen lambda."""


class NotInteriorError(ValueError):
    """A vector that has to be interior has a vanishing component."""


class OracleError(ArithmeticError):
    """An oracle can't produce a trustworthy value."""


@dataclasses.dataclass(frozen=True)
class SpectralEstimate:
    """Norms of the iterates of the all-ones vector.

    Attributes:
        norms (Tuple[float, ...]): ``||Gamma^k(1)||`` for k = 1..n_max.
        root_sequence (Tuple[float, ...]): ``||Gamma^k(1)||^(1/k)``.
        upper_bound (float): Minimum of the root sequence, an upper bound
            on r(Gamma).
        certified_n (Optional[int]): Smallest k with norm below 1.
        ratio_bound (float): Upper bound from comparing the last iterate with
            the ones before it, ``inf`` if no comparison applies.
    """
    norms: Tuple[float, ...]
    root_sequence: Tuple[float, ...]
    upper_bound: float
    certified_n: Optional[int]
    ratio_bound: float = math.inf

    @property
    def n_max(self) -> int:
        return len(self.norms)

    @property
    def best_bound(self) -> float:
        """Tightest certified upper bound on r(Gamma)."""
        return min(self.upper_bound, self.ratio_bound)


class SmallGainStatus(enum.Enum):
    SATISFIED = "satisfied"
    UNKNOWN = "unknown"


@dataclasses.dataclass(frozen=True)
class SmallGainVerdict:
    """Outcome of the finite-step small-gain check.

    UNKNOWN never means instability, r(Gamma) < 1 may still hold for a larger
    iteration count.

    Attributes:
        status (SmallGainStatus): SATISFIED if some norm is below 1.
        n (Optional[int]): Certifying iteration count when satisfied.
        upper_bound (float): Best root-sequence value.
        estimate (SpectralEstimate): Underlying iteration data.
    """
    status: SmallGainStatus
    n: Optional[int]
    upper_bound: float
    estimate: SpectralEstimate

    @property
    def satisfied(self) -> bool:
        return self.status is SmallGainStatus.SATISFIED

    def __str__(self) -> str:
        if self.satisfied:
            return f"Satisfied({self.n})"

        return f"Unknown({self.upper_bound!r})"


@dataclasses.dataclass(frozen=True)
class DecayCertificate:
    """Point of strict decay ``Gamma(s0) <= lambda * s0``.

    Attributes:
        s0 (LinfVector): Candidate point.
        lam (float): Decay factor in (0, 1).
        residual (float): ``sup_i (Gamma(s0)_i - lambda * s0_i)``.
        interiority (float): Infimum of the components of s0.
        tolerance (float): Largest residual accepted as valid.
        margin (float): Infimum of the series seed y, the slack the exact
            series keeps below ``lambda * s0``. 0 for verified-only points.
        terms (int): Number of series terms summed, 0 for verified-only points.
    """
    s0: LinfVector
    lam: float
    residual: float
    interiority: float
    tolerance: float = 1e-9
    margin: float = 0.0
    terms: int = 0

    @property
    def valid(self) -> bool:
        return self.residual <= self.tolerance and self.interiority > 0

    def path(self, r: float) -> LinfVector:
        """Linear path of strict decay ``r * s0``."""
        return scale(r, self.s0)


@dataclasses.dataclass(frozen=True)
class UgesFit:
    """Least-squares fit ``||Gamma^k(s)|| / ||s|| ~ M * a^k``.

    Attributes:
        M (float): Fitted overshoot constant.
        a (float): Fitted decay factor.
        norms (Tuple[float, ...]): ``||Gamma^k(s)||`` for k = 0..k_max.
    """
    M: float
    a: float
    norms: Tuple[float, ...]

    @property
    def uges(self) -> bool:
        return self.a < 1


def iterate_ones(op: GainOperator, n_max: int) -> SpectralEstimate:
    """Iterate the operator on the all-ones vector.

    Raises:
        ValueError: If `n_max` is less than 1.
        GainOverflowError: If a norm exceeds 1e100.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")

    iterates: List[LinfVector] = [LinfVector.ones()]
    norms: List[float] = []
    roots: List[float] = []
    certified_n = None

    for k in range(1, n_max + 1):
        v = apply(op, iterates[-1])
        norm = sup_norm(v)
        if norm > OVERFLOW_LIMIT:
            raise GainOverflowError(f"||Gamma^{k}(1)|| = {norm:g} exceeds {OVERFLOW_LIMIT:g}")

        iterates.append(v)
        norms.append(norm)
        roots.append(norm ** (1.0 / k))
        if certified_n is None and norm < 1:
            certified_n = k

    last = iterates[-1]
    ratio_bound = math.inf
    if norms[-1] == 0 or norms[-1] > UNDERFLOW_GUARD:
        for sigma in range(1, min(RATIO_WINDOW, n_max - 1) + 1):
            c = max_ratio(last, iterates[-1 - sigma])
            if math.isfinite(c):
                ratio_bound = min(ratio_bound, c ** (1.0 / sigma))

    upper_bound = min(roots)
    logger.debug("iterated %d times: root bound %r, ratio bound %r", n_max, upper_bound, ratio_bound)
    return SpectralEstimate(tuple(norms), tuple(roots), upper_bound, certified_n, ratio_bound)


def small_gain_check(op: GainOperator, n_max: int) -> SmallGainVerdict:
    """Decide ``||Gamma^n(1)|| < 1`` for some ``n <= n_max``."""
    est = iterate_ones(op, n_max)
    if est.certified_n is not None:
        return SmallGainVerdict(SmallGainStatus.SATISFIED, est.certified_n, est.upper_bound, est)

    if est.best_bound < 1:
        logger.info("ratio bound %r < 1 but no norm below 1 within n_max=%d", est.ratio_bound, n_max)

    return SmallGainVerdict(SmallGainStatus.UNKNOWN, None, est.upper_bound, est)


def default_lambda(upper_bound: float) -> float:
    """Decay factor halfway between the radius estimate and 1."""
    return (1.0 + upper_bound) / 2.0


def _restrict(op: GainOperator, v: LinfVector) -> LinfVector:
    """View `v` on the index set the operator acts on."""
    if isinstance(op, FiniteOperator):
        return LinfVector.finite(window(v, op.dimension))

    return v


def _interiority(op: GainOperator, s0: LinfVector) -> float:
    # a finite vector under a periodic operator has a zero tail
    if isinstance(op, PeriodicOperator) and s0.is_finite:
        return 0.0

    return inf_component(_restrict(op, s0))


def verify_decay_point(op: GainOperator, s0: LinfVector, lam: float, tol: float = 1e-9) -> DecayCertificate:
    """Measure how well `s0` satisfies ``Gamma(s0) <= lam * s0``.

    Raises:
        ValueError: If `lam` isn't in (0, 1).
    """
    if not 0 < lam < 1:
        raise ValueError(f"lambda must be in (0, 1), got {lam}")

    restricted = _restrict(op, s0)
    residual = max_difference(apply(op, restricted), scale(lam, restricted))
    return DecayCertificate(s0, lam, residual, _interiority(op, s0), tol)


def synthesize_decay_point(op: GainOperator, lam: float, y: LinfVector = None, k_max: int = 100_000,
                           tail_tol: float = 1e-10, tol: float = 1e-9) -> DecayCertificate:
    """Sum ``z = sum_k Gamma^k(y) / lam^(k+1)`` into a point of strict decay.

    The exact series satisfies ``Gamma(z) <= lam * z - y``. The partial sum
    stops before the first term whose norm is below `tail_tol`, the dropped
    tail is absorbed by the margin ``inf(y)``.

    Args:
        op: Gain operator with r(op) < lam.
        lam: Decay factor in (0, 1).
        y: Interior seed, defaults to the all-ones vector.
        k_max: Maximum number of series terms.
        tail_tol: Norm below which the next term is dropped.
        tol: Residual accepted by the returned certificate.

    Raises:
        ValueError: If `lam` isn't in (0, 1).
        NotInteriorError: If `y` isn't interior.
        DivergenceError: If the terms stop decreasing or `k_max` is reached.
    """
    if not 0 < lam < 1:
        raise ValueError(f"lambda must be in (0, 1), got {lam}")
    if y is None:
        y = LinfVector.ones()

    margin = _interiority(op, y)
    if margin <= 0:
        raise NotInteriorError(f"series seed must be interior, infimum is {margin}")

    # term k is Gamma^k(y) / lam^(k+1), built recursively by homogeneity
    term = scale(1.0 / lam, _restrict(op, y))
    z = term
    term_norms = [sup_norm(term)]
    stalled = 0

    for k in range(1, k_max + 1):
        term = scale(1.0 / lam, apply(op, term))
        norm = sup_norm(term)
        if norm < tail_tol:
            cert = verify_decay_point(op, z, lam, tol)
            cert = dataclasses.replace(cert, margin=margin, terms=k)
            logger.info("decay point after %d terms: residual %r, margin %r", k, cert.residual, margin)
            return cert

        term_norms.append(norm)
        if k >= DIVERGENCE_WINDOW and norm >= term_norms[-1 - DIVERGENCE_WINDOW]:
            stalled += 1
            if stalled >= DIVERGENCE_WINDOW:
                raise DivergenceError(f"series terms stopped decreasing at k={k} for lambda={lam}")
        else:
            stalled = 0

        if not math.isfinite(norm) or norm > OVERFLOW_LIMIT:
            raise DivergenceError(f"series term {k} has norm {norm:g}")

        z = affine_combine(1.0, z, 1.0, term)

    raise DivergenceError(f"series didn't reach tail tolerance {tail_tol:g} within {k_max} terms")


def uges_constants(cert: DecayCertificate) -> Tuple[float, float]:
    """Constants (M, a) with ``||Gamma^k(s)|| <= M a^k ||s||`` from a valid certificate."""
    if not cert.valid:
        raise ValueError("certificate isn't valid")

    return sup_norm(cert.s0) / cert.interiority, cert.lam


def uges_fit(op: GainOperator, s: LinfVector, k_max: int) -> UgesFit:
    """Fit exponential decay to the iterates of `s`.

    This is empirical evidence, not a proof. If an iterate vanishes, the decay
    factor is 0 and M is the largest normalized norm before it.

    Raises:
        ValueError: If `k_max` < 3 or `s` is zero.
    """
    if k_max < 3:
        raise ValueError("k_max must be at least 3")

    base = sup_norm(s)
    if base <= 0:
        raise ValueError("starting vector must be nonzero")

    norms = [base]
    v = s
    for _ in range(k_max):
        v = apply(op, v)
        norms.append(sup_norm(v))

    ratios = np.asarray(norms) / base
    if np.any(ratios == 0):
        first_zero = int(np.argmax(ratios == 0))
        return UgesFit(float(np.max(ratios[:first_zero])), 0.0, tuple(norms))

    fit = stats.linregress(np.arange(len(ratios)), np.log(ratios))
    return UgesFit(float(np.exp(fit.intercept)), float(np.exp(fit.slope)), tuple(norms))


def _norm_growth(g: np.ndarray, k: int) -> float:
    # ||G^k 1||^(1/k), renormalized every step
    x = np.ones(g.shape[0])
    log_norm = 0.0
    for _ in range(k):
        x = g @ x
        top = float(np.max(x))
        if top == 0:
            return 0.0
        log_norm += math.log(top)
        x = x / top

    return math.exp(log_norm / k)


def _block_root(b: np.ndarray, iters: int, tol: float) -> float:
    shifted = b + np.eye(b.shape[0])
    x = np.ones(b.shape[0])
    for _ in range(iters):
        if np.any(x <= 0):
            break

        quotients = (b @ x) / x
        lo, hi = float(np.min(quotients)), float(np.max(quotients))
        if hi - lo <= tol:
            return 0.5 * (lo + hi)

        y = shifted @ x
        x = y / np.max(y)

    logger.warning("power iteration on a %d-node block didn't close its bracket within %d iterations, "
                   "falling back to the norm growth", b.shape[0], iters)
    return _norm_growth(b, iters)


def perron_oracle(matrix: Sequence[Sequence[float]], iters: int = 10_000, tol: float = 1e-12) -> float:
    """Dominant eigenvalue of a nonnegative matrix by power iteration.

    The spectral radius of a reducible matrix is the largest one of its
    strongly connected blocks, so every block is iterated on its own. A block
    is irreducible, and iterating ``B + I`` from the all-ones vector keeps the
    iterate x positive. The quotients ``(Bx)_i / x_i`` then bracket the root
    from both sides and the midpoint is returned once the bracket is narrower
    than `tol`. If it doesn't close within `iters` steps the block falls back
    to the norm growth ``||B^k 1||^(1/k)`` at ``k = iters``.

    Raises:
        ValueError: If the matrix has negative entries or `iters` isn't
            positive.
    """
    if iters < 1:
        raise ValueError("iters must be positive")

    g = np.asarray(matrix, dtype=float)
    if np.any(g < 0):
        raise ValueError("matrix must be nonnegative")
    if g.size == 0:
        return 0.0

    graph = nx.from_numpy_array(g, create_using=nx.DiGraph)
    best = 0.0
    for component in nx.strongly_connected_components(graph):
        idx = sorted(component)
        best = max(best, _block_root(g[np.ix_(idx, idx)], iters, tol))

    return best


def max_cycle_mean_oracle(matrix: Sequence[Sequence[float]], max_dimension: int = 12) -> float:
    """Largest geometric-mean weight over the simple cycles of a matrix.

    Raises:
        OracleError: If the matrix is larger than `max_dimension`.
    """
    g = np.asarray(matrix, dtype=float)
    n = g.shape[0] if g.size else 0
    if n > max_dimension:
        raise OracleError(f"dimension {n} too large for cycle enumeration (max {max_dimension})")

    graph = nx.DiGraph()
    graph.add_nodes_from(range(n))
    graph.add_weighted_edges_from((i, j, g[i, j]) for i, j in itertools.product(range(n), repeat=2) if g[i, j] > 0)

    best = 0.0
    for cycle in nx.simple_cycles(graph):
        edges = zip(cycle, cycle[1:] + cycle[:1])
        product = math.prod(g[i, j] for i, j in edges)
        best = max(best, product ** (1.0 / len(cycle)))

    return best
