"""Composite ISS Lyapunov functions for networks with a point of strict decay.

Given subsystem Lyapunov functions V_i and a point s0 with
``Gamma(s0) <= lambda * s0``, the network function is
``V(x) = sup_i V_i(x_i) / s0_i``. It satisfies

    V(x) > gamma(||u||)  =>  D+V(x) <= -alpha(V(x))

with ``gamma(r) = gamma_u_max(r) / (s0_min * lambda)`` and
``alpha(r) = min_zeta alpha_tilde(zeta * r) / s0_max`` over
``zeta in [s0_min / mu, s0_max]``. This module evaluates V and these bounds,
and checks the implication along sampled trajectories.
"""

import dataclasses
import logging
import math
from typing import Callable, List, Optional, Sequence, TYPE_CHECKING, Tuple

import numpy as np
from scipy import optimize

from .gain_operator import GainOperator
from .sequence_space import inf_component, sup_norm, window
from .small_gain import DecayCertificate, DivergenceError, NotInteriorError, default_lambda, \
    small_gain_check, synthesize_decay_point

if TYPE_CHECKING:
    from .network_sim import InputSignal, Trajectory

__all__ = ["LinearGain", "HalfSquare", "SqrtOfDouble", "Envelope",
           "SubsystemLyapunov", "CompositeLyapunov",
           "NoCertificateError",
           "ImplicationViolation", "ImplicationReport",
           "certify_operator",
           "subsystem_values", "evaluate_composite", "evaluate_along", "active_set",
           "coercivity_envelope", "composite_external_gain", "composite_decay_rate", "lipschitz_bound",
           "check_implication_along_trajectory", "check_dissipation_along_trajectory"]

logger = logging.getLogger(__name__)

ZETA_GRID = 64
ENVELOPE_GRID = np.linspace(0.0, 10.0, 41)
ENVELOPE_TOL = 1e-12

ScalarFunction = Callable[[float], float]


class NoCertificateError(ValueError):
    """No valid point of strict decay backs the requested construction."""


@dataclasses.dataclass(frozen=True)
class LinearGain:
    """``r -> slope * r``, works on scalars and arrays."""
    slope: float = 1.0

    def __call__(self, r):
        return self.slope * r


@dataclasses.dataclass(frozen=True)
class HalfSquare:
    """``r -> r^2 / 2``."""

    def __call__(self, r):
        return 0.5 * np.square(r)


@dataclasses.dataclass(frozen=True)
class SqrtOfDouble:
    """``v -> sqrt(2 v)``, the inverse of `HalfSquare`."""

    def __call__(self, v):
        return np.sqrt(2.0 * np.asarray(v))


@dataclasses.dataclass(frozen=True)
class _QuadraticValue:
    def __call__(self, x: np.ndarray) -> np.ndarray:
        return 0.5 * np.sum(np.square(x), axis=-1)


@dataclasses.dataclass(frozen=True)
class Envelope:
    """Pointwise minimum or maximum of a family of functions."""
    functions: Tuple[ScalarFunction, ...]
    lower: bool

    @classmethod
    def of(cls, functions: Sequence[ScalarFunction], lower: bool) -> ScalarFunction:
        unique = tuple(dict.fromkeys(functions))
        if len(unique) == 1:
            return unique[0]

        return cls(unique, lower)

    def __call__(self, r):
        values = [f(r) for f in self.functions]
        if self.lower:
            return np.minimum.reduce(values)

        return np.maximum.reduce(values)


@dataclasses.dataclass(frozen=True)
class SubsystemLyapunov:
    """ISS Lyapunov function of a single subsystem in implication form.

    Attributes:
        evaluate (Callable[[np.ndarray], np.ndarray]): V_i, maps states of
            shape ``(..., state_dim)`` to values of shape ``(...)``.
        psi1 (ScalarFunction): Lower coercivity bound.
        psi2 (ScalarFunction): Upper coercivity bound.
        alpha (ScalarFunction): Decay rate.
        gamma_u (ScalarFunction): External gain.
        state_dim (int): Dimension of the subsystem state.
        psi1_inverse (Optional[ScalarFunction]): Inverse of psi1.
        lipschitz (Optional[ScalarFunction]): L(R), a Lipschitz constant of
            V_i on the ball of radius R.
    """
    evaluate: Callable[[np.ndarray], np.ndarray]
    psi1: ScalarFunction
    psi2: ScalarFunction
    alpha: ScalarFunction
    gamma_u: ScalarFunction
    state_dim: int = 1
    psi1_inverse: Optional[ScalarFunction] = None
    lipschitz: Optional[ScalarFunction] = None

    @classmethod
    def quadratic(cls, rate: float, input_slope: float = 1.0, state_dim: int = 1) -> "SubsystemLyapunov":
        """``V_i(x) = |x|^2 / 2`` with linear decay rate and linear external gain."""
        if rate <= 0:
            raise ValueError(f"decay rate must be positive, got {rate}")
        if input_slope < 0:
            raise ValueError(f"input gain slope must be nonnegative, got {input_slope}")

        return cls(_QuadraticValue(), HalfSquare(), HalfSquare(), LinearGain(rate), LinearGain(input_slope),
                   state_dim, SqrtOfDouble(), LinearGain(1.0))

    def __call__(self, x: np.ndarray) -> float:
        return float(self.evaluate(np.asarray(x, dtype=float)))


def _dominates(upper: ScalarFunction, lower: ScalarFunction) -> bool:
    return bool(np.all(np.asarray([lower(r) for r in ENVELOPE_GRID])
                       <= np.asarray([upper(r) for r in ENVELOPE_GRID]) + ENVELOPE_TOL))


@dataclasses.dataclass(frozen=True, eq=False)
class CompositeLyapunov:
    """``V(x) = sup_i V_i(x_i) / s0_i`` backed by a valid decay certificate.

    Attributes:
        certificate (DecayCertificate): Point of strict decay and lambda.
        subsystems (Tuple[SubsystemLyapunov, ...]): Subsystem functions. For a
            periodic family subsystem i uses ``subsystems[i % len]``.
        periodic (bool): Whether `subsystems` is a periodic generator family.
        psi1 (ScalarFunction): Uniform lower coercivity envelope.
        psi2 (ScalarFunction): Uniform upper coercivity envelope.
        gamma_u_max (ScalarFunction): Uniform external-gain envelope.
        alpha_tilde (ScalarFunction): Uniform decay-rate lower bound.
        mu (float): Constant in ``(1, 1 / lambda)``, defaults to the midpoint.

    Raises:
        NoCertificateError: If the certificate isn't valid.
        ValueError: If an envelope doesn't bound the family on a sample grid.
    """
    certificate: DecayCertificate
    subsystems: Tuple[SubsystemLyapunov, ...]
    periodic: bool
    psi1: ScalarFunction
    psi2: ScalarFunction
    gamma_u_max: ScalarFunction
    alpha_tilde: ScalarFunction
    mu: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.certificate.valid:
            raise NoCertificateError(f"certificate isn't valid: residual {self.certificate.residual!r}, "
                                     f"interiority {self.certificate.interiority!r}")

        object.__setattr__(self, "subsystems", tuple(self.subsystems))
        if not self.subsystems:
            raise ValueError("at least one subsystem is required")

        if self.mu is None:
            object.__setattr__(self, "mu", (1.0 + 1.0 / self.lam) / 2.0)
        elif not 1.0 < self.mu < 1.0 / self.lam:
            raise ValueError(f"mu must be in (1, {1.0 / self.lam!r}), got {self.mu}")

        for i, sub in enumerate(self.subsystems):
            checks = (("psi1", _dominates(sub.psi1, self.psi1)),
                      ("psi2", _dominates(self.psi2, sub.psi2)),
                      ("gamma_u_max", _dominates(self.gamma_u_max, sub.gamma_u)),
                      ("alpha_tilde", _dominates(sub.alpha, self.alpha_tilde)))
            for name, ok in checks:
                if not ok:
                    raise ValueError(f"{name} envelope doesn't bound subsystem {i}")

    @classmethod
    def from_subsystems(cls, certificate: DecayCertificate, subsystems: Sequence[SubsystemLyapunov],
                        periodic: bool, mu: float = None) -> "CompositeLyapunov":
        """Build with the tightest envelopes of the family."""
        return cls(certificate, tuple(subsystems), periodic,
                   Envelope.of([s.psi1 for s in subsystems], lower=True),
                   Envelope.of([s.psi2 for s in subsystems], lower=False),
                   Envelope.of([s.gamma_u for s in subsystems], lower=False),
                   Envelope.of([s.alpha for s in subsystems], lower=True),
                   mu)

    @property
    def s0(self):
        return self.certificate.s0

    @property
    def lam(self) -> float:
        return self.certificate.lam

    @property
    def s0_min(self) -> float:
        return inf_component(self.s0)

    @property
    def s0_max(self) -> float:
        return sup_norm(self.s0)

    def subsystem(self, i: int) -> SubsystemLyapunov:
        if self.periodic:
            return self.subsystems[i % len(self.subsystems)]

        return self.subsystems[i]


def certify_operator(op: GainOperator, n_max: int, lam: float = None, *, k_max: int = 100_000,
                     tail_tol: float = 1e-10, tol: float = 1e-9) -> DecayCertificate:
    """Run the small-gain check and synthesize a verified point of strict decay.

    lambda defaults to `default_lambda` of the best radius bound, which can
    be below the bound of the norm root alone.

    Raises:
        NoCertificateError: If the small-gain check isn't satisfied or the
            synthesized point doesn't verify.
    """
    verdict = small_gain_check(op, n_max)
    if not verdict.satisfied:
        raise NoCertificateError(f"small-gain condition not established: {verdict}")

    if lam is None:
        lam = default_lambda(verdict.estimate.best_bound)

    try:
        cert = synthesize_decay_point(op, lam, k_max=k_max, tail_tol=tail_tol, tol=tol)
    except (DivergenceError, NotInteriorError) as e:
        raise NoCertificateError(f"no point of strict decay for lambda={lam!r}: {e}") from e

    if not cert.valid:
        raise NoCertificateError(f"synthesized point doesn't verify: residual {cert.residual!r}")

    return cert


def _blocks(cl: CompositeLyapunov, width: int) -> List[Tuple[int, int]]:
    spans = []
    start = i = 0
    while start < width:
        if not cl.periodic and i >= len(cl.subsystems):
            break
        dim = cl.subsystem(i).state_dim
        spans.append((start, start + dim))
        start += dim
        i += 1

    if start != width or (not cl.periodic and len(spans) != len(cl.subsystems)):
        raise ValueError(f"state of width {width} doesn't split into subsystem blocks")

    return spans


def subsystem_values(cl: CompositeLyapunov, x: np.ndarray) -> np.ndarray:
    """``V_i(x_i)`` for every block of a state, or of a stack of states.

    Args:
        cl: Composite function.
        x: Flat state of shape ``(width,)`` or states of shape ``(T, width)``.

    Raises:
        ValueError: If the state doesn't split into subsystem blocks.
    """
    x = np.asarray(x, dtype=float)
    spans = _blocks(cl, x.shape[-1])

    evaluators = {cl.subsystem(i).evaluate for i in range(len(spans))}
    dims = {hi - lo for lo, hi in spans}
    if len(evaluators) == 1 and len(dims) == 1:
        dim = dims.pop()
        stacked = x.reshape(x.shape[:-1] + (len(spans), dim))
        return np.asarray(cl.subsystem(0).evaluate(stacked), dtype=float)

    columns = [cl.subsystem(i).evaluate(x[..., lo:hi]) for i, (lo, hi) in enumerate(spans)]
    return np.stack(columns, axis=-1)


def _ratios(cl: CompositeLyapunov, x: np.ndarray) -> np.ndarray:
    values = subsystem_values(cl, x)
    return values / window(cl.s0, values.shape[-1])


def evaluate_composite(cl: CompositeLyapunov, x: np.ndarray) -> float:
    """``sup_i V_i(x_i) / s0_i`` over the represented blocks."""
    ratios = _ratios(cl, x)
    return float(np.max(ratios, initial=0.0))


def evaluate_along(cl: CompositeLyapunov, states: np.ndarray) -> np.ndarray:
    """Composite value at every row of a ``(T, width)`` state array."""
    return np.max(_ratios(cl, states), axis=-1, initial=0.0)


def active_set(cl: CompositeLyapunov, x: np.ndarray) -> Tuple[int, ...]:
    """Indices at which the supremum defining V is attained."""
    ratios = _ratios(cl, x)
    return tuple(int(i) for i in np.flatnonzero(ratios == np.max(ratios, initial=0.0)))


def coercivity_envelope(cl: CompositeLyapunov, x_norm: float) -> Tuple[float, float]:
    """``(psi1(|x|) / s0_max, psi2(|x|) / s0_min)``, which bound V(x)."""
    if x_norm < 0:
        raise ValueError("norm must be nonnegative")

    return float(cl.psi1(x_norm)) / cl.s0_max, float(cl.psi2(x_norm)) / cl.s0_min


def composite_external_gain(cl: CompositeLyapunov, u_norm: float) -> float:
    """``gamma(r) = gamma_u_max(r) / (s0_min * lambda)``."""
    if u_norm < 0:
        raise ValueError("norm must be nonnegative")

    return float(cl.gamma_u_max(u_norm)) / (cl.s0_min * cl.lam)


def composite_decay_rate(cl: CompositeLyapunov, r: float, mu: float = None) -> float:
    """``alpha(r) = min_zeta alpha_tilde(zeta * r) / s0_max``.

    The minimum over ``zeta in [s0_min / mu, s0_max]`` is taken on a 64-point
    grid and refined once with a bounded scalar minimization around the grid
    minimizer.

    Raises:
        ValueError: If `mu` isn't in ``(1, 1 / lambda)``.
    """
    if mu is None:
        mu = cl.mu
    elif not 1.0 < mu < 1.0 / cl.lam:
        raise ValueError(f"mu must be in (1, {1.0 / cl.lam!r}), got {mu}")

    if r <= 0:
        return 0.0

    grid = np.linspace(cl.s0_min / mu, cl.s0_max, ZETA_GRID)
    values = np.asarray([cl.alpha_tilde(z * r) for z in grid], dtype=float)
    k = int(np.argmin(values))
    best = float(values[k])

    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, ZETA_GRID - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda z: float(cl.alpha_tilde(z * r)), bounds=(lo, hi), method="bounded")
        if res.success:
            best = min(best, float(res.fun))

    return best / cl.s0_max


def lipschitz_bound(cl: CompositeLyapunov, radius: float, count: int = None) -> float:
    """Lipschitz constant ``L(R) / s0_min`` of V on the ball of radius R.

    Args:
        cl: Composite function.
        radius: Ball radius R.
        count: Number of subsystems to take L(R) over, defaults to the size
            of the family.

    Raises:
        ValueError: If a subsystem has no Lipschitz function.
    """
    count = len(cl.subsystems) if count is None else count
    constants = []
    for i in range(count):
        sub = cl.subsystem(i)
        if sub.lipschitz is None:
            raise ValueError(f"subsystem {i} has no Lipschitz function")
        constants.append(float(sub.lipschitz(radius)))

    return max(constants, default=0.0) / cl.s0_min


@dataclasses.dataclass(frozen=True)
class ImplicationViolation:
    """Sample where the forward difference of V exceeds its bound.

    Attributes:
        t (float): Sample time.
        V (float): Composite value at t.
        bound (float): Largest forward difference allowed at t.
        margin (float): ``bound - difference``, negative for a violation.
    """
    t: float
    V: float
    bound: float
    margin: float


@dataclasses.dataclass(frozen=True)
class ImplicationReport:
    """Outcome of a forward-difference check along a trajectory.

    The check runs twice, at the trajectory step h and at 2h on every other
    sample. The slack is calibrated when halving the step leaves the failing
    samples of the coarse grid unchanged.

    Attributes:
        violations (Tuple[ImplicationViolation, ...]): Failing samples.
        checked (int): Number of samples where the bound applied.
        slack_constant (float): C in the slack ``C * h``.
        external_bound (float): Threshold the value had to exceed for the
            decay bound to apply, 0 for dissipation checks.
        worst_margin (float): Smallest margin over the checked samples,
            ``inf`` if none was checked.
        coarse_violations (Tuple[float, ...]): Failing sample times at step 2h.
        stable_under_halving (Optional[bool]): Whether the failing samples at
            step h, restricted to the coarse grid, are the coarse failures.
            None if the trajectory is too short for the coarse check.
    """
    violations: Tuple[ImplicationViolation, ...]
    checked: int
    slack_constant: float
    external_bound: float
    worst_margin: float
    coarse_violations: Tuple[float, ...] = ()
    stable_under_halving: Optional[bool] = None

    @property
    def ok(self) -> bool:
        return not self.violations


def _curvature_constant(values: np.ndarray, active: np.ndarray, h: float) -> float:
    if len(values) < 3:
        return 0.0

    second = np.abs(values[2:] - 2.0 * values[1:-1] + values[:-2])
    smooth = (active[2:] == active[1:-1]) & (active[1:-1] == active[:-2])
    if np.any(smooth):
        second = second[smooth]

    return 0.5 * float(np.max(second)) / (h * h)


def _scan(values: np.ndarray, active: np.ndarray, h: float, limit: Callable[[float], Optional[float]]
          ) -> Tuple[List[Tuple[int, float, float]], int, float, float]:
    """Failing ``(index, bound, margin)`` triples, checked count, slack constant and worst margin."""
    slack = _curvature_constant(values, active, h)
    failing = []
    checked = 0
    worst = math.inf
    for k in range(len(values) - 1):
        allowed = limit(float(values[k]))
        if allowed is None:
            continue

        checked += 1
        bound = allowed + slack * h
        margin = bound - (values[k + 1] - values[k]) / h
        worst = min(worst, margin)
        if margin < 0:
            failing.append((k, bound, margin))

    return failing, checked, slack, worst


def _forward_check(cl: CompositeLyapunov, traj: "Trajectory", h: Optional[float],
                   limit: Callable[[float], Optional[float]], external_bound: float) -> ImplicationReport:
    if len(traj.times) < 2:
        raise ValueError("trajectory needs at least two samples")

    h = traj.step if h is None else h
    if h <= 0:
        raise ValueError("time step must be positive")

    ratios = _ratios(cl, traj.states)
    values = np.max(ratios, axis=-1, initial=0.0)
    active = np.argmax(ratios, axis=-1)

    failing, checked, slack, worst = _scan(values, active, h, limit)
    violations = tuple(ImplicationViolation(float(traj.times[k]), float(values[k]), bound, margin)
                       for k, bound, margin in failing)
    if violations:
        logger.info("%d of %d samples violate the decay bound", len(violations), checked)

    coarse_times = ()
    stable = None
    if len(values) >= 3:
        coarse = _scan(values[::2], active[::2], 2.0 * h, limit)[0]
        coarse_times = tuple(float(traj.times[2 * j]) for j, _, _ in coarse)
        # fine samples that start a coarse step
        last = 2 * (len(values[::2]) - 1)
        refined = {k for k, _, _ in failing if k % 2 == 0 and k < last}
        stable = refined == {2 * j for j, _, _ in coarse}
        if not stable:
            logger.warning("failing samples change when the step is halved from %g to %g, "
                           "slack constant %g isn't calibrated", 2.0 * h, h, slack)

    return ImplicationReport(violations, checked, slack, external_bound, worst, coarse_times, stable)


def check_implication_along_trajectory(cl: CompositeLyapunov, traj: "Trajectory", u: "InputSignal",
                                       h: float = None, mu: float = None) -> ImplicationReport:
    """Check ``V > gamma(|u|) => D+V <= -alpha(V)`` by forward differences.

    D+V at a sample is approximated by ``(V(t + h) - V(t)) / h`` and compared
    with ``-alpha(V(t)) + C * h``. C is half the largest second difference of V
    over stretches where the maximizing block doesn't change.

    The check is repeated at step 2h on every other sample, and the report
    records whether both steps fail at the same coarse samples.

    Raises:
        ValueError: If the trajectory has fewer than two samples.
    """
    gamma = composite_external_gain(cl, u.sup_norm)

    def limit(v: float) -> Optional[float]:
        if v > gamma:
            return -composite_decay_rate(cl, v, mu)
        return None

    return _forward_check(cl, traj, h, limit, gamma)


def check_dissipation_along_trajectory(cl: CompositeLyapunov, traj: "Trajectory", u: "InputSignal",
                                       alpha: ScalarFunction, rho: ScalarFunction,
                                       h: float = None) -> ImplicationReport:
    """Check ``D+V <= -alpha(V) + rho(|u|)`` at every sample by forward differences.

    Raises:
        ValueError: If the trajectory has fewer than two samples.
    """
    offset = float(rho(u.sup_norm))
    return _forward_check(cl, traj, h, lambda v: offset - float(alpha(v)), 0.0)
