"""Simulation of finite truncations of infinite networks.

The built-in family is the spatially invariant chain of scalar linear
subsystems

    x_j' = -b x_j + [b_back x_(j-1)] + g(b_fwd1 x_(j+1), b_fwd2 x_(j+2)) + u_j

where g is either the sum or the maximum of its arguments and the bracketed
back coupling is present on even indices (counting from 0) only. Neighbours
outside the truncation read as 0.
"""

import concurrent.futures
import dataclasses
import enum
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .gain_graph import build_graph, max_path_product, sum_path_products
from .gain_operator import AggregationKind, AggregationSpec, GainOperator, GainRow, PeriodicOperator, \
    uniform_aggregation
from .lyapunov import CompositeLyapunov, SubsystemLyapunov, composite_decay_rate, composite_external_gain, \
    evaluate_along
from .small_gain import DecayCertificate, SmallGainVerdict, small_gain_check

__all__ = ["SubsystemDynamics", "TruncatedNetwork", "ExampleParams",
           "Trajectory", "InputKind", "InputSignal",
           "BlowUpError", "PatternMismatchError",
           "RowCheck", "ExampleSmallGainReport", "IssBoundReport", "YoungCheck", "SimulationJob",
           "build_example_network", "derive_example_gains", "check_example_small_gain",
           "example_lyapunov",
           "vector_field", "generic_vector_field", "integrate", "iss_bound_check",
           "simulate_sweep", "young_estimate_margin"]

logger = logging.getLogger(__name__)

BACK, FWD1, FWD2 = -1, 1, 2
DECAY_TABLE_POINTS = 257


class BlowUpError(ArithmeticError):
    """A simulated state stopped being finite."""


class PatternMismatchError(ValueError):
    """An operator doesn't have the structure of the example chain."""


@dataclasses.dataclass(frozen=True)
class SubsystemDynamics:
    """Right-hand side of one subsystem.

    Attributes:
        state_dim (int): Dimension of the subsystem state.
        rhs (Callable): ``rhs(x_i, neighbours, u_i)`` returning the derivative
            of x_i. `neighbours` holds one state per entry of
            `neighbor_offsets`, in the same order.
        neighbor_offsets (Tuple[int, ...]): Neighbour indices relative to i.
        input_dim (int): Dimension of the subsystem input.
    """
    state_dim: int
    rhs: Callable[[np.ndarray, Sequence[np.ndarray], np.ndarray], np.ndarray]
    neighbor_offsets: Tuple[int, ...] = ()
    input_dim: int = 1


@dataclasses.dataclass(frozen=True, eq=False)
class TruncatedNetwork:
    """First N subsystems of a network, absent neighbours clamped to 0.

    Attributes:
        size (int): Number of subsystems N.
        dynamics (Tuple[SubsystemDynamics, ...]): Periodic generator family,
            subsystem i uses ``dynamics[i % len]``.
        fast_field (Optional[Callable]): Vectorized ``f(x, u)`` over the whole
            network. Must agree with the per-subsystem right-hand sides.
    """
    size: int
    dynamics: Tuple[SubsystemDynamics, ...]
    fast_field: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "dynamics", tuple(self.dynamics))
        if self.size < 1:
            raise ValueError("network needs at least one subsystem")
        if not self.dynamics:
            raise ValueError("dynamics family must be nonempty")

    def at(self, i: int) -> SubsystemDynamics:
        return self.dynamics[i % len(self.dynamics)]

    def _offsets(self, attr: str) -> List[int]:
        offsets = [0]
        for i in range(self.size):
            offsets.append(offsets[-1] + getattr(self.at(i), attr))
        return offsets

    @property
    def state_offsets(self) -> List[int]:
        return self._offsets("state_dim")

    @property
    def input_offsets(self) -> List[int]:
        return self._offsets("input_dim")

    @property
    def state_width(self) -> int:
        return self.state_offsets[-1]

    @property
    def input_width(self) -> int:
        return self.input_offsets[-1]


class InputKind(enum.Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    PIECEWISE = "piecewise"


@dataclasses.dataclass(frozen=True, eq=False)
class InputSignal:
    """Piecewise right-continuous input.

    Piece k holds on ``[breakpoints[k], breakpoints[k + 1])``, the last piece
    holds forever. Zero and constant signals have a single piece at 0.

    Attributes:
        kind (InputKind): Signal kind.
        width (int): Number of input channels.
        breakpoints (Tuple[float, ...]): Increasing piece start times, the first is 0.
        values (Tuple[Tuple[float, ...], ...]): Channel values per piece.
        sup_norm (float): ``sup_t max_j |u_j(t)|``.
    """
    kind: InputKind
    width: int
    breakpoints: Tuple[float, ...]
    values: Tuple[Tuple[float, ...], ...]
    sup_norm: float = dataclasses.field(init=False)

    def __post_init__(self) -> None:
        if self.width < 0:
            raise ValueError("input width must be nonnegative")
        if len(self.breakpoints) != len(self.values) or not self.breakpoints:
            raise ValueError("need one value vector per breakpoint")
        if self.breakpoints[0] != 0:
            raise ValueError("first breakpoint must be 0")
        if any(b >= a for a, b in zip(self.breakpoints[1:], self.breakpoints)):
            raise ValueError("breakpoints must be strictly increasing")

        arrays = [np.asarray(v, dtype=float) for v in self.values]
        for arr in arrays:
            if arr.shape != (self.width,):
                raise ValueError(f"value vector must have {self.width} channels, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("input values must be finite")

        object.__setattr__(self, "_arrays", arrays)
        norm = max((float(np.max(np.abs(arr), initial=0.0)) for arr in arrays), default=0.0)
        object.__setattr__(self, "sup_norm", norm)

    @classmethod
    def zero(cls, width: int) -> "InputSignal":
        return cls(InputKind.ZERO, width, (0.0,), ((0.0,) * width,))

    @classmethod
    def constant(cls, values: Sequence[float]) -> "InputSignal":
        values = tuple(float(v) for v in values)
        return cls(InputKind.CONSTANT, len(values), (0.0,), (values,))

    @classmethod
    def uniform(cls, amplitude: float, width: int) -> "InputSignal":
        """Every channel at `amplitude`, the zero signal for amplitude 0."""
        if amplitude == 0:
            return cls.zero(width)

        return cls.constant([amplitude] * width)

    @classmethod
    def piecewise(cls, breakpoints: Sequence[float], values: Sequence[Sequence[float]]) -> "InputSignal":
        values = tuple(tuple(float(x) for x in v) for v in values)
        width = len(values[0]) if values else 0
        return cls(InputKind.PIECEWISE, width, tuple(float(b) for b in breakpoints), values)

    def __call__(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self._arrays[max(k, 0)]


@dataclasses.dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution on a uniform time grid.

    Attributes:
        times (np.ndarray): Sample times, shape ``(T,)``.
        states (np.ndarray): Network states, shape ``(T, width)``.
        inputs (np.ndarray): Inputs at the sample times, shape ``(T, input_width)``.
        error_estimate (Optional[float]): Step-halving estimate of the
            terminal error, if requested.
    """
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    error_estimate: Optional[float] = None

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def sup_norms(self) -> np.ndarray:
        """``max_i |x_i(t)|`` at every sample, scalar blocks assumed."""
        return np.max(np.abs(self.states), axis=1, initial=0.0)


@dataclasses.dataclass(frozen=True)
class ExampleParams:
    """Coefficients of the example chain, uniform over the index.

    Attributes:
        b_diag (float): Self-coupling b, positive.
        b_back (float): Coupling to the previous subsystem on even indices.
        b_fwd1 (float): Coupling to the next subsystem.
        b_fwd2 (float): Coupling to the subsystem two ahead.
        eps (float): Young's-inequality weight of the back coupling.
        delta (float): Young's-inequality weight of the first forward coupling.
        delta_prime (float): Young's-inequality weight of the second forward
            coupling, unused by max coupling.
        coupling (AggregationKind): SUM or MAX.
        even_rows_drop_eps (bool): Drop eps from the decay margin of rows
            without back coupling.

    Raises:
        ValueError: If a coefficient is out of range or the decay margin
            ``b - eps - delta - delta_prime`` isn't positive.
    """
    b_diag: float
    b_back: float
    b_fwd1: float
    b_fwd2: float
    eps: float
    delta: float
    delta_prime: float
    coupling: AggregationKind = AggregationKind.SUM
    even_rows_drop_eps: bool = False

    def __post_init__(self) -> None:
        if self.coupling not in (AggregationKind.SUM, AggregationKind.MAX):
            raise ValueError(f"coupling must be sum or max, got {self.coupling}")
        if self.b_diag <= 0:
            raise ValueError(f"b_diag must be positive, got {self.b_diag}")
        for name in ("b_back", "b_fwd1", "b_fwd2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        for name in ("eps", "delta", "delta_prime"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.b_diag - self.eps - self.delta - self.delta_prime <= 0:
            raise ValueError("b_diag - eps - delta - delta_prime must be positive")

    @property
    def is_max(self) -> bool:
        return self.coupling is AggregationKind.MAX

    def decay_rate(self, back_row: bool) -> float:
        """Decay rate a_i = alpha_i / 2 of a row (w_i for sum, q_i for max coupling)."""
        eps = self.eps if back_row or not self.even_rows_drop_eps else 0.0
        if self.is_max:
            return self.b_diag - eps - self.delta

        return self.b_diag - eps - self.delta - self.delta_prime

    def scaled(self, factor: float) -> "ExampleParams":
        """Same parameters with every neighbour coupling multiplied by `factor`."""
        return dataclasses.replace(self, b_back=factor * self.b_back, b_fwd1=factor * self.b_fwd1,
                                   b_fwd2=factor * self.b_fwd2)


def _g(p: ExampleParams):
    return np.maximum if p.is_max else np.add


def _example_rhs(p: ExampleParams, back_row: bool):
    g = _g(p)

    def rhs(x: np.ndarray, neighbours: Sequence[np.ndarray], u: np.ndarray) -> np.ndarray:
        if back_row:
            prev, nxt, nxt2 = neighbours
            back = p.b_back * prev
        else:
            nxt, nxt2 = neighbours
            back = 0.0

        return -p.b_diag * x + back + g(p.b_fwd1 * nxt, p.b_fwd2 * nxt2) + u

    return rhs


def build_example_network(p: ExampleParams, N: int) -> TruncatedNetwork:
    """Truncation of the example chain to N scalar subsystems.

    Raises:
        ValueError: If N < 1.
    """
    if N < 1:
        raise ValueError("N must be at least 1")

    g = _g(p)

    def field(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        back = np.zeros_like(x)
        back[2::2] = p.b_back * x[1:-1:2]
        fwd1 = np.zeros_like(x)
        fwd1[:-1] = p.b_fwd1 * x[1:]
        fwd2 = np.zeros_like(x)
        fwd2[:-2] = p.b_fwd2 * x[2:]
        return -p.b_diag * x + back + g(fwd1, fwd2) + u

    dynamics = (SubsystemDynamics(1, _example_rhs(p, True), (BACK, FWD1, FWD2)),
                SubsystemDynamics(1, _example_rhs(p, False), (FWD1, FWD2)))
    return TruncatedNetwork(N, dynamics, field)


def derive_example_gains(p: ExampleParams) -> PeriodicOperator:
    """Linear gains of the example chain for ``V_i = x_i^2 / 2``.

    Row 0 of the period carries back and forward gains, row 1 forward gains
    only. Sum coupling gives ``b^2 / (2 eps w)`` style gains, max coupling
    ``b^2 / (eps q)`` style gains, where w and q are the row decay rates.

    Raises:
        ValueError: If a row decay rate isn't positive.
    """
    rows = []
    for back_row in (True, False):
        a = p.decay_rate(back_row)
        if a <= 0:
            raise ValueError(f"row decay rate must be positive, got {a}")

        if p.is_max:
            weights = (p.b_back ** 2 / (p.eps * a), p.b_fwd1 ** 2 / (p.delta * a), p.b_fwd2 ** 2 / (p.delta * a))
        else:
            weights = (p.b_back ** 2 / (2 * p.eps * a), p.b_fwd1 ** 2 / (2 * p.delta * a),
                       p.b_fwd2 ** 2 / (2 * p.delta_prime * a))

        entries = list(zip((BACK, FWD1, FWD2), weights))
        if not back_row:
            entries = entries[1:]
        rows.append(GainRow(tuple(entries), AggregationSpec(p.coupling)))

    op = PeriodicOperator((), tuple(rows))
    logger.debug("example gains: %s", [row.entries for row in op.period_rows])
    return op


@dataclasses.dataclass(frozen=True)
class RowCheck:
    """Length-2 walk statistic from one row type of the chain.

    Attributes:
        start (str): "back-row" or "forward-row".
        products (Tuple[Tuple[str, float], ...]): Named weight products, one
            per walk of length 2.
        value (float): Their sum for sum coupling, their maximum for max
            coupling.
    """
    start: str
    products: Tuple[Tuple[str, float], ...]
    value: float

    @property
    def margin(self) -> float:
        return 1.0 - self.value


@dataclasses.dataclass(frozen=True)
class ExampleSmallGainReport:
    """Small-gain conditions of the example chain for walks of length 2.

    A FAIL only means the length-2 test is inconclusive.

    Attributes:
        aggregation (AggregationKind): SUM or MAX.
        rows (Tuple[RowCheck, ...]): Checks from both row types. The
            forward-row check is the displayed condition of the example.
        graph_value (float): Same statistic from the gain graph.
        verdict (SmallGainVerdict): Cross-check with the iterated operator.
    """
    aggregation: AggregationKind
    rows: Tuple[RowCheck, ...]
    graph_value: float
    verdict: SmallGainVerdict

    @property
    def passed(self) -> bool:
        return all(row.value < 1 for row in self.rows)

    @property
    def margin(self) -> float:
        return min(row.margin for row in self.rows)

    @property
    def value(self) -> float:
        return max(row.value for row in self.rows)


def _pattern_weights(op: GainOperator) -> Tuple[AggregationKind, Dict[int, float], Dict[int, float]]:
    if not isinstance(op, PeriodicOperator) or op.prefix_rows or op.period != 2:
        raise PatternMismatchError("expected a period-2 operator without prefix rows")

    kind = uniform_aggregation(op)
    if kind not in (AggregationKind.SUM, AggregationKind.MAX):
        raise PatternMismatchError("rows must all use sum or all use max aggregation")

    back_row, fwd_row = (dict(row.entries) for row in op.period_rows)
    if not set(back_row) <= {BACK, FWD1, FWD2} or not set(fwd_row) <= {FWD1, FWD2}:
        raise PatternMismatchError(f"unexpected offsets {sorted(back_row)} / {sorted(fwd_row)}")

    return kind, back_row, fwd_row


def check_example_small_gain(op: GainOperator, n_max: int = 60) -> ExampleSmallGainReport:
    """Evaluate the length-2 walk conditions of the example chain.

    From a forward row (no back coupling) the walks go to the next back row,
    then back, forward or two ahead, or to the forward row two ahead, then one
    or two ahead. The condition is that every product (max coupling), or their
    sum (sum coupling), is below 1. The same statistic is evaluated from a
    back row.

    Raises:
        PatternMismatchError: If `op` doesn't have the example structure.
    """
    kind, b, f = _pattern_weights(op)
    gb, g1, g2 = b.get(BACK, 0.0), b.get(FWD1, 0.0), b.get(FWD2, 0.0)
    h1, h2 = f.get(FWD1, 0.0), f.get(FWD2, 0.0)

    from_forward = (("f1*back", h1 * gb), ("f1*f1", h1 * g1), ("f1*f2", h1 * g2),
                    ("f2*f1", h2 * h1), ("f2*f2", h2 * h2))
    from_back = (("back*f1", gb * h1), ("back*f2", gb * h2),
                 ("f1*f1", g1 * h1), ("f1*f2", g1 * h2),
                 ("f2*back", g2 * gb), ("f2*f1", g2 * g1), ("f2*f2", g2 * g2))

    graph = build_graph(op)
    if kind is AggregationKind.MAX:
        combine = max
        graph_value = max_path_product(graph, 2)
    else:
        combine = math.fsum
        graph_value = sum_path_products(graph, 2)

    rows = (RowCheck("forward-row", from_forward, combine(v for _, v in from_forward)),
            RowCheck("back-row", from_back, combine(v for _, v in from_back)))
    report = ExampleSmallGainReport(kind, rows, graph_value, small_gain_check(op, n_max))

    if report.passed:
        logger.info("length-2 small-gain conditions hold, margin %r", report.margin)
    else:
        logger.warning("length-2 small-gain conditions fail (value %r), longer walks may still pass; "
                       "operator check: %s", report.value, report.verdict)

    return report


def example_lyapunov(p: ExampleParams, cert: DecayCertificate, input_slope: float = 1.0) -> CompositeLyapunov:
    """Composite Lyapunov function of the example chain with ``V_i = x_i^2 / 2``.

    Raises:
        NoCertificateError: If `cert` isn't valid.
    """
    subsystems = (SubsystemLyapunov.quadratic(p.decay_rate(True), input_slope),
                  SubsystemLyapunov.quadratic(p.decay_rate(False), input_slope))
    return CompositeLyapunov.from_subsystems(cert, subsystems, periodic=True)


def generic_vector_field(net: TruncatedNetwork, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Assemble ``f(x, u)`` from the per-subsystem right-hand sides."""
    xo, uo = net.state_offsets, net.input_offsets
    out = np.empty_like(x)
    for i in range(net.size):
        dyn = net.at(i)
        neighbours = []
        for offset in dyn.neighbor_offsets:
            j = i + offset
            if 0 <= j < net.size:
                neighbours.append(x[xo[j]:xo[j + 1]])
            else:
                neighbours.append(np.zeros(net.at(j).state_dim))

        out[xo[i]:xo[i + 1]] = dyn.rhs(x[xo[i]:xo[i + 1]], neighbours, u[uo[i]:uo[i + 1]])

    return out


def vector_field(net: TruncatedNetwork, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``f(x, u)``, vectorized when the network provides it."""
    if net.fast_field is not None:
        return net.fast_field(x, u)

    return generic_vector_field(net, x, u)


def _rk4(net: TruncatedNetwork, x0: np.ndarray, u: InputSignal, steps: int, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    states = np.empty((steps + 1, len(x0)))
    inputs = np.empty((steps + 1, u.width))
    states[0] = x = x0
    inputs[0] = u(0.0)

    for k in range(steps):
        t = k * dt
        u_mid = u(t + dt / 2)
        k1 = vector_field(net, x, inputs[k])
        k2 = vector_field(net, x + dt / 2 * k1, u_mid)
        k3 = vector_field(net, x + dt / 2 * k2, u_mid)
        k4 = vector_field(net, x + dt * k3, u((k + 1) * dt))
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise BlowUpError(f"state stopped being finite at t={(k + 1) * dt!r}")

        states[k + 1] = x
        inputs[k + 1] = u((k + 1) * dt)

    return states, inputs


def integrate(net: TruncatedNetwork, x0: Sequence[float], u: InputSignal, T: float, dt: float, *,
              error_estimate: bool = False) -> Trajectory:
    """Classical fixed-step RK4 from x0 over ``[0, T]``.

    The number of steps is ``round(T / dt)``. With `error_estimate` the run is
    repeated with ``dt / 2`` and the terminal difference divided by 15 is
    stored on the trajectory.

    Raises:
        ValueError: If the step or horizon is invalid or a dimension doesn't match.
        BlowUpError: If the state stops being finite.
    """
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    if T < dt:
        raise ValueError(f"horizon {T} is shorter than the time step {dt}")

    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (net.state_width,):
        raise ValueError(f"initial state must have shape ({net.state_width},), got {x0.shape}")
    if u.width != net.input_width:
        raise ValueError(f"input has {u.width} channels, network expects {net.input_width}")

    steps = int(round(T / dt))
    states, inputs = _rk4(net, x0, u, steps, dt)
    times = np.arange(steps + 1) * dt

    estimate = None
    if error_estimate:
        fine, _ = _rk4(net, x0, u, 2 * steps, dt / 2)
        estimate = float(np.max(np.abs(fine[-1] - states[-1]), initial=0.0)) / 15.0

    logger.debug("integrated N=%d over %d steps", net.size, steps)
    return Trajectory(times, states, inputs, estimate)


@dataclasses.dataclass(frozen=True)
class IssBoundReport:
    """Check of ``psi1(|x(t)|) / s0_max <= max(v(t), gamma(|u|))``.

    v solves ``v' = -alpha(v)`` from ``V(x0)``.

    Attributes:
        passed (bool): Whether the bound holds at every sample.
        worst_margin (float): Smallest ``rhs - lhs``.
        worst_relative_margin (float): Smallest ``1 - lhs / rhs`` over
            samples with positive right-hand side.
        worst_time (float): Sample time of the smallest margin.
        samples (int): Number of samples checked.
    """
    passed: bool
    worst_margin: float
    worst_relative_margin: float
    worst_time: float
    samples: int


def _comparison_solution(cl: CompositeLyapunov, v0: float, times: np.ndarray) -> np.ndarray:
    """RK4 solution of ``v' = -alpha(v)`` from v0 on the sample times.

    v never leaves ``[0, v0]``, so alpha is tabulated there once and
    interpolated linearly in the stages.
    """
    out = np.zeros(len(times))
    if v0 <= 0:
        return out

    nodes = np.linspace(0.0, v0, DECAY_TABLE_POINTS)
    rates = np.asarray([composite_decay_rate(cl, float(v)) for v in nodes], dtype=float)

    def rate(v: float) -> float:
        return -float(np.interp(v, nodes, rates))

    out[0] = v = v0
    for k in range(len(times) - 1):
        h = times[k + 1] - times[k]
        k1 = rate(v)
        k2 = rate(v + h / 2 * k1)
        k3 = rate(v + h / 2 * k2)
        k4 = rate(v + h * k3)
        v = max(v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0)
        out[k + 1] = v

    return out


def iss_bound_check(traj: Trajectory, cl: CompositeLyapunov, u: InputSignal, tol: float = 1e-12) -> IssBoundReport:
    """Empirical check of the ISS estimate implied by the composite function."""
    values = evaluate_along(cl, traj.states)
    envelope = _comparison_solution(cl, float(values[0]), traj.times)
    gamma = composite_external_gain(cl, u.sup_norm)

    lhs = np.asarray(cl.psi1(traj.sup_norms()), dtype=float) / cl.s0_max
    rhs = np.maximum(envelope, gamma)
    margins = rhs - lhs
    positive = rhs > 0
    relative = np.where(positive, 1.0 - lhs / np.where(positive, rhs, 1.0), 0.0)

    k = int(np.argmin(margins))
    return IssBoundReport(bool(np.all(margins >= -tol)), float(margins[k]), float(np.min(relative)),
                          float(traj.times[k]), len(margins))


@dataclasses.dataclass(frozen=True, eq=False)
class SimulationJob:
    """One independent simulation of a sweep."""
    network: TruncatedNetwork
    x0: np.ndarray
    signal: InputSignal
    horizon: float
    step: float

    @classmethod
    def example(cls, p: ExampleParams, N: int, amplitude: float, horizon: float, step: float) -> "SimulationJob":
        """Example chain of size N from the all-ones state under a uniform input."""
        return cls(build_example_network(p, N), np.ones(N), InputSignal.uniform(amplitude, N), horizon, step)

    def run(self) -> Trajectory:
        return integrate(self.network, self.x0, self.signal, self.horizon, self.step)


def simulate_sweep(jobs: Sequence[SimulationJob], workers: int = 1) -> List[Trajectory]:
    """Run independent simulations, results in job order."""
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if workers == 1:
        return [job.run() for job in jobs]

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(SimulationJob.run, jobs))


@dataclasses.dataclass(frozen=True)
class YoungCheck:
    """Young's-inequality estimate at one sampled point.

    Attributes:
        antecedent (bool): Whether ``V_i >= mu~(gamma~_ij V_j) / a_i`` holds.
        derivative (float): Exact ``dV_i/dx_i * f_i`` at zero input.
        bound (float): ``-(alpha_i - a_i) V_i``.
    """
    antecedent: bool
    derivative: float
    bound: float

    @property
    def margin(self) -> float:
        return self.bound - self.derivative


def young_estimate_margin(p: ExampleParams, back_row: bool, x: float, neighbours: Sequence[float]) -> YoungCheck:
    """Compare the exact derivative of ``V_i = x_i^2 / 2`` with its Young's estimate.

    Args:
        p: Chain parameters.
        back_row: Whether the row has back coupling.
        x: Own state.
        neighbours: States at offsets -1, 1, 2 for back rows, 1, 2 otherwise.
    """
    expected = 3 if back_row else 2
    if len(neighbours) != expected:
        raise ValueError(f"expected {expected} neighbour states, got {len(neighbours)}")

    derivative = float(x * _example_rhs(p, back_row)(np.float64(x), [np.float64(n) for n in neighbours], 0.0))

    v = 0.5 * x * x
    v_nb = [0.5 * n * n for n in neighbours]
    delta2 = p.delta if p.is_max else p.delta_prime
    gains = [p.b_fwd1 ** 2 / (2 * p.delta), p.b_fwd2 ** 2 / (2 * delta2)]
    if back_row:
        gains.insert(0, p.b_back ** 2 / (2 * p.eps))

    terms = [g * w for g, w in zip(gains, v_nb)]
    aggregated = 2 * max(terms) if p.is_max else math.fsum(terms)
    a = p.decay_rate(back_row)

    return YoungCheck(v >= aggregated / a, derivative, -a * v)
