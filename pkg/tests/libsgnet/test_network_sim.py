import math

import numpy as np
import pytest
from scipy import linalg

import libsgnet
from libsgnet import AggregationKind, ExampleParams, InputSignal, SubsystemDynamics, TruncatedNetwork

WORKED = ExampleParams(1.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1)
MAX_PARAMS = ExampleParams(1.0, 0.3, 0.3, 0.3, 0.1, 0.1, 0.1, coupling=AggregationKind.MAX)


@pytest.fixture(scope="module")
def worked_cl() -> libsgnet.CompositeLyapunov:
    cert = libsgnet.certify_operator(libsgnet.derive_example_gains(WORKED), 60)
    return libsgnet.example_lyapunov(WORKED, cert)


@pytest.fixture(scope="module")
def worked_runs():
    jobs = [libsgnet.SimulationJob.example(WORKED, N, 0.0, 10.0, 1e-3) for N in (50, 100, 200)]
    return jobs, libsgnet.simulate_sweep(jobs, workers=3)


def test_worked_gains():
    op = libsgnet.derive_example_gains(WORKED)
    back_row, forward_row = op.period_rows
    assert back_row.targets == (-1, 1, 2)
    assert forward_row.targets == (1, 2)
    for w in back_row.weights + forward_row.weights:
        assert w == pytest.approx(1 / 14, rel=1e-12)


def test_worked_small_gain():
    report = libsgnet.check_example_small_gain(libsgnet.derive_example_gains(WORKED))
    forward, back = report.rows
    assert forward.start == "forward-row"
    assert len(forward.products) == 5
    assert forward.value == pytest.approx(5 / 196)
    assert back.value == pytest.approx(7 / 196)
    assert report.passed
    assert report.graph_value == pytest.approx(7 / 196)
    assert report.verdict.satisfied
    assert report.verdict.n <= 2


def test_max_coupling_fails():
    op = libsgnet.derive_example_gains(MAX_PARAMS)
    for w in op.period_rows[0].weights:
        assert w == pytest.approx(1.125)

    report = libsgnet.check_example_small_gain(op)
    assert not report.passed
    assert report.value == pytest.approx(1.265625)
    assert report.graph_value == pytest.approx(1.265625)
    assert report.aggregation is AggregationKind.MAX


def test_strong_coupling_fails():
    op = libsgnet.derive_example_gains(WORKED.scaled(10))
    assert op.period_rows[0].weights[0] == pytest.approx(100 / 14)

    report = libsgnet.check_example_small_gain(op)
    assert not report.passed
    assert not report.verdict.satisfied
    assert report.margin < 0


def test_pattern_mismatch():
    with pytest.raises(libsgnet.PatternMismatchError):
        libsgnet.check_example_small_gain(libsgnet.FiniteOperator.from_matrix([[0.1]]))

    rows = libsgnet.derive_example_gains(WORKED).period_rows
    with pytest.raises(libsgnet.PatternMismatchError):
        libsgnet.check_example_small_gain(libsgnet.PeriodicOperator((), rows + rows[:1]))


@pytest.mark.parametrize("kwargs", [
    dict(b_diag=0.0),
    dict(eps=0.5, delta=0.3, delta_prime=0.3),
    dict(b_back=-0.1),
    dict(delta=0.0),
    dict(coupling=AggregationKind.MIXED),
])
def test_params_validation(kwargs):
    values = dict(b_diag=1.0, b_back=0.1, b_fwd1=0.1, b_fwd2=0.1, eps=0.1, delta=0.1, delta_prime=0.1)
    values.update(kwargs)
    with pytest.raises(ValueError):
        ExampleParams(**values)


def test_decay_rate():
    assert WORKED.decay_rate(True) == pytest.approx(0.7)
    assert WORKED.decay_rate(False) == pytest.approx(0.7)

    dropped = ExampleParams(1.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, even_rows_drop_eps=True)
    assert dropped.decay_rate(False) == pytest.approx(0.8)
    assert MAX_PARAMS.decay_rate(True) == pytest.approx(0.8)


@pytest.mark.parametrize("params", [WORKED, MAX_PARAMS])
def test_fast_field_matches_generic(params):
    net = libsgnet.build_example_network(params, 7)
    rng = np.random.default_rng(4)
    for _ in range(10):
        x, u = rng.normal(size=7), rng.normal(size=7)
        assert libsgnet.vector_field(net, x, u) == pytest.approx(libsgnet.generic_vector_field(net, x, u))

    assert net.state_width == 7
    assert net.input_width == 7
    with pytest.raises(ValueError):
        libsgnet.build_example_network(params, 0)


def test_integrate_scalar_decay():
    net = TruncatedNetwork(1, (SubsystemDynamics(1, lambda x, nb, u: -x + u),))
    traj = libsgnet.integrate(net, [1.0], InputSignal.zero(1), 1.0, 0.01, error_estimate=True)
    assert len(traj.times) == 101
    assert traj.step == pytest.approx(0.01)
    assert traj.final_state[0] == pytest.approx(math.exp(-1.0), abs=1e-9)
    assert 0 <= traj.error_estimate < 1e-9


def test_integrate_errors():
    net = TruncatedNetwork(1, (SubsystemDynamics(1, lambda x, nb, u: x * x),))
    with pytest.raises(libsgnet.BlowUpError), np.errstate(all="ignore"):
        libsgnet.integrate(net, [1.0], InputSignal.zero(1), 2.0, 0.01)

    with pytest.raises(ValueError):
        libsgnet.integrate(net, [1.0], InputSignal.zero(1), 1.0, 0.0)
    with pytest.raises(ValueError):
        libsgnet.integrate(net, [1.0, 1.0], InputSignal.zero(1), 1.0, 0.1)
    with pytest.raises(ValueError):
        libsgnet.integrate(net, [1.0], InputSignal.zero(2), 1.0, 0.1)


def test_input_signal():
    u = InputSignal.piecewise([0.0, 1.0], [[0.0], [-2.0]])
    assert u(0.999)[0] == 0
    assert u(1.0)[0] == -2
    assert u.sup_norm == 2
    assert InputSignal.uniform(0.0, 3).kind is libsgnet.InputKind.ZERO
    assert InputSignal.uniform(1.5, 3).sup_norm == 1.5

    with pytest.raises(ValueError):
        InputSignal.piecewise([0.0, 0.0], [[0.0], [1.0]])
    with pytest.raises(ValueError):
        InputSignal.piecewise([1.0], [[0.0]])


def test_worked_simulation(worked_cl, worked_runs):
    jobs, runs = worked_runs
    finals = []
    for job, traj in zip(jobs, runs):
        values = libsgnet.evaluate_along(worked_cl, traj.states)
        assert np.all(np.diff(values) < 0)

        report = libsgnet.check_implication_along_trajectory(worked_cl, traj, job.signal)
        assert report.ok
        assert report.checked == len(traj.times) - 1
        assert report.slack_constant * traj.step <= 5 * traj.step
        assert report.stable_under_halving

        finals.append(traj.sup_norms()[-1])

    assert (max(finals) - min(finals)) / max(finals) < 0.05


def test_truncation_consistency(worked_runs):
    _, runs = worked_runs
    small, large = runs[0], runs[1]
    assert small.states.shape[1] == 50
    assert large.states.shape[1] == 100
    np.testing.assert_allclose(small.states[:, :10], large.states[:, :10], rtol=0, atol=1e-6)


def test_iss_bound_independent_of_size(worked_cl, worked_runs):
    jobs, runs = worked_runs
    margins = []
    for job, traj in zip(jobs, runs):
        iss = libsgnet.iss_bound_check(traj, worked_cl, job.signal)
        assert iss.passed
        assert iss.samples == len(traj.times)
        margins.append(iss.worst_relative_margin)

    assert margins == pytest.approx([margins[0]] * len(margins), rel=1e-6)


def test_constant_input_sublevel(worked_cl):
    job = libsgnet.SimulationJob.example(WORKED, 50, 1.0, 10.0, 1e-3)
    traj = job.run()
    values = libsgnet.evaluate_along(worked_cl, traj.states)
    bound = libsgnet.composite_external_gain(worked_cl, 1.0) * 1.05
    inside = values <= bound
    first = int(np.argmax(inside))
    assert inside[first]
    assert np.all(inside[first:])
    assert libsgnet.iss_bound_check(traj, worked_cl, job.signal).passed


def test_strong_coupling_violates(worked_cl):
    job = libsgnet.SimulationJob.example(WORKED.scaled(10), 50, 0.0, 1.0, 1e-3)
    report = libsgnet.check_implication_along_trajectory(worked_cl, job.run(), job.signal)
    assert not report.ok


def test_sweep_order():
    jobs = [libsgnet.SimulationJob.example(WORKED, N, 0.0, 0.1, 1e-2) for N in (3, 5, 4)]
    runs = libsgnet.simulate_sweep(jobs, workers=2)
    assert [traj.states.shape[1] for traj in runs] == [3, 5, 4]
    with pytest.raises(ValueError):
        libsgnet.simulate_sweep(jobs, workers=0)


@pytest.mark.parametrize("params", [WORKED, MAX_PARAMS])
def test_young_estimate(params):
    rng = np.random.default_rng(9)
    hits = 0
    for _ in range(500):
        back_row = bool(rng.integers(2))
        x = rng.uniform(-2.0, 2.0)
        neighbours = rng.uniform(-2.0, 2.0, 3 if back_row else 2)
        check = libsgnet.young_estimate_margin(params, back_row, x, neighbours)
        if check.antecedent:
            hits += 1
            assert check.derivative <= check.bound + 1e-12

    assert hits > 0
    with pytest.raises(ValueError):
        libsgnet.young_estimate_margin(params, True, 1.0, [1.0])


def test_rk4_error_ratio():
    net = libsgnet.build_example_network(WORKED, 7)
    zero = np.zeros(7)
    a = np.column_stack([libsgnet.vector_field(net, e, zero) for e in np.eye(7)])
    x0 = np.ones(7)
    exact = linalg.expm(2.0 * a) @ x0

    errors = []
    for dt in (0.1, 0.05):
        traj = libsgnet.integrate(net, x0, InputSignal.zero(7), 2.0, dt)
        errors.append(np.max(np.abs(traj.final_state - exact)))

    assert errors[0] / errors[1] == pytest.approx(16.0, rel=0.1)


def test_decay_rate_tabulated_once(worked_cl, worked_runs, monkeypatch):
    jobs, runs = worked_runs
    expected = libsgnet.iss_bound_check(runs[0], worked_cl, jobs[0].signal)

    calls = []
    decay_rate = libsgnet.network_sim.composite_decay_rate

    def counted(cl, r, mu=None):
        calls.append(r)
        return decay_rate(cl, r, mu)

    monkeypatch.setattr(libsgnet.network_sim, "composite_decay_rate", counted)
    report = libsgnet.iss_bound_check(runs[0], worked_cl, jobs[0].signal)
    assert len(calls) == libsgnet.network_sim.DECAY_TABLE_POINTS
    assert len(runs[0].times) > len(calls)
    assert report == expected


def test_comparison_solution_linear_decay(worked_cl):
    times = np.linspace(0.0, 2.0, 201)
    rate = libsgnet.composite_decay_rate(worked_cl, 1.0)
    solution = libsgnet.network_sim._comparison_solution(worked_cl, 3.0, times)
    np.testing.assert_allclose(solution, 3.0 * np.exp(-rate * times), rtol=1e-8)
