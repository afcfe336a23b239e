import numpy as np
import pytest

from symabs import builtin
from symabs.errors import AdmissibilityViolationError
from symabs.geometry import Box
from symabs.hierarchy import (
    AffineInterface,
    TrialBudget,
    check_closeness,
    check_robust_simulation,
    cosimulate,
    pair_initial,
    run_disturbance_study,
)
from symabs.lattice import Quantizer
from symabs.systems import (
    AbstractSystem,
    ConcreteSystem,
    ConstantSignal,
    InputMap,
    sample_disturbance,
    zero_signal,
)


def integrator_pair(u_set=None, eta=0.2):
    """dx/dt = u with identity output; its abstraction under the same law."""
    q = Quantizer(n=2, eta=eta)
    concrete = ConcreteSystem(
        f=lambda t, x, u, w: np.asarray(u) + w,
        h=lambda x: np.asarray(x),
        n=2, m=2, l=2, n_w=2,
        u_set=u_set,
        w_set=Box.point([0.0, 0.0]),
    )
    abstract = AbstractSystem(
        f_d=lambda t, x, v: np.asarray(v),
        quantizer=q,
        h=lambda x: np.asarray(x),
        input_map=InputMap(box=None),
    )
    return concrete, abstract, q


class TestPairInitial:
    def test_lattice_point_maps_to_itself(self):
        q = Quantizer(n=2, eta=0.15)
        p = q.point_from_indices((3, -4))
        assert pair_initial(q, p.coords) == p

    def test_known_pairing(self):
        q = Quantizer(n=2, eta=0.15)  # spacing ~0.21213
        p = pair_initial(q, np.array([1.0, 2.0]))
        assert p.indices == (5, 9)
        assert p.coordinates[0] == pytest.approx(1.06066, abs=1e-5)
        assert p.coordinates[1] == pytest.approx(1.90919, abs=1e-5)
        d = np.linalg.norm(np.array([1.0, 2.0]) - p.coords)
        assert d == pytest.approx(0.10921, abs=1e-4)
        assert d <= 0.15

    def test_within_eta_everywhere(self):
        q = Quantizer(n=3, eta=0.37)
        rng = np.random.default_rng(0)
        for x in rng.uniform(-4, 4, (200, 3)):
            assert np.linalg.norm(x - pair_initial(q, x).coords) <= q.eta


class TestCosimulate:
    def test_passthrough_interface_keeps_u_equal_v(self):
        concrete, abstract, q = integrator_pair()
        iface = AffineInterface(gain=np.zeros((2, 2)))
        x0 = q.point_from_indices((1, 1)).coords
        run = cosimulate(
            concrete, abstract, iface, x0, ConstantSignal([0.3, -0.2]),
            zero_signal(2), (0, 2), 1e-2,
        )
        assert np.array_equal(run.u, run.v)
        # identical fields from a lattice start: only quantization error
        assert run.max_err <= q.eta + 1e-12

    def test_initial_error_within_rho_eta(self):
        setup = builtin.example1()
        rng = np.random.default_rng(9)
        for x0 in rng.uniform(-3, 3, (5, 2)):
            run = cosimulate(
                setup.concrete, setup.abstract, setup.interface, x0,
                setup.v, zero_signal(2), (0, 0.01), 1e-3,
            )
            assert run.err[0] <= setup.eta + 1e-12  # rho = ||C|| = 1

    def test_example1_run_is_close(self):
        setup = builtin.example1()
        run = cosimulate(
            setup.concrete, setup.abstract, setup.interface, setup.x0,
            setup.v, zero_signal(2), (0, 10.0), 1e-3,
        )
        assert run.max_err <= 0.5
        assert run.admissible

    def test_admissibility_violation_aborts(self):
        concrete, abstract, q = integrator_pair(u_set=Box.cube(0.1, 2))
        iface = AffineInterface(gain=np.zeros((2, 2)))
        with pytest.raises(AdmissibilityViolationError):
            cosimulate(
                concrete, abstract, iface, np.zeros(2), ConstantSignal([5.0, 0.0]),
                zero_signal(2), (0, 1), 1e-2,
            )

    def test_interface_error_within_margin_bound(self):
        # empirical check of the closed-form ||u - v|| bound on a short run
        setup = builtin.example2()
        from symabs.certificates import interface_error_margin

        v = ConstantSignal([0.5, -0.5])
        w = sample_disturbance(setup.concrete.w_set, 5, 0.1, (0, 5))
        run = cosimulate(
            setup.concrete, setup.abstract, setup.interface, setup.x0, v, w, (0, 5), 1e-3
        )
        bound = interface_error_margin(setup.certificate, setup.eta, setup.w_sup)
        assert float(np.max(run.interface_error())) <= bound + 1e-9

    def test_csv_layout(self, tmp_path):
        concrete, abstract, q = integrator_pair()
        iface = AffineInterface(gain=np.zeros((2, 2)))
        run = cosimulate(
            concrete, abstract, iface, np.zeros(2), ConstantSignal([0.1, 0.1]),
            zero_signal(2), (0, 0.1), 0.05,
        )
        path = tmp_path / "run.csv"
        run.write_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == (
            "t,x1_1,x1_2,xhat2_1,xhat2_2,x2_1,x2_2,"
            "y1_1,y1_2,y2_1,y2_2,err,u_1,u_2,v_1,v_2"
        )

    def test_err_column_consistent_with_outputs(self):
        setup = builtin.example1()
        run = cosimulate(
            setup.concrete, setup.abstract, setup.interface, setup.x0,
            setup.v, zero_signal(2), (0, 1), 1e-2,
        )
        recomputed = np.linalg.norm(run.y1 - run.y2, axis=1)
        assert np.max(np.abs(recomputed - run.err)) <= 1e-12


class TestCheckCloseness:
    def test_zero_error_passes(self):
        concrete, abstract, q = integrator_pair()
        iface = AffineInterface(gain=np.zeros((2, 2)))
        run = cosimulate(
            concrete, abstract, iface, np.zeros(2), zero_signal(2),
            zero_signal(2), (0, 1), 0.1,
        )
        assert check_closeness(run, 1e-6).passed

    def test_violation_reports_earliest_sample(self):
        concrete, abstract, q = integrator_pair()
        # biased interface makes the concrete copy drift 0.5 per unit time
        biased = lambda t, v, x1, x2: np.asarray(v) + np.array([0.5, 0.0])
        run = cosimulate(
            concrete, abstract, biased, np.zeros(2), zero_signal(2),
            zero_signal(2), (0, 2), 0.1,
        )
        res = check_closeness(run, 0.3)
        assert not res.passed
        assert res.err > 0.3
        before = run.err[run.times < res.t]
        assert np.all(before <= 0.3)


class TestRobustSimulation:
    def test_trivial_integrator_passes(self):
        concrete, abstract, q = integrator_pair()
        iface = AffineInterface(gain=np.zeros((2, 2)))
        res = check_robust_simulation(
            concrete, abstract, iface, epsilon=2 * q.eta + 0.05, eps_tilde=0.01,
            budget=TrialBudget(n_x0=3, n_v=2, n_w=2),
            x0_box=Box.cube(1.0, 2), t_span=(0, 1), dt=1e-2,
            v_box=Box.cube(0.5, 2), seed=4,
        )
        assert res.passed
        assert res.trials == 12

    def test_example2_short_horizon_passes(self):
        setup = builtin.example2()
        res = check_robust_simulation(
            setup.concrete, setup.abstract, setup.interface,
            epsilon=1.0, eps_tilde=0.105,
            budget=TrialBudget(n_x0=3, n_v=2, n_w=3),
            x0_box=Box.cube(1.0, 2), t_span=(0, 3), dt=1e-3, seed=2,
        )
        assert res.passed
        assert res.hypothesis_held

    def test_inflated_disturbance_fails(self):
        setup = builtin.example2()
        big = ConcreteSystem(
            f=setup.concrete.f, h=setup.concrete.h, n=2, m=2, l=2, n_w=2,
            u_set=None,  # lift the input monitor to expose the closeness failure
            w_set=Box.cube(50 * 0.05, 2),
        )
        res = check_robust_simulation(
            big, setup.abstract, setup.interface,
            epsilon=1.0, eps_tilde=0.105,
            budget=TrialBudget(n_x0=2, n_v=2, n_w=3),
            x0_box=Box.cube(1.0, 2), t_span=(0, 5), dt=1e-3, seed=2,
        )
        assert not res.passed
        assert not res.hypothesis_held
        assert res.counterexample is not None


class TestDisturbanceStudy:
    def test_zero_trials_vacuous(self):
        setup = builtin.example1()
        study = run_disturbance_study(
            setup.concrete, setup.abstract, setup.interface, setup.x0, setup.v,
            (0, 1), 1e-2, setup.epsilon, n_trials=0, base_seed=0,
        )
        assert study.n == 0
        assert study.passed()
        assert study.global_max_err == 0.0

    def test_batch_matches_single_runs(self):
        # the batched driver must agree with one-at-a-time co-simulation
        setup = builtin.example2()
        v = ConstantSignal([0.4, 0.2])
        t_span, dt = (0, 2), 1e-3
        study = run_disturbance_study(
            setup.concrete, setup.abstract, setup.interface, setup.x0, v,
            t_span, dt, setup.epsilon, n_trials=3, base_seed=17,
            w_hold=setup.disturbance_hold,
        )
        for i, stats in enumerate(study.trials):
            w = sample_disturbance(setup.concrete.w_set, 17 + i, 0.1, t_span)
            run = cosimulate(
                setup.concrete, setup.abstract, setup.interface, setup.x0, v, w,
                t_span, dt,
            )
            assert stats.max_err == pytest.approx(run.max_err, abs=1e-12)
            assert stats.max_u_inf == pytest.approx(float(np.max(np.abs(run.u))), abs=1e-12)
            assert stats.max_interface_err == pytest.approx(
                float(np.max(run.interface_error())), abs=1e-12
            )

    def test_trial_seeds_follow_base(self):
        setup = builtin.example2()
        v = ConstantSignal([0.0, 0.0])
        study = run_disturbance_study(
            setup.concrete, setup.abstract, setup.interface, setup.x0, v,
            (0, 1), 1e-2, setup.epsilon, n_trials=4, base_seed=100,
        )
        assert [t.seed for t in study.trials] == [100, 101, 102, 103]
