"""Schedule synthesis: rescaling, index assignment, set pulses, robustness,
serialization, and the dense cycle-average identity."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import helpers
from walshpulse import compiler
from walshpulse.analysis import average_hamiltonian
from walshpulse.compiler import (
    CutoffConfig,
    DivisionByZeroCoupling,
    PulseSchedule,
    ResourceHamiltonian,
    RobustnessPolicy,
    TargetSpec,
    TwoQubitGate,
    assign_indices,
    assign_indices_with_cutoff,
    concat_schedules,
    dd_guard,
    execution_tau,
    gate_layer_to_target,
    mod_compress,
    pulse_count,
    rescaling_graph,
    robustify,
)
from walshpulse.walsh import WalshAssignment


def chain_target(n, j=1.0, channel="X"):
    return TargetSpec(n, [(i, i + 1, channel, channel, -j) for i in range(n - 1)])


def random_target(rng, n, channels="XY"):
    terms = []
    for i in range(n):
        for j in range(i + 1, n):
            for ch in channels:
                if rng.random() < 0.35:
                    terms.append((i, j, ch, ch, float(rng.uniform(-2, 2))))
    if not terms:
        terms = [(0, 1, "X", "X", 1.0)]
    return TargetSpec(n, terms)


class TestResourceHamiltonian:
    def test_power_law_couplings(self):
        res = ResourceHamiltonian.power_law(5, 3.0, 2.0)
        for i in range(5):
            assert res.jx[i, i] == 0.0
            for j in range(i + 1, 5):
                assert res.jx[i, j] == pytest.approx(-2.0 / (j - i) ** 3, rel=1e-15)
        assert np.array_equal(res.jx, res.jx.T)
        assert np.array_equal(res.jx, res.jy)

    def test_power_law_2d_positions(self):
        pos = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
        res = ResourceHamiltonian.power_law(3, 2.0, 1.0, positions=pos)
        assert res.jx[1, 2] == pytest.approx(-1.0 / 2.0)  # distance sqrt(2)

    def test_validation(self):
        with pytest.raises(ValueError):
            ResourceHamiltonian(2, np.array([[0.0, 1.0], [2.0, 0.0]]), np.zeros((2, 2)), None)
        with pytest.raises(ValueError):
            ResourceHamiltonian(2, np.eye(2), np.zeros((2, 2)), None)
        with pytest.raises(ValueError):
            ResourceHamiltonian.power_law(2, 1.0, positions=[0.0, 0.0])
        with pytest.raises(ValueError):
            ResourceHamiltonian.power_law(2, 1.0, fields=np.zeros((3, 3)))


class TestTargetSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            TargetSpec(3, [(1, 1, "X", "X", 1.0)])
        with pytest.raises(ValueError):
            TargetSpec(3, [(0, 1, "X", "Q", 1.0)])
        with pytest.raises(ValueError):
            TargetSpec(3, [(0, 1, "X", "X", float("inf"))])


class TestRescaling:
    def test_target_equals_resource_gives_unit_weights(self):
        res = ResourceHamiltonian.power_law(4, 1.5)
        terms = [(i, j, ch, ch, res.jx[i, j])
                 for i in range(4) for j in range(i + 1, 4) for ch in "XY"]
        gx, gy = rescaling_graph(TargetSpec(4, terms), res)
        for g in (gx, gy):
            assert set(g.weights) == {(i, j) for i in range(4) for j in range(i + 1, 4)}
            assert all(w == 1.0 for w in g.weights.values())

    def test_nearest_neighbour_chain(self):
        res = ResourceHamiltonian.power_law(5, 3.0)
        tgt = TargetSpec(5, [(i, i + 1, "X", "X", res.jx[i, i + 1]) for i in range(4)])
        gx, gy = rescaling_graph(tgt, res)
        assert set(gx.weights) == {(i, i + 1) for i in range(4)}
        assert all(w == 1.0 for w in gx.weights.values())
        assert not gy.weights

    def test_ratio_weight(self):
        res = ResourceHamiltonian.power_law(2, 3.0)
        gx, _ = rescaling_graph(TargetSpec(2, [(0, 1, "X", "X", 2.0 * res.jx[0, 1])]), res)
        assert gx.weights[(0, 1)] == 2.0

    def test_zero_resource_coupling_rejected(self):
        jx = np.zeros((2, 2))
        res = ResourceHamiltonian(2, jx, jx.copy(), None)
        with pytest.raises(DivisionByZeroCoupling):
            rescaling_graph(TargetSpec(2, [(0, 1, "X", "X", 1.0)]), res)


class TestIndexAssignment:
    def test_matched_pairs_share_others_distinct(self):
        a = assign_indices({(0, 1), (2, 3)}, set(), 4)
        assert a.x == (0, 0, 1, 1)
        assert a.y == (0, 1, 2, 3)

    def test_empty_matchings_fully_distinct(self):
        a = assign_indices(set(), set(), 2)
        assert a.x == (0, 1) and a.y == (0, 1)

    def test_equality_pattern(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            n = int(rng.integers(2, 10))
            perm = rng.permutation(n)
            pairs = {tuple(sorted((int(perm[2 * k]), int(perm[2 * k + 1]))))
                     for k in range(int(rng.integers(0, n // 2 + 1)))}
            a = assign_indices(pairs, set(), n)
            for i in range(n):
                for j in range(i + 1, n):
                    want_equal = (i, j) in pairs
                    assert (a.x[i] == a.x[j]) == want_equal
            assert len(set(a.y)) == n

    def test_window_cutoff_reuses_far_indices(self):
        lam = 4
        pairs = {(i, i + 1) for i in range(0, 11, 2)}
        a = assign_indices_with_cutoff(pairs, set(), 12, CutoffConfig(lam, "window"))
        assert max(max(a.x), max(a.y)) < 2 * lam
        for vals, matched in ((a.x, pairs), (a.y, set())):
            for i in range(12):
                for j in range(i + 1, 12):
                    if vals[i] == vals[j] and (i, j) not in matched:
                        assert j - i > lam

    def test_mod_cutoff_bounds_max_index(self):
        pairs = {(i, i + 1) for i in range(0, 11, 2)}
        a = assign_indices_with_cutoff(pairs, set(), 12, CutoffConfig(8, "mod"))
        assert max(max(a.x), max(a.y)) <= 8

    def test_long_pair_rejected(self):
        with pytest.raises(ValueError):
            assign_indices_with_cutoff({(0, 6)}, set(), 8, CutoffConfig(4, "window"))

    def test_mod_compress_detects_aliasing(self):
        a = WalshAssignment((0, 1, 2, 3), (4, 5, 6, 7))
        with pytest.raises(ValueError):
            mod_compress(a, 2, matchings=(frozenset(), frozenset()), lambda_r=3)


class TestDecouplingGuard:
    def test_examples(self):
        g = dd_guard(WalshAssignment((0, 0), (0, 1)))
        assert g.x == (1, 1) and g.y == (2, 3)
        g = dd_guard(WalshAssignment((0, 1, 0), (0, 1, 2)))
        assert g.x == (1, 2, 1) and g.y == (3, 4, 5)

    def test_guarded_input_unchanged(self):
        a = WalshAssignment((1, 2, 1), (3, 4, 5))
        assert dd_guard(a) is a

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(min_value=0, max_value=6), min_size=1, max_size=8),
           st.lists(st.integers(min_value=0, max_value=6), min_size=1, max_size=8))
    def test_guard_conditions_and_pattern(self, xs, ys):
        k = min(len(xs), len(ys))
        a = WalshAssignment(tuple(xs[:k]), tuple(ys[:k]))
        g = dd_guard(a)
        assert all(x != 0 and y != 0 and x != y for x, y in zip(g.x, g.y))
        for u, v in ((0, 1),) if k < 2 else [(i, j) for i in range(k) for j in range(i + 1, k)]:
            if u >= k or v >= k:
                continue
            assert (a.x[u] == a.x[v]) == (g.x[u] == g.x[v])
            assert (a.y[u] == a.y[v]) == (g.y[u] == g.y[v])


class TestCompile:
    def test_chain_compiles_to_two_blocks(self):
        res = ResourceHamiltonian.power_law(4, 3.0)
        sched = compiler.compile(chain_target(4), res)
        assert len(sched.blocks) == 2
        assert sched.trotter_order == 1

    def test_target_equal_to_resource_is_pulse_free(self):
        res = ResourceHamiltonian.power_law(2, 3.0)
        tgt = TargetSpec(2, [(0, 1, "X", "X", res.jx[0, 1]), (0, 1, "Y", "Y", res.jy[0, 1])])
        sched = compiler.compile(tgt, res)
        assert len(sched.blocks) == 1
        assert sched.blocks[0].n_intervals == 1
        assert sched.layers(0) == ["II"]
        assert pulse_count(sched) == 0

    def test_average_hamiltonian_identity_small(self):
        rng = np.random.default_rng(9)
        for n, p in ((3, 1), (4, 2), (5, 1)):
            res = ResourceHamiltonian.power_law(n, 1.2)
            tgt = random_target(rng, n)
            sched = compiler.compile(tgt, res, trotter_order=p)
            got = average_hamiltonian(sched, res)
            want = helpers.dense_target(tgt)
            assert np.abs(got - want).max() <= 1e-12

    def test_z_channel_target_via_axis_rotations(self):
        res = ResourceHamiltonian.power_law(3, 2.0)
        tgt = TargetSpec(3, [(0, 1, "Z", "Z", 0.7), (1, 2, "X", "Y", -0.4)])
        sched = compiler.compile(tgt, res)
        got = average_hamiltonian(sched, res)
        assert np.abs(got - helpers.dense_target(tgt)).max() <= 1e-12

    def test_palindromic_layers_for_second_order(self):
        res = ResourceHamiltonian.power_law(5, 3.0)
        sched = compiler.compile(chain_target(5), res, trotter_order=2)
        for qi in range(len(sched.blocks)):
            layers = sched.layers(qi)
            assert layers == layers[::-1]
            durs = sched.blocks[qi].interval_durations
            assert durs == durs[::-1]
            assert math.isclose(sum(durs), 1.0)

    def test_set_pulses_telescope_to_identity(self):
        res = ResourceHamiltonian.power_law(4, 0.7)
        rng = np.random.default_rng(4)
        sched = compiler.compile(random_target(rng, 4), res)
        n = sched.n_qubits
        for q in range(n):
            g = np.eye(2, dtype=complex)
            for block in sched.blocks:
                for lbl in block.set_pre[q]:
                    g = helpers.GATE[lbl] @ g
                for lbl in block.set_post[q]:
                    g = helpers.GATE[lbl] @ g
            assert np.allclose(g, np.eye(2), atol=1e-12)

    def test_decouple_guards_every_block(self):
        res = ResourceHamiltonian.power_law(4, 3.0)
        sched = compiler.compile(chain_target(4), res, decouple=True)
        for b in sched.blocks:
            assert all(x != 0 and y != 0 and x != y for x, y in zip(b.x, b.y))

    def test_invalid_trotter_order(self):
        res = ResourceHamiltonian.power_law(2, 3.0)
        with pytest.raises(ValueError):
            compiler.compile(chain_target(2), res, trotter_order=3)

    def test_hamilton_decomposition_also_reconstructs(self):
        res = ResourceHamiltonian.power_law(4, 1.2)
        tgt = TargetSpec(4, [(i, j, "X", "X", -0.8) for i in range(4) for j in range(i + 1, 4)])
        sched = compiler.compile(tgt, res, decomposition="hamilton")
        got = average_hamiltonian(sched, res)
        assert np.abs(got - helpers.dense_target(tgt)).max() <= 1e-12


class TestRobustify:
    def _base(self, n=4, decouple=True):
        res = ResourceHamiltonian.power_law(n, 1.2)
        return res, compiler.compile(chain_target(n), res, decouple=decouple)

    def test_sign_schedule_and_period(self):
        _, base = self._base()
        doubled = robustify(base, RobustnessPolicy(e_indices=(1, 1, 1, 1)))
        assert doubled.sign_e == (1, 1, 1, 1)
        assert doubled.period == 2
        distinct = robustify(base, RobustnessPolicy(e_indices=(1, 2, 3, 4)))
        assert distinct.period == 8

    def test_rejects_zero_e_index(self):
        _, base = self._base()
        with pytest.raises(ValueError):
            robustify(base, RobustnessPolicy(e_indices=(0, 1, 2, 3)))

    def test_finite_pulse_records_shrink_and_rescale(self):
        _, base = self._base()
        tau = 0.05
        n_seq = max(b.n_intervals for b in base.blocks)
        t_p = 1e-2 * tau / (2 * n_seq)
        sched = robustify(base, RobustnessPolicy(e_indices=(1, 2, 3, 4), t_p=t_p, tau=tau))
        assert sched.fp is not None
        eps = 2 * n_seq * t_p / tau
        for qi, b in enumerate(sched.blocks):
            assert sched.fp.shrink[qi] == pytest.approx(3 * b.n_intervals * t_p / 4)
            assert sched.fp.rescale[qi] == pytest.approx(1.0 / (1.0 - 5 * eps / 8))
        assert execution_tau(sched, tau) == pytest.approx(tau / (1.0 - 5 * eps / 8))

    def test_finite_pulse_needs_distinct_e_and_nonzero_indices(self):
        _, base = self._base()
        with pytest.raises(ValueError):
            robustify(base, RobustnessPolicy(e_indices=(1, 1, 2, 3), t_p=1e-4, tau=0.05))
        _, unguarded = self._base(decouple=False)
        with pytest.raises(ValueError):
            robustify(unguarded, RobustnessPolicy(e_indices=(1, 2, 3, 4), t_p=1e-4, tau=0.05))

    def test_rejects_pulses_longer_than_intervals(self):
        _, base = self._base()
        tau = 0.05
        with pytest.raises(ValueError):
            robustify(base, RobustnessPolicy(e_indices=(1, 2, 3, 4), t_p=tau, tau=tau))

    def test_zero_width_policy_keeps_schedule_untouched(self):
        _, base = self._base()
        sched = robustify(base, RobustnessPolicy(e_indices=(1, 2, 3, 4), t_p=0.0))
        assert sched.fp is None
        assert execution_tau(sched, 0.05) == 0.05


class TestSerialization:
    def test_round_trip_preserves_schedule(self):
        res = ResourceHamiltonian.power_law(4, 1.2)
        rng = np.random.default_rng(8)
        sched = robustify(
            compiler.compile(random_target(rng, 4), res, trotter_order=2, decouple=True),
            RobustnessPolicy(e_indices=(1, 2, 3, 4)),
        )
        text = sched.dumps()
        again = PulseSchedule.loads(text)
        assert again == sched
        assert again.dumps() == text  # byte identical re-emission

    def test_version_field_checked(self):
        res = ResourceHamiltonian.power_law(2, 3.0)
        d = compiler.compile(chain_target(2), res).to_dict()
        assert d["version"] == 1
        d["version"] = 99
        with pytest.raises(ValueError):
            PulseSchedule.from_dict(d)


class TestGateLayers:
    def test_xx_rotation(self):
        tgt, t_evo, prelude = gate_layer_to_target((TwoQubitGate("RXX", 0, 1, math.pi / 2),), 2, 1.0)
        assert tuple(tgt.terms) == ((0, 1, "X", "X", -1.0),)
        assert t_evo == pytest.approx(math.pi / 4)
        assert prelude == ((), ())

    def test_empty_layer(self):
        tgt, t_evo, prelude = gate_layer_to_target((), 3, 1.0)
        assert tuple(tgt.terms) == () and t_evo == 0.0

    def test_controlled_xx_adds_prelude_rotations(self):
        tgt, _, prelude = gate_layer_to_target((TwoQubitGate("CXX", 0, 1),), 2, 1.0)
        assert tuple(tgt.terms) == ((0, 1, "X", "X", -1.0),)
        assert prelude == (("RX90",), ("RX90",))
        _, _, prelude_y = gate_layer_to_target((TwoQubitGate("CYY", 0, 1),), 2, 1.0)
        assert prelude_y == (("RY90",), ("RY90",))

    def test_overlapping_pairs_rejected(self):
        with pytest.raises(ValueError):
            gate_layer_to_target(
                (TwoQubitGate("CXX", 0, 1), TwoQubitGate("CXX", 1, 2)), 3, 1.0
            )


class TestScheduleAlgebra:
    def test_concat_runs_blocks_back_to_back(self):
        res = ResourceHamiltonian.power_law(4, 3.0)
        odd = compiler.compile(TargetSpec(4, [(0, 1, "X", "X", -1.0), (2, 3, "X", "X", -1.0)]), res)
        even = compiler.compile(TargetSpec(4, [(1, 2, "X", "X", -1.0)]), res)
        both = concat_schedules([odd, even])
        assert len(both.blocks) == len(odd.blocks) + len(even.blocks)
        # the concatenated cycle engineers the sum of the two part targets
        got = average_hamiltonian(both, res)
        assert np.abs(got - helpers.dense_target(chain_target(4))).max() <= 1e-12
        parts = average_hamiltonian(odd, res) + average_hamiltonian(even, res)
        assert np.abs(got - parts).max() <= 1e-12

    def test_pulse_count_merged_is_not_larger(self):
        res = ResourceHamiltonian.power_law(6, 3.0)
        sched = compiler.compile(chain_target(6), res, decouple=True)
        assert pulse_count(sched, merged=True) <= pulse_count(sched, merged=False)
        assert pulse_count(sched) > 0
