import itertools

import numpy as np
import pytest

from helpers import full_blocks, loop_marginal, random_conditional, random_dist, random_model
from icr.catalog import binary_incompatible, compatible_pcgs, full_conditionals, random_joint
from icr.discrete import (
    IcrConfig,
    Verdict,
    brute_force_fixed_point,
    compatibility_check,
    conditional_replacement,
    icr_run,
    markov_kernel_apply,
    mutual_stationarity_check,
    propagate_limits,
)
from icr.errors import (
    NoConvergence,
    NonUniqueFixedPoint,
    NotAllFull,
    NotPermissible,
    NotPermissibleStep,
    ScopeMismatch,
    StateSpaceTooLarge,
)
from icr.model import (
    DiscreteConditional,
    DiscreteDistribution,
    derive_conditionals,
    kl_divergence,
    marginalize,
    total_variation,
)


class TestConditionalReplacement:
    def test_uniform_marginal_times_conditional(self):
        h = DiscreteDistribution((0, 1), np.full((2, 2), 0.25))
        # table[x2, x1]: slices (0.2, 0.8) and (0.6, 0.4)
        f = DiscreteConditional((0,), (1,), [[0.2, 0.8], [0.6, 0.4]])
        out = conditional_replacement(h, f)
        np.testing.assert_allclose(out.table, [[0.1, 0.3], [0.4, 0.2]], atol=1e-15)
        np.testing.assert_allclose(marginalize(out, (1,)).table, [0.5, 0.5], atol=1e-15)

    def test_own_conditional_is_identity(self):
        rng = np.random.default_rng(1)
        h = random_dist((0, 1, 2), (2, 3, 2), rng)
        for a, b in [((1,), (0, 2)), ((0, 2), (1,)), ((2,), (0,))]:
            own = derive_conditionals(h, [(a, b)] * 2)
            out = conditional_replacement(h, own.conditionals[0])
            np.testing.assert_allclose(out.table, marginalize(h, set(a) | set(b)).table, atol=1e-15)

    def test_parent_marginal_preserved_against_loop(self):
        rng = np.random.default_rng(2)
        h = random_dist((0, 1, 2), (2, 3, 2), rng)
        f = random_conditional((1,), (0, 2), {0: 2, 1: 3, 2: 2}, rng)
        out = conditional_replacement(h, f)
        np.testing.assert_allclose(loop_marginal(out, (0, 2)), loop_marginal(h, (0, 2)), atol=1e-15)

    def test_output_conditional_is_f(self):
        rng = np.random.default_rng(3)
        h = random_dist((0, 1), (3, 2), rng)
        f = random_conditional((0,), (1,), {0: 3, 1: 2}, rng)
        out = conditional_replacement(h, f)
        derived = derive_conditionals(out, [((0,), (1,))] * 2).conditionals[0]
        np.testing.assert_allclose(derived.table, f.table, atol=1e-14)

    def test_not_permissible_step(self):
        h = DiscreteDistribution((0, 1), np.full((2, 2), 0.25))
        f = DiscreteConditional((0,), (2,), [[0.5, 0.5], [0.5, 0.5]])
        with pytest.raises(NotPermissibleStep):
            conditional_replacement(h, f)

    def test_zero_parent_mass_stays_zero(self):
        h = DiscreteDistribution((0, 1), [[0.5, 0.0], [0.5, 0.0]])
        f = DiscreteConditional((0,), (1,), [[0.2, 0.8], [0.6, 0.4]])
        out = conditional_replacement(h, f)
        np.testing.assert_array_equal(out.table[:, 1], 0.0)


class TestMarkovKernel:
    def test_matches_replacement(self):
        rng = np.random.default_rng(4)
        q = random_dist((0, 1), (3, 4), rng)
        f = random_conditional((0,), (1,), {0: 3, 1: 4}, rng)
        a = markov_kernel_apply(q, f)
        b = conditional_replacement(q, f)
        np.testing.assert_allclose(a.table, b.table, atol=1e-14, rtol=0)

    def test_matches_explicit_matrix_product(self):
        # oracle: build T entry by entry and multiply by hand
        rng = np.random.default_rng(5)
        q = random_dist((0, 1), (3, 4), rng)
        f = random_conditional((1,), (0,), {0: 3, 1: 4}, rng)
        states = list(itertools.product(range(3), range(4)))
        T = np.zeros((12, 12))
        for s, (x, y) in enumerate(states):
            for t, (x2, y2) in enumerate(states):
                if x2 == x:
                    T[s, t] = f.table[x2, y2]
        expected = (q.table.reshape(-1) @ T).reshape(3, 4)
        np.testing.assert_allclose(markov_kernel_apply(q, f).table, expected, atol=1e-14, rtol=0)

    def test_point_mass_gives_transition_row(self):
        f = DiscreteConditional((0,), (1,), [[0.2, 0.8], [0.6, 0.4]])
        q = DiscreteDistribution((0, 1), [[0.0, 0.0], [0.0, 1.0]])  # (x1, x2) = (1, 1)
        out = markov_kernel_apply(q, f)
        np.testing.assert_allclose(out.table, [[0.0, 0.6], [0.0, 0.4]], atol=1e-15)

    def test_scope_mismatch(self):
        f = DiscreteConditional((0,), (1,), [[0.2, 0.8], [0.6, 0.4]])
        with pytest.raises(ScopeMismatch):
            markov_kernel_apply(DiscreteDistribution((0,), [0.5, 0.5]), f)


class TestIcrRun:
    @pytest.mark.parametrize("order", list(itertools.permutations(range(3))))
    def test_compatible_full_recovers_joint(self, order):
        f = random_joint((2, 2, 2), np.random.default_rng(6))
        report = icr_run(full_conditionals(f), order)
        assert report.converged
        for dist in report.stationary:
            assert total_variation(dist, f) < 1e-9

    def test_pcgs_limits_are_marginals(self):
        f = random_joint((2, 3, 2), np.random.default_rng(7))
        model = compatible_pcgs(f)
        report = icr_run(model, (0, 1, 2))
        assert report.converged
        expected = [marginalize(f, (0, 1)), marginalize(f, (0, 2)), f]
        for dist, want in zip(report.stationary, expected):
            assert dist.scope == want.scope
            assert total_variation(dist, want) < 1e-9

    def test_stationary_start_converges_in_one_cycle(self):
        f = random_joint((2, 2, 2), np.random.default_rng(8))
        model = full_conditionals(f)
        report = icr_run(model, (0, 1, 2), q0=f)
        assert report.converged and report.cycles_used == 1
        assert report.trace[-1][2] == pytest.approx(0.0, abs=1e-28)

    def test_traces_decrease(self):
        rng = np.random.default_rng(9)
        model = random_model(full_blocks(3), (2, 3, 2), rng)
        report = icr_run(model, (2, 0, 1))
        assert report.converged
        cfg = IcrConfig()
        for trace in report.traces():
            above = [t for t in trace if t >= cfg.kl_tol]
            assert all(b < a for a, b in zip(trace, trace[1:len(above) + 1]))

    def test_kl_to_oracle_decreases_monotonically(self):
        rng = np.random.default_rng(10)
        model = random_model(full_blocks(3), (2, 2, 3), rng)
        limit = brute_force_fixed_point(model, (0, 1, 2), 2)
        q = DiscreteDistribution.uniform((0, 1, 2), (2, 2, 3))
        previous = kl_divergence(limit, q)
        for _ in range(15):
            for j in (0, 1, 2):
                q = conditional_replacement(q, model.conditionals[j])
            current = kl_divergence(limit, q)
            if previous < 1e-25:
                break
            assert current < previous
            previous = current

    def test_not_permissible(self):
        rng = np.random.default_rng(11)
        model = random_model([((0,), (1,)), ((1,), (2,)), ((2,), (0,))], (2, 2, 2), rng)
        with pytest.raises(NotPermissible):
            icr_run(model, (0, 1, 2))

    def test_wrong_start_scope(self):
        model = binary_incompatible()
        with pytest.raises(ScopeMismatch):
            icr_run(model, (0, 1), q0=DiscreteDistribution((0,), [0.5, 0.5]))

    def test_max_cycles_reports_nonconvergence(self):
        rng = np.random.default_rng(12)
        model = random_model(full_blocks(3), (2, 2, 2), rng)
        cfg = IcrConfig(max_cycles=2)
        report = icr_run(model, (0, 1, 2), cfg=cfg)
        assert not report.converged and report.cycles_used == 2
        with pytest.raises(NoConvergence) as info:
            icr_run(model, (0, 1, 2), cfg=cfg, check=True)
        assert info.value.report is not None

    def test_tv_tracking(self):
        f = random_joint((2, 2), np.random.default_rng(13))
        report = icr_run(full_conditionals(f), (0, 1), cfg=IcrConfig(track="tv"))
        assert report.converged
        assert all(total_variation(d, f) < 1e-9 for d in report.stationary)

    def test_trace_csv(self, tmp_path):
        f = random_joint((2, 2), np.random.default_rng(14))
        report = icr_run(full_conditionals(f), (0, 1))
        path = tmp_path / "trace.csv"
        report.write_trace_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "cycle_index,position,kl_gap,tv_gap"
        assert len(lines) == len(report.trace) + 1


class TestBruteForce:
    def test_two_variable_compatible(self):
        f = random_joint((3, 2), np.random.default_rng(15))
        model = full_conditionals(f)
        for pos in (0, 1):
            assert total_variation(brute_force_fixed_point(model, (0, 1), pos), f) < 1e-12

    def test_incompatible_orders_differ(self):
        model = binary_incompatible()
        a = brute_force_fixed_point(model, (0, 1), 1)
        b = brute_force_fixed_point(model, (1, 0), 1)
        assert total_variation(a, b) > 0.1

    def test_independent_conditionals_give_product(self):
        from icr.model import ConditionalModel, VariableSpec

        variables = [VariableSpec("X1", 2), VariableSpec("X2", 3)]
        p1, p2 = np.array([0.3, 0.7]), np.array([0.2, 0.5, 0.3])
        model = ConditionalModel(
            variables,
            [
                DiscreteConditional((0,), (1,), np.tile(p1, (3, 1))),
                DiscreteConditional((1,), (0,), np.tile(p2, (2, 1))),
            ],
        )
        fixed = brute_force_fixed_point(model, (0, 1), 0)
        np.testing.assert_allclose(fixed.table, np.outer(p1, p2), atol=1e-14)

    def test_state_space_guard(self):
        rng = np.random.default_rng(16)
        model = random_model(full_blocks(2), (65, 65), rng)
        with pytest.raises(StateSpaceTooLarge):
            brute_force_fixed_point(model, (0, 1), 0)

    def test_non_unique(self):
        from icr.model import ConditionalModel, VariableSpec

        eye = np.eye(2)
        model = ConditionalModel(
            [VariableSpec("X1", 2), VariableSpec("X2", 2)],
            [DiscreteConditional((0,), (1,), eye), DiscreteConditional((1,), (0,), eye)],
        )
        with pytest.raises(NonUniqueFixedPoint):
            brute_force_fixed_point(model, (0, 1), 0)


class TestCompatibility:
    def test_derived_is_compatible(self):
        f = random_joint((2, 3, 2), np.random.default_rng(17))
        assert compatibility_check(full_conditionals(f), (0, 1, 2)) is Verdict.COMPATIBLE

    def test_binary_incompatible(self):
        assert compatibility_check(binary_incompatible(), (0, 1)) is Verdict.INCOMPATIBLE

    def test_requires_full(self):
        f = random_joint((2, 2, 2), np.random.default_rng(18))
        with pytest.raises(NotAllFull):
            compatibility_check(compatible_pcgs(f), (0, 1, 2))

    def test_undecidable(self):
        rng = np.random.default_rng(19)
        model = random_model(full_blocks(3), (2, 2, 2), rng)
        verdict = compatibility_check(model, (0, 1, 2), cfg=IcrConfig(max_cycles=1))
        assert verdict is Verdict.UNDECIDABLE


class TestMutualStationarity:
    def _limits(self):
        rng = np.random.default_rng(20)
        model = random_model(full_blocks(3), (2, 3, 2), rng)
        report = icr_run(model, (1, 0, 2))
        return model, report

    def test_converged_output(self):
        model, report = self._limits()
        assert mutual_stationarity_check(report.stationary, model, report.cycle)

    def test_perturbed_limit(self):
        model, report = self._limits()
        limits = list(report.stationary)
        t = limits[1].table.copy()
        t.flat[0] += 1e-3
        t.flat[1] -= 1e-3
        limits[1] = DiscreteDistribution(limits[1].scope, t)
        result = mutual_stationarity_check(limits, model, report.cycle)
        assert not result
        assert result.position in (0, 1)

    def test_compatible_marginals(self):
        f = random_joint((2, 2, 3), np.random.default_rng(21))
        model = compatible_pcgs(f)
        limits = [marginalize(f, model.scope(j)) for j in (0, 1, 2)]
        assert mutual_stationarity_check(limits, model, (0, 1, 2))

    def test_one_round_from_any_limit(self):
        model, report = self._limits()
        for pos in range(3):
            limits = propagate_limits(report.stationary[pos], model, report.cycle, pos)
            for got, want in zip(limits, report.stationary):
                assert total_variation(got, want) < 1e-9

    def test_order_sensitivity(self):
        model = binary_incompatible()
        r12, r21 = icr_run(model, (0, 1)), icr_run(model, (1, 0))
        assert total_variation(r12.stationary[1], r21.stationary[1]) > 0.1
