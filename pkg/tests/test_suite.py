import numpy as np
import pytest

from rsflab.harness.checks import CheckParams
from rsflab.harness.envs import EnvironmentSpec
from rsflab.harness.suite import (FAMILIES, SuiteConfig, cell_seed, expected_suite_rows,
                                  replace_runtime, run_suite, suite_cells, sweep_features)
from rsflab.rewards import RewardModel

SMALL = SuiteConfig(
    environments=(EnvironmentSpec("gridworld", width=3, height=2),
                  EnvironmentSpec("random_stochastic", num_states=4, num_actions=2, seed=2)),
    gammas=(0.5, 0.9),
    checks=("V4", "V6", "V7", "V8"),
    params=CheckParams(dims=(1, 2), n_competitors=10, n_functions=10,
                       n_moment_samples=5000))


class TestCells:
    def test_skips_inapplicable_and_gamma_free(self):
        cells = suite_cells(SMALL)
        kinds = [(c.check_id, c.spec.kind) for c in cells]
        assert ("V6", "random_stochastic") not in kinds
        assert sum(c.check_id == "V7" for c in cells) == 2
        assert [c.index for c in cells] == list(range(len(cells)))

    def test_unknown_check(self):
        with pytest.raises(ValueError):
            suite_cells(SuiteConfig(checks=("V42",)))

    def test_cell_seeds_are_distinct(self):
        seeds = {cell_seed(0, i) for i in range(100)}
        assert len(seeds) == 100
        assert cell_seed(1, 0) != cell_seed(0, 0)

    def test_config_round_trip(self):
        assert SuiteConfig.from_config(SMALL.to_config()) == SMALL


class TestRunSuite:
    def test_row_count_and_pass(self):
        rows = run_suite(SMALL, seed=0)
        assert len(rows) == expected_suite_rows(SMALL)
        assert all(r.passed for r in rows)
        assert rows == sorted(rows, key=lambda r: r.sort_key())

    def test_reproducible_modulo_runtime(self):
        a = replace_runtime(run_suite(SMALL, seed=4))
        b = replace_runtime(run_suite(SMALL, seed=4))
        assert a == b

    def test_parallel_matches_serial(self):
        assert replace_runtime(run_suite(SMALL, seed=1, jobs=2)) == \
            replace_runtime(run_suite(SMALL, seed=1))

    def test_master_seed_matters(self):
        a = [r.mc_mean for r in run_suite(SMALL, seed=0) if r.check_id == "V7"]
        b = [r.mc_mean for r in run_suite(SMALL, seed=1) if r.check_id == "V7"]
        assert a != b


@pytest.fixture(scope="module")
def rows():
    spec = EnvironmentSpec("random_stochastic", num_states=4, num_actions=3, seed=5)
    return sweep_features(spec, 0.8, 256.0, [0, 1, 2, 4], RewardModel("gaussian"),
                          n_mc=3000, seed=0)


class TestSweep:
    def test_layout(self, rows):
        assert len(rows) == 4 * len(FAMILIES) + 1
        assert sum(r.check_id == "SWEEP/pi0" for r in rows) == 1

    def test_zero_features_zero_gain(self, rows):
        for r in rows:
            if r.d == 0:
                assert r.exact == r.predicted == r.mc_mean == 0.0

    def test_formula_and_mc_agree(self, rows):
        for r in rows:
            if r.d:
                assert r.predicted == pytest.approx(r.exact, rel=1e-8)
                assert r.passed

    def test_optimal_dominates(self, rows):
        by = {(r.check_id, r.d): r.exact for r in rows if r.d is not None}
        for fam in FAMILIES[1:]:
            for d in (1, 2, 4):
                assert by[(f"SWEEP/{fam}", d)] <= by[("SWEEP/optimal", d)] + 1e-12

    def test_gain_grows_with_d(self, rows):
        opt = [r.exact for r in rows if r.check_id == "SWEEP/optimal"]
        assert np.all(np.diff(opt) >= -1e-12)

    def test_rejects_gamma_one(self):
        with pytest.raises(ValueError):
            sweep_features(EnvironmentSpec("gridworld"), 1.0, 10.0, [1], RewardModel("goal"))
