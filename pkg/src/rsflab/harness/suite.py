"""Suites of checks over environment and discount grids, and feature sweeps."""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..features import baseline_features, expected_gain, expected_gain_formula, optimal_features
from ..kernel import build_kernel
from ..mdp import policy_transition
from ..rewards import RewardModel, sample_rewards
from ..rsf import zero_shot_gains
from .checks import (CHECK_IDS, CheckParams, ReportRow, check_applicable, expected_row_count,
                     model_label, verify, within_band)
from .envs import DEFAULT_ENVIRONMENTS, EnvironmentSpec, generate_environment

FAMILIES = ("optimal", "laplacian_eigs", "p_symmetrized", "random")


@dataclass(frozen=True)
class SuiteConfig:
    environments: tuple = DEFAULT_ENVIRONMENTS
    gammas: tuple = (0.001, 0.5, 0.9, 0.999)
    checks: tuple = CHECK_IDS
    params: CheckParams = field(default_factory=CheckParams)

    def to_config(self) -> dict:
        return {"environments": [e.to_config() for e in self.environments],
                "gammas": list(self.gammas), "checks": list(self.checks),
                "params": self.params.to_config()}

    @classmethod
    def from_config(cls, cfg: dict) -> "SuiteConfig":
        base = cls()
        envs = tuple(EnvironmentSpec.from_config(e) for e in cfg.get("environments", []))
        return cls(environments=envs or base.environments,
                   gammas=tuple(cfg.get("gammas", base.gammas)),
                   checks=tuple(cfg.get("checks", base.checks)),
                   params=CheckParams.from_config(cfg.get("params", {})))


@dataclass(frozen=True)
class Cell:
    index: int
    check_id: str
    spec: EnvironmentSpec


def suite_cells(config: SuiteConfig) -> list:
    """Applicable (check, environment, gamma) cells in a fixed order.

    Gamma-free checks get one cell per environment.  Cells whose hypotheses
    fail (e.g. a deterministic-only check on a stochastic environment) are
    not scheduled.
    """
    cells = []
    for check_id in config.checks:
        if check_id not in CHECK_IDS:
            raise ValueError(f"unknown check {check_id!r}")
        for env in config.environments:
            gammas = config.gammas[:1] if check_id == "V7" else config.gammas
            for gamma in gammas:
                spec = env.with_gamma(gamma)
                if check_applicable(check_id, spec):
                    cells.append(Cell(len(cells), check_id, spec))
    return cells


def cell_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def _run_cell(args):
    cell, params, seed = args
    return verify(cell.check_id, cell.spec, params, seed)


def run_suite(config: SuiteConfig, seed: int = 0, jobs: int = 1) -> list:
    """Run every cell with its own rng stream; rows come back sorted."""
    tasks = [(c, config.params, cell_seed(seed, c.index)) for c in suite_cells(config)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_cell, tasks))
    else:
        chunks = [_run_cell(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    return sorted(rows, key=ReportRow.sort_key)


def expected_suite_rows(config: SuiteConfig) -> int:
    """Row count of :func:`run_suite` from the grid alone."""
    total = 0
    sizes = {}
    for cell in suite_cells(config):
        key = cell.spec.with_gamma(0.5)
        if key not in sizes:
            sizes[key] = generate_environment(key)[2].num_sa
        total += expected_row_count(cell.check_id, cell.spec, config.params, sizes[key])
    return total


def _family_features(family, mdp, pi0, w, kernel, d, rng):
    if family == "optimal":
        return optimal_features(kernel, w, d)
    if family == "random":
        return baseline_features("random", mdp, pi0, w, d, rng=rng)
    return baseline_features(family, mdp, pi0, w, d)


def sweep_features(spec: EnvironmentSpec, gamma: float, temperature: float, d_list,
                   model: RewardModel, n_mc: int = 10_000, seed: int = 0,
                   families=FAMILIES, env=None) -> list:
    """Expected zero-shot gain per feature family and dimension.

    Each row carries the exact first-order gain (``exact``), the trace
    formula (``predicted``) and the Monte-Carlo gain through the full
    pipeline (``mc_mean`` +- ``mc_se``); the rewards are shared across
    families so differences between rows are paired.  A ``SWEEP/pi0`` row
    reports the Monte-Carlo return of ``pi0`` itself.  ``env`` may pass a
    prebuilt ``(mdp, pi0, w)``; ``spec`` then only supplies the label.
    """
    if not gamma < 1.0:
        raise ValueError("sweeps need gamma < 1")
    spec = spec.with_gamma(gamma)
    mdp, pi0, w = env or generate_environment(spec)
    mdp = mdp.with_gamma(gamma)
    kernel = build_kernel(mdp, pi0, w, gamma)
    rng = np.random.default_rng(seed)
    rewards = sample_rewards(model, w, rng, n_mc).rewards
    label = model_label(model)
    rows = []
    delta0 = np.eye(w.num_sa) - gamma * policy_transition(mdp, pi0)
    g0 = np.linalg.solve(delta0, rewards.T).T @ (w.rho_s[:, None] * pi0.probs).ravel()
    for family in families:
        for d in d_list:
            start = time.perf_counter()
            if not 0 <= d <= w.num_sa:
                raise ValueError(f"d must lie in [0, {w.num_sa}]")
            if d == 0:
                # no features: the RSF policy is pi0 itself
                exact = formula = mc = se = 0.0
            else:
                phi = _family_features(family, mdp, pi0, w, kernel, d, rng)
                exact = expected_gain(phi, kernel, model, temperature)
                formula = expected_gain_formula(phi, kernel, model, temperature)
                gains, _ = zero_shot_gains(phi, mdp, pi0, w, rewards, temperature)
                mc = float(gains.mean())
                se = float(gains.std(ddof=1) / np.sqrt(gains.size))
            rows.append(ReportRow(f"SWEEP/{family}", spec.label, seed, gamma, temperature, d,
                                  label, exact, formula, mc, se, within_band(mc, se, exact),
                                  1e3 * (time.perf_counter() - start)))
    rows.append(ReportRow("SWEEP/pi0", spec.label, seed, gamma, temperature, None, label,
                          float(np.mean(g0)), None, float(np.mean(g0)),
                          float(np.std(g0, ddof=1) / np.sqrt(g0.size)), True, 0.0))
    return sorted(rows, key=ReportRow.sort_key)


def replace_runtime(rows, value=0.0) -> list:
    """Copy of ``rows`` with runtimes zeroed, for reproducibility comparisons."""
    return [replace(r, runtime_ms=value) for r in rows]
