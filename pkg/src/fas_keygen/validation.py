"""
Self-checks behind the ``validate`` subcommand.

Each check returns ``(passed, detail)``; :func:`run_checks` collects them
into a table. The checks compare closed forms with their determinant
oracles, the model with Monte-Carlo probing, and the optimizers with
exhaustive search on small instances.
"""

import math
from dataclasses import dataclass

import numpy as np

from .channel import build_correlation, iter_channel_batches, make_rng
from .errors import FasKeygenError
from .kgr import (
    KgrParams,
    assemble_covariances,
    conditional_gain,
    empirical_kgr,
    full_power_ratio,
    kgr_cc_closed,
    kgr_cc_oracle,
    kgr_iid_closed,
    kgr_iid_oracle,
)
from .optimizer import P1, default_init, random_init, sca_solve
from .ports import build_instance, sliding_window_solve, traverse

__all__ = ["CheckResult", "run_checks", "format_table"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_params(rng, config):
    M = int(rng.integers(1, 33))
    corr = build_correlation(M, float(rng.uniform(0.25, 5.0)))
    d_ab = rng.uniform(60.0, 100.0)
    d_ae = max(1.0, d_ab + rng.uniform(-10.0, 10.0))
    g0 = config.gamma0
    params = KgrParams(
        corr=corr,
        beta_ab=g0 * d_ab**-2,
        beta_ae=g0 * d_ae**-2,
        P_B=10 ** (rng.uniform(10, 30) / 10 - 3),
        sigma2=10 ** (rng.uniform(-85, -75) / 10 - 3),
    )
    P_A = 10 ** (rng.uniform(10, 30) / 10 - 3)
    w = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    w *= math.sqrt(P_A * rng.uniform(0.1, 1.0)) / np.linalg.norm(w)
    return params, w


def check_oracles(config, count=300):
    rng = make_rng(config.seed, 101)
    worst = 0.0
    for _ in range(count):
        params, w = _random_params(rng, config)
        budget = params
        cov = assemble_covariances(w, params.corr, budget, params.P_B, params.sigma2)
        worst = max(
            worst,
            abs(kgr_iid_closed(w, params).bits - kgr_iid_oracle(cov)),
            abs(kgr_cc_closed(w, params).bits - kgr_cc_oracle(cov)),
        )
    return worst <= 1e-9, f"max |closed - oracle| = {worst:.2e} bits over {count} instances"


def check_anchor(config):
    corr = build_correlation(1, 1.0)
    params = KgrParams(corr, 1.0, 1.0, 1.0, 1.0)
    iid = kgr_iid_closed([1.0], params).bits
    cc = kgr_cc_closed([1.0], params).bits
    reduced = math.log2(full_power_ratio(conditional_gain([1.0], params), 1.0, 1.0, 1.0))
    err = max(abs(iid - math.log2(4 / 3)), abs(cc - math.log2(9 / 8)), abs(reduced - cc))
    return err <= 1e-12, f"unit instance error {err:.1e}"


def check_monte_carlo(config, draws=200_000):
    inst = build_instance(config.replace(eve_mode="correlated"), make_rng(config.seed, 202))
    p = inst.params
    w = default_init(inst.corr, config.P_A)
    batches = list(iter_channel_batches(inst.corr, inst.budget, 1.0, draws, config.seed + 303))
    noise = make_rng(config.seed, 404)
    iid = empirical_kgr(batches, w, p, "iid", noise)
    cc = empirical_kgr(batches, w, p, "correlated", noise)
    e_iid = abs(iid / kgr_iid_closed(w, p).bits - 1)
    e_cc = abs(cc / kgr_cc_closed(w, p).bits - 1)
    return e_iid <= 0.02 and e_cc <= 0.03, (
        f"relative error iid {e_iid:.2%}, correlated {e_cc:.2%} ({draws} draws)"
    )


def check_sca(config):
    inst = build_instance(config.replace(eve_mode="iid"))
    rng = make_rng(config.seed, 505)
    trace = sca_solve(P1, random_init(config.M, config.P_A, rng), None, inst.params, config.P_A)
    ratio = trace.t_history[-1] / (config.P_A * inst.corr.lambda_max)
    ascent = bool(np.all(np.diff(trace.objective) >= -1e-8))
    return ascent and ratio >= 0.999 and trace.converged, (
        f"{trace.iterations} iterations, t / (P_A lambda_max) = {ratio:.6f}"
    )


def check_traverse(config):
    small = config.replace(M=8, N=3, eve_mode="iid")
    inst = build_instance(small)
    best = traverse(P1, inst)
    window = sliding_window_solve(P1, inst)
    gap = 1 - window.kgr.bits / best.kgr.bits
    return -1e-9 <= gap <= 0.02, f"sliding window {gap:.3%} below traversal (M=8, N=3)"


CHECKS = (
    ("closed form vs determinant oracle", check_oracles),
    ("unit anchors", check_anchor),
    ("Monte-Carlo probing", check_monte_carlo),
    ("SCA reaches Rayleigh maximum", check_sca),
    ("sliding window vs traversal", check_traverse),
)


def run_checks(config):
    results = []
    for name, fn in CHECKS:
        try:
            passed, detail = fn(config)
        except FasKeygenError as exc:
            passed, detail = False, f"error: {exc}"
        results.append(CheckResult(name, bool(passed), detail))
    return results


def format_table(results):
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.detail}")
    return "\n".join(lines)
