"""Acceptance criteria 1-14 as callables shared by ``selftest`` and the test suite.

Each check returns an :class:`Outcome` whose ``metrics`` are deterministic
for a fixed seed (timings are kept out of them so CSV artifacts compare
byte for byte).
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bessel import bessel_identity_defect, bessel_table
from .drivers import AlphaStable, Brownian, CompoundPoisson, GaussOU, stream
from .lattice import LatticeParams, deterministic_solution, deterministic_solution_expm, lyapunov_defect, unit_vector
from .simulation import simulate_chunked
from .stochastic import (covariance_entry, ou_limit_variance, ou_path_ensemble,
                         second_moment_limit, stable_abs_moment, stable_scale, summability_report)
from .thermalization import CutoffConfig, bound_report, small_noise_profile
from .wasserstein import SampleCloud, shift_linearity_defect


@dataclass
class Outcome:
    number: int
    name: str
    passed: bool
    summary: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] criterion {self.number:2d} {self.name}: {self.summary} ({self.seconds:.1f}s)"


def _flow_grid(seed):
    N = 400
    rng = stream(seed, 101)
    sparse = np.zeros(N)
    sparse[rng.choice(40, size=10, replace=False)] = rng.standard_normal(10)
    xs = {"e1": unit_vector(1, N), "e1+e3": unit_vector(1, N) + unit_vector(3, N), "sparse10": sparse}
    return LatticeParams(0.5, N), xs, (0.5, 1.0, 2.0, 5.0)


def lyapunov_isometry(seed, quick):
    params, xs, times = _flow_grid(seed)
    worst = max(lyapunov_defect(x, t, params) for x in xs.values() for t in times)
    return worst <= 1e-8, f"max defect {worst:.2e} <= 1e-8", {"max_defect": worst}


def flow_oracle(seed, quick):
    params, xs, times = _flow_grid(seed)
    worst = 0.0
    for t in times:
        X = np.stack(list(xs.values()))
        diff = deterministic_solution(X, t, params) - deterministic_solution_expm(X, t, params)
        worst = max(worst, float(np.linalg.norm(diff, axis=1).max()))
    return worst <= 1e-8, f"max series-expm gap {worst:.2e} <= 1e-8", {"max_gap": worst}


def bessel_identity(seed, quick):
    defects = [bessel_identity_defect(s, math.ceil(s) + 40) for s in (1, 5, 10, 25, 50)]
    worst_defect = max(abs(d) for d in defects)
    s = np.linspace(0.5, 100.0, 200)
    J = bessel_table(200, s)
    n = np.arange(1, 200)
    resid = np.abs(J[:, n - 1] + J[:, n + 1] - 2 * n[None, :] / s[:, None] * J[:, n])
    worst_rec = float(resid.max())
    ok = worst_defect <= 1e-10 and min(defects) >= -1e-12 and worst_rec <= 1e-10
    return ok, f"identity defect {worst_defect:.1e}, recurrence residual {worst_rec:.1e}", {
        "identity_defect": worst_defect, "recurrence_residual": worst_rec}


def shift_linearity(seed, quick):
    rng = stream(seed, 104)
    cloud = SampleCloud(rng.standard_normal((512, 8)))
    worst = 0.0
    for _ in range(20):
        u = rng.standard_normal(8) * rng.uniform(0.1, 5.0)
        for p in (1, 2):
            worst = max(worst, shift_linearity_defect(u, cloud, p))
    return worst <= 1e-9, f"max defect {worst:.1e} <= 1e-9", {"max_defect": worst}


def gaussian_sandwich(seed, quick):
    cfg = CutoffConfig(LatticeParams(1.0, 64), Brownian(1.0), unit_vector(1, 64),
                       epsilons=[0.3, 0.1, 0.03], offsets_r=[-1, 0, 1, 2], p=2, seed=seed,
                       norm_samples=5000 if quick else 20000)
    rep = bound_report(cfg)
    ok = all(r.lower - 1e-6 <= r.measured <= r.upper + 3 * r.mc_error for r in rep.rows)
    slack = min(min(r.measured - r.lower, r.upper - r.measured) for r in rep.rows)
    return ok, f"{len(rep.rows)} rows inside sandwich, min slack {slack:.3g}, E||G|| {rep.mean_limit_norm:.4f}", {
        "rows": len(rep.rows), "min_slack": slack, "mean_limit_norm": rep.mean_limit_norm}


def covariance_oracle(seed, quick):
    nu, N, paths = 1.0, 32, 4000 if quick else 20000
    ens = simulate_chunked(np.zeros(N), Brownian(1.0), 1.0, 1e-3, nu, stream(seed, 106), paths, chunk=5000)
    worst = 0.0
    for i in range(5):
        for j in range(i, 5):
            prod = ens.shell[:, i] * ens.shell[:, j]
            se = prod.std(ddof=1) / math.sqrt(paths)
            z = abs(prod.mean() - covariance_entry(i + 1, j + 1, 1.0, 1.0, nu)) / se
            worst = max(worst, z)
    return worst <= 4.0, f"max |z| {worst:.2f} <= 4 over 15 entries", {"max_z": worst}


def second_moment_identity(seed, quick):
    nu, N, paths, dt = 1.0, 24, 2000 if quick else 10000, 0.002
    spec = CompoundPoisson(2.0, 0.5)
    ens = simulate_chunked(np.zeros(N), spec, 20.0, dt, nu, stream(seed, 107), paths, chunk=2500)
    worst, metrics = 0.0, {}
    for n in (1, 2, 3):
        sq = ens.shell[:, n - 1] ** 2
        se = sq.std(ddof=1) / math.sqrt(paths)
        target = second_moment_limit(spec, n, nu)
        z = abs(sq.mean() - target) / se
        worst = max(worst, z)
        metrics[f"mode{n}_estimate"] = float(sq.mean())
        metrics[f"mode{n}_target"] = target
    metrics["max_z"] = worst
    return worst <= 4.0, f"max |z| {worst:.2f} <= 4 for modes 1-3", metrics


def stable_moment(seed, quick):
    alpha, nu, paths = 1.5, 0.5, 20000 if quick else 100000
    scale = stable_scale(1, math.inf, alpha, 1.0, nu)
    formula = stable_abs_moment(1.0, alpha, scale)
    ens = simulate_chunked(np.zeros(32), AlphaStable(alpha, 1.0), 20.0, 0.02, nu, stream(seed, 108),
                           paths, chunk=10000)
    estimate = float(np.abs(ens.shell[:, 0]).mean())
    rel = abs(estimate - formula) / formula
    gauss_scale = stable_scale(1, math.inf, 2.0, 1.0, nu)
    reduction = abs(stable_abs_moment(1.0, 2.0, gauss_scale) - 2 * gauss_scale / math.sqrt(math.pi))
    ok = rel <= 0.05 and reduction <= 1e-10
    return ok, f"E|G_1| {estimate:.4f} vs {formula:.4f} (rel {rel:.3f} <= 0.05), alpha=2 gap {reduction:.1e}", {
        "estimate": estimate, "formula": formula, "relative_error": rel, "alpha2_gap": reduction}


def _empirical_sandwich(spec, seed, quick):
    cfg = CutoffConfig(LatticeParams(1.0, 32), spec, unit_vector(1, 32), epsilons=[0.3, 0.1],
                       offsets_r=[0, 1], p=1, mc_samples=256 if quick else 512, seed=seed,
                       dt=2e-3 if quick else 1e-3)
    rep = bound_report(cfg)
    fails = [r for r in rep.rows if r.verdict != "pass"]
    worst_tail = max(r.tail for r in rep.rows)
    return not fails, f"{len(rep.rows) - len(fails)}/{len(rep.rows)} rows pass, max tail {worst_tail:.3g}", {
        "passed_rows": len(rep.rows) - len(fails), "max_tail": worst_tail,
        "mean_limit_norm": rep.mean_limit_norm,
        **{f"measured_{r.epsilon}_{r.r}": r.measured for r in rep.rows}}


def stable_sandwich(seed, quick):
    return _empirical_sandwich(AlphaStable(1.5, 1.0), seed, quick)


def ou_sandwich(seed, quick):
    return _empirical_sandwich(GaussOU(1.0, 1.0), seed, quick)


def summability(seed, quick):
    gauss = summability_report(0.5, N_max=80)
    stable = summability_report(0.5, 1.5, 1.0, N_max=80)
    ok = gauss.converged and stable.converged and gauss.bounds_hold and stable.bounds_hold
    return ok, (f"relative change {gauss.relative_change:.1e} / {stable.relative_change:.1e} < 1e-6, "
                f"split bounds {'hold' if gauss.bounds_hold and stable.bounds_hold else 'violated'}"), {
        "gaussian_change": gauss.relative_change, "stable_change": stable.relative_change,
        "gaussian_sum": float(gauss.partial_sums[79]), "stable_sum": float(stable.partial_sums[79])}


def small_noise(seed, quick):
    cfg = CutoffConfig(LatticeParams(1.0, 64), Brownian(1.0), unit_vector(1, 64),
                       epsilons=[1e-1, 1e-2, 1e-3], offsets_r=[-1, 0, 1], p=2, seed=seed,
                       norm_samples=5000 if quick else 20000)
    prof = small_noise_profile(cfg)
    worst = max(r.excess - r.gap for r in prof.rows)
    ratio_dev = max(abs(q - 0.5) for q in prof.gap_ratios)
    return prof.passed, f"max excess-gap {worst:.2e} <= 1e-6, gap ratio deviation {ratio_dev:.1e}", {
        "max_excess_minus_gap": worst, "gap_ratio_deviation": ratio_dev}


def ou_variance(seed, quick):
    ens = ou_path_ensemble(1.0, 1.0, 1.0, stream(seed, 113), paths=4000 if quick else 20000)
    metrics, lines, ok = {}, [], True
    for n in (1, 2):
        v = ou_limit_variance(n, 1.0, 1.0, 1.0, ensemble=ens)
        second = v.convolution_term
        ok &= second <= v.bound
        metrics |= {f"mode{n}_closed_form": v.closed_form, f"mode{n}_path": v.path_estimate,
                    f"mode{n}_path_se": v.path_se, f"mode{n}_convolution": second,
                    f"mode{n}_bound": v.bound}
        lines.append(f"n={n}: closed {v.closed_form:.4f}, path {v.path_estimate:.4f}+-{v.path_se:.4f}, "
                     f"discrepancy {v.closed_form - v.path_estimate:+.4f}, convolution {second:.4f} <= {v.bound:.3f}")
    return bool(ok), "; ".join(lines), metrics


def determinism(seed, quick):
    from .cli import main
    outputs = []
    with tempfile.TemporaryDirectory() as tmp:
        for run in ("a", "b"):
            out = Path(tmp) / run
            code = main(["selftest", "--quick", "--criteria", "4,9,10,13", "--seed", str(seed),
                         "--out", str(out), "--format", "both", "--quiet"])
            outputs.append((code, {p.name: p.read_bytes() for p in sorted(out.iterdir())}))
    same = outputs[0][1] == outputs[1][1] and len(outputs[0][1]) > 0
    return same, f"{len(outputs[0][1])} artifacts byte-identical across runs" if same else "artifacts differ", {
        "artifacts": len(outputs[0][1]), "identical": same}


CRITERIA = {
    1: ("Lyapunov isometry", lyapunov_isometry),
    2: ("flow oracle equivalence", flow_oracle),
    3: ("Bessel identity and recurrence", bessel_identity),
    4: ("shift linearity", shift_linearity),
    5: ("Gaussian sandwich", gaussian_sandwich),
    6: ("covariance oracle", covariance_oracle),
    7: ("second-moment identity", second_moment_identity),
    8: ("stable moment formula", stable_moment),
    9: ("stable sandwich", stable_sandwich),
    10: ("OU sandwich", ou_sandwich),
    11: ("summability", summability),
    12: ("small-noise profile", small_noise),
    13: ("OU limiting variance", ou_variance),
    14: ("determinism", determinism),
}


def run_criterion(number: int, seed: int = 0, quick: bool = False) -> Outcome:
    name, check = CRITERIA[number]
    start = time.perf_counter()
    passed, summary, metrics = check(seed, quick)
    return Outcome(number, name, bool(passed), summary, metrics, time.perf_counter() - start)


def run_all(numbers=None, seed: int = 0, quick: bool = False, echo=None) -> list[Outcome]:
    outcomes = []
    for number in numbers or sorted(CRITERIA):
        outcome = run_criterion(number, seed, quick)
        if echo:
            echo(outcome.line())
        outcomes.append(outcome)
    return outcomes
