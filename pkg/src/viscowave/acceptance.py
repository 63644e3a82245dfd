"""Built-in verification suite.

Each criterion runs a concrete scenario (or reuses a cached one) and checks a
quantitative statement at a stated tolerance, printing one PASS/FAIL line.
The suite is callable from the command line (the ``verify`` subcommand) and
from the test suite; both share this module so the printed verdicts and the
test results can never diverge.
"""
from __future__ import annotations

import math
import time
from dataclasses import replace

import numpy as np

from . import decay, energetics, wellconst
from .config import ScenarioConfig
from .decay import DecayModel
from .grid import SpatialGrid
from .history import Classification, HistoryDatum, classify, nehari_gap, \
    quadratic_part
from .runner import RunRecord, run_scenario

RNG_SEED = 1234


# ---------------------------------------------------------------------------
# suite scenarios


def w1_scenario(n: int = 200, t_end: float = 20.0) -> ScenarioConfig:
    """Small sine datum in the stable well: 1-D [0, pi], exp(1,1), m=1, p=3."""
    return ScenarioConfig(dim=1, extent=math.pi, n=n, kernel_family="exponential",
                          mu0=1.0, c=1.0, m=1.0, p=3.0, amplitude=0.1,
                          t_end=t_end, stride=8, output_every=10)


def case2_scenario(t_end: float = 20.0) -> ScenarioConfig:
    """Superlinear damping, exponential kernel."""
    return replace(w1_scenario(t_end=t_end), m=3.0)


def case34_scenario(t_end: float = 20.0) -> ScenarioConfig:
    """Polynomial kernel with compactly supported history."""
    return replace(w1_scenario(t_end=t_end), kernel_family="polynomial",
                   mu0=1.0, r=1.5)


def global_scenario(t_end: float = 100.0) -> ScenarioConfig:
    """m >= p regime: damping dominates the source."""
    return replace(w1_scenario(t_end=t_end), m=3.0, p=2.0, amplitude=0.5)


def blowup_scenario(t_end: float = 50.0) -> ScenarioConfig:
    """Amplitude swept upward until the total energy starts negative."""
    base = replace(w1_scenario(t_end=t_end), output_every=20)
    A = 1.0
    for _ in range(30):
        probe = replace(base, amplitude=A, t_end=0.0)
        rec = run_scenario(probe)
        if rec.result.ledger.E0 < 0.0:
            return replace(base, amplitude=A)
        A *= 1.5
    raise RuntimeError("amplitude sweep failed to reach negative energy")


# ---------------------------------------------------------------------------
# shared run cache


class Suite:
    def __init__(self, quick: bool = False):
        self.quick = quick
        self._runs: dict = {}

    def run(self, config: ScenarioConfig) -> RunRecord:
        key = config.content_hash()
        if key not in self._runs:
            self._runs[key] = run_scenario(config)
        return self._runs[key]

    def suite_records(self) -> list:
        """Everything the monotonicity criterion sweeps."""
        records = [self.run(w1_scenario()), self.run(case2_scenario()),
                   self.run(case34_scenario())]
        records.append(self.run(
            global_scenario(40.0 if self.quick else 100.0)))
        records.append(self.run(blowup_scenario()))
        return records


# ---------------------------------------------------------------------------
# independent gamma oracle for criterion 10


def gamma_ascent_oracle(grid: SpatialGrid, p: float, n_restarts: int = 5,
                        seed: int = RNG_SEED) -> float:
    """Best Rayleigh ratio from quasi-Newton ascent with random restarts.

    Independent of the fixed-point route: maximizes log(ratio) directly with
    L-BFGS from seeded random fields.
    """
    from scipy.optimize import minimize

    rng = np.random.default_rng(seed)
    vol = grid.cell_volume

    def neg_log_ratio(x):
        u = x.reshape(grid.shape)
        lp = grid.lp_norm_pow(u, p + 1.0)
        h1 = grid.h1_seminorm_sq(u)
        val = -(np.log(lp) / (p + 1.0) - 0.5 * np.log(h1))
        g_lp = vol * np.abs(u) ** (p - 1.0) * u * (p + 1.0)
        g_h1 = -2.0 * vol * grid.laplacian(u)
        grad = -(g_lp / ((p + 1.0) * lp) - 0.5 * g_h1 / h1)
        return val, grad.ravel()

    best = -np.inf
    for _ in range(n_restarts):
        x0 = rng.standard_normal(grid.size)
        res = minimize(neg_log_ratio, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": 2000, "ftol": 1e-14, "gtol": 1e-12})
        best = max(best, math.exp(-res.fun))
    return best


# ---------------------------------------------------------------------------
# W2 datum construction for criterion 9


def w2_datum(grid: SpatialGrid, kernel, p: float, d: float,
             ds: float = 1e-2):
    """Amplitude-sweep a ground-state-shaped datum into the unstable well."""
    shape = wellconst.ground_state(grid, p)
    for A in np.geomspace(0.1, 100.0, 200):
        datum = HistoryDatum.from_template(grid, 1.0, modes=(1,))
        datum.shape_field = A * shape
        if (nehari_gap(datum, p, kernel, ds) < 0
                and classify(datum, d, p, kernel, ds) is Classification.W2):
            return datum
    raise RuntimeError("no W2 amplitude found in the sweep range")


# ---------------------------------------------------------------------------
# criteria


def criterion_1(suite: Suite):
    """Energy identity closes and tightens by >= 3x per (dt, h) refinement."""
    ns = [200, 400] if suite.quick else [200, 400, 800]
    residuals, timings = [], []
    for n in ns:
        t0 = time.monotonic()
        rec = suite.run(w1_scenario(n=n))
        timings.append(time.monotonic() - t0)
        residuals.append(rec.result.ledger.rows[-1]["identity_residual"])
    E0 = abs(suite.run(w1_scenario()).result.ledger.E0)
    ok = residuals[0] <= 1e-3 * E0
    ratios = [residuals[j] / residuals[j + 1] for j in range(len(ns) - 1)]
    ok = ok and all(rho >= 3.0 for rho in ratios)
    ok = ok and all(w < 30.0 for w in timings)
    detail = (f"residuals {['%.3e' % r for r in residuals]}, "
              f"bound {1e-3 * E0:.3e}, ratios {['%.2f' % r for r in ratios]}, "
              f"times {['%.1fs' % w for w in timings]}")
    return ok, detail


def criterion_2(suite: Suite):
    """Total energy never increases beyond per-row tolerance, all scenarios."""
    bad = []
    for rec in suite.suite_records():
        report = energetics.monotonicity_check(rec.result.ledger)
        if not report["ok"]:
            bad.append((rec.result.config.content_hash(),
                        len(report["violations"])))
    return not bad, f"violations by scenario: {bad or 'none'}"


def criterion_3(suite: Suite):
    """Well invariance: gap stays positive and the sandwich holds to t=50."""
    t_end = 30.0 if suite.quick else 50.0
    rec = suite.run(w1_scenario(t_end=t_end))
    ledger = rec.result.ledger
    d = rec.constants.d
    below = ledger.E0 < d
    gaps = ledger.column("nehari_gap")
    gap_ok = bool(np.all(gaps > 0))
    sandwich = energetics.sandwich_check(ledger, rec.result.config.p)
    ok = below and gap_ok and sandwich["ok"]
    return ok, (f"E(0)={ledger.E0:.4e} < d={d:.4e}: {below}; "
                f"min gap {gaps.min():.3e}; sandwich ok: {sandwich['ok']}")


def criterion_4(suite: Suite):
    """m=1, exponential kernel: clean exponential fit on the last half."""
    rec = suite.run(w1_scenario())
    t_end = rec.result.config.t_end
    fit = decay.fit_rate(rec.result.ledger, (t_end / 2, t_end), "exponential")
    ok = fit["rate"] > 0 and fit["goodness"] >= 0.98
    return ok, f"rate {fit['rate']:.4f}, goodness {fit['goodness']:.5f}"


def _envelope_bounded(ledger, exponent: float, t_end: float, factor=10.0):
    t = ledger.column("t")
    E = ledger.column("E")
    window = t >= t_end / 2
    env = E[window] * (1.0 + t[window]) ** exponent
    return float(env.max()), float(env[0]), bool(env.max() <= factor * env[0])


def criterion_5(suite: Suite):
    """m=3 exponential kernel: (1+t)^(2/(m-1)) envelope stays bounded."""
    rec = suite.run(case2_scenario())
    pred = decay.predicted_rate(3.0, "exponential")
    mx, start, ok = _envelope_bounded(rec.result.ledger, pred.exponent,
                                      rec.result.config.t_end)
    return ok, f"envelope max {mx:.3e} vs 10x start {10 * start:.3e}"


def criterion_6(suite: Suite):
    """Polynomial kernel, compact history: optimal-rate envelope bounded."""
    rec = suite.run(case34_scenario())
    pred = decay.predicted_rate(1.0, "polynomial", r=1.5, compact_support=True)
    mx, start, ok = _envelope_bounded(rec.result.ledger, pred.exponent,
                                      rec.result.config.t_end)
    return ok, (f"exponent {pred.exponent:g}; envelope max {mx:.3e} "
                f"vs 10x start {10 * start:.3e}")


def criterion_7(suite: Suite):
    """m >= p: global run, no blow-up, quadratic energy stays bounded."""
    rec = suite.run(global_scenario(40.0 if suite.quick else 100.0))
    sE = rec.result.ledger.column("scriptE")
    bounded = bool(np.all(sE <= 10.0 * sE[0]))
    ok = (not rec.result.blew_up) and (not rec.blowup_verdict.detected) \
        and bounded
    return ok, (f"blew_up={rec.result.blew_up}, "
                f"max scriptE/scriptE0 = {sE.max() / sE[0]:.3f}")


def criterion_8(suite: Suite):
    """Negative-energy datum blows up well before t_end."""
    rec = suite.run(blowup_scenario())
    v = rec.blowup_verdict
    ok = (v.hypothesis == "NegativeEnergy" and v.detected
          and v.t_estimate is not None and v.t_estimate < 50.0)
    return ok, (f"hypothesis {v.hypothesis}, detected {v.detected}, "
                f"t_estimate {v.t_estimate}")


def criterion_9(suite: Suite):
    """Constructed W2 data clear the well radius and the scriptE threshold."""
    cfg = w1_scenario()
    grid = cfg.make_grid()
    kernel = cfg.make_kernel()
    consts = wellconst.cached_constants(grid, cfg.p, kernel.k0)
    datum = w2_datum(grid, kernel, cfg.p, consts.d)
    grad0 = math.sqrt(grid.h1_seminorm_sq(datum.value_at(0.0)))
    radius = consts.gamma ** (-(cfg.p + 1.0) / (cfg.p - 1.0))
    sE0 = 0.5 * quadratic_part(datum, kernel)
    ok = grad0 > radius and sE0 > consts.y0
    return ok, (f"grad0 {grad0:.4f} > radius {radius:.4f}: {grad0 > radius}; "
                f"scriptE(0) {sE0:.4f} > y0 {consts.y0:.4f}: {sE0 > consts.y0}")


def criterion_10(suite: Suite):
    """Best-constant oracles and the closed-form threshold relations."""
    t0 = time.monotonic()
    fine = SpatialGrid.line(math.pi, 400)
    g1 = wellconst.sobolev_gamma(fine, 1.0)
    poincare_ok = abs(g1 - 1.0) <= 1e-3

    cfg = w1_scenario()
    grid = cfg.make_grid()
    consts = wellconst.cached_constants(grid, 3.0, 2.0)
    oracle = gamma_ascent_oracle(grid, 3.0)
    gamma_ok = abs(consts.gamma - oracle) <= 1e-4 * oracle

    closed = (consts.d == wellconst.mountain_pass_d(consts.gamma, 3.0)
              and consts.y0 == 2.0 * consts.d)
    ratio = consts.M / consts.d
    target = ((math.sqrt(2.0) + 1.0) / 2.0) * (3.0 - math.sqrt(2.0)) / 2.0
    m_ok = consts.M < consts.d and abs(ratio - target) <= 1e-6
    wall = time.monotonic() - t0
    ok = poincare_ok and gamma_ok and closed and m_ok and wall < 60.0
    return ok, (f"gamma(p=1)={g1:.6f}; gamma={consts.gamma:.8f} vs oracle "
                f"{oracle:.8f}; M/d={ratio:.6f} (target {target:.6f}); "
                f"{wall:.1f}s")


def criterion_11(suite: Suite):
    """Comparison-ODE machinery: closed form, resolvent identity, bound."""
    # linear perturbation (m = 1): S(t) = E0 * exp(-t / (1 + 2C))
    C, E0 = 0.35, 2.0
    model = DecayModel(phi_C=C, m=1.0, T_reiter=1.0)
    times, S = decay.lt_ode_solve(model, E0, 5.0, n_steps=2000)
    exact = E0 * np.exp(-times / (1.0 + 2.0 * C))
    closed_err = float(np.max(np.abs(S - exact) / exact))
    closed_ok = closed_err <= 1e-6

    # resolvent identity (I + Phi^{-1})^{-1} = I - (I + Phi)^{-1},
    # both sides evaluated independently by vectorized bisection
    rng = np.random.default_rng(RNG_SEED)
    x = rng.uniform(1e-3, 10.0, 1000)
    model3 = DecayModel(phi_C=0.7, m=3.0, T_reiter=1.0)

    def phi_inv(z):
        lo = np.zeros_like(z)
        hi = z / model3.phi_C          # Phi(s) >= C s, so Phi^{-1}(z) <= z/C
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            high = model3.phi(mid) > z
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        return 0.5 * (lo + hi)

    lo = np.zeros_like(x)
    hi = x.copy()
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        high = mid + phi_inv(mid) > x
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
    lhs = 0.5 * (lo + hi)
    rhs = x - np.array([decay.resolvent(model3.phi, xi) for xi in x])
    ident_err = float(np.max(np.abs(lhs - rhs)))
    ident_ok = ident_err <= 1e-10

    rec = suite.run(w1_scenario())
    report = decay.comparison_check(rec.result.ledger, 1.0, 2.0, t_start=10.0)
    ok = closed_ok and ident_ok and report["ok"]
    return ok, (f"closed-form err {closed_err:.2e}; identity err "
                f"{ident_err:.2e}; comparison ok={report['ok']} "
                f"(C={report['calibrated_C']:.4g})")


def criterion_12(suite: Suite):
    """Bootstrap iteration counts for two reference parameter pairs."""
    a = decay.optimal_rate_bootstrap(0.2, 1.5)
    b = decay.optimal_rate_bootstrap(0.05, 1.9)
    ok = a["iterations"] == 2 and b["iterations"] == 17
    return ok, (f"(r=1.5, s1=0.2) -> {a['iterations']} updates; "
                f"(r=1.9, s1=0.05) -> {b['iterations']} updates")


def criterion_13(suite: Suite):
    """Approximately linear response to small amplitude perturbations."""
    base = suite.run(w1_scenario())
    deltas = [1e-2, 1e-3, 1e-4]
    sups = []
    for dlt in deltas:
        pert = suite.run(replace(w1_scenario(), amplitude=0.1 + dlt))
        grid = pert.result.grid
        diffs = [math.sqrt(grid.h1_seminorm_sq(up - ub))
                 for up, ub in zip(pert.result.trajectory.u,
                                   base.result.trajectory.u)]
        sups.append(max(diffs))
    ratios = [sups[j] / sups[j + 1] for j in range(len(sups) - 1)]
    ok = (sups[0] > sups[1] > sups[2]
          and all(5.0 <= rho <= 20.0 for rho in ratios))
    return ok, (f"sup norms {['%.3e' % s for s in sups]}, "
                f"ratios {['%.2f' % r for r in ratios]}")


def criterion_14(suite: Suite):
    """Bit-for-bit reproducibility of the ledger on a rerun."""
    bad = []
    for cfg in (w1_scenario(), case34_scenario()):
        first = suite.run(cfg).result.ledger.to_csv()
        again = run_scenario(cfg).result.ledger.to_csv()
        if first != again:
            bad.append(cfg.content_hash())
    return not bad, f"mismatched reruns: {bad or 'none'}"


CRITERIA = [
    (1, "energy identity converges under refinement", criterion_1),
    (2, "total energy monotone in every scenario", criterion_2),
    (3, "stable-well invariance and energy sandwich", criterion_3),
    (4, "exponential decay fit (linear damping)", criterion_4),
    (5, "polynomial envelope (superlinear damping)", criterion_5),
    (6, "optimal polynomial envelope (compact history)", criterion_6),
    (7, "global existence when damping dominates", criterion_7),
    (8, "negative-energy blow-up detected", criterion_8),
    (9, "unstable-well datum clears both thresholds", criterion_9),
    (10, "well constants vs independent oracles", criterion_10),
    (11, "comparison ODE machinery", criterion_11),
    (12, "bootstrap iteration counts", criterion_12),
    (13, "continuous dependence on the datum", criterion_13),
    (14, "ledger reproducibility", criterion_14),
]


def run_all(quick: bool = False, printer=print) -> bool:
    suite = Suite(quick=quick)
    all_ok = True
    for number, title, fn in CRITERIA:
        try:
            ok, detail = fn(suite)
        except Exception as exc:  # a crashed criterion is a failed criterion
            ok, detail = False, f"error: {exc!r}"
        all_ok = all_ok and ok
        printer(f"[{'PASS' if ok else 'FAIL'}] {number:2d} {title}: {detail}")
    return all_ok
