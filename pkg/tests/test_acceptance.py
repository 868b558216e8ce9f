"""Acceptance gate.

Each numbered test checks one acceptance criterion at its stated tolerance on
the baseline setup (p = 5, Gaussian A = 1, sigma = 1, n = 4096, cfl = 0.45,
R_max = T + 10) and records a PASS/FAIL line, printed at the end of the run.
Run alone with ``python3 -m pytest tests/test_acceptance.py -v``.
"""
import math

import numpy as np
import pytest

from radwave.core import SimConfig
from radwave.diagnostics import (
    NAKANISHI_CONSTANT,
    diagnostic_rows,
    free_energy_norm_sq,
    interior_weighted_energy,
    morawetz_report,
    nakanishi_cumulative,
    total_energy,
)
from radwave.ineqlab import (
    HARDY_KAPPAS,
    finite_speed_family_verdicts,
    hardy_family_verdicts,
    pointwise_estimate_check,
)
from radwave.pipeline import config_from_dict, fit_decay_rate, run_config
from radwave.radiation import (
    cauchy_transport,
    exterior_error,
    extract_radiation,
    scattering_cauchy,
)
from radwave.solver import evolve

P = 5.0
N = 4096
RESULTS = {}
RUNS = {}


def record(num, ok, detail):
    RESULTS[num] = (bool(ok), detail)
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
    return bool(ok)


def baseline(t_final, n=N, **kw):
    kw.setdefault("output_every", 10 * n // N)
    return SimConfig(p=P, dr=(t_final + 10.0) / n, n=n, t_final=t_final, **kw)


def run(key, cfg):
    if key not in RUNS:
        RUNS[key] = evolve(cfg)
    return RUNS[key]


@pytest.fixture(scope="module")
def long_run():
    return run("nonlinear T=200", baseline(200.0))


@pytest.fixture(scope="module")
def long_rows(long_run):
    return diagnostic_rows(long_run)


def morawetz_pair(n):
    cfg = baseline(25.0, n=n)
    return (
        run(f"morawetz fwd n={n}", cfg),
        run(f"morawetz bwd n={n}", cfg.with_changes(direction="backward")),
    )


MU1_MAX = 2 * (P - 1) / (P + 1)
MU2_MAX = 1 / (P + 1)


def test_criterion_01_energy_conservation():
    drifts = []
    for n in (N, 2 * N):
        tr = run(f"energy n={n}", baseline(50.0, n=n))
        g = tr.grid
        E = np.array([total_energy(s, g, P) for s in tr.snapshots])
        drifts.append(float(np.max(np.abs(E - E[0])) / E[0]))
    factor = drifts[0] / drifts[1]
    ok = drifts[0] <= 1e-4 and factor >= 3.0
    assert record(1, ok, f"drift {drifts[0]:.2e} (<= 1e-4), halving factor {factor:.2f} (>= 3)")


def test_criterion_02_morawetz_identity():
    res = [morawetz_report(*morawetz_pair(n), 20.0, 5.0, MU1_MAX, MU2_MAX).relative_residual
           for n in (N, 2 * N)]
    factor = res[0] / res[1]
    ok = res[0] <= 1e-2 and factor >= 2.0
    assert record(2, ok, f"|sum - 2E|/2E = {res[0]:.2e} (<= 1e-2), refinement factor {factor:.2f} (>= 2)")


def test_criterion_03_morawetz_term_ledger():
    rep = morawetz_report(*morawetz_pair(N), 20.0, 5.0, MU1_MAX, MU2_MAX)
    E = rep.two_E / 2
    ok = min(rep.M) >= -1e-3 * E and rep.slack >= -1e-3 * E
    assert record(3, ok, f"min M_j = {min(rep.M):.3e}, slack = {rep.slack:.4f} (both >= {-1e-3 * E:.2e})")


def test_criterion_04_interior_and_inward_decay(long_rows):
    t = np.array([r.t for r in long_rows])
    iw = np.array([r.interior_weighted for r in long_rows])
    ein = np.array([r.e_in for r in long_rows])
    k10 = int(np.argmin(np.abs(t - 10.0)))
    r_iw = iw[-1] / iw[k10]
    r_in = ein[-1] / ein[k10]
    window = (t >= 20.0) & (t <= 200.0)
    exponent, _ = fit_decay_rate(zip(t[window], ein[window]))
    ok = r_iw <= 0.1 and r_in <= 0.1 and exponent >= 0.6
    assert record(4, ok, f"interior ratio {r_iw:.3f}, inward ratio {r_in:.2e} (<= 0.1), "
                         f"inward exponent {exponent:.2f} (>= 0.6)")


def test_criterion_05_radiation_cauchy_rate(long_run):
    window = (-8.0, 10.0)
    length = window[1] - window[0]
    prof = extract_radiation(long_run, window, [25.0, 50.0, 100.0, 200.0])
    series = [(t, prof.cauchy_l2[(t, 2 * t)] / length) for t in (25.0, 50.0, 100.0)]
    target = (P - 3) / (P + 1)
    exponent, _ = fit_decay_rate(series, min_points=3)
    # second route, integrating the transport source along characteristics
    transport = [(t, cauchy_transport(long_run, window, t, 2 * t) / length) for t in (25.0, 50.0, 100.0)]
    t_exponent, _ = fit_decay_rate(transport, min_points=3)
    ok = abs(exponent - target) <= 0.3 * target
    record(5, ok, f"fitted exponent {exponent:.3f}, target {target:.3f} +- 30% "
                  f"(transport-route exponent {t_exponent:.3f})")
    assert ok


def test_criterion_06_linear_isometry():
    lin = run("linear T=200", baseline(200.0, nonlinear=False))
    prof = extract_radiation(lin, (-8.0, 150.0), [200.0])
    target = free_energy_norm_sq(lin.initial, lin.grid)
    rel = abs(prof.energy() - target) / target
    assert record(6, rel <= 0.02, f"pi*int g+^2 = {prof.energy():.5f} vs {target:.5f}, rel {rel:.2e} (<= 0.02)")


def test_criterion_07_exterior_scattering(long_run):
    g = long_run.grid
    prof = extract_radiation(long_run, (-8.0, 150.0), [200.0])
    early = exterior_error(long_run.state_at(10.0), g, prof, 10.0)
    late = exterior_error(long_run.state_at(200.0), g, prof, 10.0)
    assert record(7, late <= 0.1 * early, f"error(200) = {late:.2e}, error(10) = {early:.2e} (ratio <= 0.1)")


def test_criterion_08_scattering_cauchy(long_run):
    early = scattering_cauchy(long_run, 5.0, 10.0)
    late = scattering_cauchy(long_run, 50.0, 100.0)
    assert record(8, late < early, f"(50,100) -> {late:.2e} < (5,10) -> {early:.2e}")


def test_criterion_09_nakanishi(long_run):
    I = {T: nakanishi_cumulative(long_run, T) for T in (25.0, 50.0, 100.0, 200.0)}
    inc = [I[2 * T].cumulative - I[T].cumulative for T in (25.0, 50.0, 100.0)]
    rep = I[200.0]
    bound = NAKANISHI_CONSTANT * rep.bound_value
    ok = inc[0] > inc[1] > inc[2] and rep.cumulative <= bound
    assert record(9, ok, f"increments {inc[0]:.2e} > {inc[1]:.2e} > {inc[2]:.2e}; "
                         f"I(200) = {rep.cumulative:.4f} <= {bound:.4f}")


def test_criterion_10_inequality_lab(long_run):
    # make sure every acceptance run exists before sweeping the snapshots
    run("energy n=4096", baseline(50.0))
    run("linear T=200", baseline(200.0, nonlinear=False))
    morawetz_pair(N)
    worst, count = 0.0, 0
    pointwise_ok = True
    for tr in RUNS.values():
        g = tr.grid
        for s in tr.snapshots:
            v = pointwise_estimate_check(s, g, P)
            pointwise_ok &= v.passed
            worst = max(worst, v.ratio)
            count += 1
    hardy = [v for kappa in HARDY_KAPPAS for v in hardy_family_verdicts(kappa)]
    speed = finite_speed_family_verdicts()
    hardy_ok = all(v.passed for v in hardy)
    speed_ok = all(v.passed for v in speed)
    ok = pointwise_ok and hardy_ok and speed_ok
    assert record(10, ok, f"pointwise {count} snapshots worst {worst:.3f} (<= 1.589); "
                          f"hardy {sum(v.passed for v in hardy)}/{len(hardy)}; "
                          f"finite speed {sum(v.passed for v in speed)}/{len(speed)}")


def test_criterion_11_determinism(tmp_path):
    raw = {"p": P, "dr": 60.0 / N, "n": N, "t_final": 50.0, "output_every": 10,
           "diagnostics": {"q": True, "char_etas": [0.0, 5.0], "pointwise": False}}
    cfg, diag = config_from_dict(raw)
    run_config(cfg, diag, tmp_path / "a")
    run_config(cfg, diag, tmp_path / "b")
    a = (tmp_path / "a" / "diagnostics.csv").read_bytes()
    b = (tmp_path / "b" / "diagnostics.csv").read_bytes()
    assert record(11, a == b, f"{len(a)} bytes, identical = {a == b}")


# -- regression anchors attached to individual operations ----------------------


def test_inward_energy_anchor(long_rows):
    t = np.array([r.t for r in long_rows])
    ein = np.array([r.e_in for r in long_rows])
    assert ein[-1] <= 0.05 * ein[int(np.argmin(np.abs(t - 5.0)))]


def _weighted_interior_profile(tr):
    g = tr.grid
    return np.array([s.t**0.9 * interior_weighted_energy(s, g, P) for s in tr.snapshots if s.t >= 50.0])


@pytest.mark.xfail(strict=True, reason="dispersive lag of the scheme at n = 4096 feeds the interior region")
def test_interior_weighted_decay_anchor_baseline(long_run):
    w = _weighted_interior_profile(long_run)
    assert (np.diff(w) <= 1e-4 * w[:-1]).all()


def test_interior_weighted_decay_anchor_refined():
    tr = evolve(baseline(200.0, n=2 * N, output_every=40))
    w = _weighted_interior_profile(tr)
    assert (np.diff(w) <= 1e-4 * w[:-1]).all()


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
