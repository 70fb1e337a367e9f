"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the summary lines appear at the
end of the session) or directly with ``python tests/test_acceptance.py``.
"""

import sys
import warnings

import numpy as np
import pytest

from phononmem import analysis, memory, qcore, tomography as tomo
from phononmem.harness import config as cfgmod, experiments as ex

Q, E = memory.QUBIT_PARAMS, memory.ENTANGLED_PARAMS
RESULTS = {}


def record(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    RESULTS[number] = line
    print(line)
    return passed


def c1_werner_fidelity():
    p = np.linspace(0.0, 1.0, 1001)
    err = max(abs(analysis.state_fidelity(memory.werner_state(x), qcore.phi_plus_dm()) - (1 + 3 * x) / 4) for x in p)
    f416 = analysis.state_fidelity(memory.werner_state(0.416), qcore.phi_plus_dm())
    ok = err < 1e-9 and abs(f416 - 0.562) < 1e-9
    return record(1, "Werner fidelity identity", ok, f"max |F-(1+3p)/4| = {err:.1e}, F(0.416) = {f416:.6f}")


def c2_average_fidelity():
    p = (4 * 0.677 - 1) / 3
    chi = memory.storage_channel(p)
    f_proc = analysis.process_fidelity(chi)
    f_avg = analysis.average_fidelity(chi)
    ok = abs(f_proc - 0.677) < 1e-12 and abs(f_avg - 0.7847) < 5e-5 and abs(f_avg - 0.784) <= 0.004
    return record(2, "average-fidelity relation", ok, f"F_proc {f_proc:.4f} -> F_avg {f_avg:.5f} (stated 0.784 +- 0.004)")


def c3_peak_rate():
    rate = memory.detected_rate(Q, 0.0)
    return record(3, "peak detected rate", abs(rate - 8.30) <= 0.01, f"{rate:.4f} Hz vs 8.30 Hz")


def c4_thermal_fraction():
    frac = memory.noise_decompose(Q).thermal_fraction(0.0, Q.tau_m)
    return record(4, "thermal noise fraction", abs(frac - 0.78) <= 0.02, f"{frac:.4f} vs 0.78 +- 0.02")


def lifetime_trials(integration_s, n_trials=100, seed0=0):
    cfg = cfgmod.load_config("qubit-fig2")
    tau_m = []
    for k in range(n_trials):
        tau, sig, noise = ex.simulate_lifetime_scan(Q, cfg.tau_grid, integration_s, seed0 + k)
        tau_m.append(analysis.fit_exponential(tau, sig, 1.0 / sig).tau_m)
    tau_m = np.array(tau_m)
    return tau_m, np.mean(np.abs(tau_m / 3.5 - 1) <= 0.05)


def c5_lifetime_fit():
    cfg = cfgmod.load_config("qubit-fig2")
    tau_m, frac = lifetime_trials(cfg.fit_integration_s)
    detail = (f"{100 * frac:.0f}% of 100 trials within 5% at {cfg.fit_integration_s:.0f} s/delay "
              f"(median {np.median(tau_m):.3f} ps)")
    ok = record(5, "lifetime fit", frac >= 0.95, detail)
    # Context only: the scale implied by the +-0.3 Hz error bar on the 8.3 Hz peak.
    t_bar = memory.detected_rate(Q, 0.0) / 0.3 ** 2
    _, frac_bar = lifetime_trials(t_bar)
    print(f"       info: at {t_bar:.0f} s/delay only {100 * frac_bar:.0f}% of trials are within 5%")
    return ok


def c6_crossings():
    q, qb = memory.classical_bound_crossing(Q), memory.crossing_by_bisection(Q)
    e, eb = memory.classical_bound_crossing(E), memory.crossing_by_bisection(E)
    cfg = cfgmod.load_config("qubit-fig2").replace(tau_grid=(0.0,), mc_resamples=0)
    qrep = ex.run(cfg).predictions["classical_bound_crossing_ps"]
    erep = ex.run(cfgmod.load_config("entangled-fig4").replace(tau_grid=(0.0,), mc_resamples=0))
    erep = erep.predictions["concurrence_zero_crossing_ps"]
    shown = (qrep["measured_reference"] == 3.0 and erep["measured_reference"] == 1.3
             and "not a model target" in qrep["role"] and "not a model target" in erep["role"])
    ok = (abs(q - 4.07) <= 0.01 and abs(e - 1.74) <= 0.01 and abs(q - qb) < 1e-9 and abs(e - eb) < 1e-9
          and shown and qrep["model_closed_form"] == q and erep["model_closed_form"] == e)
    return record(6, "threshold crossings", ok,
                  f"qubit {q:.4f} ps (bisection diff {abs(q - qb):.1e}), entangled {e:.4f} ps "
                  f"(diff {abs(e - eb):.1e}); measured 3 / 1.3 ps shown as references")


def c7_energy_scaling():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = memory.predict_energy(Q, 10.0, memory.ENERGY_CLAIMS_QUBIT)
    eta, f = rep.values["eta_m"], rep.values["peak_average_fidelity"]
    ok = abs(eta - 0.0393) <= 0.0015 and abs(f - 0.862) <= 0.01
    return record(7, "pulse-energy prediction", ok, f"eta_m {100 * eta:.2f}%, peak F_avg {f:.4f}")


def c8_cooling_factor():
    r = memory.bose_occupation(295.0, 40.0) / memory.bose_occupation(233.0, 40.0)
    return record(8, "cooling factor", abs(r - 5.66) <= 0.05, f"n(295 K)/n(233 K) = {r:.4f}")


def _rate_for_min_counts(probs, counts=1e6):
    """Rate giving every setting that can click at least ``counts`` expected counts in 1 s."""
    probs = np.asarray(probs)
    return counts / probs[probs > 1e-9].min()


def c9_tomography_equivalence():
    worst_noiseless, worst_counts = 0.0, 0.0
    rng = np.random.default_rng(9)
    states = [memory.werner_state(0.416), qcore.phi_plus_dm()] + [qcore.random_density_matrix(4, rng) for _ in range(3)]
    for rho in states:
        recs = tomo.simulate_state_records(rho, tomo.state_settings(2), 1000.0)
        mle = tomo.mle_state_tomography(recs).estimate
        worst_noiseless = max(worst_noiseless, qcore.trace_distance(mle, tomo.linear_inversion_state(recs)),
                              qcore.trace_distance(mle, rho))
        settings = tomo.state_settings(2, 0, 1.0)
        rate = _rate_for_min_counts([tomo.expected_counts(rho, st, 1.0) for st in settings])
        recs = tomo.simulate_state_records(rho, settings, rate, rng)
        worst_counts = max(worst_counts, qcore.trace_distance(tomo.mle_state_tomography(recs).estimate, rho))
    chis = [memory.storage_channel(0.5961), qcore.IDENTITY_CHI, qcore.unitary_chi(qcore.random_unitary(2, rng))]
    for chi in chis:
        recs = tomo.simulate_process_records(chi, tomo.process_settings(), 1000.0)
        mle = tomo.mle_process_tomography(recs).estimate
        worst_noiseless = max(worst_noiseless, qcore.trace_distance(mle, tomo.linear_inversion_process(recs)),
                              qcore.trace_distance(mle, chi))
        probs = [r.expected_rate for r in tomo.simulate_process_records(chi, tomo.process_settings(0, 1.0), 1.0)]
        recs = tomo.simulate_process_records(chi, tomo.process_settings(0, 1.0), _rate_for_min_counts(probs), rng)
        worst_counts = max(worst_counts, qcore.trace_distance(tomo.mle_process_tomography(recs).estimate, chi))
    ok = worst_noiseless < 1e-6 and worst_counts < 1e-3
    return record(9, "tomography oracle equivalence", ok,
                  f"noiseless {worst_noiseless:.1e} (< 1e-6), >= 1e6 counts/setting {worst_counts:.1e} (< 1e-3)")


def c10_statistical_round_trip():
    cfg = cfgmod.load_config("entangled-fig4")
    assert cfg.mc_resamples >= 100
    rep = ex.run(cfg)
    worst, worst_at, misses = 0.0, None, []
    for row in rep.per_tau:
        for metric in ("f_phi", "concurrence"):
            dev = abs(row[metric] - row[f"{metric}_model"])
            sd = row[f"{metric}_err"]
            if dev > 3 * sd:
                misses.append(f"{metric} at {row['tau_ps']} ps ({dev / sd:.2f} sd)")
            if sd > 0 and dev / sd > worst:
                worst, worst_at = dev / sd, (metric, row["tau_ps"])
    detail = (f"seed {cfg.seed}, {cfg.mc_resamples} resamples, {len(rep.per_tau)} delays; "
              f"largest deviation {worst:.2f} sd ({worst_at[0]} at {worst_at[1]} ps)")
    if misses:
        detail += "; outside 3 sd: " + ", ".join(misses)
    return record(10, "statistical round trip", not misses, detail)


def c11_documented_discrepancy():
    cfg = cfgmod.load_config("qubit-fig2").replace(mode="predict", predict_scenario="cooling")
    cooling = ex.run(cfg).predictions["cooling"]
    comps = {c["quantity"]: c for k in ("qubit", "entangled") for c in cooling[k]["comparisons"]}
    expected = {  # quantity: (rounded derived value, tolerance, stated value)
        "peak_average_fidelity": (0.904, 0.003, 0.91),
        "classical_bound_crossing_ps": (8.6, 0.1, 7.6),
        "werner_fidelity": (0.672, 0.002, 0.787),
        "concurrence_zero_crossing_ps": (4.6, 0.05, 6.0),
    }
    ok = cooling["any_discrepancy"] is True and set(comps) == set(expected)
    parts = []
    for name, (derived, tol, stated) in expected.items():
        c = comps.get(name)
        good = c is not None and abs(c["derived"] - derived) <= tol and c["stated"] == stated and c["discrepancy"]
        ok &= bool(good)
        if c is not None:
            parts.append(f"{c['derived']:.4g} vs {c['stated']:g}{'' if c['discrepancy'] else ' (NO FLAG)'}")
    return record(11, "documented discrepancies", ok, f"at {cfg.predict_temperature_k} K: " + ", ".join(parts))


CHECKS = [c1_werner_fidelity, c2_average_fidelity, c3_peak_rate, c4_thermal_fraction, c5_lifetime_fit,
          c6_crossings, c7_energy_scaling, c8_cooling_factor, c9_tomography_equivalence,
          c10_statistical_round_trip, c11_documented_discrepancy]


@pytest.mark.parametrize("check", CHECKS, ids=[c.__name__ for c in CHECKS])
def test_criterion(check):
    assert check(), RESULTS.get(int(check.__name__[1:].split("_")[0]))


if __name__ == "__main__":
    results = [check() for check in CHECKS]
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
