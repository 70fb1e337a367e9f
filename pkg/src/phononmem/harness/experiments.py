"""End-to-end simulated experiments, data analysis, fits and predictions.

Random streams are keyed by storage time, not grid position: the stream for
delay ``tau`` is ``SeedSequence(seed, spawn_key=(round(tau * 1e6), purpose))``.
Per-delay results therefore do not depend on which other delays are in the
grid or in which order they are processed.
"""

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__, _kernels, analysis, memory, qcore, tomography as tomo
from ..errors import ValidationError

SIMULATE, MONTE_CARLO, LIFETIME = 0, 1, 2


def tau_stream(seed, tau, purpose):
    return np.random.SeedSequence(seed, spawn_key=(int(round(float(tau) * 1_000_000)), purpose))


def rng_for(seed, tau, purpose):
    return np.random.default_rng(tau_stream(seed, tau, purpose))


@dataclass
class RunReport:
    mode: str
    config: dict
    provenance: dict
    columns: list
    per_tau: list
    fits: dict = field(default_factory=dict)
    predictions: dict = field(default_factory=dict)
    records: dict = field(default_factory=dict)

    def column(self, name):
        return [row.get(name) for row in self.per_tau]

    def to_dict(self):
        return {
            "config": self.config,
            "provenance": self.provenance,
            "per_tau": self.per_tau,
            "fits": self.fits,
            "predictions": self.predictions,
        }


def _provenance(config):
    return {
        "config_hash": config.digest(),
        "config_source": config.source,
        "seed": config.seed,
        "mode": config.mode,
        "version": __version__,
        "kernel_backend": _kernels.BACKEND,
    }


def _matrix(m):
    return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}


# ---------------------------------------------------------------------------
# reconstruction blocks shared by the simulated and ingested paths
# ---------------------------------------------------------------------------

def _process_metrics(records):
    est = tomo.mle_process_tomography(records)
    f_proc = analysis.process_fidelity(est.estimate)
    return est, {"f_proc": f_proc, "f_avg": (2.0 * f_proc + 1.0) / 3.0}


def _two_qubit_metrics(records, rho_in):
    est = tomo.mle_state_tomography(records, 4)
    rho = est.estimate
    return est, {
        "f_phi": analysis.state_fidelity(rho, qcore.phi_plus_dm()),
        "f_input": analysis.state_fidelity(rho, rho_in),
        "concurrence": analysis.concurrence(rho),
    }


def _one_qubit_metrics(records):
    est = tomo.mle_state_tomography(records, 2)
    rho = est.estimate
    bloch = [float(np.trace(P @ rho).real) for P in qcore.PAULIS[1:]]
    return est, {"purity": float(np.trace(rho @ rho).real),
                 "bloch_x": bloch[0], "bloch_y": bloch[1], "bloch_z": bloch[2]}


def _block_kind(records):
    if all(r.setting.prep is not None for r in records):
        return "process"
    if any(r.setting.prep is not None for r in records):
        raise ValidationError("data mix process rows (with input) and state rows")
    return "two-qubit" if records[0].setting.dim == 4 else "one-qubit"


METRIC_NAMES = {
    "process": ("f_proc", "f_avg"),
    "two-qubit": ("f_phi", "f_input", "concurrence"),
    "one-qubit": ("purity", "bloch_x", "bloch_y", "bloch_z"),
}


def analyze_block(records, tau, seed, mc_resamples, rho_in=None):
    """Reconstruct one delay's data and attach Monte Carlo errors (``None`` when disabled)."""
    kind = _block_kind(records)
    if kind == "process":
        reconstruct = _process_metrics
    elif kind == "two-qubit":
        rho_in = qcore.phi_plus_dm() if rho_in is None else rho_in
        reconstruct = lambda recs: _two_qubit_metrics(recs, rho_in)  # noqa: E731
    else:
        reconstruct = _one_qubit_metrics
    est, metrics = reconstruct(records)
    row = dict(metrics)
    for name in METRIC_NAMES[kind]:
        row[f"{name}_err"] = None
    row["mc_failed"] = None
    if mc_resamples:
        summary = tomo.monte_carlo_uncertainty(records, mc_resamples, lambda recs: reconstruct(recs)[1],
                                               tau_stream(seed, tau, MONTE_CARLO))
        tomo.attach_uncertainty(est, summary)
        for name in METRIC_NAMES[kind]:
            row[f"{name}_err"] = summary.std.get(name)
        row["mc_failed"] = summary.n_failed
    row["log_likelihood"] = est.log_likelihood
    row["total_counts"] = int(round(sum(r.counts for r in records)))
    return kind, est, row


# ---------------------------------------------------------------------------
# simulated experiments
# ---------------------------------------------------------------------------

def _rate_at(config, params, tau):
    base = memory.total_output_rate(params, 0.0) if config.pair_rate_hz is None else config.pair_rate_hz
    total0 = memory.total_output_rate(params, 0.0)
    return base * memory.total_output_rate(params, tau) / total0 if total0 > 0 else 0.0


def _simulate(records_fn, config, tau):
    rng = None if config.noiseless else rng_for(config.require_seed(), tau, SIMULATE)
    return records_fn(rng)


QUBIT_COLUMNS = ["tau_ps", "p_model", "f_avg", "f_avg_err", "f_proc", "f_proc_err", "f_model",
                 "f_proc_model", "rate_signal_hz", "rate_noise_hz", "log_likelihood", "total_counts"]


def run_qubit_experiment(config):
    """Six-input, six-analyzer process tomography at every delay of the grid."""
    if config.mode != "qubit-storage":
        raise ValidationError(f"run_qubit_experiment needs mode qubit-storage, got {config.mode!r}")
    seed = config.require_seed()
    params = config.qubit_params
    rows, all_records = [], {}
    for tau in config.tau_grid:
        p = memory.retrieval_probability(params, tau)
        chi = memory.storage_channel(p)
        settings = tomo.process_settings(tau, config.integration_s)
        rate = _rate_at(config, params, tau)
        records = _simulate(lambda rng: tomo.simulate_process_records(chi, settings, rate, rng, config.accidental_hz),
                            config, tau)
        _, est, metrics = analyze_block(records, tau, seed, config.mc_resamples)
        row = {"tau_ps": float(tau), "p_model": p, "f_model": (1.0 + p) / 2.0,
               "f_proc_model": (1.0 + 3.0 * p) / 4.0,
               "rate_signal_hz": memory.detected_rate(params, tau, True),
               "rate_noise_hz": memory.detected_rate(params, tau, False)}
        row.update(metrics)
        row["estimate"] = _matrix(est.estimate)
        rows.append(row)
        all_records[float(tau)] = records
    report = RunReport(config.mode, config.to_dict(), _provenance(config), QUBIT_COLUMNS, rows,
                       records=all_records)
    report.fits["lifetime"] = lifetime_scan_fit(config)
    report.predictions = _crossing_summary(params, "qubit")
    return report


ENTANGLED_COLUMNS = ["tau_ps", "p_model", "f_phi", "f_phi_err", "f_input", "f_input_err", "concurrence",
                     "concurrence_err", "f_phi_model", "f_input_model", "concurrence_model",
                     "f_phi_werner", "concurrence_werner", "log_likelihood", "total_counts"]


def input_state(config):
    if config.input_state == "phi_plus":
        return qcore.phi_plus_dm()
    if config.input_state == "werner":
        return memory.werner_state(config.input_werner_p)
    if not config.input_matrix_file:
        raise ValidationError("input.state = matrix needs input.matrix_file")
    try:
        data = json.loads(Path(config.input_matrix_file).read_text())
        rho = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ValidationError(f"cannot read input matrix: {exc}") from None
    if rho.shape != (4, 4):
        raise ValidationError("input matrix must be 4x4")
    return qcore.check_density_matrix(rho)


def run_entangled_experiment(config):
    """Two-qubit state tomography of the retrieved signal and its herald."""
    if config.mode != "entangled-storage":
        raise ValidationError(f"run_entangled_experiment needs mode entangled-storage, got {config.mode!r}")
    seed = config.require_seed()
    params = config.entangled_params
    rho_in = input_state(config)
    rows, all_records = [], {}
    for tau in config.tau_grid:
        p = memory.retrieval_probability(params, tau)
        rho_out = qcore.apply_one_sided(memory.storage_channel(p), rho_in, qcore.SIGNAL)
        settings = tomo.state_settings(2, tau, config.integration_s)
        rate = _rate_at(config, params, tau)
        records = _simulate(lambda rng: tomo.simulate_state_records(rho_out, settings, rate, rng, config.accidental_hz),
                            config, tau)
        _, est, metrics = analyze_block(records, tau, seed, config.mc_resamples, rho_in)
        row = {"tau_ps": float(tau), "p_model": p,
               "f_phi_model": analysis.state_fidelity(rho_out, qcore.phi_plus_dm()),
               "f_input_model": analysis.state_fidelity(rho_out, rho_in),
               "concurrence_model": analysis.concurrence(rho_out),
               "f_phi_werner": (1.0 + 3.0 * p) / 4.0,
               "concurrence_werner": max(0.0, (3.0 * p - 1.0) / 2.0)}
        row.update(metrics)
        row["estimate"] = _matrix(est.estimate)
        rows.append(row)
        all_records[float(tau)] = records
    report = RunReport(config.mode, config.to_dict(), _provenance(config), ENTANGLED_COLUMNS, rows,
                       records=all_records)
    report.predictions = _crossing_summary(params, "entangled")
    return report


def _crossing_summary(params, which):
    closed = memory.classical_bound_crossing(params)
    bisect = memory.crossing_by_bisection(params)
    if which == "qubit":
        ref_value, ref_text = memory.MEASURED_REFERENCES["qubit_classical_bound_ps"]
        name = "classical_bound_crossing_ps"
    else:
        ref_value, ref_text = memory.MEASURED_REFERENCES["entangled_concurrence_zero_ps"]
        name = "concurrence_zero_crossing_ps"
    out = {
        name: {"model_closed_form": closed, "model_bisection": bisect,
               "measured_reference": ref_value, "measured_text": ref_text,
               "role": "measured-data reference, not a model target"},
        "model_at_tau0": memory.model_summary(params),
    }
    if which == "entangled":
        v, text = memory.MEASURED_REFERENCES["entangled_p0"]
        out["p0"] = {"model": memory.retrieval_probability(params, 0.0), "measured_reference": v,
                     "measured_text": text}
    return out


# ---------------------------------------------------------------------------
# lifetime scan and fitting
# ---------------------------------------------------------------------------

def simulate_lifetime_scan(params, tau_grid, integration_s, seed):
    """Poisson-sampled detected rates with and without an input photon, in Hz."""
    tau = np.asarray(tau_grid, dtype=float)
    sig, noise = [], []
    for t in tau:
        rng = rng_for(seed, t, LIFETIME)
        sig.append(rng.poisson(memory.detected_rate(params, t, True) * integration_s) / integration_s)
        noise.append(rng.poisson(memory.detected_rate(params, t, False) * integration_s) / integration_s)
    return tau, np.array(sig), np.array(noise)


def _fit_rates(tau, sig, noise, method, ws=None, wn=None):
    # Rates are counts / t, so 1 / rate is proportional to the Poisson variance.
    if ws is None and np.all(sig > 0):
        ws = 1.0 / sig
    if wn is None and noise is not None and np.all(noise > 0):
        wn = 1.0 / noise
    decay = analysis.fit_exponential(tau, sig, ws)
    out = {"signal_decay": decay.to_dict(), "method": method}
    if noise is not None:
        rates = analysis.fit_memory_rates(tau, sig, noise, ws, wn, method=method)
        out["memory_rates"] = rates.to_dict()
    return out


def lifetime_scan_fit(config):
    p = config.qubit_params
    tau, sig, noise = simulate_lifetime_scan(p, config.tau_grid, config.fit_integration_s, config.require_seed())
    if len(tau) < 3:
        return {"skipped": "fewer than 3 delays"}
    out = _fit_rates(tau, sig, noise, config.fit_method)
    out["integration_s"] = config.fit_integration_s
    out["reference_lifetime_ps"] = 3.5
    return out


FIT_COLUMNS = ["tau_ps", "signal_rate_hz", "noise_rate_hz", "signal_fit_hz", "signal_model_hz", "noise_model_hz"]


def run_fit(config, signal=None, noise=None):
    """Fit rate curves; simulate the lifetime scan from the qubit parameters when no data are given.

    ``signal`` and ``noise`` are ``(tau, rate)`` or ``(tau, rate, weight)`` tuples; noise is optional.
    """
    params = config.qubit_params
    ws = wn = None
    if signal is None:
        tau, sig, nz = simulate_lifetime_scan(params, config.tau_grid, config.fit_integration_s,
                                              config.require_seed())
        source = "simulated"
    else:
        tau, sig = (np.asarray(a, dtype=float) for a in signal[:2])
        ws = np.asarray(signal[2], dtype=float) if len(signal) > 2 else None
        nz = None
        if noise is not None:
            tn, nz = (np.asarray(a, dtype=float) for a in noise[:2])
            wn = np.asarray(noise[2], dtype=float) if len(noise) > 2 else None
            if tn.shape != tau.shape or np.any(tn != tau):
                raise ValidationError("signal and noise rate files must share the same delays")
        source = "ingested"
    fits = _fit_rates(tau, sig, nz, config.fit_method, ws, wn)
    fits["source"] = source
    decay = fits["signal_decay"]
    rows = []
    for i, t in enumerate(tau):
        row = {"tau_ps": float(t), "signal_rate_hz": float(sig[i]),
               "noise_rate_hz": None if nz is None else float(nz[i]),
               "signal_fit_hz": decay["a"] + decay["b"] * float(np.exp(-t / decay["tau_m"])),
               "signal_model_hz": memory.detected_rate(params, t, True) if source == "simulated" else None,
               "noise_model_hz": memory.detected_rate(params, t, False) if source == "simulated" else None}
        rows.append(row)
    return RunReport("fit", config.to_dict(), _provenance(config), FIT_COLUMNS, rows, fits=fits)


# ---------------------------------------------------------------------------
# ingested data
# ---------------------------------------------------------------------------

def run_analysis(config, records):
    """Reconstruct and score ingested (or exported) records, one block per delay."""
    from .countsio import group_by_tau

    seed = config.require_seed() if config.mc_resamples else (config.seed or 0)
    groups = group_by_tau(records)
    rows, kinds = [], set()
    rho_in = None
    for tau, recs in groups.items():
        kind = _block_kind(recs)
        kinds.add(kind)
        if kind == "two-qubit" and rho_in is None:
            rho_in = input_state(config)
        _, est, metrics = analyze_block(recs, tau, seed, config.mc_resamples, rho_in)
        row = {"tau_ps": float(tau)}
        row.update(metrics)
        row["estimate"] = _matrix(est.estimate)
        rows.append(row)
    if len(kinds) != 1:
        raise ValidationError(f"data mix tomography kinds: {sorted(kinds)}")
    kind = kinds.pop()
    names = METRIC_NAMES[kind]
    cols = ["tau_ps"] + [c for n in names for c in (n, f"{n}_err")] + ["log_likelihood", "total_counts"]
    report = RunReport("analyze", config.to_dict(), _provenance(config), cols, rows)
    report.fits["kind"] = kind
    return report


# ---------------------------------------------------------------------------
# predictions
# ---------------------------------------------------------------------------

def _scenarios(config):
    s = config.predict_scenario
    if s == "both":
        return ("cooling", "energy")
    return (s,)


def run_prediction(config, scenario=None):
    """Cooling and pulse-energy predictions set against the published values."""
    cfg = config if scenario is None else config.replace(predict_scenario=scenario)
    qp, ep = cfg.qubit_params, cfg.entangled_params
    reports = {}
    for s in _scenarios(cfg):
        if s == "cooling":
            reports["cooling"] = {
                "qubit": memory.predict_cooling(qp, cfg.predict_temperature_k, memory.COOLING_CLAIMS_QUBIT),
                "entangled": memory.predict_cooling(ep, cfg.predict_temperature_k, memory.COOLING_CLAIMS_ENTANGLED),
                "temperature_k": cfg.predict_temperature_k,
                "thermal_reduction_factor": memory.bose_occupation(qp.T, qp.nu_phonon)
                / memory.bose_occupation(cfg.predict_temperature_k, qp.nu_phonon),
            }
        elif s == "energy":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                reports["energy"] = {
                    "qubit": memory.predict_energy(qp, cfg.predict_energy_nj, memory.ENERGY_CLAIMS_QUBIT),
                    "entangled": memory.predict_energy(ep, cfg.predict_energy_nj),
                    "energy_nj": cfg.predict_energy_nj,
                }
        else:
            reports["identity"] = {"qubit": memory.predict(qp, "identity"), "entangled": memory.predict(ep, "identity")}

    predictions = {}
    for name, rep in reports.items():
        entry = {}
        for k, v in rep.items():
            entry[k] = v.to_dict() if isinstance(v, memory.PredictionReport) else v
        comps = [c for k in ("qubit", "entangled") for c in rep[k].comparisons]
        entry["any_discrepancy"] = any(c.discrepancy for c in comps)
        predictions[name] = entry
    predictions["measured_references"] = {
        k: {"value": v, "text": t, "role": "measured-data reference"} for k, (v, t) in memory.MEASURED_REFERENCES.items()
    }
    predictions["noise"] = {
        name: {**memory.noise_decompose(p).__dict__,
               "thermal_fraction_tau0": memory.noise_decompose(p).thermal_fraction(0.0, p.tau_m)}
        for name, p in (("qubit", qp), ("entangled", ep))
    }

    cols = ["tau_ps"]
    rows = []
    for tau in cfg.tau_grid:
        row = {"tau_ps": float(tau)}
        for label, p in (("qubit", qp), ("entangled", ep)):
            variants = {"base": p}
            for name, rep in reports.items():
                variants[name] = rep[label].scaled
            for vname, vp in variants.items():
                pr = memory.retrieval_probability(vp, tau)
                if label == "qubit":
                    row[f"qubit_f_avg_{vname}"] = (1.0 + pr) / 2.0
                else:
                    row[f"entangled_f_phi_{vname}"] = (1.0 + 3.0 * pr) / 4.0
                    row[f"entangled_concurrence_{vname}"] = max(0.0, (3.0 * pr - 1.0) / 2.0)
        rows.append(row)
    cols += [k for k in rows[0] if k != "tau_ps"]
    return RunReport("predict", cfg.to_dict(), _provenance(cfg), cols, rows, predictions=predictions)


def run(config, **kwargs):
    if config.mode == "qubit-storage":
        return run_qubit_experiment(config)
    if config.mode == "entangled-storage":
        return run_entangled_experiment(config)
    if config.mode == "predict":
        return run_prediction(config, **kwargs)
    if config.mode == "fit":
        return run_fit(config, **kwargs)
    raise ValidationError(f"mode {config.mode!r} needs input records; use run_analysis")

