"""Phenomenological model of the two-mode diamond Raman memory.

The memory output is the input state mixed with white noise,

    rho_out = p(tau) rho_in + (1 - p(tau)) I/2,

where ``p(tau)`` is the fraction of detected photons that are retrieved
signal rather than noise:

    p(tau) = S0 e^{-tau/tau_m} / [Nc + (S0 + N0) e^{-tau/tau_m}].

Two rate conventions coexist and are never mixed. ``retrieval_probability``
uses the produced (unhalved) noise rates ``Nc`` and ``N0``. ``detected_rate``
is what one polarization analyzer setting sees, in which the unpolarized
noise is halved by the analyzer.

Rates are in Hz, times in ps, energies in nJ, temperatures in K and the
phonon frequency in THz.
"""

import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import constants as C
from . import qcore
from .errors import DomainError, InconsistentParametersError, RangeWarning


@dataclass(frozen=True)
class MemoryParams:
    S0: float
    Nc: float
    N0: float
    tau_m: float = 3.5
    eta_w: float = 0.062
    eta_r: float = 0.122
    E_w: float = 4.4
    E_r: float = 4.4
    T: float = C.ROOM_TEMPERATURE_K
    nu_phonon: float = 40.0

    def __post_init__(self):
        for name in ("S0", "Nc", "N0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be a non-negative rate, got {v!r}")
        for name in ("tau_m", "T", "nu_phonon", "E_w", "E_r"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v!r}")
        for name in ("eta_w", "eta_r"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v!r}")

    @property
    def eta_m(self):
        """Total memory efficiency, write times retrieval."""
        return self.eta_w * self.eta_r

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)


# Measured rates for single-qubit storage and for storage of one photon of an entangled pair.
QUBIT_PARAMS = MemoryParams(S0=6.2, Nc=3.737, N0=0.464)
ENTANGLED_PARAMS = MemoryParams(S0=1.39, Nc=1.41, N0=0.46)


@dataclass(frozen=True)
class NoiseBreakdown:
    N_th: float
    N_4WM: float

    def thermal_rate(self, tau=0.0):
        return self.N_th

    def fwm_rate(self, tau, tau_m):
        """Four-wave-mixing rate at delay ``tau``: two-pulse plus read-only terms."""
        return self.N_4WM * (1.0 + math.exp(-tau / tau_m))

    def thermal_fraction(self, tau, tau_m):
        total = self.N_th + self.fwm_rate(tau, tau_m)
        return self.N_th / total if total > 0 else 0.0

    def recompose(self):
        """Return ``(Nc, N0)``."""
        return self.N_th + self.N_4WM, self.N_4WM


def _check_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(~np.isfinite(tau)) or np.any(tau < 0):
        raise DomainError(f"storage time must be non-negative, got {tau!r}")
    return tau


def _check_prob(p):
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"probability must lie in [0, 1], got {p!r}")
    return float(p)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def retrieval_probability(params, tau):
    """Fraction of output photons that are retrieved signal; accepts scalar or array ``tau``."""
    tau = _check_tau(tau)
    e = np.exp(-tau / params.tau_m)
    num = params.S0 * e
    den = params.Nc + (params.S0 + params.N0) * e
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    if params.S0 > 0 and params.Nc == 0 and params.N0 == 0:
        p = np.ones_like(p)
    return _scalar(p)


def storage_channel(p):
    """Depolarizing process matrix ``diag((1+3p)/4, (1-p)/4, (1-p)/4, (1-p)/4)``."""
    p = _check_prob(p)
    q = (1.0 - p) / 4.0
    return np.diag([(1.0 + 3.0 * p) / 4.0, q, q, q]).astype(np.complex128)


def apply_memory(rho_in, params, tau):
    rho_in = np.asarray(rho_in, dtype=np.complex128)
    if rho_in.shape != (2, 2):
        raise qcore.InvalidDimensionError(f"memory stores one qubit, got shape {rho_in.shape}")
    p = retrieval_probability(params, tau)
    return p * rho_in + (1.0 - p) * qcore.maximally_mixed(2)


def werner_state(p):
    p = _check_prob(p)
    return p * qcore.phi_plus_dm() + (1.0 - p) * qcore.maximally_mixed(4)


def noise_rate(params, tau):
    """Produced noise rate ``Nc + N0 e^{-tau/tau_m}`` before polarization analysis."""
    tau = _check_tau(tau)
    return _scalar(params.Nc + params.N0 * np.exp(-tau / params.tau_m))


def total_output_rate(params, tau):
    """Signal plus produced noise, summed over both analyzer outcomes."""
    tau = _check_tau(tau)
    return _scalar(params.S0 * np.exp(-tau / params.tau_m) + noise_rate(params, tau))


def detected_rate(params, tau, signal_present=True):
    """Coincidence rate behind an analyzer matched to the stored polarization.

    With a signal present this is ``S0 e^{-tau/tau_m} + (Nc + N0 e^{-tau/tau_m})/2``;
    without, only the halved noise term remains.
    """
    tau = _check_tau(tau)
    noise = 0.5 * (params.Nc + params.N0 * np.exp(-tau / params.tau_m))
    if signal_present:
        return _scalar(params.S0 * np.exp(-tau / params.tau_m) + noise)
    return _scalar(noise)


def noise_decompose(params):
    if params.Nc < params.N0:
        raise InconsistentParametersError(
            f"constant noise Nc={params.Nc} is below the delay-dependent amplitude N0={params.N0}"
        )
    return NoiseBreakdown(N_th=params.Nc - params.N0, N_4WM=params.N0)


def bose_occupation(T, nu):
    """Mean thermal occupation of a phonon mode of frequency ``nu`` THz at ``T`` K."""
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise DomainError(f"temperature must be positive, got {T!r}")
    with np.errstate(over="ignore"):
        return _scalar(1.0 / np.expm1(C.H_THZ_OVER_KB * nu / T))


def scale_params(params, new_E_w=None, new_E_r=None, new_T=None):
    """Rescale rates and efficiency to new pulse energies and crystal temperature.

    Retrieved signal, memory efficiency and four-wave-mixing noise scale with
    ``E_w * E_r``; thermal noise scales with ``E_r`` and the phonon occupation.
    The efficiency factor is applied to ``eta_r`` so ``eta_w`` keeps its
    measured value.
    """
    E_w = params.E_w if new_E_w is None else float(new_E_w)
    E_r = params.E_r if new_E_r is None else float(new_E_r)
    T = params.T if new_T is None else float(new_T)
    if E_w <= 0 or E_r <= 0:
        raise DomainError("pulse energies must be positive")
    if T <= 0:
        raise DomainError("temperature must be positive")
    if max(E_w, E_r) > C.MAX_VALIDATED_ENERGY_NJ:
        warnings.warn(
            f"pulse energy {max(E_w, E_r)} nJ exceeds the {C.MAX_VALIDATED_ENERGY_NJ} nJ validated range",
            RangeWarning,
            stacklevel=2,
        )
    noise = noise_decompose(params)
    quad = (E_w * E_r) / (params.E_w * params.E_r)
    thermal = (E_r / params.E_r) * (bose_occupation(T, params.nu_phonon) / bose_occupation(params.T, params.nu_phonon))
    N_4WM = noise.N_4WM * quad
    N_th = noise.N_th * thermal
    eta_r = params.eta_r * quad
    if eta_r * params.eta_w > 1.0:
        raise DomainError("scaled memory efficiency exceeds 1")
    return params.replace(
        S0=params.S0 * quad,
        Nc=N_th + N_4WM,
        N0=N_4WM,
        eta_r=min(eta_r, 1.0),
        E_w=E_w,
        E_r=E_r,
        T=T,
    )


def classical_bound_crossing(params, threshold=1.0 / 3.0):
    """Storage time at which ``p(tau)`` falls to ``threshold``; ``None`` if it never does.

    ``p`` crosses the threshold where ``e^{-tau/tau_m} = th Nc / (S0 (1 - th) - th N0)``.
    """
    if not 0.0 < threshold < 1.0:
        raise DomainError(f"threshold must lie in (0, 1), got {threshold!r}")
    if retrieval_probability(params, 0.0) <= threshold or params.Nc <= 0.0:
        return None
    x = threshold * params.Nc / (params.S0 * (1.0 - threshold) - threshold * params.N0)
    return -params.tau_m * math.log(x)


def crossing_by_bisection(params, threshold=1.0 / 3.0, tol=C.CROSSING_BISECT_TOL):
    """Bisection on ``p(tau) - threshold``; independent check of the closed form."""
    f = lambda t: retrieval_probability(params, t) - threshold  # noqa: E731
    if f(0.0) <= 0 or params.Nc <= 0.0:
        return None
    lo, hi = 0.0, params.tau_m
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e6 * params.tau_m:
            return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# predictions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StatedClaim:
    """A published figure and the tolerance implied by its rounding."""

    quantity: str
    value: float
    tolerance: float
    text: str


@dataclass(frozen=True)
class Comparison:
    quantity: str
    derived: float
    stated: float
    tolerance: float
    text: str = ""

    @property
    def delta(self):
        return self.derived - self.stated

    @property
    def discrepancy(self):
        return not abs(self.delta) <= self.tolerance

    def to_dict(self):
        return {
            "quantity": self.quantity,
            "derived": self.derived,
            "stated": self.stated,
            "delta": self.delta,
            "tolerance": self.tolerance,
            "discrepancy": self.discrepancy,
            "description": self.text,
        }


COOLING_CLAIMS_QUBIT = (
    StatedClaim("peak_average_fidelity", 0.91, 0.005, "cooled peak average fidelity"),
    StatedClaim("classical_bound_crossing_ps", 7.6, 0.05, "cooled time above the classical bound, ps"),
)
COOLING_CLAIMS_ENTANGLED = (
    StatedClaim("werner_fidelity", 0.787, 0.0005, "cooled fidelity of the retrieved pair with Phi+"),
    StatedClaim("concurrence_zero_crossing_ps", 6.0, 0.5, "cooled time with non-zero concurrence, ps"),
)
ENERGY_CLAIMS_QUBIT = (
    StatedClaim("eta_m", 0.04, 0.0015, "memory efficiency at 10 nJ"),
    StatedClaim("peak_average_fidelity", 0.86, 0.01, "peak average fidelity at 10 nJ"),
)
# Measured-data values: displayed for reference, never used as targets for the model.
MEASURED_REFERENCES = {
    "qubit_classical_bound_ps": (3.0, "measured average fidelity stays above 2/3 up to this delay, ps"),
    "entangled_concurrence_zero_ps": (1.3, "measured concurrence stays above zero up to this delay, ps"),
    "entangled_p0": (0.416, "retrieval probability at zero delay implied by the measured pair fidelity"),
}


def model_summary(params):
    """Headline model metrics at ``tau = 0`` and the threshold crossings."""
    p0 = retrieval_probability(params, 0.0)
    cross = classical_bound_crossing(params)
    return {
        "p0": p0,
        "peak_average_fidelity": (1.0 + p0) / 2.0,
        "classical_bound_crossing_ps": cross,
        "werner_fidelity": (1.0 + 3.0 * p0) / 4.0,
        "peak_concurrence": max(0.0, (3.0 * p0 - 1.0) / 2.0),
        # Werner concurrence vanishes at p = 1/3, the same threshold.
        "concurrence_zero_crossing_ps": cross,
        "eta_m": params.eta_m,
    }


@dataclass
class PredictionReport:
    scenario: str
    baseline: MemoryParams
    scaled: MemoryParams
    values: dict
    baseline_values: dict
    comparisons: list = field(default_factory=list)

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "baseline_params": self.baseline.to_dict(),
            "scaled_params": self.scaled.to_dict(),
            "baseline_values": self.baseline_values,
            "values": self.values,
            "comparisons": [c.to_dict() for c in self.comparisons],
        }


def _compare(values, claims):
    out = []
    for claim in claims:
        v = values.get(claim.quantity)
        if v is None:
            continue
        out.append(Comparison(claim.quantity, float(v), claim.value, claim.tolerance, claim.text))
    return out


def predict(params, scenario, claims=(), new_E_w=None, new_E_r=None, new_T=None):
    scaled = scale_params(params, new_E_w, new_E_r, new_T)
    values = model_summary(scaled)
    return PredictionReport(
        scenario=scenario,
        baseline=params,
        scaled=scaled,
        values=values,
        baseline_values=model_summary(params),
        comparisons=_compare(values, claims),
    )


def predict_cooling(params, T_new=C.PELTIER_TEMPERATURE_K, claims=()):
    if T_new <= 0:
        raise DomainError("temperature must be positive")
    return predict(params, "cooling", claims, new_T=T_new)


def predict_energy(params, energy, claims=()):
    return predict(params, "energy", claims, new_E_w=energy, new_E_r=energy)
