"""Coherent characterisation: synthetic measurements, reconstruction and parameter fits.

A record holds repeated single-input intensity tables and, for each reference
input pair (0, j), output fringes recorded while the phase of input j is swept.
Phases come from the dominant Fourier component of each fringe; subtracting
the phase of output 0 removes the unknown sweep start.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.signal import get_window

from .circuit import IDEAL_THETA, CircuitParams, build_circuit, hcz_target
from .errors import ContractViolation, DegradedSignalError, IllConditionedError, MissingDataError
from .metrics import jamiolkowski_state, mode_fidelity, process_fidelity

SCHEMA_VERSION = 1
N_MODES = 4
REFERENCE_PAIRS = tuple((0, j) for j in range(1, N_MODES))

# (row, column) of the four entries carrying exp(i phi_N)
PHI_N_ENTRIES = ((2, 1), (2, 3), (3, 1), (3, 3))

FIT_RESIDUAL_WARN = 0.05
# fringe amplitude r_k0 r_kj below which an output is treated as non-interfering
FLAT_FRINGE = 1e-6


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model for synthetic characterisation data.

    intensity_sigma: relative Gaussian noise on every intensity sample.
    velocity_jitter: relative drift of the phase-sweep velocity (random walk
    reaching this standard deviation over one record).
    channel_phase_sigma: per-trial, per-output fringe phase offset (rad),
    standing in for drifts that do not cancel between outputs.
    The defaults give per-entry standard errors of roughly 0.002 in r and
    0.015 rad in phi over eight trials.
    """

    intensity_sigma: float = 0.02
    velocity_jitter: float = 0.01
    channel_phase_sigma: float = 0.03
    n_trials: int = 8
    n_samples: int = 4096
    n_periods: int = 8
    window: str = "hann"

    @classmethod
    def none(cls, **kw) -> "NoiseSpec":
        kw.setdefault("n_trials", 1)
        return cls(intensity_sigma=0.0, velocity_jitter=0.0, channel_phase_sigma=0.0, **kw)


@dataclass
class MeasurementRecord:
    """Single-input intensities and two-input fringes.

    intensities: (n_trials, 4, 4), entry [t, k, j] is the power fraction at
    output k for input j in trial t (columns normalised).
    fringes: {(j, j2): (n_trials, 4, n_samples)} output intensities over time.
    """

    intensities: np.ndarray
    fringes: Dict[Tuple[int, int], np.ndarray]
    sample_period: float = 1.0
    noise: Dict[str, float] = field(default_factory=dict)

    @property
    def n_trials(self) -> int:
        return int(self.intensities.shape[0])

    @property
    def moduli_sq(self) -> np.ndarray:
        return self.intensities.mean(axis=0)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "sample_period": self.sample_period,
            "noise": self.noise,
            "intensities": self.intensities.tolist(),
            "fringes": [
                {"inputs": list(pair), "samples": series.tolist()} for pair, series in sorted(self.fringes.items())
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurementRecord":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ContractViolation(f"unsupported record schema_version {d.get('schema_version')!r}")
        fringes = {tuple(f["inputs"]): np.asarray(f["samples"], dtype=float) for f in d["fringes"]}
        return cls(
            intensities=np.asarray(d["intensities"], dtype=float),
            fringes=fringes,
            sample_period=float(d.get("sample_period", 1.0)),
            noise=dict(d.get("noise", {})),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "MeasurementRecord":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class UnitarityDiagnostic:
    d: np.ndarray  # |(U U^dagger - I)_jk|

    @property
    def max(self) -> float:
        return float(self.d.max())

    @property
    def mean(self) -> float:
        return float(self.d.mean())


def unitarity_diagnostic(u) -> UnitarityDiagnostic:
    u = np.asarray(u, dtype=complex)
    return UnitarityDiagnostic(np.abs(u @ u.conj().T - np.eye(u.shape[0])))


def _sweep_phase(noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    n = noise.n_samples
    omega = 2 * np.pi * noise.n_periods / n
    velocity = np.ones(n)
    if noise.velocity_jitter > 0:
        walk = np.cumsum(rng.normal(0.0, noise.velocity_jitter / math.sqrt(n), n))
        velocity = velocity + walk
    start = rng.uniform(0, 2 * np.pi)
    return start + omega * np.concatenate([[0.0], np.cumsum(velocity[:-1])])


def _noisy(x: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma == 0:
        return x
    return x * (1.0 + rng.normal(0.0, sigma, x.shape))


def simulate_measurement(
    u_true, noise: NoiseSpec | None = None, seed: int = 0, pairs=REFERENCE_PAIRS
) -> MeasurementRecord:
    """Synthetic intensity tables and phase-swept fringes for ``u_true``."""
    noise = noise or NoiseSpec()
    u = np.asarray(u_true, dtype=complex)
    if u.shape != (N_MODES, N_MODES):
        raise ContractViolation(f"expected a 4x4 matrix, got {u.shape}")
    root = np.random.SeedSequence(seed)
    trial_seeds = root.spawn(noise.n_trials)

    power = np.abs(u) ** 2
    intensities = np.empty((noise.n_trials, N_MODES, N_MODES))
    fringes = {tuple(p): np.empty((noise.n_trials, N_MODES, noise.n_samples)) for p in pairs}
    for t, ss in enumerate(trial_seeds):
        rng = np.random.default_rng(ss)
        table = _noisy(power, noise.intensity_sigma, rng)
        intensities[t] = table / table.sum(axis=0, keepdims=True)
        for pair in sorted(fringes):
            j, j2 = pair
            phase = _sweep_phase(noise, rng)[None, :]
            if noise.channel_phase_sigma > 0:
                phase = phase + rng.normal(0.0, noise.channel_phase_sigma, (N_MODES, 1))
            field_ = u[:, j][:, None] + u[:, j2][:, None] * np.exp(1j * phase)
            fringes[pair][t] = _noisy(np.abs(field_) ** 2, noise.intensity_sigma, rng)

    meta = {
        "intensity_sigma": noise.intensity_sigma,
        "velocity_jitter": noise.velocity_jitter,
        "channel_phase_sigma": noise.channel_phase_sigma,
        "n_trials": noise.n_trials,
        "n_samples": noise.n_samples,
        "n_periods": noise.n_periods,
        "window": noise.window,
        "seed": seed,
    }
    return MeasurementRecord(intensities, fringes, 1.0, meta)


def _dominant_phase(signal: np.ndarray, window: np.ndarray) -> float:
    spec = np.fft.rfft(signal * window)
    mag = np.abs(spec)
    # bins 0 and 1 hold the DC level and its window leakage
    mag[:2] = 0.0
    peak = int(np.argmax(mag))
    rival = mag.copy()
    rival[max(peak - 1, 0) : peak + 2] = 0.0
    if mag[peak] == 0 or rival.max() >= mag[peak] / math.sqrt(2):
        raise DegradedSignalError(f"no dominant fringe tone (peak bin {peak})")
    return float(np.angle(spec[peak]))


def _circular_mean(angles: np.ndarray, axis=0) -> np.ndarray:
    return np.angle(np.mean(np.exp(1j * angles), axis=axis))


def _circular_std(angles: np.ndarray, axis=0) -> np.ndarray:
    # RMS of wrapped deviations from the circular mean; exact zero for identical angles
    dev = np.angle(np.exp(1j * (angles - np.expand_dims(_circular_mean(angles, axis), axis))))
    return np.sqrt(np.mean(dev**2, axis=axis))


def _trial_phases(record: MeasurementRecord, window_name: str = "hann") -> np.ndarray:
    missing = [p for p in REFERENCE_PAIRS if p not in record.fringes]
    if missing:
        raise MissingDataError(missing)
    r = np.sqrt(record.moduli_sq)
    n_trials = record.n_trials
    phases = np.zeros((n_trials, N_MODES, N_MODES))
    for (_, j), series in ((p, record.fringes[p]) for p in REFERENCE_PAIRS):
        window = get_window(window_name, series.shape[-1])
        # outputs without interference carry no phase; their entries are gauge
        depth = r[:, 0] * r[:, j]
        live = depth > FLAT_FRINGE
        if not live.any():
            continue
        # any per-column offset is removed by the gauge fix, so reference the strongest fringe
        ref = int(np.argmax(depth))
        for t in range(series.shape[0]):
            raw = np.zeros(N_MODES)
            for k in np.flatnonzero(live):
                raw[k] = _dominant_phase(series[t, k], window)
            phases[t, :, j] = np.where(live, np.angle(np.exp(1j * (raw - raw[ref]))), 0.0)
    return phases


def extract_phases_dft(record: MeasurementRecord) -> Tuple[np.ndarray, np.ndarray]:
    """Phase matrix (first row and column zero) and its trial-to-trial standard error."""
    window = record.noise.get("window", "hann")
    phases = _trial_phases(record, window)
    mean = _circular_mean(phases, axis=0)
    err = _circular_std(phases, axis=0) / math.sqrt(phases.shape[0])
    return mean, err


@dataclass(frozen=True)
class Reconstruction:
    unitary: np.ndarray
    diagnostic: UnitarityDiagnostic
    moduli_err: np.ndarray  # standard error of r_jk
    phase_err: np.ndarray  # standard error of phi_jk (rad)


def gauge_fix(u) -> np.ndarray:
    """Re-phase rows and columns so the first row and column are real non-negative."""
    u = np.asarray(u, dtype=complex)
    col = np.exp(-1j * np.angle(u[0, :]))
    v = u * col[None, :]
    row = np.exp(-1j * np.angle(v[:, 0]))
    return v * row[:, None]


def reconstruct_unitary(record: MeasurementRecord) -> Reconstruction:
    """U_meas = r exp(i phi) from a complete record, in the first-row/column gauge."""
    phases, phase_err = extract_phases_dft(record)
    r_trials = np.sqrt(record.intensities)
    r = np.sqrt(record.moduli_sq)
    n = record.n_trials
    r_err = r_trials.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(r)
    u = gauge_fix(r * np.exp(1j * phases))
    return Reconstruction(u, unitarity_diagnostic(u), r_err, phase_err)


def _moduli_model(theta: np.ndarray) -> np.ndarray:
    # |build_circuit| without the complex arithmetic; hot loop of the angle fit
    c1, c2, c3, c4 = np.abs(np.cos(theta))
    s1, s2, s3, s4 = np.abs(np.sin(theta))
    return np.array(
        [
            [c1 * c3, c2 * s3, s1 * c3, s2 * s3],
            [c1 * s3, c2 * c3, s1 * s3, c3 * s2],
            [c4 * s1, s2 * s4, c1 * c4, c2 * s4],
            [s1 * s4, c4 * s2, c1 * s4, c2 * c4],
        ]
    )


def _closed_form_theta(r: np.ndarray) -> np.ndarray:
    """Angle estimates read directly off the moduli (one entry pair per angle)."""
    t1 = math.atan2(math.hypot(r[2, 0], r[3, 0]), math.hypot(r[0, 0], r[1, 0]))
    t2 = math.atan2(math.hypot(r[2, 1], r[3, 1]), math.hypot(r[0, 1], r[1, 1]))
    t3 = math.atan2(math.hypot(r[1, 0], r[1, 2]), math.hypot(r[0, 0], r[0, 2]))
    t4 = math.atan2(math.hypot(r[3, 0], r[3, 2]), math.hypot(r[2, 0], r[2, 2]))
    return np.array([t1, t2, t3, t4])


@dataclass(frozen=True)
class ParamFit:
    params: CircuitParams
    residual: float
    phi_n_std: float
    phi_n_values: Tuple[float, float, float, float]
    warning: Optional[str] = None


def fit_theta(u_meas, n_starts: int = 16, seed: int = 0) -> Tuple[np.ndarray, float]:
    """Splitting angles minimising the squared modulus mismatch; Nelder-Mead multistart on [0, pi/2]^4."""
    r = np.abs(np.asarray(u_meas, dtype=complex))

    def cost(theta):
        return float(np.sum((_moduli_model(theta) - r) ** 2))

    rng = np.random.default_rng(seed)
    starts = [np.clip(_closed_form_theta(r), 0, np.pi / 2)]
    starts += [rng.uniform(0, np.pi / 2, 4) for _ in range(n_starts - 1)]
    best = None
    for x0 in starts:
        res = minimize(
            cost, x0, method="Nelder-Mead",
            options={"xatol": 1e-11, "fatol": 1e-22, "maxiter": 20000, "maxfev": 20000},
        )
        if best is None or res.fun < best.fun:
            best = res
    theta = np.mod(best.x, np.pi)
    # angles enter only through |cos| and |sin|: fold into [0, pi/2]
    theta = np.where(theta > np.pi / 2, np.pi - theta, theta)
    return theta, float(np.sqrt(best.fun))


def extract_phi_n(u_meas) -> Tuple[float, float, Tuple[float, float, float, float]]:
    """Net internal phase from the four entries that carry it.

    Returns the circular mean, the circular standard deviation and the four
    individual values.
    """
    u = gauge_fix(u_meas)
    # the sign pattern of the gauge-fixed real model is the same for all angles in (0, pi/2)
    signs = np.sign(gauge_fix(build_circuit(CircuitParams(IDEAL_THETA, 0.0))).real)
    values = []
    for k, j in PHI_N_ENTRIES:
        sign = signs[k, j]
        if abs(u[k, j]) < 1e-3:
            raise IllConditionedError(f"entry ({k}, {j}) has modulus {abs(u[k, j]):.2e}")
        values.append(float(np.angle(sign * u[k, j])))
    values = np.array(values)
    mean = float(_circular_mean(values))
    std = float(_circular_std(values))
    return mean, std, tuple(values)


def fit_params(u_meas, n_starts: int = 16, seed: int = 0) -> ParamFit:
    """Circuit parameters behind a (near-)unitary matrix of the hCZ family."""
    theta, residual = fit_theta(u_meas, n_starts, seed)
    mean, std, values = extract_phi_n(u_meas)
    warning = None
    if residual > FIT_RESIDUAL_WARN:
        warning = f"modulus residual {residual:.3g} exceeds {FIT_RESIDUAL_WARN}; matrix may not be of the circuit form"
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    return ParamFit(CircuitParams(tuple(theta), mean), residual, std, values, warning)


@dataclass(frozen=True)
class UncertaintyReport:
    sigma_fm: float
    sigma_fp: float
    d_significance: float  # mean over entries of D_jk / std(D_jk)


def propagate_uncertainty(record: MeasurementRecord, n_mc: int = 200, seed: int = 0, target=None) -> UncertaintyReport:
    """Monte Carlo spread of F_m and F_p from the per-entry moduli and phase errors."""
    rec = reconstruct_unitary(record)
    target = hcz_target() if target is None else target
    r = np.abs(rec.unitary)
    phi = np.angle(rec.unitary)
    fms, fps, ds = [], [], []
    for i in range(n_mc):
        rng = np.random.default_rng([seed, i])
        r_s = r + rng.normal(0.0, 1.0, r.shape) * rec.moduli_err
        phi_s = phi + rng.normal(0.0, 1.0, phi.shape) * rec.phase_err
        u = r_s * np.exp(1j * phi_s)
        fms.append(mode_fidelity(u, target))
        fps.append(process_fidelity(jamiolkowski_state(u, unitarity_tol=np.inf)))
        ds.append(unitarity_diagnostic(u).d)
    ds = np.array(ds)
    spread = ds.std(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(spread > 0, rec.diagnostic.d / spread, 0.0)
    return UncertaintyReport(float(np.std(fms)), float(np.std(fps)), float(z.mean()))


def unitary_to_csv_rows(u) -> List[List[float]]:
    """Rows of interleaved (Re, Im) pairs."""
    u = np.asarray(u, dtype=complex)
    return [[x for z in row for x in (z.real, z.imag)] for row in u]


def unitary_from_csv_rows(rows) -> np.ndarray:
    a = np.asarray(rows, dtype=float)
    return a[:, 0::2] + 1j * a[:, 1::2]
