"""Mode fidelity, heralded Jamiolkowski state, process fidelity and rate estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import ContractViolation
from .fock import check_unitary, transition_amplitude

SUCCESS_PROBABILITY = 2.0 / 27.0

# Gauge search configuration for mode fidelity.
GAUGE_RESTARTS = 8
GAUGE_MAX_ITER = 500
GAUGE_TOL = 1e-12

BASES = ("00", "01", "10", "11")

# Kets kept in the heralded state: (n_C, n_T, n_C2, n_T2). Photon-number
# superselection ties the physical count to the fictitious pattern, so the
# physical sector for fictitious "xy" is every (n_C, n_T) with n_C + n_T = x + y.
KET_LABELS: Tuple[Tuple[int, int, int, int], ...] = (
    (0, 0, 0, 0),
    (0, 1, 0, 1),
    (1, 0, 0, 1),
    (0, 1, 1, 0),
    (1, 0, 1, 0),
    (0, 2, 1, 1),
    (1, 1, 1, 1),
    (2, 0, 1, 1),
)
_INDEX = {ket: i for i, ket in enumerate(KET_LABELS)}
COMPUTATIONAL = tuple(_INDEX[(x, y, x, y)] for x, y in ((0, 0), (0, 1), (1, 0), (1, 1)))


def mode_fidelity(
    u,
    v,
    optimize_gauge: bool = True,
    *,
    restarts: int = GAUGE_RESTARTS,
    max_iter: int = GAUGE_MAX_ITER,
    tol: float = GAUGE_TOL,
    seed: int = 0,
) -> float:
    """Normalised Hilbert-Schmidt overlap |Tr(v^dagger u)|^2 / N^2.

    With ``optimize_gauge`` the overlap is maximised over diagonal phase
    matrices on both sides of ``u`` by alternating closed-form phase
    alignment, keeping the best of ``restarts`` starts (the first from the
    identity, the rest random but seeded), then polished by a gradient step.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape or u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ContractViolation(f"mode fidelity needs equal square matrices, got {u.shape} and {v.shape}")
    n = u.shape[0]
    m = np.conj(v) * u
    if not optimize_gauge:
        return float(abs(m.sum()) ** 2 / n**2)

    rng = np.random.default_rng(seed)
    best, best_in = -1.0, None
    for r in range(restarts):
        d_in = np.ones(n, dtype=complex) if r == 0 else np.exp(2j * np.pi * rng.random(n))
        prev = -1.0
        for _ in range(max_iter):
            d_out = np.exp(-1j * np.angle(m @ d_in))
            w = d_out @ m
            d_in = np.exp(-1j * np.angle(w))
            f = float(np.abs(w).sum() ** 2 / n**2)
            if abs(f - prev) < tol:
                break
            prev = f
        if f > best:
            best, best_in = f, d_in
    # alternation crawls when the optimum is flat; finish with a gradient polish
    return min(max(best, _polish_gauge(m, best_in)), 1.0)


def _polish_gauge(m: np.ndarray, d_in: np.ndarray) -> float:
    n = m.shape[0]
    b0 = np.angle(d_in)
    a0 = -np.angle(m @ d_in)

    def neg(x):
        ea, eb = np.exp(1j * x[:n]), np.exp(1j * x[n:])
        rows = m @ eb
        s = ea @ rows
        cols = ea @ m
        ga = -2 * np.imag(np.conj(s) * ea * rows)
        gb = -2 * np.imag(np.conj(s) * cols * eb)
        return -abs(s) ** 2 / n**2, -np.concatenate([ga, gb]) / n**2

    res = minimize(neg, np.concatenate([a0, b0]), jac=True, method="BFGS", options={"gtol": 1e-14, "maxiter": 200})
    return float(-res.fun)


@dataclass(frozen=True)
class HeraldedProcessState:
    """Pure heralded Jamiolkowski state on (n_C, n_T) x (fictitious C2, T2).

    ``psi`` holds normalised amplitudes over :data:`KET_LABELS`; ``rho`` is
    its projector. ``herald_prob`` is the pre-normalisation weight, i.e. the
    probability of one photon in each ancilla averaged over the four inputs.
    """

    psi: np.ndarray
    herald_prob: float

    @property
    def rho(self) -> np.ndarray:
        return np.outer(self.psi, self.psi.conj())

    @property
    def labels(self) -> Tuple[Tuple[int, int, int, int], ...]:
        return KET_LABELS

    def amplitude(self, ket) -> complex:
        return complex(self.psi[_INDEX[tuple(ket)]])

    def computational(self) -> np.ndarray:
        """Amplitudes of |00,00>, |01,01>, |10,10>, |11,11>."""
        return self.psi[list(COMPUTATIONAL)]

    def error_weight(self) -> float:
        """Probability on kets outside the four computational pairs."""
        return float(1.0 - np.sum(np.abs(self.computational()) ** 2))


def _branch_amplitudes(u: np.ndarray) -> np.ndarray:
    """Unnormalised heralded amplitudes over KET_LABELS (including the 1/2 of |phi_max>)."""
    out = np.zeros(len(KET_LABELS), dtype=complex)
    for i, (nc, nt, x, y) in enumerate(KET_LABELS):
        out[i] = 0.5 * transition_amplitude(u, (x, y, 1, 1), (nc, nt, 1, 1))
    return out


def jamiolkowski_state(u, unitarity_tol: float = 1e-10) -> HeraldedProcessState:
    """Heralded Jamiolkowski state of the circuit ``u`` (4x4, (C, T, A, B) order).

    Each branch of the maximally entangled input sends x photons into C and y
    into T together with one photon per ancilla; only outputs with exactly one
    photon in A and one in B survive. Measured, slightly non-unitary matrices
    can be passed with a relaxed ``unitarity_tol``.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ContractViolation(f"expected a 4x4 circuit matrix, got {u.shape}")
    check_unitary(u, unitarity_tol)
    amps = _branch_amplitudes(u)
    prob = float(np.sum(np.abs(amps) ** 2))
    if prob == 0:
        return HeraldedProcessState(np.zeros(len(KET_LABELS), dtype=complex), 0.0)
    return HeraldedProcessState(amps / math.sqrt(prob), prob)


def cz_state() -> HeraldedProcessState:
    """(|00,00> + |01,01> + |10,10> - |11,11>)/2, zero on the error kets."""
    psi = np.zeros(len(KET_LABELS), dtype=complex)
    psi[list(COMPUTATIONAL)] = [0.5, 0.5, 0.5, -0.5]
    return HeraldedProcessState(psi, SUCCESS_PROBABILITY)


def _phase_vector(a: float, b: float) -> np.ndarray:
    # output phase a on mode C and b on mode T, applied per photon
    return np.array([np.exp(1j * (nc * a + nt * b)) for nc, nt, _, _ in KET_LABELS])


def _best_local_phases(c: np.ndarray) -> Tuple[float, float, float]:
    """Maximise |c00 + c01 e^{ib} + c10 e^{ia} + c11 e^{i(a+b)}| over a, b.

    For fixed a the optimum over b is |c00 + c10 e^{ia}| + |c01 + c11 e^{ia}|,
    which leaves a one-dimensional search in a.
    """

    def neg(a):
        return -(abs(c[0] + c[2] * np.exp(1j * a)) + abs(c[1] + c[3] * np.exp(1j * a)))

    grid = np.linspace(0, 2 * np.pi, 73)
    a0 = grid[int(np.argmin([neg(a) for a in grid]))]
    step = grid[1] - grid[0]
    res = minimize_scalar(neg, bounds=(a0 - step, a0 + step), method="bounded", options={"xatol": 1e-12})
    a = float(res.x)
    p = c[0] + c[2] * np.exp(1j * a)
    q = c[1] + c[3] * np.exp(1j * a)
    b = float(np.angle(p) - np.angle(q)) if abs(q) > 0 else 0.0
    return a, b, float(-res.fun)


def align_local_phases(state: HeraldedProcessState) -> Tuple[HeraldedProcessState, Tuple[float, float]]:
    """Apply the local qubit phases that maximise overlap with the ideal CZ state.

    Returns the re-phased state and the output phases (on C, on T). The
    overall phase is chosen so the |00,00> amplitude is real and non-negative.
    """
    target = cz_state().computational()
    c = np.conj(target) * state.computational()
    a, b, _ = _best_local_phases(c)
    psi = state.psi * _phase_vector(a, b)
    ref = psi[COMPUTATIONAL[0]]
    if abs(ref) > 0:
        psi = psi * np.exp(-1j * np.angle(ref))
    return HeraldedProcessState(psi, state.herald_prob), (a, b)


def process_fidelity(state: HeraldedProcessState, optimize_gauge: bool = True) -> float:
    """Tr(rho_CZ rho) with rho_CZ extended by zero support on the error kets.

    With ``optimize_gauge`` the local phases of the two qubits are chosen to
    maximise the overlap.
    """
    target = cz_state().computational()
    c = np.conj(target) * state.computational()
    if not optimize_gauge:
        return float(abs(c.sum()) ** 2)
    _, _, best = _best_local_phases(c)
    return float(min(best**2, 1.0))


def basis_amplitude(u, basis: str) -> complex:
    """Amplitude for computational input ``basis`` to herald and leave unchanged."""
    if basis not in BASES:
        raise ContractViolation(f"basis must be one of {BASES}, got {basis!r}")
    x, y = int(basis[0]), int(basis[1])
    return transition_amplitude(np.asarray(u, dtype=complex), (x, y, 1, 1), (x, y, 1, 1))


def basis_success_probability(u, basis: str) -> float:
    return float(abs(basis_amplitude(u, basis)) ** 2)


def herald_probability(u, basis: str) -> float:
    """Probability of exactly one photon in each ancilla for computational input ``basis``."""
    if basis not in BASES:
        raise ContractViolation(f"basis must be one of {BASES}, got {basis!r}")
    x, y = int(basis[0]), int(basis[1])
    n = x + y
    u = np.asarray(u, dtype=complex)
    return float(
        sum(abs(transition_amplitude(u, (x, y, 1, 1), (nc, n - nc, 1, 1))) ** 2 for nc in range(n + 1))
    )


@dataclass(frozen=True)
class RateEstimate:
    per_shot_success: float
    wall_rate: float  # Hz
    loss_per_waveguide: float  # dB
    source_rate: float  # Hz, six-photon events


def rate_estimate(loss_db_per_waveguide: float, six_photon_rate: float) -> RateEstimate:
    """Success per six-photon event and per second.

    Only the four photons entering the chip see the waveguide loss; the two
    trigger photons do not.
    """
    if loss_db_per_waveguide < 0 or six_photon_rate < 0:
        raise ContractViolation("loss and source rate must be non-negative")
    eta = 10 ** (-loss_db_per_waveguide / 10)
    per_shot = SUCCESS_PROBABILITY * eta**4
    return RateEstimate(per_shot, per_shot * six_photon_rate, loss_db_per_waveguide, six_photon_rate)


def fidelities(u, target=None, unitarity_tol: float = 1e-10) -> Dict[str, float]:
    """Gauge-optimised F_m against ``target`` (default: ideal circuit) and F_p."""
    from .circuit import hcz_target

    if target is None:
        target = hcz_target()
    state = jamiolkowski_state(u, unitarity_tol)
    return {
        "fm": mode_fidelity(u, target),
        "fp": process_fidelity(state),
        "herald_prob": state.herald_prob,
    }
