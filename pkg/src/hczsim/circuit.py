"""Four-mode heralded-CZ circuit: parameters, transfer matrices and coupler physics.

Modes are ordered (C, T, A, B): control |1>-rail, target |1>-rail and the two
ancillas. The circuit is two beamsplitter stages: BS1 on (C, A) and BS2 on
(T, B), then BS3 on (C, T) and BS4 on (A, B). BS3 carries the extra pi phase,
realised as theta_3 -> -theta_3. A splitter with angle theta has reflectivity
R = cos^2(theta), weighting the straight-through path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from .errors import ContractViolation

C, T, A, B = 0, 1, 2, 3

THETA_13 = math.acos(math.sqrt(1.0 / 3.0))
THETA_4 = math.acos(math.sqrt(0.5 + 1.0 / math.sqrt(6.0)))
IDEAL_THETA = (THETA_13, THETA_13, THETA_13, THETA_4)


@dataclass(frozen=True)
class CircuitParams:
    """Splitting angles theta_1..theta_4 and net internal phase phi_N, in radians."""

    theta: Tuple[float, float, float, float] = IDEAL_THETA
    phi_n: float = 0.0

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        if len(theta) != 4:
            raise ContractViolation(f"expected four splitting angles, got {len(theta)}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi_n", float(self.phi_n))

    @classmethod
    def from_deviations(cls, dtheta: Sequence[float] = (0, 0, 0, 0), dphi: float = 0.0):
        dtheta = tuple(float(d) for d in dtheta)
        if len(dtheta) != 4:
            raise ContractViolation(f"expected four angle deviations, got {len(dtheta)}")
        return cls(tuple(t + d for t, d in zip(IDEAL_THETA, dtheta)), dphi)

    @classmethod
    def from_vector(cls, x: Sequence[float]):
        """Inverse of :meth:`deviations` (five numbers: four angle deviations then phase)."""
        return cls.from_deviations(x[:4], x[4])

    @property
    def dtheta(self) -> Tuple[float, ...]:
        return tuple(t - t0 for t, t0 in zip(self.theta, IDEAL_THETA))

    def deviations(self) -> np.ndarray:
        return np.array([*self.dtheta, self.phi_n])

    def reflectivities(self) -> np.ndarray:
        return np.cos(np.asarray(self.theta)) ** 2


@dataclass(frozen=True)
class InternalPhases:
    """Per-arm phases picked up between the two beamsplitter stages.

    ``phi_x`` multiplies the arm carrying mode ``x`` between the stages.
    Only one combination survives external re-phasing, see :meth:`net`.
    """

    phi_c: float = 0.0
    phi_a: float = 0.0
    phi_b: float = 0.0
    phi_t: float = 0.0

    def net(self) -> float:
        # Follows from the stage topology: the C and B arms enter with +, A and T with -.
        return self.phi_c - self.phi_a + self.phi_b - self.phi_t


def ideal_params() -> CircuitParams:
    return CircuitParams(IDEAL_THETA, 0.0)


def beamsplitter(theta: float) -> np.ndarray:
    """Symmetric two-mode map a1 -> a1 cos(theta) + i a2 sin(theta)."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 1j * s], [1j * s, c]])


def embed(block: np.ndarray, modes: Sequence[int], n_modes: int = 4) -> np.ndarray:
    u = np.eye(n_modes, dtype=complex)
    u[np.ix_(modes, modes)] = block
    return u


def build_circuit(p: CircuitParams) -> np.ndarray:
    """Closed-form 4x4 transfer matrix of the circuit, modulo external phases.

    Rows are outputs and columns inputs, both in (C, T, A, B) order. The pi
    phase of BS3 appears as the sign of sin(theta_3).
    """
    c1, c2, c3, c4 = np.cos(p.theta)
    s1, s2, s3, s4 = np.sin(p.theta)
    s3 = -s3
    e = np.exp(1j * p.phi_n)
    return np.array(
        [
            [c1 * c3, c2 * s3, s1 * c3, s2 * s3],
            [c1 * s3, -c2 * c3, s1 * s3, -c3 * s2],
            [c4 * s1, e * s2 * s4, -c1 * c4, -e * c2 * s4],
            [s1 * s4, -e * c4 * s2, -c1 * s4, e * c2 * c4],
        ],
        dtype=complex,
    )


def build_compositional(p: CircuitParams, ph: InternalPhases | None = None) -> np.ndarray:
    """Product of the stage unitaries with explicit inter-stage phases.

    Uses the angles of ``p``; the phases come from ``ph`` (``p.phi_n`` is put on
    the C arm when ``ph`` is omitted). Gauge-equivalent to :func:`build_circuit`
    whenever ``ph.net() == p.phi_n``.
    """
    if ph is None:
        ph = InternalPhases(phi_c=p.phi_n)
    t1, t2, t3, t4 = p.theta
    first = embed(beamsplitter(t1), (C, A)) @ embed(beamsplitter(t2), (T, B))
    phases = np.diag(np.exp(1j * np.array([ph.phi_c, ph.phi_t, ph.phi_a, ph.phi_b])))
    second = embed(beamsplitter(-t3), (C, T)) @ embed(beamsplitter(t4), (A, B))
    return second @ phases @ first


def hcz_target() -> np.ndarray:
    """Ideal circuit with external phases fixed so the heralded map is exactly CZ.

    Differs from ``build_circuit(ideal_params())`` only by a sign on output rows
    C and A.
    """
    return np.diag([-1.0, 1.0, -1.0, 1.0]) @ build_circuit(ideal_params())


def swap_ancilla_rows(u) -> np.ndarray:
    """Exchange the A and B output rows (ancilla detectors swapped)."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ContractViolation(f"ancilla swap needs a 4x4 matrix in (C, T, A, B) order, got {u.shape}")
    return u[[C, T, B, A], :]


@dataclass(frozen=True)
class CouplerSpec:
    """Uniform directional coupler.

    coupling: C in 1/mm, length: L in mm, detuning: propagation-constant
    mismatch in 1/mm, gamma0: extra integrated coupling from the s-bends (rad).
    """

    coupling: float
    length: float
    detuning: float = 0.0
    gamma0: float = 0.0

    @property
    def gamma(self) -> float:
        return self.coupling * self.length + self.gamma0


class CouplerResponse(NamedTuple):
    reflectivity: float  # straight-through (bar) power fraction, cos^2(theta) convention
    cross_fraction: float  # power coupled into the other waveguide
    transfer: np.ndarray  # 2x2 map, rows outputs


def coupler_reflectivity(spec: CouplerSpec) -> CouplerResponse:
    """Power splitting and 2x2 transfer matrix of a (possibly detuned) coupler.

    With zero detuning the map is the symmetric beamsplitter at angle gamma.
    With detuning the coupled-mode solution applies: generalised rate
    Omega = sqrt(C^2 + (dbeta/2)^2) and cross fraction (C/Omega)^2 sin^2(Omega L).
    """
    if spec.length < 0 or spec.coupling < 0:
        raise ContractViolation("coupler length and coupling constant must be non-negative")
    if spec.detuning == 0:
        g = spec.gamma
        return CouplerResponse(math.cos(g) ** 2, math.sin(g) ** 2, beamsplitter(g))

    half = spec.detuning / 2
    omega = math.hypot(spec.coupling, half)
    # s-bend coupling acts as extra length at the uniform coupling rate
    length = spec.length + (spec.gamma0 / spec.coupling if spec.coupling > 0 else 0.0)
    co, so = math.cos(omega * length), math.sin(omega * length)
    kappa = spec.coupling / omega
    delta = half / omega
    transfer = np.array(
        [[co + 1j * delta * so, 1j * kappa * so], [1j * kappa * so, co - 1j * delta * so]]
    )
    cross = (kappa * so) ** 2
    return CouplerResponse(1.0 - cross, cross, transfer)


def pi_phase_gamma(theta: float) -> float:
    """Integrated coupling that keeps R = cos^2(theta) but flips the coupling phase."""
    if not 0 < theta < math.pi / 2:
        raise ContractViolation(f"theta must lie in (0, pi/2), got {theta}")
    return 2 * math.pi - theta
