"""Bosonic Fock-basis bookkeeping and multi-photon amplitudes via permanents.

Matrix convention used throughout the package: ``u[k, j]`` is the amplitude
for a photon entering mode ``j`` to leave in mode ``k``, i.e. the creation
operator of input ``j`` maps to ``sum_k u[k, j] b_k^dagger``. Rows are outputs,
columns are inputs.

Multi-photon states are plain ``dict`` objects mapping occupation tuples to
complex amplitudes. Functions here never mutate their arguments.
"""

from __future__ import annotations

import itertools
import math
from typing import Dict, Iterable, List, Tuple

import numpy as np

from .errors import ContractViolation

FockState = Tuple[int, ...]
MultiPhotonState = Dict[FockState, complex]

# Interacting-mode order used by the circuit module.
MODE_LABELS = ("C", "T", "A", "B")
# Fictitious copies used for the Jamiolkowski construction follow the four above.
EXTENDED_MODE_LABELS = ("C", "T", "A", "B", "C2", "T2")

UNITARITY_TOL = 1e-10


def permanent(m) -> complex:
    """Permanent of a square matrix by Ryser's formula in Gray-code order.

    Costs O(2^n n). The empty matrix has permanent 1.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractViolation(f"permanent needs a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n == 1:
        return complex(m[0, 0])

    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    in_subset = np.zeros(n, dtype=bool)
    size = 0
    for k in range(1, 2**n):
        # the bit flipped between gray(k-1) and gray(k) is the lowest set bit of k
        col = (k & -k).bit_length() - 1
        if in_subset[col]:
            row_sums -= m[:, col]
            size -= 1
        else:
            row_sums += m[:, col]
            size += 1
        in_subset[col] = not in_subset[col]
        term = np.prod(row_sums)
        total += -term if (n - size) % 2 else term
    return complex(total)


def photon_number(state: Iterable[int]) -> int:
    return int(sum(state))


def fock_basis(n_modes: int, n_photons: int) -> List[FockState]:
    """All occupation vectors with ``n_photons`` in ``n_modes``, lexicographically sorted."""
    if n_modes < 0 or n_photons < 0:
        raise ContractViolation("mode and photon counts must be non-negative")
    states = []
    for combo in itertools.combinations_with_replacement(range(n_modes), n_photons):
        occ = [0] * n_modes
        for mode in combo:
            occ[mode] += 1
        states.append(tuple(occ))
    return sorted(states)


def _as_square(u) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ContractViolation(f"mode transformation must be square, got shape {u.shape}")
    return u


def unitarity_error(u) -> float:
    """Largest absolute entry of ``u u^dagger - I``."""
    u = _as_square(u)
    return float(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))))


def check_unitary(u, tol: float = UNITARITY_TOL) -> np.ndarray:
    u = _as_square(u)
    err = unitarity_error(u)
    if err > tol:
        raise ContractViolation(f"matrix is not unitary within {tol:g} (max deviation {err:.3g})")
    return u


def _expand(occupations: Iterable[int]) -> List[int]:
    return [mode for mode, n in enumerate(occupations) for _ in range(n)]


def transition_amplitude(u, inp: FockState, out: FockState) -> complex:
    """<out| U |inp> for the bosonic evolution induced by the mode map ``u``.

    Equals per(u_sub) / sqrt(prod(inp!) prod(out!)) where ``u_sub`` repeats
    column j ``inp[j]`` times and row k ``out[k]`` times.
    """
    u = _as_square(u)
    m = u.shape[0]
    if len(inp) != m or len(out) != m:
        raise ContractViolation(
            f"Fock states have {len(inp)} and {len(out)} modes but the transformation has {m}"
        )
    if sum(inp) != sum(out):
        return 0j
    cols = _expand(inp)
    rows = _expand(out)
    sub = u[np.ix_(rows, cols)]
    norm = math.prod(math.factorial(n) for n in inp) * math.prod(math.factorial(n) for n in out)
    return permanent(sub) / math.sqrt(norm)


def state_norm(state: MultiPhotonState) -> float:
    return math.sqrt(sum(abs(a) ** 2 for a in state.values()))


def evolve(u, state: MultiPhotonState, *, drop_tol: float = 0.0) -> MultiPhotonState:
    """Push every ket of ``state`` through ``u``; photon numbers may differ between kets.

    Output kets are enumerated in lexicographic order per photon-number sector.
    Amplitudes with modulus <= ``drop_tol`` are omitted.
    """
    u = _as_square(u)
    m = u.shape[0]
    out: MultiPhotonState = {}
    sectors: Dict[int, List[FockState]] = {}
    for ket, amp in state.items():
        if len(ket) != m:
            raise ContractViolation(f"ket {ket} does not have {m} modes")
        if amp == 0:
            continue
        n = photon_number(ket)
        if n not in sectors:
            sectors[n] = fock_basis(m, n)
        for target in sectors[n]:
            a = transition_amplitude(u, ket, target)
            if a != 0:
                out[target] = out.get(target, 0j) + amp * a
    keys = sorted(out, key=lambda k: (photon_number(k), k))
    return {k: out[k] for k in keys if abs(out[k]) > drop_tol}


def single_photon(n_modes: int, mode: int) -> FockState:
    occ = [0] * n_modes
    occ[mode] = 1
    return tuple(occ)
