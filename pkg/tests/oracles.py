"""Slow, independent reference implementations used only by the tests.

None of these import the package's amplitude code: permanents come from the
permutation sum and Fock evolution from expanding products of creation
operators as polynomials.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np
from scipy.optimize import minimize


def naive_permanent(m) -> complex:
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    if n == 0:
        return 1.0 + 0j
    return complex(sum(np.prod([m[i, s[i]] for i in range(n)]) for s in itertools.permutations(range(n))))


def fock_evolve_poly(u, inp):
    """Output amplitudes for input occupation ``inp`` by expanding prod_j (sum_k u[k,j] b_k^+)^n_j."""
    u = np.asarray(u, dtype=complex)
    m = u.shape[0]
    poly = {tuple([0] * m): 1.0 + 0j}
    for j, n_j in enumerate(inp):
        for _ in range(n_j):
            nxt = defaultdict(complex)
            for occ, c in poly.items():
                for k in range(m):
                    if u[k, j] == 0:
                        continue
                    o = list(occ)
                    o[k] += 1
                    nxt[tuple(o)] += c * u[k, j]
            poly = dict(nxt)
    norm_in = math.sqrt(math.prod(math.factorial(n) for n in inp))
    # monomial prod b_k^{+n_k} |0> = sqrt(prod n_k!) |n>
    return {occ: c * math.sqrt(math.prod(math.factorial(n) for n in occ)) / norm_in for occ, c in poly.items()}


def brute_jamiolkowski(u):
    """Unnormalised heralded amplitudes {(nC, nT, nC2, nT2): amp} from six-mode evolution.

    The circuit acts on modes (C, T, A, B); modes C2 and T2 are untouched
    copies holding the reference half of the maximally entangled input.
    """
    big = np.eye(6, dtype=complex)
    big[:4, :4] = u
    out = defaultdict(complex)
    for x, y in itertools.product((0, 1), repeat=2):
        for occ, amp in fock_evolve_poly(big, (x, y, 1, 1, x, y)).items():
            if occ[2] == 1 and occ[3] == 1:
                out[(occ[0], occ[1], occ[4], occ[5])] += 0.5 * amp
    return dict(out)


def brute_two_photon(u, j, k, p, q):
    """(Q, D): coincidence probability in outputs p, q for indistinguishable and distinguishable photons."""
    u = np.asarray(u, dtype=complex)
    inp = [0] * u.shape[0]
    inp[j] += 1
    inp[k] += 1
    target = [0] * u.shape[0]
    target[p] += 1
    target[q] += 1
    qv = abs(fock_evolve_poly(u, tuple(inp)).get(tuple(target), 0)) ** 2
    # distinguishable photons evolve independently; add probabilities of the two routings
    dv = abs(u[p, j] * u[q, k]) ** 2 + abs(u[p, k] * u[q, j]) ** 2
    return qv, dv


def brute_process_fidelity(state_amps):
    """Overlap with the CZ state maximised over local output phases by a dense 2-D search."""
    keys = [(0, 0, 0, 0), (0, 1, 0, 1), (1, 0, 1, 0), (1, 1, 1, 1)]
    norm = math.sqrt(sum(abs(a) ** 2 for a in state_amps.values()))
    c = np.array([state_amps.get(k, 0) for k in keys]) / norm
    target = np.array([0.5, 0.5, 0.5, -0.5])

    def f(x):
        a, b = x
        ph = np.array([1, np.exp(1j * b), np.exp(1j * a), np.exp(1j * (a + b))])
        return -abs(np.sum(target * c * ph)) ** 2

    grid = np.linspace(0, 2 * np.pi, 61)
    start = min(((a, b) for a in grid for b in grid), key=f)
    res = minimize(f, start, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
    return -res.fun


def brute_mode_fidelity(u, v, n_starts=20, seed=0):
    """max over diagonal phases of |Tr(v^+ D1 u D2)|^2/N^2 by direct optimisation of 2N-1 angles."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    n = u.shape[0]

    def f(x):
        d1 = np.exp(1j * x[:n])
        d2 = np.exp(1j * np.concatenate([[0.0], x[n:]]))
        return -abs(np.trace(v.conj().T @ (d1[:, None] * u * d2[None, :]))) ** 2 / n**2

    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_starts):
        res = minimize(f, rng.uniform(0, 2 * np.pi, 2 * n - 1), method="BFGS", options={"gtol": 1e-12})
        best = max(best, -res.fun)
    return best


def printed_circuit_matrix(theta, phi_n):
    """Closed-form matrix written from scratch for the tests (rows outputs C, T, A, B)."""
    t1, t2, t3, t4 = theta
    c1, c2, c3, c4 = np.cos(theta)
    s1, s2, s4 = math.sin(t1), math.sin(t2), math.sin(t4)
    s3 = -math.sin(t3)  # extra pi phase on the C-T splitter
    e = np.exp(1j * phi_n)
    return np.array(
        [
            [c1 * c3, c2 * s3, s1 * c3, s2 * s3],
            [c1 * s3, -c2 * c3, s1 * s3, -c3 * s2],
            [c4 * s1, e * s2 * s4, -c1 * c4, -e * c2 * s4],
            [s1 * s4, -e * c4 * s2, -c1 * s4, e * c2 * c4],
        ]
    )
