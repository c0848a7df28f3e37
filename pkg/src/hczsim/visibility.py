"""Two-photon interference visibilities, dip-curve fitting and visibility-to-unitary inversion.

Visibilities are signed: a coincidence dip (Q < D) gives V in (0, 1] and a
peak (Q > D) gives V in [-1, 0). When both coincidence rates vanish the
visibility is undefined and reported as NaN.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from .errors import ContractViolation, FitError
from .metrics import mode_fidelity

SCHEMA_VERSION = 1
PAIRS: Tuple[Tuple[int, int], ...] = tuple(itertools.combinations(range(4), 2))
SIGN_CONVENTION = "signed: V=(D-Q)/max(D,Q); dips positive, peaks negative"

_J = np.array([a for a, _ in PAIRS])
_K = np.array([b for _, b in PAIRS])


@dataclass(frozen=True)
class VisibilityEntry:
    inputs: Tuple[int, int]
    outputs: Tuple[int, int]
    q: float  # coincidence probability, indistinguishable photons
    d: float  # coincidence probability, distinguishable photons
    v: float  # NaN when undefined

    @property
    def defined(self) -> bool:
        return not math.isnan(self.v)


def _signed_visibility(q, d):
    q = np.asarray(q, dtype=float)
    d = np.asarray(d, dtype=float)
    top = np.maximum(q, d)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(top > 0, (d - q) / np.where(top > 0, top, 1.0), np.nan)


def pair_visibility(u, j: int, k: int, p: int, q: int) -> VisibilityEntry:
    """Visibility for photons entering ``j`` and ``k`` and detected in ``p`` and ``q``."""
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    if j == k or p == q:
        raise ContractViolation(f"input and output modes must be distinct pairs, got ({j},{k}) -> ({p},{q})")
    if not all(0 <= m < n for m in (j, k, p, q)):
        raise ContractViolation(f"mode index out of range for a {n}-mode circuit")
    a = u[p, j] * u[q, k]
    b = u[p, k] * u[q, j]
    q_val = float(abs(a + b) ** 2)
    d_val = float(abs(a) ** 2 + abs(b) ** 2)
    v = float(_signed_visibility(q_val, d_val))
    return VisibilityEntry((j, k), (p, q), q_val, d_val, v)


def visibility_table(u) -> List[VisibilityEntry]:
    """All 36 entries, input pair major, both in lexicographic order."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ContractViolation(f"visibility table needs a 4x4 matrix, got {u.shape}")
    return [pair_visibility(u, j, k, p, q) for (j, k) in PAIRS for (p, q) in PAIRS]


def coincidence_arrays(u) -> Tuple[np.ndarray, np.ndarray]:
    """Q and D as 6x6 arrays (rows input pairs, columns output pairs)."""
    u = np.asarray(u, dtype=complex)
    j, k = _J[:, None], _K[:, None]
    p, q = _J[None, :], _K[None, :]
    a = u[p, j] * u[q, k]
    b = u[p, k] * u[q, j]
    return np.abs(a + b) ** 2, np.abs(a) ** 2 + np.abs(b) ** 2


def visibility_values(u) -> np.ndarray:
    """Flat 36-vector of visibilities in :func:`visibility_table` order."""
    q, d = coincidence_arrays(u)
    return _signed_visibility(q, d).ravel()


def visibility_matrix(u) -> np.ndarray:
    return visibility_values(u).reshape(6, 6)


def residual_stats(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    """Mean and sample standard deviation of ``a - b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ContractViolation(f"tables differ in length: {a.shape} vs {b.shape}")
    r = a - b
    std = float(r.std(ddof=1)) if r.size > 1 else 0.0
    return float(r.mean()), std


def write_table_csv(entries: Sequence[VisibilityEntry], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "k", "p", "q", "Q", "D", "V"])
        for e in entries:
            w.writerow([*e.inputs, *e.outputs, f"{e.q:.17g}", f"{e.d:.17g}", f"{e.v:.17g}"])


def read_table_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["V"]) for r in rows])


def table_matrix_json(values: Sequence[float]) -> dict:
    m = np.asarray(values, dtype=float).reshape(6, 6)
    return {
        "schema_version": SCHEMA_VERSION,
        "pairs": [list(p) for p in PAIRS],
        "rows": "input pair",
        "columns": "output pair",
        "convention": SIGN_CONVENTION,
        # NaN is not valid JSON; undefined entries become null
        "matrix": [[None if math.isnan(x) else float(x) for x in row] for row in m],
    }


# ---------------------------------------------------------------------------
# Coincidence-versus-delay curves


class Profile(NamedTuple):
    sigma: float  # Gaussian width of the wavepacket overlap, delay units
    period: float  # sinc scale from spectral filtering, delay units


@dataclass
class DipCurve:
    delays: np.ndarray
    counts: np.ndarray
    q: float
    d: float
    profile: Profile

    @property
    def c_max(self) -> float:
        return max(self.q, self.d)

    @property
    def c_min(self) -> float:
        return min(self.q, self.d)

    @property
    def visibility(self) -> float:
        return float(_signed_visibility(self.q, self.d))


def overlap(tau, profile: Profile) -> np.ndarray:
    # np.sinc is the normalised sinc, sin(pi x)/(pi x)
    tau = np.asarray(tau, dtype=float)
    return np.exp(-(tau**2) / (2 * profile.sigma**2)) * np.sinc(tau / profile.period)


def curve_model(tau, q: float, d: float, profile: Profile) -> np.ndarray:
    return d + (q - d) * overlap(tau, profile) ** 2


def coincidence_curve(
    entry: VisibilityEntry,
    profile: Optional[Profile] = None,
    grid: Optional[Sequence[float]] = None,
    scale: float = 1.0,
) -> DipCurve:
    """Expected coincidences versus delay, C(0) = Q and C(large delay) = D.

    ``scale`` converts probabilities into counts per delay bin.
    """
    if profile is None:
        profile = Profile(1.0, 3.0)
    if profile.sigma <= 0 or profile.period <= 0:
        raise ContractViolation("profile widths must be positive")
    if grid is None:
        grid = np.linspace(-5 * profile.sigma, 5 * profile.sigma, 101)
    tau = np.asarray(grid, dtype=float)
    q, d = scale * entry.q, scale * entry.d
    return DipCurve(tau, curve_model(tau, q, d, profile), q, d, profile)


class DipFit(NamedTuple):
    c_max: float
    c_min: float
    v: float
    q: float
    d: float
    profile: Profile
    chi2: float


def fit_dip(delays, counts, n_starts: int = 8, seed: int = 0) -> DipFit:
    """Poisson-weighted fit of (D, Q, sigma, period) to a measured coincidence curve."""
    tau = np.asarray(delays, dtype=float)
    c = np.asarray(counts, dtype=float)
    if tau.shape != c.shape or tau.size < 20:
        raise ContractViolation("need at least 20 delay points with matching counts")
    weight = 1.0 / np.sqrt(np.maximum(c, 1.0))

    def resid(x):
        d, q, sig, per = x
        return (curve_model(tau, q, d, Profile(sig, per)) - c) * weight

    order = np.argsort(np.abs(tau))
    tail = np.abs(tau) >= np.quantile(np.abs(tau), 0.75)
    d0 = float(np.median(c[tail]))
    q0 = float(np.mean(c[order[:3]]))
    # width guess from where the feature has fallen to half its depth
    depth = np.abs(c - d0) > 0.5 * abs(q0 - d0)
    sig0 = float(np.max(np.abs(tau[depth]))) / 1.18 if depth.any() and abs(q0 - d0) > 0 else np.ptp(tau) / 8
    sig0 = max(sig0, np.ptp(tau) / 100)

    rng = np.random.default_rng(seed)
    span = float(np.ptp(tau))
    lower = [-np.inf, -np.inf, span * 1e-4, span * 1e-3]
    upper = [np.inf, np.inf, span, 100 * span]
    best = None
    errors = []
    for s in range(n_starts):
        f = 1.0 if s == 0 else rng.uniform(0.5, 2.0)
        x0 = np.array([d0, q0, sig0 * f, 3 * sig0 * f * rng.uniform(0.7, 1.5) if s else 3 * sig0])
        x0 = np.clip(x0, np.array(lower) + 1e-12, np.array(upper) - 1e-12)
        try:
            r = least_squares(resid, x0, bounds=(lower, upper), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=5000)
        except (ValueError, np.linalg.LinAlgError) as exc:  # pragma: no cover - defensive
            errors.append(str(exc))
            continue
        if not np.all(np.isfinite(r.x)):
            continue
        chi2 = float(np.sum(r.fun**2))
        if best is None or chi2 < best[1]:
            best = (r, chi2)
    if best is None:
        raise FitError("dip fit did not converge from any start", diagnostics={"errors": errors, "n_starts": n_starts})
    r, chi2 = best
    d, q, sig, per = (float(x) for x in r.x)
    if q < 0 or d <= 0:
        raise FitError("dip fit produced unphysical coincidence levels", diagnostics={"q": q, "d": d, "chi2": chi2})
    return DipFit(max(q, d), min(q, d), float(_signed_visibility(q, d)), q, d, Profile(sig, per), chi2)


# ---------------------------------------------------------------------------
# Unitary from a visibility table

# Triangular (Reck) arrangement of six two-mode blocks on adjacent modes.
MESH_ORDER = ((2, 3), (1, 2), (0, 1), (2, 3), (1, 2), (2, 3))
N_MESH_PARAMS = 2 * len(MESH_ORDER)


def mesh_unitary(x: Sequence[float]) -> np.ndarray:
    """4x4 unitary from six (theta, phi) blocks [[e^{i phi} cos, -sin], [e^{i phi} sin, cos]].

    The output-side diagonal phases that complete U(4) are omitted because
    visibilities do not depend on them.
    """
    x = np.asarray(x, dtype=float)
    u = np.eye(4, dtype=complex)
    for n, (a, b) in enumerate(MESH_ORDER):
        c, s = math.cos(x[2 * n]), math.sin(x[2 * n])
        e = complex(math.cos(x[2 * n + 1]), math.sin(x[2 * n + 1]))
        ra = u[a].copy()
        u[a] = e * c * ra - s * u[b]
        u[b] = e * s * ra + c * u[b]
    return u


class VisibilityFit(NamedTuple):
    unitary: np.ndarray
    rms: float
    candidates: List[np.ndarray]  # every solution with rms indistinguishable from the best


def fit_unitary_to_visibilities(
    v_meas: Sequence[float],
    n_starts: int = 32,
    seed: int = 0,
    reference=None,
    degeneracy_tol: float = 1e-6,
    converged_rms: float = 1e-10,
    max_starts: Optional[int] = None,
) -> VisibilityFit:
    """Mesh unitary whose visibility table is closest in RMS to ``v_meas``.

    Visibility tables do not determine a unitary uniquely: complex conjugation
    and some joint row/column permutations leave them unchanged. All solutions
    whose RMS lies within ``degeneracy_tol`` of the best, together with their
    complex conjugates, are returned as ``candidates``. If a ``reference``
    unitary (for instance the design or an interferometric reconstruction) is
    given, the candidate with the highest mode fidelity to it is returned;
    otherwise the lowest-RMS solution is, and one extra start is placed at the
    mesh setting closest to the reference.

    Only a minority of random starts reach the global minimum, so when the
    first ``n_starts`` leave the RMS above ``converged_rms`` further seeded
    starts are added, up to ``max_starts`` (default four times ``n_starts``).
    """
    v = np.asarray(v_meas, dtype=float).ravel()
    if v.size != 36:
        raise ContractViolation(f"expected 36 visibilities, got {v.size}")
    finite = np.isfinite(v)
    if np.any(np.abs(v[finite]) > 1 + 1e-12):
        raise ContractViolation("visibilities must lie in [-1, 1]")

    max_starts = 4 * n_starts if max_starts is None else max(max_starts, n_starts)

    def resid(x):
        r = visibility_values(mesh_unitary(x)) - v
        # entries that are undefined on either side carry no information
        return np.where(finite & np.isfinite(r), r, 0.0)

    rng = np.random.default_rng(seed)
    found = []
    # the identity start covers the no-interference table exactly
    starts = [np.zeros(N_MESH_PARAMS)]
    if reference is not None:
        # seed one start at the reference so its own degenerate image is explored
        starts.append(mesh_params_near(reference, seed=seed))
    while len(found) < n_starts or (min(f[0] for f in found) > converged_rms and len(found) < max_starts):
        x0 = starts.pop(0) if starts else rng.uniform(0, 2 * np.pi, N_MESH_PARAMS)
        r = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
        found.append((float(np.sqrt(np.mean(r.fun**2))), r.x))
    best_rms = min(f[0] for f in found)
    cands = []
    for rms, x in sorted(found, key=lambda f: f[0]):
        if rms <= best_rms + degeneracy_tol:
            u = mesh_unitary(x)
            cands.extend([u, u.conj()])
    if reference is None:
        chosen = cands[0]
    else:
        scores = [mode_fidelity(c, reference) for c in cands]
        chosen = cands[int(np.argmax(scores))]
    rms = float(np.sqrt(np.mean(resid_of(chosen, v) ** 2)))
    return VisibilityFit(chosen, rms, cands)


def mesh_params_near(u, n_starts: int = 8, seed: int = 0) -> np.ndarray:
    """Mesh parameters whose unitary best matches ``u`` up to output phases."""
    u = np.asarray(u, dtype=complex)

    def resid(y):
        diff = mesh_unitary(y[:N_MESH_PARAMS]) - np.exp(1j * y[N_MESH_PARAMS:])[:, None] * u
        return np.concatenate([diff.real.ravel(), diff.imag.ravel()])

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_starts):
        r = least_squares(resid, rng.uniform(0, 2 * np.pi, N_MESH_PARAMS + 4), method="lm", xtol=1e-12)
        if best is None or r.cost < best.cost:
            best = r
    return best.x[:N_MESH_PARAMS]


def resid_of(u, v_meas) -> np.ndarray:
    r = visibility_values(u) - np.asarray(v_meas, dtype=float)
    return np.where(np.isfinite(r), r, 0.0)
