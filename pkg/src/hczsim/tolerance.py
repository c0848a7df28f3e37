"""Fidelity sensitivity to fabrication deviations: single-parameter sweeps and Monte Carlo."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .circuit import CircuitParams, build_circuit, hcz_target
from .errors import ContractViolation
from .metrics import jamiolkowski_state, mode_fidelity, process_fidelity

SCHEMA_VERSION = 1
PARAMETERS = ("dtheta1", "dtheta2", "dtheta3", "dtheta4", "dphi")
HISTOGRAM_BINS = 40
GAUSSIAN_NOTE = "deviations drawn from untruncated Gaussians"


@dataclass(frozen=True)
class DeviationSpec:
    """Gaussian fabrication-deviation model.

    ``sigma`` is the standard deviation in radians, shared by every parameter
    listed in ``which``; the others stay at zero.
    """

    sigma: float
    n_samples: int = 2000
    seed: int = 0
    which: Tuple[str, ...] = PARAMETERS

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ContractViolation(f"sigma must be non-negative, got {self.sigma}")
        if self.n_samples < 1:
            raise ContractViolation(f"n_samples must be at least 1, got {self.n_samples}")
        which = tuple(self.which)
        unknown = [w for w in which if w not in PARAMETERS]
        if unknown:
            raise ContractViolation(f"unknown parameters {unknown}; choose from {PARAMETERS}")
        object.__setattr__(self, "which", which)


def evaluate(deviations: Sequence[float], target: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """(F_m, F_p) of the circuit with the five deviations (dtheta1..4, dphi) applied."""
    if target is None:
        target = hcz_target()
    u = build_circuit(CircuitParams.from_vector(deviations))
    return mode_fidelity(u, target), process_fidelity(jamiolkowski_state(u))


def default_grid(n_per_sign: int = 50, lo: float = 1e-3, hi: float = 0.5) -> np.ndarray:
    """Log-spaced magnitudes mirrored to both signs, sorted ascending."""
    mags = np.logspace(math.log10(lo), math.log10(hi), n_per_sign)
    return np.concatenate([-mags[::-1], mags])


def sweep_parameter(which: str, grid: Optional[Sequence[float]] = None) -> np.ndarray:
    """Rows of (delta, F_m, F_p) with only ``which`` deviated."""
    if which not in PARAMETERS:
        raise ContractViolation(f"unknown parameter {which!r}; choose from {PARAMETERS}")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if not np.all(np.isfinite(grid)):
        raise ContractViolation("sweep grid must be finite")
    idx = PARAMETERS.index(which)
    target = hcz_target()
    rows = []
    for delta in grid:
        dev = np.zeros(len(PARAMETERS))
        dev[idx] = delta
        rows.append((float(delta), *evaluate(dev, target)))
    return np.array(rows).reshape(-1, 3)


def draw_deviations(spec: DeviationSpec, index: int) -> np.ndarray:
    """Deviation vector of sample ``index``; each sample has its own stream."""
    rng = np.random.default_rng([spec.seed, index])
    dev = np.zeros(len(PARAMETERS))
    mask = [p in spec.which for p in PARAMETERS]
    dev[mask] = spec.sigma * rng.standard_normal(int(sum(mask)))
    return dev


def _evaluate_chunk(args) -> List[Tuple[np.ndarray, float, float]]:
    spec, indices = args
    target = hcz_target()
    out = []
    for i in indices:
        dev = draw_deviations(spec, i)
        out.append((dev, *evaluate(dev, target)))
    return out


@dataclass
class MetricSummary:
    mean: float
    std: float
    min: float
    max: float
    histogram: List[int]
    bin_edges: List[float]

    @classmethod
    def from_values(cls, values: np.ndarray, bins: int = HISTOGRAM_BINS) -> "MetricSummary":
        lo = float(values.min())
        hi = 1.0 if lo < 1.0 else lo + 1e-12
        counts, edges = np.histogram(np.clip(values, lo, hi), bins=bins, range=(lo, hi))
        return cls(
            float(values.mean()),
            float(values.std(ddof=1)) if len(values) > 1 else 0.0,
            lo,
            float(values.max()),
            counts.tolist(),
            edges.tolist(),
        )


@dataclass
class ToleranceReport:
    spec: DeviationSpec
    deviations: np.ndarray  # (n, 5) radians
    fm: np.ndarray
    fp: np.ndarray
    notes: Tuple[str, ...] = field(default=(GAUSSIAN_NOTE,))

    @property
    def fm_summary(self) -> MetricSummary:
        return MetricSummary.from_values(self.fm)

    @property
    def fp_summary(self) -> MetricSummary:
        return MetricSummary.from_values(self.fp)

    def summary(self) -> Dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "sigma": self.spec.sigma,
            "n_samples": self.spec.n_samples,
            "seed": self.spec.seed,
            "which": list(self.spec.which),
            "fm": vars(self.fm_summary),
            "fp": vars(self.fp_summary),
            "notes": list(self.notes),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sample", *PARAMETERS, "fm", "fp"])
            for i, (dev, fm, fp) in enumerate(zip(self.deviations, self.fm, self.fp)):
                w.writerow([i, *(f"{x:.17g}" for x in (*dev, fm, fp))])

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def monte_carlo(spec: DeviationSpec, workers: int = 1) -> ToleranceReport:
    """Evaluate ``spec.n_samples`` random devices; the result does not depend on ``workers``."""
    indices = list(range(spec.n_samples))
    if workers <= 1:
        results = _evaluate_chunk((spec, indices))
    else:
        chunks = [indices[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_evaluate_chunk, [(spec, c) for c in chunks]))
        # undo the strided split so samples stay in index order
        results = [None] * spec.n_samples
        for c, part in zip(chunks, parts):
            for i, r in zip(c, part):
                results[i] = r
    dev = np.array([r[0] for r in results])
    fm = np.array([r[1] for r in results])
    fp = np.array([r[2] for r in results])
    return ToleranceReport(spec, dev, fm, fp)
