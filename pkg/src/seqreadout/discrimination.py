"""Histograms of measured amplitudes, overlap, decision region and error rates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .errors import CoverageDeficit, EmptyInput, ShapeMismatch, ValidationError

DEFAULT_BINS = 200
DEFAULT_HALF_WIDTH = 12.0
MIN_COVERAGE = 0.999


def uniform_edges(half_width: float = DEFAULT_HALF_WIDTH, bins: int = DEFAULT_BINS):
    e = np.linspace(-half_width, half_width, bins + 1)
    return e, e.copy()


def default_half_width(alpha0: complex, eta: float) -> float:
    """Square extent covering a coherent cloud at ``alpha0`` by six standard deviations."""
    return max(DEFAULT_HALF_WIDTH, abs(alpha0) + 6.0 / math.sqrt(2.0 * eta))


@dataclass(frozen=True)
class AmplitudeHistogram:
    """Normalized 2-D density over the beta plane; ``density[i, j]`` is (Re bin i, Im bin j)."""

    x_edges: np.ndarray = field(repr=False)
    y_edges: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    n_samples: int = 0
    n_outside: int = 0

    def __post_init__(self):
        x = np.asarray(self.x_edges, dtype=float)
        y = np.asarray(self.y_edges, dtype=float)
        d = np.asarray(self.density, dtype=float)
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise ValidationError("edges must be strictly increasing")
        if d.shape != (x.size - 1, y.size - 1):
            raise ShapeMismatch("density shape does not match edges")
        if np.any(d < 0):
            raise ValidationError("density must be nonnegative")
        object.__setattr__(self, "x_edges", x)
        object.__setattr__(self, "y_edges", y)
        object.__setattr__(self, "density", d)

    @property
    def bin_area(self) -> np.ndarray:
        return np.outer(np.diff(self.x_edges), np.diff(self.y_edges))

    @property
    def probabilities(self) -> np.ndarray:
        return self.density * self.bin_area

    @property
    def x_centers(self) -> np.ndarray:
        return 0.5 * (self.x_edges[1:] + self.x_edges[:-1])

    @property
    def y_centers(self) -> np.ndarray:
        return 0.5 * (self.y_edges[1:] + self.y_edges[:-1])

    def same_binning(self, other: "AmplitudeHistogram") -> bool:
        return (np.array_equal(self.x_edges, other.x_edges)
                and np.array_equal(self.y_edges, other.y_edges))


def _is_uniform(e: np.ndarray) -> bool:
    d = np.diff(e)
    return bool(np.allclose(d, d[0], rtol=1e-12, atol=0))


def bin_counts(samples, edges) -> Tuple[np.ndarray, int]:
    """Raw counts and number of samples outside ``edges``."""
    z = np.asarray(samples, dtype=complex).ravel()
    xe, ye = (np.asarray(e, dtype=float) for e in edges)
    if _is_uniform(xe) and _is_uniform(ye):
        counts, n_out = _kernels.hist2d_uniform(
            z.real, z.imag, xe[0], (xe[-1] - xe[0]) / (xe.size - 1), xe.size - 1,
            ye[0], (ye[-1] - ye[0]) / (ye.size - 1), ye.size - 1)
        return np.asarray(counts), int(n_out)
    counts, _, _ = np.histogram2d(z.real, z.imag, bins=(xe, ye))
    return counts.astype(np.int64), int(z.size - counts.sum())


def histogram2d(samples, edges=None, min_coverage: float = MIN_COVERAGE) -> AmplitudeHistogram:
    """Normalized histogram of complex samples.

    Parameters
    ----------
    edges : (x_edges, y_edges), optional
        Defaults to 200 x 200 bins over [-12, 12]^2.
    min_coverage : float
        Minimum fraction of samples that must fall inside the edges.

    Raises
    ------
    CoverageDeficit
        If too many samples fall outside the edges.
    """
    z = np.asarray(samples, dtype=complex).ravel()
    if z.size == 0:
        raise EmptyInput("no samples to histogram")
    if edges is None:
        edges = uniform_edges()
    counts, n_out = bin_counts(z, edges)
    inside = z.size - n_out
    if inside < min_coverage * z.size or inside == 0:
        raise CoverageDeficit(
            f"only {inside}/{z.size} samples inside the histogram edges")
    xe, ye = (np.asarray(e, dtype=float) for e in edges)
    area = np.outer(np.diff(xe), np.diff(ye))
    density = counts / (inside * area)
    return AmplitudeHistogram(xe, ye, density, int(z.size), int(n_out))


def _require_same(a: AmplitudeHistogram, b: AmplitudeHistogram):
    if not a.same_binning(b):
        raise ShapeMismatch("histograms use different binnings")


def overlap(pg: AmplitudeHistogram, pe: AmplitudeHistogram) -> float:
    """Normalized scalar product ``sum pg pe / (|pg| |pe|)`` over bins."""
    _require_same(pg, pe)
    a, b = pg.density.ravel(), pe.density.ravel()
    na, nb = np.sqrt(np.dot(a, a)), np.sqrt(np.dot(b, b))
    if na == 0 or nb == 0:
        raise EmptyInput("empty histogram")
    return float(min(1.0, max(0.0, np.dot(a, b) / (na * nb))))


@dataclass(frozen=True)
class DecisionRegion:
    """Bins assigned to the outcome g (``mask`` True)."""

    x_edges: np.ndarray = field(repr=False)
    y_edges: np.ndarray = field(repr=False)
    mask: np.ndarray = field(repr=False)

    def bin_index(self, samples) -> Tuple[np.ndarray, np.ndarray]:
        """Bin indices, clamped so out-of-grid samples take the nearest bin."""
        z = np.asarray(samples, dtype=complex).ravel()
        ix = np.searchsorted(self.x_edges, z.real, side="right") - 1
        iy = np.searchsorted(self.y_edges, z.imag, side="right") - 1
        ix = np.clip(ix, 0, self.x_edges.size - 2)
        iy = np.clip(iy, 0, self.y_edges.size - 2)
        return ix, iy

    def classify(self, samples) -> np.ndarray:
        """True where a sample reads as g."""
        ix, iy = self.bin_index(samples)
        return self.mask[ix, iy]


def decision_region(pg: AmplitudeHistogram, pe: AmplitudeHistogram) -> DecisionRegion:
    """Bins where ``pg >= pe``; ties go to g."""
    _require_same(pg, pe)
    return DecisionRegion(pg.x_edges, pg.y_edges, pg.density >= pe.density)


@dataclass(frozen=True)
class ReadoutReport:
    """Readout figures of merit.

    ``fidelity`` is always ``1 - (error_g + error_e)/2``.  ``error_budget``
    maps ``"g.<cause>"``/``"e.<cause>"`` to the fraction of runs of that
    preparation misclassified with that cause.
    """

    overlap: float
    error_g: float
    error_e: float
    n_runs: int
    qndness: Optional[float] = None
    error_budget: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    fidelity: float = field(init=False)

    def __post_init__(self):
        for name in ("overlap", "error_g", "error_e"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} = {v!r} outside [0, 1]")
        if self.qndness is not None and not (0.0 <= self.qndness <= 1.0):
            raise ValidationError("qndness outside [0, 1]")
        object.__setattr__(self, "fidelity", 1.0 - (self.error_g + self.error_e) / 2.0)

    def to_dict(self) -> dict:
        d = {
            "overlap": self.overlap,
            "error_g": self.error_g,
            "error_e": self.error_e,
            "fidelity": self.fidelity,
            "n_runs": self.n_runs,
        }
        if self.qndness is not None:
            d["qndness"] = self.qndness
        for k in sorted(self.error_budget):
            d[f"budget.{k}"] = self.error_budget[k]
        for k in sorted(self.extra):
            d[k] = self.extra[k]
        return d

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.to_dict().items())


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def error_rates(samples_g, samples_e, region: DecisionRegion,
                overlap_value: float = 0.0) -> ReadoutReport:
    """Fraction of g-prepared samples outside ``Z_g`` and e-prepared samples inside."""
    sg = np.asarray(samples_g, dtype=complex).ravel()
    se = np.asarray(samples_e, dtype=complex).ravel()
    if sg.size == 0 or se.size == 0:
        raise EmptyInput("both preparations need samples")
    eg = float(np.mean(~region.classify(sg)))
    ee = float(np.mean(region.classify(se)))
    return ReadoutReport(overlap_value, eg, ee, int(min(sg.size, se.size)))


def error_budget(samples: np.ndarray, causes: np.ndarray, region: DecisionRegion,
                 prepared: str) -> dict:
    """Per-cause share of misclassified runs, keyed ``"<prepared>.<cause>"``."""
    g = region.classify(samples)
    wrong = g if prepared == "e" else ~g
    causes = np.asarray(causes)
    n = causes.size
    return {f"{prepared}.{c}": float(np.count_nonzero(wrong & (causes == c)) / n)
            for c in np.unique(causes)}


def qnd_probability(run_pairs: Iterable[Sequence]) -> float:
    """Agreement of two successive outcomes among runs heralded by the first.

    Each pair is ``(outcome1, outcome2, prepared)``; only runs whose first
    outcome matches the preparation are kept.
    """
    arr = np.asarray(list(run_pairs), dtype=object)
    if arr.size == 0:
        raise EmptyInput("no run pairs")
    o1, o2, prep = arr[:, 0], arr[:, 1], arr[:, 2]
    herald = o1 == prep
    if not np.any(herald):
        raise EmptyInput("no heralded pairs")
    return float(np.mean(o2[herald] == o1[herald]))


def simulate_sequential_readouts(n_runs: int, rng: np.random.Generator, t1: float,
                                 gap: float, p_demolition: float = 0.0,
                                 assignment_error: float = 0.0) -> list:
    """Pairs of back-to-back readouts for alternating g/e preparations.

    The first readout projects the qubit; it is flipped with probability
    ``p_demolition`` at the end of that readout, then relaxes e -> g during
    ``gap`` with rate ``1/t1``.  Each outcome is independently misassigned
    with probability ``assignment_error``.
    """
    if n_runs < 1:
        raise ValidationError("n_runs must be >= 1")
    prep = np.where(np.arange(n_runs) % 2 == 0, "g", "e")
    state = prep.copy()
    flip1 = rng.random(n_runs) < assignment_error
    o1 = np.where(flip1, np.where(state == "g", "e", "g"), state)
    dem = rng.random(n_runs) < p_demolition
    state = np.where(dem, np.where(state == "g", "e", "g"), state)
    decay = rng.random(n_runs) < -math.expm1(-gap / t1)
    state = np.where((state == "e") & decay, "g", state)
    flip2 = rng.random(n_runs) < assignment_error
    o2 = np.where(flip2, np.where(state == "g", "e", "g"), state)
    return list(zip(o1.tolist(), o2.tolist(), prep.tolist()))


def expected_qnd(t1: float, gap: float, p_demolition: float) -> float:
    """Closed form of :func:`simulate_sequential_readouts` with perfect assignment."""
    p_dec = -math.expm1(-gap / t1)
    agree_g = 1.0 - p_demolition * (1.0 - p_dec)
    agree_e = (1.0 - p_demolition) * (1.0 - p_dec)
    return 0.5 * (agree_g + agree_e)


def tv_distance(pa: AmplitudeHistogram, pb: AmplitudeHistogram) -> float:
    """Total-variation distance between two histograms on the same binning."""
    _require_same(pa, pb)
    return float(0.5 * np.sum(np.abs(pa.probabilities - pb.probabilities)))
