"""Calibration procedures: photon number, dispersive and Kerr rates, pulse decay, thermal populations."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations
from typing import Optional, Sequence

import numpy as np
from scipy import constants
from scipy.optimize import least_squares

from .dynamics import DeviceParams, mean_field, evolve_interaction
from .errors import (
    DegenerateGeometry,
    InvalidProtocol,
    NonConvergence,
    RankDeficientFit,
    ShapeMismatch,
    ValidationError,
)
from .hilbert import coherent_state

# scaling applied to the measured one-photon curve in the photon calibration data
P1_SCALE_MEASURED = 0.95
PERMUTATIONS = tuple("".join(p) for p in permutations("gef"))  # gef, gfe, egf, efg, fge, feg
FIT_TOL = 1e-10
FIT_MAX_NFEV = 500


@dataclass(frozen=True)
class DecayCurve:
    """Probabilities of exciting the qubit with a 0- or 1-photon selective pulse vs delay."""

    times: np.ndarray = field(repr=False)
    p0: np.ndarray = field(repr=False)
    p1: np.ndarray = field(repr=False)

    def __post_init__(self):
        t, a, b = (np.asarray(v, dtype=float) for v in (self.times, self.p0, self.p1))
        if not (t.shape == a.shape == b.shape) or t.ndim != 1:
            raise ShapeMismatch("times, p0 and p1 must be 1-D of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("times must be increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "p0", a)
        object.__setattr__(self, "p1", b)


@dataclass(frozen=True)
class DetuningSeries:
    """Mean readout-mode detuning versus photon number for each qubit state (rad/s)."""

    nbar: np.ndarray = field(repr=False)
    detuning_g: np.ndarray = field(repr=False)
    detuning_e: np.ndarray = field(repr=False)

    def __post_init__(self):
        n, g, e = (np.asarray(v, dtype=float) for v in (self.nbar, self.detuning_g, self.detuning_e))
        if not (n.shape == g.shape == e.shape) or n.ndim != 1:
            raise ShapeMismatch("nbar and detunings must be 1-D of equal length")
        if np.any(n < 0) or np.any(np.diff(n) <= 0):
            raise ValidationError("nbar must be nonnegative and increasing")
        object.__setattr__(self, "nbar", n)
        object.__setattr__(self, "detuning_g", g)
        object.__setattr__(self, "detuning_e", e)


@dataclass(frozen=True)
class FitResult:
    names: tuple
    estimates: np.ndarray
    covariance: np.ndarray = field(repr=False)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    def to_text(self) -> str:
        return "".join(
            f"{n}.estimate = {float(v)!r}\n{n}.stderr = {float(s)!r}\n"
            for n, v, s in zip(self.names, self.estimates, self.stderr))


def fock_decay_model(nbar, kappa_r, t, p1_scale: float = 1.0):
    """Poisson vacuum and one-photon weights of a decaying coherent state.

    ``p0 = exp(-n(t))`` and ``p1 = s * n(t) * exp(-n(t))`` with
    ``n(t) = nbar * exp(-kappa_r t)``.
    """
    if np.any(np.asarray(nbar) < 0):
        raise ValidationError("nbar must be >= 0")
    if kappa_r <= 0:
        raise ValidationError("kappa_r must be > 0")
    n_t = nbar * np.exp(-kappa_r * np.asarray(t, dtype=float))
    p0 = np.exp(-n_t)
    return p0, p1_scale * n_t * p0


def _covariance(sol) -> np.ndarray:
    j = sol.jac
    dof = max(1, sol.fun.size - j.shape[1])
    s2 = float(np.dot(sol.fun, sol.fun)) / dof
    jtj = j.T @ j
    if np.linalg.matrix_rank(jtj) < j.shape[1]:
        raise RankDeficientFit("singular normal matrix")
    return np.linalg.inv(jtj) * s2


def _initial_photon_guess(curve: DecayCurve, p1_scale: float):
    ok = (curve.p0 > 1e-12) & (curve.p1 > 1e-12)
    if ok.sum() >= 2:
        slope, icept = np.polyfit(curve.times[ok], np.log(curve.p1[ok] / (p1_scale * curve.p0[ok])), 1)
        if slope < 0:
            return math.exp(icept), -slope
    p0 = np.clip(curve.p0, 1e-12, 1 - 1e-12)
    n_t = -np.log(p0)
    return max(n_t[0], 1e-3), max(1.0 / max(curve.times[-1] - curve.times[0], 1e-12), 1.0)


def fit_photon_calibration(curve: DecayCurve, p1_scale: float = 1.0, x0=None):
    """Least-squares ``(nbar, kappa_r)`` from the p0/p1 decay curves.

    Returns
    -------
    (nbar, kappa_r, covariance)
    """
    if curve.times.size < 5:
        raise ValidationError("need at least 5 time points")
    if x0 is None:
        x0 = _initial_photon_guess(curve, p1_scale)
    scale = np.asarray(x0, dtype=float)

    def resid(u):
        nbar, kr = u * scale
        a, b = fock_decay_model(nbar, kr, curve.times, p1_scale)
        return np.concatenate([a - curve.p0, b - curve.p1])

    sol = least_squares(resid, np.ones(2), method="lm", xtol=FIT_TOL, ftol=FIT_TOL,
                        gtol=FIT_TOL, max_nfev=FIT_MAX_NFEV)
    if not sol.success or np.any(~np.isfinite(sol.x)):
        raise NonConvergence(sol.message)
    est = sol.x * scale
    if est[1] <= 0 or est[0] < 0:
        raise NonConvergence("fit left the physical domain")
    cov = _covariance(sol) * np.outer(scale, scale)
    return float(est[0]), float(est[1]), cov


def _line_fit(x, y):
    a = np.vstack([np.ones_like(x), x]).T
    if x.size < 3 or np.linalg.matrix_rank(a) < 2:
        raise RankDeficientFit("need at least 3 distinct photon numbers per branch")
    coef, res, _, _ = np.linalg.lstsq(a, y, rcond=None)
    dof = max(1, x.size - 2)
    s2 = float(np.sum((y - a @ coef) ** 2)) / dof
    cov = np.linalg.inv(a.T @ a) * s2
    return coef, cov


def fit_dispersive_and_kerr(series: DetuningSeries, nbar_max: Optional[float] = None):
    """Dispersive shift and Kerr rates from linear fits of detuning vs photon number.

    Detuning is the frequency shift of the mode, the negative of the
    rotation rate of ``<a>``, so ``chi`` is the intercept difference g - e
    and each Kerr rate is ``-slope / 2``.

    Parameters
    ----------
    nbar_max : float, optional
        Only points with ``nbar <= nbar_max`` enter the fit.

    Returns
    -------
    (chi, kerr_g, kerr_e)
    """
    sel = np.ones(series.nbar.size, bool) if nbar_max is None else series.nbar <= nbar_max
    x = series.nbar[sel]
    (cg, sg), _ = _line_fit(x, series.detuning_g[sel])
    (ce, se), _ = _line_fit(x, series.detuning_e[sel])
    return float(cg - ce), float(-0.5 * sg), float(-0.5 * se)


def simulate_detuning_series(params: DeviceParams, nbar: Sequence[float], t_int: float = 100e-9,
                             dim: int = 150, dt: float = 1e-9) -> DetuningSeries:
    """Detunings ``-d(arg <a>)/dt`` at ``t_int`` from the interaction Hamiltonian."""
    nbar = np.asarray(nbar, dtype=float)
    out = {"g": [], "e": []}
    for n in nbar:
        s = coherent_state(math.sqrt(n), dim)
        for b in ("g", "e"):
            m1 = mean_field(evolve_interaction(s, b, t_int - dt, params))
            m2 = mean_field(evolve_interaction(s, b, t_int + dt, params))
            out[b].append(-np.angle(m2 / m1) / (2 * dt))
    return DetuningSeries(nbar, np.array(out["g"]), np.array(out["e"]))


def pulse_fidelity_decay(n_pulses: int, dt: float, t1: float, t2: float) -> float:
    """``exp(-N dt (1/T1 + 1/T2) / 2)`` for an odd train of N pi pulses."""
    if int(n_pulses) != n_pulses or n_pulses < 1 or n_pulses % 2 == 0:
        raise InvalidProtocol(f"n_pulses must be a positive odd integer, got {n_pulses!r}")
    return math.exp(-n_pulses * dt * (1.0 / t1 + 1.0 / t2) / 2.0)


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{p >= 0, sum p = 1}``."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.nonzero(u - css / np.arange(1, v.size + 1) > 0)[0][-1]
    return np.maximum(v - css[k] / (k + 1.0), 0.0)


def permutation_matrix(labels: Sequence[str] = PERMUTATIONS) -> np.ndarray:
    """``M[r, i, j] = 1`` when, under label ``r``, level ``i`` holds population ``j``.

    Label ``"xyz"`` puts the thermal population of x on g, of y on e and
    of z on f.
    """
    idx = {"g": 0, "e": 1, "f": 2}
    m = np.zeros((len(labels), 3, 3))
    for r, lab in enumerate(labels):
        if sorted(lab) != ["e", "f", "g"]:
            raise ValidationError(f"bad permutation label {lab!r}")
        for level, src in enumerate(lab):
            m[r, level, idx[src]] = 1.0
    return m


def synthesize_responses(populations, apexes, labels: Sequence[str] = PERMUTATIONS) -> np.ndarray:
    """Mean quadratures for each permutation from populations and level references."""
    p = np.asarray(populations, dtype=float)
    a = np.asarray(apexes, dtype=complex)
    return np.einsum("rij,j,i->r", permutation_matrix(labels), p, a)


def boltzmann_temperature(p_g: float, p_e: float, omega_q: float) -> float:
    """Two-level temperature from the e/g population ratio."""
    if p_e <= 0:
        return 0.0
    if p_e >= p_g:
        return math.inf
    return constants.hbar * omega_q / (constants.k * math.log(p_g / p_e))


def solve_thermal_populations(responses, apexes, omega_q: float = DeviceParams().omega_q,
                              labels: Sequence[str] = PERMUTATIONS):
    """Thermal populations from permuted-level mean quadratures.

    Parameters
    ----------
    responses : 6 complex
        Mean quadrature for each label in ``labels``.
    apexes : 3 complex
        Reference quadratures of pure g, e, f.

    Returns
    -------
    (p_g, p_e, p_f, temperature)
    """
    r = np.asarray(responses, dtype=complex).ravel()
    a = np.asarray(apexes, dtype=complex).ravel()
    if a.size != 3 or r.size != len(labels):
        raise ShapeMismatch("need 3 apexes and one response per label")
    area = 0.5 * abs(((a[1] - a[0]).conjugate() * (a[2] - a[0])).imag)
    span = max(abs(a[1] - a[0]), abs(a[2] - a[0]), abs(a[2] - a[1]))
    if span == 0 or area <= 1e-9 * span * span:
        raise DegenerateGeometry("apexes are collinear")
    # response_r = sum_i a_i * p_{src(r, i)} = (a @ M_r) @ p
    rows = np.einsum("i,rij->rj", a, permutation_matrix(labels))
    design = np.vstack([rows.real, rows.imag])
    rhs = np.concatenate([r.real, r.imag])
    p, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    p = project_to_simplex(p)
    return float(p[0]), float(p[1]), float(p[2]), boltzmann_temperature(p[0], p[1], omega_q)
