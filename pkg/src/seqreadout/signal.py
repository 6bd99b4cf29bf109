"""Heterodyne record synthesis, weight functions and demodulation to beta.

Two measurement models are provided:

* the trace path synthesizes a digitized voltage record per run and
  demodulates it with a weight function;
* the direct path samples the heterodyne outcome from the Husimi Q
  distribution and adds the Gaussian smoothing of the finite efficiency.

Both give beta in units where a coherent input ``|alpha0>`` has mean
``alpha0`` and per-quadrature variance ``1/(2 eta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .dynamics import DeviceParams
from .errors import (
    DegenerateNormalization,
    EmptyInput,
    InvalidEfficiency,
    ShapeMismatch,
    TruncationOverflow,
    ValidationError,
)
from .hilbert import ReadoutState, apply_loss_channel
from .release import PumpPulse, buffer_output_envelope, classical_release, sample_times

MIN_TRACE_SAMPLES = 16
HUSIMI_GRID = 401
HUSIMI_MASS_TOL = 1e-4


@dataclass(frozen=True)
class VoltageTrace:
    """Uniformly sampled real voltage record."""

    sample_rate: float
    t_start: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if not self.sample_rate > 0:
            raise ValidationError("sample_rate must be > 0")
        if s.ndim != 1 or s.size < MIN_TRACE_SAMPLES:
            raise ValidationError(f"a trace needs at least {MIN_TRACE_SAMPLES} samples")
        object.__setattr__(self, "samples", s)

    @property
    def times(self) -> np.ndarray:
        return self.t_start + np.arange(self.samples.size) / self.sample_rate

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class WeightFunction:
    """Complex demodulation kernel ``w = re + i im`` and multiplier ``lambda_scale``.

    ``beta = lambda_scale * sum_k V[k] w[k] dt``.
    """

    sample_rate: float
    re: np.ndarray = field(repr=False)
    im: np.ndarray = field(repr=False)
    lambda_scale: complex = 1.0 + 0j
    t_start: float = 0.0
    degenerate: bool = False

    def __post_init__(self):
        re = np.asarray(self.re, dtype=float)
        im = np.asarray(self.im, dtype=float)
        if re.shape != im.shape or re.ndim != 1:
            raise ShapeMismatch("re and im must be 1-D of equal length")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)
        object.__setattr__(self, "lambda_scale", complex(self.lambda_scale))

    @property
    def complex_weight(self) -> np.ndarray:
        return self.re + 1j * self.im

    @property
    def times(self) -> np.ndarray:
        return self.t_start + np.arange(self.re.size) / self.sample_rate

    def __len__(self):
        return self.re.size


def quarter_period_shift(x: np.ndarray) -> np.ndarray:
    """Shift every spectral component of a real signal by a quarter period.

    ``cos(w t)`` maps to ``sin(w t)``, so ``x + i * shift(x)`` carries
    only the ``exp(+i w t)`` component.
    """
    x = np.asarray(x, dtype=float)
    spec = np.fft.rfft(x)
    spec[0] = 0.0
    if x.size % 2 == 0:
        spec[-1] = 0.0  # Nyquist bin has no quadrature partner
    return np.fft.irfft(-1j * spec, n=x.size)


def carrier_phase(x: np.ndarray, freq: float, sample_rate: float) -> float:
    """Phase ``phi`` of the component of ``x`` at ``freq`` written as ``cos(w t - phi)``."""
    x = np.asarray(x, dtype=float)
    t = np.arange(x.size) / sample_rate
    return float(np.angle(np.sum(x * np.exp(2j * math.pi * freq * t))))


def weight_phase_offset(w: WeightFunction, freq: float) -> float:
    """Carrier phase of ``im`` minus that of ``re`` at ``freq``, wrapped to (-pi, pi]."""
    d = carrier_phase(w.im, freq, w.sample_rate) - carrier_phase(w.re, freq, w.sample_rate)
    return float(np.angle(np.exp(1j * d)))


def _carrier(params: DeviceParams, branch_detuning: float) -> float:
    return 2.0 * math.pi * params.if_freq + branch_detuning


def branch_detuning(branch: str, params: DeviceParams) -> float:
    """Symmetric frame: g at ``+chi/2``, e at ``-chi/2``."""
    if branch == "g":
        return 0.5 * params.chi
    if branch == "e":
        return -0.5 * params.chi
    raise ValidationError(f"branch must be 'g' or 'e', got {branch!r}")


def synthesize_trace(envelope, params: DeviceParams, branch_detuning: float,
                     noise_std: float, rng: Optional[np.random.Generator] = None,
                     t_start: float = 0.0,
                     envelope_rate: Optional[float] = None) -> VoltageTrace:
    """``V(t) = Re[env(t) exp(-i(2 pi f_if + detuning) t)] + white noise``.

    Parameters
    ----------
    envelope : array of complex
        Baseband envelope sampled at ``params.sample_rate``.
    envelope_rate : float, optional
        Rate of ``envelope``; must equal ``params.sample_rate`` if given.
    """
    if envelope_rate is not None and envelope_rate != params.sample_rate:
        raise ShapeMismatch(
            f"envelope sampled at {envelope_rate} Hz, device at {params.sample_rate} Hz"
        )
    env = np.asarray(envelope, dtype=complex)
    t = t_start + np.arange(env.size) / params.sample_rate
    v = np.real(env * np.exp(-1j * _carrier(params, branch_detuning) * t))
    if noise_std > 0:
        if rng is None:
            raise ValidationError("noise requires a random generator")
        v = v + rng.normal(0.0, noise_std, size=v.size)
    return VoltageTrace(params.sample_rate, t_start, v)


def _check_same_grid(a_rate, a_len, b_rate, b_len):
    if a_rate != b_rate:
        raise ShapeMismatch(f"sample rates differ: {a_rate} vs {b_rate}")
    if a_len != b_len:
        raise ShapeMismatch(f"lengths differ: {a_len} vs {b_len}")


def build_weight_function(avg_trace_g: VoltageTrace, avg_trace_e: VoltageTrace) -> WeightFunction:
    """``re = (V_e - V_g)/2`` and ``im`` its quarter-period shift.

    Equal inputs give a zero kernel flagged ``degenerate``.
    """
    _check_same_grid(avg_trace_g.sample_rate, len(avg_trace_g),
                     avg_trace_e.sample_rate, len(avg_trace_e))
    re = 0.5 * (avg_trace_e.samples - avg_trace_g.samples)
    scale = max(np.max(np.abs(avg_trace_e.samples)), np.max(np.abs(avg_trace_g.samples)))
    degenerate = bool(np.max(np.abs(re)) <= 1e-14 * max(scale, 1e-300))
    im = np.zeros_like(re) if degenerate else quarter_period_shift(re)
    return WeightFunction(avg_trace_g.sample_rate, re, im, 1.0, avg_trace_g.t_start, degenerate)


def demodulate_many(samples: np.ndarray, w: WeightFunction) -> np.ndarray:
    """Vectorized :func:`demodulate` over the rows of ``samples``."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[-1] != len(w):
        raise ShapeMismatch(f"trace length {samples.shape[-1]} != weight length {len(w)}")
    dt = 1.0 / w.sample_rate
    return w.lambda_scale * dt * (samples @ w.re + 1j * (samples @ w.im))


def demodulate(trace: VoltageTrace, w: WeightFunction) -> complex:
    """``beta = lambda_scale * sum_k V[k] (re[k] + i im[k]) dt``."""
    _check_same_grid(trace.sample_rate, len(trace), w.sample_rate, len(w))
    return complex(demodulate_many(trace.samples[None, :], w)[0])


def normalize_lambda(w: WeightFunction, reference_traces: Sequence[VoltageTrace],
                     alpha0: complex) -> WeightFunction:
    """Set ``lambda_scale`` so the mean beta over the references equals ``alpha0``."""
    refs = list(reference_traces)
    if not refs:
        raise EmptyInput("no reference traces")
    for r in refs:
        _check_same_grid(r.sample_rate, len(r), w.sample_rate, len(w))
    unit = WeightFunction(w.sample_rate, w.re, w.im, 1.0, w.t_start, w.degenerate)
    raw = np.mean(demodulate_many(np.stack([r.samples for r in refs]), unit))
    return _with_lambda(w, raw, alpha0)


def _with_lambda(w: WeightFunction, raw_mean: complex, alpha0: complex) -> WeightFunction:
    scale = math.sqrt(np.sum(w.re**2 + w.im**2)) / w.sample_rate
    if not np.isfinite(raw_mean) or abs(raw_mean) <= 1e-12 * max(scale, 1e-300):
        raise DegenerateNormalization("mean demodulated reference amplitude is zero")
    return WeightFunction(w.sample_rate, w.re, w.im, complex(alpha0) / raw_mean,
                          w.t_start, w.degenerate)


# --- direct (Husimi) measurement model -------------------------------------


@dataclass(frozen=True)
class HusimiSampler:
    """Inverse-CDF sampler of ``Q(mu) = <mu|rho|mu>/pi`` on a square grid."""

    centers: np.ndarray = field(repr=False)
    cell: float
    cdf: np.ndarray = field(repr=False)
    mass: float

    @classmethod
    def from_state(cls, state: ReadoutState, n_grid: int = HUSIMI_GRID,
                   half_width: Optional[float] = None,
                   mass_tol: float = HUSIMI_MASS_TOL) -> "HusimiSampler":
        if half_width is None:
            half_width = husimi_half_width(state)
        centers = np.linspace(-half_width, half_width, n_grid)
        cell = centers[1] - centers[0]
        q = husimi_q(state, centers[:, None] + 1j * centers[None, :])
        p = q.ravel() * cell * cell
        mass = float(p.sum())
        if abs(1.0 - mass) > mass_tol:
            raise TruncationOverflow(f"Husimi grid holds mass {mass:.6f}; deficit exceeds {mass_tol}")
        cdf = np.cumsum(p)
        cdf /= cdf[-1]
        return cls(centers, float(cell), cdf, mass)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        idx = np.searchsorted(self.cdf, rng.random(n), side="right")
        idx = np.minimum(idx, self.cdf.size - 1)
        n_grid = self.centers.size
        ix, iy = np.divmod(idx, n_grid)
        jitter = rng.random((2, n)) - 0.5
        return (self.centers[ix] + self.cell * jitter[0]) + 1j * (
            self.centers[iy] + self.cell * jitter[1])


def husimi_q(state: ReadoutState, mus) -> np.ndarray:
    """``Q(mu) = <mu|rho|mu> / pi`` evaluated at an array of points."""
    mus = np.asarray(mus, dtype=complex)
    flat = mus.ravel()
    if state.is_pure:
        amp = _kernels.husimi_amplitudes(state.data, flat)
        q = np.abs(amp) ** 2
    else:
        vals, vecs = np.linalg.eigh(state.data)
        keep = vals > 1e-13 * vals.max()
        q = np.zeros(flat.size)
        for lam, v in zip(vals[keep], vecs[:, keep].T):
            q += lam * np.abs(_kernels.husimi_amplitudes(v, flat)) ** 2
    return (q / math.pi).reshape(mus.shape)


def husimi_half_width(state: ReadoutState, n_sigma: float = 6.0) -> float:
    """``|<a>| + n_sigma * sigma_Q`` with ``sigma_Q`` the total Husimi spread."""
    from .dynamics import mean_field, mean_photon_number

    m = abs(mean_field(state))
    spread = math.sqrt(max(mean_photon_number(state) + 1.0 - m * m, 0.5))
    return m + n_sigma * spread


def complex_normal(var_per_quadrature: float, n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((2, n))
    return math.sqrt(var_per_quadrature) * (z[0] + 1j * z[1])


def heterodyne_noise(eta: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Complex Gaussian with per-quadrature variance ``(1/eta - 1)/2``."""
    if not (0.0 < eta <= 1.0):
        raise InvalidEfficiency(f"efficiency must lie in (0, 1], got {eta!r}")
    return complex_normal(0.5 * (1.0 / eta - 1.0), n, rng)


def sample_beta_fast(state: ReadoutState, eta: float, n: int, rng: np.random.Generator,
                     sampler: Optional[HusimiSampler] = None) -> np.ndarray:
    """Draw ``beta`` for a pre-loss state seen with total efficiency ``eta``.

    Equivalent in distribution to :func:`sample_measured_amplitude` with the
    loss applied explicitly, but needs only the Q function of the pure
    pre-loss state.
    """
    if sampler is None:
        sampler = HusimiSampler.from_state(state)
    return sampler.sample(n, rng) + heterodyne_noise(eta, n, rng)


def sample_measured_amplitude(released_state: ReadoutState, detection_efficiency: float,
                              rng: np.random.Generator, n: Optional[int] = None,
                              total_efficiency: Optional[float] = None):
    """Apply the detection loss, sample ``mu`` from Q and rescale.

    Returns ``beta = mu / sqrt(total_efficiency)``; ``total_efficiency``
    defaults to ``detection_efficiency`` (the released state already
    includes any upstream loss the caller wants counted).
    One complex number when ``n`` is None, else an array of ``n``.
    """
    if not (0.0 < detection_efficiency <= 1.0):
        raise InvalidEfficiency(f"detection_efficiency must lie in (0, 1], got {detection_efficiency!r}")
    total = detection_efficiency if total_efficiency is None else total_efficiency
    if not (0.0 < total <= 1.0):
        raise InvalidEfficiency(f"total_efficiency must lie in (0, 1], got {total!r}")
    lossy = apply_loss_channel(released_state, detection_efficiency)
    sampler = HusimiSampler.from_state(lossy)
    mu = sampler.sample(1 if n is None else n, rng) / math.sqrt(total)
    return complex(mu[0]) if n is None else mu


# --- trace measurement chain ---------------------------------------------


@dataclass(frozen=True)
class TraceChain:
    """Release-to-digitizer model mapping readout amplitudes to voltage records.

    A run with released readout amplitude ``nu`` produces the envelope
    ``gain * nu * u(t)``, with ``u = sqrt(kappa_b) b(t)`` the output field
    of a unit-amplitude release.
    """

    params: DeviceParams
    pulse: PumpPulse
    gain: float = 1.0
    times: np.ndarray = field(default=None, repr=False)
    unit_envelope: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.times is None:
            t = sample_times(self.pulse, self.params.sample_rate)
            traj = classical_release(1.0, self.pulse, self.params, t)
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "unit_envelope", buffer_output_envelope(traj, self.params))

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    def noiseless(self, nu, branch: str) -> np.ndarray:
        """Noise-free records, one row per amplitude in ``nu``."""
        nu = np.atleast_1d(np.asarray(nu, dtype=complex))
        carrier = self.unit_envelope * np.exp(
            -1j * _carrier(self.params, branch_detuning(branch, self.params)) * self.times)
        return self.gain * np.real(nu[:, None] * carrier[None, :])

    def records(self, nu, branch: str, noise_std: float, rng: np.random.Generator) -> np.ndarray:
        v = self.noiseless(nu, branch)
        if noise_std > 0:
            v = v + rng.normal(0.0, noise_std, size=v.shape)
        return v

    def trace(self, samples: np.ndarray) -> VoltageTrace:
        return VoltageTrace(self.params.sample_rate, self.t_start, samples)


def noise_std_for_efficiency(w: WeightFunction, eta: float) -> float:
    """White-noise std making demodulated noise ``(1/eta - 1)/2`` per quadrature."""
    if not (0.0 < eta <= 1.0):
        raise InvalidEfficiency(f"eta must lie in (0, 1], got {eta!r}")
    v_noise = 0.5 * (1.0 / eta - 1.0)
    if v_noise == 0:
        return 0.0
    dt = 1.0 / w.sample_rate
    per_quad = 0.5 * dt * dt * abs(w.lambda_scale) ** 2 * np.sum(w.re**2 + w.im**2)
    if per_quad <= 0:
        raise DegenerateNormalization("zero weight function cannot set a noise level")
    return math.sqrt(v_noise / per_quad)


@dataclass(frozen=True)
class CalibratedChain:
    chain: TraceChain
    weight: WeightFunction
    noise_std: float
    avg_g: VoltageTrace
    avg_e: VoltageTrace


def calibrate_chain(chain: TraceChain, mean_g: complex, mean_e: complex, alpha0: complex,
                    eta: float, rng: np.random.Generator, n_reference: int = 20000) -> CalibratedChain:
    """Build the weight function, lambda and noise level for a trace chain.

    ``mean_g``/``mean_e`` are the mean readout amplitudes at the chosen
    interaction time, so the noise-free records are the exact averages the
    weight is built from.  Lambda is first set on noise-free references,
    which fixes the noise level, then refined on ``n_reference`` noisy
    records of ``|alpha0>`` with the qubit in g at zero interaction time.
    """
    avg_g = chain.trace(chain.noiseless(mean_g, "g")[0])
    avg_e = chain.trace(chain.noiseless(mean_e, "e")[0])
    w = build_weight_function(avg_g, avg_e)
    if w.degenerate:
        raise DegenerateNormalization("g and e averages coincide; no weight function")
    ref_clean = chain.noiseless(alpha0, "g")
    w0 = _with_lambda(w, demodulate_many(ref_clean, w)[0], alpha0)
    noise = noise_std_for_efficiency(w0, eta)
    # references carry the coherent-state spread plus detector noise
    nu = alpha0 + complex_normal(0.5, n_reference, rng)
    refs = chain.records(nu, "g", noise, rng)
    unit = WeightFunction(w.sample_rate, w.re, w.im, 1.0, w.t_start)
    w1 = _with_lambda(w, np.mean(demodulate_many(refs, unit)), alpha0)
    return CalibratedChain(chain, w1, noise, avg_g, avg_e)


def sample_beta_trace(cal: CalibratedChain, nu: np.ndarray, branch: str,
                      rng: np.random.Generator, chunk: int = 20000) -> np.ndarray:
    """Synthesize and demodulate one record per amplitude in ``nu``."""
    nu = np.asarray(nu, dtype=complex)
    out = np.empty(nu.size, dtype=complex)
    for s in range(0, nu.size, chunk):
        part = nu[s:s + chunk]
        out[s:s + chunk] = demodulate_many(
            cal.chain.records(part, branch, cal.noise_std, rng), cal.weight)
    return out
