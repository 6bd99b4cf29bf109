"""On-demand release of the readout mode through the lossy buffer mode."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import _kernels
from .dynamics import DeviceParams
from .errors import NonConvergence, NumericDivergence, ShapeMismatch, ValidationError
from .hilbert import ReadoutState, apply_loss_channel

SECH_ARG = math.sqrt(math.pi / 2.0)
VALIDATED_COUPLING_RATIO = 1.6
RTOL = 1e-10
MAX_STEPS = 2_000_000


@dataclass(frozen=True)
class PumpPulse:
    """Sech-shaped coupling envelope truncated to a square window.

    Parameters
    ----------
    g_max : float
        Peak coupling, rad/s.
    sigma : float
        Width parameter, s.
    window : float, optional
        Total support, defaults to ``8 * sigma``.
    t0 : float
        Pulse center, s.
    """

    g_max: float
    sigma: float
    window: Optional[float] = None
    t0: float = 0.0

    def __post_init__(self):
        if self.window is None:
            object.__setattr__(self, "window", 8.0 * self.sigma)
        if not (math.isfinite(self.g_max) and self.g_max >= 0):
            raise ValidationError(f"g_max must be >= 0, got {self.g_max!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"sigma must be > 0, got {self.sigma!r}")
        if not self.window >= 4.0 * self.sigma * (1 - 1e-12):
            raise ValidationError("window must be at least 4*sigma")

    @property
    def t_start(self) -> float:
        return self.t0 - 0.5 * self.window

    @property
    def t_end(self) -> float:
        return self.t0 + 0.5 * self.window


@dataclass(frozen=True)
class ModeTrajectory:
    """Sampled classical amplitudes of the readout (``r``) and buffer (``b``) modes.

    ``loss_r`` and ``loss_b`` are the energies dissipated through each
    channel over the whole integration window, and ``r_final``/``b_final``
    the amplitudes at its end.
    """

    times: np.ndarray
    r_amp: np.ndarray
    b_amp: np.ndarray
    r0: complex = 1.0
    r_final: complex = 0j
    b_final: complex = 0j
    loss_r: float = 0.0
    loss_b: float = 0.0
    n_steps: int = field(default=0, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        r = np.asarray(self.r_amp, dtype=complex)
        b = np.asarray(self.b_amp, dtype=complex)
        if not (t.shape == r.shape == b.shape) or t.ndim != 1:
            raise ShapeMismatch("times, r_amp and b_amp must be 1-D of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValidationError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "r_amp", r)
        object.__setattr__(self, "b_amp", b)

    def energy_residual(self) -> float:
        """Relative mismatch of the bookkeeping ``|r|^2 + |b|^2 + losses = |r0|^2``."""
        e0 = abs(self.r0) ** 2
        if e0 == 0:
            return 0.0
        total = abs(self.r_final) ** 2 + abs(self.b_final) ** 2 + self.loss_r + self.loss_b
        return abs(total - e0) / e0


def pump_envelope(t, pulse: PumpPulse):
    """``g(t) = g_max / cosh(sqrt(pi/2) (t - t0) / sigma)`` inside the window, else 0."""
    t = np.asarray(t, dtype=float)
    x = t - pulse.t0
    # cosh overflows far outside the window, where the value is zeroed anyway
    with np.errstate(over="ignore"):
        g = pulse.g_max / np.cosh(SECH_ARG * x / pulse.sigma)
    g = np.where(np.abs(x) <= 0.5 * pulse.window, g, 0.0)
    return g if g.ndim else float(g)


def sample_times(pulse: PumpPulse, sample_rate: float) -> np.ndarray:
    """Uniform grid at ``sample_rate`` covering the pulse window."""
    n = int(math.floor(pulse.window * sample_rate + 1e-9)) + 1
    return pulse.t_start + np.arange(n) / sample_rate


def classical_release(r0: complex, pulse: PumpPulse, params: DeviceParams,
                      times: Optional[Sequence[float]] = None,
                      rtol: float = RTOL) -> ModeTrajectory:
    """Integrate the coupled-mode equations across the pump window.

    Starts from ``r = r0, b = 0`` at the window start.  The system is
    linear, so it is solved for ``r0 = 1`` and rescaled.

    Parameters
    ----------
    times : sequence of float, optional
        Output times inside the window; defaults to the device sample grid.
    """
    r0 = complex(r0)
    if not (math.isfinite(r0.real) and math.isfinite(r0.imag)):
        raise ValidationError("r0 must be finite")
    if times is None:
        times = sample_times(pulse, params.sample_rate)
    times = np.asarray(times, dtype=float)
    if times.size and (times[0] < pulse.t_start - 1e-15 or times[-1] > pulse.t_end + 1e-15):
        raise ValidationError("requested times fall outside the pump window")
    samples, final, n_steps = _kernels.beam_splitter_dp45(
        1.0, float(pulse.g_max), float(pulse.sigma), float(pulse.t0), 0.5 * pulse.window,
        pulse.t_start, pulse.t_end, float(params.kappa_r), float(params.kappa_b),
        float(rtol), 1e-14, times, MAX_STEPS,
    )
    samples = np.asarray(samples)
    final = np.asarray(final)
    if n_steps < 0 or not (np.all(np.isfinite(samples)) and np.all(np.isfinite(final))):
        raise NumericDivergence(f"release integration failed after {abs(n_steps)} steps")
    e0 = abs(r0) ** 2
    return ModeTrajectory(
        times=times,
        r_amp=r0 * samples[:, 0],
        b_amp=r0 * samples[:, 1],
        r0=r0,
        r_final=r0 * final[0],
        b_final=r0 * final[1],
        loss_r=e0 * final[2].real,
        loss_b=e0 * final[3].real,
        n_steps=int(n_steps),
    )


def release_budget(pulse: PumpPulse, params: DeviceParams) -> dict:
    """Energy split after the pulse, as fractions of the initial readout energy.

    Keys: ``remaining`` (left in the readout mode), ``internal_loss``
    (dissipated through ``kappa_r``), ``emitted`` (into the line through
    ``kappa_b``), ``buffer_residual`` (still in the buffer at window end).
    """
    traj = classical_release(1.0, pulse, params, times=())
    return {
        "remaining": abs(traj.r_final) ** 2,
        "internal_loss": traj.loss_r,
        "emitted": traj.loss_b,
        "buffer_residual": abs(traj.b_final) ** 2,
    }


def remaining_fraction(pulse: PumpPulse, params: DeviceParams) -> float:
    """``|r_final|^2 / |r0|^2``, in [0, 1]."""
    return float(min(1.0, max(0.0, release_budget(pulse, params)["remaining"])))


def release_efficiency(pulse: PumpPulse, params: DeviceParams) -> float:
    """Transmissivity of the equivalent loss channel: ``1 - remaining - internal loss``."""
    b = release_budget(pulse, params)
    return float(min(1.0, max(0.0, 1.0 - b["remaining"] - b["internal_loss"])))


def conversion_rate(g, kappa_b: float):
    """``(kappa_b/2) Re[1 - sqrt(1 - 16 g^2 / kappa_b^2)]``."""
    if kappa_b <= 0:
        raise ValidationError("kappa_b must be > 0")
    g = np.asarray(g, dtype=float)
    if np.any(g < 0):
        raise ValidationError("g must be >= 0")
    root = np.sqrt((1.0 - 16.0 * g**2 / kappa_b**2).astype(complex))
    out = 0.5 * kappa_b * np.real(1.0 - root)
    return out if out.ndim else float(out)


def coupling_ratio(pulse: PumpPulse, params: DeviceParams) -> float:
    return 4.0 * pulse.g_max / params.kappa_b


def in_validated_range(pulse: PumpPulse, params: DeviceParams) -> bool:
    """Whether ``4 g_max / kappa_b`` is within the range where the model is trusted."""
    return coupling_ratio(pulse, params) <= VALIDATED_COUPLING_RATIO


def buffer_output_envelope(traj: ModeTrajectory, params: DeviceParams) -> np.ndarray:
    """Output field ``sqrt(kappa_b) b(t)``."""
    return math.sqrt(params.kappa_b) * traj.b_amp


def release_state_map(state: ReadoutState, release_efficiency: float) -> ReadoutState:
    """The released propagating mode, modeled as a loss channel on the cavity state."""
    return apply_loss_channel(state, release_efficiency)


def fit_effective_release(sigmas: Sequence[float], fractions: Sequence[float],
                          g_max: float, params: DeviceParams) -> dict:
    """Least-squares effective ``(kappa_b, g_max)`` reproducing a remaining-fraction curve.

    Useful outside the validated coupling range, where the nominal
    parameters fail to describe measured fractions.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    fractions = np.asarray(fractions, dtype=float)
    if sigmas.shape != fractions.shape or sigmas.size < 2:
        raise ShapeMismatch("need at least two (sigma, fraction) pairs")

    def resid(x):
        kb, g = np.exp(x)
        p = params.with_(kappa_b=kb)
        return [remaining_fraction(PumpPulse(g, s), p) - f for s, f in zip(sigmas, fractions)]

    x0 = np.log([params.kappa_b, max(g_max, 1.0)])
    sol = least_squares(resid, x0, method="lm", xtol=1e-10, ftol=1e-10, max_nfev=500)
    if not sol.success:
        raise NonConvergence(sol.message)
    kb, g = np.exp(sol.x)
    return {"kappa_b_eff": float(kb), "g_max_eff": float(g), "rms_residual": float(
        np.sqrt(np.mean(sol.fun**2)))}
