"""Qubit-conditioned evolution of the readout mode during the interaction time."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InvalidTime, NumericDivergence, ValidationError
from .hilbert import FockOperator, ReadoutState

TWO_PI = 2.0 * math.pi
BRANCHES = ("g", "e")


@dataclass(frozen=True)
class DeviceParams:
    """Physical constants of the device, SI units with angular frequencies in rad/s.

    ``omega_q``, ``omega_r`` and ``omega_b`` are informational except that
    ``omega_q`` feeds the thermal-population temperature.
    """

    chi: float = TWO_PI * 2.05e6
    kerr_g: float = TWO_PI * 8.4e3
    kerr_e: float = TWO_PI * 37e3
    kappa_r: float = TWO_PI * 250e3
    kappa_b: float = TWO_PI * 21e6
    t1: float = 6.1e-6
    t2: float = 9.2e-6
    eta: float = 0.11
    if_freq: float = 50e6
    sample_rate: float = 1e9
    thermal_excitation: float = 0.008
    pi_pulse_fidelity: float = 0.995
    omega_q: float = TWO_PI * 4.45e9
    omega_r: float = TWO_PI * 3.73e9
    omega_b: float = TWO_PI * 10.22e9

    def __post_init__(self):
        for name in ("t1", "t2", "if_freq", "sample_rate", "omega_q", "omega_r", "omega_b"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be finite and > 0, got {v!r}")
        # zero mode losses are allowed for closed-system checks
        for name in ("kappa_r", "kappa_b"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {v!r}")
        # zero shifts are allowed so each Hamiltonian term can be isolated
        for name in ("chi", "kerr_g", "kerr_e"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {v!r}")
        if not (0.0 < self.eta <= 1.0):
            raise ValidationError(f"eta must lie in (0, 1], got {self.eta!r}")
        if self.t2 > 2.0 * self.t1 * (1 + 1e-12):
            raise ValidationError("t2 must not exceed 2*t1")
        if not (0.0 <= self.thermal_excitation < 1.0):
            raise ValidationError("thermal_excitation must lie in [0, 1)")
        if not (0.0 < self.pi_pulse_fidelity <= 1.0):
            raise ValidationError("pi_pulse_fidelity must lie in (0, 1]")

    def with_(self, **changes) -> "DeviceParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _check_branch(branch):
    if branch not in BRANCHES:
        raise ValidationError(f"branch must be 'g' or 'e', got {branch!r}")


def level_energies(branch: str, params: DeviceParams, dim: int) -> np.ndarray:
    """Diagonal of the interaction Hamiltonian (rad/s) in the frame of ``omega_r``."""
    _check_branch(branch)
    n = np.arange(dim, dtype=float)
    kerr_term = n * (n - 1.0)
    if branch == "g":
        return -params.kerr_g * kerr_term
    return -params.chi * n - params.kerr_e * kerr_term


def interaction_hamiltonian(branch: str, params: DeviceParams, dim: int) -> FockOperator:
    """``-K_g a^dag^2 a^2`` for g, ``-chi a^dag a - K_e a^dag^2 a^2`` for e."""
    return FockOperator(dim, np.diag(level_energies(branch, params, dim)).astype(complex), True)


def mean_field(state: ReadoutState) -> complex:
    """``<a>`` of the readout mode."""
    s = np.sqrt(np.arange(1, state.dim))
    if state.is_pure:
        v = state.data
        return complex(np.sum(np.conj(v[:-1]) * s * v[1:]))
    rho = state.data
    # Tr(rho a) = sum_n sqrt(n) rho[n, n-1]
    return complex(np.sum(s * np.diagonal(rho, offset=-1)))


def mean_photon_number(state: ReadoutState) -> float:
    return float(np.dot(np.arange(state.dim), state.populations()))


def _phase_evolve(state: ReadoutState, phases: np.ndarray, branch) -> ReadoutState:
    u = np.exp(-1j * phases)
    if state.is_pure:
        return ReadoutState(state.dim, "pure", u * state.data, branch)
    return ReadoutState(state.dim, "mixed", np.outer(u, u.conj()) * state.data, branch)


def _lindblad_generator(energies, kappa, dim):
    """Diagonal part ``L[m, n]`` of the master equation and the jump coupling."""
    de = energies[:, None] - energies[None, :]
    n = np.arange(dim, dtype=float)
    diag = -1j * de - 0.5 * kappa * (n[:, None] + n[None, :])
    jump = kappa * np.sqrt(np.outer(n[1:], n[1:]))
    return diag, jump


def lindblad_evolve(state: ReadoutState, energies: np.ndarray, kappa: float, t: float,
                    branch=None, method: str = "DOP853", atol: float = 1e-13,
                    rtol: float = 1e-10) -> ReadoutState:
    """Integrate the master equation with diagonal H and collapse ``sqrt(kappa) a``.

    ``rho[m, n] = exp(L[m, n] t) x[m, n]`` removes the Hamiltonian and the
    no-jump damping, so the integrator only sees the jump term
    ``kappa sqrt((m+1)(n+1)) rho[m+1, n+1]``; with ``kappa = 0`` the result
    is the exact unitary.
    """
    dim = state.dim
    rho0 = state.density_matrix()
    if t == 0:
        return ReadoutState(dim, "mixed", rho0, branch)
    diag, jump = _lindblad_generator(np.asarray(energies, dtype=float), kappa, dim)
    if kappa == 0:
        return ReadoutState(dim, "mixed", np.exp(diag * t) * rho0, branch)
    # exponent difference between element (m+1, n+1) and (m, n)
    shift = diag[1:, 1:] - diag[:-1, :-1]

    def rhs(tt, y):
        x = y.view(complex).reshape(dim, dim)
        out = np.zeros_like(x)
        out[:-1, :-1] = jump * np.exp(shift * tt) * x[1:, 1:]
        return out.reshape(-1).view(float)

    y0 = np.ascontiguousarray(rho0).reshape(-1).view(float).copy()
    sol = solve_ivp(rhs, (0.0, t), y0, method=method, atol=atol, rtol=rtol)
    if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
        raise NumericDivergence(f"master-equation integration failed: {sol.message}")
    x = sol.y[:, -1].copy().view(complex).reshape(dim, dim)
    rho = np.exp(diag * t) * x
    rho = 0.5 * (rho + rho.conj().T)
    return ReadoutState(dim, "mixed", rho, branch)


def evolve_interaction(state: ReadoutState, branch: str, t_int: float,
                       params: DeviceParams, include_decay: bool = False) -> ReadoutState:
    """Propagate the readout mode for ``t_int`` with the qubit in ``branch``.

    Without decay the Hamiltonian is diagonal so each Fock amplitude just
    picks up a phase.  With ``include_decay`` the master equation with
    collapse operator ``sqrt(kappa_r) a`` is integrated instead.
    """
    _check_branch(branch)
    if not (math.isfinite(t_int) and t_int >= 0):
        raise InvalidTime(f"t_int must be >= 0, got {t_int!r}")
    energies = level_energies(branch, params, state.dim)
    if include_decay:
        return lindblad_evolve(state, energies, params.kappa_r, t_int, branch)
    return _phase_evolve(state, energies * t_int, branch)


def evolve_with_jump(state: ReadoutState, t_excited: float, t_ground: float,
                     params: DeviceParams) -> ReadoutState:
    """Evolve with the qubit in e for ``t_excited`` then in g for ``t_ground``.

    Models a qubit relaxation event during the interaction.  The two
    Hamiltonians commute so only the durations matter.
    """
    if t_excited < 0 or t_ground < 0:
        raise InvalidTime("durations must be >= 0")
    dim = state.dim
    phases = (level_energies("e", params, dim) * t_excited
              + level_energies("g", params, dim) * t_ground)
    return _phase_evolve(state, phases, "g" if t_ground > 0 else "e")


def evolve_branches(state: ReadoutState, t_int: float, params: DeviceParams,
                    include_decay: bool = False) -> dict:
    """Both conditional states as a ``{"g": ..., "e": ...}`` pair."""
    return {b: evolve_interaction(state, b, t_int, params, include_decay) for b in BRANCHES}


def sample_decay_times(rng: np.random.Generator, t1: float, size) -> np.ndarray:
    """Exponentially distributed qubit relaxation times."""
    return rng.exponential(t1, size=size)


def rotation_rate(branch: str, params: DeviceParams, nbar: float) -> float:
    """Mean-field angular velocity of ``<a>`` (rad/s) at photon number ``nbar``.

    Positive values rotate ``<a>`` counter-clockwise.
    """
    _check_branch(branch)
    if branch == "g":
        return 2.0 * params.kerr_g * nbar
    return params.chi + 2.0 * params.kerr_e * nbar
