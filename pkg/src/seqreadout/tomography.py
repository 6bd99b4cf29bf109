"""Wigner function of the readout mode, direct and via the parity-measurement protocol."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import _kernels
from .dynamics import DeviceParams, evolve_interaction
from .errors import InvalidProtocol, TruncationOverflow, ValidationError
from .hilbert import ReadoutState, coherent_state, displacement_operator, parity_expectation

W_MAX = 2.0 / math.pi


@dataclass(frozen=True)
class WignerMap:
    """Wigner values on a rectangular grid ``alphas[i, j] = x[i] + 1j * y[j]``.

    ``stderr`` holds the per-pixel standard error of sampled maps.
    """

    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    rotation_applied: float = 0.0
    stderr: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (x.size, y.size):
            raise ValidationError("values shape must be (len(x), len(y))")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "values", v)

    @property
    def alphas(self) -> np.ndarray:
        return self.x[:, None] + 1j * self.y[None, :]

    @property
    def cell_area(self) -> float:
        return float((self.x[1] - self.x[0]) * (self.y[1] - self.y[0]))

    def integral(self) -> float:
        """Riemann sum of the map."""
        return float(self.values.sum() * self.cell_area)

    def peak(self) -> complex:
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return complex(self.x[i], self.y[j])


def wigner_grid(half_width: float = 8.0, n: int = 80) -> Tuple[np.ndarray, np.ndarray]:
    """Square grid of ``n x n`` points on ``[-half_width, half_width]^2``."""
    axis = np.linspace(-half_width, half_width, n)
    return axis, axis.copy()


def _axes(grid):
    if grid is None:
        grid = wigner_grid()
    x, y = grid
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def wigner_direct(state: ReadoutState, grid=None, method: str = "iterative") -> WignerMap:
    """``W(alpha) = (2/pi) Tr[D(-alpha) rho D(alpha) P]`` with ``P`` the parity.

    ``method="iterative"`` evaluates the series over matrix elements, which is
    exact for the truncated state at any ``alpha``.  ``method="parity"``
    builds the displaced state with a truncated displacement operator and so
    raises :class:`TruncationOverflow` beyond ``|alpha|^2 > dim/3``.
    """
    x, y = _axes(grid)
    alphas = x[:, None] + 1j * y[None, :]
    if method == "iterative":
        vals = _kernels.wigner_iterative(state.density_matrix(), alphas.ravel())
    elif method == "parity":
        edge = np.max(np.abs(alphas)) ** 2
        if edge > state.dim / 3.0:
            raise TruncationOverflow(f"grid reaches |alpha|^2 = {edge:.3g} > dim/3")
        rho = state.density_matrix()
        vals = np.empty(alphas.size)
        for k, a in enumerate(alphas.ravel()):
            d = displacement_operator(-a, state.dim).entries
            r = d @ rho @ d.conj().T
            vals[k] = W_MAX * parity_expectation(
                ReadoutState(state.dim, "mixed", 0.5 * (r + r.conj().T) / np.trace(r).real))
    else:
        raise ValidationError(f"unknown method {method!r}")
    return WignerMap(x, y, np.asarray(vals).reshape(alphas.shape))


def ramsey_excited_probability(parity, second_pulse: int, qubit_start: str = "g"):
    """Probability of finding the qubit in e after the parity-mapping Ramsey sequence.

    Two pi/2 pulses separated by ``pi/chi``; ``second_pulse`` = +1 or -1
    selects the relative phase of the second pulse.  A qubit starting in
    e inverts the contrast.
    """
    if second_pulse not in (1, -1):
        raise InvalidProtocol("second_pulse must be +1 or -1")
    sign = 1.0 if qubit_start == "g" else -1.0
    return 0.5 * (1.0 + second_pulse * sign * np.asarray(parity))


def wigner_protocol_sim(initial: complex, branch: str, t_int: float, params: DeviceParams,
                        grid=None, n_shots: int = 5000,
                        rng: Optional[np.random.Generator] = None, mode: str = "sampled",
                        dim: int = 150, delay: float = 0.0,
                        readout_errors: Tuple[float, float] = (0.0, 0.0),
                        qubit_start: Optional[str] = None,
                        take_opposite: bool = False) -> WignerMap:
    """Simulate Wigner tomography by displaced parity measurement with the qubit.

    The readout mode is prepared in ``|initial>``, evolves for ``t_int``
    (plus ``delay`` standing for the displacement pulse duration) with the
    qubit in ``branch``, and is displaced by ``-alpha``.  A Ramsey sequence
    with delay ``pi/chi`` under the dispersive coupling maps the photon
    parity onto the qubit.  Both second-pulse phases are measured with
    ``n_shots/2`` shots each and subtracted.

    Parameters
    ----------
    mode : {"sampled", "exact"}
        Shot sampling, or exact outcome probabilities.
    readout_errors : (E_g, E_e)
        Probabilities of reading e when g and g when e.  The contrast is
        corrected by ``1 - E_g - E_e``.
    qubit_start : {"g", "e"}, optional
        Qubit state at the start of the Ramsey sequence; defaults to ``branch``.
    take_opposite : bool
        Negate the result, undoing the inversion of a qubit starting in e.
    """
    if mode not in ("sampled", "exact"):
        raise ValidationError(f"mode must be 'sampled' or 'exact', got {mode!r}")
    if mode == "sampled":
        if n_shots < 100:
            raise InvalidProtocol("n_shots must be >= 100")
        if rng is None:
            raise ValidationError("sampled mode needs a random generator")
    qubit_start = branch if qubit_start is None else qubit_start
    eg, ee = readout_errors
    contrast = 1.0 - eg - ee
    if contrast <= 0:
        raise InvalidProtocol("readout errors leave no contrast")
    state = evolve_interaction(coherent_state(initial, dim), branch, t_int + delay, params)
    x, y = _axes(grid)
    alphas = x[:, None] + 1j * y[None, :]
    # displaced parity <D(-a) rho D(a) P> equals (pi/2) W(a)
    parity = np.clip(
        _kernels.wigner_iterative(state.density_matrix(), alphas.ravel()) / W_MAX, -1.0, 1.0)
    p_plus = ramsey_excited_probability(parity, +1, qubit_start)
    p_minus = ramsey_excited_probability(parity, -1, qubit_start)
    # apparent e probability through an imperfect readout
    r_plus = eg + contrast * p_plus
    r_minus = eg + contrast * p_minus
    stderr = None
    if mode == "exact":
        diff = r_plus - r_minus
    else:
        n_half = n_shots // 2
        f_plus = rng.binomial(n_half, r_plus) / n_half
        f_minus = rng.binomial(n_half, r_minus) / n_half
        diff = f_plus - f_minus
        var = (r_plus * (1 - r_plus) + r_minus * (1 - r_minus)) / n_half
        stderr = (W_MAX * np.sqrt(var) / contrast).reshape(alphas.shape)
    vals = W_MAX * diff / contrast
    if take_opposite:
        vals = -vals
    return WignerMap(x, y, vals.reshape(alphas.shape), 0.0, stderr)


def rotate_phase_space(wmap: WignerMap, angle: float) -> WignerMap:
    """Rotate the map by ``angle`` about the origin, resampling bilinearly.

    A feature at ``a`` moves to ``a * exp(1j * angle)``; points that come
    from outside the grid are set to zero.
    """
    if angle == 0:
        return WignerMap(wmap.x, wmap.y, wmap.values.copy(), wmap.rotation_applied, wmap.stderr)
    interp = RegularGridInterpolator((wmap.x, wmap.y), wmap.values, method="linear",
                                     bounds_error=False, fill_value=0.0)
    src = wmap.alphas * np.exp(-1j * angle)
    # snap round-off so points on the grid edge are not treated as outside
    sx = np.clip(src.real, wmap.x[0], wmap.x[-1])
    sy = np.clip(src.imag, wmap.y[0], wmap.y[-1])
    tol = 1e-9 * max(abs(wmap.x[0]), abs(wmap.x[-1]), 1.0)
    inside = ((src.real >= wmap.x[0] - tol) & (src.real <= wmap.x[-1] + tol)
              & (src.imag >= wmap.y[0] - tol) & (src.imag <= wmap.y[-1] + tol))
    vals = np.where(inside, interp(np.stack([sx, sy], axis=-1)), 0.0)
    return WignerMap(wmap.x, wmap.y, vals, wmap.rotation_applied + angle, None)
