"""Truncated Fock-space linear algebra for a single bosonic mode."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from .errors import InvalidDimension, InvalidEfficiency, TruncationOverflow, ValidationError

DEFAULT_DIM = 150
HERMITIAN_TOL = 1e-12
STATE_TOL = 1e-9


def _check_dim(dim) -> int:
    if int(dim) != dim or dim < 2:
        raise InvalidDimension(f"dim must be an integer >= 2, got {dim!r}")
    return int(dim)


def _check_truncation(alpha: complex, dim: int) -> None:
    if abs(alpha) ** 2 > dim / 3.0:
        raise TruncationOverflow(
            f"|alpha|^2 = {abs(alpha) ** 2:.4g} exceeds dim/3 = {dim / 3:.4g}"
        )


@dataclass(frozen=True)
class FockOperator:
    """Dense operator on the first ``dim`` Fock levels.

    Parameters
    ----------
    dim : int
        Truncation, at least 2.
    entries : ndarray
        ``(dim, dim)`` complex matrix.
    hermitian : bool
        If set, ``entries`` is checked against its conjugate transpose.
    """

    dim: int
    entries: np.ndarray = field(repr=False)
    hermitian: bool = False

    def __post_init__(self):
        _check_dim(self.dim)
        m = np.array(self.entries, dtype=complex)
        if m.shape != (self.dim, self.dim):
            raise InvalidDimension(f"entries shape {m.shape} != ({self.dim}, {self.dim})")
        if self.hermitian and np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ValidationError("operator flagged hermitian is not")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        if other.dim != self.dim:
            raise InvalidDimension("dimension mismatch")
        return FockOperator(self.dim, self.entries @ other.entries)

    def dag(self) -> "FockOperator":
        return FockOperator(self.dim, self.entries.conj().T, self.hermitian)


@dataclass(frozen=True)
class ReadoutState:
    """State of the readout mode, pure or mixed, with an optional qubit label.

    ``data`` is the state vector when ``kind == "pure"`` and the density
    matrix when ``kind == "mixed"``.
    """

    dim: int
    kind: str
    data: np.ndarray = field(repr=False)
    qubit_branch: Optional[str] = None

    def __post_init__(self):
        _check_dim(self.dim)
        if self.kind not in ("pure", "mixed"):
            raise ValidationError(f"kind must be 'pure' or 'mixed', got {self.kind!r}")
        if self.qubit_branch not in (None, "g", "e"):
            raise ValidationError(f"qubit_branch must be g, e or None, got {self.qubit_branch!r}")
        d = np.array(self.data, dtype=complex)
        if self.kind == "pure":
            if d.shape != (self.dim,):
                raise InvalidDimension(f"state vector shape {d.shape} != ({self.dim},)")
            norm = np.vdot(d, d).real
            if abs(norm - 1.0) > STATE_TOL:
                raise ValidationError(f"state vector norm^2 = {norm!r}, expected 1")
        else:
            if d.shape != (self.dim, self.dim):
                raise InvalidDimension(f"density matrix shape {d.shape} != ({self.dim}, {self.dim})")
            tr = np.trace(d).real
            if abs(tr - 1.0) > STATE_TOL:
                raise ValidationError(f"trace = {tr!r}, expected 1")
            if np.max(np.abs(d - d.conj().T)) > STATE_TOL:
                raise ValidationError("density matrix is not hermitian")
            if np.linalg.eigvalsh(0.5 * (d + d.conj().T)).min() < -STATE_TOL:
                raise ValidationError("density matrix has negative eigenvalues")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def is_pure(self) -> bool:
        return self.kind == "pure"

    def density_matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def populations(self) -> np.ndarray:
        if self.is_pure:
            return np.abs(self.data) ** 2
        return np.real(np.diag(self.data)).copy()

    def with_branch(self, branch: Optional[str]) -> "ReadoutState":
        return ReadoutState(self.dim, self.kind, self.data, branch)


def fock_state(n: int, dim: int, qubit_branch=None) -> ReadoutState:
    dim = _check_dim(dim)
    if not 0 <= n < dim:
        raise InvalidDimension(f"Fock level {n} outside truncation {dim}")
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return ReadoutState(dim, "pure", v, qubit_branch)


def annihilation_operator(dim: int) -> FockOperator:
    """Ladder operator with ``a[n-1, n] = sqrt(n)``."""
    dim = _check_dim(dim)
    return FockOperator(dim, np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex))


def number_operator(dim: int) -> FockOperator:
    dim = _check_dim(dim)
    return FockOperator(dim, np.diag(np.arange(dim, dtype=float)).astype(complex), True)


def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Fock amplitudes of a coherent state, renormalized on the truncation."""
    n = np.arange(dim)
    if alpha == 0:
        v = np.zeros(dim, dtype=complex)
        v[0] = 1.0
        return v
    # log-space avoids overflow of alpha**n / sqrt(n!) at large n
    logmag = n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1) - 0.5 * abs(alpha) ** 2
    v = np.exp(logmag) * np.exp(1j * n * np.angle(alpha))
    return v / np.linalg.norm(v)


def coherent_state(alpha: complex, dim: int = DEFAULT_DIM) -> ReadoutState:
    """Coherent state ``|alpha>`` on ``dim`` levels.

    Raises
    ------
    TruncationOverflow
        If ``|alpha|^2 > dim/3``.
    """
    dim = _check_dim(dim)
    alpha = complex(alpha)
    _check_truncation(alpha, dim)
    return ReadoutState(dim, "pure", coherent_amplitudes(alpha, dim))


def displacement_operator(alpha: complex, dim: int = DEFAULT_DIM) -> FockOperator:
    """``D(alpha) = exp(alpha a^dag - alpha^* a)`` by scaling-and-squaring Pade."""
    dim = _check_dim(dim)
    alpha = complex(alpha)
    _check_truncation(alpha, dim)
    a = annihilation_operator(dim).entries
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return FockOperator(dim, expm(gen))


def expectation(state: ReadoutState, op: FockOperator) -> complex:
    if op.dim != state.dim:
        raise InvalidDimension("operator and state dimensions differ")
    if state.is_pure:
        return complex(np.vdot(state.data, op.entries @ state.data))
    return complex(np.trace(state.data @ op.entries))


def parity_expectation(state: ReadoutState) -> float:
    """``sum_n (-1)^n p_n``."""
    p = state.populations()
    signs = 1.0 - 2.0 * (np.arange(state.dim) % 2)
    return float(np.clip(np.dot(signs, p), -1.0, 1.0))


def loss_kraus_weights(eta: float, dim: int) -> np.ndarray:
    """``e[k, n] = sqrt(C(n, k) eta^(n-k) (1-eta)^k)`` for ``n >= k``, else 0.

    The k-th Kraus operator of the pure-loss channel is
    ``sum_n e[k, n] |n-k><n|``.
    """
    n = np.arange(dim)
    k = n[:, None]
    out = np.zeros((dim, dim))
    mask = n[None, :] >= k
    nn, kk = np.broadcast_arrays(n[None, :], k)
    nn, kk = nn[mask], kk[mask]
    logc = gammaln(nn + 1) - gammaln(kk + 1) - gammaln(nn - kk + 1)
    with np.errstate(divide="ignore"):
        log_eta = math.log(eta)
        log_loss = math.log1p(-eta) if eta < 1 else -np.inf
    logw = logc + (nn - kk) * log_eta
    # 0 * -inf would give nan when eta == 1 and k == 0
    with np.errstate(invalid="ignore"):
        logw = logw + np.where(kk > 0, kk * log_loss, 0.0)
    out[mask] = np.exp(0.5 * logw)
    return out


def apply_loss_channel(state: ReadoutState, eta: float) -> ReadoutState:
    """Pure-loss channel of transmissivity ``eta``; always returns a mixed state.

    All ``dim`` Kraus terms are summed, which is exact on the truncated
    space and preserves the trace for any ``eta``.
    """
    if not (0.0 < eta <= 1.0):
        raise InvalidEfficiency(f"eta must lie in (0, 1], got {eta!r}")
    rho = state.density_matrix()
    dim = state.dim
    if eta == 1.0:
        return ReadoutState(dim, "mixed", rho, state.qubit_branch)
    e = loss_kraus_weights(eta, dim)
    out = np.zeros_like(rho)
    for k in range(dim):
        ek = e[k, k:]
        if not ek.any():
            break
        out[: dim - k, : dim - k] += np.outer(ek, ek) * rho[k:, k:]
    out = 0.5 * (out + out.conj().T)
    return ReadoutState(dim, "mixed", out, state.qubit_branch)


def state_fidelity(pure: ReadoutState, other: ReadoutState) -> float:
    """``<psi|rho|psi>`` with ``pure`` supplying ``psi``."""
    if not pure.is_pure:
        raise ValidationError("first argument must be a pure state")
    psi = pure.data
    if other.is_pure:
        return float(abs(np.vdot(psi, other.data)) ** 2)
    return float(np.vdot(psi, other.data @ psi).real)
