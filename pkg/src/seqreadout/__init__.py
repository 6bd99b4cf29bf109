"""Sequential dispersive qubit readout simulator.

The pipeline loads a coherent probe into a high-Q readout mode, lets it
acquire a qubit-dependent phase (with Kerr distortion), releases it through
a low-Q buffer mode, demodulates the heterodyne record and classifies the
complex amplitude.  Submodules:

``hilbert``        truncated Fock space, states, loss channel
``dynamics``       interaction Hamiltonian and Lindblad evolution
``release``        pumped beam-splitter release of the probe
``signal``         trace synthesis, weight functions, demodulation
``discrimination`` histograms, overlap, decision region, error budget
``tomography``     Wigner maps, direct and via parity measurement
``calibration``    photon-number, dispersive/Kerr, pulse and thermal fits
``experiments``    end-to-end drivers used by the command line
"""
from ._kernels import BACKEND_NAME as KERNEL_BACKEND
from .config import ExperimentConfig
from .dynamics import DeviceParams
from .errors import ConfigError, NumericError, SeqReadoutError, ValidationError
from .hilbert import ReadoutState, coherent_state, fock_state
from .release import PumpPulse

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DeviceParams",
    "ExperimentConfig",
    "KERNEL_BACKEND",
    "NumericError",
    "PumpPulse",
    "ReadoutState",
    "SeqReadoutError",
    "ValidationError",
    "coherent_state",
    "fock_state",
]
