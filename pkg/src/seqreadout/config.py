"""Experiment configuration: flat ``section.key_unit = value`` text files.

Lines are ``key = value``; ``#`` starts a comment.  Physical quantities
are SI and carry their unit in the key name, e.g.
``device.chi_rad_per_s = 1.2880529879718151e7``.  Lists are comma
separated, complex numbers use Python syntax (``5.8+0.5j``) and booleans
are ``true``/``false``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Tuple

from .dynamics import DeviceParams
from .errors import ConfigError, SeqReadoutError
from .hilbert import DEFAULT_DIM
from .release import PumpPulse

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a CLI command needs, with the device defaults built in."""

    device: DeviceParams = field(default_factory=DeviceParams)
    pulse: PumpPulse = field(default_factory=lambda: PumpPulse(TWO_PI * 7.2e6, 28e-9))
    alpha0: complex = 5.8 + 0j
    t_int: float = 100e-9
    n_runs: int = 100_000
    seed: int = 1234
    truncation: int = DEFAULT_DIM
    measurement_path: str = "direct"
    output_dir: str = "out"
    # imperfection model
    t_load: float = 10e-9
    include_thermal: bool = True
    include_pulse_error: bool = True
    include_t1: bool = True
    include_cavity_decay: bool = False
    n_tau_bins: int = 64
    husimi_grid: int = 401
    # discrimination
    hist_bins: int = 200
    hist_half_width: Optional[float] = None
    p_demolition: float = 0.0
    qnd_gap: float = 220e-9
    # sweep
    sweep_alpha0: Tuple[float, ...] = (2.1, 4.0, 5.8, 8.5)
    sweep_t_int: Tuple[float, ...] = tuple(round(i * 40e-9, 15) for i in range(8))
    sweep_n_runs: int = 20_000
    sweep_bins: int = 50
    sweep_tau_bins: int = 8
    sweep_husimi_grid: int = 201
    # release study
    release_sigma: Tuple[float, ...] = (5e-9, 10e-9, 15e-9, 20e-9, 28e-9, 40e-9, 60e-9, 100e-9)
    release_g_max: Tuple[float, ...] = (0.0, TWO_PI * 5e6, TWO_PI * 7.2e6)
    release_refit: bool = False
    # tomography
    wigner_half_width: float = 8.0
    wigner_points: int = 80
    wigner_t_int: Tuple[float, ...] = (0.0, 100e-9)
    wigner_mode: str = "direct"
    wigner_shots: int = 5000
    wigner_delay: float = 0.0
    wigner_rotation_g: float = 0.0
    wigner_rotation_e: float = 0.0
    # calibration
    calib_decay_csv: Optional[str] = None
    calib_detuning_csv: Optional[str] = None
    calib_populations: Tuple[float, ...] = (0.992, 0.008, 0.0)
    n_crit: Optional[float] = None

    def __post_init__(self):
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        if self.measurement_path not in ("direct", "trace"):
            raise ConfigError("measurement_path must be 'direct' or 'trace'")
        if self.wigner_mode not in ("direct", "protocol", "both"):
            raise ConfigError("wigner_mode must be direct, protocol or both")
        if abs(self.alpha0) ** 2 > self.truncation / 3.0:
            raise ConfigError(f"|alpha0|^2 exceeds truncation/3 = {self.truncation / 3:.4g}")
        if self.t_int < 0 or self.t_load < 0:
            raise ConfigError("times must be >= 0")
        if min(self.n_tau_bins, self.sweep_tau_bins) < 1 or self.hist_bins < 2 or self.sweep_bins < 2:
            raise ConfigError("bin counts too small")
        if min(self.husimi_grid, self.sweep_husimi_grid) < 51:
            raise ConfigError("Husimi grids need at least 51 points")


def _f(s):
    return float(s)


def _i(s):
    try:
        return int(s)
    except ValueError:
        pass
    # accept float spellings such as 1e5, but only when exact
    v = float(s)
    if not v.is_integer() or abs(v) > 2**53:
        raise ValueError(f"not an integer: {s}")
    return int(v)


def _c(s):
    return complex(s.replace(" ", ""))


def _b(s):
    t = s.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s}")


def _s(s):
    return s.strip()


def _opt(conv):
    def parse(s):
        return None if s.strip().lower() in ("", "none") else conv(s)
    return parse


def _list(conv):
    def parse(s):
        return tuple(conv(p) for p in s.split(",") if p.strip())
    return parse


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        return repr(v).strip("()")
    if v is None:
        return "none"
    return str(v)


# config key -> (target, attribute, parser)
_DEVICE_KEYS = {
    "device.chi_rad_per_s": "chi",
    "device.kerr_g_rad_per_s": "kerr_g",
    "device.kerr_e_rad_per_s": "kerr_e",
    "device.kappa_r_per_s": "kappa_r",
    "device.kappa_b_per_s": "kappa_b",
    "device.t1_s": "t1",
    "device.t2_s": "t2",
    "device.eta": "eta",
    "device.if_freq_hz": "if_freq",
    "device.sample_rate_hz": "sample_rate",
    "device.thermal_excitation": "thermal_excitation",
    "device.pi_pulse_fidelity": "pi_pulse_fidelity",
    "device.omega_q_rad_per_s": "omega_q",
    "device.omega_r_rad_per_s": "omega_r",
    "device.omega_b_rad_per_s": "omega_b",
}
_PULSE_KEYS = {
    "pulse.g_max_rad_per_s": ("g_max", _f),
    "pulse.sigma_s": ("sigma", _f),
    "pulse.window_s": ("window", _opt(_f)),
    "pulse.t0_s": ("t0", _f),
}
_TOP_KEYS = {
    "readout.alpha0": ("alpha0", _c),
    "readout.t_int_s": ("t_int", _f),
    "readout.t_load_s": ("t_load", _f),
    "readout.measurement_path": ("measurement_path", _s),
    "readout.include_thermal": ("include_thermal", _b),
    "readout.include_pulse_error": ("include_pulse_error", _b),
    "readout.include_t1": ("include_t1", _b),
    "readout.include_cavity_decay": ("include_cavity_decay", _b),
    "readout.n_tau_bins": ("n_tau_bins", _i),
    "readout.husimi_grid": ("husimi_grid", _i),
    "readout.hist_bins": ("hist_bins", _i),
    "readout.hist_half_width": ("hist_half_width", _opt(_f)),
    "readout.p_demolition": ("p_demolition", _f),
    "readout.qnd_gap_s": ("qnd_gap", _f),
    "run.n_runs": ("n_runs", _i),
    "run.seed": ("seed", _i),
    "run.truncation": ("truncation", _i),
    "run.output_dir": ("output_dir", _s),
    "sweep.alpha0_list": ("sweep_alpha0", _list(_f)),
    "sweep.t_int_list_s": ("sweep_t_int", _list(_f)),
    "sweep.n_runs": ("sweep_n_runs", _i),
    "sweep.hist_bins": ("sweep_bins", _i),
    "sweep.n_tau_bins": ("sweep_tau_bins", _i),
    "sweep.husimi_grid": ("sweep_husimi_grid", _i),
    "release.sigma_list_s": ("release_sigma", _list(_f)),
    "release.g_max_list_rad_per_s": ("release_g_max", _list(_f)),
    "release.refit": ("release_refit", _b),
    "wigner.half_width": ("wigner_half_width", _f),
    "wigner.points": ("wigner_points", _i),
    "wigner.t_int_list_s": ("wigner_t_int", _list(_f)),
    "wigner.mode": ("wigner_mode", _s),
    "wigner.shots": ("wigner_shots", _i),
    "wigner.delay_s": ("wigner_delay", _f),
    "wigner.rotation_g_rad": ("wigner_rotation_g", _f),
    "wigner.rotation_e_rad": ("wigner_rotation_e", _f),
    "calibration.decay_csv": ("calib_decay_csv", _opt(_s)),
    "calibration.detuning_csv": ("calib_detuning_csv", _opt(_s)),
    "calibration.populations": ("calib_populations", _list(_f)),
    "calibration.n_crit": ("n_crit", _opt(_f)),
}
KNOWN_KEYS = tuple(_DEVICE_KEYS) + tuple(_PULSE_KEYS) + tuple(_TOP_KEYS)


def parse_lines(text: str) -> dict:
    """Raw ``key -> value string`` mapping; rejects duplicates and malformed lines."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def from_mapping(raw: dict, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    base = base or ExperimentConfig()
    dev, pulse, top = {}, {}, {}
    for key, value in raw.items():
        try:
            if key in _DEVICE_KEYS:
                dev[_DEVICE_KEYS[key]] = _f(value)
            elif key in _PULSE_KEYS:
                name, conv = _PULSE_KEYS[key]
                pulse[name] = conv(value)
            elif key in _TOP_KEYS:
                name, conv = _TOP_KEYS[key]
                top[name] = conv(value)
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
    try:
        device = replace(base.device, **dev)
        p = base.pulse
        if "sigma" in pulse and "window" not in pulse:
            pulse["window"] = None  # keep the 8 sigma default tied to sigma
        pulse_obj = PumpPulse(**{**{"g_max": p.g_max, "sigma": p.sigma, "window": p.window,
                                    "t0": p.t0}, **pulse})
        return replace(base, device=device, pulse=pulse_obj, **top)
    except ConfigError:
        raise
    except (SeqReadoutError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def loads(text: str) -> ExperimentConfig:
    return from_mapping(parse_lines(text))


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text)


def dumps(cfg: ExperimentConfig) -> str:
    """Serialize every key; ``loads(dumps(cfg)) == cfg``."""
    lines = []
    for key, attr in _DEVICE_KEYS.items():
        lines.append(f"{key} = {_fmt(getattr(cfg.device, attr))}")
    for key, (attr, _) in _PULSE_KEYS.items():
        lines.append(f"{key} = {_fmt(getattr(cfg.pulse, attr))}")
    for key, (attr, _) in _TOP_KEYS.items():
        lines.append(f"{key} = {_fmt(getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"


def config_fields() -> tuple:
    return tuple(f.name for f in fields(ExperimentConfig))
