"""End-to-end experiments: readout statistics, overlap sweeps, release study, Wigner maps."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence

import numpy as np

from .config import ExperimentConfig
from .discrimination import (
    AmplitudeHistogram,
    DecisionRegion,
    ReadoutReport,
    decision_region,
    default_half_width,
    error_budget,
    error_rates,
    histogram2d,
    overlap,
    qnd_probability,
    simulate_sequential_readouts,
    uniform_edges,
)
from .dynamics import (
    DeviceParams,
    evolve_with_jump,
    lindblad_evolve,
    level_energies,
    mean_field,
)
from .hilbert import ReadoutState, coherent_state
from .release import (
    PumpPulse,
    classical_release,
    fit_effective_release,
    in_validated_range,
    release_budget,
)
from .signal import (
    CalibratedChain,
    HusimiSampler,
    TraceChain,
    calibrate_chain,
    heterodyne_noise,
    sample_beta_trace,
)
from .tomography import WignerMap, rotate_phase_space, wigner_direct, wigner_protocol_sim

logger = logging.getLogger(__name__)

# independent random streams derived from the run seed
STREAM_G, STREAM_E, STREAM_QND, STREAM_CHAIN = 0, 1, 2, 3


def streams(seed: int, n: int = 4):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


@dataclass
class PreparationRuns:
    """Per-run outcome of one preparation: measured beta, error cause, events."""

    prepared: str
    beta: np.ndarray
    cause: np.ndarray
    thermal: np.ndarray
    pulse_failed: np.ndarray
    decayed: np.ndarray


@dataclass
class StateBank:
    """Interaction-time states and their Husimi samplers, keyed by time spent in e."""

    cfg: ExperimentConfig
    initial: ReadoutState = field(init=False)
    _samplers: Dict[float, HusimiSampler] = field(default_factory=dict, init=False)

    def __post_init__(self):
        self.initial = coherent_state(self.cfg.alpha0, self.cfg.truncation)

    def state(self, t_excited: float) -> ReadoutState:
        cfg, p = self.cfg, self.cfg.device
        t_ground = cfg.t_int - t_excited
        if not cfg.include_cavity_decay:
            return evolve_with_jump(self.initial, t_excited, t_ground, p)
        dim = self.initial.dim
        s = lindblad_evolve(self.initial, level_energies("e", p, dim), p.kappa_r, t_excited, "e")
        return lindblad_evolve(s, level_energies("g", p, dim), p.kappa_r, t_ground, "g")

    def sampler(self, t_excited: float) -> HusimiSampler:
        key = float(t_excited)
        if key not in self._samplers:
            self._samplers[key] = HusimiSampler.from_state(self.state(key), self.cfg.husimi_grid)
        return self._samplers[key]


def _excited_time(cfg: ExperimentConfig, excited, tau):
    """Time the qubit spends in e during the interaction, binned for decays.

    ``tau`` counts from the start of the load; a decay inside the
    interaction is snapped to the center of one of ``n_tau_bins`` bins.
    """
    t_int, t_load = cfg.t_int, cfg.t_load
    decayed = excited & (tau < t_load + t_int)
    t_e = np.where(excited, t_int, 0.0)
    inside = decayed & (tau > t_load)
    if t_int > 0 and np.any(inside):
        width = t_int / cfg.n_tau_bins
        k = np.minimum(np.floor((tau[inside] - t_load) / width), cfg.n_tau_bins - 1)
        t_e[inside] = (k + 0.5) * width
    t_e[decayed & ~inside] = 0.0
    return t_e, decayed


def simulate_preparation(cfg: ExperimentConfig, prepared: str, n: int,
                         rng: np.random.Generator, bank: StateBank,
                         chain: Optional[CalibratedChain] = None) -> PreparationRuns:
    """Sample imperfection events, evolve and measure ``n`` runs of one preparation.

    The qubit is thermally excited with probability ``thermal_excitation``
    before the preparation pulse; the pi pulse of the e preparation fails
    with probability ``1 - pi_pulse_fidelity``.  An excited qubit relaxes
    after an exponential time of mean ``t1`` counted from the start of the
    load.
    """
    p = cfg.device
    u = rng.random((2, n))
    tau = rng.exponential(p.t1, size=n)
    thermal = (u[0] < p.thermal_excitation) if cfg.include_thermal else np.zeros(n, bool)
    if prepared == "g":
        failed = np.zeros(n, bool)
        excited = thermal.copy()
    else:
        failed = (u[1] > p.pi_pulse_fidelity) if cfg.include_pulse_error else np.zeros(n, bool)
        excited = thermal == failed
    if not cfg.include_t1:
        tau = np.full(n, np.inf)
    t_e, decayed = _excited_time(cfg, excited, tau)
    cause = np.full(n, "separation", dtype=object)
    cause[decayed] = "t1_decay"
    cause[failed & ~thermal] = "pulse"
    cause[thermal & ~failed] = "thermal"
    beta = np.empty(n, dtype=complex)
    for key in np.unique(t_e):
        idx = np.nonzero(t_e == key)[0]
        nu = bank.sampler(key).sample(idx.size, rng)
        if chain is None:
            beta[idx] = nu + heterodyne_noise(p.eta, idx.size, rng)
        else:
            release_branch = "g" if key < cfg.t_int else "e"
            beta[idx] = sample_beta_trace(chain, nu, release_branch, rng)
    return PreparationRuns(prepared, beta, cause.astype(str), thermal, failed, decayed)


def calibrated_chain(cfg: ExperimentConfig, bank: StateBank,
                     rng: np.random.Generator) -> CalibratedChain:
    mg = mean_field(bank.state(0.0))
    me = mean_field(bank.state(cfg.t_int))
    return calibrate_chain(TraceChain(cfg.device, cfg.pulse), mg, me, cfg.alpha0,
                           cfg.device.eta, rng)


def histogram_edges(cfg: ExperimentConfig, bins: Optional[int] = None):
    hw = cfg.hist_half_width or default_half_width(cfg.alpha0, cfg.device.eta)
    return uniform_edges(hw, bins or cfg.hist_bins)


@dataclass
class ReadoutResult:
    report: ReadoutReport
    runs: Dict[str, PreparationRuns]
    hist: Dict[str, AmplitudeHistogram]
    region: DecisionRegion
    chain: Optional[CalibratedChain] = None


def run_readout(cfg: ExperimentConfig) -> ReadoutResult:
    """Full readout statistics for g and e preparations; deterministic in ``cfg.seed``."""
    rs = streams(cfg.seed)
    bank = StateBank(cfg)
    chain = calibrated_chain(cfg, bank, rs[STREAM_CHAIN]) if cfg.measurement_path == "trace" else None
    runs = {b: simulate_preparation(cfg, b, cfg.n_runs, rs[i], bank, chain)
            for b, i in (("g", STREAM_G), ("e", STREAM_E))}
    edges = histogram_edges(cfg)
    hist = {b: histogram2d(runs[b].beta, edges) for b in runs}
    ov = overlap(hist["g"], hist["e"])
    region = decision_region(hist["g"], hist["e"])
    base = error_rates(runs["g"].beta, runs["e"].beta, region, ov)
    budget = {}
    for b in ("g", "e"):
        budget.update(error_budget(runs[b].beta, runs[b].cause, region, b))
    assign = 0.5 * (base.error_g + base.error_e)
    pairs = simulate_sequential_readouts(cfg.n_runs, rs[STREAM_QND], cfg.device.t1, cfg.qnd_gap,
                                         cfg.p_demolition, assign)
    re, rg = runs["e"], runs["g"]
    extra = {
        "alpha0": cfg.alpha0,
        "t_int_s": cfg.t_int,
        "eta": cfg.device.eta,
        "seed": cfg.seed,
        "measurement_path": cfg.measurement_path,
        "hist_bins": cfg.hist_bins,
        "hist_half_width": float(edges[0][-1]),
        "events.g.thermal": float(np.mean(rg.thermal)),
        "events.e.thermal": float(np.mean(re.thermal)),
        "events.e.pulse": float(np.mean(re.pulse_failed)),
        "events.e.t1_decay": float(np.mean(re.decayed)),
    }
    if cfg.n_crit is not None:
        extra["n_crit"] = cfg.n_crit
    report = ReadoutReport(ov, base.error_g, base.error_e, cfg.n_runs,
                           qnd_probability(pairs), budget, extra)
    return ReadoutResult(report, runs, hist, region, chain)


def _overlap_cell(args):
    cfg, alpha0, t_int, seed = args
    dim = max(cfg.truncation, math.ceil(3 * abs(alpha0) ** 2) + 1)
    c = replace(cfg, alpha0=complex(alpha0), t_int=float(t_int), seed=int(seed),
                n_runs=cfg.sweep_n_runs, truncation=dim, n_tau_bins=cfg.sweep_tau_bins,
                husimi_grid=cfg.sweep_husimi_grid)
    rg, re = streams(c.seed, 2)
    bank = StateBank(c)
    g = simulate_preparation(c, "g", c.n_runs, rg, bank)
    e = simulate_preparation(c, "e", c.n_runs, re, bank)
    edges = histogram_edges(c, c.sweep_bins)
    return overlap(histogram2d(g.beta, edges), histogram2d(e.beta, edges))


def sweep_overlap(cfg: ExperimentConfig, alpha0_list: Sequence[float] = None,
                  t_int_list: Sequence[float] = None, threads: int = 1) -> np.ndarray:
    """Overlap for every (alpha0, t_int) cell; rows follow ``alpha0_list``.

    Each cell gets its own seed spawned from ``cfg.seed`` so the matrix does
    not depend on the number of workers or their scheduling.  Cells use the
    coarser ``sweep_*`` sampling settings and raise the truncation when a
    row's ``alpha0`` needs it.
    """
    a_list = list(cfg.sweep_alpha0 if alpha0_list is None else alpha0_list)
    t_list = list(cfg.sweep_t_int if t_int_list is None else t_int_list)
    if not a_list or not t_list:
        raise ValueError("sweep lists must be nonempty")
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(a_list) * len(t_list))
    jobs = [(cfg, a, t, seeds[i * len(t_list) + j])
            for i, a in enumerate(a_list) for j, t in enumerate(t_list)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(_overlap_cell, jobs))
    else:
        vals = [_overlap_cell(j) for j in jobs]
    return np.array(vals).reshape(len(a_list), len(t_list))


def run_release_study(cfg: ExperimentConfig, sigma_list: Sequence[float] = None,
                      gmax_list: Sequence[float] = None) -> list:
    """Remaining fraction and energy split for every (sigma, g_max) pair."""
    s_list = list(cfg.release_sigma if sigma_list is None else sigma_list)
    g_list = list(cfg.release_g_max if gmax_list is None else gmax_list)
    if not s_list or not g_list:
        raise ValueError("release lists must be nonempty")
    table = []
    for g in g_list:
        for s in s_list:
            pulse = PumpPulse(g, s)
            b = release_budget(pulse, cfg.device)
            table.append({
                "sigma_s": s,
                "g_max_rad_per_s": g,
                "remaining_fraction": float(b["remaining"]),
                "internal_loss": float(b["internal_loss"]),
                "emitted": float(b["emitted"]),
                "in_validated_range": in_validated_range(pulse, cfg.device),
            })
    return table


def refit_release(cfg: ExperimentConfig, table: list) -> dict:
    """Effective (kappa_b, g_max) for the largest-g_max curve of a release table."""
    g = max(r["g_max_rad_per_s"] for r in table)
    rows = [r for r in table if r["g_max_rad_per_s"] == g]
    return fit_effective_release([r["sigma_s"] for r in rows],
                                 [r["remaining_fraction"] for r in rows], g, cfg.device)


def release_trajectory(cfg: ExperimentConfig):
    return classical_release(cfg.alpha0, cfg.pulse, cfg.device)


def run_wigner(cfg: ExperimentConfig, grid=None, mode: Optional[str] = None) -> dict:
    """Wigner maps keyed ``(branch, t_int, mode)`` with configured rotations applied."""
    from .dynamics import evolve_interaction

    mode = mode or cfg.wigner_mode
    if grid is None:
        axis = np.linspace(-cfg.wigner_half_width, cfg.wigner_half_width, cfg.wigner_points)
        grid = (axis, axis.copy())
    modes = ("direct", "protocol") if mode == "both" else (mode,)
    rot = {"g": cfg.wigner_rotation_g, "e": cfg.wigner_rotation_e}
    seeds = np.random.SeedSequence(cfg.seed).spawn(2 * len(cfg.wigner_t_int))
    init = coherent_state(cfg.alpha0, cfg.truncation)
    out = {}
    for k, t in enumerate(cfg.wigner_t_int):
        for bi, b in enumerate(("g", "e")):
            for m in modes:
                if m == "direct":
                    s = evolve_interaction(init, b, t + cfg.wigner_delay, cfg.device)
                    wm = wigner_direct(s, grid)
                else:
                    wm = wigner_protocol_sim(
                        cfg.alpha0, b, t, cfg.device, grid, cfg.wigner_shots,
                        np.random.default_rng(seeds[2 * k + bi]), "sampled",
                        cfg.truncation, cfg.wigner_delay, take_opposite=(b == "e"))
                out[(b, float(t), m)] = rotate_phase_space(wm, rot[b])
    return out


def _level_apexes(cfg: ExperimentConfig) -> np.ndarray:
    """Mean quadratures of pure g, e and f after the interaction.

    The f reference is placed at twice the e-branch rotation, which keeps
    the three references non-collinear for any nonzero shift.
    """
    from .dynamics import evolve_interaction

    init = coherent_state(cfg.alpha0, cfg.truncation)
    mg = mean_field(evolve_interaction(init, "g", cfg.t_int, cfg.device))
    me = mean_field(evolve_interaction(init, "e", cfg.t_int, cfg.device))
    mf = me * me / mg if abs(mg) > 0 else me
    return np.array([mg, me, mf])


def run_calibrate(cfg: ExperimentConfig, noise: float = 0.01) -> dict:
    """All calibration fits on CSV data when configured, else on synthetic data."""
    from .calibration import (
        DecayCurve,
        fit_dispersive_and_kerr,
        fit_photon_calibration,
        fock_decay_model,
        pulse_fidelity_decay,
        simulate_detuning_series,
        solve_thermal_populations,
        synthesize_responses,
    )
    from . import io

    p = cfg.device
    rng = streams(cfg.seed, 1)[0]
    if cfg.calib_decay_csv:
        curve = io.read_decay_curve(cfg.calib_decay_csv)
    else:
        t = np.linspace(0.0, 6e-6, 401)
        p0, p1 = fock_decay_model(abs(cfg.alpha0) ** 2, p.kappa_r, t)
        curve = DecayCurve(t, p0 + noise * rng.standard_normal(t.size),
                           p1 + noise * rng.standard_normal(t.size))
    if cfg.calib_detuning_csv:
        series = io.read_detuning_series(cfg.calib_detuning_csv)
    else:
        series = simulate_detuning_series(p, np.linspace(1.0, 10.0, 10), dim=cfg.truncation)
    nbar, kr, cov = fit_photon_calibration(curve)
    chi, kg, ke = fit_dispersive_and_kerr(series)
    apexes = _level_apexes(cfg)
    resp = synthesize_responses(cfg.calib_populations, apexes)
    pg, pe, pf, temp = solve_thermal_populations(resp, apexes, p.omega_q)
    out = {
        "photon.nbar": nbar,
        "photon.nbar_stderr": float(np.sqrt(cov[0, 0])),
        "photon.kappa_r_per_s": kr,
        "photon.kappa_r_stderr": float(np.sqrt(cov[1, 1])),
        "dispersive.chi_rad_per_s": chi,
        "dispersive.kerr_g_rad_per_s": kg,
        "dispersive.kerr_e_rad_per_s": ke,
        "pulse.fidelity_decay": pulse_fidelity_decay(1, 35e-9, p.t1, p.t2),
        "thermal.p_g": pg,
        "thermal.p_e": pe,
        "thermal.p_f": pf,
        "thermal.temperature_k": temp,
        "source.decay": cfg.calib_decay_csv or "synthetic",
        "source.detuning": cfg.calib_detuning_csv or "synthetic",
    }
    if cfg.n_crit is not None:
        out["n_crit"] = cfg.n_crit
    return out, curve, series


def selfcheck() -> list:
    """Fast invariant checks; each entry is ``(name, passed, detail)``."""
    from .calibration import pulse_fidelity_decay, solve_thermal_populations, synthesize_responses
    from .dynamics import evolve_interaction
    from .hilbert import fock_state, apply_loss_channel
    from .release import conversion_rate

    p = DeviceParams()
    checks = []

    def add(name, ok, detail):
        checks.append((name, bool(ok), detail))

    w0 = wigner_direct(fock_state(0, 20), (np.array([-1.0, 0.0, 1.0]),) * 2).values[1, 1]
    add("vacuum_wigner_origin", abs(w0 - 2 / math.pi) < 1e-6, w0)
    kb = p.kappa_b
    add("conversion_rate_critical", conversion_rate(kb / 4, kb) == kb / 2, conversion_rate(kb / 4, kb))
    closed = p.with_(kappa_r=0.0, kappa_b=0.0)
    res = classical_release(1.0, PumpPulse(2 * math.pi * 7.2e6, 28e-9), closed).energy_residual()
    add("closed_release_energy", res < 1e-9, res)
    s = evolve_interaction(coherent_state(2.0, 60), "e", 300e-9, p.with_(kerr_g=0.0, kerr_e=0.0))
    ph = np.angle(mean_field(s))
    want = math.remainder(p.chi * 300e-9, 2 * math.pi)
    add("dispersive_rotation", abs(ph - want) < 1e-8, ph - want)
    lossy = apply_loss_channel(coherent_state(1.5, 40), 0.3)
    add("loss_channel_trace", abs(np.trace(lossy.density_matrix()).real - 1) < 1e-9,
        np.trace(lossy.density_matrix()).real)
    pd = pulse_fidelity_decay(1, 35e-9, p.t1, p.t2)
    add("pulse_decay", abs(pd - 0.995) <= 1e-3, pd)
    ap = np.array([5.8, 5.8j, -4.0])
    temp = solve_thermal_populations(synthesize_responses((0.992, 0.008, 0.0), ap), ap, p.omega_q)[3]
    add("thermal_temperature", abs(temp - 0.044) <= 0.002, temp)
    return checks
