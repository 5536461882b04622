"""Config-driven experiment runner producing CSV/JSON artifacts.

Each experiment tag maps to a routine that runs solvers or samplers and
writes a CSV table (RFC-4180, 17-significant-digit floats, LF endings) plus
a JSON sidecar echoing the full configuration and the run diagnostics
(truncations, exclusion counts, standard errors). Runs are deterministic for
a fixed master seed: the trajectory fan-out assigns one reproducible random
stream per chunk, so thread scheduling cannot change the output.
"""

from __future__ import annotations

import configparser
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import entropy_ft, grid_solver, spectral, trajectory
from .models import MeasurementEngine, TwoLevelBangBang

ENV_PREFIX = "QFPME_"
CHUNK_SIZE = 10000

KNOWN_TAGS = ("fig2", "fig3", "fig4", "fig5", "fig6", "steady", "grid", "traj", "ft")


class ConfigError(ValueError):
    """Validation failure with field-level messages."""


@dataclass
class ExperimentConfig:
    """Flat experiment configuration (file format: INI-style key=value)."""

    tag: str = "steady"
    model: str = "two_level_bangbang"
    omega: float = 1.0
    T: Optional[float] = 1.0
    n_B: Optional[float] = None
    kappa: float = 0.1
    gamma: float = 1.0
    lam: float = 1.0
    g: float = 0.2
    dt: float = 0.01
    steps: int = 1000
    n_traj: int = 100000
    master_seed: int = 2026
    truncation: int = 40
    grid_m: int = 2001
    tol: float = 1e-8
    sweep_param: str = ""
    sweep_values: Tuple[float, ...] = ()
    out: str = "."

    def validate(self) -> None:
        errors = []
        if self.tag not in KNOWN_TAGS:
            errors.append(f"tag: unknown experiment {self.tag!r}")
        if self.model not in ("two_level_bangbang", "engine"):
            errors.append(f"model: unknown model {self.model!r}")
        for name in ("omega", "gamma", "lam", "dt"):
            if getattr(self, name) <= 0:
                errors.append(f"{name}: must be strictly positive")
        if self.kappa < 0:
            errors.append("kappa: must be non-negative")
        if (self.T is None) == (self.n_B is None):
            errors.append("T/n_B: exactly one of T or n_B must be given")
        for name in ("steps", "n_traj", "truncation", "grid_m"):
            if getattr(self, name) < 1:
                errors.append(f"{name}: must be a positive integer")
        if self.sweep_param and not self.sweep_values:
            errors.append("sweep_values: sweep list must be non-empty")
        if errors:
            raise ConfigError("; ".join(errors))

    @classmethod
    def from_file(
        cls,
        path: Optional[str],
        tag: str,
        overrides: Optional[Dict[str, str]] = None,
    ) -> "ExperimentConfig":
        """Load a config section, then apply environment and explicit overrides.

        Precedence (low to high): file DEFAULT section, file [tag] section,
        QFPME_* environment variables, explicit overrides.
        """
        values: Dict[str, str] = {"tag": tag}
        if path is not None:
            parser = configparser.ConfigParser()
            with open(path) as fh:
                parser.read_file(fh)
            section = tag if parser.has_section(tag) else configparser.DEFAULTSECT
            values.update(dict(parser[section]))
            values["tag"] = tag
        for key, value in os.environ.items():
            if key.startswith(ENV_PREFIX):
                values[key[len(ENV_PREFIX):].lower()] = value
        if overrides:
            values.update({k: v for k, v in overrides.items() if v is not None})
        return cls._coerce(values)

    @classmethod
    def _coerce(cls, values: Dict[str, str]) -> "ExperimentConfig":
        cfg = cls()
        floats = {"omega", "kappa", "gamma", "lam", "g", "dt", "tol"}
        ints = {"steps", "n_traj", "master_seed", "truncation", "grid_m"}
        optionals = {"t": "T", "n_b": "n_B"}
        for raw_key, value in values.items():
            key = optionals.get(raw_key.lower(), raw_key)
            if key in ("T", "n_B"):
                setattr(cfg, key, None if value in (None, "", "none") else float(value))
                # Providing one of T/n_B clears the default of the other.
                other = "n_B" if key == "T" else "T"
                if raw_key.lower() in ("t", "n_b"):
                    setattr(cfg, other, None)
            elif key in floats:
                setattr(cfg, key, float(value))
            elif key in ints:
                setattr(cfg, key, int(value))
            elif key == "sweep_values":
                if isinstance(value, str):
                    parts = [p for p in value.replace(",", " ").split() if p]
                    cfg.sweep_values = tuple(float(p) for p in parts)
                else:
                    cfg.sweep_values = tuple(float(v) for v in value)
            elif key in ("tag", "model", "sweep_param", "out"):
                setattr(cfg, key, str(value))
            else:
                raise ConfigError(f"{raw_key}: unknown configuration key")
        cfg.validate()
        return cfg

    def build_model(self):
        if self.model == "two_level_bangbang":
            return TwoLevelBangBang(
                omega=self.omega, kappa=self.kappa, gamma=self.gamma,
                lam=self.lam, T=self.T, n_B=self.n_B,
            )
        return MeasurementEngine(
            omega=self.omega, kappa=self.kappa, gamma=self.gamma,
            lam=self.lam, g=self.g, T=self.T, n_B=self.n_B,
        )


def _format_cell(value) -> str:
    if isinstance(value, str):
        if any(c in value for c in ',"\n'):
            return '"' + value.replace('"', '""') + '"'
        return value
    if value is None:
        return ""
    x = float(value)
    if math.isnan(x):
        return ""
    if x == int(x) and abs(x) < 1e15:
        return repr(x)
    return f"{x:.17g}"


def export_csv(header: Sequence[str], rows: Sequence[Sequence], path) -> int:
    """Write an RFC-4180 CSV (LF endings, 17-significant-digit floats).

    NaN values are serialized as empty fields; returns how many were seen so
    the caller can record the count in the sidecar.
    """
    nan_count = 0
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError("row length does not match header")
        cells = []
        for value in row:
            if not isinstance(value, str) and value is not None and math.isnan(float(value)):
                nan_count += 1
            cells.append(_format_cell(value))
        lines.append(",".join(cells))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    return nan_count


def _write_sidecar(path, config: ExperimentConfig, diagnostics: Dict) -> None:
    payload = {"config": asdict(config), "diagnostics": diagnostics}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _map_chunks(fn: Callable[[int], object], n_chunks: int, threads: int) -> list:
    """Deterministic indexed fan-out over trajectory chunks."""
    if threads <= 1 or n_chunks <= 1:
        return [fn(i) for i in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_chunks)))


def _chunk_sizes(n_traj: int) -> List[int]:
    sizes = [CHUNK_SIZE] * (n_traj // CHUNK_SIZE)
    if n_traj % CHUNK_SIZE:
        sizes.append(n_traj % CHUNK_SIZE)
    return sizes


def _classical_ft_point(
    model: TwoLevelBangBang, cfg: ExperimentConfig, threads: int, tau: float
) -> Dict[str, float]:
    """Monte-Carlo FT and entropy-rate estimates at one parameter point."""
    dt = tau / cfg.steps
    sizes = _chunk_sizes(cfg.n_traj)

    def run(i: int):
        rec = trajectory.simulate_classical(
            model, dt, cfg.steps, trajectory.RngStream(cfg.master_seed, i), sizes[i]
        )
        sig, m = entropy_ft.sigma_classical(rec, model.omega, model.T)
        sig_m = entropy_ft.sigma_m_discrete(rec, model.gamma, model.lam)
        return sig, sig_m, m

    parts = _map_chunks(run, len(sizes), threads)
    sig = np.concatenate([p[0] for p in parts])
    sig_m = np.concatenate([p[1] for p in parts])
    m = np.concatenate([p[2] for p in parts])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ft_full, ft_full_se = entropy_ft.ft_estimator(sig + sig_m, mode=None)
        ft_sig, ft_sig_se = entropy_ft.ft_estimator(sig, mode=None)
    mean_sig, se_sig = entropy_ft.jackknife_mean(sig)
    mean_sm, se_sm = entropy_ft.jackknife_mean(sig_m)
    return {
        "ft_full": ft_full, "ft_full_se": ft_full_se,
        "ft_sigma": ft_sig, "ft_sigma_se": ft_sig_se,
        "sigma_rate": -mean_sig / tau, "sigma_rate_se": se_sig / tau,
        "sigma_m_rate": mean_sm / tau, "sigma_m_rate_se": se_sm / tau,
        "m_samples": m,
    }


def _run_fig2(cfg: ExperimentConfig, out: Path, threads: int) -> Dict:
    """Classical power/heat sweep plus the outcome-distribution inset."""
    n_B = 1.0 / (math.e - 1.0)  # omega = k_B T
    rows = []
    truncations = {}
    for ratio in (3.0, 10.0, 100.0):
        for lg in cfg.sweep_values or (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0):
            state = spectral.solve_classical_two_level(
                1.0, 1.0 / ratio, 1.0, lg, n_B, L=cfg.truncation
            )
            p, j, _ = spectral.classical_energetics(
                state, 1.0, 1.0 / ratio, 1.0, lg, n_B
            )
            kw = 1.0 / ratio
            rows.append((ratio, lg, p / kw, j / kw))
            truncations[f"{ratio:g}:{lg:g}"] = state.L
    nan = export_csv(
        ("gamma_over_kappa", "lambda_over_gamma",
         "power_over_kappa_omega", "heat_over_kappa_omega"),
        rows, out / "fig2.csv",
    )
    inset_state = spectral.solve_classical_two_level(
        1.0, 0.1, 1.0, 0.5, n_B, L=cfg.truncation
    )
    D = np.linspace(-3.0, 3.0, 241)
    rec = spectral.reconstruct(inset_state, D)
    nan += export_csv(
        ("D", "p_minus", "p_plus", "p_total"),
        list(zip(D, rec["p0"], rec["p1"], rec["p0"] + rec["p1"])),
        out / "fig2_inset.csv",
    )
    return {"n_B": n_B, "truncations": truncations, "nan_fields": nan,
            "files": ["fig2.csv", "fig2_inset.csv"]}


def _run_fig3(cfg: ExperimentConfig, out: Path, threads: int) -> Dict:
    """Engine power/heat/measurement-energy sweep plus Bloch-profile inset."""
    n_B = 1.0 / (math.e - 1.0)
    rows = []
    for kg in (0.0, 1.0 / 3.0):
        for lg in cfg.sweep_values or (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0):
            state = spectral.solve_engine(1.0, kg, 1.0, lg, 1.0, n_B, L=cfg.truncation)
            p, j, em = spectral.engine_energetics(state, 1.0, kg, 1.0, lg, 1.0, n_B)
            rows.append((kg, lg, p, j, em))
    nan = export_csv(
        ("kappa_over_gamma", "lambda_over_gamma", "power_over_g_omega",
         "heat_over_g_omega", "e_m_over_g_omega"),
        rows, out / "fig3.csv",
    )
    inset_state = spectral.solve_engine(1.0, 0.0, 1.0, 1.0, 1.0, n_B, L=cfg.truncation)
    D = np.linspace(-3.5, 3.5, 281)
    rec = spectral.reconstruct(inset_state, D)
    nan += export_csv(
        ("D", "P", "a_x", "a_z"),
        list(zip(D, rec["P"], rec["a_x"], rec["a_z"])),
        out / "fig3_inset.csv",
    )
    return {"n_B": n_B, "nan_fields": nan, "files": ["fig3.csv", "fig3_inset.csv"]}


def _run_fig4(cfg: ExperimentConfig, out: Path, threads: int) -> Dict:
    """Classical integral-FT estimators versus measurement strength."""
    gamma = 1.0
    tau = 10.0 / gamma
    rows = []
    for lg in cfg.sweep_values or (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0):
        model = TwoLevelBangBang(omega=1.0, kappa=0.1, gamma=gamma, lam=lg, T=1.0)
        est = _classical_ft_point(model, cfg, threads, tau)
        rows.append((lg, est["ft_full"], est["ft_full_se"],
                     est["ft_sigma"], est["ft_sigma_se"]))
    nan = export_csv(
        ("lambda_over_gamma", "ft_full", "ft_full_se", "ft_sigma", "ft_sigma_se"),
        rows, out / "fig4.csv",
    )
    # Inset: one sample trajectory pair at strong measurement.
    model = TwoLevelBangBang(omega=1.0, kappa=0.1, gamma=gamma, lam=10.0, T=1.0)
    rec = trajectory.simulate_classical(
        model, tau / cfg.steps, cfg.steps,
        trajectory.RngStream(cfg.master_seed, 10_000), 1,
    )
    t = np.arange(cfg.steps + 1) * (tau / cfg.steps)
    nan += export_csv(
        ("t", "a", "D"),
        list(zip(t, rec.a_path[0], rec.D_path[0, :-1])),
        out / "fig4_inset.csv",
    )
    return {"nan_fields": nan, "files": ["fig4.csv", "fig4_inset.csv"]}


def _run_fig5(cfg: ExperimentConfig, out: Path, threads: int) -> Dict:
    """Entropy-production and measurement-entropy rates, with the
    fast-detector comparison inset."""
    gamma = 1.0
    tau = 10.0 / gamma
    n_B = 1.0 / (math.e - 1.0)
    rows = []
    for lg in cfg.sweep_values or (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0):
        model = TwoLevelBangBang(omega=1.0, kappa=0.1, gamma=gamma, lam=lg, T=1.0)
        est = _classical_ft_point(model, cfg, threads, tau)
        state = spectral.solve_classical_two_level(1.0, 0.1, gamma, lg, n_B,
                                                   L=cfg.truncation)
        p, _, _ = spectral.classical_energetics(state, 1.0, 0.1, gamma, lg, n_B)
        rows.append((lg, est["sigma_rate"], est["sigma_rate_se"],
                     est["sigma_m_rate"], est["sigma_m_rate_se"], -p))
    nan = export_csv(
        ("lambda_over_gamma", "mean_sigma_rate", "se_sigma_rate",
         "mean_sigma_m_rate", "se_sigma_m_rate", "spectral_power_over_T"),
        rows, out / "fig5.csv",
    )
    inset_rows = []
    for lg in (0.2, 0.5, 1.0, 2.0, 5.0):
        model = TwoLevelBangBang(omega=1.0, kappa=0.01, gamma=gamma, lam=lg, T=1.0)
        est = _classical_ft_point(model, cfg, threads, tau)
        closed = entropy_ft.sigma_m_fast_detector(lg, gamma, 0.01, n_B)
        inset_rows.append((lg, est["sigma_m_rate"], est["sigma_m_rate_se"], closed))
    nan += export_csv(
        ("lambda_over_gamma", "mc_sigma_m_rate", "se_sigma_m_rate", "closed_form_rate"),
        inset_rows, out / "fig5_inset.csv",
    )
    return {"nan_fields": nan, "files": ["fig5.csv", "fig5_inset.csv"]}


def _run_fig6(cfg: ExperimentConfig, out: Path, threads: int) -> Dict:
    """Quantum entropy histograms with their mean reference lines."""
    model = MeasurementEngine(omega=1.0, g=0.2, kappa=0.1, gamma=1.0, lam=0.2, T=1.0)
    tau = 10.0 / model.gamma
    dt = tau / cfg.steps
    basis = trajectory.average_final_basis(model, dt, cfg.steps, M=401)
    sizes = _chunk_sizes(cfg.n_traj)

    def run(i: int):
        rec = trajectory.simulate_kraus_jump(
            model, dt, cfg.steps, trajectory.RngStream(cfg.master_seed, i),
            sizes[i], final_basis=basis,
        )
        return entropy_ft.sigma_m_cg(rec, model)

    parts = _map_chunks(run, len(sizes), threads)
    smcg = np.concatenate([p[0] for p in parts])
    sigma = np.concatenate([p[1] for p in parts])
    excluded = np.concatenate([p[2] for p in parts])
    keep = ~excluded
    edges = np.linspace(-6.0, 18.0, 97)
    h_sigma, _ = np.histogram(sigma[keep], bins=edges, density=True)
    h_smcg, _ = np.histogram(smcg[keep], bins=edges, density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    nan = export_csv(
        ("bin_center", "sigma_density", "sigma_m_cg_density"),
        list(zip(centers, h_sigma, h_smcg)),
        out / "fig6.csv",
    )
    mean_sigma, se_sigma = entropy_ft.jackknife_mean(sigma[keep])
    mean_smcg, se_smcg = entropy_ft.jackknife_mean(smcg[keep])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ft, ft_se = entropy_ft.ft_estimator((sigma + smcg)[keep], mode=None)
    nan += export_csv(
        ("name", "value"),
        [("mean_sigma", mean_sigma), ("mean_sigma_m_cg", mean_smcg),
         ("minus_mean_sigma_m_cg", -mean_smcg)],
        out / "fig6_lines.csv",
    )
    return {
        "nan_fields": nan, "files": ["fig6.csv", "fig6_lines.csv"],
        "excluded": int(excluded.sum()), "n_traj": int(cfg.n_traj),
        "mean_sigma": mean_sigma, "se_sigma": se_sigma,
        "mean_sigma_m_cg": mean_smcg, "se_sigma_m_cg": se_smcg,
        "ft_estimate": ft, "ft_se": ft_se,
    }


def _run_steady(cfg: ExperimentConfig, out: Path, threads: int) -> Dict:
    """Spectral steady state on an outcome grid, energetics in the sidecar."""
    model = cfg.build_model()
    D = np.linspace(-3.5, 3.5, 281)
    if isinstance(model, TwoLevelBangBang):
        state = spectral.solve_classical_two_level(
            model.omega, model.kappa, model.gamma, model.lam, model.n_B,
            L=cfg.truncation,
        )
        rec = spectral.reconstruct(state, D)
        nan = export_csv(
            ("D", "p_minus", "p_plus"),
            list(zip(D, rec["p0"], rec["p1"])),
            out / "steady.csv",
        )
        p, j, eta = spectral.classical_energetics(
            state, model.omega, model.kappa, model.gamma, model.lam, model.n_B
        )
        diag = {"power": p, "heat": j, "e_m_rate": 0.0, "error_probability": eta}
    else:
        state = spectral.solve_engine(
            model.omega, model.kappa, model.gamma, model.lam, model.g, model.n_B,
            L=cfg.truncation,
        )
        rec = spectral.reconstruct(state, D)
        nan = export_csv(
            ("D", "P", "a_x", "a_y", "a_z"),
            list(zip(D, rec["P"], rec["a_x"], rec["a_y"], rec["a_z"])),
            out / "steady.csv",
        )
        p, j, em = spectral.engine_energetics(
            state, model.omega, model.kappa, model.gamma, model.lam, model.g,
            model.n_B,
        )
        diag = {"power": p, "heat": j, "e_m_rate": em}
    diag.update({"truncation": state.L, "nan_fields": nan,
                 "files": ["steady.csv"]})
    return diag


def _run_grid(cfg: ExperimentConfig, out: Path, threads: int) -> Dict:
    """Grid-solver steady state on the native cell centers."""
    model = cfg.build_model()
    state = grid_solver.steady_state_grid(
        model.protocol(), model.A, model.lam, model.gamma,
        tol=max(cfg.tol, 1e-9), M=cfg.grid_m,
    )
    dist = state.outcome_distribution()
    centers = state.centers
    if isinstance(model, TwoLevelBangBang):
        nan = export_csv(
            ("D", "p_minus", "p_plus"),
            list(zip(centers, state.field[:, 0, 0].real, state.field[:, 1, 1].real)),
            out / "grid.csv",
        )
    else:
        sx = state.expectation(np.array([[0, 1], [1, 0]], dtype=complex))
        sz = state.expectation(np.diag([1.0 + 0j, -1.0]))
        ax = np.where(dist > 1e-300, sx / np.maximum(dist, 1e-300), 0.0)
        az = np.where(dist > 1e-300, sz / np.maximum(dist, 1e-300), 0.0)
        nan = export_csv(
            ("D", "P", "a_x", "a_z"),
            list(zip(centers, dist, ax, az)),
            out / "grid.csv",
        )
    p, j, em = grid_solver.grid_thermo(
        state, model.protocol(), model.A, model.lam, model.gamma,
        u_spec="h_td" if isinstance(model, MeasurementEngine) else "protocol",
        h_td=model.h_td if isinstance(model, MeasurementEngine) else None,
    )
    return {"power": p, "heat": j, "e_m_rate": em, "M": cfg.grid_m,
            "nan_fields": nan, "files": ["grid.csv"]}


def _run_traj(cfg: ExperimentConfig, out: Path, threads: int) -> Dict:
    """Sample trajectories and export the first few outcome paths."""
    model = cfg.build_model()
    n = min(cfg.n_traj, 10)
    rng = trajectory.RngStream(cfg.master_seed, 0)
    if isinstance(model, TwoLevelBangBang):
        rec = trajectory.simulate_classical(model, cfg.dt, cfg.steps, rng, n)
        drive = rec.a_path
    else:
        rec = trajectory.simulate_kraus_jump(model, cfg.dt, cfg.steps, rng, n)
        drive = None
    rows = []
    for i in range(n):
        for step in range(cfg.steps + 1):
            rows.append((
                i, step, step * cfg.dt, rec.D_path[i, step],
                drive[i, step] if drive is not None else math.nan,
            ))
    nan = export_csv(("traj_id", "step", "t", "D", "drive"), rows, out / "traj.csv")
    trajectory.dump_record(rec, out / "traj.npz")
    return {"n_traj": n, "nan_fields": nan, "files": ["traj.csv", "traj.npz"]}


def _run_ft(cfg: ExperimentConfig, out: Path, threads: int) -> Dict:
    """Single-point fluctuation-theorem run for the configured model."""
    model = cfg.build_model()
    tau = cfg.steps * cfg.dt
    if isinstance(model, TwoLevelBangBang):
        est = _classical_ft_point(model, cfg, threads, tau)
        header = ("ft_full", "ft_full_se", "ft_sigma", "ft_sigma_se",
                  "sigma_rate", "sigma_rate_se", "sigma_m_rate", "sigma_m_rate_se")
        row = tuple(est[k] for k in header)
        nan = export_csv(header, [row], out / "ft.csv")
        values, counts = np.unique(est["m_samples"], return_counts=True)
        nan += export_csv(
            ("m", "count"),
            list(zip(values.astype(int), counts.astype(int))),
            out / "ft_m_hist.csv",
        )
        return {"nan_fields": nan, "files": ["ft.csv", "ft_m_hist.csv"],
                **{k: est[k] for k in header}}
    basis = trajectory.average_final_basis(model, cfg.dt, cfg.steps, M=401)
    sizes = _chunk_sizes(cfg.n_traj)

    def run(i: int):
        rec = trajectory.simulate_kraus_jump(
            model, cfg.dt, cfg.steps, trajectory.RngStream(cfg.master_seed, i),
            sizes[i], final_basis=basis,
        )
        return entropy_ft.sigma_m_cg(rec, model)

    parts = _map_chunks(run, len(sizes), threads)
    smcg = np.concatenate([p[0] for p in parts])
    sigma = np.concatenate([p[1] for p in parts])
    excluded = np.concatenate([p[2] for p in parts])
    keep = ~excluded
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ft, ft_se = entropy_ft.ft_estimator((sigma + smcg)[keep], mode=None)
    mean_sigma, se_sigma = entropy_ft.jackknife_mean(sigma[keep])
    mean_smcg, se_smcg = entropy_ft.jackknife_mean(smcg[keep])
    header = ("ft_cg", "ft_cg_se", "mean_sigma", "se_sigma",
              "mean_sigma_m_cg", "se_sigma_m_cg", "excluded")
    row = (ft, ft_se, mean_sigma, se_sigma, mean_smcg, se_smcg, int(excluded.sum()))
    nan = export_csv(header, [row], out / "ft.csv")
    return {"nan_fields": nan, "files": ["ft.csv"], "ft_cg": ft, "ft_cg_se": ft_se,
            "excluded": int(excluded.sum())}


_RUNNERS = {
    "fig2": _run_fig2, "fig3": _run_fig3, "fig4": _run_fig4,
    "fig5": _run_fig5, "fig6": _run_fig6,
    "steady": _run_steady, "grid": _run_grid, "traj": _run_traj, "ft": _run_ft,
}


def run_experiment(config: ExperimentConfig, threads: int = 1) -> Dict:
    """Run one experiment: write its CSVs and JSON sidecar, return a summary."""
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    diagnostics = _RUNNERS[config.tag](config, out, threads)
    _write_sidecar(out / f"{config.tag}.json", config, diagnostics)
    return {"tag": config.tag, "out": str(out), "diagnostics": diagnostics}
