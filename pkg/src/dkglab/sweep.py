"""Mass sweeps: large-mass convergence experiments and rate fitting.

A sweep solves the cubic (nonlinear Dirac) reference once, then the
coupled system once per field mass with identical spinor initial data,
and fits the decay rate of the sup-in-time H^s' error against the mass.
The time step is certified first by a refinement guard so that the
measured errors are modeling error, not splitting error.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, config_fingerprint
from .dirac import densities
from .evolvers import (
    BlowUpError,
    DKGSystemState,
    NLDState,
    Trajectory,
    evolve,
)
from .grid import TorusGrid
from .kleingordon import Couplings, KGState
from .manybody import (
    DensityMatrix,
    ManyBodyDKGState,
    ManyBodyNLDState,
    diff_hs_norm,
    gram_matrix,
    mb_dkg_step,
    mb_nld_step,
)
from .presets import hermite_orbitals, initial_data
from .snapshot import load_reference_trajectory, save_reference_trajectory


@dataclass
class RateFit:
    rate: float
    residual: float
    intercept: float


def fit_rate(masses, errors) -> RateFit:
    """Least-squares slope of log10(error) against log10(mass).

    Returns the decay exponent r (error ~ C m^-r) and the RMS residual of
    the fit in log10 units.
    """
    masses = np.asarray(masses, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(masses) < 3:
        raise ValueError("rate fitting requires at least 3 masses")
    if np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        raise ValueError("rate fitting requires strictly positive finite errors")
    log_m = np.log10(masses)
    log_e = np.log10(errors)
    slope, intercept = np.polyfit(log_m, log_e, 1)
    fitted = slope * log_m + intercept
    residual = float(np.sqrt(np.mean((log_e - fitted) ** 2)))
    return RateFit(rate=float(-slope), residual=residual, intercept=float(intercept))


# -- experiment assembly --------------------------------------------------------


@dataclass
class ExperimentSetup:
    grid: TorusGrid
    psi: np.ndarray
    s: np.ndarray
    s_dot: np.ndarray
    omega: np.ndarray
    omega_dot: np.ndarray
    couplings: Couplings

    def kg_state(self, m_sigma: float, m_omega: float) -> KGState:
        return KGState(
            s=self.s,
            s_dot=self.s_dot,
            omega=self.omega,
            omega_dot=self.omega_dot,
            m_sigma=m_sigma,
            m_omega=m_omega,
        )


def build_experiment(cfg: ExperimentConfig) -> ExperimentSetup:
    grid = TorusGrid(cfg.dim, cfg.points, cfg.length)
    couplings = Couplings(cfg.gamma_sigma, cfg.gamma_omega, cfg.fermion_mass)
    psi, kg = initial_data(
        grid,
        couplings,
        preset=cfg.preset,
        field_init=cfg.field_init,
        m_sigma=cfg.m_sigma,
        m_omega=cfg.m_omega,
        rough_sigma=cfg.rough_sigma,
        seed=cfg.seed,
    )
    return ExperimentSetup(
        grid=grid,
        psi=psi,
        s=kg.s,
        s_dot=kg.s_dot,
        omega=kg.omega,
        omega_dot=kg.omega_dot,
        couplings=couplings,
    )


def evolve_two_sided(state, t_forward, t_backward, dt, sample_every, step=None) -> Trajectory:
    """Samples on [-t_backward, t_forward], both runs from the same data."""
    forward = evolve(state, t_forward, dt, sample_every, step=step)
    if t_backward <= 0:
        return forward
    backward = evolve(state, -t_backward, dt, sample_every, step=step)
    times = np.concatenate([backward.times[:0:-1], forward.times])
    states = backward.states[:0:-1] + forward.states
    report = forward.report
    report = replace(
        report,
        l2_drift=np.concatenate([backward.report.l2_drift, report.l2_drift]),
        charge=np.concatenate([backward.report.charge, report.charge]),
        max_amplitude=np.concatenate([backward.report.max_amplitude, report.max_amplitude]),
        wall_time=np.concatenate([backward.report.wall_time, report.wall_time]),
    )
    return Trajectory(times=times, states=states, report=report)


def _measure_indices(cfg: ExperimentConfig) -> list[float]:
    seen = [cfg.s_prime]
    for sp in cfg.extra_measure:
        if sp not in seen:
            seen.append(sp)
    return seen


# -- one-body sweep points -------------------------------------------------------


def run_nld_reference(cfg: ExperimentConfig, dt: float, sample_every: int):
    """Solve the cubic equation once; returns (times, psi_samples)."""
    setup = build_experiment(cfg)
    state = NLDState(grid=setup.grid, psi=setup.psi, couplings=setup.couplings)
    traj = evolve_two_sided(state, cfg.t_forward, cfg.t_backward, dt, sample_every)
    return traj.times, traj.psi_samples


def _dkg_point(args):
    """One sweep point: run the coupled system at one mass, measure errors."""
    cfg, mass, dt, sample_every, nld_times, nld_psi = args
    setup = build_experiment(cfg)
    grid = setup.grid
    state = DKGSystemState(
        grid=grid,
        psi=setup.psi,
        kg=setup.kg_state(mass, mass),
        couplings=setup.couplings,
    )
    try:
        traj = evolve_two_sided(state, cfg.t_forward, cfg.t_backward, dt, sample_every)
    except BlowUpError as exc:
        return {"mass": mass, "status": "blowup", "detail": str(exc)}
    if len(traj.times) != len(nld_times) or not np.allclose(
        traj.times, nld_times, atol=1e-12, rtol=0
    ):
        raise RuntimeError("sweep point sample times do not match the reference")

    errors = {}
    for sp in _measure_indices(cfg):
        errors[repr(sp)] = max(
            grid.sobolev_norm(st.psi - nld_psi[i], sp) for i, st in enumerate(traj.states)
        )
    gamma_s = setup.couplings.gamma_sigma
    sbar_hs, sbar_l2 = 0.0, 0.0
    for st in traj.states:
        sbar = st.kg.s + gamma_s * densities(st.psi).rho_s
        sbar_hs = max(sbar_hs, grid.sobolev_norm(sbar, cfg.s_prime))
        sbar_l2 = max(sbar_l2, grid.l2_norm(sbar))
    return {
        "mass": mass,
        "status": "ok",
        "errors": errors,
        "sbar_sup_hsprime": sbar_hs,
        "sbar_sup_l2": sbar_l2,
    }


# -- many-body sweep points --------------------------------------------------------


def _mb_initial(cfg: ExperimentConfig):
    grid = TorusGrid(cfg.dim, cfg.points, cfg.length)
    couplings = Couplings(cfg.gamma_sigma, cfg.gamma_omega, cfg.fermion_mass)
    orbitals = hermite_orbitals(grid, cfg.mb_rank, seed=cfg.seed)
    dm = DensityMatrix(grid, orbitals, np.array(cfg.mb_occupations, dtype=float))
    return grid, couplings, dm


def run_mb_nld_reference(cfg: ExperimentConfig, dt: float, sample_every: int):
    grid, couplings, dm = _mb_initial(cfg)
    state = ManyBodyNLDState(grid=grid, dm=dm, couplings=couplings)
    traj = evolve_two_sided(
        state, cfg.t_forward, cfg.t_backward, dt, sample_every, step=mb_nld_step
    )
    samples = np.stack([st.dm.orbitals for st in traj.states])
    return traj.times, samples


def _mb_point(args):
    cfg, mass, dt, sample_every, nld_times, nld_orbitals = args
    grid, couplings, dm = _mb_initial(cfg)
    kg = KGState.zero(grid, mass, mass)
    if cfg.field_init == "consistent":
        # slave the fields to the total density of Gamma, velocities left zero
        from .kleingordon import instantaneous_fields
        from .manybody import gamma_densities

        s, omega = instantaneous_fields(gamma_densities(dm), couplings)
        kg = replace(kg, s=s, omega=omega)
    state = ManyBodyDKGState(grid=grid, dm=dm, kg=kg, couplings=couplings)
    try:
        traj = evolve_two_sided(
            state, cfg.t_forward, cfg.t_backward, dt, sample_every, step=mb_dkg_step
        )
    except BlowUpError as exc:
        return {"mass": mass, "status": "blowup", "detail": str(exc)}
    occ = dm.occupations
    errors = {}
    for sp in _measure_indices(cfg):
        sup = 0.0
        for i, st in enumerate(traj.states):
            ref = DensityMatrix(grid, nld_orbitals[i], occ)
            sup = max(sup, diff_hs_norm(st.dm, ref, sp))
        errors[repr(sp)] = sup
    gram0 = gram_matrix(traj.states[0].dm)
    gram_drift = max(
        float(np.max(np.abs(gram_matrix(st.dm) - gram0))) for st in traj.states
    )
    return {
        "mass": mass,
        "status": "ok",
        "errors": errors,
        "gram_drift": gram_drift,
    }


# -- dt certification guard ---------------------------------------------------------


def _certify_dt(cfg: ExperimentConfig, metric) -> tuple[float, int, dict]:
    """Halve dt until the sweep metric changes by less than the tolerance.

    ``metric(dt, sample_every)`` returns the headline error at the largest
    sweep mass (the point most sensitive to splitting-error contamination).
    The accepted dt is the coarsest one whose halving confirms it.
    """
    dt, se = cfg.dt, cfg.sample_every
    if not cfg.guard_enabled:
        return dt, se, {"enabled": False, "dt_used": dt}
    history = []
    value = metric(dt, se)
    history.append({"dt": dt, "error": value})
    certified = False
    change = float("nan")
    for _ in range(cfg.guard_max_halvings):
        half_value = metric(dt / 2, se * 2)
        history.append({"dt": dt / 2, "error": half_value})
        change = abs(value - half_value) / max(abs(half_value), 1e-300)
        if change < cfg.guard_tolerance:
            certified = True
            break
        dt, se, value = dt / 2, se * 2, half_value
    return dt, se, {
        "enabled": True,
        "dt_initial": cfg.dt,
        "dt_used": dt,
        "final_change": change,
        "certified": certified,
        "history": history,
    }


# -- sweep drivers ---------------------------------------------------------------


@dataclass
class SweepResult:
    config_fingerprint: str
    masses: list
    statuses: list
    errors: list
    errors_by_index: dict
    sbar_sup: list
    sbar_sup_l2: list
    sbar_in_l2: float
    gram_drift: list
    dt_used: float
    guard: dict
    rate: float
    residual: float
    rates_by_index: dict

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SweepResult":
        return cls(**json.loads(text))


def _point_json_path(out_dir: Path, tag: str, mass: float) -> Path:
    return out_dir / f"point_{tag}_m{mass!r}.json"


def _run_points(point_fn, tasks, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(point_fn, tasks))
    return [point_fn(task) for task in tasks]


def _assemble(cfg, fingerprint, points, dt_used, guard, sbar_in_l2, indices) -> SweepResult:
    masses = [p["mass"] for p in points]
    statuses = [p["status"] for p in points]
    errors_by_index = {}
    rates_by_index = {}
    for sp in indices:
        key = repr(sp)
        values = [p["errors"][key] if p["status"] == "ok" else float("nan") for p in points]
        errors_by_index[key] = values
        ok = [(m, e) for m, e, st in zip(masses, values, statuses) if st == "ok" and e > 0]
        if len(ok) >= 3:
            fit = fit_rate([m for m, _ in ok], [e for _, e in ok])
            rates_by_index[key] = {
                "rate": fit.rate,
                "residual": fit.residual,
                "intercept": fit.intercept,
            }
    primary = repr(cfg.s_prime)
    rate = rates_by_index.get(primary, {}).get("rate", float("nan"))
    residual = rates_by_index.get(primary, {}).get("residual", float("nan"))
    return SweepResult(
        config_fingerprint=fingerprint,
        masses=masses,
        statuses=statuses,
        errors=errors_by_index[primary],
        errors_by_index=errors_by_index,
        sbar_sup=[p.get("sbar_sup_hsprime", float("nan")) for p in points],
        sbar_sup_l2=[p.get("sbar_sup_l2", float("nan")) for p in points],
        sbar_in_l2=sbar_in_l2,
        gram_drift=[p.get("gram_drift", float("nan")) for p in points],
        dt_used=dt_used,
        guard=guard,
        rate=rate,
        residual=residual,
        rates_by_index=rates_by_index,
    )


def _load_or_compute_point(point_fn, task, out_dir, tag, resume):
    cfg, mass = task[0], task[1]
    if out_dir is not None:
        path = _point_json_path(out_dir, tag, mass)
        if resume and path.exists():
            return json.loads(path.read_text())
    result = point_fn(task)
    if out_dir is not None:
        _point_json_path(out_dir, tag, mass).write_text(json.dumps(result, sort_keys=True))
    return result


def _sweep_common(cfg, point_fn, reference_fn, tag, workers, out_dir, resume, sbar_in_l2):
    fingerprint = config_fingerprint(cfg)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    guard_path = out_path / f"guard_{tag}.json" if out_path else None

    def metric(dt, se):
        times, samples = reference_fn(cfg, dt, se)
        point = point_fn((cfg, max(cfg.masses), dt, se, times, samples))
        if point["status"] != "ok":
            raise BlowUpError(f"guard run blew up at mass {max(cfg.masses)}")
        return point["errors"][repr(cfg.s_prime)]

    guard = None
    if resume and guard_path is not None and guard_path.exists():
        stored = json.loads(guard_path.read_text())
        if stored.get("fingerprint") == fingerprint:
            guard = stored["guard"]
            dt_used, se_used = guard["dt_used"], stored["sample_every_used"]
    if guard is None:
        dt_used, se_used, guard = _certify_dt(cfg, metric)
        if guard_path is not None:
            guard_path.write_text(
                json.dumps(
                    {"fingerprint": fingerprint, "guard": guard, "sample_every_used": se_used},
                    sort_keys=True,
                )
            )

    ref_key = f"{fingerprint}|dt={dt_used!r}"
    times = samples = None
    ref_path = out_path / f"reference_{tag}.snap" if out_path else None
    if resume and ref_path is not None and ref_path.exists():
        loaded = load_reference_trajectory(ref_path, ref_key)
        if loaded is not None:
            times, samples = loaded
    if times is None:
        times, samples = reference_fn(cfg, dt_used, se_used)
        if ref_path is not None:
            save_reference_trajectory(ref_path, ref_key, times, samples)

    tasks = [(cfg, mass, dt_used, se_used, times, samples) for mass in cfg.masses]
    if out_path is None and workers > 1:
        points = _run_points(point_fn, tasks, workers)
    elif workers > 1:
        cached = [
            json.loads(_point_json_path(out_path, tag, m).read_text())
            if resume and _point_json_path(out_path, tag, m).exists()
            else None
            for m in cfg.masses
        ]
        todo = [t for t, c in zip(tasks, cached) if c is None]
        fresh = iter(_run_points(point_fn, todo, workers))
        points = []
        for task, c in zip(tasks, cached):
            if c is None:
                p = next(fresh)
                _point_json_path(out_path, tag, task[1]).write_text(
                    json.dumps(p, sort_keys=True)
                )
                points.append(p)
            else:
                points.append(c)
    else:
        points = [
            _load_or_compute_point(point_fn, task, out_path, tag, resume) for task in tasks
        ]

    return _assemble(cfg, fingerprint, points, dt_used, guard, sbar_in_l2, _measure_indices(cfg))


def run_sweep(cfg: ExperimentConfig, workers: int = 1, out_dir=None, resume: bool = False) -> SweepResult:
    """Mass sweep of the coupled system against the cubic reference."""
    setup = build_experiment(cfg)
    gamma_s = setup.couplings.gamma_sigma
    sbar_in = setup.s + gamma_s * densities(setup.psi).rho_s
    sbar_in_l2 = setup.grid.l2_norm(sbar_in)
    return _sweep_common(
        cfg, _dkg_point, run_nld_reference, "dkg", workers, out_dir, resume, sbar_in_l2
    )


def run_manybody_sweep(cfg: ExperimentConfig, workers: int = 1, out_dir=None, resume: bool = False) -> SweepResult:
    """Mass sweep of the many-body system in the operator norm."""
    return _sweep_common(
        cfg, _mb_point, run_mb_nld_reference, "mb", workers, out_dir, resume, float("nan")
    )
