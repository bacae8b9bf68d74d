"""Self-check battery and the small/oscillatory field diagnostic."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .dirac import ALPHA, BETA, densities, free_propagate
from .evolvers import (
    DKGSystemState,
    NLDState,
    dkg_step,
    evolve,
    nld_step,
)
from .grid import TorusGrid
from .kleingordon import (
    Couplings,
    KGState,
    kg_homogeneous_step,
    oscillatory_split,
    spacetime_current,
)
from .manybody import DensityMatrix, manybody_nld_step
from .presets import initial_data, smooth_spinor
from .sweep import build_experiment, evolve_two_sided


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_spinor(grid: TorusGrid, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=(4,) + grid.shape) + 1j * rng.normal(size=(4,) + grid.shape)
    return grid.dealias(psi)


def run_invariant_checks(points: int = 64, length: float = 32.0) -> list[CheckResult]:
    """Fast conservation/exactness battery on a small grid."""
    grid = TorusGrid(1, points, length)
    couplings = Couplings(0.5, 0.5, 1.0)
    checks = []

    def record(name, passed, detail):
        checks.append(CheckResult(name, bool(passed), detail))

    # Dirac algebra: exact integer identities
    mats = [BETA] + [ALPHA[k] for k in range(3)]
    worst = 0.0
    for i, a in enumerate(mats):
        for j, b in enumerate(mats):
            anti = a @ b + b @ a
            expected = 2.0 * np.eye(4) if i == j else np.zeros((4, 4))
            worst = max(worst, float(np.max(np.abs(anti - expected))))
    record("dirac-anticommutation", worst == 0.0, f"max deviation {worst:g}")

    # free propagator: unitarity and group law
    psi = _random_spinor(grid, 1)
    l2 = grid.l2_norm(psi)
    u1 = free_propagate(grid, psi, 0.7, 1.0)
    u2 = free_propagate(grid, u1, 0.3, 1.0)
    direct = free_propagate(grid, psi, 1.0, 1.0)
    unit_err = abs(grid.l2_norm(u1) - l2) / l2
    group_err = grid.l2_norm(u2 - direct) / l2
    record("free-propagator-unitary", unit_err < 1e-12, f"drift {unit_err:.2e}")
    record("free-propagator-group-law", group_err < 1e-12, f"error {group_err:.2e}")

    # Klein-Gordon per-mode energy over many homogeneous steps
    rng = np.random.default_rng(2)
    kg = KGState(
        s=rng.normal(size=grid.shape),
        s_dot=rng.normal(size=grid.shape),
        omega=rng.normal(size=(4,) + grid.shape),
        omega_dot=rng.normal(size=(4,) + grid.shape),
        m_sigma=4.0,
        m_omega=4.0,
    )
    lam2 = grid.k_squared + kg.m_sigma**2
    energy0 = 0.5 * np.abs(grid.forward(kg.s_dot)) ** 2 + 0.5 * lam2 * np.abs(grid.forward(kg.s)) ** 2
    state = kg
    for _ in range(2000):
        state = kg_homogeneous_step(grid, state, 1.0 / 256.0)
    energy1 = 0.5 * np.abs(grid.forward(state.s_dot)) ** 2 + 0.5 * lam2 * np.abs(grid.forward(state.s)) ** 2
    rel = np.abs(energy1 - energy0) / np.maximum(energy0, 1e-300)
    kg_drift = float(np.max(rel[energy0 > 1e-12]))
    record("kg-mode-energy", kg_drift < 1e-12, f"max drift {kg_drift:.2e} over 2000 steps")

    # reversibility and L2 conservation of both steppers
    psi0, kg0 = initial_data(grid, couplings, "smooth", "mismatched", 4.0, 4.0)
    dkg0 = DKGSystemState(grid=grid, psi=psi0, kg=kg0, couplings=couplings)
    nld0 = NLDState(grid=grid, psi=psi0, couplings=couplings)
    dt = 1.0 / 128.0
    fwd = dkg0
    for _ in range(64):
        fwd = dkg_step(fwd, dt)
    back = fwd
    for _ in range(64):
        back = dkg_step(back, -dt)
    rev_dkg = grid.l2_norm(back.psi - psi0) / grid.l2_norm(psi0)
    record("dkg-time-reversal", rev_dkg < 1e-11, f"return error {rev_dkg:.2e}")

    fwd = nld0
    for _ in range(64):
        fwd = nld_step(fwd, dt)
    l2_drift = abs(grid.l2_norm(fwd.psi) - grid.l2_norm(psi0)) / grid.l2_norm(psi0)
    back = fwd
    for _ in range(64):
        back = nld_step(back, -dt)
    rev_nld = grid.l2_norm(back.psi - psi0) / grid.l2_norm(psi0)
    record("nld-l2-conservation", l2_drift < 1e-11, f"drift {l2_drift:.2e}")
    record("nld-time-reversal", rev_nld < 1e-11, f"return error {rev_nld:.2e}")

    # continuity equation d_t rho_v + div J = 0 at second order in h
    nld_traj = evolve(nld0, 16 * dt, dt)
    residuals = []
    for span in (4, 2):
        minus = nld_traj.states[8 - span].psi
        plus = nld_traj.states[8 + span].psi
        h = span * dt
        drho = (densities(plus).rho_v - densities(minus).rho_v) / (2 * h)
        mid = nld_traj.states[8]
        div_j = np.zeros(grid.shape)
        bundle_mid = densities(mid.psi)
        for axis in range(grid.dim):
            div_j += grid.derivative(bundle_mid.current[axis], axis)
        residuals.append(grid.l2_norm(drho + div_j))
    slope = math.log(residuals[0] / residuals[1]) / math.log(2.0)
    record("continuity-equation", abs(slope - 2.0) < 0.35, f"residual slope {slope:.3f}")

    # rank-1 many-body reduction is bit-exact
    dm = DensityMatrix(grid, psi0[None], np.array([1.0]))
    one = nld0
    for _ in range(10):
        one = nld_step(one, dt)
        dm = manybody_nld_step(dm, couplings, dt)
    rank1 = float(np.max(np.abs(dm.orbitals[0] - one.psi)))
    record("manybody-rank1-reduction", rank1 <= 1e-12, f"max deviation {rank1:.2e}")

    return checks


def run_split_diagnostic(cfg: ExperimentConfig) -> dict:
    """Evolve the coupled system and split the reduced fields.

    Returns per-sample H^s' norms of the small parts (stilde, otilde)
    together with the sampling actually used; the sample spacing is
    tightened to resolve the cosine kernel, at most pi/(4 max(m)).
    """
    setup = build_experiment(cfg)
    grid, c = setup.grid, setup.couplings
    m_max = max(cfg.m_sigma, cfg.m_omega)
    max_spacing = math.pi / (4.0 * m_max)
    sample_every = max(1, min(cfg.sample_every, int(max_spacing / cfg.dt)))
    state = DKGSystemState(
        grid=grid, psi=setup.psi, kg=setup.kg_state(cfg.m_sigma, cfg.m_omega), couplings=c
    )
    traj = evolve_two_sided(state, cfg.t_forward, cfg.t_backward, cfg.dt, sample_every)

    n = len(traj.times)
    psi_samples = traj.psi_samples
    s_bar = np.empty((n,) + grid.shape)
    omega_bar = np.empty((n, 4) + grid.shape)
    for i, st in enumerate(traj.states):
        bundle = densities(st.psi)
        s_bar[i] = st.kg.s + c.gamma_sigma * bundle.rho_s
        omega_bar[i] = st.kg.omega - c.gamma_omega * spacetime_current(bundle)

    s_tilde, omega_tilde = oscillatory_split(
        grid, traj.times, psi_samples, s_bar, omega_bar, cfg.m_sigma, cfg.m_omega, c
    )
    s_norms = [grid.sobolev_norm(s_tilde[i], cfg.s_prime) for i in range(n)]
    o_norms = [grid.sobolev_norm(omega_tilde[i], cfg.s_prime) for i in range(n)]
    return {
        "times": traj.times,
        "stilde_norms": np.array(s_norms),
        "otilde_norms": np.array(o_norms),
        "sample_every": sample_every,
        "sup_stilde": float(max(s_norms)),
        "sup_otilde": float(max(o_norms)),
    }
