"""Time steppers for the coupled system and the cubic nonlinear equation.

Both steppers are Strang compositions of exactly solvable sub-flows (free
Dirac propagation, Klein-Gordon propagation, pointwise interaction phase),
arranged time-symmetrically so that a step by -dt undoes a step by +dt to
round-off:

  coupled step   free(dt/2) . phase(W, dt/2) . [KG driven step, densities
                 at the step center] . phase(W, dt/2) . free(dt/2),
                 with W built from the fields after a half homogeneous
                 Klein-Gordon propagation;

  cubic step     free(dt/2) . phase(W*, dt) . free(dt/2), with W* the
                 self-interaction matrix evaluated at the implicitly
                 centered state phase(W*, dt/2) psi_mid; the fixed point
                 contracts with factor O(gamma |psi|^2 dt) and is iterated
                 to round-off stagnation.

Every substep is unitary on the spinor, so the L2 norm is conserved to
round-off accumulation over arbitrarily many steps.

The step kernels operate on a weighted family of orbitals sharing one
interaction matrix; the one-body steppers call them with a single orbital
of unit weight, and the many-body steppers reuse the identical code path
(which is what makes the rank-one reduction exact).
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, replace

import numpy as np

from . import dirac as _dirac
from .dirac import DensityBundle, InteractionMatrix, densities, free_propagate
from .grid import TorusGrid
from .kleingordon import (
    Couplings,
    KGState,
    instantaneous_fields,
    kg_driven_step,
    kg_homogeneous_step,
)

BLOWUP_AMPLITUDE = 1e12


class BlowUpError(RuntimeError):
    """Raised when a field leaves the finite range (numerical blow-up)."""


@dataclass
class DKGSystemState:
    grid: TorusGrid
    psi: np.ndarray
    kg: KGState
    couplings: Couplings
    t: float = 0.0


@dataclass
class NLDState:
    grid: TorusGrid
    psi: np.ndarray
    couplings: Couplings
    t: float = 0.0


@dataclass
class StepReport:
    """Per-step monitors: recorded on every step of :func:`evolve`."""

    l2_drift: np.ndarray
    charge: np.ndarray
    max_amplitude: np.ndarray
    wall_time: np.ndarray


def _check_finite(arrays, t: float) -> None:
    for arr in arrays:
        a = float(np.max(np.abs(arr)))
        if not np.isfinite(a) or a > BLOWUP_AMPLITUDE:
            raise BlowUpError(f"field amplitude {a!r} at t={t:.6g} signals blow-up")


def weighted_densities(orbitals, occupations) -> DensityBundle:
    """Occupation-weighted sum of the orbital densities."""
    bundle = densities(orbitals[0]).scaled(float(occupations[0]))
    for orb, occ in zip(orbitals[1:], occupations[1:]):
        bundle = bundle + densities(orb).scaled(float(occ))
    return bundle


def nld_interaction(
    grid: TorusGrid, bundle: DensityBundle, couplings: Couplings
) -> InteractionMatrix:
    """Cubic self-interaction W = -g_o alpha.J - g_s beta rho_s + g_o rho_v."""
    return InteractionMatrix.from_fields(
        -couplings.gamma_omega * bundle.current,
        -couplings.gamma_sigma * bundle.rho_s,
        couplings.gamma_omega * bundle.rho_v,
    )


def _interaction_from_kg(kg: KGState) -> InteractionMatrix:
    # non-reduced form: alpha . (-bomega) + beta S + V Id (beta m sits in D)
    return InteractionMatrix.from_fields(-kg.omega[1:], kg.s, kg.omega[0])


_FIXED_POINT_TOL = 1e-14
_FIXED_POINT_MAXIT = 16


def _coeff_delta(w_a: InteractionMatrix, w_b: InteractionMatrix) -> float:
    return max(
        float(np.max(np.abs(w_a.alpha_coeff - w_b.alpha_coeff))),
        float(np.max(np.abs(w_a.beta_coeff - w_b.beta_coeff))),
        float(np.max(np.abs(w_a.id_coeff - w_b.id_coeff))),
    )


def _centered_nld_interaction(grid, orbitals, occupations, couplings, dt):
    """Solve W = W_nl(phase(W, dt/2) orbitals) by fixed-point iteration."""
    w = nld_interaction(grid, weighted_densities(orbitals, occupations).dealiased(grid), couplings)
    scale = max(
        1.0,
        float(np.max(np.abs(w.alpha_coeff))),
        float(np.max(np.abs(w.beta_coeff))),
        float(np.max(np.abs(w.id_coeff))),
    )
    for _ in range(_FIXED_POINT_MAXIT):
        rotated = [w.phase_step(orb, 0.5 * dt) for orb in orbitals]
        w_next = nld_interaction(
            grid, weighted_densities(rotated, occupations).dealiased(grid), couplings
        )
        delta = _coeff_delta(w_next, w)
        w = w_next
        if delta <= _FIXED_POINT_TOL * scale:
            break
    return w


def _advance_orbitals_nld(grid, orbitals, occupations, couplings, dt):
    m = couplings.fermion_mass
    orbitals = [free_propagate(grid, orb, 0.5 * dt, m) for orb in orbitals]
    w = _centered_nld_interaction(grid, orbitals, occupations, couplings, dt)
    orbitals = [w.phase_step(orb, dt) for orb in orbitals]
    return [free_propagate(grid, orb, 0.5 * dt, m) for orb in orbitals]


def _advance_orbitals_dkg(grid, orbitals, occupations, kg, couplings, dt):
    m = couplings.fermion_mass
    orbitals = [free_propagate(grid, orb, 0.5 * dt, m) for orb in orbitals]
    w = _interaction_from_kg(kg_homogeneous_step(grid, kg, 0.5 * dt))
    orbitals = [w.phase_step(orb, 0.5 * dt) for orb in orbitals]
    bundle = weighted_densities(orbitals, occupations).dealiased(grid)
    kg_new = kg_driven_step(grid, kg, bundle, couplings, dt)
    orbitals = [w.phase_step(orb, 0.5 * dt) for orb in orbitals]
    orbitals = [free_propagate(grid, orb, 0.5 * dt, m) for orb in orbitals]
    return orbitals, kg_new


def dkg_step(state: DKGSystemState, dt: float) -> DKGSystemState:
    """One Strang step of the coupled Dirac-Klein-Gordon system."""
    if dt == 0:
        raise ValueError("dt must be nonzero")
    (psi,), kg = _advance_orbitals_dkg(
        state.grid, [state.psi], [1.0], state.kg, state.couplings, dt
    )
    _check_finite((psi, kg.s, kg.omega), state.t + dt)
    return replace(state, psi=psi, kg=kg, t=state.t + dt)


def nld_step(state: NLDState, dt: float) -> NLDState:
    """One Strang step of the cubic nonlinear Dirac equation."""
    if dt == 0:
        raise ValueError("dt must be nonzero")
    (psi,) = _advance_orbitals_nld(state.grid, [state.psi], [1.0], state.couplings, dt)
    _check_finite((psi,), state.t + dt)
    return replace(state, psi=psi, t=state.t + dt)


def substitute_instantaneous(state: DKGSystemState) -> DKGSystemState:
    """Overwrite the fields with their instantaneous values.

    The fields are slaved to the (dealiased) densities and the velocities
    to the corresponding density time derivatives, so the substituted
    state satisfies the instantaneous relation to second order along the
    flow.  Used by the frozen-field consistency check against the cubic
    stepper.
    """
    g = state.grid
    c = state.couplings
    bundle = densities(state.psi).dealiased(g)
    s, omega = instantaneous_fields(bundle, c)
    drho_s, dj = _dirac.density_time_derivatives(g, state.psi, s, omega, c.fermion_mass)
    kg = replace(
        state.kg,
        s=s,
        s_dot=-c.gamma_sigma * drho_s,
        omega=omega,
        omega_dot=c.gamma_omega * dj,
    )
    return replace(state, kg=kg)


def dkg_step_instantaneous(state: DKGSystemState, dt: float) -> DKGSystemState:
    """Coupled step with the fields held at their instantaneous values."""
    return dkg_step(substitute_instantaneous(state), dt)


_STEPPERS = {
    DKGSystemState: dkg_step,
    NLDState: nld_step,
}


@dataclass
class Trajectory:
    """Uniformly sampled states (always including t=0 and t=T)."""

    times: np.ndarray
    states: list
    report: StepReport

    @property
    def psi_samples(self) -> np.ndarray:
        return np.stack([s.psi for s in self.states])


def evolve(state, t_final: float, dt: float, sample_every: int = 1, step=None) -> Trajectory:
    """Run n = |t_final|/dt steps, sampling every ``sample_every`` steps.

    ``t_final`` may be negative (backward evolution with -dt).  The final
    state is always included in the samples; |t_final|/dt must be an
    integer number of steps.  Deterministic for fixed inputs.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    n_steps = round(abs(t_final) / dt)
    if abs(n_steps * dt - abs(t_final)) > 1e-9 * max(dt, abs(t_final)):
        raise ValueError(f"t_final={t_final} is not an integer multiple of dt={dt}")
    if step is None:
        step = _STEPPERS[type(state)]
    signed_dt = dt if t_final >= 0 else -dt

    times = [state.t]
    states = [state]
    drift = np.empty(n_steps)
    charge = np.empty(n_steps)
    max_amp = np.empty(n_steps)
    wall = np.empty(n_steps)
    l2_in = state.grid.l2_norm(state.psi)

    current = state
    for i in range(n_steps):
        t0 = _time.perf_counter()
        current = step(current, signed_dt)
        wall[i] = _time.perf_counter() - t0
        l2 = current.grid.l2_norm(current.psi)
        drift[i] = abs(l2 - l2_in) / l2_in if l2_in > 0 else 0.0
        charge[i] = l2**2
        max_amp[i] = float(np.max(np.abs(current.psi)))
        if (i + 1) % sample_every == 0 or i + 1 == n_steps:
            times.append(current.t)
            states.append(current)

    return Trajectory(
        times=np.array(times),
        states=states,
        report=StepReport(l2_drift=drift, charge=charge, max_amplitude=max_amp, wall_time=wall),
    )


def error_metric(traj_a: Trajectory, traj_b: Trajectory, s_prime: float) -> float:
    """Sup over matching samples of the H^s' distance of the spinors."""
    if len(traj_a.states) != len(traj_b.states) or not np.allclose(
        traj_a.times, traj_b.times, atol=1e-12, rtol=0
    ):
        raise ValueError("trajectories have mismatched sample times")
    grid = traj_a.states[0].grid
    if grid.shape != traj_b.states[0].grid.shape:
        raise ValueError("trajectories live on different grids")
    return max(
        grid.sobolev_norm(a.psi - b.psi, s_prime)
        for a, b in zip(traj_a.states, traj_b.states)
    )
