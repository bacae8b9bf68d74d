"""Initial-data recipes shared by the harness and the tests."""

from __future__ import annotations

import numpy as np

from .dirac import densities, density_time_derivatives
from .grid import TorusGrid, synthesize_rough_field
from .kleingordon import Couplings, KGState, spacetime_current

SMOOTH_SPINOR_WEIGHTS = np.array([1.0, 0.3, 0.2j, 0.0], dtype=np.complex128)

# amplitudes of the rough-data recipe (sigma-rough reduced fields plus a
# rough spinor perturbation on top of the smooth preset)
ROUGH_PSI_DELTA = 0.1
ROUGH_SBAR_AMPLITUDE = 0.5
ROUGH_OMEGABAR_AMPLITUDE = 0.25


def radius_squared(grid: TorusGrid) -> np.ndarray:
    """|x - center|^2 with the center at the middle of the box."""
    half = 0.5 * grid.length
    return sum((x - half) ** 2 for x in grid.mesh())


def smooth_spinor(grid: TorusGrid) -> np.ndarray:
    """Gaussian spinor exp(-r^2/2) (1, 0.3, 0.2i, 0), normalized in L^2."""
    envelope = np.exp(-0.5 * radius_squared(grid))
    psi = SMOOTH_SPINOR_WEIGHTS.reshape((4,) + (1,) * grid.dim) * envelope
    return psi / grid.l2_norm(psi)


def smooth_scalar(grid: TorusGrid) -> np.ndarray:
    """Scalar field preset 0.5 exp(-r^2)."""
    return 0.5 * np.exp(-radius_squared(grid))


def rough_spinor(grid: TorusGrid, sigma: float, seed: int, delta: float = ROUGH_PSI_DELTA) -> np.ndarray:
    """Smooth spinor plus a complex sigma-rough perturbation, L^2-normalized."""
    psi = smooth_spinor(grid).copy()
    for comp in range(4):
        re = synthesize_rough_field(grid, sigma, seed + 2 * comp)
        im = synthesize_rough_field(grid, sigma, seed + 2 * comp + 1)
        psi[comp] += delta * (re + 1j * im)
    return psi / grid.l2_norm(psi)


def rough_reduced_fields(grid: TorusGrid, sigma: float, seed: int):
    """sigma-rough targets for the reduced fields (sbar_in, omegabar_in)."""
    s_bar = ROUGH_SBAR_AMPLITUDE * synthesize_rough_field(grid, sigma, seed + 100)
    omega_bar = np.stack(
        [
            ROUGH_OMEGABAR_AMPLITUDE * synthesize_rough_field(grid, sigma, seed + 110 + mu)
            for mu in range(4)
        ]
    )
    return s_bar, omega_bar


def consistent_field_data(grid: TorusGrid, psi: np.ndarray, couplings: Couplings):
    """Field data satisfying the instantaneous relation, with matched velocities.

    Returns (s, s_dot, omega, omega_dot) such that the reduced variables
    and their time derivatives vanish at t=0.
    """
    bundle = densities(psi)
    s = -couplings.gamma_sigma * bundle.rho_s
    omega = couplings.gamma_omega * spacetime_current(bundle)
    drho_s, dj = density_time_derivatives(grid, psi, s, omega, couplings.fermion_mass)
    return s, -couplings.gamma_sigma * drho_s, omega, couplings.gamma_omega * dj


def initial_data(
    grid: TorusGrid,
    couplings: Couplings,
    preset: str,
    field_init: str,
    m_sigma: float,
    m_omega: float,
    rough_sigma: float = 3.0,
    seed: int = 7,
) -> tuple[np.ndarray, KGState]:
    """Assemble (psi_in, KGState) for a named preset and field-init mode.

    preset: 'smooth' (Gaussian data) or 'rough' (sigma-rough reduced fields
    and spinor perturbation).  field_init: 'consistent' slaves the fields
    and velocities to the spinor densities, 'mismatched' zeroes all field
    data, 'preset' uses the recipe's own field profiles.
    """
    zeros = np.zeros(grid.shape)
    zeros4 = np.zeros((4,) + grid.shape)

    if preset == "smooth":
        psi = smooth_spinor(grid)
        if field_init == "consistent":
            s, s_dot, omega, omega_dot = consistent_field_data(grid, psi, couplings)
        elif field_init == "mismatched":
            s, s_dot, omega, omega_dot = zeros, zeros, zeros4, zeros4
        elif field_init == "preset":
            s, s_dot, omega, omega_dot = smooth_scalar(grid), zeros, zeros4, zeros4
        else:
            raise ValueError(f"unknown field_init {field_init!r}")
    elif preset == "rough":
        psi = rough_spinor(grid, rough_sigma, seed)
        s_bar, omega_bar = rough_reduced_fields(grid, rough_sigma, seed)
        bundle = densities(psi)
        # fields chosen so the reduced variables equal the rough targets
        s = s_bar - couplings.gamma_sigma * bundle.rho_s
        omega = omega_bar + couplings.gamma_omega * spacetime_current(bundle)
        if field_init == "mismatched":
            s, omega = zeros, zeros4
        s_dot, omega_dot = zeros, zeros4
    else:
        raise ValueError(f"unknown preset {preset!r}")

    kg = KGState(s=s, s_dot=s_dot, omega=omega, omega_dot=omega_dot,
                 m_sigma=m_sigma, m_omega=m_omega)
    return psi, kg


def hermite_orbitals(grid: TorusGrid, rank: int, seed: int = 0) -> np.ndarray:
    """Orthonormal Gaussian-type spinor orbitals (rank, 4, *grid.shape).

    Hermite-style envelopes exp(-r^2/2) * {1, x, x^2-1, ...} attached to
    generic spinor directions, then Gram-Schmidt orthonormalized in
    L^2(box, C^4).
    """
    rng = np.random.default_rng(seed)
    r2 = radius_squared(grid)
    x1 = grid.mesh()[0] - 0.5 * grid.length
    envelope = np.exp(-0.5 * r2)
    orbitals = []
    for k in range(rank):
        profile = envelope * x1**k if k < 2 else envelope * (x1**k - x1 ** (k - 2))
        direction = rng.normal(size=4) + 1j * rng.normal(size=4)
        raw = np.multiply.outer(direction, profile)
        for prev in orbitals:
            raw = raw - grid.l2_inner(prev, raw) * prev
        orbitals.append(raw / grid.l2_norm(raw))
    return np.stack(orbitals)
