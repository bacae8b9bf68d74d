"""Dirac algebra, spinor fields, densities, and the exact free propagator.

Spinor fields are complex arrays of shape (4, *grid.shape).  The Dirac
representation is used throughout:

    beta = diag(1, 1, -1, -1),   alpha_k = [[0, sigma_k], [sigma_k, 0]].

The free operator is D = -i alpha . grad + beta m; in Fourier space it is
the Hermitian matrix Dhat(k) = alpha . k + beta m with Dhat^2 =
(|k|^2 + m^2) Id, which makes the propagator exp(-i t D) available in
closed form per mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import TorusGrid

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=np.complex128,
)

BETA = np.diag([1.0, 1.0, -1.0, -1.0]).astype(np.complex128)

ALPHA = np.zeros((3, 4, 4), dtype=np.complex128)
for _k in range(3):
    ALPHA[_k, :2, 2:] = SIGMA[_k]
    ALPHA[_k, 2:, :2] = SIGMA[_k]
del _k


def apply_matrix(mat: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Pointwise 4x4 matrix times spinor: (4,4) x (4, ...) -> (4, ...)."""
    return np.einsum("ab,b...->a...", mat, psi)


@dataclass
class DensityBundle:
    """Pointwise bilinear densities of a spinor field.

    rho_s = <beta psi, psi>, rho_v = |psi|^2, current[k] = <psi, alpha_k psi>.
    ``current`` has shape (3, *grid.shape); all entries are real.
    """

    rho_s: np.ndarray
    rho_v: np.ndarray
    current: np.ndarray

    def scaled(self, factor: float) -> "DensityBundle":
        return DensityBundle(factor * self.rho_s, factor * self.rho_v, factor * self.current)

    def __add__(self, other: "DensityBundle") -> "DensityBundle":
        return DensityBundle(
            self.rho_s + other.rho_s,
            self.rho_v + other.rho_v,
            self.current + other.current,
        )

    def dealiased(self, grid: TorusGrid) -> "DensityBundle":
        return DensityBundle(
            grid.dealias(self.rho_s),
            grid.dealias(self.rho_v),
            grid.dealias(self.current),
        )


def densities(psi: np.ndarray) -> DensityBundle:
    """Scalar density, vector density and spatial current of a spinor."""
    rho_s = (
        np.abs(psi[0]) ** 2 + np.abs(psi[1]) ** 2 - np.abs(psi[2]) ** 2 - np.abs(psi[3]) ** 2
    )
    rho_v = np.sum(np.abs(psi) ** 2, axis=0)
    current = np.stack(
        [np.sum(np.conj(psi) * apply_matrix(ALPHA[k], psi), axis=0).real for k in range(3)]
    )
    return DensityBundle(rho_s, rho_v, current)


def free_propagate(grid: TorusGrid, psi: np.ndarray, t: float, mass: float) -> np.ndarray:
    """Apply exp(-i t D) exactly: per mode cos(t*lam) - i sin(t*lam)/lam * Dhat."""
    psi_hat = grid.forward(psi)
    lam = np.sqrt(grid.k_squared + mass**2)
    cos_l = np.cos(t * lam)
    # sin(t*lam)/lam; lam >= mass > 0 so no zero division
    sinc_l = np.sin(t * lam) / lam
    d_psi = mass * apply_matrix(BETA, psi_hat)
    km = grid.k_mesh()
    for axis in range(grid.dim):
        d_psi += km[axis] * apply_matrix(ALPHA[axis], psi_hat)
    return grid.inverse(cos_l * psi_hat - 1j * sinc_l * d_psi)


def dirac_apply(grid: TorusGrid, psi: np.ndarray, mass: float) -> np.ndarray:
    """D psi = (-i alpha . grad + beta m) psi, gradients spectral."""
    out = mass * apply_matrix(BETA, psi).astype(np.complex128)
    for axis in range(grid.dim):
        grad = grid.derivative(psi, axis)
        out += -1j * apply_matrix(ALPHA[axis], grad)
    return out


@dataclass
class InteractionMatrix:
    """Hermitian pointwise interaction W = alpha . a + beta b + c Id.

    ``alpha_coeff`` has shape (3, *grid.shape); ``beta_coeff`` and
    ``id_coeff`` have shape grid.shape.  All three are real, which makes W
    Hermitian at every grid point by construction.  Because
    (alpha . a + beta b)^2 = (|a|^2 + b^2) Id, both W psi and the exact
    unitary exp(-i dt W) have closed forms.
    """

    alpha_coeff: np.ndarray
    beta_coeff: np.ndarray
    id_coeff: np.ndarray

    HERMITICITY_TOL = 1e-12

    @classmethod
    def from_fields(
        cls, alpha_coeff: np.ndarray, beta_coeff: np.ndarray, id_coeff: np.ndarray
    ) -> "InteractionMatrix":
        """Build W, checking that the coefficient fields are real."""
        parts = []
        for name, arr in (("alpha", alpha_coeff), ("beta", beta_coeff), ("id", id_coeff)):
            arr = np.asarray(arr)
            if np.iscomplexobj(arr):
                scale = max(np.max(np.abs(arr)), 1.0)
                if np.max(np.abs(arr.imag)) > cls.HERMITICITY_TOL * scale:
                    raise ValueError(f"non-Hermitian W: {name} coefficient is not real")
                arr = arr.real
            parts.append(arr)
        return cls(*parts)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Pointwise W psi."""
        out = (self.id_coeff + 0j) * psi
        out += self.beta_coeff * apply_matrix(BETA, psi)
        for k in range(3):
            out += self.alpha_coeff[k] * apply_matrix(ALPHA[k], psi)
        return out

    def phase_step(self, psi: np.ndarray, dt: float) -> np.ndarray:
        """Apply the exact pointwise unitary exp(-i dt W).

        With K = alpha . a + beta b and r = sqrt(|a|^2 + b^2) one has
        K^2 = r^2 Id, hence exp(-i dt W) =
        exp(-i dt c) (cos(dt r) Id - i sin(dt r)/r K); this is the
        spectral decomposition of the Hermitian 4x4 exponential in closed
        form, so |psi| is preserved pointwise to round-off.
        """
        r = np.sqrt(np.sum(self.alpha_coeff**2, axis=0) + self.beta_coeff**2)
        phase = np.exp(-1j * dt * self.id_coeff)
        cos_r = np.cos(dt * r)
        # sin(dt r)/r with the exact r -> 0 limit dt
        sinc_r = dt * np.sinc(dt * r / np.pi)
        k_psi = self.beta_coeff * apply_matrix(BETA, psi)
        for k in range(3):
            k_psi += self.alpha_coeff[k] * apply_matrix(ALPHA[k], psi)
        return phase * (cos_r * psi - 1j * sinc_r * k_psi)

    def as_matrix_field(self) -> np.ndarray:
        """Dense (4, 4, *grid.shape) representation, for tests and oracles."""
        out = np.multiply.outer(np.eye(4, dtype=np.complex128), self.id_coeff + 0j)
        out += np.multiply.outer(BETA, self.beta_coeff + 0j)
        for k in range(3):
            out += np.multiply.outer(ALPHA[k], self.alpha_coeff[k] + 0j)
        return out


def dt_rho_s(grid: TorusGrid, psi: np.ndarray, mass: float) -> np.ndarray:
    """Time derivative of the scalar density along the free flow.

    Returns 2 Im <beta psi, D psi> pointwise, with D evaluated spectrally.
    """
    d_psi = dirac_apply(grid, psi, mass)
    beta_psi = apply_matrix(BETA, psi)
    return 2.0 * np.sum(np.conj(beta_psi) * d_psi, axis=0).imag


def density_time_derivatives(
    grid: TorusGrid,
    psi: np.ndarray,
    s_field: np.ndarray,
    omega: np.ndarray,
    mass: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Initial time derivatives of the densities for given field data.

    For a solution of the coupled system with data (psi, S, omega) these
    are the t=0 derivatives of rho_s and of the space-time current
    J = (rho_v, J_1, J_2, J_3):

        drho_s = 2 Re < i beta psi, alpha . (-i grad - bomega) psi >
        drho_v = -2 Re < psi, alpha . grad psi >
        dJ_k   = 2 Re < i alpha_k psi, [alpha . (-i grad - bomega)
                                         + beta (m + S)] psi >

    ``omega`` has shape (4, *grid.shape) with component 0 the scalar part V
    (which drops out of all three formulas) and components 1..3 the spatial
    vector part.  Returns (drho_s, dJ) with dJ of shape (4, *grid.shape).
    """
    grad = [grid.derivative(psi, axis) for axis in range(grid.dim)]
    # alpha . (-i grad - bomega) psi
    transport = np.zeros_like(psi)
    for k in range(3):
        arg = -omega[1 + k] * psi
        if k < grid.dim:
            arg = arg - 1j * grad[k]
        transport += apply_matrix(ALPHA[k], arg)

    drho_s = 2.0 * np.sum(np.conj(1j * apply_matrix(BETA, psi)) * transport, axis=0).real

    drho_v = np.zeros(grid.shape)
    for k in range(grid.dim):
        drho_v -= 2.0 * np.sum(np.conj(psi) * apply_matrix(ALPHA[k], grad[k]), axis=0).real

    with_beta = transport + (mass + s_field) * apply_matrix(BETA, psi)
    dj = np.empty((4,) + grid.shape)
    dj[0] = drho_v
    for k in range(3):
        dj[1 + k] = 2.0 * np.sum(
            np.conj(1j * apply_matrix(ALPHA[k], psi)) * with_beta, axis=0
        ).real
    return drho_s, dj
