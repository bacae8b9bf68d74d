"""Periodic-box spectral grid: transforms, multipliers, Sobolev norms.

Conventions
-----------
Fields live on the uniform grid x_j = j*L/N of the torus [0, L)^d and are
stored as plain numpy arrays of shape ``grid.shape`` (leading axes are
allowed and treated as independent components, e.g. the 4 spinor slots).

The forward transform returns coefficients ``u_hat`` indexed by the
wavenumbers k = 2*pi*n/L, n in the symmetric integer range of
``numpy.fft.fftfreq``, normalized so that

    sum_k |u_hat(k)|^2  ==  sum_j |u(x_j)|^2 * (L/N)^d,

i.e. the transform is unitary with respect to the box quadrature weight
(L/N)^d.  With this choice ``sobolev_norm(u, 0)`` is the continuum L^2
norm over the box and the H^s norm is

    ||u||_{H^s} = ( sum_k (1+|k|^2)^s |u_hat(k)|^2 )^{1/2}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on [0, L)^dim with the same N and L per axis.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1, 2 or 3.
    n : int
        Points per axis; a power of two, at least 8.
    length : float
        Box side length L (same on every axis).
    """

    dim: int
    n: int
    length: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"points per axis must be a power of two >= 8, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"box length must be positive, got {self.length}")

    # -- geometry -----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return (self.length / self.n) ** self.dim

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays x_j = j*L/N, one per axis."""
        x = np.arange(self.n) * self.spacing
        return (x,) * self.dim

    def mesh(self) -> list[np.ndarray]:
        """Coordinate meshes of shape ``self.shape``, indexing 'ij'."""
        return list(np.meshgrid(*self.axes, indexing="ij"))

    # -- wavenumbers ---------------------------------------------------------

    @property
    def mode_numbers(self) -> np.ndarray:
        """Integer mode numbers n in fft layout (includes the zero mode)."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n)

    @property
    def k_axis(self) -> np.ndarray:
        """1D wavenumbers k = 2*pi*n/L in fft layout."""
        return 2.0 * np.pi * self.mode_numbers / self.length

    def k_mesh(self) -> list[np.ndarray]:
        """Wavenumber meshes (one per axis), each of shape ``self.shape``."""
        if "k_mesh" not in self._cache:
            self._cache["k_mesh"] = list(np.meshgrid(*(self.k_axis,) * self.dim, indexing="ij"))
        return self._cache["k_mesh"]

    @property
    def k_squared(self) -> np.ndarray:
        """|k|^2 mesh of shape ``self.shape``."""
        if "k_squared" not in self._cache:
            self._cache["k_squared"] = sum(k * k for k in self.k_mesh())
        return self._cache["k_squared"]

    @property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: True where |n| <= N/3 on every axis."""
        if "dealias_mask" not in self._cache:
            keep = np.abs(self.mode_numbers) <= self.n / 3.0
            mask = np.ones(self.shape, dtype=bool)
            for axis in range(self.dim):
                sl = [None] * self.dim
                sl[axis] = slice(None)
                mask &= keep[tuple(sl)]
            self._cache["dealias_mask"] = mask
        return self._cache["dealias_mask"]

    # -- transforms ----------------------------------------------------------

    def _check_shape(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        if values.shape[-self.dim:] != self.shape:
            raise ValueError(
                f"field shape {values.shape} does not match grid shape {self.shape}"
            )
        return values

    @property
    def _spatial_axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Forward transform; see module docstring for the normalization."""
        values = self._check_shape(values)
        scale = self.length ** (self.dim / 2) / self.n**self.dim
        return np.fft.fftn(values, axes=self._spatial_axes) * scale

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`forward` (complex output)."""
        coeffs = self._check_shape(coeffs)
        scale = self.n**self.dim / self.length ** (self.dim / 2)
        return np.fft.ifftn(coeffs * scale, axes=self._spatial_axes)

    def inverse_real(self, coeffs: np.ndarray) -> np.ndarray:
        """Inverse transform of a Hermitian-symmetric spectrum, real output."""
        return self.inverse(coeffs).real

    # -- spectral operations ---------------------------------------------------

    def apply_multiplier(self, values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        """Apply a Fourier multiplier: ifft(symbol * fft(values)).

        ``symbol`` is either an array over the grid's wavenumber set (shape
        ``self.shape``) or a callable receiving the wavenumber meshes.
        Real input with a real, even symbol returns a real-typed array.
        """
        values = self._check_shape(values)
        if callable(symbol):
            symbol = symbol(*self.k_mesh())
        symbol = np.asarray(symbol)
        if not np.all(np.isfinite(symbol)):
            raise ValueError("multiplier symbol contains non-finite values")
        out = self.inverse(self.forward(values) * symbol)
        if np.isrealobj(values) and np.isrealobj(symbol):
            return out.real
        return out

    def derivative(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Spectral partial derivative along the given spatial axis."""
        values = self._check_shape(values)
        k = self.k_mesh()[axis]
        out = self.inverse(self.forward(values) * (1j * k))
        return out.real if np.isrealobj(values) else out

    def dealias(self, values: np.ndarray) -> np.ndarray:
        """Zero all modes with |n| > N/3 on any axis (idempotent)."""
        values = self._check_shape(values)
        out = self.inverse(self.forward(values) * self.dealias_mask)
        return out.real if np.isrealobj(values) else out

    def sobolev_norm(self, values: np.ndarray, s: float) -> float:
        """H^s norm; leading component axes are summed in quadrature."""
        values = self._check_shape(values)
        coeffs = self.forward(values)
        weight = (1.0 + self.k_squared) ** s if s != 0 else 1.0
        return float(np.sqrt(np.sum(weight * np.abs(coeffs) ** 2)))

    def l2_inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        """Continuum-consistent L^2(box) inner product <a, b>, antilinear in a."""
        a = self._check_shape(a)
        b = self._check_shape(b)
        return complex(np.sum(np.conj(a) * b) * self.cell_volume)

    def l2_norm(self, values: np.ndarray) -> float:
        values = self._check_shape(values)
        return float(np.sqrt(np.sum(np.abs(values) ** 2) * self.cell_volume))


def synthesize_rough_field(grid: TorusGrid, sigma: float, seed: int) -> np.ndarray:
    """Real random field with prescribed spectral decay, barely in H^sigma.

    The spectral coefficients have modulus (1+|k|^2)^(-(2*sigma+d+2*eps)/4)
    with eps = 0.05, so the H^sigma norm is finite while H^(sigma+delta)
    norms grow with resolution for any delta > eps.  Phases are drawn from
    the seed and antisymmetrized, which keeps the modulus exact and the
    field real.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    eps = 0.05
    modulus = (1.0 + grid.k_squared) ** (-(2.0 * sigma + grid.dim + 2.0 * eps) / 4.0)
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=grid.shape)
    # theta(k) -> (theta(k) - theta(-k))/2 is odd under k -> -k, so the
    # spectrum M*exp(i*phi) is exactly Hermitian with modulus M; the
    # self-conjugate modes (zero and Nyquist) come out real automatically.
    rev = (-np.arange(grid.n)) % grid.n
    theta_rev = theta[np.ix_(*(rev,) * grid.dim)] if grid.dim > 1 else theta[rev]
    phi = 0.5 * (theta - theta_rev)
    coeffs = modulus * np.exp(1j * phi)
    return grid.inverse_real(coeffs)
