"""Fourier kernels and assembly of the subregion-averaged system.

Kernels are evaluated in cell-scaled variables: wavenumbers are multiplied by
the period ``a`` before forming ``A = nu^2 / (nu^2 - (xi + q)^2)`` so pole
detection is unit-free.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NearPole
from .unit_cell import DiscretizedCell, ReferenceMedium, Subregion

DEFAULT_N_MAX = 10
DEFAULT_EPS_POLE = 1e-8


@dataclass(frozen=True)
class SpectralBasis:
    """Nonzero Fourier wavenumbers ``+-2 pi n / a`` for ``n = 1..n_max``.

    Stored interleaved as ``[xi_1, -xi_1, xi_2, -xi_2, ...]`` so that every
    accumulation over the basis pairs each term with its mirror image.
    """

    n_max: int
    period: float

    def __post_init__(self):
        if int(self.n_max) < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max!r}")
        if not self.period > 0:
            raise ValueError(f"period must be > 0, got {self.period!r}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @classmethod
    def for_cell(cls, dcell: DiscretizedCell, n_max: int | None = None) -> "SpectralBasis":
        if n_max is None:
            n_max = max(DEFAULT_N_MAX, max(dcell.counts))
        return cls(n_max, dcell.cell.period)

    @property
    def xi(self) -> np.ndarray:
        n = np.arange(1, self.n_max + 1) * (2.0 * np.pi / self.period)
        return np.column_stack([n, -n]).ravel()


def g_alpha(subregion: Subregion, xi) -> np.ndarray:
    """Subregion average of ``exp(i xi x)``."""
    xi = np.asarray(xi, dtype=float)
    half = 0.5 * xi * subregion.length
    # np.sinc(t) = sin(pi t)/(pi t); handles xi = 0 exactly
    return np.exp(1j * xi * subregion.center) * np.sinc(half / np.pi)


def geometry_matrix(dcell: DiscretizedCell, basis: SpectralBasis) -> np.ndarray:
    """``G[alpha, j] = f_alpha g_alpha(xi_j)``; material independent."""
    xi = basis.xi
    phase = np.exp(1j * np.outer(dcell.centers, xi))
    shape = np.sinc(np.outer(dcell.lengths, xi) / (2.0 * np.pi))
    return dcell.fractions[:, None] * phase * shape


def _pole_check(nu2_hat, k_hat, eps_pole, omega, q):
    den = nu2_hat - k_hat * k_hat
    near = np.abs(den) <= eps_pole * np.maximum(nu2_hat, k_hat * k_hat)
    if np.any(near):
        raise NearPole("reference-medium pole nu = |xi + q|", omega=omega, q=q)
    return den


def kernel_A(xi, omega, q, ref: ReferenceMedium, period: float = 1.0, eps_pole=DEFAULT_EPS_POLE):
    k_hat = (np.asarray(xi, dtype=float) + q) * period
    nu2_hat = (float(ref.nu(omega)) * period) ** 2
    den = _pole_check(nu2_hat, k_hat, eps_pole, omega, q)
    return nu2_hat / den + 0j


def kernel_B(xi, omega, q, ref: ReferenceMedium, period: float = 1.0, eps_pole=DEFAULT_EPS_POLE):
    """``B = (xi + q) A``, carrying units of 1/length."""
    return (np.asarray(xi, dtype=float) + q) * kernel_A(xi, omega, q, ref, period, eps_pole)


@dataclass(frozen=True)
class AssembledSystem:
    """Matrices of the subregion-averaged consistency conditions at one (omega, q).

    ``A_D`` acts on the eigenstress unknowns (rows/cols ``idx_sigma``),
    ``A_rho`` on the eigenvelocity unknowns (``idx_velocity``).  ``B_bar`` is
    the full square coupling over all subregions; the rectangular blocks the
    solve needs are ``B_su`` (stress rows, velocity cols) and ``B_us``.
    """

    omega: float
    q: float
    ref: ReferenceMedium
    fractions: np.ndarray
    idx_sigma: np.ndarray
    idx_velocity: np.ndarray
    A_bar: np.ndarray
    B_bar: np.ndarray
    A_D: np.ndarray
    A_rho: np.ndarray
    kernel_a: np.ndarray
    kernel_b: np.ndarray
    geometry: np.ndarray

    @property
    def nu2(self) -> float:
        return float(self.ref.nu(self.omega)) ** 2

    @property
    def trivial(self) -> bool:
        return self.idx_sigma.size == 0 and self.idx_velocity.size == 0

    @property
    def B_su(self) -> np.ndarray:
        return self.B_bar[np.ix_(self.idx_sigma, self.idx_velocity)]

    @property
    def B_us(self) -> np.ndarray:
        return self.B_bar[np.ix_(self.idx_velocity, self.idx_sigma)]

    @property
    def f_sigma(self) -> np.ndarray:
        return self.fractions[self.idx_sigma]

    @property
    def f_velocity(self) -> np.ndarray:
        return self.fractions[self.idx_velocity]

    def block_matrix(self) -> np.ndarray:
        """Coefficient matrix of the coupled system in unknowns ``[Sigma~; U~dot]``."""
        D0, rho0, w = self.ref.compliance, self.ref.density, self.omega
        nS, nU = self.idx_sigma.size, self.idx_velocity.size
        K = np.empty((nS + nU, nS + nU), dtype=complex)
        K[:nS, :nS] = -self.A_D
        K[:nS, nS:] = self.B_su / (w * D0)
        K[nS:, :nS] = self.B_us / (w * rho0)
        K[nS:, nS:] = -self.A_rho
        return K


def hermitian_defect(M: np.ndarray) -> float:
    """``max|M - M^H| / max|M|``; zero for an exactly Hermitian matrix."""
    if M.size == 0:
        return 0.0
    scale = np.abs(M).max()
    if scale == 0.0:
        return 0.0
    return float(np.abs(M - M.conj().T).max() / scale)


def assemble(
    dcell: DiscretizedCell,
    basis: SpectralBasis,
    omega: float,
    q: float,
    eps_pole: float = DEFAULT_EPS_POLE,
    geometry: np.ndarray | None = None,
) -> AssembledSystem:
    if not omega > 0:
        raise ValueError(f"omega must be > 0, got {omega!r}")
    ref = dcell.ref
    a = dcell.cell.period
    xi = basis.xi
    A = kernel_A(xi, omega, q, ref, a, eps_pole)
    B = (xi + q) * A
    G = geometry_matrix(dcell, basis) if geometry is None else geometry
    GH = G.conj().T
    A_bar = (G * A) @ GH
    B_bar = (G * B) @ GH

    f = dcell.fractions
    iS = np.flatnonzero(dcell.active_sigma)
    iU = np.flatnonzero(dcell.active_velocity)
    D0, rho0 = ref.compliance, ref.density
    A_D = A_bar[np.ix_(iS, iS)].copy()
    A_D[np.diag_indices(iS.size)] += f[iS] * D0 / (dcell.compliances[iS] - D0)
    A_rho = A_bar[np.ix_(iU, iU)].copy()
    A_rho[np.diag_indices(iU.size)] += f[iU] * rho0 / (dcell.densities[iU] - rho0)
    return AssembledSystem(
        omega=float(omega),
        q=float(q),
        ref=ref,
        fractions=f,
        idx_sigma=iS,
        idx_velocity=iU,
        A_bar=A_bar,
        B_bar=B_bar,
        A_D=A_D,
        A_rho=A_rho,
        kernel_a=A,
        kernel_b=B,
        geometry=G,
    )


def reference_poles(ref: ReferenceMedium, basis: SpectralBasis, q: float) -> np.ndarray:
    """Sorted frequencies ``c0 |xi + q|`` at which the kernels diverge."""
    return np.sort(ref.wave_speed * np.abs(basis.xi + q))


def scaled_frequency(omega, ref: ReferenceMedium, period: float):
    """``omega a / c0``."""
    return np.asarray(omega) * period / ref.wave_speed


def unscaled_frequency(nu_hat, ref: ReferenceMedium, period: float):
    return np.asarray(nu_hat) * ref.wave_speed / period


__all__ = [
    "AssembledSystem",
    "SpectralBasis",
    "assemble",
    "g_alpha",
    "geometry_matrix",
    "hermitian_defect",
    "kernel_A",
    "kernel_B",
    "reference_poles",
    "scaled_frequency",
    "unscaled_frequency",
]
