"""Point-wise stress and velocity inside the cell from solved eigenfields.

The periodic parts are Fourier sums over the nonzero basis wavenumbers, so
their cell average is exactly the prescribed average.  Eigenfields are
piecewise constant over subregions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .homogenizer import EigenfieldSolution
from .spectral import SpectralBasis
from .unit_cell import DiscretizedCell

DEFAULT_POINTS_PER_SUBREGION = 16


@dataclass(frozen=True)
class FieldProfile:
    """Samples of the periodic parts on a grid with quadrature weights.

    ``weights`` sum to one, so ``(weights * f).sum()`` is the cell average.
    ``dsigma``/``dvelocity`` are exact x-derivatives of the Fourier sums.
    """

    x: np.ndarray
    weights: np.ndarray
    sigma: np.ndarray
    velocity: np.ndarray
    strain: np.ndarray
    momentum: np.ndarray
    dsigma: np.ndarray
    dvelocity: np.ndarray
    eig_sigma: np.ndarray
    eig_velocity: np.ndarray
    omega: float
    q: float
    sigma_avg: complex
    velocity_avg: complex

    def average(self, values) -> complex:
        return complex(np.sum(self.weights * values))


def subregion_grid(dcell: DiscretizedCell, points: int = DEFAULT_POINTS_PER_SUBREGION):
    """Midpoints of ``points`` equal slices of every subregion, with weights.

    Slices never cross a material interface, so jumps of ``D(x)`` and
    ``rho(x)`` are sampled without smearing.
    """
    if points < 1:
        raise ValueError(f"points per subregion must be >= 1, got {points!r}")
    t = (np.arange(points) + 0.5) / points - 0.5
    x = (dcell.centers[:, None] + dcell.lengths[:, None] * t[None, :]).ravel()
    w = np.repeat(dcell.fractions / points, points)
    return x, w


def uniform_grid(period: float, n: int):
    """``n`` equispaced points ``-a/2 + k a/n`` with equal weights.

    Exact for the cell average of any Fourier sum whose highest harmonic is
    below ``n``.
    """
    if n < 1:
        raise ValueError(f"grid size must be >= 1, got {n!r}")
    x = -0.5 * period + period * np.arange(n) / n
    return x, np.full(n, 1.0 / n)


def _subregion_index(dcell: DiscretizedCell, x: np.ndarray) -> np.ndarray:
    a = dcell.cell.period
    xf = np.mod(x + 0.5 * a, a) - 0.5 * a
    idx = np.searchsorted(dcell.edges[1:-1], xf, side="right")
    return np.clip(idx, 0, dcell.n_subregions - 1)


def reconstruct(
    sol: EigenfieldSolution,
    dcell: DiscretizedCell,
    basis: SpectralBasis,
    sigma_avg,
    velocity_avg,
    grid=None,
) -> FieldProfile:
    """Sample ``sigma, u_dot, eps, p`` for the given cell averages.

    ``grid`` is an ``(x, weights)`` pair; defaults to :func:`subregion_grid`.
    """
    sys = sol.system
    x, w = subregion_grid(dcell) if grid is None else grid
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    sigma_avg, velocity_avg = complex(sigma_avg), complex(velocity_avg)
    D0, rho0, omega = sys.ref.compliance, sys.ref.density, sys.omega

    eig_s, eig_v = sol.eigenfields(sigma_avg, velocity_avg)
    GH = sys.geometry.conj().T
    hs = GH @ eig_s
    hv = GH @ eig_v
    A, B = sys.kernel_a, sys.kernel_b
    coef_s = A * hs - B / (omega * D0) * hv
    coef_v = A * hv - B / (omega * rho0) * hs

    xi = basis.xi
    E = np.exp(1j * np.outer(x, xi))
    sigma = sigma_avg + E @ coef_s
    velocity = velocity_avg + E @ coef_v
    dsigma = E @ (1j * xi * coef_s)
    dvelocity = E @ (1j * xi * coef_v)

    cell = dcell.cell
    sub = _subregion_index(dcell, x)
    return FieldProfile(
        x=x,
        weights=w,
        sigma=sigma,
        velocity=velocity,
        strain=cell.compliance_at(x) * sigma,
        momentum=cell.density_at(x) * velocity,
        dsigma=dsigma,
        dvelocity=dvelocity,
        eig_sigma=eig_s[sub],
        eig_velocity=eig_v[sub],
        omega=float(omega),
        q=float(sys.q),
        sigma_avg=sigma_avg,
        velocity_avg=velocity_avg,
    )


def _rms(values, weights) -> float:
    return float(np.sqrt(np.sum(weights * np.abs(values) ** 2)))


def local_residuals(profile: FieldProfile, dcell: DiscretizedCell | None = None) -> tuple[float, float]:
    """RMS of the Bloch-form balance laws, relative to the inertial terms.

    Momentum: ``(d/dx + i q) sigma + i omega p``; kinematic:
    ``(d/dx + i q) u_dot + i omega eps``.
    """
    iq, iw = 1j * profile.q, 1j * profile.omega
    w = profile.weights
    r_m = profile.dsigma + iq * profile.sigma + iw * profile.momentum
    r_k = profile.dvelocity + iq * profile.velocity + iw * profile.strain
    scale_m = max(_rms(iw * profile.momentum, w), 1e-300)
    scale_k = max(_rms(iw * profile.strain, w), 1e-300)
    return _rms(r_m, w) / scale_m, _rms(r_k, w) / scale_k


def consistency_residual(profile: FieldProfile, dcell: DiscretizedCell) -> tuple[float, float]:
    """Pointwise defect of ``D sigma = D0 (sigma - Sigma~)`` and ``rho u_dot = rho0 (u_dot - U~dot)``.

    Averaged over the whole cell and scaled by the RMS strain / momentum.
    Only the subregion averages are enforced, so these shrink with refinement.
    """
    ref = dcell.ref
    w = profile.weights
    rs = profile.strain - ref.compliance * (profile.sigma - profile.eig_sigma)
    rv = profile.momentum - ref.density * (profile.velocity - profile.eig_velocity)
    return (
        _rms(rs, w) / max(_rms(profile.strain, w), 1e-300),
        _rms(rv, w) / max(_rms(profile.momentum, w), 1e-300),
    )


def subregion_averages(sol: EigenfieldSolution, sigma_avg, velocity_avg):
    """Subregion means of ``sigma`` and ``u_dot`` directly from the assembled matrices."""
    sys = sol.system
    D0, rho0, omega = sys.ref.compliance, sys.ref.density, sys.omega
    eig_s, eig_v = sol.eigenfields(complex(sigma_avg), complex(velocity_avg))
    f = sys.fractions
    sig = sigma_avg + (sys.A_bar @ eig_s - sys.B_bar @ eig_v / (omega * D0)) / f
    vel = velocity_avg + (sys.A_bar @ eig_v - sys.B_bar @ eig_s / (omega * rho0)) / f
    return sig, vel


def rms_mismatch(values, reference, weights) -> float:
    """``rms(values - reference) / rms(reference)``."""
    return _rms(np.asarray(values) - np.asarray(reference), weights) / max(_rms(reference, weights), 1e-300)
