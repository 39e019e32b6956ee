"""Eigenfield solve and overall constitutive parameters.

The averaged consistency conditions form a coupled linear system in the
eigenstress and eigenvelocity of every active subregion.  It is solved once
for each of the unit loadings ``(<sigma>, <u_dot>) = (1, 0)`` and ``(0, 1)``;
the four response vectors follow from the two solution columns.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import SingularSystem
from .spectral import DEFAULT_EPS_POLE, AssembledSystem, SpectralBasis, assemble
from .unit_cell import DiscretizedCell, ReferenceMedium

log = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class EigenfieldSolution:
    """Response vectors over all subregions (zero on inactive ones).

    ``phi, psi, theta, gamma`` follow the scaling

        Sigma~ = phi <sigma> + psi <u_dot> / D0
        U~dot  = theta <sigma> / rho0 + gamma <u_dot>
    """

    system: AssembledSystem
    phi: np.ndarray
    psi: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    residual: float
    condition: float

    @property
    def omega(self) -> float:
        return self.system.omega

    @property
    def q(self) -> float:
        return self.system.q

    def eigenfields(self, sigma_avg, velocity_avg):
        """Subregion eigenstress and eigenvelocity for the given cell averages."""
        ref = self.system.ref
        sig = self.phi * sigma_avg + self.psi * velocity_avg / ref.compliance
        vel = self.theta * sigma_avg / ref.density + self.gamma * velocity_avg
        return sig, vel


@dataclass(frozen=True)
class EffectiveParams:
    D_bar: complex
    rho_bar: complex
    S1: complex
    S2: complex
    omega: float
    q: float

    def as_array(self) -> np.ndarray:
        return np.array([self.D_bar, self.rho_bar, self.S1, self.S2], dtype=complex)


@dataclass(frozen=True)
class AveragedFields:
    sigma: complex
    velocity: complex
    strain: complex
    momentum: complex
    energy: complex

    @property
    def energy_real(self) -> float:
        return float(self.energy.real)


def _trivial_solution(sys: AssembledSystem) -> EigenfieldSolution:
    zeros = np.zeros(sys.fractions.size, dtype=complex)
    return EigenfieldSolution(sys, zeros, zeros.copy(), zeros.copy(), zeros.copy(), 0.0, 1.0)


def solve_eigenfields(
    sys: AssembledSystem,
    check_condition: bool = True,
    condition_limit: float = CONDITION_LIMIT,
) -> EigenfieldSolution:
    """Solve the coupled block system directly for both unit loadings."""
    if sys.trivial:
        return _trivial_solution(sys)
    nS, nU = sys.idx_sigma.size, sys.idx_velocity.size
    K = sys.block_matrix()
    rhs = np.zeros((nS + nU, 2), dtype=complex)
    rhs[:nS, 0] = sys.f_sigma
    rhs[nS:, 1] = sys.f_velocity

    cond = float(np.linalg.cond(K)) if check_condition else float("nan")
    if check_condition and not cond <= condition_limit:
        raise SingularSystem(f"condition number {cond:.3e} exceeds {condition_limit:.0e}", sys.omega, sys.q)
    try:
        X = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc), sys.omega, sys.q) from exc
    residual = float(np.abs(K @ X - rhs).max() / max(np.abs(rhs).max(), 1e-300))

    n = sys.fractions.size
    D0, rho0 = sys.ref.compliance, sys.ref.density
    phi = np.zeros(n, dtype=complex)
    psi = np.zeros(n, dtype=complex)
    theta = np.zeros(n, dtype=complex)
    gamma = np.zeros(n, dtype=complex)
    phi[sys.idx_sigma] = X[:nS, 0]
    psi[sys.idx_sigma] = D0 * X[:nS, 1]
    theta[sys.idx_velocity] = rho0 * X[nS:, 0]
    gamma[sys.idx_velocity] = X[nS:, 1]
    return EigenfieldSolution(sys, phi, psi, theta, gamma, residual, cond)


def closed_form_response(sys: AssembledSystem):
    """Response vectors from the explicit Schur-complement formulas.

    Independent of :func:`solve_eigenfields`; needs both active sets to
    coincide and both diagonal blocks to be invertible.  Returns
    ``(phi, psi, theta, gamma)`` on the active subregions.
    """
    if not np.array_equal(sys.idx_sigma, sys.idx_velocity):
        raise ValueError("closed forms need identical stress and velocity active sets")
    f = sys.f_sigma.astype(complex)
    AD, Ar, B = sys.A_D, sys.A_rho, sys.B_su
    nu2, w = sys.nu2, sys.omega
    Ar_inv_B = np.linalg.solve(Ar, B)
    AD_inv_B = np.linalg.solve(AD, B)
    H_sigma = -AD + (B @ Ar_inv_B) / nu2
    H_vel = -Ar + (B @ AD_inv_B) / nu2
    phi = np.linalg.solve(H_sigma, f)
    psi = np.linalg.solve(H_sigma, B @ np.linalg.solve(Ar, f)) / w
    theta = np.linalg.solve(H_vel, B @ np.linalg.solve(AD, f)) / w
    gamma = np.linalg.solve(H_vel, f)
    return phi, psi, theta, gamma


def effective_params(sol: EigenfieldSolution) -> EffectiveParams:
    sys = sol.system
    f = sys.fractions
    D0, rho0 = sys.ref.compliance, sys.ref.density
    return EffectiveParams(
        D_bar=complex(D0 * (1.0 - f @ sol.phi)),
        rho_bar=complex(rho0 * (1.0 - f @ sol.gamma)),
        S1=complex(-(f @ sol.psi)),
        S2=complex(-(f @ sol.theta)),
        omega=sys.omega,
        q=sys.q,
    )


def trivial_params(ref: ReferenceMedium, omega: float, q: float) -> EffectiveParams:
    return EffectiveParams(complex(ref.compliance), complex(ref.density), 0j, 0j, omega, q)


def homogenize(
    dcell: DiscretizedCell,
    basis: SpectralBasis,
    omega: float,
    q: float,
    eps_pole: float = DEFAULT_EPS_POLE,
    check_condition: bool = True,
) -> EffectiveParams:
    """Overall parameters at one ``(omega, q)``; convenience over assemble + solve."""
    if dcell.is_trivial:
        return trivial_params(dcell.ref, omega, q)
    sys = assemble(dcell, basis, omega, q, eps_pole)
    return effective_params(solve_eigenfields(sys, check_condition=check_condition))


def apply_constitutive(params: EffectiveParams, sigma_avg, velocity_avg) -> AveragedFields:
    """Average strain and momentum from average stress and velocity.

    ``energy`` is ``(<sigma>* <eps> + <u_dot>* <p>) / 2``.  Its real part is
    the time-averaged energy density; its imaginary part vanishes exactly
    when the 2x2 constitutive matrix is Hermitian, so it doubles as a check.
    """
    sigma_avg = complex(sigma_avg)
    velocity_avg = complex(velocity_avg)
    strain = params.D_bar * sigma_avg + params.S1 * velocity_avg
    momentum = params.S2 * sigma_avg + params.rho_bar * velocity_avg
    energy = 0.5 * (sigma_avg.conjugate() * strain + velocity_avg.conjugate() * momentum)
    return AveragedFields(sigma_avg, velocity_avg, strain, momentum, complex(energy))


def check_positive(params: EffectiveParams, context: str = "") -> bool:
    """Log (not raise) when the overall compliance or density is not positive."""
    ok = params.D_bar.real > 0 and params.rho_bar.real > 0
    if not ok:
        log.warning(
            "non-positive overall parameters%s: D_bar=%.6g rho_bar=%.6g at omega=%.6g q=%.6g",
            f" ({context})" if context else "",
            params.D_bar.real,
            params.rho_bar.real,
            params.omega,
            params.q,
        )
    return ok
