"""Exact transfer-matrix solution for longitudinal waves in a layered cell.

Independent of the eigenfield machinery: the state ``(u, sigma)`` is carried
across each homogeneous layer by its 2x2 propagator, Bloch modes are
eigenvectors of the one-period product, and cell averages of the periodic
parts are integrated in closed form layer by layer.  The resulting
field-integration effective parameters serve as ground truth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .errors import InsufficientRoots, NotOnBranch, ZeroAverage
from .unit_cell import UnitCell

ROOT_RTOL = 1e-12
ON_BRANCH_TOL = 1e-9
TANGENT_TOL = 1e-10
SAMPLES_PER_RADIAN = 40


def layer_propagator(density: float, compliance: float, thickness: float, omega: float) -> np.ndarray:
    """Maps ``(u, sigma)`` at the left face of a layer to the right face."""
    z = math.sqrt(density / compliance)
    phase = omega * math.sqrt(density * compliance) * thickness
    c, s = math.cos(phase), math.sin(phase)
    p12 = thickness * compliance if omega == 0.0 else s / (z * omega)
    return np.array([[c, p12], [-z * omega * s, c]])


def monodromy(cell: UnitCell, omega: float) -> np.ndarray:
    M = np.eye(2)
    for layer in cell.layers:
        M = layer_propagator(layer.material.density, layer.material.compliance, layer.thickness, omega) @ M
    return M


def monodromy_trace(cell: UnitCell, omega):
    """Half-trace of the one-period transfer matrix; equals ``cos(q a)`` on a band.

    Scalars give a float; arrays are evaluated through the accelerated kernel.
    """
    if np.ndim(omega) == 0:
        return 0.5 * float(np.trace(monodromy(cell, float(omega))))
    return _kernels.half_trace(cell.densities, cell.compliances, cell.thicknesses, omega)


def _travel_time(cell: UnitCell) -> float:
    return math.fsum(layer.thickness / layer.material.wave_speed for layer in cell.layers)


def _bisect(fn, lo, hi, flo, rtol):
    while hi - lo > rtol * max(abs(hi), 1e-300):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _roots_in(cell: UnitCell, target: float, lo: float, hi: float, rtol: float):
    """Roots of ``half_trace - target`` in ``(lo, hi]`` with multiplicity.

    Sign changes are bisected.  At the zone centre/edge (``|target| = 1``)
    closed gaps appear as tangencies; those are located by minimizing
    ``|h|`` and counted twice.
    """
    n = max(64, int(math.ceil((hi - lo) * _travel_time(cell) * SAMPLES_PER_RADIAN)))
    w = np.linspace(lo, hi, n + 1)
    h = monodromy_trace(cell, w) - target

    def fn(x):
        return monodromy_trace(cell, x) - target

    roots = []
    for i in range(n):
        if h[i] == 0.0 and w[i] > 0:
            roots.append((w[i], 1))
        elif h[i] * h[i + 1] < 0:
            roots.append((_bisect(fn, w[i], w[i + 1], h[i], rtol), 1))
    if abs(abs(target) - 1.0) < 1e-12:
        side = np.sign(target)
        for i in range(1, n):
            # extremum toward the band edge that stays on one side of it
            hs = h[i - 1 : i + 2] * side
            if not (hs[1] >= hs[0] and hs[1] >= hs[2]) or np.any(hs >= 0):
                continue
            res = minimize_scalar(
                lambda x: abs(fn(x)), bounds=(w[i - 1], w[i + 1]), method="bounded",
                options={"xatol": rtol * w[i]},
            )
            if abs(res.fun) <= TANGENT_TOL:
                roots.append((float(res.x), 2))
    roots.sort()
    out = []
    for r, mult in roots:
        out.extend([r] * mult)
    return out


def exact_dispersion(cell: UnitCell, q: float, n_branches: int, omega_max: float | None = None,
                     rtol: float = ROOT_RTOL) -> list[float]:
    """Lowest ``n_branches`` frequencies of Bloch waves with wavenumber ``q``.

    ``q`` is taken in ``[0, pi/a]``.  Without ``omega_max`` the search window
    grows until enough roots are found.
    """
    a = cell.period
    if not (0.0 <= q <= math.pi / a * (1 + 1e-12)):
        raise ValueError(f"q must lie in [0, pi/a], got {q!r}")
    target = math.cos(q * a)
    roots = [0.0] if abs(target - 1.0) < 1e-15 else []
    c_min = min(layer.material.wave_speed for layer in cell.layers)
    step = math.pi / _travel_time(cell)
    lo = 0.0
    hi = omega_max if omega_max is not None else step * (n_branches + 1)
    cap = omega_max if omega_max is not None else 64 * n_branches * math.pi * c_min / a + hi
    while True:
        roots.extend(_roots_in(cell, target, lo, hi, rtol))
        if len(roots) >= n_branches or hi >= cap:
            break
        lo, hi = hi, min(hi + step * n_branches, cap)
    if len(roots) < n_branches:
        raise InsufficientRoots("exact dispersion", len(roots), n_branches, q=q)
    return roots[:n_branches]


def stop_bands(cell: UnitCell, omega_max: float, rtol: float = ROOT_RTOL) -> list[tuple[float, float]]:
    """Frequency intervals below ``omega_max`` where ``|half_trace| > 1``."""
    edges = sorted(_roots_in(cell, 1.0, 0.0, omega_max, rtol) + _roots_in(cell, -1.0, 0.0, omega_max, rtol))
    gaps = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo <= rtol * hi:
            continue
        if abs(monodromy_trace(cell, 0.5 * (lo + hi))) > 1.0:
            gaps.append((lo, hi))
    return gaps


@dataclass(frozen=True)
class ModeShape:
    """Exact Bloch mode over one cell.

    ``states[j]`` is ``(u, sigma)`` of the full field at the left face
    ``x_left[j]`` of layer ``j``.  Averages refer to the periodic parts
    ``F(x) = F_full(x) exp(-i q x)``.
    """

    cell: UnitCell
    q: float
    omega: float
    x_left: np.ndarray
    states: np.ndarray
    u_avg: complex
    sigma_avg: complex
    momentum_avg: complex
    bloch_residual: float

    @property
    def velocity_avg(self) -> complex:
        return -1j * self.omega * self.u_avg

    @property
    def strain_avg(self) -> complex:
        return 1j * self.q * self.u_avg

    def evaluate(self, x):
        """Periodic parts ``(u, sigma, u_dot, strain, momentum)`` at positions inside the cell."""
        x = np.asarray(x, dtype=float)
        idx = self.cell.layer_index(x)
        u = np.empty(x.shape, dtype=complex)
        sig = np.empty(x.shape, dtype=complex)
        for j, layer in enumerate(self.cell.layers):
            sel = idx == j
            if not sel.any():
                continue
            rho, D = layer.material.density, layer.material.compliance
            k = self.omega * math.sqrt(rho * D)
            C = 1.0 / D
            s = x[sel] - self.x_left[j]
            u0, s0 = self.states[j]
            cs, sn = np.cos(k * s), np.sin(k * s)
            if k == 0.0:
                uf = u0 + s0 * D * s
            else:
                uf = u0 * cs + s0 / (C * k) * sn
            sf = -C * k * u0 * sn + s0 * cs
            ph = np.exp(-1j * self.q * x[sel])
            u[sel] = uf * ph
            sig[sel] = sf * ph
        rho_x = self.cell.density_at(x)
        D_x = self.cell.compliance_at(x)
        vel = -1j * self.omega * u
        return u, sig, vel, D_x * sig, rho_x * vel


def _integral_exp(theta, h):
    """``int_0^h exp(i theta s) ds``."""
    return h * np.exp(0.5j * theta * h) * np.sinc(theta * h / (2.0 * np.pi))


def mode_shape(cell: UnitCell, q: float, omega: float, on_branch_tol: float = ON_BRANCH_TOL) -> ModeShape:
    a = cell.period
    M = monodromy(cell, omega)
    lam = np.exp(1j * q * a)
    miss = abs(0.5 * np.trace(M) - math.cos(q * a))
    if miss > on_branch_tol:
        raise NotOnBranch(f"half-trace misses cos(qa) by {miss:.3e}", omega=omega, q=q)

    v1 = np.array([M[0, 1], lam - M[0, 0]], dtype=complex)
    v2 = np.array([lam - M[1, 1], M[1, 0]], dtype=complex)
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    if np.linalg.norm(v) < 1e-14 * max(1.0, np.abs(M).max()):
        # M = lam I at a closed gap: every state is a Bloch state
        v = np.array([1.0, 0.0], dtype=complex)
    v = v / np.linalg.norm(v)

    x_left = cell.interfaces[:-1]
    states = np.empty((len(cell.layers), 2), dtype=complex)
    st = v.copy()
    U = S = P = 0j
    for j, layer in enumerate(cell.layers):
        rho, D, h = layer.material.density, layer.material.compliance, layer.thickness
        states[j] = st
        k = omega * math.sqrt(rho * D)
        Ck = math.sqrt(rho / D) * omega
        u0, s0 = st
        ph = np.exp(-1j * q * x_left[j])
        if k == 0.0:
            Iu = ph * (u0 * _integral_exp(-q, h) + s0 * D * _s_exp_integral(-q, h))
            Is = ph * s0 * _integral_exp(-q, h)
        else:
            # u = cp e^{iks} + cm e^{-iks};  sigma = i C k (cp e^{iks} - cm e^{-iks})
            cp = 0.5 * u0 + s0 / (2j * Ck)
            cm = 0.5 * u0 - s0 / (2j * Ck)
            ep, em = _integral_exp(k - q, h), _integral_exp(-k - q, h)
            Iu = ph * (cp * ep + cm * em)
            Is = ph * 1j * Ck * (cp * ep - cm * em)
        U += Iu
        S += Is
        P += -1j * omega * rho * Iu
        st = layer_propagator(rho, D, h, omega) @ st
    U, S, P = U / a, S / a, P / a
    bloch = float(np.abs(st - lam * v).max())

    # scale so that <u> = 1 when it is resolvable
    scale = np.abs(states).max()
    if abs(U) > 1e-12 * scale * a:
        norm = 1.0 / U
    else:
        norm = 1.0 / states.flat[np.abs(states).argmax()]
    return ModeShape(cell, float(q), float(omega), x_left, states * norm, U * norm, S * norm, P * norm, bloch)


def _s_exp_integral(theta, h):
    """``int_0^h s exp(i theta s) ds``."""
    if abs(theta * h) < 1e-8:
        return 0.5 * h * h
    e = np.exp(1j * theta * h)
    return (h * e) / (1j * theta) + (e - 1.0) / (theta * theta)


def field_integration_homog(mode: ModeShape, zero_tol: float = 1e-14):
    """``(D_eff, rho_eff)`` from cell averages of the exact mode."""
    scale = max(np.abs(mode.states).max(), 1e-300)
    if abs(mode.sigma_avg) < zero_tol * scale or abs(mode.u_avg) < zero_tol * scale:
        raise ZeroAverage("vanishing cell average", omega=mode.omega, q=mode.q)
    D_eff = 1j * mode.q * mode.u_avg / mode.sigma_avg
    rho_eff = mode.momentum_avg / (-1j * mode.omega * mode.u_avg)
    return complex(D_eff), complex(rho_eff)
