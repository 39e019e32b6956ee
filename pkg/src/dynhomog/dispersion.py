"""Roots of the overall dispersion relation and on-branch effective parameters.

For fixed real ``q`` the residual

    R(omega) = D_bar rho_bar v^2 - (1 + v S1)(1 + v S2),   v = omega / q

is real.  Roots are bracketed by sign changes on a frequency grid that is
split at the reference-medium poles, then refined by bisection.  A bracket is
kept only if ``|R|`` at the refined point is below both bracket ends, which
discards the sign flips produced by poles of the overall parameters.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegenerateDenominator, InsufficientRoots
from .homogenizer import EffectiveParams, homogenize
from .spectral import DEFAULT_EPS_POLE, SpectralBasis, geometry_matrix, reference_poles
from .unit_cell import DiscretizedCell

log = logging.getLogger(__name__)

DEFAULT_TOL_ROOT = 1e-10
DEFAULT_STEPS_PER_UNIT = 400
DENOMINATOR_FLOOR = 1e-12
REALNESS_TOL = 1e-10
_BLOCK = 512
_MIN_SEGMENT_STEPS = 16


@dataclass(frozen=True)
class Scan:
    """Frequency window ``[omega_min, omega_max]`` sampled with ``steps`` intervals in total."""

    omega_min: float
    omega_max: float
    steps: int

    def __post_init__(self):
        if not (0.0 <= self.omega_min < self.omega_max):
            raise ValueError(f"scan needs 0 <= omega_min < omega_max, got {self.omega_min}, {self.omega_max}")
        if int(self.steps) < 1:
            raise ValueError(f"scan steps must be >= 1, got {self.steps!r}")


@dataclass(frozen=True)
class BranchPoint:
    q: float
    omega: float
    branch: int
    D_eff: complex
    rho_eff: complex
    params: EffectiveParams
    residual: float

    @property
    def v_p(self) -> float:
        return self.omega / self.q


@dataclass
class DispersionBranch:
    index: int
    points: list[BranchPoint] = field(default_factory=list)

    @property
    def q(self) -> np.ndarray:
        return np.array([p.q for p in self.points])

    @property
    def omega(self) -> np.ndarray:
        return np.array([p.omega for p in self.points])

    @property
    def monotone(self) -> bool:
        """True when omega is monotone in q (flat band-edge steps allowed)."""
        d = np.diff(self.omega)
        tol = 1e-9 * max(1.0, float(np.abs(self.omega).max(initial=0.0)))
        return bool(np.all(d >= -tol) or np.all(d <= tol))


def residual_from_params(params, omega, q):
    """Complex residual from ``[D_bar, rho_bar, S1, S2]`` (arrays broadcast)."""
    D_bar, rho_bar, S1, S2 = params
    v = np.asarray(omega) / q
    return D_bar * rho_bar * v * v - (1.0 + v * S1) * (1.0 + v * S2)


def residual(dcell: DiscretizedCell, basis: SpectralBasis, omega: float, q: float,
             eps_pole: float = DEFAULT_EPS_POLE) -> float:
    if not q > 0:
        raise ValueError(f"q must be > 0, got {q!r}")
    if not omega > 0:
        raise ValueError(f"omega must be > 0, got {omega!r}")
    p = homogenize(dcell, basis, omega, q, eps_pole)
    R = complex(residual_from_params(p.as_array(), omega, q))
    scale = max(abs(p.D_bar * p.rho_bar) * (omega / q) ** 2, 1.0)
    if abs(R.imag) > REALNESS_TOL * scale:
        log.warning("dispersion residual not real: Im(R)=%.3e at omega=%.6g q=%.6g", R.imag, omega, q)
    return R.real


class _Evaluator:
    """Batched residuals at one ``q`` through the accelerated kernel."""

    def __init__(self, dcell: DiscretizedCell, basis: SpectralBasis, q: float, eps_pole: float):
        self.dcell, self.q, self.eps_pole = dcell, float(q), eps_pole
        ref = dcell.ref
        self.trivial = dcell.is_trivial
        if not self.trivial:
            self.args = (
                geometry_matrix(dcell, basis),
                dcell.fractions,
                dcell.compliances,
                dcell.densities,
                np.flatnonzero(dcell.active_sigma),
                np.flatnonzero(dcell.active_velocity),
                basis.xi,
                dcell.cell.period,
                self.q,
            )
        self.rho0, self.D0 = ref.density, ref.compliance

    def params(self, omegas) -> np.ndarray:
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        if self.trivial:
            out = np.zeros((omegas.size, 4), dtype=complex)
            out[:, 0], out[:, 1] = self.D0, self.rho0
            return out
        return _kernels.effective_batch(*self.args, omegas, self.rho0, self.D0, self.eps_pole)

    def residual(self, omegas) -> np.ndarray:
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        P = self.params(omegas)
        return residual_from_params(P.T, omegas, self.q).real


def _segments(lo: float, hi: float, poles: np.ndarray, half_width: np.ndarray):
    """Sub-intervals of ``[lo, hi]`` with pole windows removed."""
    cuts = [(p - w, p + w) for p, w in zip(poles, half_width) if p + w > lo and p - w < hi]
    segs, start = [], lo
    for a, b in cuts:
        if a > start:
            segs.append((start, a))
        start = max(start, b)
    if start < hi:
        segs.append((start, hi))
    return segs


def _bisect(fn, lo, hi, flo, fhi, tol):
    """Bisection to width ``tol``, finished by linear interpolation in the last bracket."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if not math.isfinite(fm):
            return None
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return lo - flo * (hi - lo) / (fhi - flo)


def _scan_roots(ev: _Evaluator, lo: float, hi: float, steps_per_omega: float, need: int,
                poles, half_width, tol_omega: float) -> list[tuple[float, float]]:
    """Certified roots ``(omega, R)`` in ``[lo, hi]``, ascending, stopping after ``need``."""
    roots: list[tuple[float, float]] = []

    def fn(w):
        return float(ev.residual(w)[0])

    for a, b in _segments(lo, hi, poles, half_width):
        n = max(_MIN_SEGMENT_STEPS, int(math.ceil((b - a) * steps_per_omega)))
        grid = np.linspace(a, b, n + 1)
        if grid[0] == 0.0:
            grid[0] = 1e-6 * grid[1]
        for start in range(0, n + 1, _BLOCK):
            w = grid[start : start + _BLOCK + 1]
            r = ev.residual(w)
            for i in range(w.size - 1):
                r0, r1 = r[i], r[i + 1]
                if not (math.isfinite(r0) and math.isfinite(r1)):
                    continue
                if r0 == 0.0:
                    if not roots or w[i] > roots[-1][0] + tol_omega:
                        roots.append((float(w[i]), 0.0))
                    continue
                if r0 * r1 >= 0.0:
                    continue
                root = _bisect(fn, float(w[i]), float(w[i + 1]), r0, r1, tol_omega)
                if root is None:
                    continue
                r_root = fn(root)
                if not abs(r_root) <= min(abs(r0), abs(r1)):
                    log.debug("rejected pole-type sign change near omega=%.6g q=%.6g", root, ev.q)
                    continue
                roots.append((root, r_root))
                if len(roots) >= need:
                    return roots
    return roots


def _speed_bounds(dcell: DiscretizedCell) -> tuple[float, float]:
    cell = dcell.cell
    c_max = max(layer.material.wave_speed for layer in cell.layers)
    c_low = 1.0 / math.sqrt(cell.compliances.max() * cell.densities.max())
    return c_low, c_max


def find_branches(
    dcell: DiscretizedCell,
    basis: SpectralBasis,
    q: float,
    n_branches: int,
    scan: Scan | None = None,
    eps_pole: float = DEFAULT_EPS_POLE,
    tol_root: float = DEFAULT_TOL_ROOT,
    steps_per_unit: float = DEFAULT_STEPS_PER_UNIT,
) -> list[BranchPoint]:
    """Lowest ``n_branches`` roots of the dispersion residual at wavenumber ``q``.

    ``tol_root`` and ``steps_per_unit`` are in units of the scaled frequency
    ``omega a / c0``.  Without ``scan`` the window starts just below the
    slowest possible long-wave speed and grows until enough roots are found.
    """
    a = dcell.cell.period
    if not (0.0 < q <= math.pi / a * (1 + 1e-12)):
        raise ValueError(f"q must lie in (0, pi/a], got {q!r}")
    if int(n_branches) < 1:
        raise ValueError(f"n_branches must be >= 1, got {n_branches!r}")
    ref = dcell.ref
    c0 = ref.wave_speed
    unit = c0 / a  # omega per unit of scaled frequency
    # a trivial cell never touches the kernels, so it has no poles
    poles = np.empty(0) if dcell.is_trivial else reference_poles(ref, basis, q)
    half_width = eps_pole * unit * np.maximum(1.0, poles / unit)
    ev = _Evaluator(dcell, basis, q, eps_pole)
    tol_omega = tol_root * unit

    if scan is not None:
        steps_per_omega = scan.steps / (scan.omega_max - scan.omega_min)
        found = _scan_roots(ev, scan.omega_min, scan.omega_max, steps_per_omega, n_branches,
                            poles, half_width, tol_omega)
    else:
        steps_per_omega = steps_per_unit / unit
        c_low, c_max = _speed_bounds(dcell)
        lo = 0.5 * c_low * q
        hi = max((n_branches + 1) * math.pi * c_max / a, 2.0 * c_max * q)
        cap = 8.0 * hi
        found = _scan_roots(ev, lo, hi, steps_per_omega, n_branches, poles, half_width, tol_omega)
        while len(found) < n_branches and hi < cap:
            lo, hi = hi, min(2.0 * hi, cap)
            found += _scan_roots(ev, lo, hi, steps_per_omega, n_branches - len(found),
                                 poles, half_width, tol_omega)
    if len(found) < n_branches:
        raise InsufficientRoots("dispersion roots", len(found), n_branches, q=q)

    points = []
    for b, (w, r) in enumerate(found[:n_branches], start=1):
        params = homogenize(dcell, basis, w, q, eps_pole, check_condition=False)
        D_eff, rho_eff = effective_on_branch(params, q, w)
        points.append(BranchPoint(float(q), float(w), b, D_eff, rho_eff, params, float(r)))
    return points


def effective_on_branch(params: EffectiveParams, q: float, omega: float) -> tuple[complex, complex]:
    v = omega / q
    d1 = 1.0 + v * params.S1
    d2 = 1.0 + v * params.S2
    if abs(d1) < DENOMINATOR_FLOOR or abs(d2) < DENOMINATOR_FLOOR:
        raise DegenerateDenominator(f"|1 + v_p S| = {min(abs(d1), abs(d2)):.3e}", omega=omega, q=q)
    return complex(params.D_bar / d1), complex(params.rho_bar / d2)


def _branch_job(args):
    dcell, basis, q, n_branches, scan, eps_pole, tol_root, steps_per_unit = args
    return find_branches(dcell, basis, q, n_branches, scan, eps_pole, tol_root, steps_per_unit)


def trace_branches(
    dcell: DiscretizedCell,
    basis: SpectralBasis,
    q_values,
    n_branches: int,
    scan: Scan | None = None,
    eps_pole: float = DEFAULT_EPS_POLE,
    tol_root: float = DEFAULT_TOL_ROOT,
    steps_per_unit: float = DEFAULT_STEPS_PER_UNIT,
    map_fn=map,
) -> list[DispersionBranch]:
    """Roots over a q-grid, regrouped branch-major.

    ``map_fn`` must preserve input order (builtin ``map`` or an executor's).
    """
    jobs = [(dcell, basis, float(q), n_branches, scan, eps_pole, tol_root, steps_per_unit) for q in q_values]
    per_q = list(map_fn(_branch_job, jobs))
    branches = [DispersionBranch(b) for b in range(1, n_branches + 1)]
    for pts in per_q:
        for p in pts:
            branches[p.branch - 1].points.append(p)
    for br in branches:
        if not br.monotone:
            log.info("branch %d is not monotone in q", br.index)
    return branches


QUASI_STATIC_QA = (0.05, 0.02, 0.01)


def quasi_static_limit(dcell: DiscretizedCell, basis: SpectralBasis,
                       eps_pole: float = DEFAULT_EPS_POLE) -> tuple[complex, complex]:
    """Long-wave limit of the first-branch ``(D_eff, rho_eff)``.

    Values at three small ``q a`` are extrapolated to zero with the
    interpolating quadratic.
    """
    a = dcell.cell.period
    c_low, c_max = _speed_bounds(dcell)
    qa = np.array(QUASI_STATIC_QA)
    D, rho = [], []
    for x in qa:
        q = x / a
        scan = Scan(0.5 * c_low * q, 2.0 * c_max * q, 2000)
        pt = find_branches(dcell, basis, q, 1, scan, eps_pole)[0]
        D.append(pt.D_eff)
        rho.append(pt.rho_eff)
    # Lagrange weights of the quadratic through the three samples, evaluated at 0
    w = np.array([np.prod([-qa[k] / (qa[j] - qa[k]) for k in range(3) if k != j]) for j in range(3)])
    return complex(w @ np.array(D)), complex(w @ np.array(rho))
