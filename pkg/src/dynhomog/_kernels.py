"""Hot inner loops with a numba path and a pure-numpy fallback.

Two kernels dominate the runtime of a dispersion sweep:

* ``effective_batch`` -- overall parameters at many frequencies for one q
  (assemble + dense solve per frequency);
* ``half_trace`` -- half-trace of the transfer matrix at many frequencies.

The backend is chosen at import from ``DYNHOMOG_NUMBA`` (``0``/``false``
forces numpy) and can be switched at runtime with :func:`set_backend`.
Rows of ``effective_batch`` that fall within ``eps_pole`` of a reference pole
come back as NaN instead of raising.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_CHUNK = 256


def _env_wants_numba() -> bool:
    flag = os.environ.get("DYNHOMOG_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


_backend = "numba" if (HAVE_NUMBA and _env_wants_numba()) else "numpy"


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    _backend = name


# ---------------------------------------------------------------- numpy path


def _effective_batch_np(G, f, d, r, iS, iU, xi, a, q, omegas, rho0, D0, eps_pole):
    n_w = omegas.size
    out = np.full((n_w, 4), np.nan + 0j)
    nS, nU = iS.size, iU.size
    n = nS + nU
    GH = G.conj().T
    k_hat = (xi + q) * a
    diag_s = f[iS] * D0 / (d[iS] - D0)
    diag_u = f[iU] * rho0 / (r[iU] - rho0)
    fS, fU = f[iS], f[iU]
    rhs = np.zeros((n, 2), dtype=complex)
    rhs[:nS, 0] = fS
    rhs[nS:, 1] = fU
    for start in range(0, n_w, _CHUNK):
        w = omegas[start : start + _CHUNK]
        nu2 = (w * a) ** 2 * rho0 * D0
        den = nu2[:, None] - k_hat[None, :] ** 2
        ok = ~np.any(np.abs(den) <= eps_pole * np.maximum(nu2[:, None], k_hat[None, :] ** 2), axis=1)
        if not ok.any():
            continue
        w, nu2, den = w[ok], nu2[ok], den[ok]
        A = nu2[:, None] / den
        B = (xi + q)[None, :] * A
        Abar = (G[None, :, :] * A[:, None, :]) @ GH
        Bbar = (G[None, :, :] * B[:, None, :]) @ GH
        K = np.empty((w.size, n, n), dtype=complex)
        K[:, :nS, :nS] = -Abar[:, iS[:, None], iS[None, :]]
        K[:, :nS, :nS] -= np.diag(diag_s)
        K[:, :nS, nS:] = Bbar[:, iS[:, None], iU[None, :]] / (w * D0)[:, None, None]
        K[:, nS:, :nS] = Bbar[:, iU[:, None], iS[None, :]] / (w * rho0)[:, None, None]
        K[:, nS:, nS:] = -Abar[:, iU[:, None], iU[None, :]]
        K[:, nS:, nS:] -= np.diag(diag_u)
        try:
            X = np.linalg.solve(K, np.broadcast_to(rhs, (w.size, n, 2)))
        except np.linalg.LinAlgError:
            X = np.empty((w.size, n, 2), dtype=complex)
            for i in range(w.size):
                try:
                    X[i] = np.linalg.solve(K[i], rhs)
                except np.linalg.LinAlgError:
                    X[i] = np.nan
        res = np.empty((w.size, 4), dtype=complex)
        res[:, 0] = D0 * (1.0 - X[:, :nS, 0] @ fS)
        res[:, 1] = rho0 * (1.0 - X[:, nS:, 1] @ fU)
        res[:, 2] = -D0 * (X[:, :nS, 1] @ fS)
        res[:, 3] = -rho0 * (X[:, nS:, 0] @ fU)
        idx = np.arange(start, start + ok.size)[ok]
        out[idx] = res
    return out


def _half_trace_np(rho, D, h, omegas):
    w = np.asarray(omegas, dtype=float)
    m11 = np.ones_like(w)
    m12 = np.zeros_like(w)
    m21 = np.zeros_like(w)
    m22 = np.ones_like(w)
    for j in range(rho.size):
        z = np.sqrt(rho[j] / D[j])  # impedance rho c = C k / omega
        phase = w * np.sqrt(rho[j] * D[j]) * h[j]
        c, s = np.cos(phase), np.sin(phase)
        # P = [[c, s/(z w)], [-z w s, c]]; left-multiply the accumulated product
        zw = z * w
        with np.errstate(divide="ignore", invalid="ignore"):
            p12 = np.where(w == 0.0, h[j] * D[j], s / np.where(w == 0.0, 1.0, zw))
        p21 = -zw * s
        m11, m12, m21, m22 = (
            c * m11 + p12 * m21,
            c * m12 + p12 * m22,
            p21 * m11 + c * m21,
            p21 * m12 + c * m22,
        )
    return 0.5 * (m11 + m22)


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _effective_batch_nb(G, f, d, r, iS, iU, xi, a, q, omegas, rho0, D0, eps_pole):
        n_w = omegas.size
        m = xi.size
        nS = iS.size
        nU = iU.size
        n = nS + nU
        out = np.empty((n_w, 4), dtype=np.complex128)
        GS = np.empty((nS, m), dtype=np.complex128)
        GU = np.empty((nU, m), dtype=np.complex128)
        for i in range(nS):
            GS[i] = G[iS[i]]
        for i in range(nU):
            GU[i] = G[iU[i]]
        GSH = np.ascontiguousarray(np.conj(GS).T)
        GUH = np.ascontiguousarray(np.conj(GU).T)
        GSA = np.empty_like(GS)
        GSB = np.empty_like(GS)
        GUA = np.empty_like(GU)
        GUB = np.empty_like(GU)
        A = np.empty(m, dtype=np.complex128)
        B = np.empty(m, dtype=np.complex128)
        K = np.empty((n, n), dtype=np.complex128)
        rhs = np.zeros((n, 2), dtype=np.complex128)
        for i in range(nS):
            rhs[i, 0] = f[iS[i]]
        for i in range(nU):
            rhs[nS + i, 1] = f[iU[i]]
        for t in range(n_w):
            w = omegas[t]
            nu2 = (w * a) ** 2 * rho0 * D0
            pole = False
            for j in range(m):
                k = (xi[j] + q) * a
                den = nu2 - k * k
                if abs(den) <= eps_pole * max(nu2, k * k):
                    pole = True
                    break
                A[j] = nu2 / den
                B[j] = (xi[j] + q) * A[j]
            if pole:
                for c in range(4):
                    out[t, c] = np.nan
                continue
            for i in range(nS):
                for j in range(m):
                    GSA[i, j] = GS[i, j] * A[j]
                    GSB[i, j] = GS[i, j] * B[j]
            for i in range(nU):
                for j in range(m):
                    GUA[i, j] = GU[i, j] * A[j]
                    GUB[i, j] = GU[i, j] * B[j]
            cs = 1.0 / (w * D0)
            cu = 1.0 / (w * rho0)
            if nS > 0:
                Ass = np.dot(GSA, GSH)
                for i in range(nS):
                    for jj in range(nS):
                        K[i, jj] = -Ass[i, jj]
                    al = iS[i]
                    K[i, i] -= f[al] * D0 / (d[al] - D0)
            if nS > 0 and nU > 0:
                Bsu = np.dot(GSB, GUH)
                Bus = np.dot(GUB, GSH)
                for i in range(nS):
                    for jj in range(nU):
                        K[i, nS + jj] = Bsu[i, jj] * cs
                for i in range(nU):
                    for jj in range(nS):
                        K[nS + i, jj] = Bus[i, jj] * cu
            if nU > 0:
                Auu = np.dot(GUA, GUH)
                for i in range(nU):
                    for jj in range(nU):
                        K[nS + i, nS + jj] = -Auu[i, jj]
                    al = iU[i]
                    K[nS + i, nS + i] -= f[al] * rho0 / (r[al] - rho0)
            X = np.linalg.solve(K, rhs)
            phi_sum = 0j
            psi_sum = 0j
            for i in range(nS):
                phi_sum += f[iS[i]] * X[i, 0]
                psi_sum += f[iS[i]] * X[i, 1]
            theta_sum = 0j
            gamma_sum = 0j
            for i in range(nU):
                theta_sum += f[iU[i]] * X[nS + i, 0]
                gamma_sum += f[iU[i]] * X[nS + i, 1]
            out[t, 0] = D0 * (1.0 - phi_sum)
            out[t, 1] = rho0 * (1.0 - gamma_sum)
            out[t, 2] = -D0 * psi_sum
            out[t, 3] = -rho0 * theta_sum
        return out

    @njit(cache=True)
    def _half_trace_nb(rho, D, h, omegas):
        out = np.empty(omegas.size)
        for t in range(omegas.size):
            w = omegas[t]
            m11 = 1.0
            m12 = 0.0
            m21 = 0.0
            m22 = 1.0
            for j in range(rho.size):
                z = np.sqrt(rho[j] / D[j])
                phase = w * np.sqrt(rho[j] * D[j]) * h[j]
                c = np.cos(phase)
                s = np.sin(phase)
                if w == 0.0:
                    p12 = h[j] * D[j]
                else:
                    p12 = s / (z * w)
                p21 = -z * w * s
                n11 = c * m11 + p12 * m21
                n12 = c * m12 + p12 * m22
                n21 = p21 * m11 + c * m21
                n22 = p21 * m12 + c * m22
                m11, m12, m21, m22 = n11, n12, n21, n22
            out[t] = 0.5 * (m11 + m22)
        return out


# ---------------------------------------------------------------- dispatch


def effective_batch(G, f, d, r, iS, iU, xi, a, q, omegas, rho0, D0, eps_pole, backend=None):
    """Overall ``[D_bar, rho_bar, S1, S2]`` for each frequency in ``omegas``.

    ``G`` is the geometry matrix ``f_alpha g_alpha(xi)``; ``iS``/``iU`` index
    the active stress/velocity subregions.  Non-finite rows mark pole or
    singular samples.
    """
    backend = backend or _backend
    args = (
        np.ascontiguousarray(G, dtype=np.complex128),
        np.ascontiguousarray(f, dtype=np.float64),
        np.ascontiguousarray(d, dtype=np.float64),
        np.ascontiguousarray(r, dtype=np.float64),
        np.ascontiguousarray(iS, dtype=np.int64),
        np.ascontiguousarray(iU, dtype=np.int64),
        np.ascontiguousarray(xi, dtype=np.float64),
        float(a),
        float(q),
        np.ascontiguousarray(np.atleast_1d(omegas), dtype=np.float64),
        float(rho0),
        float(D0),
        float(eps_pole),
    )
    if backend == "numba":
        try:
            return _effective_batch_nb(*args)
        except Exception:
            # exactly singular sample: numba's solve raises for the whole batch
            pass
    return _effective_batch_np(*args)


def half_trace(rho, D, h, omegas, backend=None) -> np.ndarray:
    """Half-trace of the ordered (u, sigma) transfer-matrix product over one period."""
    backend = backend or _backend
    args = (
        np.ascontiguousarray(rho, dtype=np.float64),
        np.ascontiguousarray(D, dtype=np.float64),
        np.ascontiguousarray(h, dtype=np.float64),
        np.ascontiguousarray(np.atleast_1d(omegas), dtype=np.float64),
    )
    if backend == "numba":
        return _half_trace_nb(*args)
    return _half_trace_np(*args)
