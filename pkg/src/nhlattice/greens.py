"""Free-space dyadic Green's-function kernels.

Real-space tensor, 2D reciprocal-space tensor, 1D reciprocal-space tensor at
finite perpendicular offset (Hankel/Bessel form), far-field Fourier component
with its transverse projector, and the closed-form single-chain lattice sum.

All kernels take the free-space wavenumber ``q`` explicitly (q = 2*pi in the
lambda = 1 units used throughout) and return 3x3 complex ndarrays that are
symmetric in the polarization indices.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp

from .lattice import Q_FREE, TOL_LIGHT_CONE_REL
from .special import polylog_unit_circle


class SingularityError(ValueError):
    """Evaluation requested at a singular point of a kernel."""


def _as_vec(v, n):
    a = np.asarray(v, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"expected a {n}-vector, got shape {a.shape}")
    return a


# ---------------------------------------------------------------------------
# real space
# ---------------------------------------------------------------------------

def green_real(r, q: float = Q_FREE) -> np.ndarray:
    """Dyadic Green tensor between two points separated by the 3-vector r."""
    r = _as_vec(r, 3)
    return green_real_batch(r[None, :], q)[0]


def green_real_batch(r: np.ndarray, q: float = Q_FREE) -> np.ndarray:
    """Vectorized ``green_real`` over an (N, 3) array of separations."""
    r = np.asarray(r, dtype=float)
    d = np.linalg.norm(r, axis=-1)
    if np.any(d <= 0):
        raise SingularityError("self-interaction: real-space kernel diverges at r = 0")
    qr = q * d
    phase = np.exp(1j * qr) / (4.0 * np.pi * d)
    c_iso = 1.0 + (1j * qr - 1.0) / qr**2
    c_dir = -1.0 + (3.0 - 3j * qr) / qr**2
    rhat = r / d[:, None]
    outer = rhat[:, :, None] * rhat[:, None, :]
    eye = np.eye(3)
    return phase[:, None, None] * (c_iso[:, None, None] * eye + c_dir[:, None, None] * outer)


# ---------------------------------------------------------------------------
# 2D reciprocal space
# ---------------------------------------------------------------------------

def _recip2d_batch(u: np.ndarray, q: float) -> np.ndarray:
    """2D reciprocal tensor at in-plane momenta ``u`` of shape (N, 2)."""
    u = np.asarray(u, dtype=float)
    u2 = u[:, 0] ** 2 + u[:, 1] ** 2
    gap = np.abs(u2 - q * q)
    if np.any(gap < (TOL_LIGHT_CONE_REL * q) ** 2 + 2.0 * TOL_LIGHT_CONE_REL * q * q):
        raise SingularityError("momentum on the light-cone circle")
    inside = u2 < q * q
    s = np.empty(len(u2), dtype=complex)
    s[inside] = 0.5j / np.sqrt(q * q - u2[inside])
    s[~inside] = 0.5 / np.sqrt(u2[~inside] - q * q)
    out = np.zeros((len(u2), 3, 3), dtype=complex)
    out[:, 0, 0] = (1.0 - u[:, 0] ** 2 / q**2) * s
    out[:, 1, 1] = (1.0 - u[:, 1] ** 2 / q**2) * s
    out[:, 0, 1] = out[:, 1, 0] = (-u[:, 0] * u[:, 1] / q**2) * s
    out[:, 2, 2] = (u2 / q**2) * s
    return out


def green_recip_2d(k_par, q: float = Q_FREE) -> np.ndarray:
    """2D reciprocal-space dyadic tensor at in-plane momentum ``k_par``.

    Purely imaginary inside the light cone (radiative), purely real outside
    (evanescent); the in-plane and z blocks decouple exactly.
    """
    k_par = _as_vec(k_par, 2)
    return _recip2d_batch(k_par[None, :], q)[0]


# ---------------------------------------------------------------------------
# 1D reciprocal space at finite perpendicular offset
# ---------------------------------------------------------------------------

def _recip1d_frame(k_par: float, rp: float, q: float) -> np.ndarray:
    """Tensor in the (e_par, e_perp, e_z) frame; ``rp`` is the signed offset."""
    if rp == 0.0:
        raise SingularityError("r_perp = 0: use chain_self_sum for the self block")
    k2 = k_par * k_par
    gap = abs(k2 - q * q)
    if gap < 2.0 * TOL_LIGHT_CONE_REL * q * q:
        raise SingularityError("parallel momentum on the light cone")
    arp = abs(rp)
    if k2 < q * q:
        kap = math.sqrt(q * q - k2)
        x = kap * arp
        h0 = complex(_sp.hankel1(0, x))
        h1 = complex(_sp.hankel1(1, x))
        h2 = 2.0 * h1 / x - h0
        iso = 0.5j * np.pi * h0
        cross = -0.5 * np.pi * kap * h1
        perp = 0.25j * np.pi * (1.0 - k2 / q**2) * (h0 - h2)
    else:
        kev = math.sqrt(k2 - q * q)
        y = kev * arp
        k0 = float(_sp.kv(0, y))
        k1 = float(_sp.kv(1, y))
        k2b = k0 + 2.0 * k1 / y
        iso = k0 + 0.0j
        cross = 1j * kev * k1
        perp = 0.5 * (1.0 - k2 / q**2) * (k0 + k2b)
    g = np.zeros((3, 3), dtype=complex)
    g[0, 0] = (1.0 - k2 / q**2) * iso
    g[1, 1] = iso - perp
    g[2, 2] = iso
    g[0, 1] = g[1, 0] = -(k_par * math.copysign(1.0, rp) / q**2) * cross
    return g / (2.0 * np.pi)


def green_recip_1d(k_par: float, r_perp, q: float = Q_FREE, e_par=(1.0, 0.0)) -> np.ndarray:
    """1D reciprocal tensor at parallel momentum ``k_par`` and offset ``r_perp``.

    ``r_perp`` is the in-plane separation normal to the chain direction
    ``e_par``; the result is rotated back to Cartesian axes.  Propagating
    (Hankel) terms apply inside the light cone, evanescent (Bessel-K) terms
    outside.
    """
    e1 = _as_vec(e_par, 2)
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.array([-e1[1], e1[0]])
    rv = _as_vec(r_perp, 2)
    if abs(rv @ e1) > 1e-9 * (np.linalg.norm(rv) + 1e-300):
        raise ValueError("r_perp must be perpendicular to the chain direction")
    rp = float(rv @ e2)
    g = _recip1d_frame(float(k_par), rp, q)
    rot = np.array([[e1[0], e2[0], 0.0], [e1[1], e2[1], 0.0], [0.0, 0.0, 1.0]])
    return rot @ g @ rot.T


# ---------------------------------------------------------------------------
# far field
# ---------------------------------------------------------------------------

def polarization_basis(k) -> tuple:
    """(e_p, e_s) unit vectors transverse to the propagation direction k."""
    k = _as_vec(k, 3)
    q = np.linalg.norm(k)
    if q == 0:
        raise ValueError("zero wave vector")
    kpar = math.hypot(k[0], k[1])
    cos_t = k[2] / q
    sin_t = kpar / q
    if kpar < 1e-14 * q:
        cos_p, sin_p = 1.0, 0.0
    else:
        cos_p, sin_p = k[0] / kpar, k[1] / kpar
    e_p = np.array([cos_t * cos_p, cos_t * sin_p, -sin_t])
    e_s = np.array([sin_p, -cos_p, 0.0])
    return e_p, e_s


def green_farfield_fourier(k, r, cell_area: float, q: float = Q_FREE,
                           recip_vectors=None) -> np.ndarray:
    """Far-field Fourier component of the array-scattered Green tensor.

    ``k`` is the on-shell incident wave vector (|k| = q sets the in-plane
    momentum), ``r`` the far-field point with q|z| >> 1.  Valid only at a
    single diffraction order; if ``recip_vectors`` (iterable of nonzero
    reciprocal vectors) is given, those entering the light cone raise.
    """
    k = _as_vec(k, 3)
    r = _as_vec(r, 3)
    if r[2] == 0.0:
        raise ValueError("far-field point must be off the lattice plane")
    k_par = k[:2]
    kp2 = float(k_par @ k_par)
    if kp2 >= q * q:
        raise SingularityError("in-plane momentum at or beyond the light cone")
    if recip_vectors is not None:
        bad = [g for g in recip_vectors
               if np.hypot(g[0] + k_par[0], g[1] + k_par[1]) <= q]
        if bad:
            raise ValueError(f"multiple diffraction orders propagate: {bad}")
    kz = math.sqrt(q * q - kp2)
    k_out = np.array([k_par[0], k_par[1], math.copysign(kz, r[2])])
    e_p, e_s = polarization_basis(k_out)
    proj = np.outer(e_p, e_p) + np.outer(e_s, e_s)
    pref = 1j * q * q * np.exp(1j * (k_par @ r[:2]) + 1j * kz * abs(r[2]))
    pref /= 2.0 * cell_area * kz
    return pref * proj


# ---------------------------------------------------------------------------
# single-chain self sum
# ---------------------------------------------------------------------------

def chain_self_sum(k_par: float, a_par: float, q: float = Q_FREE,
                   chain_dir=(1.0, 0.0)) -> np.ndarray:
    """Closed form of sum_{n != 0} e^{-i k n a} G(n a d_hat) along one chain.

    The 1/r, 1/r^2, 1/r^3 radial pieces of the real-space kernel map onto
    Li_1, Li_2, Li_3 of e^{i (q +/- k) a}; diverges on chain resonance where
    (q +/- k) a = 0 (mod 2*pi).
    """
    a = float(a_par)
    if a <= 0:
        raise ValueError("chain period must be positive")
    d = _as_vec(chain_dir, 2)
    d = d / np.linalg.norm(d)
    thetas = [((q + k_par) * a) % (2.0 * np.pi), ((q - k_par) * a) % (2.0 * np.pi)]
    for th in thetas:
        if min(th, 2.0 * np.pi - th) < 1e-9:
            raise SingularityError("chain resonance: (q +/- k_par) * a_par = 0 mod 2*pi")
    li1 = sum(polylog_unit_circle(1, th) for th in thetas)
    li2 = sum(polylog_unit_circle(2, th) for th in thetas)
    li3 = sum(polylog_unit_circle(3, th) for th in thetas)
    # transverse: e^{iqr} (1/r + i/(q r^2) - 1/(q^2 r^3)) / (4 pi)
    trans = (li1 / a + 1j * li2 / (q * a * a) - li3 / (q * q * a**3)) / (4.0 * np.pi)
    # longitudinal: e^{iqr} (-2i/(q r^2) + 2/(q^2 r^3)) / (4 pi)
    lon = (-2j * li2 / (q * a * a) + 2.0 * li3 / (q * q * a**3)) / (4.0 * np.pi)
    dhat = np.array([d[0], d[1], 0.0])
    outer = np.outer(dhat, dhat)
    return trans * (np.eye(3) - outer) + lon * outer
