"""Special functions for the lattice-summation kernels.

Bernoulli numbers and polynomials (exact rationals, B1 = -1/2 convention),
Hankel functions of the first kind and modified Bessel functions of the
second kind (orders 0..2, real positive argument), and polylogarithms
Li_s(e^{i*theta}) on the unit circle for s = 1, 2, 3.
"""
from __future__ import annotations

import cmath
import math
from fractions import Fraction

import numpy as np
from scipy import special as _sp

# Exposed Bernoulli orders go up to 2*M_MAX; the summation engine defaults to
# expansion order 2 and this leaves ample headroom for convergence studies.
M_MAX = 8

_BERNOULLI: list = [Fraction(1)]


def _bernoulli_exact(n: int) -> Fraction:
    while len(_BERNOULLI) <= n:
        m = len(_BERNOULLI)
        # sum_{k=0}^{m} C(m+1, k) B_k = 0  =>  B_m
        acc = Fraction(0)
        for k in range(m):
            acc += math.comb(m + 1, k) * _BERNOULLI[k]
        _BERNOULLI.append(-acc / (m + 1))
    return _BERNOULLI[n]


def bernoulli_number(n: int, exact: bool = False):
    """B_n with the B1 = -1/2 convention; ``exact`` returns a Fraction."""
    if not 0 <= n <= 2 * M_MAX:
        raise ValueError(f"Bernoulli order {n} outside supported range 0..{2 * M_MAX}")
    b = _bernoulli_exact(n)
    return b if exact else float(b)


def bernoulli_poly(n: int, x: float) -> float:
    """B_n(x) = sum_k C(n,k) B_k x^(n-k)."""
    if not 0 <= n <= 2 * M_MAX:
        raise ValueError(f"Bernoulli order {n} outside supported range 0..{2 * M_MAX}")
    xf = float(x)
    out = 0.0
    for k in range(n + 1):
        out += math.comb(n, k) * float(_bernoulli_exact(k)) * xf ** (n - k)
    return out


def hankel1(n: int, x: float) -> complex:
    """H_n^(1)(x) = J_n(x) + i Y_n(x) for n in {0, 1, 2}, x > 0."""
    if n not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    if not x > 0:
        raise ValueError("argument must be positive")
    return complex(_sp.hankel1(n, x))


def bessel_k(n: int, x: float) -> float:
    """Modified Bessel function K_n(x) for n in {0, 1, 2}, x > 0."""
    if n not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    if not x > 0:
        raise ValueError("argument must be positive")
    return float(_sp.kv(n, x))


def _zeta_int(m: int) -> float:
    """Riemann zeta at integer argument m != 1."""
    if m == 1:
        raise ValueError("zeta(1) diverges")
    if m > 1:
        return float(_sp.zeta(m))
    if m == 0:
        return -0.5
    n = -m
    return -float(_bernoulli_exact(n + 1)) / (n + 1)


_HARMONIC = {1: 1.0, 2: 1.5}


def polylog_unit_circle(s: int, theta: float) -> complex:
    """Li_s(e^{i*theta}) for s in {1, 2, 3}.

    Uses the closed logarithm form for s = 1 and the zeta expansion of
    Li_s(e^mu) about mu = 0 otherwise, after folding theta into (0, pi]
    by the conjugation symmetry.  Diverges for s = 1 at theta = 0 (mod 2*pi).
    """
    if s not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    th = float(theta) % (2.0 * math.pi)
    if s == 1:
        if min(th, 2.0 * math.pi - th) < 1e-12:
            raise ValueError("Li_1(e^{i*theta}) diverges at theta = 0 (mod 2*pi)")
        return -cmath.log(1.0 - cmath.exp(1j * th))
    if min(th, 2.0 * math.pi - th) < 1e-300:
        return complex(_zeta_int(s))
    conj = th > math.pi
    if conj:
        th = 2.0 * math.pi - th
    mu = 1j * th
    # mu^(s-1)/(s-1)! * (H_{s-1} - log(-mu)), log(-i*th) = ln th - i*pi/2
    log_neg_mu = math.log(th) - 1j * math.pi / 2.0
    acc = mu ** (s - 1) / math.factorial(s - 1) * (_HARMONIC[s - 1] - log_neg_mu)
    term = 1.0 + 0.0j  # mu^j / j!
    small_run = 0
    for j in range(0, 200):
        if j > 0:
            term *= mu / j
        if j == s - 1:
            continue
        contrib = _zeta_int(s - j) * term
        acc += contrib
        # zeta vanishes at negative even integers, so require two consecutive
        # negligible terms before stopping
        small_run = small_run + 1 if abs(contrib) < 1e-18 * max(1.0, abs(acc)) else 0
        if j > 8 and small_run >= 2:
            break
    return np.conj(acc) if conj else complex(acc)
