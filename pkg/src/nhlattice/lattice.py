"""2D Bravais geometry, reciprocal bases, light cone, ribbon chain decomposition.

Lengths are measured in units of the transition wavelength (lambda = 1), so
the free-space wavenumber is ``Q_FREE = 2*pi``.  All types are immutable and
all operations are pure functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Q_FREE = 2.0 * np.pi

# Momenta within TOL_LIGHT_CONE_REL*q of the light-cone circle are treated as
# on-cone: the reciprocal-space kernels diverge there.
TOL_LIGHT_CONE_REL = 1e-9


class DegenerateCellError(ValueError):
    """The two lattice vectors do not span a 2D cell."""


def _as_vec2(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (2,):
        raise ValueError(f"expected a 2-vector, got shape {a.shape}")
    return a


def _wrap_fractional(offset: np.ndarray, a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    basis = np.column_stack([a1, a2])
    frac = np.linalg.solve(basis, offset)
    frac -= np.floor(frac + 1e-12)
    return basis @ frac


@dataclass(frozen=True, eq=False)
class Lattice2D:
    """Bravais lattice spanned by a1, a2, with optional sublattice offsets.

    ``basis_offsets`` is empty for a plain Bravais lattice; offsets are
    wrapped into the primitive cell on construction.
    """

    a1: np.ndarray
    a2: np.ndarray
    basis_offsets: tuple = ()

    def __post_init__(self):
        a1 = _as_vec2(self.a1)
        a2 = _as_vec2(self.a2)
        cross = float(np.cross(a1, a2))
        scale = np.linalg.norm(a1) * np.linalg.norm(a2)
        if scale == 0.0 or abs(cross) < 1e-14 * scale:
            raise DegenerateCellError("lattice vectors are (nearly) collinear")
        offs = tuple(_wrap_fractional(_as_vec2(o), a1, a2) for o in self.basis_offsets)
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)
        object.__setattr__(self, "basis_offsets", offs)

    @property
    def cell_area(self) -> float:
        return abs(float(np.cross(self.a1, self.a2)))

    @property
    def eta(self) -> float:
        """Lattice-constant ratio |a2|/|a1|."""
        return float(np.linalg.norm(self.a2) / np.linalg.norm(self.a1))

    @property
    def n_sublattices(self) -> int:
        return max(1, len(self.basis_offsets))

    def reciprocal_basis(self) -> "ReciprocalBasis":
        return reciprocal_basis(self)

    # -- common geometries -------------------------------------------------

    @classmethod
    def square(cls, a: float) -> "Lattice2D":
        return cls(np.array([a, 0.0]), np.array([0.0, a]))

    @classmethod
    def rectangular(cls, a: float, eta: float) -> "Lattice2D":
        """a1 = (a/eta) e_x, a2 = a e_y, so |a2|/|a1| = eta."""
        return cls(np.array([a / eta, 0.0]), np.array([0.0, a]))

    @classmethod
    def triangular(cls, a: float) -> "Lattice2D":
        return cls(np.array([a, 0.0]), np.array([a / 2.0, a * math.sqrt(3) / 2.0]))

    @classmethod
    def honeycomb(cls, nearest: float) -> "Lattice2D":
        """Two triangular sublattices with nearest-neighbour separation ``nearest``."""
        a = nearest * math.sqrt(3)
        a1 = np.array([a, 0.0])
        a2 = np.array([a / 2.0, a * math.sqrt(3) / 2.0])
        return cls(a1, a2, (np.zeros(2), (a1 + a2) / 3.0))

    @classmethod
    def kagome(cls, a: float) -> "Lattice2D":
        """Three sublattices at 0, a1/2, a2/2 on a triangular Bravais lattice."""
        a1 = np.array([a, 0.0])
        a2 = np.array([a / 2.0, a * math.sqrt(3) / 2.0])
        return cls(a1, a2, (np.zeros(2), a1 / 2.0, a2 / 2.0))


@dataclass(frozen=True, eq=False)
class ReciprocalBasis:
    b1: np.ndarray
    b2: np.ndarray
    cell_area: float  # direct-space cell area |a1 x a2|


def reciprocal_basis(lat: Lattice2D) -> ReciprocalBasis:
    """Dual basis with b_i . a_j = 2*pi*delta_ij."""
    cross = float(np.cross(lat.a1, lat.a2))
    b1 = 2.0 * np.pi * np.array([lat.a2[1], -lat.a2[0]]) / cross
    b2 = 2.0 * np.pi * np.array([-lat.a1[1], lat.a1[0]]) / cross
    return ReciprocalBasis(b1=b1, b2=b2, cell_area=abs(cross))


def in_light_cone(k, q: float = Q_FREE) -> bool:
    """True iff k lies strictly inside the light cone, off the on-cone band."""
    k = _as_vec2(k)
    return bool(np.hypot(k[0], k[1]) <= q - TOL_LIGHT_CONE_REL * q)


def wrap_to_bz(k, lat: Lattice2D) -> np.ndarray:
    """Reduce k by reciprocal lattice vectors to the cell-centred copy."""
    rec = reciprocal_basis(lat)
    basis = np.column_stack([rec.b1, rec.b2])
    frac = np.linalg.solve(basis, _as_vec2(k))
    return basis @ (frac - np.round(frac))


@dataclass(frozen=True, eq=False)
class ChainDecomposition:
    """Decomposition of a lattice into L parallel 1D chains.

    The ribbon extends infinitely along ``d_par`` (period ``a_par``) and is
    open across ``L`` chains stacked along ``s_stack``.  ``e_par``/``e_perp``
    form a right-handed in-plane frame; chain m sits at ``m * s_stack``.
    """

    lattice: Lattice2D
    direction: tuple
    L: int
    d_par: np.ndarray
    a_par: float
    e_par: np.ndarray
    e_perp: np.ndarray
    s_stack: np.ndarray
    a_perp: float      # perpendicular spacing s_stack . e_perp (> 0)
    b_step: float      # parallel offset per chain step, s_stack . e_par

    def b_par(self, m: int, n: int) -> float:
        """Parallel offset between chains m and n, wrapped into [0, a_par)."""
        return float(((m - n) * self.b_step) % self.a_par)

    def r_perp(self, m: int, n: int) -> np.ndarray:
        """Perpendicular separation vector between chains m and n."""
        return (m - n) * self.a_perp * self.e_perp


def ribbon_decomposition(lat: Lattice2D, direction, L: int) -> ChainDecomposition:
    """Split ``lat`` into L chains running along the integer ``direction``.

    ``direction`` must be a primitive integer vector (gcd of components 1);
    the stacking vector completes it to a unimodular lattice basis.
    """
    n1, n2 = int(direction[0]), int(direction[1])
    if (n1, n2) != (direction[0], direction[1]):
        raise ValueError("direction must be an integer vector")
    g = math.gcd(abs(n1), abs(n2))
    if g == 0:
        raise ValueError("direction must be nonzero")
    if g != 1:
        raise ValueError(f"direction {direction} is not primitive (gcd={g})")
    if L < 2:
        raise ValueError("need at least 2 chains")

    # Extended gcd: x*n1 + y*n2 = 1, stacking s = (-y, x) gives det = +1.
    x, y = _ext_gcd(n1, n2)
    s1, s2 = -y, x
    d_par = n1 * lat.a1 + n2 * lat.a2
    s_vec = s1 * lat.a1 + s2 * lat.a2
    a_par = float(np.linalg.norm(d_par))
    e_par = d_par / a_par
    e_perp = np.array([-e_par[1], e_par[0]])
    a_perp = float(s_vec @ e_perp)
    if a_perp < 0:
        s_vec = -s_vec
        a_perp = -a_perp
    return ChainDecomposition(
        lattice=lat,
        direction=(n1, n2),
        L=int(L),
        d_par=d_par,
        a_par=a_par,
        e_par=e_par,
        e_perp=e_perp,
        s_stack=s_vec,
        a_perp=a_perp,
        b_step=float(s_vec @ e_par),
    )


def _ext_gcd(a: int, b: int) -> tuple:
    """Return (x, y) with x*a + y*b = gcd(a, b)."""
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r != 0:
        qt = old_r // r
        old_r, r = r, old_r - qt * r
        old_x, x = x, old_x - qt * x
        old_y, y = y, old_y - qt * y
    sign = 1 if old_r > 0 else -1
    return sign * old_x, sign * old_y
