"""Finite-volume operators: magnetic translations in the standard gauge,
the flux operator, hull projections, Harper/Iwatsuka Hamiltonians, dense
spectral calculus, switch functions with their gap unitary, and the
interface shift unitary.

All operators are dense complex matrices over a window's site ordering with
open boundary conditions: a translation row whose source site leaves the
window is zero, so algebraic identities hold exactly on interior sites and
flags record where unitarity can be trusted.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import eigh

from .errors import (DegenerateField, EmptyGap, IrrationalFlux,
                     IrrationalSlope, NonHermitianPerturbation)
from .model import (ConstantField, IwatsukaField, PlusInfinity,
                    vector_potential)

HERMITIAN_TOL = 1e-12


@dataclass
class LatticeOperator:
    """Dense operator over a window's sites with Hermiticity/unitarity
    metadata."""

    window: object
    matrix: np.ndarray
    hermitian: bool = False
    unitary_on_interior: bool = False

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        n = self.window.size
        if self.matrix.shape != (n, n):
            raise ValueError("matrix does not match the window size")
        if self.hermitian:
            dev = np.abs(self.matrix - self.matrix.conj().T).max()
            if dev > HERMITIAN_TOL:
                raise ValueError(f"hermitian flag set but deviation {dev:.2e}")

    def diagonal(self):
        return np.diagonal(self.matrix)

    def adjoint(self):
        return LatticeOperator(self.window, self.matrix.conj().T,
                               hermitian=self.hermitian)


def product_diagonal(a, b):
    """diag(a @ b) without forming the product."""
    am = a.matrix if isinstance(a, LatticeOperator) else np.asarray(a)
    bm = b.matrix if isinstance(b, LatticeOperator) else np.asarray(b)
    return np.einsum("ik,ki->i", am, bm)


# ---------------------------------------------------------------------------
# gauge data on a window

def _column_field_values(field, n1, m_lo, m_hi):
    """B(n1, m) for m = m_lo..m_hi, vectorized where the field allows."""
    ms = np.arange(m_lo, m_hi + 1)
    if isinstance(field, ConstantField):
        vals = np.full(ms.size, field.b, dtype=float)
    else:
        plus = field.plus_side_array(np.full(ms.size, n1), ms)
        vals = np.where(plus, field.b_plus, field.b_minus)
    if field.perturbation:
        for (p1, p2), dv in field.perturbation.items():
            if p1 == n1 and m_lo <= p2 <= m_hi:
                vals[p2 - m_lo] += dv
    return vals


def horizontal_bond_potentials(field, window):
    """A(n, n - e1) of the standard gauge for every window site."""
    out = np.zeros(window.size)
    cols = {}
    for i, (n1, n2) in enumerate(window.sites):
        cols.setdefault(n1, []).append((n2, i))
    for n1, entries in cols.items():
        n2s = [e[0] for e in entries]
        hi, lo = max(max(n2s), 0), min(min(n2s), 0)
        b = _column_field_values(field, n1, lo, hi)
        F = np.zeros(hi - lo + 1)
        idx0 = -lo
        acc = 0.0
        for m in range(1, hi + 1):
            acc += b[idx0 + m]
            F[idx0 + m] = acc
        acc = 0.0
        for m in range(0, -lo):
            acc -= b[idx0 - m]
            F[idx0 - m - 1] = acc
        for n2, i in entries:
            out[i] = F[n2 - lo]
    return out


def magnetic_translation(field, window, j, periodic=False):
    """Magnetic translation s_j: (s_1 psi)(n) = e^{i A(n, n-e1)} psi(n-e1),
    (s_2 psi)(n) = psi(n-e2).  Open boundary unless periodic=True, which
    wraps a square window into a torus (meaningful for constant fields whose
    total flux through the torus is a 2*pi multiple)."""
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2")
    n = window.size
    S = np.zeros((n, n), dtype=complex)
    phases = horizontal_bond_potentials(field, window) if j == 1 else None
    M = getattr(window, "half_width", None)
    width = 2 * M + 1 if M is not None else None
    for i, (n1, n2) in enumerate(window.sites):
        src = (n1 - 1, n2) if j == 1 else (n1, n2 - 1)
        if not window.contains(src):
            if not (periodic and width):
                continue
            src = ((src[0] + M) % width - M, (src[1] + M) % width - M)
        S[i, window.index(src)] = np.exp(1j * phases[i]) if j == 1 else 1.0
    return LatticeOperator(window, S, unitary_on_interior=True)


def translation_phase(field, target, gamma):
    """Phase of s^gamma = s_1^{g1} s_2^{g2} on the target site: the product
    of the horizontal bond phases along the g1 leg (vertical legs are free
    in this gauge)."""
    g1 = gamma[0]
    n1, n2 = target
    if g1 >= 0:
        acc = math.fsum(vector_potential(field, (n1 - a, n2), 1) for a in range(g1))
    else:
        acc = -math.fsum(vector_potential(field, (n1 + a, n2), 1)
                         for a in range(1, -g1 + 1))
    return acc


def translation_by(field, window, gamma):
    """Dense magnetic translation by an arbitrary lattice vector,
    s^gamma = s_1^{g1} s_2^{g2}, with open boundary."""
    n = window.size
    S = np.zeros((n, n), dtype=complex)
    g1, g2 = gamma
    for i, (n1, n2) in enumerate(window.sites):
        src = (n1 - g1, n2 - g2)
        if window.contains(src):
            S[i, window.index(src)] = np.exp(1j * translation_phase(field, (n1, n2), gamma))
    return LatticeOperator(window, S, unitary_on_interior=True)


def flux_operator(field, window):
    """Diagonal operator of the flux phases e^{i B(n)}."""
    vals = np.array([np.exp(1j * field.value(s)) for s in window.sites])
    return LatticeOperator(window, np.diag(vals))


def shifted_flux_diagonal(field, window, shift):
    """Diagonal of the shifted flux operator, entries e^{i B(m - shift)}
    from the unperturbed two-valued field."""
    s1, s2 = shift
    return np.array([np.exp(1j * field.base_value((m1 - s1, m2 - s2)))
                     for m1, m2 in window.sites])


def hull_projection(field, window, kind, base=(0, 0)):
    """Diagonal interface projections built from shifted flux operators:
    kind "q" is the indicator of the b_plus side seen from the base site,
    "q_perp" its complement, "r"/"l" the single-strip differences across
    e1/e2.  Entries are exactly 0/1 for an unperturbed two-valued field."""
    if not isinstance(field, IwatsukaField):
        raise DegenerateField("hull projections need a two-valued field")
    zp = np.exp(1j * field.b_plus)
    zm = np.exp(1j * field.b_minus)
    denom = zp - zm
    if abs(denom) < 1e-12:
        raise DegenerateField("coinciding flux phases")
    n0 = tuple(base)
    f0 = shifted_flux_diagonal(field, window, n0)
    if kind == "q":
        diag = (f0 - zm) / denom
    elif kind == "q_perp":
        diag = 1.0 - (f0 - zm) / denom
    elif kind == "r":
        sgn = field.slope.offset_sign((-1, 0))    # sign(alpha)
        f1 = shifted_flux_diagonal(field, window, (n0[0] + 1, n0[1]))
        diag = sgn * (f1 - f0) / denom
    elif kind == "l":
        f2 = shifted_flux_diagonal(field, window, (n0[0], n0[1] + 1))
        diag = (f2 - f0) / (zm - zp)
    else:
        raise ValueError(f"unknown projection kind {kind!r}")
    return LatticeOperator(window, np.diag(diag))


# ---------------------------------------------------------------------------
# Bloch side

def _as_flux_fraction(flux):
    if isinstance(flux, Fraction):
        return flux
    if isinstance(flux, int):
        return Fraction(flux)
    if isinstance(flux, tuple) and len(flux) == 2:
        return Fraction(flux[0], flux[1])
    raise IrrationalFlux(f"flux {flux!r} is not an exact rational multiple of 2*pi")


def harper_bloch_matrix(flux, k):
    """q x q magnetic Bloch matrix of the hopping Hamiltonian at rational
    flux (in units of 2*pi per plaquette): cosine diagonal from the
    horizontal hops, unit vertical hops inside the magnetic cell, Bloch
    phase e^{+-i k2} on the wrap.  Sweeping k over [0, 2*pi)^2 traces the q
    magnetic bands."""
    flux = _as_flux_fraction(flux)
    p, q = flux.numerator, flux.denominator
    k1, k2 = k
    b = 2.0 * math.pi * p / q
    h = np.zeros((q, q), dtype=complex)
    for j in range(q):
        h[j, j] = 2.0 * math.cos(k1 + b * j)
    if q == 1:
        h[0, 0] += 2.0 * math.cos(k2)
        return h
    for j in range(q - 1):
        h[j, j + 1] += 1.0
        h[j + 1, j] += 1.0
    h[q - 1, 0] += np.exp(1j * k2)
    h[0, q - 1] += np.exp(-1j * k2)
    return h


def bloch_spectrum(flux, nk=60):
    """Eigenvalues of the Bloch matrix on an nk x nk grid over [0, 2*pi)^2,
    shape (nk, nk, q), ascending along the last axis."""
    flux = _as_flux_fraction(flux)
    q = flux.denominator
    ks = 2.0 * np.pi * np.arange(nk) / nk
    H = np.empty((nk, nk, q, q), dtype=complex)
    for i, k1 in enumerate(ks):
        for j, k2 in enumerate(ks):
            H[i, j] = harper_bloch_matrix(flux, (k1, k2))
    return np.linalg.eigvalsh(H)


@dataclass(frozen=True)
class BandStructure:
    flux: Fraction
    nk: int
    band_min: tuple
    band_max: tuple
    gaps: tuple          # ((lo, hi), ...) open gaps between consecutive bands

    @property
    def num_bands(self):
        return len(self.band_min)

    def spectrum_bounds(self):
        return self.band_min[0], self.band_max[-1]


def band_structure(flux, nk=60):
    """Band intervals and open gaps of the Harper spectrum at rational
    flux, from an nk x nk Bloch sweep."""
    flux = _as_flux_fraction(flux)
    ev = bloch_spectrum(flux, nk)
    lo = ev.min(axis=(0, 1))
    hi = ev.max(axis=(0, 1))
    gaps = tuple((float(hi[i]), float(lo[i + 1]))
                 for i in range(len(lo) - 1) if lo[i + 1] > hi[i] + 1e-9)
    return BandStructure(flux, nk, tuple(map(float, lo)), tuple(map(float, hi)), gaps)


# ---------------------------------------------------------------------------
# Hamiltonians and spectral calculus

def iwatsuka_hamiltonian(field, window, v=None):
    """Hopping Hamiltonian s1 + s1* + s2 + s2* for the given field, plus an
    optional Hermitian perturbation supported near the interface."""
    s1 = magnetic_translation(field, window, 1).matrix
    s2 = magnetic_translation(field, window, 2).matrix
    H = s1 + s1.conj().T + s2 + s2.conj().T
    if v is not None:
        vm = v.matrix if isinstance(v, LatticeOperator) else np.asarray(v, dtype=complex)
        if vm.shape != H.shape:
            raise NonHermitianPerturbation("perturbation shape mismatch")
        if np.abs(vm - vm.conj().T).max() > HERMITIAN_TOL:
            raise NonHermitianPerturbation("perturbation is not Hermitian")
        H = H + vm
    return LatticeOperator(window, H, hermitian=True)


@dataclass
class SpectralData:
    """Dense eigendecomposition of a Hermitian lattice operator."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source: LatticeOperator

    @staticmethod
    def from_operator(op):
        if not op.hermitian:
            raise ValueError("spectral calculus needs a Hermitian operator")
        w, v = eigh(op.matrix, driver="evd")
        return SpectralData(w, v, op)

    @property
    def window(self):
        return self.source.window

    def apply(self, func, hermitian=None):
        """Operator func(H) = V diag(func(E)) V*."""
        fvals = np.asarray(func(self.eigenvalues))
        m = (self.eigenvectors * fvals) @ self.eigenvectors.conj().T
        if hermitian is None:
            hermitian = bool(np.isrealobj(fvals))
        if hermitian:
            m = 0.5 * (m + m.conj().T)
        return LatticeOperator(self.window, m, hermitian=hermitian)


def fermi_projection(spectral, mu):
    """Spectral projection onto energies <= mu."""
    return spectral.apply(lambda E: (E <= mu).astype(float))


@dataclass(frozen=True)
class SwitchFunction:
    """C^3 polynomial switch: 0 below mu - delta, 1 above mu + delta, the
    degree-7 smoothstep in between; the derivative integrates to one."""

    mu: float
    delta: float

    @staticmethod
    def from_interval(lo, hi):
        return SwitchFunction(0.5 * (lo + hi), 0.5 * (hi - lo))

    @property
    def interval(self):
        return self.mu - self.delta, self.mu + self.delta

    def g(self, E):
        t = np.clip((np.asarray(E, dtype=float) - (self.mu - self.delta))
                    / (2.0 * self.delta), 0.0, 1.0)
        return t ** 4 * (35.0 - 84.0 * t + 70.0 * t ** 2 - 20.0 * t ** 3)

    def gprime(self, E):
        t = np.clip((np.asarray(E, dtype=float) - (self.mu - self.delta))
                    / (2.0 * self.delta), 0.0, 1.0)
        return 140.0 * t ** 3 * (1.0 - t) ** 3 / (2.0 * self.delta)


def gap_switch_operators(spectral, interval):
    """Switch calculus for a bulk gap interval: returns (g(h), g'(h),
    u = exp(2*pi*i g(h))).  Raises EmptyGap unless spectrum exists strictly
    below and above the interval."""
    lo, hi = interval
    if not lo < hi:
        raise ValueError("empty interval")
    E = spectral.eigenvalues
    if not (E.min() < lo and E.max() > hi):
        raise EmptyGap(f"interval ({lo:.4f}, {hi:.4f}) not inside the "
                       f"numerical spectral range [{E.min():.4f}, {E.max():.4f}]")
    sw = SwitchFunction.from_interval(lo, hi)
    g_of_h = spectral.apply(sw.g)
    gp_of_h = spectral.apply(sw.gprime)
    u = spectral.apply(lambda x: np.exp(2j * np.pi * sw.g(x)), hermitian=False)
    u.unitary_on_interior = True
    return g_of_h, gp_of_h, u


# ---------------------------------------------------------------------------
# interface shift unitary

def _tangential_vector_and_width(slope, variant):
    """Translation vector along the interface and the exact strip width in
    offset units times q (so strip membership is an integer condition)."""
    if not slope.is_rational:
        raise IrrationalSlope("the interface shift unitary needs a rational "
                              "direction vector")
    if slope.is_finite:
        p, q = slope.p, slope.q
        gamma = (q, p)
        if variant == "minimal":
            k_hi = 1                      # offsets with 1 <= q*x <= 1
        elif variant == "wide":
            k_hi = p * p + q * q          # 1 <= q*x <= p^2 + q^2
        else:
            raise ValueError(f"unknown variant {variant!r}")
        return gamma, k_hi
    gamma = (0, 1) if slope == PlusInfinity else (0, -1)
    return gamma, 1


def strip_projection(field, window, variant="minimal"):
    """Diagonal indicator of the interface strip: offsets x in (0, w] with
    w the offset step of the chosen variant (one transversal point for
    "minimal", p^2+q^2 of them for "wide")."""
    slope = field.slope
    gamma, k_hi = _tangential_vector_and_width(slope, variant)
    pos = window.positions()
    if slope.is_finite:
        k = -slope.p * pos[:, 0] + slope.q * pos[:, 1]      # q * offset
    else:
        k = -pos[:, 0] if slope == PlusInfinity else pos[:, 0]
    mask = (k >= 1) & (k <= k_hi)
    return LatticeOperator(window, np.diag(mask.astype(complex)), hermitian=True)


def interface_shift_unitary(field, window, variant="minimal"):
    """Unitary 1 + (s_gamma - 1) P acting as the magnetic translation along
    the interface on the strip P and as the identity elsewhere; gamma is the
    primitive tangential vector (q, p).  The "minimal" strip holds a single
    transversal point; "wide" uses the full transversal period vector whose
    strip holds p^2 + q^2 of them."""
    slope = field.slope
    gamma, k_hi = _tangential_vector_and_width(slope, variant)
    strip = strip_projection(field, window, variant).diagonal().real > 0.5
    n = window.size
    U = np.eye(n, dtype=complex)
    for j in np.nonzero(strip)[0]:
        site = window.sites[j]
        U[j, j] = 0.0
        tgt = (site[0] + gamma[0], site[1] + gamma[1])
        if window.contains(tgt):
            U[window.index(tgt), j] = np.exp(
                1j * translation_phase(field, tgt, gamma))
    return LatticeOperator(window, U, unitary_on_interior=True)
