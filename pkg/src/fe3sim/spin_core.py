"""Spin operators, model Hamiltonians and spectral analysis for the spin-5/2 triangle.

Basis convention: product z-basis |m1, m2, m3> with m running from +s down
to -s inside each site, and site 1 the slowest-varying Kronecker index.
Energies are in Kelvin.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constants import CM_TO_K, MU_B_K, N_SITES, REFERENCE_G, REFERENCE_J_CM


class SpectralError(RuntimeError):
    """Raised when an eigen-solve or a sector assignment fails."""


@dataclass(frozen=True)
class SpinQuantum:
    two_s: int = 5

    def __post_init__(self):
        if int(self.two_s) != self.two_s or self.two_s < 1:
            raise ValueError(f"two_s must be a positive integer, got {self.two_s}")

    @property
    def s(self) -> float:
        return self.two_s / 2

    @property
    def local_dim(self) -> int:
        return self.two_s + 1


@dataclass(frozen=True)
class LocalSpinOperators:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    s_plus: np.ndarray
    s_minus: np.ndarray


@dataclass(frozen=True)
class ModelParameters:
    """Exchange J in cm^-1, g factor, longitudinal field b_z and local field b_x in Tesla."""

    j_coupling: float = REFERENCE_J_CM
    g_factor: float = REFERENCE_G
    b_z: float = 0.0
    b_x: float = 0.0

    def __post_init__(self):
        if self.j_coupling < 0:
            raise ValueError("j_coupling must be non-negative (antiferromagnetic)")
        if self.g_factor <= 0:
            raise ValueError("g_factor must be positive")

    @property
    def j_kelvin(self) -> float:
        return self.j_coupling * CM_TO_K

    @property
    def zeeman_kelvin_per_tesla(self) -> float:
        return self.g_factor * MU_B_K

    def replace(self, **changes) -> "ModelParameters":
        fields = dict(
            j_coupling=self.j_coupling, g_factor=self.g_factor, b_z=self.b_z, b_x=self.b_x
        )
        fields.update(changes)
        return ModelParameters(**fields)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending, Kelvin) and eigenvectors (column k <-> eigenvalue k)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


@dataclass(frozen=True)
class SectorEntry:
    s_total: float
    s_total_z: float
    kambe_energy: float
    multiplicity: int


@dataclass(frozen=True)
class SectorReport:
    entries: tuple

    def multiplicities(self) -> dict:
        return {e.s_total: e.multiplicity for e in self.entries}

    def total_states(self) -> int:
        return int(sum(round(2 * e.s_total + 1) * e.multiplicity for e in self.entries))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def build_local_spin_operators(spin: SpinQuantum = SpinQuantum()) -> LocalSpinOperators:
    """Single-site spin matrices in the |m> basis with m descending from +s."""
    s = spin.s
    m = s - np.arange(spin.local_dim)
    s_plus = np.zeros((spin.local_dim, spin.local_dim), dtype=complex)
    for i in range(1, spin.local_dim):
        # <m+1| S+ |m> with |m> = column i, |m+1> = row i-1
        s_plus[i - 1, i] = np.sqrt(s * (s + 1) - m[i] * (m[i] + 1))
    s_minus = s_plus.conj().T.copy()
    sx = (s_plus + s_minus) / 2
    sy = (s_plus - s_minus) / 2j
    sz = np.diag(m).astype(complex)
    return LocalSpinOperators(*(_frozen(x) for x in (sx, sy, sz, s_plus, s_minus)))


def embed_at_site(op: np.ndarray, site: int, n_sites: int = N_SITES) -> np.ndarray:
    """Kronecker-embed a single-site operator at ``site`` (1-based, site 1 slowest)."""
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"expected a square single-site operator, got shape {op.shape}")
    if not 1 <= site <= n_sites:
        raise ValueError(f"site must be in 1..{n_sites}, got {site}")
    d = op.shape[0]
    out = np.ones((1, 1), dtype=complex)
    for k in range(1, n_sites + 1):
        out = np.kron(out, op if k == site else np.eye(d))
    return out


@lru_cache(maxsize=None)
def site_operators(spin: SpinQuantum = SpinQuantum()) -> dict:
    """Embedded S^x, S^y, S^z for every site: ``ops[(site, axis)]`` with axis in 'xyz'."""
    loc = build_local_spin_operators(spin)
    ops = {}
    for site in range(1, N_SITES + 1):
        for axis, op in zip("xyz", (loc.sx, loc.sy, loc.sz)):
            ops[(site, axis)] = _frozen(embed_at_site(op, site))
    return ops


@lru_cache(maxsize=None)
def total_spin_operators(spin: SpinQuantum = SpinQuantum()) -> tuple:
    """(S_T^x, S_T^y, S_T^z, S_T^2) on the full product space."""
    ops = site_operators(spin)
    tot = [sum(ops[(k, a)] for k in range(1, N_SITES + 1)) for a in "xyz"]
    s2 = sum(t @ t for t in tot)
    return tuple(_frozen(np.asarray(t)) for t in (*tot, s2))


@lru_cache(maxsize=None)
def _pair_exchange(spin: SpinQuantum = SpinQuantum()) -> np.ndarray:
    ops = site_operators(spin)
    h = np.zeros_like(ops[(1, "z")])
    for a, b in ((1, 2), (2, 3), (1, 3)):
        for axis in "xyz":
            h = h + ops[(a, axis)] @ ops[(b, axis)]
    return _frozen(h)


def build_hamiltonian_z(p: ModelParameters) -> np.ndarray:
    """Isotropic Heisenberg triangle with a uniform longitudinal field (Kelvin)."""
    stz = total_spin_operators()[2]
    return p.j_kelvin * _pair_exchange() - p.zeeman_kelvin_per_tesla * p.b_z * stz


def build_hamiltonian_local_x(p: ModelParameters) -> np.ndarray:
    """Heisenberg triangle with a transverse field acting on site 1 only (Kelvin)."""
    s1x = site_operators()[(1, "x")]
    return p.j_kelvin * _pair_exchange() - p.zeeman_kelvin_per_tesla * p.b_x * s1x


def hermiticity_error(h: np.ndarray) -> float:
    """max|H - H^dagger| relative to max|H| (absolute when H is zero)."""
    scale = np.abs(h).max()
    err = np.abs(h - h.conj().T).max()
    return err / scale if scale > 0 else err


def _check_half_integer(x: float, name: str) -> None:
    if abs(2 * x - round(2 * x)) > 1e-12:
        raise ValueError(f"{name} must be a half-integer, got {x}")


def kambe_energy(s_total: float, s_total_z: float, p: ModelParameters) -> float:
    """Closed-form energy of the total-spin level (s_total, s_total_z) in Kelvin."""
    _check_half_integer(s_total, "s_total")
    _check_half_integer(s_total_z, "s_total_z")
    if round(2 * s_total) % 2 != 1 or not 0.5 <= s_total <= 7.5:
        raise ValueError(f"s_total must be one of 1/2 .. 15/2, got {s_total}")
    if abs(s_total_z) > s_total or round(2 * (s_total - s_total_z)) % 2:
        raise ValueError(f"invalid s_total_z={s_total_z} for s_total={s_total}")
    return (p.j_kelvin / 2) * (s_total * (s_total + 1) - 105 / 4) - (
        p.zeeman_kelvin_per_tesla * p.b_z * s_total_z
    )


ALLOWED_TOTAL_SPINS = tuple(k / 2 for k in range(1, 16, 2))


def diagonalize(h: np.ndarray, herm_tol: float = 1e-10) -> SpectralDecomposition:
    """Dense Hermitian eigendecomposition with ascending eigenvalues."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if hermiticity_error(h) > herm_tol:
        raise ValueError("matrix is not Hermitian")
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigensolver did not converge: {exc}") from exc
    return SpectralDecomposition(_frozen(w), _frozen(v))


def match_kambe(eigenvalues, p: ModelParameters, tol: float = 1e-6) -> list:
    """Assign each eigenvalue to a (S_T, S_T^z) pair whose closed-form energy matches.

    Raises
    ------
    SpectralError
        If some eigenvalue has no closed-form partner within ``tol``.
    """
    levels = [
        (s, s - k, kambe_energy(s, s - k, p))
        for s in ALLOWED_TOTAL_SPINS
        for k in range(int(round(2 * s)) + 1)
    ]
    energies = np.array([e for _, _, e in levels])
    out = []
    for lam in np.asarray(eigenvalues):
        i = int(np.argmin(np.abs(energies - lam)))
        if abs(energies[i] - lam) > tol:
            raise SpectralError(f"eigenvalue {lam:.10g} K matches no total-spin level within {tol} K")
        out.append(levels[i][:2])
    return out


def sector_analysis(d: SpectralDecomposition, p: ModelParameters, tol: float = 1e-6) -> SectorReport:
    """Count multiplets per total spin from a zero-field spectrum.

    Each eigenvalue must sit within ``tol`` of exactly one closed-form level;
    the number of states per S_T divided by 2 S_T + 1 is the multiplicity.
    """
    if p.b_z != 0:
        raise ValueError("sector analysis expects the zero-field spectrum")
    counts = dict.fromkeys(ALLOWED_TOTAL_SPINS, 0)
    targets = {s: kambe_energy(s, s, p) for s in ALLOWED_TOTAL_SPINS}
    for lam in d.eigenvalues:
        hits = [s for s, e in targets.items() if abs(e - lam) <= tol]
        if len(hits) != 1:
            raise SpectralError(f"eigenvalue {lam:.10g} K is not assignable to a unique S_T")
        counts[hits[0]] += 1
    entries = []
    for s in sorted(ALLOWED_TOTAL_SPINS, reverse=True):
        n_states = counts[s]
        width = int(round(2 * s + 1))
        if n_states % width:
            raise SpectralError(f"S_T={s}: {n_states} states is not a whole number of multiplets")
        entries.append(SectorEntry(s, s, targets[s], n_states // width))
    return SectorReport(tuple(entries))


def level_crossing_field(s_total: float, p: ModelParameters) -> float:
    """Field (Tesla) where the lowest |S_T> and |S_T + 1> levels cross."""
    _check_half_integer(s_total, "s_total")
    if s_total not in ALLOWED_TOTAL_SPINS[:-1]:
        raise ValueError(f"no crossing above S_T={s_total}; allowed 1/2 .. 13/2")
    return (s_total + 1) * p.j_kelvin / p.zeeman_kelvin_per_tesla


def ground_state_sz(p: ModelParameters) -> float:
    """<S_T^z> of the numerically lowest eigenvector of the longitudinal-field model."""
    d = diagonalize(build_hamiltonian_z(p))
    stz = total_spin_operators()[2]
    v = d.eigenvectors[:, 0]
    return float(np.real(v.conj() @ stz @ v))


def ground_state_crossings(p: ModelParameters, b_max: float = 110.0, resolution: float = 1e-4) -> list:
    """Numerically locate ground-state transition fields by bisection on <S_T^z>.

    The field axis is scanned in 1 T steps; every step where the ground-state
    magnetization jumps is refined by bisection to ``resolution`` Tesla.
    Returns a list of (lower S_T^z, crossing field).
    """
    grid = np.arange(0.5, b_max + 1e-9, 1.0)
    sz = [round(ground_state_sz(p.replace(b_z=b)) * 2) / 2 for b in grid]
    crossings = []
    for i in range(len(grid) - 1):
        lo, hi = grid[i], grid[i + 1]
        m_lo, m_hi = sz[i], sz[i + 1]
        while m_lo != m_hi:
            # refine down to a single unit step in S_T^z
            while hi - lo > resolution:
                mid = 0.5 * (lo + hi)
                m_mid = round(ground_state_sz(p.replace(b_z=mid)) * 2) / 2
                if m_mid == m_lo:
                    lo = mid
                else:
                    hi, m_hi = mid, m_mid
            crossings.append((m_lo, 0.5 * (lo + hi)))
            lo, m_lo = hi, m_hi
            hi, m_hi = grid[i + 1], sz[i + 1]
    return crossings
