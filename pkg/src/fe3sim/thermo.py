"""Thermal equilibrium: partition function, free energy and magnetization curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import MAX_TOTAL_SPIN
from .spin_core import (
    ALLOWED_TOTAL_SPINS,
    ModelParameters,
    SpectralDecomposition,
    build_hamiltonian_z,
    diagonalize,
    kambe_energy,
    total_spin_operators,
)

FD_STEP_TESLA = 1e-3
CROSS_CHECK_TOL = 1e-4


class MagnetizationMismatch(RuntimeError):
    pass


@dataclass(frozen=True)
class ThermoPoint:
    temperature: float
    b_z: float

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")


@dataclass(frozen=True)
class MagnetizationCurve:
    temperature: float
    b_z: np.ndarray
    m_z: np.ndarray

    @property
    def m_normalized(self) -> np.ndarray:
        return self.m_z / MAX_TOTAL_SPIN

    def rows(self):
        for b, m, mn in zip(self.b_z, self.m_z, self.m_normalized):
            yield float(b), float(m), float(mn)


@dataclass(frozen=True)
class Plateau:
    b_start: float
    b_end: float
    value: float  # normalized magnetization at the interval midpoint

    @property
    def width(self) -> float:
        return self.b_end - self.b_start


def _check_temperature(t: float) -> None:
    if not t > 0:
        raise ValueError(f"temperature must be positive, got {t}")


def boltzmann_weights(eigenvalues, t: float) -> np.ndarray:
    """Normalized Boltzmann weights, shifted by the ground energy."""
    _check_temperature(t)
    e = np.asarray(eigenvalues)
    w = np.exp(-(e - e.min()) / t)
    return w / w.sum()


def log_partition_function(eigenvalues, t: float) -> float:
    _check_temperature(t)
    e = np.asarray(eigenvalues)
    e_min = e.min()
    return float(-e_min / t + np.log(np.exp(-(e - e_min) / t).sum()))


def partition_function(d: SpectralDecomposition, t: float) -> float:
    """Z = sum_i exp(-E_i / T) evaluated in ground-shifted form."""
    return float(np.exp(log_partition_function(d.eigenvalues, t)))


def free_energy(d: SpectralDecomposition, t: float) -> float:
    """G = -T ln Z in Kelvin."""
    return -t * log_partition_function(d.eigenvalues, t)


def eigenstate_sz(d: SpectralDecomposition) -> np.ndarray:
    """<i|S_T^z|i> for every eigenvector (S_T^z is diagonal in the product basis)."""
    sz_diag = np.real(np.diag(total_spin_operators()[2]))
    return sz_diag @ (np.abs(d.eigenvectors) ** 2)


def thermal_sz(d: SpectralDecomposition, t: float) -> float:
    """Thermal average of S_T^z from eigenvector expectation values."""
    return float(boltzmann_weights(d.eigenvalues, t) @ eigenstate_sz(d))


def free_energy_sz(p: ModelParameters, t: float, delta: float = FD_STEP_TESLA) -> float:
    """<S_T^z> from a central difference of G(B_z) divided by g mu_B."""
    _check_temperature(t)
    g_plus = free_energy(diagonalize(build_hamiltonian_z(p.replace(b_z=p.b_z + delta))), t)
    g_minus = free_energy(diagonalize(build_hamiltonian_z(p.replace(b_z=p.b_z - delta))), t)
    dg_db = (g_plus - g_minus) / (2 * delta)
    return -dg_db / p.zeeman_kelvin_per_tesla


def magnetization(d: SpectralDecomposition, t: float, p: ModelParameters | None = None,
                  cross_check: bool = False) -> float:
    """Thermal <S_T^z> for the spectrum ``d`` of the longitudinal-field model.

    With ``cross_check`` (requires ``p``), the value is also obtained from the
    free-energy derivative and a mismatch above 1e-4 raises.
    """
    m = thermal_sz(d, t)
    if cross_check:
        if p is None:
            raise ValueError("cross_check needs the model parameters")
        m_fd = free_energy_sz(p, t)
        if abs(m - m_fd) > CROSS_CHECK_TOL:
            raise MagnetizationMismatch(
                f"thermal {m:.8g} vs free-energy {m_fd:.8g} at T={t}, B={p.b_z}"
            )
    return m


def magnetization_curve(p: ModelParameters, t: float, b_grid) -> MagnetizationCurve:
    """Isothermal <S_T^z>(B_z), one diagonalization per field value."""
    _check_temperature(t)
    b = np.asarray(b_grid, dtype=float)
    if b.ndim != 1 or b.size == 0:
        raise ValueError("b_grid must be a non-empty 1-D sequence")
    if np.any(np.diff(b) < 0) or np.any(b < 0):
        raise ValueError("b_grid must be sorted ascending and non-negative")
    m = np.array([thermal_sz(diagonalize(build_hamiltonian_z(p.replace(b_z=x))), t) for x in b])
    m[b == 0] = 0.0  # exact by S^z -> -S^z symmetry; removes eigenvector rounding
    return MagnetizationCurve(t, b, m)


def magnetization_curves(p: ModelParameters, temperatures, b_grid) -> list:
    """Curves for several temperatures sharing one diagonalization per field."""
    b = np.asarray(b_grid, dtype=float)
    if b.ndim != 1 or b.size == 0:
        raise ValueError("b_grid must be a non-empty 1-D sequence")
    if np.any(np.diff(b) < 0) or np.any(b < 0):
        raise ValueError("b_grid must be sorted ascending and non-negative")
    for t in temperatures:
        _check_temperature(t)
    spectra = [diagonalize(build_hamiltonian_z(p.replace(b_z=x))) for x in b]
    sz = [eigenstate_sz(d) for d in spectra]
    curves = []
    for t in temperatures:
        m = np.array([boltzmann_weights(d.eigenvalues, t) @ s for d, s in zip(spectra, sz)])
        m[b == 0] = 0.0  # exact by symmetry, as in magnetization_curve
        curves.append(MagnetizationCurve(t, b, m))
    return curves


def ground_state_staircase(p: ModelParameters, b_grid) -> np.ndarray:
    """Zero-temperature normalized magnetization from the closed-form ground level.

    At each field the lowest level of every sector S_T is E(S_T, S_T); the
    ground state is their minimum.
    """
    out = []
    for b in np.asarray(b_grid, dtype=float):
        q = p.replace(b_z=b)
        s_best = min(ALLOWED_TOTAL_SPINS, key=lambda s: kambe_energy(s, s, q))
        out.append(s_best / MAX_TOTAL_SPIN)
    return np.array(out)


def detect_plateaus(curve: MagnetizationCurve, slope_tol: float = 1e-4, min_width: float = 1.0) -> list:
    """Maximal field intervals of width >= ``min_width`` T where |d m_norm / dB| < ``slope_tol``.

    The slope is a centered numerical gradient of the normalized curve.
    """
    b = curve.b_z
    m = curve.m_normalized
    if b.size < 3:
        return []
    slope = np.gradient(m, b)
    flat = np.abs(slope) < slope_tol
    plateaus = []
    i = 0
    while i < b.size:
        if not flat[i]:
            i += 1
            continue
        j = i
        while j + 1 < b.size and flat[j + 1]:
            j += 1
        if b[j] - b[i] >= min_width:
            mid = (i + j) // 2
            plateaus.append(Plateau(float(b[i]), float(b[j]), float(m[mid])))
        i = j + 1
    return plateaus


def riser_midpoints(curve: MagnetizationCurve) -> list:
    """Fields where the normalized curve crosses each half-step (2k/15 for k = 1..7).

    Linear interpolation between grid points; levels never reached are skipped.
    """
    b, m = curve.b_z, curve.m_normalized
    out = []
    for k in range(1, 8):
        level = 2 * k / 15
        idx = np.nonzero((m[:-1] < level) & (m[1:] >= level))[0]
        if idx.size == 0:
            continue
        i = idx[0]
        frac = (level - m[i]) / (m[i + 1] - m[i])
        out.append((k - 0.5, float(b[i] + frac * (b[i + 1] - b[i]))))
    return out
