"""Dicke states of three spin-5/2 qudits and unitary dynamics under a local transverse field."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np
import scipy.sparse as sps

from .constants import FULL_DIM, HBAR_OVER_KB_PS, N_SITES, TWO_S
from .spin_core import (
    ModelParameters,
    SpectralDecomposition,
    build_hamiltonian_local_x,
    diagonalize,
    embed_at_site,
    build_local_spin_operators,
    site_operators,
)

MAX_DICKE_K = N_SITES * TWO_S
DEFAULT_WINDOW_THETA = 150.0
DEFAULT_SAMPLES = 2000


@dataclass(frozen=True)
class TrajectoryRecord:
    theta: np.ndarray
    sz1: np.ndarray
    sz2: np.ndarray
    sz3: np.ndarray

    @property
    def t_ps(self) -> np.ndarray:
        return self.theta * HBAR_OVER_KB_PS

    def sensor_readout_correlation(self) -> float:
        return float(np.corrcoef(self.sz1, self.sz3)[0, 1])


def _collective_raising() -> sps.csr_matrix:
    sp = build_local_spin_operators().s_plus
    return sps.csr_matrix(sum(embed_at_site(sp, k) for k in range(1, N_SITES + 1)))


def dicke_normalization(k: int) -> float:
    """a_k = 1 / (k! sqrt(C(15, k)))."""
    return 1.0 / (factorial(k) * np.sqrt(comb(MAX_DICKE_K, k)))


def dicke_state(k: int) -> np.ndarray:
    """|D_k> = a_k (J+)^k |-5/2, -5/2, -5/2>.

    The raising operator is applied ``k`` times to the all-down seed; the
    analytic a_k is checked against the computed norm before a final
    renormalization.
    """
    if int(k) != k or not 0 <= k <= MAX_DICKE_K:
        raise ValueError(f"Dicke index must be an integer in 0..{MAX_DICKE_K}, got {k}")
    jp = _collective_raising()
    v = np.zeros(FULL_DIM, dtype=complex)
    v[-1] = 1.0  # |-5/2,-5/2,-5/2> is the last product-basis state
    for _ in range(k):
        v = jp @ v
    v = v * dicke_normalization(k)
    if abs(np.linalg.norm(v) - 1) > 1e-10:
        raise ArithmeticError(f"a_{k} does not normalize (J+)^{k}|seed>: norm {np.linalg.norm(v)}")
    return v / np.linalg.norm(v)


def evolve(v: np.ndarray, d: SpectralDecomposition, theta) -> np.ndarray:
    """Propagate ``v`` by exp(-i H theta) using the spectral decomposition of H.

    ``theta`` may be a scalar (returns a vector) or a 1-D array (returns one
    row per time).
    """
    v = np.asarray(v)
    if v.shape != (d.dim,):
        raise ValueError(f"state has shape {v.shape}, operator dimension is {d.dim}")
    coeffs = d.eigenvectors.conj().T @ v
    th = np.asarray(theta, dtype=float)
    phases = np.exp(-1j * np.multiply.outer(th, d.eigenvalues))
    return (phases * coeffs) @ d.eigenvectors.T


def propagator(d: SpectralDecomposition, theta: float) -> np.ndarray:
    """Dense exp(-i H theta)."""
    return (d.eigenvectors * np.exp(-1j * d.eigenvalues * theta)) @ d.eigenvectors.conj().T


def default_theta_grid(window: float = DEFAULT_WINDOW_THETA, samples: int = DEFAULT_SAMPLES) -> np.ndarray:
    return np.linspace(0.0, window, samples)


def local_sz_expectations(states: np.ndarray) -> tuple:
    """<S_k^z> for k = 1, 2, 3 along the rows of ``states``."""
    ops = site_operators()
    out = []
    for site in range(1, N_SITES + 1):
        diag = np.real(np.diag(ops[(site, "z")]))
        out.append((np.abs(states) ** 2) @ diag)
    return tuple(out)


def magnetization_trace(k: int, p: ModelParameters, theta_grid=None) -> TrajectoryRecord:
    """Local magnetizations of all three sites for |D_k> evolving under the local-field model."""
    if p.b_z != 0:
        raise ValueError("the local-field dynamics assumes b_z = 0")
    theta = default_theta_grid() if theta_grid is None else np.asarray(theta_grid, dtype=float)
    d = diagonalize(build_hamiltonian_local_x(p))
    states = evolve(dicke_state(k), d, theta)
    sz1, sz2, sz3 = local_sz_expectations(states)
    return TrajectoryRecord(theta, sz1, sz2, sz3)
