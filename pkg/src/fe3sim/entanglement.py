"""Thermal states, partial trace/transpose and negativity measures for the triangle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import LOCAL_DIM, N_SITES
from .spin_core import ModelParameters, SpectralDecomposition, build_hamiltonian_z, diagonalize
from .thermo import boltzmann_weights

NEGATIVITY_CUTOFF = 1e-12
FORMULA_AGREEMENT_TOL = 1e-12
THRESHOLD_ZERO = 1e-8


class ThresholdBracketError(ValueError):
    pass


@dataclass(frozen=True)
class NegativityResult:
    value: float
    negative_eigenvalue_count: int
    bipartition: str


def check_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> None:
    """Raise ValueError unless rho is Hermitian, unit-trace and positive semidefinite."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"density matrix trace is {np.trace(rho).real}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix has a negative eigenvalue")


def thermal_state(d: SpectralDecomposition, t: float) -> np.ndarray:
    """Gibbs state sum_i p_i |i><i| with ground-shifted Boltzmann weights."""
    p = boltzmann_weights(d.eigenvalues, t)
    v = d.eigenvectors
    rho = (v * p) @ v.conj().T
    return 0.5 * (rho + rho.conj().T)


def _site_dims(dim: int, local_dim: int = LOCAL_DIM) -> list:
    n = round(np.log(dim) / np.log(local_dim))
    if local_dim**n != dim:
        raise ValueError(f"dimension {dim} is not a power of the local dimension {local_dim}")
    return [local_dim] * n


def partial_trace(rho: np.ndarray, traced_site: int, local_dim: int = LOCAL_DIM) -> np.ndarray:
    """Trace out one site (1-based) of a multi-site density matrix."""
    dims = _site_dims(rho.shape[0], local_dim)
    n = len(dims)
    if not 1 <= traced_site <= n:
        raise ValueError(f"traced_site must be in 1..{n}")
    t = rho.reshape(dims + dims)
    k = traced_site - 1
    reduced = np.trace(t, axis1=k, axis2=k + n)
    d_out = int(np.prod(dims)) // dims[k]
    return reduced.reshape(d_out, d_out)


def reduced_pair(rho: np.ndarray, pair: tuple) -> np.ndarray:
    """Two-site reduced density matrix for ``pair`` = (i, j), i < j, from a three-site state."""
    (other,) = set(range(1, N_SITES + 1)) - set(pair)
    return partial_trace(rho, other)


def partial_transpose(rho: np.ndarray, subsystem, local_dim: int = LOCAL_DIM) -> np.ndarray:
    """Transpose the indices of the sites in ``subsystem`` (1-based) only."""
    dims = _site_dims(rho.shape[0], local_dim)
    n = len(dims)
    sites = sorted(set(subsystem))
    if not sites or sites[0] < 1 or sites[-1] > n or len(sites) == n:
        raise ValueError(f"subsystem {subsystem} is not one side of a bipartition of {n} sites")
    axes = list(range(2 * n))
    for s in sites:
        axes[s - 1], axes[s - 1 + n] = axes[s - 1 + n], axes[s - 1]
    return rho.reshape(dims + dims).transpose(axes).reshape(rho.shape)


def negativity_from_spectrum(eigenvalues, label: str) -> NegativityResult:
    """Sum of |negative eigenvalues| of a partial transpose.

    Both the negative-sum and the half trace-norm-excess forms are evaluated
    and must agree to 1e-12; eigenvalues above -1e-12 count as nonnegative.
    """
    lam = np.asarray(eigenvalues)
    negative_sum = -lam[lam < 0].sum()
    half_trace = 0.5 * (np.abs(lam) - lam).sum()
    if abs(negative_sum - half_trace) > FORMULA_AGREEMENT_TOL:
        raise ArithmeticError(f"negativity forms disagree: {negative_sum} vs {half_trace}")
    genuine = lam[lam < -NEGATIVITY_CUTOFF]
    return NegativityResult(float(-genuine.sum()), int(genuine.size), label)


def bipartite_negativity(rho_pair: np.ndarray, label: str = "1|2") -> NegativityResult:
    """Negativity of a two-site state, transposing the second site."""
    if rho_pair.shape != (LOCAL_DIM**2, LOCAL_DIM**2):
        raise ValueError(f"expected a {LOCAL_DIM**2}-dimensional pair state, got {rho_pair.shape}")
    return negativity_from_spectrum(np.linalg.eigvalsh(partial_transpose(rho_pair, [2])), label)


def one_vs_rest_negativity(rho: np.ndarray, site: int) -> NegativityResult:
    rest = "".join(str(k) for k in range(1, N_SITES + 1) if k != site)
    lam = np.linalg.eigvalsh(partial_transpose(rho, [site]))
    return negativity_from_spectrum(lam, f"{site}|{rest}")


def tripartite_negativity(rho: np.ndarray) -> tuple:
    """Geometric mean of the three one-vs-rest negativities.

    Returns ``(value, [N_1|23, N_2|13, N_3|12])``; the value is zero whenever
    any factor is zero.
    """
    parts = [one_vs_rest_negativity(rho, k) for k in range(1, N_SITES + 1)]
    values = [r.value for r in parts]
    if min(values) <= 0:
        return 0.0, parts
    return float(np.prod(values) ** (1 / 3)), parts


def bipartite_thermal(p: ModelParameters, t: float) -> float:
    rho = thermal_state(diagonalize(build_hamiltonian_z(p)), t)
    return bipartite_negativity(reduced_pair(rho, (1, 2))).value


def tripartite_thermal(p: ModelParameters, t: float) -> float:
    rho = thermal_state(diagonalize(build_hamiltonian_z(p)), t)
    return tripartite_negativity(rho)[0]


def threshold_temperature(p: ModelParameters, measure: str, t_bracket=(1.0, 150.0),
                          resolution: float = 0.1) -> float:
    """Smallest temperature where the chosen negativity drops below 1e-8.

    Bisection on the predicate ``N(T) < 1e-8`` inside ``t_bracket``; the
    spectrum is diagonalized once and reused for every temperature.
    """
    if measure not in ("bipartite", "tripartite"):
        raise ValueError(f"unknown measure {measure!r}")
    d = diagonalize(build_hamiltonian_z(p))

    def value(t):
        rho = thermal_state(d, t)
        if measure == "bipartite":
            return bipartite_negativity(reduced_pair(rho, (1, 2))).value
        return tripartite_negativity(rho)[0]

    lo, hi = t_bracket
    if not (value(lo) >= THRESHOLD_ZERO and value(hi) < THRESHOLD_ZERO):
        raise ThresholdBracketError(f"bracket {t_bracket} does not straddle the {measure} threshold")
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if value(mid) < THRESHOLD_ZERO:
            hi = mid
        else:
            lo = mid
    return hi


def negativity_sweep(p: ModelParameters, b_grid, t_grid):
    """Yield (b, t, n_bip, n_trip) for every field/temperature pair.

    One diagonalization per field; the Gibbs state at each temperature feeds
    both measures.
    """
    for b in b_grid:
        d = diagonalize(build_hamiltonian_z(p.replace(b_z=float(b))))
        for t in t_grid:
            rho = thermal_state(d, float(t))
            n_bip = bipartite_negativity(reduced_pair(rho, (1, 2))).value
            n_trip = tripartite_negativity(rho)[0]
            yield float(b), float(t), n_bip, n_trip
