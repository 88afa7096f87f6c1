"""Sequential projective readout protocol and classical Fisher information.

A Dicke-initialized triangle evolves under the local transverse field on
site 1 for a time tau, site 3 is measured in its S^z basis, the collapsed
state evolves again, and so on for n_seq rounds.  Every outcome sequence
is enumerated exactly (6-ary tree, outcomes ordered by descending m_z).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .constants import FULL_DIM, LOCAL_DIM, N_SITES, SPIN
from .dynamics import dicke_state, evolve, propagator
from .spin_core import ModelParameters, build_hamiltonian_local_x, diagonalize

DEFAULT_TAU = 0.2
DEFAULT_DELTA_B = 1e-4
PROBABILITY_CUTOFF = 1e-12
MAX_REMAINDER = 1e-6
MAX_PRUNE_THRESHOLD = 1e-6
DEFAULT_LEAF_BUDGET = LOCAL_DIM**6

OUTCOMES = tuple(SPIN - j for j in range(LOCAL_DIM))  # +5/2, +3/2, ..., -5/2


class BudgetExceeded(RuntimeError):
    pass


class UntrustedFisherInformation(RuntimeError):
    pass


@dataclass(frozen=True)
class ProtocolConfig:
    b_x: float = 1.0
    dicke_k: int = 0
    n_seq: int = 1
    tau_list: tuple = None
    measured_site: int = 3
    prune_threshold: float = 0.0
    model: ModelParameters = field(default_factory=ModelParameters)

    def __post_init__(self):
        if self.n_seq < 1:
            raise ValueError("n_seq must be at least 1")
        if self.tau_list is None:
            object.__setattr__(self, "tau_list", (DEFAULT_TAU,) * self.n_seq)
        else:
            object.__setattr__(self, "tau_list", tuple(float(t) for t in self.tau_list))
        if len(self.tau_list) != self.n_seq:
            raise ValueError(f"tau_list has {len(self.tau_list)} entries, n_seq is {self.n_seq}")
        if any(t <= 0 for t in self.tau_list):
            raise ValueError("all free-evolution times must be positive")
        if not 0 <= self.prune_threshold <= MAX_PRUNE_THRESHOLD:
            raise ValueError(f"prune_threshold must lie in [0, {MAX_PRUNE_THRESHOLD}]")
        if self.measured_site not in range(1, N_SITES + 1):
            raise ValueError("measured_site must be 1, 2 or 3")
        if not 0 <= self.dicke_k <= 15:
            raise ValueError("dicke_k must be in 0..15")

    def with_n_seq(self, n_seq: int) -> "ProtocolConfig":
        if n_seq <= self.n_seq:
            taus = self.tau_list[:n_seq]
        elif len(set(self.tau_list)) == 1:
            taus = (self.tau_list[0],) * n_seq
        else:
            raise ValueError("cannot extend a non-uniform tau_list")
        return ProtocolConfig(self.b_x, self.dicke_k, n_seq, taus, self.measured_site,
                              self.prune_threshold, self.model)

    def as_dict(self) -> dict:
        return {
            "b_x": self.b_x,
            "dicke_k": self.dicke_k,
            "n_seq": self.n_seq,
            "tau_list": list(self.tau_list),
            "measured_site": self.measured_site,
            "prune_threshold": self.prune_threshold,
            "j_coupling": self.model.j_coupling,
            "g_factor": self.model.g_factor,
        }


@dataclass(frozen=True)
class TrajectoryNode:
    outcomes: tuple
    probability: float
    post_state: np.ndarray = None


@dataclass(frozen=True)
class TrajectoryTree:
    leaves: list
    remainder: float

    def total_probability(self) -> float:
        return float(sum(n.probability for n in self.leaves))


@dataclass(frozen=True)
class CfiEstimate:
    n_seq: int
    f_value: float
    excluded_terms: int = 0
    pruning_remainder: float = 0.0
    alpha: float = None
    beta: float = None
    residual: float = None

    @property
    def inverse(self) -> float:
        return 1.0 / self.f_value if self.f_value > 0 else np.inf


@lru_cache(maxsize=None)
def outcome_index(site: int = 3) -> np.ndarray:
    """Local level index (0 for m=+5/2 ... 5 for m=-5/2) of ``site`` for every basis state."""
    stride = LOCAL_DIM ** (N_SITES - site)
    idx = (np.arange(FULL_DIM) // stride) % LOCAL_DIM
    idx.setflags(write=False)
    return idx


def build_projectors(site: int = 3) -> np.ndarray:
    """The six projectors I x ... x |m><m| x ... x I on ``site``, stacked by descending m."""
    if site not in range(1, N_SITES + 1):
        raise ValueError("site must be 1, 2 or 3")
    idx = outcome_index(site)
    return np.stack([np.diag((idx == j).astype(complex)) for j in range(LOCAL_DIM)])


@lru_cache(maxsize=64)
def _local_field_spectrum(j_coupling: float, g_factor: float, b_x: float):
    return diagonalize(build_hamiltonian_local_x(ModelParameters(j_coupling, g_factor, 0.0, b_x)))


def protocol_step(v: np.ndarray, tau: float, b_x: float, model: ModelParameters = None,
                  site: int = 3) -> list:
    """One round of free evolution followed by a projective S^z readout of ``site``.

    Returns (m_z, probability, post_state) for every outcome with nonzero
    probability, ordered by descending m_z.
    """
    model = model or ModelParameters()
    d = _local_field_spectrum(model.j_coupling, model.g_factor, b_x)
    psi = evolve(v, d, tau)
    out = []
    for m_z, proj in zip(OUTCOMES, build_projectors(site)):
        projected = proj @ psi
        p = float(np.real(np.vdot(psi, projected)))
        if p > 0:
            out.append((m_z, p, projected / np.sqrt(p)))
    return out


def _expand(config: ProtocolConfig, fields: tuple, keep_states: bool = False,
            leaf_budget: int = DEFAULT_LEAF_BUDGET):
    """Breadth-first expansion of the outcome tree for several field values at once.

    Branches are kept when their probability reaches the pruning threshold
    (or is nonzero, with no pruning) for at least one field, so every field
    sees the same set of outcome sequences.  Rows are kept in lexicographic
    order of outcome index, identical to a depth-first walk visiting
    outcomes by descending m_z.

    Yields, after every measurement round, a dict with ``seqs`` (rows x
    depth outcome indices), ``probs`` (fields x rows), ``remainder``
    (per-field pruned mass) and, if requested on the final round, ``states``.
    """
    if config.prune_threshold == 0 and LOCAL_DIM**config.n_seq > leaf_budget:
        raise BudgetExceeded(
            f"{LOCAL_DIM}^{config.n_seq} leaves exceed the budget of {leaf_budget}; enable pruning"
        )
    model = config.model
    spectra = [_local_field_spectrum(model.j_coupling, model.g_factor, b) for b in fields]
    idx = outcome_index(config.measured_site)
    masks = [idx == j for j in range(LOCAL_DIM)]

    n_f = len(fields)
    states = np.broadcast_to(dicke_state(config.dicke_k), (n_f, 1, FULL_DIM)).copy()
    probs = np.ones((n_f, 1))
    seqs = np.zeros((1, 0), dtype=np.int8)
    remainder = np.zeros(n_f)

    for depth, tau in enumerate(config.tau_list, start=1):
        evolved = np.stack([states[f] @ propagator(spectra[f], tau).T for f in range(n_f)])
        weights = np.abs(evolved) ** 2
        step_p = np.stack([weights[..., m].sum(-1) for m in masks], axis=-1)  # (F, N, 6)
        child = (probs[..., None] * step_p).reshape(n_f, -1)
        best = child.max(axis=0)
        if config.prune_threshold > 0:
            keep = best >= config.prune_threshold
            remainder += child[:, ~keep].sum(axis=1)
        else:
            keep = best > 0
        if keep.sum() > leaf_budget:
            raise BudgetExceeded(f"{int(keep.sum())} live branches at depth {depth} exceed the budget")
        parent, outcome = np.divmod(np.nonzero(keep)[0], LOCAL_DIM)
        seqs = np.concatenate([seqs[parent], outcome[:, None].astype(np.int8)], axis=1)
        probs = child[:, keep]
        last = depth == config.n_seq
        level = {"seqs": seqs, "probs": probs, "remainder": remainder.copy()}
        if not last or keep_states:
            sel = evolved[:, parent, :] * np.stack(masks)[outcome][None, :, :]
            norms = np.sqrt(step_p[:, parent, outcome])
            with np.errstate(invalid="ignore", divide="ignore"):
                states = np.where(norms[..., None] > 0, sel / norms[..., None], 0.0)
            level["states"] = states
        yield level


def enumerate_trajectories(config: ProtocolConfig, keep_states: bool = True,
                           leaf_budget: int = DEFAULT_LEAF_BUDGET) -> TrajectoryTree:
    """All outcome sequences of length n_seq with their probabilities.

    Leaf probabilities plus the pruned remainder sum to one.
    """
    *_, final = _expand(config, (config.b_x,), keep_states=keep_states, leaf_budget=leaf_budget)
    leaves = []
    for row, seq in enumerate(final["seqs"]):
        state = final["states"][0, row] if keep_states else None
        outcomes = tuple(OUTCOMES[j] for j in seq)
        leaves.append(TrajectoryNode(outcomes, float(final["probs"][0, row]), state))
    return TrajectoryTree(leaves, float(final["remainder"][0]))


def _fisher_from_level(level: dict, delta_b: float) -> tuple:
    p_plus, p_mid, p_minus = level["probs"]
    deriv = (p_plus - p_minus) / (2 * delta_b)
    ok = p_mid >= PROBABILITY_CUTOFF
    f = float(np.sum(deriv[ok] ** 2 / p_mid[ok]))
    return f, int((~ok).sum()), float(level["remainder"].max())


def fisher_information_sequence(config: ProtocolConfig, delta_b: float = DEFAULT_DELTA_B) -> list:
    """Classical Fisher information after every round 1..n_seq of one protocol run.

    dP/dB_x is a central difference over B_x +- delta_b on the common
    branch set; terms with P below 1e-12 are excluded and counted.
    """
    if delta_b <= 0:
        raise ValueError("delta_b must be positive")
    fields = (config.b_x + delta_b, config.b_x, config.b_x - delta_b)
    out = []
    for depth, level in enumerate(_expand(config, fields), start=1):
        f, excluded, rem = _fisher_from_level(level, delta_b)
        if rem > MAX_REMAINDER:
            raise UntrustedFisherInformation(f"pruned mass {rem:.3g} at depth {depth} exceeds {MAX_REMAINDER}")
        out.append(CfiEstimate(depth, f, excluded, rem))
    return out


def classical_fisher_information(config: ProtocolConfig, delta_b: float = DEFAULT_DELTA_B) -> CfiEstimate:
    """F(B_x) = sum_gamma (dP_gamma/dB_x)^2 / P_gamma for trajectories of length n_seq."""
    return fisher_information_sequence(config, delta_b)[-1]


def fit_power_law(points) -> tuple:
    """Least-squares fit of log(y) = log(alpha) - beta log(n).

    Returns (alpha, beta, residual) with the residual the RMS misfit in log space.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three (n, value) points")
    n, y = pts[:, 0], pts[:, 1]
    if np.any(n <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs strictly positive inputs")
    design = np.column_stack([np.ones_like(n), -np.log(n)])
    coef, *_ = np.linalg.lstsq(design, np.log(y), rcond=None)
    resid = np.log(y) - design @ coef
    return float(np.exp(coef[0])), float(coef[1]), float(np.sqrt(np.mean(resid**2)))


def fisher_scaling(config: ProtocolConfig, delta_b: float = DEFAULT_DELTA_B) -> list:
    """CFI for n = 1..n_seq with the power-law fit of 1/F attached to every entry."""
    seq = fisher_information_sequence(config, delta_b)
    if len(seq) < 3:
        return seq
    alpha, beta, residual = fit_power_law([(e.n_seq, e.inverse) for e in seq])
    return [CfiEstimate(e.n_seq, e.f_value, e.excluded_terms, e.pruning_remainder, alpha, beta, residual)
            for e in seq]
