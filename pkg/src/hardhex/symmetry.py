"""State-space symmetries induced by grid automorphisms.

A site permutation ``ξ`` acts on configurations by
``(ξ̄σ)(v) = σ(ξ(v))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import stats

from .config import Configuration, stable_configs
from .dynamics import DEFAULT_CAP, DynamicsParams, run_batch
from .landscape import LandscapeIndex
from .lattice import Automorphism, Grid


def _perm(aut) -> np.ndarray:
    return np.asarray(aut.perm if isinstance(aut, Automorphism) else aut, dtype=np.int64)


def induced(aut, sigma: Configuration) -> Configuration:
    perm = _perm(aut)
    bits = 0
    for v, w in enumerate(perm):
        if (sigma.bits >> int(w)) & 1:
            bits |= 1 << v
    return Configuration(sigma.grid, bits)


def induced_color_perm(aut) -> tuple:
    """``p`` with ``ξ̄(stable x) = stable p[x]``; identity for ``None``."""
    if aut is None:
        return (0, 1, 2)
    inv = [0, 0, 0]
    for x in range(3):
        inv[aut.color_map[x]] = x
    return tuple(inv)


def state_permutation(index: LandscapeIndex, aut) -> np.ndarray:
    """Image state id of every state; -1 where the image is not a hard-core state."""
    perm = _perm(aut)
    s = index.states
    img = np.zeros_like(s)
    for v, w in enumerate(perm):
        img |= ((s >> np.uint64(w)) & np.uint64(1)) << np.uint64(v)
    k = np.searchsorted(s, img)
    k[k >= len(s)] = 0
    return np.where(s[k] == img, k, -1)


def verify_state_automorphism(index: LandscapeIndex, aut) -> bool:
    """Exhaustively check that ``ξ̄`` permutes states, preserves energy and the move graph."""
    perm = _perm(aut)
    if sorted(perm.tolist()) != list(range(index.grid.N)):
        return False
    pi = state_permutation(index, aut)
    if (pi < 0).any() or len(np.unique(pi)) != index.size:
        return False
    if not np.array_equal(index.energy[pi], index.energy):
        return False
    m = index.moves.tocoo()
    moved = sp.csr_matrix((m.data, (pi[m.row], pi[m.col])), shape=m.shape)
    return (moved != index.moves).nnz == 0


@dataclass
class CouplingReport:
    n_samples: int
    beta: float
    seed: int
    frac_b: float
    binomial_p: float
    ks_stat: float
    ks_p: float
    chi2_stat: float
    chi2_p: float
    truncated: int
    alpha: float = 0.01

    @property
    def clauses(self) -> dict:
        return {
            "(i) hit state uniform over {b,c}": self.binomial_p > self.alpha,
            "(ii) tau_a{b,c} =d tau_b{a,c}": self.ks_p > self.alpha,
            "(iii) tau independent of hit state": self.chi2_p > self.alpha,
        }

    @property
    def passed(self) -> bool:
        return self.truncated == 0 and all(self.clauses.values())

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items()}
        d["clauses"] = self.clauses
        d["passed"] = self.passed
        return d


def coupling_checks(grid: Grid, beta: float, n_samples: int, seed: int,
                    workers: int = 1, cap: int = DEFAULT_CAP, alpha: float = 0.01) -> CouplingReport:
    """Statistical checks of the tunneling-time symmetry properties."""
    if n_samples < 100:
        raise ValueError("coupling checks need at least 100 samples")
    if not beta > 0:
        raise ValueError("beta must be positive")
    a, b, c = stable_configs(grid)
    p = DynamicsParams(beta, seed)
    from_a = run_batch(a, [b, c], p, n_samples, workers, cap, stream=0)
    from_b = run_batch(b, [a, c], p, n_samples, workers, cap, stream=1)
    trunc = sum(s.truncated for s in from_a + from_b)
    from_a = [s for s in from_a if not s.truncated]
    from_b = [s for s in from_b if not s.truncated]
    hits_b = np.array([s.hit == 0 for s in from_a], dtype=bool)
    tau_a = np.array([s.steps for s in from_a], dtype=float)
    tau_b = np.array([s.steps for s in from_b], dtype=float)
    nan = float("nan")
    if len(tau_a) < 2 or len(tau_b) < 2:  # everything truncated: no test is possible
        return CouplingReport(n_samples, beta, seed, nan, nan, nan, nan, nan, nan, int(trunc), alpha)
    binom = stats.binomtest(int(hits_b.sum()), len(hits_b), 0.5)
    ks = stats.ks_2samp(tau_a, tau_b)
    long = tau_a > np.median(tau_a)
    table = np.array([[np.sum(hits_b & long), np.sum(hits_b & ~long)],
                      [np.sum(~hits_b & long), np.sum(~hits_b & ~long)]])
    chi2, chi2_p, _, _ = stats.chi2_contingency(table)
    return CouplingReport(n_samples, beta, seed, float(hits_b.mean()), float(binom.pvalue),
                          float(ks.statistic), float(ks.pvalue), float(chi2), float(chi2_p),
                          int(trunc), alpha)
