"""Exact analysis of the energy landscape on enumerable grids.

States are stored as a sorted ``uint64`` array of occupancy bitmasks, so
grids are limited to ``N <= 63`` sites (and by default to 30, see
:data:`ENUMERATION_LIMIT`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .config import Configuration, stable_configs
from .lattice import Grid

ENUMERATION_LIMIT = 30
MIXING_ALL_STARTS_LIMIT = 50_000
DENSE_MIXING_LIMIT = 1500


class EnumerationLimitError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg, iterations=None):
        super().__init__(msg)
        self.iterations = iterations


@dataclass(frozen=True)
class LandscapeIndex:
    grid: Grid
    states: np.ndarray = field(repr=False)  # sorted uint64 bitmasks
    energy: np.ndarray = field(repr=False)  # int64, -(particle count)
    moves: sp.csr_matrix = field(repr=False)  # adjacency of the Hamming-1 move graph
    stable: tuple  # state ids of a, b, c

    @property
    def size(self) -> int:
        return len(self.states)

    def id_of(self, sigma) -> int:
        bits = sigma.bits if isinstance(sigma, Configuration) else int(sigma)
        k = int(np.searchsorted(self.states, np.uint64(bits)))
        if k >= len(self.states) or int(self.states[k]) != bits:
            raise KeyError(f"configuration {bits:#x} is not a hard-core state of {self.grid}")
        return k

    def config(self, i: int) -> Configuration:
        return Configuration(self.grid, int(self.states[i]))

    def neighbors(self, i: int) -> np.ndarray:
        return self.moves.indices[self.moves.indptr[i]:self.moves.indptr[i + 1]]


def _independent_sets(grid: Grid) -> list:
    nm = grid.neighbor_masks
    n = grid.N
    out = []

    def rec(v, bits):
        if v == n:
            out.append(bits)
            return
        rec(v + 1, bits)
        if not bits & nm[v]:
            rec(v + 1, bits | (1 << v))

    rec(0, 0)
    return out


def enumerate_states(grid: Grid, limit: int = ENUMERATION_LIMIT) -> LandscapeIndex:
    """Enumerate every hard-core configuration by backtracking over neighbor masks."""
    if grid.N > min(limit, 63):
        raise EnumerationLimitError(
            f"{grid} has {grid.N} sites, above the enumeration limit of {min(limit, 63)}; "
            "use the Monte Carlo commands (simulate, campaign) for this grid")
    states = np.array(sorted(_independent_sets(grid)), dtype=np.uint64)
    counts = np.array([int(s).bit_count() for s in states], dtype=np.int64)
    rows, cols = [], []
    for v in range(grid.N):
        flipped = states ^ np.uint64(1 << v)
        k = np.searchsorted(states, flipped)
        k[k >= len(states)] = 0
        ok = states[k] == flipped
        rows.append(np.nonzero(ok)[0])
        cols.append(k[ok])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    moves = sp.csr_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(len(states),) * 2)
    moves.sort_indices()
    idx = LandscapeIndex(grid, states, -counts, moves, (0, 0, 0))
    stable = tuple(idx.id_of(s) for s in stable_configs(grid))
    return LandscapeIndex(grid, states, -counts, moves, stable)


# -- communication heights ----------------------------------------------------

def _ids(index: LandscapeIndex, items) -> list:
    if isinstance(items, (int, np.integer, Configuration)):
        items = [items]
    return sorted({int(x) if isinstance(x, (int, np.integer)) else index.id_of(x) for x in items})


def phi_to_set(index: LandscapeIndex, target) -> np.ndarray:
    """``Φ(σ, T)`` for every state ``σ`` (``H(σ)`` on ``T`` itself).

    States are activated in increasing energy, one level at a time, and merged
    with active neighbors in a union-find.  When a component first contains a
    target state at level ``h``, all its members get ``Φ = h``.
    """
    tids = _ids(index, target)
    if not tids:
        raise ValueError("target set is empty")
    n = index.size
    E = index.energy
    indptr, indices = index.moves.indptr, index.moves.indices
    parent = np.arange(n)
    active = np.zeros(n, dtype=bool)
    has_t = np.zeros(n, dtype=bool)
    has_t[tids] = True
    members = {}
    phi = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    phi[tids] = E[tids]

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    order = np.argsort(E, kind="stable")
    for s in order:
        s = int(s)
        h = E[s]
        active[s] = True
        if not has_t[s]:
            members[s] = [s]
        for w in indices[indptr[s]:indptr[s + 1]]:
            if not active[w]:
                continue
            ra, rb = find(s), find(int(w))
            if ra == rb:
                continue
            la, lb = members.pop(ra, []), members.pop(rb, [])
            if len(la) < len(lb):
                ra, rb, la, lb = rb, ra, lb, la
            parent[rb] = ra
            if has_t[ra] or has_t[rb]:
                for m in la if not has_t[ra] else lb if not has_t[rb] else ():
                    phi[m] = h
                has_t[ra] = True
            else:
                la.extend(lb)
                members[ra] = la
    if (phi == np.iinfo(np.int64).max).any():
        raise RuntimeError("move graph is disconnected")
    return phi


def comm_height(index: LandscapeIndex, source_set, target_set) -> int:
    """Communication height ``Φ(A, B)`` between disjoint nonempty state sets."""
    a, b = _ids(index, source_set), _ids(index, target_set)
    if not a or not b:
        raise ValueError("source and target sets must be nonempty")
    if set(a) & set(b):
        raise ValueError("source and target sets must be disjoint")
    return int(phi_to_set(index, b)[a].min())


def _depths(index, target) -> np.ndarray:
    d = phi_to_set(index, target) - index.energy
    d[_ids(index, target)] = np.iinfo(np.int64).min
    return d


def condition_absence_deep_cycles(index, start, target) -> bool:
    """``Φ(σ,A) − H(σ)`` equals the maximum of ``Φ(η,A) − H(η)`` over ``η ∉ A``."""
    s = _ids(index, start)[0]
    d = _depths(index, target)
    return bool(d[s] == d.max())


def condition_strict_time_scales(index, start, target) -> bool:
    """``Φ(σ,A) − H(σ)`` exceeds ``Φ(η, A ∪ {σ}) − H(η)`` for every other ``η ∉ A``."""
    s = _ids(index, start)[0]
    tids = _ids(index, target)
    own = int(phi_to_set(index, tids)[s] - index.energy[s])
    rest = _depths(index, tids + [s])
    return bool(own > rest.max()) if len(rest) > len(tids) + 1 else True


@dataclass
class StructureReport:
    grid: tuple
    n_states: int
    gamma_expected: int
    stable_set: list
    phi_pairs: dict
    max_depth_outside: int
    conditions: dict
    clauses: dict

    @property
    def passed(self) -> bool:
        return all(self.clauses.values())

    def to_dict(self) -> dict:
        return {
            "K": self.grid[0], "L": self.grid[1], "n_states": self.n_states,
            "gamma": self.gamma_expected, "stable_set": self.stable_set,
            "phi_pairs": self.phi_pairs, "max_depth_outside": self.max_depth_outside,
            "conditions": self.conditions, "clauses": self.clauses, "passed": self.passed,
        }


def verify_structure(index: LandscapeIndex) -> StructureReport:
    g = index.grid
    gamma = min(g.K, 2 * g.L) + 1
    a, b, c = index.stable
    E = index.energy
    stable = sorted(int(i) for i in np.nonzero(E == E.min())[0])
    phi_b = phi_to_set(index, [b])
    phi_c = phi_to_set(index, [c])
    pairs = {
        "a-b": int(phi_b[a] - E[a]),
        "a-c": int(phi_c[a] - E[a]),
        "b-c": int(phi_c[b] - E[b]),
    }
    depths = _depths(index, [a, b, c])
    max_depth = int(depths.max()) if index.size > 3 else 0
    conds = {
        "PE(a,{b,c})": condition_absence_deep_cycles(index, a, [b, c]),
        "AE(a,{b,c})": condition_strict_time_scales(index, a, [b, c]),
        "PE(a,{b})": condition_absence_deep_cycles(index, a, [b]),
        "AE(a,{b})": condition_strict_time_scales(index, a, [b]),
    }
    clauses = {
        "(i) stable set is {a,b,c}": stable == sorted(index.stable),
        "(ii) pairwise barriers equal min{K,2L}+1": all(v == gamma for v in pairs.values()),
        "(iii) depth outside {a,b,c} <= min{K,2L}": max_depth <= gamma - 1,
        "PE holds for (a,{b,c})": conds["PE(a,{b,c})"],
        "AE holds for (a,{b,c})": conds["AE(a,{b,c})"],
        "PE holds for (a,{b})": conds["PE(a,{b})"],
        "AE fails for (a,{b}) (deep cycle at c)": not conds["AE(a,{b})"],
    }
    return StructureReport((g.K, g.L), index.size, gamma, stable, pairs, max_depth, conds, clauses)


# -- Markov chain linear algebra ---------------------------------------------

def transition_matrix(index: LandscapeIndex, beta: float, offdiagonal_only: bool = False) -> sp.csr_matrix:
    """Sparse ``P_beta``; the diagonal is filled from the off-diagonal row sums."""
    N = index.grid.N
    m = index.moves.tocoo()
    up = index.energy[m.col] < index.energy[m.row]
    vals = np.where(up, 1.0 / N, math.exp(-beta) / N)
    off = sp.csr_matrix((vals, (m.row, m.col)), shape=m.shape)
    if offdiagonal_only:
        return off
    out = np.asarray(off.sum(axis=1)).ravel()
    return (off + sp.diags(1.0 - out)).tocsr()


def gibbs(index: LandscapeIndex, beta: float) -> np.ndarray:
    logw = -beta * index.energy.astype(float)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def _absorbing_system(index, beta, target):
    tids = _ids(index, target)
    keep = np.ones(index.size, dtype=bool)
    keep[tids] = False
    off = transition_matrix(index, beta, offdiagonal_only=True)
    out = np.asarray(off.sum(axis=1)).ravel()
    A = (sp.diags(out) - off)[keep][:, keep].tocsc()
    return A, keep, off, tids


def exact_mean_hitting(index: LandscapeIndex, beta: float, start, target_set) -> float:
    """Expected hitting time of ``target_set`` from ``start`` by a sparse direct solve."""
    s = _ids(index, start)[0]
    A, keep, _, tids = _absorbing_system(index, beta, target_set)
    if s in tids:
        raise ValueError("start belongs to the target set")
    t = spla.spsolve(A, np.ones(A.shape[0]))
    if not np.all(np.isfinite(t)):
        raise ConvergenceError("hitting-time solve produced non-finite values")
    return float(t[np.cumsum(keep)[s] - 1])


def exact_hitting_distribution(index: LandscapeIndex, beta: float, start, target_set) -> np.ndarray:
    """Probability of entering each target state first, ordered like ``target_set``."""
    s = _ids(index, start)[0]
    order = [t if isinstance(t, (int, np.integer)) else index.id_of(t) for t in target_set]
    A, keep, off, tids = _absorbing_system(index, beta, target_set)
    if s in tids:
        raise ValueError("start belongs to the target set")
    R = off[keep][:, order].toarray()
    H = spla.splu(A).solve(R)
    return H[np.cumsum(keep)[s] - 1]


def symmetrized_generator(index: LandscapeIndex, beta: float) -> sp.csr_matrix:
    """``D^{1/2} (I − P) D^{-1/2}`` with ``D = diag(μ_beta)``; symmetric by reversibility."""
    off = transition_matrix(index, beta, offdiagonal_only=True).tocoo()
    E = index.energy.astype(float)
    # sqrt(mu_i / mu_j) = exp(-beta (H_i - H_j) / 2)
    vals = off.data * np.exp(-0.5 * beta * (E[off.row] - E[off.col]))
    S = sp.csr_matrix((vals, (off.row, off.col)), shape=off.shape)
    out = np.asarray(transition_matrix(index, beta, offdiagonal_only=True).sum(axis=1)).ravel()
    return (sp.diags(out) - S).tocsr()


def spectral_gap(index: LandscapeIndex, beta: float, tol: float = 1e-10) -> float:
    """``1 − α_2`` from the two smallest eigenvalues of the symmetrized generator."""
    G = symmetrized_generator(index, beta)
    n = G.shape[0]
    if n <= 16:
        w, V = np.linalg.eigh(G.toarray())
        lam, v = w[1], V[:, 1]
    else:
        # shift-invert around a point just left of 0 resolves gaps far below 1
        shift = -1e-3
        try:
            w, V = spla.eigsh(G.tocsc(), k=2, sigma=shift, which="LM", tol=1e-14, maxiter=10_000)
        except spla.ArpackNoConvergence as err:
            raise ConvergenceError(f"eigensolver did not converge: {err}", iterations=10_000) from err
        k = int(np.argsort(w)[1])
        lam, v = w[k], V[:, k]
    v = v / np.linalg.norm(v)
    resid = float(np.linalg.norm(G @ v - lam * v))
    if resid > tol:
        raise ConvergenceError(f"eigenpair residual {resid:.3e} above {tol:.1e}")
    return float(lam)


@dataclass(frozen=True)
class MixingResult:
    t_mix: int
    truncated: bool
    lower_bound: bool  # computed from a subset of starts only
    tv: float  # worst-case TV distance at t_mix


def _tv(rows: np.ndarray, mu: np.ndarray) -> float:
    return float(0.5 * np.abs(rows - mu).sum(axis=1).max())


def mixing_time(index: LandscapeIndex, beta: float, eps: float, cap: int = 1 << 40) -> MixingResult:
    """Exact ``t_mix(eps)``: smallest ``n`` with worst-start TV distance ``<= eps``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    mu = gibbs(index, beta)
    n = index.size
    if n <= DENSE_MIXING_LIMIT:
        return _mixing_dense(transition_matrix(index, beta).toarray(), mu, eps, cap)
    lower = n > MIXING_ALL_STARTS_LIMIT
    if lower:
        starts = list(index.stable) + [index.id_of(0)]
    else:
        starts = list(range(n))
    PT = transition_matrix(index, beta).T.tocsr()
    M = np.zeros((len(starts), n))
    M[np.arange(len(starts)), starts] = 1.0
    t = 0
    while _tv(M, mu) > eps:
        if t >= cap:
            return MixingResult(t, True, lower, _tv(M, mu))
        M = (PT @ M.T).T
        t += 1
    return MixingResult(t, False, lower, _tv(M, mu))


def _mixing_dense(P, mu, eps, cap):
    if _tv(np.eye(len(mu)), mu) <= eps:
        return MixingResult(0, False, False, _tv(np.eye(len(mu)), mu))
    powers = [P]  # powers[k] = P^(2^k)
    while _tv(powers[-1], mu) > eps:
        if 1 << len(powers) > cap:
            return MixingResult(1 << (len(powers) - 1), True, False, _tv(powers[-1], mu))
        powers.append(powers[-1] @ powers[-1])
    k = len(powers) - 1
    if k == 0:
        return MixingResult(1, False, False, _tv(P, mu))
    # d(n) is nonincreasing: bisect on (2^(k-1), 2^k]
    lo_n, lo_M = 1 << (k - 1), powers[k - 1]
    hi_n, hi_M = 1 << k, powers[k]
    for j in range(k - 2, -1, -1):
        mid_M = lo_M @ powers[j]
        if _tv(mid_M, mu) <= eps:
            hi_n, hi_M = lo_n + (1 << j), mid_M
        else:
            lo_n, lo_M = lo_n + (1 << j), mid_M
    return MixingResult(hi_n, False, False, _tv(hi_M, mu))
