"""Metropolis single-site-update dynamics and hitting-time sampling.

One chain step picks a site uniformly.  A vacant site with all neighbors
vacant is occupied; an occupied site is vacated with probability
``exp(-beta)``; every other proposal is a self-loop.  Hitting times count
steps, self-loops included.

The hitting-time loop runs in a compiled kernel when available and falls
back to a pure-Python twin otherwise (set ``HARDHEX_PURE_PYTHON=1`` to force
the fallback).  Both consume the same uniform stream and produce identical
samples.

Randomness: each sample owns a Philox substream keyed by
``SeedSequence(seed, spawn_key=(stream, sample_index))``, so batches are
reproducible for any worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernel_py
from .config import Configuration, is_hardcore

if os.environ.get("HARDHEX_PURE_PYTHON"):
    _advance = _kernel_py.advance
    BACKEND = "python"
else:
    try:
        from ._kernel import advance as _advance
        BACKEND = "cython"
    except ImportError:  # extension not built
        _advance = _kernel_py.advance
        BACKEND = "python"

RNG_ID = (f"numpy-{np.__version__}/Philox4x64/SeedSequence(seed,spawn_key=(stream,sample))"
          "/site=floor(u*N),accept=frac(u*N)")
DEFAULT_CAP = 10 ** 10
_BUF_MIN = 1 << 10
_BUF_MAX = 1 << 16


@dataclass(frozen=True)
class DynamicsParams:
    beta: float
    seed: int = 0

    def __post_init__(self):
        if not self.beta >= 0 or math.isinf(self.beta):
            raise ValueError(f"beta must be a finite nonnegative number, got {self.beta}")

    @property
    def p_remove(self) -> float:
        return math.exp(-self.beta)


@dataclass(frozen=True)
class HittingSample:
    steps: int
    hit: int  # index into the target list, -1 when truncated
    hit_state: str  # hex literal of the entered state ("" when truncated)
    start: str
    truncated: bool = False


def _params(params) -> DynamicsParams:
    return params if isinstance(params, DynamicsParams) else DynamicsParams(float(params))


def step(sigma: Configuration, params, rng: np.random.Generator) -> Configuration:
    """Advance one chain step, self-loops included."""
    p = _params(params)
    g = sigma.grid
    x = rng.random() * g.N
    v = min(int(x), g.N - 1)
    if sigma[v]:
        if x - v < p.p_remove:
            return sigma.flip(v)
        return sigma
    if sigma.bits & g.neighbor_masks[v]:
        return sigma
    return sigma.flip(v)


def transition_prob(sigma: Configuration, sigma2: Configuration, beta: float) -> float:
    """Exact one-step probability ``P_beta(sigma, sigma2)``."""
    g = sigma.grid
    diff = sigma.bits ^ sigma2.bits
    if diff == 0:
        return 1.0 - sum(rate for _, rate in _out_moves(sigma, beta))
    if diff & (diff - 1):
        return 0.0
    if not is_hardcore(g, sigma2.bits):
        return 0.0
    return _rate(sigma2.particles - sigma.particles, beta, g.N)


def _rate(dparticles: int, beta: float, n: int) -> float:
    return 1.0 / n if dparticles > 0 else math.exp(-beta) / n


def _out_moves(sigma: Configuration, beta: float):
    g = sigma.grid
    for v in range(g.N):
        if sigma[v]:
            yield v, math.exp(-beta) / g.N
        elif not sigma.bits & g.neighbor_masks[v]:
            yield v, 1.0 / g.N


# -- hitting times ------------------------------------------------------------

def substream(seed: int, stream: int, sample: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2 ** 64 - 1), spawn_key=(int(stream), int(sample)))
    return np.random.Generator(np.random.Philox(ss))


class Walker:
    """One chain trajectory with its own uniform stream."""

    def __init__(self, start: Configuration, beta: float, rng: np.random.Generator, advance=None):
        g = start.grid
        self.grid = g
        self.p_remove = math.exp(-beta)
        self.occ = np.array([start[v] for v in range(g.N)], dtype=np.uint8)
        self.count = start.particles
        self.rng = rng
        self.buf = np.empty(0)
        self.pos = 0
        self._next = _BUF_MIN
        self.steps = 0
        self._advance = advance or _advance

    def _refill(self):
        self.buf = self.rng.random(self._next)
        self._next = min(2 * self._next, _BUF_MAX)
        self.pos = 0

    def state_bits(self) -> int:
        return int.from_bytes(np.packbits(self.occ, bitorder="little").tobytes(), "little")

    def run(self, targets, cap: int):
        """Run until a target is entered or ``cap`` total steps; returns the target index or -1."""
        g = self.grid
        tmat = np.zeros((len(targets), g.N), dtype=np.uint8)
        for t, cfg in enumerate(targets):
            for v in cfg.occupied():
                tmat[t, v] = 1
        tcounts = np.array([cfg.particles for cfg in targets], dtype=np.int64)
        while self.steps < cap:
            if self.pos >= len(self.buf):
                self._refill()
            self.pos, n, self.count, hit = self._advance(
                self.occ, g.neighbors, self.p_remove, self.buf, self.pos, self.count,
                tmat, tcounts, cap - self.steps)
            self.steps += n
            if hit >= 0:
                return int(hit)
        return -1


def _check_targets(start: Configuration, targets) -> list:
    targets = list(targets)
    if not targets:
        raise ValueError("target set is empty")
    if any(t.bits == start.bits for t in targets):
        raise ValueError("start configuration belongs to the target set")
    return targets


def sample_hitting_time(start: Configuration, target_set, params: DynamicsParams,
                        cap: int = DEFAULT_CAP, stream: int = 0, sample: int = 0) -> HittingSample:
    """Simulate until the chain enters ``target_set``; reproducible from ``(seed, stream, sample)``."""
    targets = _check_targets(start, target_set)
    w = Walker(start, params.beta, substream(params.seed, stream, sample))
    hit = w.run(targets, cap)
    if hit < 0:
        return HittingSample(w.steps, -1, "", start.to_hex(), True)
    return HittingSample(w.steps, hit, targets[hit].to_hex(), start.to_hex())


def _map(fn, n: int, workers: int):
    if workers <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(n)))


def run_batch(start: Configuration, target_set, params: DynamicsParams, n_samples: int,
              worker_count: int = 1, cap: int = DEFAULT_CAP, stream: int = 0) -> list:
    """``n_samples`` independent hitting samples; identical for any ``worker_count``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    targets = _check_targets(start, target_set)
    return _map(lambda i: sample_hitting_time(start, targets, params, cap, stream, i),
                n_samples, worker_count)


@dataclass(frozen=True)
class NestedSample:
    """First entrance into an outer set and, on the same trajectory, into an inner subset."""

    outer_steps: int
    outer_hit: int
    inner_steps: int
    inner_hit: int
    truncated: bool


def sample_nested(start: Configuration, outer, inner, params: DynamicsParams,
                  cap: int = DEFAULT_CAP, stream: int = 0, sample: int = 0) -> NestedSample:
    """Hitting times of ``outer`` and of ``inner ⊆ outer`` along one trajectory.

    ``outer_hit``/``inner_hit`` index into ``outer``/``inner``.
    """
    outer = _check_targets(start, outer)
    inner = _check_targets(start, inner)
    inner_bits = [t.bits for t in inner]
    if not set(inner_bits) <= {t.bits for t in outer}:
        raise ValueError("inner target set must be a subset of the outer one")
    w = Walker(start, params.beta, substream(params.seed, stream, sample))
    h = w.run(outer, cap)
    if h < 0:
        return NestedSample(w.steps, -1, w.steps, -1, True)
    t_out = w.steps
    if outer[h].bits in inner_bits:
        return NestedSample(t_out, h, t_out, inner_bits.index(outer[h].bits), False)
    hi = w.run(inner, cap)
    return NestedSample(t_out, h, w.steps, hi, hi < 0)


def run_nested_batch(start, outer, inner, params, n_samples, worker_count=1,
                     cap=DEFAULT_CAP, stream=0) -> list:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    return _map(lambda i: sample_nested(start, outer, inner, params, cap, stream, i),
                n_samples, worker_count)
