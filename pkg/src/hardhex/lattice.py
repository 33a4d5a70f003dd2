"""Triangular 2K x 3L grid with periodic boundaries.

Sites are addressed row-first as ``(row, col)`` with ``row`` in ``[0, 2K)``
and ``col`` in ``[0, 6L)``; a pair is a site iff ``row ≡ col (mod 2)``, so row
0 holds the even columns.  Sites are indexed row-major, which fixes the bit
order used by every configuration bitmask in the package.

Neighbors of ``(i, j)`` are ``(i, j±2)`` and ``(i±1, j±1)``.  The component
(color) of a site is ``col mod 3``: 0 -> A, 1 -> B, 2 -> C.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

COLORS = ("A", "B", "C")
NEIGHBOR_OFFSETS = ((0, -2), (0, 2), (-1, -1), (-1, 1), (1, -1), (1, 1))

# Reflection j -> s - j (mod 6L).  s must be even to keep row parity and
# s mod 3 picks which pair of colors gets swapped.
_AXIS = {"ab": 4, "ac": 2, "bc": 0}


class GridError(ValueError):
    """Invalid grid dimensions or out-of-range site."""


@dataclass(frozen=True)
class GridSpec:
    K: int
    L: int

    def __post_init__(self):
        if not (isinstance(self.K, (int, np.integer)) and isinstance(self.L, (int, np.integer))):
            raise GridError(f"K and L must be integers, got K={self.K!r}, L={self.L!r}")
        if self.K < 2 or self.L < 1:
            raise GridError(f"need K >= 2 and L >= 1, got K={self.K}, L={self.L}")

    @property
    def rows(self) -> int:
        return 2 * self.K

    @property
    def cols(self) -> int:
        return 6 * self.L

    @property
    def n_sites(self) -> int:
        return 6 * self.K * self.L


def color_index(color) -> int:
    """Map ``'a'``/``'A'``/0 etc. to 0, 1 or 2."""
    if isinstance(color, (int, np.integer)):
        if 0 <= color < 3:
            return int(color)
    elif isinstance(color, str) and color.upper() in COLORS:
        return COLORS.index(color.upper())
    raise GridError(f"unknown component {color!r}")


@dataclass(frozen=True)
class Automorphism:
    """Site permutation of a grid; ``perm[v]`` is the image of site ``v``."""

    kind: str
    perm: np.ndarray = field(repr=False, compare=False)
    color_map: tuple  # color_map[x] = color of the image of a color-x site

    def __call__(self, site: int) -> int:
        return int(self.perm[site])

    def compose(self, other: "Automorphism") -> "Automorphism":
        """Return ``self ∘ other`` (apply ``other`` first)."""
        perm = self.perm[other.perm]
        cmap = tuple(self.color_map[other.color_map[x]] for x in range(3))
        return Automorphism(f"{self.kind}∘{other.kind}", perm, cmap)

    def inverse(self) -> "Automorphism":
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(len(self.perm))
        cmap = [0, 0, 0]
        for x in range(3):
            cmap[self.color_map[x]] = x
        return Automorphism(f"{self.kind}^-1", inv, tuple(cmap))


class Grid:
    """Immutable triangular torus built from a :class:`GridSpec`."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        K2, C = spec.rows, spec.cols
        self.sites = [(i, j) for i in range(K2) for j in range(C) if (i - j) % 2 == 0]
        self._index = {s: k for k, s in enumerate(self.sites)}
        nbrs = np.empty((len(self.sites), 6), dtype=np.int32)
        for k, (i, j) in enumerate(self.sites):
            for m, (di, dj) in enumerate(NEIGHBOR_OFFSETS):
                nbrs[k, m] = self._index[((i + di) % K2, (j + dj) % C)]
        nbrs.setflags(write=False)
        self.neighbors = nbrs

    # -- basic geometry -------------------------------------------------
    @property
    def K(self) -> int:
        return self.spec.K

    @property
    def L(self) -> int:
        return self.spec.L

    @property
    def N(self) -> int:
        return len(self.sites)

    def __repr__(self):
        return f"Grid(K={self.K}, L={self.L})"

    def __eq__(self, other):
        return isinstance(other, Grid) and other.spec == self.spec

    def __hash__(self):
        return hash(self.spec)

    def index(self, row: int, col: int) -> int:
        """Site index of ``(row, col)``; coordinates wrap periodically."""
        row %= self.spec.rows
        col %= self.spec.cols
        try:
            return self._index[(row, col)]
        except KeyError:
            raise GridError(f"({row}, {col}) is not a site: row and column parity differ") from None

    def site(self, v: int) -> tuple:
        return self.sites[v]

    def component(self, v: int) -> str:
        return COLORS[self.sites[v][1] % 3]

    def color(self, v: int) -> int:
        return self.sites[v][1] % 3

    @cached_property
    def edges(self) -> list:
        out = set()
        for u in range(self.N):
            for w in self.neighbors[u]:
                out.add((min(u, int(w)), max(u, int(w))))
        return sorted(out)

    @cached_property
    def faces(self) -> list:
        """All triangular faces as sorted index triples."""
        out = set()
        for (i, j) in self.sites:
            for di in (-1, 1):
                tri = (self.index(i, j), self.index(i, j + 2), self.index(i + di, j + 1))
                out.add(tuple(sorted(tri)))
        return sorted(out)

    # -- bitmasks -------------------------------------------------------
    def mask_of(self, sites) -> int:
        m = 0
        for v in sites:
            m |= 1 << int(v)
        return m

    @cached_property
    def full_mask(self) -> int:
        return (1 << self.N) - 1

    @cached_property
    def neighbor_masks(self) -> tuple:
        return tuple(self.mask_of(self.neighbors[v]) for v in range(self.N))

    @cached_property
    def component_masks(self) -> tuple:
        return tuple(self.mask_of(v for v in range(self.N) if self.color(v) == x) for x in range(3))

    @cached_property
    def row_masks(self) -> tuple:
        return tuple(self.mask_of(self.row_sites(i)) for i in range(self.spec.rows))

    @cached_property
    def column_masks(self) -> tuple:
        return tuple(self.mask_of(self.column_sites(j)) for j in range(self.spec.cols))

    def row_sites(self, i: int) -> list:
        i %= self.spec.rows
        return [self._index[(i, j)] for j in range(i % 2, self.spec.cols, 2)]

    def column_sites(self, j: int) -> list:
        j %= self.spec.cols
        return [self._index[(i, j)] for i in range(j % 2, self.spec.rows, 2)]

    # -- stripes --------------------------------------------------------
    def horizontal_stripe(self, i: int) -> list:
        """Sites of ``S_i = r_{2i} ∪ r_{2i+1}``."""
        if not 0 <= i < self.K:
            raise GridError(f"horizontal stripe index {i} outside [0, {self.K})")
        return sorted(self.row_sites(2 * i) + self.row_sites(2 * i + 1))

    def vertical_stripe(self, j: int) -> list:
        """Sites of ``C_j = c_j ∪ c_{j+1} ∪ c_{j+2}`` (columns mod 6L)."""
        if not 0 <= j < self.spec.cols:
            raise GridError(f"vertical stripe index {j} outside [0, {self.spec.cols})")
        return sorted(self.column_sites(j) + self.column_sites(j + 1) + self.column_sites(j + 2))

    @cached_property
    def horizontal_stripe_masks(self) -> tuple:
        return tuple(self.mask_of(self.horizontal_stripe(i)) for i in range(self.K))

    @cached_property
    def vertical_stripe_masks(self) -> tuple:
        return tuple(self.mask_of(self.vertical_stripe(j)) for j in range(self.spec.cols))

    def stripes(self):
        """``(horizontal, vertical)`` lists of site lists: K stripes ``S_i`` and 6L stripes ``C_j``."""
        return ([self.horizontal_stripe(i) for i in range(self.K)],
                [self.vertical_stripe(j) for j in range(self.spec.cols)])

    def stripe_faces(self, kind: str, index: int) -> list:
        """Faces whose three vertices all lie in the given stripe.

        ``kind`` is ``"h"`` for ``S_index`` or ``"v"`` for ``C_index``.
        """
        members = set(self._stripe(kind, index))
        return [f for f in self.faces if all(v in members for v in f)]

    def _stripe(self, kind: str, index: int) -> list:
        if kind == "h":
            return self.horizontal_stripe(index)
        if kind == "v":
            return self.vertical_stripe(index)
        raise GridError(f"stripe kind must be 'h' or 'v', got {kind!r}")

    # -- symmetries -----------------------------------------------------
    def reflection(self, kind: str) -> Automorphism:
        s = _AXIS[kind]
        C = self.spec.cols
        perm = np.array([self.index(i, (s - j) % C) for (i, j) in self.sites], dtype=np.int64)
        cmap = tuple((s - x) % 3 for x in range(3))
        return Automorphism(f"xi_{kind}", perm, cmap)

    def axial_automorphisms(self):
        """The reflections ``(ξ_ab, ξ_ac, ξ_bc)``."""
        return tuple(self.reflection(k) for k in ("ab", "ac", "bc"))

    def translation(self, drow: int, dcol: int) -> Automorphism:
        if (drow - dcol) % 2:
            raise GridError("translation must shift rows and columns by equal parity")
        perm = np.array([self.index(i + drow, j + dcol) for (i, j) in self.sites], dtype=np.int64)
        cmap = tuple((x + dcol) % 3 for x in range(3))
        return Automorphism(f"shift({drow},{dcol})", perm, cmap)

    # -- export ---------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "L": self.L,
            "N": self.N,
            "sites": [list(s) for s in self.sites],
            "components": [self.component(v) for v in range(self.N)],
            "edges": [list(e) for e in self.edges],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


_CACHE: dict = {}


def build_grid(spec) -> Grid:
    """Build (or fetch a cached) grid; ``spec`` may be a :class:`GridSpec` or a ``(K, L)`` pair."""
    if not isinstance(spec, GridSpec):
        spec = GridSpec(*spec)
    g = _CACHE.get(spec)
    if g is None:
        g = _CACHE[spec] = Grid(spec)
    return g


def component(grid: Grid, site) -> str:
    """Component letter of a site given as index or ``(row, col)``."""
    v = grid.index(*site) if isinstance(site, tuple) else site
    return grid.component(v)
