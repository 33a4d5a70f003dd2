"""Hard-core configurations as integer bitmasks over grid sites.

Bit ``v`` of :attr:`Configuration.bits` is the occupancy of site ``v`` in the
grid's row-major order.  Two literal forms round-trip losslessly:

* ASCII: one line per row, one char per site of that row in column order,
  ``'.'`` for vacant and the site's component letter for occupied;
* hex: the bitmask as a fixed-width lowercase hex string.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .lattice import COLORS, Grid, GridError, color_index


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Configuration:
    grid: Grid = field(repr=False)
    bits: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.grid.N:
            raise ConfigError(f"bitmask has bits outside the {self.grid.N} grid sites")

    def __getitem__(self, v: int) -> int:
        return (self.bits >> v) & 1

    def __len__(self):
        return self.grid.N

    @property
    def particles(self) -> int:
        return self.bits.bit_count()

    def occupied(self) -> list:
        return [v for v in range(self.grid.N) if (self.bits >> v) & 1]

    def flip(self, v: int) -> "Configuration":
        return Configuration(self.grid, self.bits ^ (1 << v))

    def with_sites(self, sites, value: int) -> "Configuration":
        m = self.grid.mask_of(sites)
        return Configuration(self.grid, (self.bits | m) if value else (self.bits & ~m))

    def to_hex(self) -> str:
        return to_hex(self)

    def to_ascii(self) -> str:
        return to_ascii(self)


def is_hardcore(grid: Grid, occupancy) -> bool:
    """True iff no two neighboring sites are both occupied."""
    bits = occupancy.bits if isinstance(occupancy, Configuration) else _as_bits(grid, occupancy)
    nm = grid.neighbor_masks
    b = bits
    while b:
        low = b & -b
        v = low.bit_length() - 1
        if bits & nm[v]:
            return False
        b ^= low
    return True


def _as_bits(grid: Grid, occupancy) -> int:
    if isinstance(occupancy, int):
        return occupancy
    occ = list(occupancy)
    if len(occ) != grid.N:
        raise ConfigError(f"occupancy has {len(occ)} entries, grid has {grid.N} sites")
    return sum(1 << v for v, x in enumerate(occ) if x)


def make_config(grid: Grid, occupancy) -> Configuration:
    """Build a hard-core configuration from a bitmask or a 0/1 sequence."""
    bits = _as_bits(grid, occupancy)
    if not is_hardcore(grid, bits):
        raise ConfigError("occupancy violates the hard-core constraint")
    return Configuration(grid, bits)


def empty(grid: Grid) -> Configuration:
    return Configuration(grid, 0)


def stable_config(grid: Grid, color) -> Configuration:
    return Configuration(grid, grid.component_masks[color_index(color)])


def stable_configs(grid: Grid):
    """The three component-indicator configurations ``(a, b, c)``."""
    return tuple(stable_config(grid, x) for x in range(3))


def energy(sigma: Configuration) -> int:
    return -sigma.particles


def delta_H(sigma: Configuration) -> int:
    g = sigma.grid
    return 2 * g.K * g.L - sigma.particles


def delta_H_horizontal(sigma: Configuration, i: int) -> int:
    g = sigma.grid
    if not 0 <= i < g.K:
        raise GridError(f"horizontal stripe index {i} outside [0, {g.K})")
    return 2 * g.L - (sigma.bits & g.horizontal_stripe_masks[i]).bit_count()


def delta_H_vertical(sigma: Configuration, j: int) -> int:
    g = sigma.grid
    if not 0 <= j < g.spec.cols:
        raise GridError(f"vertical stripe index {j} outside [0, {g.spec.cols})")
    return g.K - (sigma.bits & g.vertical_stripe_masks[j]).bit_count()


@dataclass(frozen=True)
class BridgeReport:
    """Bridges of a configuration.

    ``horizontal`` holds ``(i, color)`` for stripes ``S_i``; ``vertical`` holds
    ``(j, color)`` for stripes ``C_j`` agreeing with the stable configuration of
    the color of their middle column ``j+1``; this holds iff column ``j+1`` is
    fully occupied.  Colors are letters ``'A'``, ``'B'``, ``'C'``.
    """

    horizontal: frozenset
    vertical: frozenset
    crosses: frozenset
    full_columns: frozenset  # (column, color) for columns fully occupied
    row_bridges: frozenset  # (row, color) for rows agreeing with a stable config

    def has_vertical(self, color=None) -> bool:
        return any(color is None or c == color for _, c in self.vertical)

    def has_horizontal(self, color=None) -> bool:
        return any(color is None or c == color for _, c in self.horizontal)


def detect_bridges(sigma: Configuration) -> BridgeReport:
    g = sigma.grid
    s = sigma.bits
    comp = g.component_masks
    hor, ver, cols, rows = set(), set(), set(), set()
    for x in range(3):
        for i, m in enumerate(g.horizontal_stripe_masks):
            if s & m == comp[x] & m:
                hor.add((i, COLORS[x]))
        for i, m in enumerate(g.row_masks):
            if s & m == comp[x] & m:
                rows.add((i, COLORS[x]))
    for j, m in enumerate(g.vertical_stripe_masks):
        # a vertical bridge carries the color of the stripe's middle column
        x = (j + 1) % 3
        if s & m == comp[x] & m:
            ver.add((j, COLORS[x]))
    for j, m in enumerate(g.column_masks):
        if s & m == m:
            cols.add((j, COLORS[j % 3]))
    crosses = {c for _, c in hor} & {c for _, c in ver}
    return BridgeReport(frozenset(hor), frozenset(ver), frozenset(crosses),
                        frozenset(cols), frozenset(rows))


def triangle_accounting(sigma: Configuration, kind: str, index: int):
    """Count ``(blocked, free)`` faces inside a stripe.

    A face is blocked when one of its vertices is occupied.  ``kind`` is
    ``"h"`` (stripe ``S_index``) or ``"v"`` (stripe ``C_index``).
    """
    g = sigma.grid
    if kind == "v" and index % 3:
        raise GridError("vertical triangle accounting is defined for stripes C_{3j} only")
    faces = g.stripe_faces(kind, index)
    blocked = sum(1 for f in faces if any((sigma.bits >> v) & 1 for v in f))
    return blocked, len(faces) - blocked


# -- literal formats ----------------------------------------------------------

def to_hex(sigma: Configuration) -> str:
    width = (sigma.grid.N + 3) // 4
    return format(sigma.bits, f"0{width}x")


def from_hex(grid: Grid, text: str) -> Configuration:
    text = text.strip().lower()
    if text.startswith("0x"):
        text = text[2:]
    if len(text) != (grid.N + 3) // 4:
        raise ConfigError(f"hex literal must have {(grid.N + 3) // 4} digits for N={grid.N}")
    try:
        bits = int(text, 16)
    except ValueError:
        raise ConfigError(f"not a hex literal: {text!r}") from None
    if bits >> grid.N:
        raise ConfigError("hex literal sets bits beyond the grid")
    return make_config(grid, bits)


def to_ascii(sigma: Configuration) -> str:
    g = sigma.grid
    lines = []
    for i in range(g.spec.rows):
        lines.append("".join(g.component(v) if sigma[v] else "." for v in g.row_sites(i)))
    return "\n".join(lines)


def from_ascii(grid: Grid, text: str) -> Configuration:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) != grid.spec.rows:
        raise ConfigError(f"expected {grid.spec.rows} rows, got {len(lines)}")
    bits = 0
    for i, line in enumerate(lines):
        line = "".join(line.split())
        row = grid.row_sites(i)
        if len(line) != len(row):
            raise ConfigError(f"row {i}: expected {len(row)} sites, got {len(line)}")
        for v, ch in zip(row, line):
            if ch == ".":
                continue
            if ch.upper() != grid.component(v):
                raise ConfigError(f"row {i}: site {grid.site(v)} belongs to {grid.component(v)}, got {ch!r}")
            bits |= 1 << v
    return make_config(grid, bits)


def parse_config(grid: Grid, text: str) -> Configuration:
    """Parse either literal form; a single token is read as hex."""
    stripped = text.strip()
    if len(stripped.split()) == 1 and "." not in stripped and len(stripped.splitlines()) == 1:
        return from_hex(grid, stripped)
    return from_ascii(grid, stripped)
