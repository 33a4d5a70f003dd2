"""Constructive paths: energy reduction by rows and by columns, reference paths.

Both reduction algorithms fill the target component stripe by stripe.  Each
stage alternates "clear the (at most one) blocking particle" with "add a
target particle", so a stage never rises more than one level above its
start, except the column stage that meets a fully occupied trailing column
(it clears two particles before the first addition).
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .config import Configuration, energy, stable_config, detect_bridges, is_hardcore
from .lattice import COLORS, Grid, color_index

# target color -> column shift of the by-columns algorithm; chosen so that the
# required empty columns are c2,c3 (B), c1,c2 (A) and c0,c1 (C)
_COLUMN_SHIFT = {0: -1, 1: 0, 2: -2}


class PreconditionError(ValueError):
    def __init__(self, msg, sites=()):
        super().__init__(msg + (f"; offending sites: {list(sites)}" if sites else ""))
        self.sites = list(sites)


@dataclass
class Stage:
    start: int  # index into Path.states
    end: int
    case: str = ""


@dataclass
class Path:
    states: list
    stages: list = field(default_factory=list)

    @property
    def height(self) -> int:
        return max(energy(s) for s in self.states)

    @property
    def start(self) -> Configuration:
        return self.states[0]

    @property
    def end(self) -> Configuration:
        return self.states[-1]

    def energies(self) -> list:
        return [energy(s) for s in self.states]

    def __len__(self):
        return len(self.states)

    def extend(self, other: "Path") -> "Path":
        if other.states[0].bits != self.states[-1].bits:
            raise ValueError("paths do not join")
        off = len(self.states) - 1
        self.states.extend(other.states[1:])
        self.stages.extend(Stage(s.start + off, s.end + off, s.case) for s in other.stages)
        return self


@dataclass(frozen=True)
class PathReport:
    valid: bool
    index: int = -1
    reason: str = ""


def validate_path(path: Path) -> PathReport:
    """Check hard-core validity and single-site steps; report the first violation."""
    for k, s in enumerate(path.states):
        if not is_hardcore(s.grid, s.bits):
            return PathReport(False, k, "hard-core")
        if k and (s.bits ^ path.states[k - 1].bits).bit_count() > 1:
            return PathReport(False, k, "jump")
    return PathReport(True)


class _Builder:
    def __init__(self, sigma: Configuration):
        self.grid = sigma.grid
        self.bits = sigma.bits
        self.states = [sigma]
        self.stages = []

    def emit(self):
        self.states.append(Configuration(self.grid, self.bits))

    def remove_any(self, sites):
        """Vacate the occupied site among ``sites`` (at most one), or emit a void move."""
        occ = [v for v in sites if (self.bits >> v) & 1]
        assert len(occ) <= 1, "paired sites are neighbors"
        if occ:
            self.bits &= ~(1 << occ[0])
        self.emit()

    def add(self, v):
        if not (self.bits >> v) & 1:
            assert not self.bits & self.grid.neighbor_masks[v], f"site {self.grid.site(v)} is blocked"
            self.bits |= 1 << v
        self.emit()

    def remove(self, v):
        self.bits &= ~(1 << v)
        self.emit()

    def stage(self, start, case=""):
        self.stages.append(Stage(start, len(self.states) - 1, case))

    def path(self) -> Path:
        return Path(self.states, self.stages)


def _offending(sigma, mask):
    return [sigma.grid.site(v) for v in range(sigma.grid.N) if (sigma.bits & mask) >> v & 1]


def reduce_by_rows(sigma: Configuration, target, stripe: int = 0) -> Path:
    """Path from ``sigma`` to the stable configuration of ``target``, row by row.

    Requires ``sigma`` to have no non-target particles in the horizontal
    stripe ``S_stripe``.  Rows are processed starting right below that stripe's
    top row and wrapping around; each of the 2K stages emits 2L moves.
    """
    g = sigma.grid
    x = color_index(target)
    S = g.horizontal_stripe_masks[stripe]
    bad = sigma.bits & S & ~g.component_masks[x]
    if bad:
        raise PreconditionError(
            f"stripe S_{stripe} must hold no particles outside component {COLORS[x]}",
            _offending(sigma, bad))
    b = _Builder(sigma)
    top = 2 * stripe
    for k in range(1, g.spec.rows + 1):
        i = (top + k) % g.spec.rows
        start = len(b.states) - 1
        for v in g.row_sites(i):
            if g.color(v) != x:
                continue
            r, c = g.site(v)
            b.remove_any((g.index(r + 1, c - 1), g.index(r + 1, c + 1)))
            b.add(v)
        b.stage(start)
    return b.path()


def reduce_by_columns(sigma: Configuration, target, shift: int | None = None) -> Path:
    """Path from ``sigma`` to the stable configuration of ``target``, column by column.

    With ``d = shift`` (default: the standard shift of the target color) the
    columns ``c_{2+d}`` and ``c_{3+d}`` must be empty.  Stage ``j = 1..2L``
    fills the target column ``m = c_{3j+1+d}``; it uses case ``"a"`` when the
    trailing column ``c_{m+1}`` is fully occupied and case ``"b"`` otherwise.
    """
    g = sigma.grid
    x = color_index(target)
    d = _COLUMN_SHIFT[x] if shift is None else shift
    if (1 + d - x) % 3:
        raise ValueError(f"shift {d} does not align column c_(1+d) with component {COLORS[x]}")
    need = g.column_masks[(2 + d) % g.spec.cols] | g.column_masks[(3 + d) % g.spec.cols]
    if sigma.bits & need:
        raise PreconditionError(
            f"columns c_{(2 + d) % g.spec.cols} and c_{(3 + d) % g.spec.cols} must be empty",
            _offending(sigma, sigma.bits & need))
    b = _Builder(sigma)
    K = g.K
    for j in range(1, 2 * g.L + 1):
        m = 3 * j + 1 + d
        trailing = g.column_masks[(m + 1) % g.spec.cols]
        start = len(b.states) - 1
        rows_t = [g.site(v)[0] for v in g.column_sites(m + 1)]
        if b.bits & trailing == trailing:
            q = rows_t[0]
            b.remove(g.index(q, m + 1))
            b.remove(g.index(q + 2, m + 1))
            b.add(g.index(q + 1, m))
            for k in range(2, K):
                b.remove(g.index(q + 2 * k, m + 1))
                b.add(g.index(q + 2 * k - 1, m))
            b.add(g.index(q + 2 * K - 1, m))
            b.stage(start, "a")
        else:
            q = next(r for r in rows_t if not (b.bits >> g.index(r, m + 1)) & 1)
            for k in range(K):
                r = q + 1 + 2 * k
                b.remove_any((g.index(r + 1, m + 1), g.index(r, m + 2)))
                b.add(g.index(r, m))
            b.stage(start, "b")
    return b.path()


def relabeling(grid: Grid, src, dst) -> "object":
    """A grid automorphism whose induced map sends ``a -> src`` and ``b -> dst``.

    Searched among compositions of the three axial reflections.
    """
    from .symmetry import induced_color_perm  # noqa: avoid import cycle

    x, y = color_index(src), color_index(dst)
    refl = list(grid.axial_automorphisms())
    cands = [None] + refl + [p.compose(q) for p in refl for q in refl]
    for aut in cands:
        perm = induced_color_perm(aut)
        if perm[0] == x and perm[1] == y:
            return aut
    raise AssertionError("reflections generate all color permutations")


def reference_path(grid: Grid, src="a", dst="b") -> Path:
    """Path between two stable configurations with height ``H + min{K, 2L} + 1``."""
    x, y = color_index(src), color_index(dst)
    if x == y:
        raise ValueError("source and destination must differ")
    path = _reference_ab(grid)
    aut = relabeling(grid, x, y)
    if aut is None:
        return path
    from .symmetry import induced

    return Path([induced(aut, s) for s in path.states], path.stages)


def _reference_ab(grid: Grid) -> Path:
    a = stable_config(grid, 0)
    b = _Builder(a)
    if grid.K <= 2 * grid.L:
        for v in grid.column_sites(3):
            b.remove(v)
        b.stage(0, "empty c3")
        return b.path().extend(reduce_by_columns(b.path().end, 1))
    for v in grid.horizontal_stripe(0):
        if (b.bits >> v) & 1:
            b.remove(v)
    b.stage(0, "empty S0")
    return b.path().extend(reduce_by_rows(b.path().end, 1))


def path_to_stable(sigma: Configuration) -> Path:
    """Path from ``sigma`` to ``{a, b, c}`` of height at most ``H(sigma) + min{K, 2L}``.

    Follows the case split: with ``K <= 2L``, a vertical bridge lets the
    column algorithm run directly; otherwise a vertical stripe with a particle
    deficit is cleared first.  With ``K > 2L``, a horizontal stripe without a
    bridge is cleared and the row algorithm finishes.
    """
    g = sigma.grid
    if any(sigma.bits == m for m in g.component_masks):
        return Path([sigma])
    rep = detect_bridges(sigma)
    b = _Builder(sigma)
    if g.K <= 2 * g.L:
        if rep.full_columns:
            # a vertical bridge means a full column c; columns c+1, c+2 are then empty
            c, col = min(rep.full_columns)
            return reduce_by_columns(sigma, color_index(col), shift=c - 1)
        for j in range(g.spec.cols):
            if (sigma.bits & g.vertical_stripe_masks[j]).bit_count() < g.K:
                break
        x = g.color(g.column_sites(j)[0])
        for v in g.column_sites(j + 1) + g.column_sites(j + 2):
            if (b.bits >> v) & 1:
                b.remove(v)
        b.stage(0, f"clear C_{j}")
        return b.path().extend(reduce_by_columns(b.path().end, x, shift=j - 1))
    for i, m in enumerate(g.horizontal_stripe_masks):
        if (sigma.bits & m).bit_count() < 2 * g.L:
            break
    for v in g.horizontal_stripe(i):
        if (b.bits >> v) & 1:
            b.remove(v)
    b.stage(0, f"clear S_{i}")
    return b.path().extend(reduce_by_rows(b.path().end, 1, stripe=i))
