"""The level/class/category tree of segments, tubes and cube covers.

Levels refine the working width by Q**-s_k; within a level, classes count
refinement rounds (at most M_k) and categories record the non-increasing
exponent tuples (j_1 >= ... >= j_m).  Counts grow multiplicatively, so the
ledger is computed with exact rational arithmetic (every length is
2 * Q**j * w_k, so all count formulas reduce to integer powers of Q), while
line materialization is budgeted: complete where affordable, a deterministic
prefix otherwise.  Every displayed count inequality is checked, never
assumed.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .geometry import (
    DirectionNet,
    build_direction_net,
    separated_count,
    vec_add,
    vec_scale,
    vec_sub,
)
from .params import ParamSchedule, ScheduleError


class BudgetExceeded(RuntimeError):
    """Raised when enumeration would materialize more rows than allowed.

    Carries the exact bound-based estimate so callers get the number without
    the enumeration.
    """

    def __init__(self, estimate: int, level: int, policy: str):
        super().__init__(
            f"level {level} with j-policy {policy!r} would create {estimate} lines")
        self.estimate = estimate
        self.level = level
        self.policy = policy


# Line identity --------------------------------------------------------------

def line_id(path: tuple, level: int) -> str:
    """Stable content hash of a construction path at a given level."""
    return hashlib.sha1(f"{level}|{path}".encode()).hexdigest()[:16]


def extend_path(path: tuple, k: int, step: tuple) -> tuple:
    if path and path[-1][0] == k:
        lv, steps = path[-1]
        return path[:-1] + ((k, steps + (step,)),)
    return path + ((k, (step,)),)


@dataclass(frozen=True)
class HLine:
    """One line of the construction tree.

    ``path`` lists, per level, the (j, net index, grid index) steps taken;
    it determines the line completely, and the id hashes (path, level) so a
    class-0 carryover of the same geometry gets a fresh id at each level.
    Coordinates are tuples of floats, or mpmath values on the extended
    precision path.
    """

    level: int
    class_index: int
    category: tuple
    center: tuple
    direction: tuple
    half_length: object
    path: tuple
    parent_id: object
    id: str

    @property
    def length(self):
        return 2 * self.half_length

    def endpoints(self):
        off = vec_scale(self.direction, self.half_length)
        return vec_sub(self.center, off), vec_add(self.center, off)


def root_line(sched: ParamSchedule) -> HLine:
    """The unit segment at the origin along the first coordinate axis."""
    d = sched.d
    e = (1.0,) + (0.0,) * (d - 1)
    return HLine(level=1, class_index=0, category=(), center=(0.0,) * d,
                 direction=e, half_length=0.5, path=(),
                 parent_id=None, id=line_id((), 1))


def carry_line(line: HLine, k: int) -> HLine:
    """Re-tag a level k-1 line as the class-0 line of level k."""
    if k != line.level + 1:
        raise ValueError(f"carryover must advance one level, {line.level} -> {k}")
    return replace(line, level=k, class_index=0, parent_id=line.id,
                   id=line_id(line.path, k))


def grid_anchor(center, direction, half_length, h, count, idx):
    """idx-th point of the maximal h-separated grid along a segment.

    Mirrors geometry.separated_points: uniform steps from one endpoint, the
    final point pinned to the far endpoint.
    """
    if not (0 <= idx < count):
        raise ValueError(f"grid index {idx} outside [0, {count})")
    a = vec_sub(center, vec_scale(direction, half_length))
    if idx == count - 1:
        return vec_add(center, vec_scale(direction, half_length))
    return vec_add(a, vec_scale(direction, idx * h))


def child_line(parent: HLine, k: int, j: int, e_idx: int, direction,
               grid_idx: int, h, half_len, grid_count: int) -> HLine:
    """One refinement step: anchor on the parent, new direction, length 2*Q^j*w_k."""
    if parent.level != k:
        raise ValueError(f"parent is at level {parent.level}, refining at level {k}")
    if parent.class_index >= 1:
        if j > parent.category[-1]:
            raise ValueError(
                f"category monotonicity violated: j={j} after {parent.category}")
        category = parent.category + (j,)
    else:
        category = (j,)
    anchor = grid_anchor(parent.center, parent.direction, parent.half_length,
                         h, grid_count, grid_idx)
    path = extend_path(parent.path, k, (j, e_idx, grid_idx))
    return HLine(level=k, class_index=parent.class_index + 1, category=category,
                 center=anchor, direction=direction, half_length=half_len,
                 path=path, parent_id=parent.id, id=line_id(path, k))


# Enumeration ----------------------------------------------------------------

@dataclass(frozen=True)
class BuildOptions:
    """Knobs for enumeration scale.

    ``net_limit`` keeps only the first members of each direction net;
    ``j_policy`` is one of "auto", "all", "top1", "top2" ("auto" degrades
    from "all" until the exact estimate fits the budget, then falls back to
    prefix materialization); ``budget`` caps materialized rows per level;
    ``prefix_parents`` is how many parents per block get their children
    materialized when a block does not fit.
    """

    net_limit: int = None
    j_policy: str = "auto"
    budget: int = 500_000
    prefix_parents: int = 2
    net_seed: int = 0


TOY_OPTIONS = BuildOptions(net_limit=5, j_policy="auto", budget=500_000)


@lru_cache(maxsize=32)
def get_net(d: int, s: int, seed: int, level: int = 0) -> DirectionNet:
    return build_direction_net(d, s, seed=seed, level=level)


@dataclass(eq=False)
class Block:
    """All lines of one (class, category) group that share a provenance chain.

    ``count`` is the exact number of lines in the full construction of this
    group; ``length_over_w`` is length / w_k as an exact rational.  Rows hold
    the materialized prefix (possibly everything, possibly nothing).
    """

    level: int
    m: int
    category: tuple
    j: int
    length_over_w: Fraction
    count: int
    source: "Block" = None       # class-0 wrapper: the level k-1 block
    parent: "Block" = None       # class m-1 block at the same level
    centers: np.ndarray = None   # (n, d)
    e_idx: np.ndarray = None
    grid_idx: np.ndarray = None
    parent_rows: np.ndarray = None
    complete: bool = False
    grid_count: int = 0          # children per parent line (class >= 1)

    @property
    def key(self):
        return (self.m, self.category)

    @property
    def nrows(self) -> int:
        if self.source is not None:
            return self.source.nrows
        return 0 if self.centers is None else len(self.centers)

    def row_center(self, i: int) -> np.ndarray:
        if self.source is not None:
            return self.source.row_center(i)
        return self.centers[i]

    def cubes_per_line(self) -> int:
        return _ceil_frac(self.length_over_w / 2) + 1


def _ceil_frac(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def _floor_frac(x: Fraction) -> int:
    return x.numerator // x.denominator


@dataclass(frozen=True)
class LedgerRow:
    k: int
    m: int
    category: tuple
    lines: int
    cubes: int
    bound_lines: float
    bound_cubes: float
    pass_lines: bool
    pass_cubes: bool
    complete: bool
    note: str = ""


@dataclass(frozen=True)
class LevelSummary:
    k: int
    s: int
    M: int
    net_size: int
    net_used: int
    j_values: tuple
    lines_total: int
    cubes_total: int
    cube_bound: float         # 2 (M_k+1) |C_{k-1}| (4 s^2 |E|)^M Q^s
    cube_bound_pass: bool
    class0_cubes: int
    class0_bound: float       # 2 |C_{k-1}| Q^s
    class0_pass: bool
    materialized_rows: int
    complete: bool


@dataclass
class LevelState:
    k: int
    sched: ParamSchedule
    options: BuildOptions
    net: DirectionNet
    net_used: int
    j_values: tuple
    w_exp: int
    w_val: float
    blocks: dict = field(default_factory=dict)   # (m, category) -> list[Block]
    rows: list = field(default_factory=list)     # LedgerRow per category
    summary: LevelSummary = None

    def all_blocks(self):
        for group in self.blocks.values():
            yield from group

    @property
    def lines_total(self):
        return sum(b.count for b in self.all_blocks())

    @property
    def cubes_total(self):
        return sum(b.count * b.cubes_per_line() for b in self.all_blocks())

    def line_of(self, block: Block, i: int) -> HLine:
        """Materialize one enumerated row as an HLine (scalar arithmetic)."""
        if block.source is not None:
            src = block.source
            return carry_line(src._owner.line_of(src, i), self.k)
        if block.m == 0 and block.level == 1:
            return root_line(self.sched)
        parent_line = self.line_of(block.parent, int(block.parent_rows[i]))
        h = self.sched.q ** block.j * self.w_val / self.sched.s[self.k - 1]
        half_len = self.sched.q ** block.j * self.w_val
        direction = self.net.member(int(block.e_idx[i]))
        return child_line(parent_line, self.k, block.j, int(block.e_idx[i]),
                          direction, int(block.grid_idx[i]), h, half_len,
                          block.grid_count)

    def sample_rows(self, n: int, seed: int, classes=None):
        """Deterministic sample of materialized (block, row) pairs."""
        rng = np.random.default_rng(seed)
        pool = [b for b in self.all_blocks()
                if b.nrows > 0 and (classes is None or b.m in classes)]
        if not pool:
            return []
        weights = np.array([b.nrows for b in pool], dtype=float)
        weights /= weights.sum()
        out = []
        for _ in range(n):
            b = pool[rng.choice(len(pool), p=weights)]
            out.append((b, int(rng.integers(0, b.nrows))))
        return out


def _fq(q: float) -> Fraction:
    return Fraction(q)


def root_level(sched: ParamSchedule, options: BuildOptions = None) -> LevelState:
    """Level 1: one unit segment, its width-w_1 tube, and its cube cover."""
    options = options or BuildOptions()
    net = get_net(sched.d, sched.s[0], options.net_seed, level=1)
    w_exp = sched.width_exponent(1)
    w_val = sched.q ** -w_exp
    state = LevelState(k=1, sched=sched, options=options, net=net,
                       net_used=min(options.net_limit or net.size, net.size),
                       j_values=(), w_exp=w_exp, w_val=w_val)
    root = Block(level=1, m=0, category=(), j=0,
                 length_over_w=_fq(sched.q) ** w_exp, count=1,
                 centers=np.zeros((1, sched.d)), complete=True)
    root._owner = state
    state.blocks[(0, ())] = [root]
    cubes = root.cubes_per_line()
    state.rows.append(LedgerRow(k=1, m=0, category=(), lines=1, cubes=cubes,
                                bound_lines=1.0, bound_cubes=float("inf"),
                                pass_lines=True, pass_cubes=True, complete=True))
    state.summary = LevelSummary(
        k=1, s=sched.s[0], M=sched.M[0], net_size=net.size, net_used=state.net_used,
        j_values=(), lines_total=1, cubes_total=cubes, cube_bound=float("inf"),
        cube_bound_pass=True, class0_cubes=cubes, class0_bound=float("inf"),
        class0_pass=True, materialized_rows=1, complete=True)
    return state


def _policy_j_values(policy: str, s_k: int):
    if policy == "all":
        return tuple(range(1, s_k + 1))
    if policy == "top2":
        return (s_k - 1, s_k)
    if policy == "top1":
        return (s_k,)
    raise ValueError(f"unknown j policy {policy!r}")


def _build_block_graph(prev: LevelState, state: LevelState, j_values):
    """Counts-only block graph for one level; no rows are materialized here."""
    sched, k = state.sched, state.k
    s_k = sched.s[k - 1]
    fq = _fq(sched.q)
    blocks = {}

    wraps = []
    for src in prev.all_blocks():
        wrap = Block(level=k, m=0, category=(), j=0,
                     length_over_w=src.length_over_w * fq ** s_k,
                     count=src.count, source=src, complete=src.complete)
        wrap._owner = state
        wraps.append(wrap)
    blocks[(0, ())] = wraps

    max_m = sched.M[k - 1]
    for m in range(0, max_m):
        for j in j_values:
            new_cat_groups = {}
            for (pm, pcat), group in list(blocks.items()):
                if pm != m:
                    continue
                if pm >= 1 and j > pcat[-1]:
                    continue
                for pb in group:
                    ratio = pb.length_over_w * s_k / fq ** j
                    if ratio < 1:
                        continue  # parent shorter than the grid spacing
                    g = _floor_frac(ratio) + 1
                    # per-line child bound: grid count <= 2 s_k len / (Q^j w)
                    assert g <= 2 * ratio, "grid count exceeded the displayed bound"
                    cat = pcat + (j,) if pm >= 1 else (j,)
                    nb = Block(level=k, m=m + 1, category=cat, j=j,
                               length_over_w=2 * fq ** j,
                               count=pb.count * g * state.net_used,
                               parent=pb, grid_count=g)
                    nb._owner = state
                    new_cat_groups.setdefault((m + 1, cat), []).append(nb)
            for key, group in new_cat_groups.items():
                blocks.setdefault(key, []).extend(group)
    return blocks


def _materialize_block(state: LevelState, block: Block, budget_left: int) -> int:
    """Fill block rows (children of a parent-row prefix); returns rows created."""
    parent = block.parent
    pav = parent.nrows
    per_parent = block.grid_count * state.net_used
    if pav == 0 or per_parent == 0:
        block.complete = False
        return 0
    want_all = parent.complete and parent.nrows * per_parent <= budget_left
    p_use = pav if want_all else min(pav, state.options.prefix_parents,
                                     max(budget_left // per_parent, 0))
    if p_use == 0:
        block.complete = False
        return 0

    sched, k = state.sched, state.k
    g = block.grid_count
    h = sched.q ** block.j * state.w_val / sched.s[k - 1]
    base = parent.source if parent.source is not None else parent
    pc = _row_centers(base, p_use)
    pd = _row_directions(base, p_use)
    half = _block_half_length(base)
    a = pc - half * pd                                      # near endpoints
    b = pc + half * pd
    steps = np.arange(g, dtype=float) * h                   # i * h, scalar-compatible
    anchors = a[:, None, :] + steps[None, :, None] * pd[:, None, :]
    anchors[:, g - 1, :] = b                                # far endpoint pinned
    n_e = state.net_used
    centers = np.repeat(anchors.reshape(p_use * g, -1), n_e, axis=0)
    block.centers = centers
    block.grid_idx = np.repeat(np.tile(np.arange(g, dtype=np.int64), p_use), n_e)
    block.e_idx = np.tile(np.arange(n_e, dtype=np.int64), p_use * g)
    block.parent_rows = np.repeat(np.arange(p_use, dtype=np.int64), g * n_e)
    block.complete = want_all and parent.complete and p_use == pav
    if block.complete and len(centers) != block.count:
        raise AssertionError(
            f"materialized {len(centers)} rows but the exact count is {block.count}")
    return len(centers)


def _row_centers(block: Block, n: int) -> np.ndarray:
    if block.source is not None:
        return _row_centers(block.source, n)
    return block.centers[:n]


def _row_directions(block: Block, n: int) -> np.ndarray:
    if block.source is not None:
        return _row_directions(block.source, n)
    if block.m == 0 and block.level == 1:
        d = block.centers.shape[1]
        e = np.zeros((n, d))
        e[:, 0] = 1.0
        return e
    members = block._owner.net.members_array()
    return members[block.e_idx[:n]]


def _block_half_length(block: Block) -> float:
    owner = block._owner
    return float(block.length_over_w) / 2 * owner.w_val


def enumerate_level(sched: ParamSchedule, k: int, budget: int = None,
                    prev: LevelState = None, options: BuildOptions = None) -> LevelState:
    """Build level k on top of the enumerated level k-1.

    The returned state carries exact per-category counts, the displayed
    bounds evaluated as exact rationals, and a materialized row prefix per
    block (complete when the level fits the budget).  With an explicit
    j-policy a level over budget raises BudgetExceeded carrying the exact
    estimate; the "auto" policy degrades the j set, then falls back to
    prefix materialization.
    """
    options = options or BuildOptions()
    if budget is None:
        budget = options.budget
    if k == 1:
        return root_level(sched, options)
    if prev is None or prev.k != k - 1:
        raise ScheduleError(f"level {k - 1} must be enumerated before level {k}")
    sched._check_level(k)

    s_k = sched.s[k - 1]
    net = get_net(sched.d, s_k, options.net_seed, level=k)
    net_used = min(options.net_limit or net.size, net.size)
    w_exp = sched.width_exponent(k)
    w_val = sched.q ** -w_exp

    if options.j_policy == "auto":
        policies = ("all", "top2", "top1")
    else:
        policies = (options.j_policy,)

    state = None
    chosen = None
    for policy in policies:
        j_values = _policy_j_values(policy, s_k)
        cand = LevelState(k=k, sched=sched, options=options, net=net,
                          net_used=net_used, j_values=j_values,
                          w_exp=w_exp, w_val=w_val)
        cand.blocks = _build_block_graph(prev, cand, j_values)
        estimate = sum(b.count for b in cand.all_blocks() if b.m >= 1)
        if estimate <= budget:
            state, chosen = cand, policy
            break
        if policy == policies[-1]:
            if options.j_policy != "auto":
                raise BudgetExceeded(estimate, k, policy)
            state, chosen = cand, policy  # prefix materialization below
    assert state is not None

    created = 0
    for m in range(1, sched.M[k - 1] + 1):
        for key in sorted(state.blocks):
            if key[0] != m:
                continue
            for block in state.blocks[key]:
                created += _materialize_block(state, block, budget - created)

    _build_ledger(state, prev)
    return state


def _build_ledger(state: LevelState, prev: LevelState):
    sched, k = state.sched, state.k
    s_k, m_k = sched.s[k - 1], sched.M[k - 1]
    fq = _fq(sched.q)
    c_prev = prev.cubes_total

    by_cat = {}
    for b in state.all_blocks():
        by_cat.setdefault((b.m, b.category), []).append(b)

    class0_cubes = 0
    for (m, cat), group in sorted(by_cat.items()):
        lines = sum(b.count for b in group)
        cubes = sum(b.count * b.cubes_per_line() for b in group)
        complete = all(b.complete for b in group)
        if m == 0:
            class0_cubes = cubes
            bound_cubes = 2 * c_prev * fq ** s_k
            row = LedgerRow(k=k, m=0, category=(), lines=lines, cubes=cubes,
                            bound_lines=float(lines), bound_cubes=float(bound_cubes),
                            pass_lines=True, pass_cubes=cubes <= bound_cubes,
                            complete=complete)
        else:
            j_m = cat[-1]
            bound_lines = c_prev * (4 * s_k * state.net_used) ** m * fq ** (s_k - j_m)
            bound_cubes = 2 * c_prev * (4 * s_k * state.net_used) ** m * fq ** s_k
            note = ""
            if not all(b.length_over_w >= 4 for b in group):
                note = "cover-count bound lacks room at this length/width ratio"
            row = LedgerRow(k=k, m=m, category=cat, lines=lines, cubes=cubes,
                            bound_lines=float(bound_lines), bound_cubes=float(bound_cubes),
                            pass_lines=lines <= bound_lines,
                            pass_cubes=cubes <= bound_cubes,
                            complete=complete, note=note)
        state.rows.append(row)

    cubes_total = state.cubes_total
    cube_bound = 2 * (m_k + 1) * c_prev * (4 * s_k ** 2 * state.net_used) ** m_k * fq ** s_k
    class0_bound = 2 * c_prev * fq ** s_k
    state.summary = LevelSummary(
        k=k, s=s_k, M=m_k, net_size=state.net.size, net_used=state.net_used,
        j_values=state.j_values, lines_total=state.lines_total,
        cubes_total=cubes_total, cube_bound=float(cube_bound),
        cube_bound_pass=cubes_total <= cube_bound,
        class0_cubes=class0_cubes, class0_bound=float(class0_bound),
        class0_pass=class0_cubes <= class0_bound,
        materialized_rows=sum(b.nrows for b in state.all_blocks() if b.m >= 1),
        complete=all(b.complete for b in state.all_blocks()))


def advance_class(state: LevelState, m: int, next_j: int, category: tuple = None):
    """Class m -> m+1 blocks for one j, re-running the displayed checks.

    With a category given, that source must admit next_j (monotonicity) or
    this raises; otherwise all admissible class-m categories advance.
    Returns the new blocks grouped by category.
    """
    sched, k = state.sched, state.k
    s_k = sched.s[k - 1]
    if not (0 <= m < sched.M[k - 1]):
        raise ValueError(f"class {m} cannot advance at level {k} (M_k={sched.M[k - 1]})")
    if not (1 <= next_j <= s_k):
        raise ValueError(f"j={next_j} outside [1, {s_k}]")
    fq = _fq(sched.q)
    sources = []
    for (pm, pcat), group in state.blocks.items():
        if pm != m:
            continue
        if category is not None and pcat != category:
            continue
        if pm >= 1 and next_j > pcat[-1]:
            if category is not None:
                raise ValueError(
                    f"category monotonicity violated: j={next_j} after {pcat}")
            continue
        sources.extend(group)
    if category is not None and not sources:
        raise ValueError(f"no class-{m} sources in category {category}")

    out = {}
    budget_left = state.options.budget
    for pb in sources:
        ratio = pb.length_over_w * s_k / fq ** next_j
        if ratio < 1:
            continue
        g = _floor_frac(ratio) + 1
        cat = pb.category + (next_j,) if m >= 1 else (next_j,)
        nb = Block(level=k, m=m + 1, category=cat, j=next_j,
                   length_over_w=2 * fq ** next_j,
                   count=pb.count * g * state.net_used, parent=pb, grid_count=g)
        nb._owner = state
        _materialize_block(state, nb, budget_left)
        budget_left -= nb.nrows
        state.blocks.setdefault((m + 1, cat), []).append(nb)
        out.setdefault(cat, []).append(nb)
    return out


def refine_lines(sched: ParamSchedule, k: int, line: HLine, j: int, e_idx: int,
                 net: DirectionNet = None, net_limit: int = None) -> list:
    """All children of one line for a given (j, direction) at level k."""
    sched._check_level(k)
    s_k = sched.s[k - 1]
    if not (1 <= j <= s_k):
        raise ValueError(f"j={j} outside [1, {s_k}]")
    if net is None:
        net = get_net(sched.d, s_k, 0, level=k)
    used = min(net_limit or net.size, net.size)
    if not (0 <= e_idx < used):
        raise ValueError(f"net index {e_idx} outside [0, {used})")
    w_val = sched.q ** -sched.width_exponent(k)
    h = sched.q ** j * w_val / s_k
    if line.length < h:
        raise ValueError(
            f"line of length {line.length} is shorter than the grid spacing {h}")
    g = separated_count(line.length, h)
    assert g <= 2 * s_k * line.length / (sched.q ** j * w_val) + 1e-9, \
        "child count exceeded the displayed bound"
    direction = net.member(e_idx)
    half = sched.q ** j * w_val
    return [child_line(line, k, j, e_idx, direction, i, h, half, g)
            for i in range(g)]


def lazy_path(sched: ParamSchedule, directives, options: BuildOptions = None,
              level: int = None) -> HLine:
    """Materialize the single line reached by a root-to-node directive list.

    ``directives`` is a sequence of (level, steps) pairs with strictly
    increasing levels >= 2 and steps = [(j, e_idx, grid_idx), ...]; levels
    not mentioned are class-0 carryovers.  ``level`` carries the line past
    the last directive (class 0 at every deeper level).  Deterministic, and
    consistent with enumeration: the same path yields the same id and
    geometry.
    """
    options = options or BuildOptions()
    directives = sorted((int(k), tuple(tuple(map(int, s)) for s in steps))
                        for k, steps in directives)
    line = root_line(sched)
    if not directives and level is None:
        return line
    target = level if level is not None else directives[-1][0]
    if directives and directives[-1][0] > target:
        raise ValueError(f"directives reach level {directives[-1][0]} beyond target {target}")
    sched._check_level(target)
    per_level = dict(directives)
    for k, steps in per_level.items():
        if k < 2:
            raise ValueError("directives start at level 2")
    for k in range(2, target + 1):
        line = carry_line(line, k)
        steps = per_level.get(k, ())
        if len(steps) > sched.M[k - 1]:
            raise ValueError(f"{len(steps)} steps at level {k} exceed M_k={sched.M[k - 1]}")
        s_k = sched.s[k - 1]
        net = get_net(sched.d, s_k, options.net_seed, level=k)
        used = min(options.net_limit or net.size, net.size)
        w_val = sched.q ** -sched.width_exponent(k)
        for (j, e_idx, grid_idx) in steps:
            if not (1 <= j <= s_k):
                raise ValueError(f"j={j} outside [1, {s_k}]")
            if line.class_index >= 1 and j > line.category[-1]:
                raise ValueError(
                    f"category monotonicity violated: j={j} after {line.category}")
            if not (0 <= e_idx < used):
                raise ValueError(f"net index {e_idx} outside [0, {used})")
            h = sched.q ** j * w_val / s_k
            g = separated_count(line.length, h)
            if not (0 <= grid_idx < g):
                raise ValueError(f"grid index {grid_idx} outside [0, {g})")
            line = child_line(line, k, j, e_idx, net.member(e_idx), grid_idx,
                              h, sched.q ** j * w_val, g)
    return line


def build_levels(sched: ParamSchedule, horizon: int = None,
                 options: BuildOptions = None, budget: int = None):
    """Enumerate levels 1..horizon; returns the list of LevelStates."""
    options = options or BuildOptions()
    horizon = horizon or sched.horizon
    levels = [root_level(sched, options)]
    for k in range(2, horizon + 1):
        levels.append(enumerate_level(sched, k, budget=budget, prev=levels[-1],
                                      options=options))
    return levels


def ledger_csv_rows(levels) -> list:
    """Flat ledger export: (k, m, category, lines, cubes, bound_II, bound_V, pass, ...)."""
    header = ["k", "m", "category", "lines", "cubes", "bound_II", "bound_V",
              "pass", "complete", "note"]
    rows = [header]
    for st in levels:
        for r in st.rows:
            rows.append([r.k, r.m, "|".join(map(str, r.category)), r.lines, r.cubes,
                         r.bound_lines, r.bound_cubes,
                         bool(r.pass_lines and r.pass_cubes), r.complete, r.note])
    return rows


def audit_cover(state: LevelState, n_points: int, seed: int) -> int:
    """Sampled tube-points-in-own-cover audit; returns the failure count."""
    from .geometry import cube_cover, make_segment, cube_contains

    rng = np.random.default_rng(seed)
    pairs = state.sample_rows(max(1, n_points // 50), seed + 1)
    failures = 0
    if not pairs:
        return 0
    per = max(1, n_points // len(pairs))
    for block, i in pairs:
        line = state.line_of(block, i)
        seg = make_segment(tuple(map(float, line.center)),
                           tuple(map(float, line.direction)),
                           float(line.half_length))
        cubes = cube_cover(seg, state.w_val)
        e = np.asarray(seg.direction)
        d = len(e)
        for _ in range(per):
            t = rng.uniform(-seg.half_length, seg.half_length)
            radial = rng.standard_normal(d)
            radial -= np.dot(radial, e) * e
            nr = np.linalg.norm(radial)
            if nr > 1e-12:
                radial = radial / nr * rng.uniform(0, state.w_val)
            p = np.asarray(seg.center) + t * e + radial
            if not any(cube_contains(c, p) for c in cubes):
                failures += 1
    return failures
