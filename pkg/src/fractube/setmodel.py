"""Truncated nested-tube sets: witness chains, verification, search, sampling.

A point belongs to the depth-K truncation at parameter lam when, for every
level k <= K, some line of class m_k <= lam * M_k passes within lam * w_k of
it.  A witness chain records one such line per level; verification is pure
geometry plus the class budget and shares no logic with the constructors.
Chains built on the extended-precision path carry mpmath coordinates and are
verified with mpmath arithmetic.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass, replace

import mpmath as mp

from .geometry import line_point_distance, vec_scale, vec_add
from .hierarchy import (
    BuildOptions,
    HLine,
    carry_line,
    child_line,
    get_net,
    lazy_path,
    root_line,
)
from .params import ParamSchedule

DIST_TOL = 1e-12
CLASS_TOL = 1e-12


def _uses_mp(chain) -> bool:
    return any(isinstance(c, mp.mpf) for c in chain.point)


def width_value(sched: ParamSchedule, k: int, use_mp: bool = False):
    e = sched.width_exponent(k)
    if use_mp:
        return mp.power(mp.mpf(sched.q), -e)
    return sched.q ** -e


@dataclass(frozen=True)
class ChainLevel:
    k: int
    line: HLine

    @property
    def m(self) -> int:
        return self.line.class_index


@dataclass(frozen=True)
class WitnessChain:
    point: tuple
    lam: float
    depth: int
    levels: tuple

    def level(self, k: int) -> ChainLevel:
        return self.levels[k - 1]


@dataclass(frozen=True)
class LevelVerdict:
    k: int
    m: int
    class_budget: float
    class_ok: bool
    dist: float
    dist_bound: float
    dist_ok: bool

    @property
    def ok(self):
        return self.class_ok and self.dist_ok


@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    first_fail_level: int
    rows: tuple


class MalformedChain(ValueError):
    pass


def verify_witness(chain: WitnessChain, sched: ParamSchedule) -> VerifyReport:
    """Check every per-level condition of a chain; report the first failure.

    Independent of how the chain was built: only segment distances, widths
    and the class budgets enter.  Distance tolerance is 1e-12 * w_k per
    level.
    """
    if len(chain.levels) != chain.depth:
        raise MalformedChain(
            f"chain has {len(chain.levels)} levels for depth {chain.depth}")
    if chain.depth > sched.horizon:
        raise MalformedChain(f"depth {chain.depth} exceeds horizon {sched.horizon}")
    use_mp = _uses_mp(chain)
    rows = []
    first_fail = 0
    for k in range(1, chain.depth + 1):
        lvl = chain.levels[k - 1]
        if lvl.k != k or lvl.line.level != k:
            raise MalformedChain(f"level {k} entry is tagged {lvl.k}/{lvl.line.level}")
        w_k = width_value(sched, k, use_mp)
        budget = chain.lam * sched.M[k - 1]
        class_ok = lvl.m <= budget + CLASS_TOL
        dist = line_point_distance(chain.point, lvl.line.center,
                                   lvl.line.direction, lvl.line.half_length)
        bound = chain.lam * w_k + DIST_TOL * w_k
        dist_ok = dist <= bound
        rows.append(LevelVerdict(k=k, m=lvl.m, class_budget=float(budget),
                                 class_ok=class_ok, dist=float(dist),
                                 dist_bound=float(bound), dist_ok=dist_ok))
        if not (class_ok and dist_ok) and first_fail == 0:
            first_fail = k
    return VerifyReport(ok=first_fail == 0, first_fail_level=first_fail,
                        rows=tuple(rows))


# Sampling -------------------------------------------------------------------

def qpow(q: float, j: int, use_mp: bool = False):
    """Q**j as float or mpf; mp mode avoids float overflow at large j."""
    if use_mp:
        return mp.power(mp.mpf(q), int(j))
    return q ** j


def _grid_count_scalar(length, h) -> int:
    if isinstance(length, mp.mpf) or isinstance(h, mp.mpf):
        return int(mp.floor((length / h) * (1 + mp.mpf("1e-12")))) + 1
    return int(math.floor((length / h) * (1 + 1e-12))) + 1


def _sample_one_chain(sched, lam, depth, rng, options, use_mp, class0_p,
                      j_cap_frac):
    """Random budget-respecting descent; returns the per-level lines."""
    line = root_line(sched)
    if use_mp:
        line = replace(line, center=tuple(mp.mpf(c) for c in line.center),
                       direction=tuple(mp.mpf(c) for c in line.direction),
                       half_length=mp.mpf(0.5))
    levels = [ChainLevel(1, line)]
    lnq = math.log(sched.q)
    for k in range(2, depth + 1):
        line = carry_line(line, k)
        s_k = sched.s[k - 1]
        m_max = int(math.floor(lam * sched.M[k - 1] + CLASS_TOL))
        m_k = 0
        if m_max >= 1 and rng.random() >= class0_p:
            m_k = rng.randrange(1, m_max + 1)
        if m_k:
            # keep the whole level's reach below j_cap_frac * lam * w_{k-1}
            j_cap = int(math.floor(s_k - math.log(m_k / (j_cap_frac * lam)) / lnq))
            if j_cap < 1:
                m_k = 0
        if m_k:
            net = get_net(sched.d, s_k, options.net_seed, level=k)
            net_used = min(options.net_limit or net.size, net.size)
            w_k = width_value(sched, k, use_mp)
            j_prev = j_cap
            for _ in range(m_k):
                j = rng.randint(1, max(1, j_prev))
                j_prev = j
                h = sched.q ** j * w_k / s_k
                g = _grid_count_scalar(line.length, h)
                gi = rng.randrange(g)
                ei = rng.randrange(net_used)
                direction = net.member(ei)
                if use_mp:
                    direction = tuple(mp.mpf(c) for c in direction)
                line = child_line(line, k, j, ei, direction, gi, h,
                                  sched.q ** j * w_k, g)
        levels.append(ChainLevel(k, line))
    return levels


def sample_points(sched: ParamSchedule, lam: float, depth: int, n: int,
                  seed: int, options: BuildOptions = None, use_mp: bool = False,
                  class0_p: float = 0.5, j_cap_frac: float = 0.6):
    """n verified chains with points uniform along their deepest line.

    Deterministic given the seed.  The descent caps the per-level reach so
    that every produced chain verifies at the requested lam; each chain is
    checked before being returned.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if depth > sched.horizon:
        raise ValueError(f"depth {depth} exceeds horizon {sched.horizon}")
    options = options or BuildOptions()
    out = []
    for i in range(n):
        rng = random.Random(f"{seed}:{i}")
        levels = _sample_one_chain(sched, lam, depth, rng, options, use_mp,
                                   class0_p, j_cap_frac)
        deepest = levels[-1].line
        u = 2 * rng.random() - 1
        t = deepest.half_length * u
        point = vec_add(deepest.center, vec_scale(deepest.direction, t))
        chain = WitnessChain(point=point, lam=lam, depth=depth,
                             levels=tuple(levels))
        report = verify_witness(chain, sched)
        if not report.ok:
            raise AssertionError(
                f"sampled chain failed verification at level {report.first_fail_level}")
        out.append((point, chain))
    return out


# Membership search ----------------------------------------------------------

@dataclass(frozen=True)
class MembershipResult:
    status: str          # "member" | "not-member" | "unknown"
    chain: WitnessChain = None
    fail_level: int = 0
    expansions: int = 0


def membership(x, sched: ParamSchedule, lam: float, depth: int,
               budget: int = 10_000, options: BuildOptions = None) -> MembershipResult:
    """Search for a witness chain for x at truncation depth K.

    Lazy best-first descent over the construction tree, pruned by the
    triangle inequality (a child segment stays within its parent's reach, so
    anchor windows around the projection of x suffice).  "unknown" means the
    node budget ran out, never that x is outside the set; "not-member" is
    only decided at level 1, where the single root line is decisive.
    """
    options = options or BuildOptions()
    if depth > sched.horizon:
        raise ValueError(f"depth {depth} exceeds horizon {sched.horizon}")
    x = tuple(float(c) for c in x)
    root = root_line(sched)
    w1 = width_value(sched, 1)
    d1 = line_point_distance(x, root.center, root.direction, root.half_length)
    if d1 > lam * w1 * (1 + DIST_TOL) + DIST_TOL * w1:
        return MembershipResult(status="not-member", fail_level=1, expansions=1)
    if depth == 1:
        chain = WitnessChain(point=x, lam=lam, depth=1,
                             levels=(ChainLevel(1, root),))
        return MembershipResult(status="member", chain=chain, expansions=1)

    expansions = 0

    def level_candidates(line_prev, k):
        """Lines of level k within lam*w_k of x, lazily, nearest first."""
        nonlocal expansions
        s_k = sched.s[k - 1]
        w_k = width_value(sched, k)
        net = get_net(sched.d, s_k, options.net_seed, level=k)
        net_used = min(options.net_limit or net.size, net.size)
        m_budget = int(math.floor(lam * sched.M[k - 1] + CLASS_TOL))
        base = carry_line(line_prev, k)
        found = []
        heap = []
        counter = 0
        d0 = line_point_distance(x, base.center, base.direction, base.half_length)
        heapq.heappush(heap, (d0, counter, base))
        while heap and expansions < budget:
            dist, _, line = heapq.heappop(heap)
            expansions += 1
            if dist <= lam * w_k * (1 + DIST_TOL) + DIST_TOL * w_k:
                found.append(line)
                yield line
            if line.class_index >= m_budget:
                continue
            j_hi = s_k if line.class_index == 0 else line.category[-1]
            for j in range(1, j_hi + 1):
                h = sched.q ** j * w_k / s_k
                if line.length < h:
                    continue
                g = _grid_count_scalar(line.length, h)
                half = sched.q ** j * w_k
                reach = half + lam * w_k
                t_x = sum((xc - cc) * dc for xc, cc, dc in
                          zip(x, line.center, line.direction))
                lo = max(0, int((t_x + line.half_length - reach) / h) - 1)
                hi = min(g - 1, int((t_x + line.half_length + reach) / h) + 1)
                idxs = set(range(lo, hi + 1))
                idxs.add(g - 1)  # far endpoint is pinned, check it too
                for gi in sorted(idxs):
                    for ei in range(net_used):
                        child = child_line(line, k, j, ei, net.member(ei), gi,
                                           h, half, g)
                        dc = line_point_distance(x, child.center,
                                                 child.direction,
                                                 child.half_length)
                        if dc <= reach * (1 + DIST_TOL):
                            counter += 1
                            heapq.heappush(heap, (dc, counter, child))

    def descend(prefix, k):
        nonlocal expansions
        if k > depth:
            chain = WitnessChain(point=x, lam=lam, depth=depth,
                                 levels=tuple(prefix))
            return chain
        for cand in level_candidates(prefix[-1].line, k):
            res = descend(prefix + [ChainLevel(k, cand)], k + 1)
            if res is not None:
                return res
            if expansions >= budget:
                return None
        return None

    chain = descend([ChainLevel(1, root)], 2)
    if chain is not None:
        report = verify_witness(chain, sched)
        if not report.ok:
            raise AssertionError("search produced a chain that fails verification")
        return MembershipResult(status="member", chain=chain,
                                expansions=expansions)
    return MembershipResult(status="unknown", expansions=expansions)


# Serialization --------------------------------------------------------------

def _num_to_json(v):
    if isinstance(v, mp.mpf):
        sign, man, exp, _ = mp.mpf(v)._mpf_
        return {"mp": [int(sign), str(int(man)), int(exp)]}
    return float(v).hex()


def _num_from_json(v):
    if isinstance(v, dict):
        sign, man, exp = v["mp"]
        val = mp.mpf(int(man)) * mp.power(2, int(exp))
        return -val if sign else val
    return float.fromhex(v)


def chain_to_json(chain: WitnessChain) -> str:
    doc = {
        "point": [_num_to_json(c) for c in chain.point],
        "lambda": chain.lam,
        "K": chain.depth,
        "levels": [
            {"k": lvl.k, "m": lvl.m,
             "path": [[k, [list(s) for s in steps]] for k, steps in lvl.line.path]}
            for lvl in chain.levels
        ],
    }
    return json.dumps(doc, sort_keys=True)


def chain_from_json(text: str, sched: ParamSchedule,
                    options: BuildOptions = None) -> WitnessChain:
    doc = json.loads(text)
    point = tuple(_num_from_json(c) for c in doc["point"])
    use_mp = any(isinstance(c, mp.mpf) for c in point)
    levels = []
    for entry in doc["levels"]:
        line = lazy_path(sched, entry["path"], options=options, level=entry["k"])
        if use_mp:
            line = _line_to_mp(sched, line, options)
        if line.class_index != entry["m"]:
            raise MalformedChain(
                f"level {entry['k']} path rebuilds class {line.class_index}, "
                f"document says {entry['m']}")
        levels.append(ChainLevel(entry["k"], line))
    return WitnessChain(point=point, lam=doc["lambda"], depth=doc["K"],
                        levels=tuple(levels))


def _line_to_mp(sched: ParamSchedule, line: HLine, options) -> HLine:
    """Rebuild a lazily specified line with mpmath coordinates."""
    from .lemmas import rebuild_line_mp

    return rebuild_line_mp(sched, line.path, line.level, options)
