"""Geometric primitives: segments, oriented cubes, tubes, direction nets.

Bulk operations (nets, covers, audits) run on numpy arrays.  The scalar
helpers at the bottom accept plain floats or mpmath values so the
path-local machinery can run at extended precision without a second code
path; everything positional in those helpers is exact arithmetic on the
operands handed in.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

log = logging.getLogger(__name__)

REL_TOL = 1e-12


def check_point(p, d=None):
    p = np.asarray(p, dtype=float)
    if d is not None and p.shape != (d,):
        raise ValueError(f"expected a point in R^{d}, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite coordinates")
    return p


def check_direction(e, d=None):
    e = check_point(e, d)
    n = float(np.linalg.norm(e))
    if abs(n - 1.0) > REL_TOL:
        raise ValueError(f"direction has norm {n}, expected 1 within {REL_TOL}")
    return e


@dataclass(frozen=True)
class Segment:
    """Closed segment center + [-a, a] * direction."""

    center: tuple
    direction: tuple
    half_length: float

    def __post_init__(self):
        if not self.half_length > 0:
            raise ValueError(f"half_length must be positive, got {self.half_length}")

    @property
    def length(self):
        return 2 * self.half_length

    def endpoints(self):
        c = np.asarray(self.center, dtype=float)
        e = np.asarray(self.direction, dtype=float)
        a = self.half_length
        return c - a * e, c + a * e

    def point_at(self, t):
        """Point center + t * direction, t in [-a, a] for on-segment points."""
        c = np.asarray(self.center, dtype=float)
        e = np.asarray(self.direction, dtype=float)
        return c + t * e


def make_segment(center, direction, half_length) -> Segment:
    c = check_point(center)
    e = check_direction(direction, len(c))
    return Segment(center=tuple(c), direction=tuple(e), half_length=float(half_length))


def segment_distance(p, seg: Segment) -> float:
    """Euclidean distance from p to the closed segment (clamped projection)."""
    c = np.asarray(seg.center, dtype=float)
    e = np.asarray(seg.direction, dtype=float)
    v = np.asarray(p, dtype=float) - c
    t = float(np.clip(np.dot(v, e), -seg.half_length, seg.half_length))
    return float(np.linalg.norm(v - t * e))


@dataclass(frozen=True)
class Tube:
    """Closed w-neighborhood of a segment."""

    axis: Segment
    width: float

    def contains(self, p) -> bool:
        return segment_distance(p, self.axis) <= self.width * (1 + REL_TOL)


def orthonormal_frame(e) -> np.ndarray:
    """Complete a unit vector e to an orthonormal frame with frame[0] = e.

    Deterministic: Gram-Schmidt against the standard basis, skipping the
    basis vector most parallel to e (lowest index on ties).
    """
    e = check_direction(e)
    d = len(e)
    skip = int(np.argmax(np.abs(e)))
    rows = [e]
    for i in range(d):
        if i == skip:
            continue
        v = np.zeros(d)
        v[i] = 1.0
        for r in rows:
            v = v - np.dot(v, r) * r
        n = np.linalg.norm(v)
        if n < 1e-14:
            raise ValueError("degenerate frame completion")
        rows.append(v / n)
    return np.array(rows)


@dataclass(frozen=True)
class OrientedCube:
    """Closed cube of half-side eps, frame rows orthonormal, frame[0] = axis."""

    center: tuple
    half_width: float
    frame: tuple  # tuple of row tuples

    def frame_array(self):
        return np.asarray(self.frame, dtype=float)


def make_cube(center, half_width, frame) -> OrientedCube:
    frame = np.asarray(frame, dtype=float)
    gram = frame @ frame.T
    if not np.allclose(gram, np.eye(len(frame)), atol=1e-10):
        raise ValueError("cube frame is not orthonormal within 1e-10")
    return OrientedCube(center=tuple(check_point(center)), half_width=float(half_width),
                        frame=tuple(map(tuple, frame)))


def cube_contains(cube: OrientedCube, p) -> bool:
    v = np.asarray(p, dtype=float) - np.asarray(cube.center, dtype=float)
    coords = cube.frame_array() @ v
    bound = cube.half_width * (1 + REL_TOL)
    return bool(np.all(np.abs(coords) <= bound))


def separated_points(seg: Segment, h) -> np.ndarray:
    """Maximal h-separated subset of a segment, as points along it.

    Uniform grid of step h from one endpoint, with the final point placed at
    the far endpoint, so both endpoints are present and every gap lies in
    [h, 2h).  Count is floor(length/h) + 1.
    """
    h = float(h)
    L = seg.length
    if not (0 < h <= L):
        raise ValueError(f"spacing h={h} outside (0, length={L}]")
    m = int(math.floor((L / h) * (1 + REL_TOL)))
    a, b = seg.endpoints()
    e = np.asarray(seg.direction, dtype=float)
    pts = [a + i * h * e for i in range(m)]
    pts.append(b)
    return np.array(pts)


def separated_count(length, h) -> int:
    return int(math.floor((float(length) / float(h)) * (1 + REL_TOL))) + 1


def cube_cover(seg: Segment, w: float):
    """Family of w-cubes centered on the segment covering its w-tube.

    Centers are evenly spaced from endpoint to endpoint with gaps <= 2w, so
    the union of closed cubes contains the closed w-neighborhood of the
    segment.  Count is ceil(length / 2w) + 1.  The strict count bound
    count < length/w only has room when length >= 4w; shorter segments get
    a log note and the honest count.
    """
    w = float(w)
    L = seg.length
    if not (0 < w < L / 2):
        raise ValueError(f"width w={w} outside (0, length/2={L / 2})")
    n = cover_count(L, w)
    a, b = seg.endpoints()
    frame = orthonormal_frame(seg.direction)
    centers = np.linspace(a, b, n)
    if L / (n - 1) > 2 * w * (1 + REL_TOL):  # guarded ceil undershot by one
        n += 1
        centers = np.linspace(a, b, n)
    if not n < L / w:
        log.info("cube cover of a segment with length/width %.3f < 4 uses %d cubes, "
                 "over the strict bound %.3f", L / w, n, L / w)
    return [OrientedCube(center=tuple(c), half_width=w, frame=tuple(map(tuple, frame)))
            for c in centers]


def cover_count(length, w) -> int:
    ratio = float(length) / (2 * float(w))
    return int(math.ceil(ratio * (1 - REL_TOL))) + 1


def strict_count_ok(length, w, count) -> bool:
    """The displayed cover-count inequality count < length/w."""
    return count < float(length) / float(w)


# Direction nets -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DirectionNet:
    """Finite separated subset of the unit sphere with a covering audit.

    members are 1/s-separated pairwise (exact check available) and cover the
    sphere within 1/s.  For d >= 3 maximality is certified against a finite
    candidate pool whose target mesh is recorded; the continuum covering is
    then repaired by seeded rejection sampling and audited directly.
    """

    level: int
    s: int
    members: np.ndarray  # (n, d), read-only
    seed: int
    pool_mesh: float  # 0.0 for the exact planar net

    @property
    def separation(self):
        return 1.0 / self.s

    @property
    def size(self):
        return len(self.members)

    def members_array(self):
        return self.members

    def member(self, i) -> tuple:
        return tuple(float(x) for x in self.members[i])

    def nearest(self, e) -> int:
        """Index of the member closest to unit vector e."""
        return int(np.argmax(self.members @ np.asarray(e, dtype=float)))

    def to_csv_rows(self):
        return [(self.level, i, *map(float, coords)) for i, coords in enumerate(self.members)]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


def circle_net_size(s: int) -> int:
    """Largest count of equally spaced circle points with chord gap >= 1/s."""
    return int(math.floor(math.pi / math.asin(1.0 / (2 * s))))


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n, dtype=float)
    phi = math.pi * (3.0 - math.sqrt(5.0))
    z = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    theta = phi * i
    return np.column_stack([r * np.cos(theta), r * np.sin(theta), z])


def _pool_for(d: int, mesh: float, seed: int) -> np.ndarray:
    if d == 3:
        n = int(math.ceil((2.5 / mesh) ** 2))
        return _fibonacci_sphere(n)
    rng = np.random.default_rng(seed)
    n = int(min(400_000, 40 * (2.0 / mesh) ** (d - 1)))
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def build_direction_net(d: int, s: int, seed: int = 0, level: int = 0) -> DirectionNet:
    """Maximal 1/s-separated direction set on the unit sphere in R^d.

    d == 2: exact uniform angular grid; the member count is the largest n
    with 2*sin(pi/n) >= 1/s, which is simultaneously 1/s-separated and
    maximal (gap midpoints sit strictly closer than 1/s to a member).

    d >= 3: greedy farthest-point insertion over a quasi-uniform candidate
    pool of mesh <= 1/(4s), run until no candidate is 1/s or farther from
    every member, then a seeded repair pass inserts any sampled sphere point
    found beyond 1/s (such a point is itself insertable, so separation is
    preserved).  Determinism: fixed pool order and a seeded sample stream.
    """
    if d < 2:
        raise ValueError(f"need ambient dimension >= 2, got {d}")
    if s < 3:
        raise ValueError(f"need s >= 3, got {s}")
    if d == 2:
        n = circle_net_size(s)
        angles = 2 * math.pi * np.arange(n) / n
        members = np.column_stack([np.cos(angles), np.sin(angles)])
        return DirectionNet(level=level, s=s, members=_freeze(members),
                            seed=seed, pool_mesh=0.0)

    mesh = 1.0 / (4 * s)
    pool = _pool_for(d, mesh, seed)
    sep = 1.0 / s
    members = [pool[0]]
    dist2 = np.sum((pool - pool[0]) ** 2, axis=1)
    while True:
        idx = int(np.argmax(dist2))
        if dist2[idx] < sep * sep:
            break
        members.append(pool[idx])
        dist2 = np.minimum(dist2, np.sum((pool - pool[idx]) ** 2, axis=1))

    # covering repair against the continuum, seeded and deterministic
    rng = np.random.default_rng(seed + 1)
    arr = np.array(members)
    for _ in range(20):
        probes = rng.standard_normal((50_000, d))
        probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        d2 = np.min(
            np.sum((probes[:, None, :] - arr[None, :, :]) ** 2, axis=2), axis=1
        ) if len(arr) * len(probes) <= 5e7 else _chunked_min_dist2(probes, arr)
        bad = probes[d2 > sep * sep]
        if len(bad) == 0:
            break
        for v in bad:
            if np.min(np.sum((arr - v) ** 2, axis=1)) > sep * sep:
                arr = np.vstack([arr, v])

    bound = s ** (2 * d)
    if len(arr) > bound:
        raise RuntimeError(f"net size {len(arr)} exceeds the cardinality bound {bound}")
    return DirectionNet(level=level, s=s, members=_freeze(arr),
                        seed=seed, pool_mesh=mesh)


def _chunked_min_dist2(probes: np.ndarray, arr: np.ndarray) -> np.ndarray:
    out = np.empty(len(probes))
    step = max(1, int(5e7 / max(1, len(arr))))
    for i in range(0, len(probes), step):
        block = probes[i:i + step]
        out[i:i + step] = np.min(
            np.sum((block[:, None, :] - arr[None, :, :]) ** 2, axis=2), axis=1)
    return out


def net_min_pairwise_distance(net: DirectionNet) -> float:
    m = net.members_array()
    n = len(m)
    best = math.inf
    for i in range(n):
        d2 = np.sum((m[i + 1:] - m[i]) ** 2, axis=1)
        if len(d2):
            best = min(best, float(np.min(d2)))
    return math.sqrt(best)


def covering_audit(net: DirectionNet, n_samples: int, seed: int) -> int:
    """Number of sampled unit vectors farther than 1/s from every member."""
    rng = np.random.default_rng(seed)
    m = net.members_array()
    d = m.shape[1]
    failures = 0
    step = 20_000
    remaining = n_samples
    thresh = net.separation * (1 + REL_TOL)
    while remaining > 0:
        take = min(step, remaining)
        probes = rng.standard_normal((take, d))
        probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        # |p - m|^2 = 2 - 2 <p, m>; max dot <-> min distance
        best_dot = _chunked_max_dot(probes, m)
        dmin = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * best_dot))
        failures += int(np.sum(dmin > thresh))
        remaining -= take
    return failures


def _chunked_max_dot(probes: np.ndarray, m: np.ndarray) -> np.ndarray:
    if len(probes) * len(m) <= 5e7:
        return np.max(probes @ m.T, axis=1)
    out = np.empty(len(probes))
    step = max(1, int(5e7 / max(1, len(m))))
    for i in range(0, len(probes), step):
        out[i:i + step] = np.max(probes[i:i + step] @ m.T, axis=1)
    return out


# Scalar helpers (float or mpmath operands) ----------------------------------

def _is_mp(x):
    return isinstance(x, mp.mpf)


def s_sqrt(x):
    return mp.sqrt(x) if _is_mp(x) else math.sqrt(x)


def s_floor(x):
    return int(mp.floor(x)) if _is_mp(x) else int(math.floor(x))


def vec_sub(u, v):
    return tuple(a - b for a, b in zip(u, v))


def vec_add(u, v):
    return tuple(a + b for a, b in zip(u, v))


def vec_scale(u, c):
    return tuple(a * c for a in u)


def vec_dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def vec_norm(u):
    q = vec_dot(u, u)
    return s_sqrt(q)


def vec_dist(u, v):
    return vec_norm(vec_sub(u, v))


def point_on_line(center, direction, t):
    return tuple(c + t * e for c, e in zip(center, direction))


def line_point_distance(p, center, direction, half_length):
    """Distance from p to the closed segment given by scalar components."""
    v = vec_sub(p, center)
    t = vec_dot(v, direction)
    if t > half_length:
        t = half_length
    elif t < -half_length:
        t = -half_length
    return vec_dist(v, vec_scale(direction, t))


def axial_coordinate(p, center, direction):
    return vec_dot(vec_sub(p, center), direction)
