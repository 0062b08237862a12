"""Whitney decomposition of a box minus a closed set F, plus m-set checks.

Cubes are dyadic squares relative to a square bounding box: generation k
splits the box into 4**k squares of side L * 2**-k.  A cube Q with diameter
l is accepted when l <= d(Q, F) <= 4*l.  During the recursion the cube-to-set
distance is bracketed by d(center) -+ l/2 (valid for any 1-Lipschitz distance
function), so acceptance is decided conservatively and the returned cubes
satisfy the band exactly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Box",
    "DyadicCube",
    "WhitneyDecomposition",
    "decompose",
    "count_generation",
    "verify_mset",
    "default_box",
]

_SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class Box:
    """Axis-aligned square [x0, x0+side] x [y0, y0+side]."""

    x0: float
    y0: float
    side: float


def default_box() -> Box:
    """Square covering the cusp domain family, inflated by 25%."""
    # Omega sits in [0,1] x [-1,1]; inflate that 2x2 frame by 25%.
    return Box(-0.75, -1.25, 2.5)


@dataclass(frozen=True)
class DyadicCube:
    k: int
    i: int
    j: int

    def geometry(self, box: Box):
        s = box.side * 2.0 ** (-self.k)
        x0 = box.x0 + self.i * s
        y0 = box.y0 + self.j * s
        return x0, y0, s

    def center(self, box: Box):
        x0, y0, s = self.geometry(box)
        return np.array([x0 + s / 2.0, y0 + s / 2.0])

    def side(self, box: Box) -> float:
        return box.side * 2.0 ** (-self.k)

    def diameter(self, box: Box) -> float:
        return self.side(box) * _SQRT2


@dataclass
class WhitneyDecomposition:
    box: Box
    kmax: int
    cubes: list                      # DyadicCube, sorted by (k, i, j)
    distance_fn: object = field(repr=False, default=None)

    def by_generation(self) -> dict:
        gens: dict[int, list] = {}
        for c in self.cubes:
            gens.setdefault(c.k, []).append(c)
        return gens

    def _index(self):
        if not hasattr(self, "_idx"):
            self._idx = {(c.k, c.i, c.j): c for c in self.cubes}
        return self._idx

    def covers(self, p) -> bool:
        """True if p lies in some accepted cube (closed cubes)."""
        x, y = float(p[0]), float(p[1])
        idx = self._index()
        for k in range(self.kmax + 1):
            s = self.box.side * 2.0 ** (-k)
            i = int(np.floor((x - self.box.x0) / s))
            j = int(np.floor((y - self.box.y0) / s))
            for di in (0, -1):
                for dj in (0, -1):
                    c = idx.get((k, i + di, j + dj))
                    if c is None:
                        continue
                    x0, y0, side = c.geometry(self.box)
                    if x0 <= x <= x0 + side and y0 <= y <= y0 + side:
                        return True
        return False

    def cube_set_distance(self, cube: DyadicCube, n: int = 5) -> float:
        """A posteriori distance estimate: min of d over an n x n cube sample.

        The sample min overestimates the true cube-set distance by at most
        diam/8 for n=5 (half the sample-cell diagonal), which is the safety
        margin used when checking the Whitney band.
        """
        x0, y0, s = cube.geometry(self.box)
        xs = np.linspace(x0, x0 + s, n)
        ys = np.linspace(y0, y0 + s, n)
        X, Y = np.meshgrid(xs, ys)
        pts = np.column_stack([X.ravel(), Y.ravel()])
        return float(np.min(self.distance_fn(pts)))


def decompose(distance_fn, box: Box, kmax: int) -> WhitneyDecomposition:
    """Whitney decomposition of box \\ F where F = {distance_fn == 0}.

    distance_fn must be 1-Lipschitz, vanish exactly on F and accept an
    (n, 2) array of points.  Cubes still touching F at generation kmax are
    discarded (never accepted), preserving the lower bound of the band.
    """
    if kmax < 2:
        raise ValueError("kmax must be >= 2")

    accepted: list[DyadicCube] = []
    active = np.array([[0, 0]], dtype=np.int64)
    for k in range(kmax + 1):
        if len(active) == 0:
            break
        s = box.side * 2.0 ** (-k)
        ell = s * _SQRT2
        centers = np.column_stack(
            [box.x0 + (active[:, 0] + 0.5) * s, box.y0 + (active[:, 1] + 0.5) * s]
        )
        d = np.asarray(distance_fn(centers), dtype=float)
        # d(Q,F) in [d_center - l/2, d_center + l/2]; accept when the
        # bracket certifies l <= d(Q,F) <= 4l.
        accept = (d >= 1.5 * ell) & (d <= 3.5 * ell)
        # cubes certified farther than 4l can never yield accepted children
        # (children need d <= 1.75*l but inherit d >= d_parent - l/4)
        hopeless = d - 0.5 * ell > 4.0 * ell
        for i, j in active[accept]:
            accepted.append(DyadicCube(k, int(i), int(j)))
        if k == kmax:
            break
        todo = active[~accept & ~hopeless]
        if len(todo) == 0:
            active = np.empty((0, 2), dtype=np.int64)
            continue
        base = todo * 2
        active = np.concatenate(
            [base + off for off in np.array([[0, 0], [1, 0], [0, 1], [1, 1]])]
        )
    if not accepted:
        raise RuntimeError("kmax too small: no cube was accepted")
    accepted.sort(key=lambda c: (c.k, c.i, c.j))
    return WhitneyDecomposition(box, kmax, accepted, distance_fn)


def count_generation(dec: WhitneyDecomposition, center, R: float, k: int) -> int:
    """Number of generation-k cubes entirely contained in B(center, R)."""
    if k > dec.kmax:
        raise ValueError("k exceeds kmax of the decomposition")
    if R <= 0.0:
        raise ValueError("R must be positive")
    cx, cy = float(center[0]), float(center[1])
    n = 0
    for c in dec.cubes:
        if c.k != k:
            continue
        x0, y0, s = c.geometry(dec.box)
        # farthest corner from the ball center
        fx = max(abs(cx - x0), abs(cx - (x0 + s)))
        fy = max(abs(cy - y0), abs(cy - (y0 + s)))
        if np.hypot(fx, fy) <= R:
            n += 1
    return n


def generation_count_slope(dec, center, R, k_lo, k_hi):
    """Least-squares slope of log2 N_k against k over [k_lo, k_hi].

    Generations with zero count are skipped; for a 1-set the slope is near 1
    (cube count doubles per generation).
    """
    ks, logs = [], []
    for k in range(k_lo, k_hi + 1):
        n = count_generation(dec, center, R, k)
        if n > 0:
            ks.append(k)
            logs.append(np.log2(n))
    if len(ks) < 3:
        raise RuntimeError("not enough populated generations for a slope fit")
    slope = np.polyfit(ks, logs, 1)[0]
    return float(slope)


def verify_mset(boundary_measure_fn, centers, radii):
    """Estimate the m-set constants of F from ball-intersection measures.

    boundary_measure_fn(center, r) must return H^m(B(center, r) & F); here
    m = 1 so ratios measure/r are formed.  Returns a dict with the extreme
    ratios, the fitted slope of log measure vs log r (averaged over centers)
    and an ok flag (False when any measure degenerates to zero).
    """
    centers = list(centers)
    radii = np.asarray(list(radii), dtype=float)
    if len(centers) == 0 or len(radii) == 0:
        raise ValueError("centers and radii must be nonempty")

    ratios = []
    slopes = []
    degenerate = False
    for c in centers:
        measures = np.array([boundary_measure_fn(c, r) for r in radii])
        if np.any(measures <= 0.0):
            degenerate = True
            continue
        ratios.extend(measures / radii)
        if len(radii) >= 2:
            slopes.append(np.polyfit(np.log(radii), np.log(measures), 1)[0])
    if degenerate or not ratios:
        return {"Clow": 0.0, "Chigh": 0.0, "m_fit": float("nan"), "ok": False}
    return {
        "Clow": float(np.min(ratios)),
        "Chigh": float(np.max(ratios)),
        "m_fit": float(np.mean(slopes)),
        "ok": True,
    }


def save_decomposition(dec: WhitneyDecomposition, path_or_buf) -> None:
    """Text export: one `k i j` line per cube, sorted lexicographically."""
    buf = io.StringIO()
    buf.write(f"# cuspdiv whitney box=({dec.box.x0!r},{dec.box.y0!r},"
              f"{dec.box.side!r}) kmax={dec.kmax}\n")
    for c in sorted(dec.cubes, key=lambda c: (c.k, c.i, c.j)):
        buf.write(f"{c.k} {c.i} {c.j}\n")
    text = buf.getvalue()
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w") as fh:
            fh.write(text)
