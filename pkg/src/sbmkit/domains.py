"""Catalog of kappa-fat test domains.

Each domain has an exact membership test (compiled, used inside the path
kernels), a signed distance to the boundary, boundary sampling, and the
witness map (Q, r) -> A_r(Q) with B(A_r(Q), kappa r) contained in D and B(Q, r).
"""

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .errors import ParameterError

BALL, BOX, LSHAPE, SLITBALL, TWOBALLS = 0, 1, 2, 3, 4
_KINDS = {"ball": BALL, "box": BOX, "lshape": LSHAPE, "slitball": SLITBALL, "twoballs": TWOBALLS}


@nb.njit(cache=True, inline="always")
def inside(code, p, x):
    """Exact membership of x in the open domain described by (code, p)."""
    d = x.shape[0]
    if code == BALL:
        s = 0.0
        for i in range(d):
            y = x[i] - p[i]
            s += y * y
        return s < p[d] * p[d]
    if code == BOX:
        for i in range(d):
            if not (p[i] < x[i] < p[d + i]):
                return False
        return True
    if code == LSHAPE:
        h = p[0]
        for i in range(d):
            if not (-h < x[i] < h):
                return False
        return not (x[0] >= 0.0 and x[1] >= 0.0)
    if code == SLITBALL:
        s = 0.0
        for i in range(d):
            s += x[i] * x[i]
        if s >= p[0] * p[0]:
            return False
        return not (x[1] == 0.0 and x[0] >= 0.0)
    if code == TWOBALLS:
        s1 = 0.0
        s2 = 0.0
        for i in range(d):
            y1 = x[i] - p[i]
            y2 = x[i] - p[d + 1 + i]
            s1 += y1 * y1
            s2 += y2 * y2
        return s1 < p[d] * p[d] or s2 < p[2 * d + 1] * p[2 * d + 1]
    return False


@dataclass(frozen=True)
class Domain:
    """A bounded kappa-fat open set from the catalog.

    ``geometry`` holds the kind-specific parameters:
      ball:     center (d,), radius
      box:      lo (d,), hi (d,)
      lshape:   half-side s; (-s, s)^d minus {x0 >= 0, x1 >= 0}
      slitball: radius R; B(0, R) minus {x1 = 0, x0 >= 0}
      twoballs: center1, radius1, center2, radius2
    """

    kind: str
    d: int
    geometry: dict
    kappa: float
    R_char: float
    params: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError(f"unknown domain kind {self.kind!r}; expected one of {sorted(_KINDS)}")
        if self.d < 1:
            raise ParameterError("dimension must be positive")
        if self.kind in ("lshape", "slitball") and self.d < 2:
            raise ParameterError(f"{self.kind} needs d >= 2")
        if not 0.0 < self.kappa <= 0.5:
            raise ParameterError(f"kappa must lie in (0, 1/2], got {self.kappa}")
        object.__setattr__(self, "params", self._pack())

    def __hash__(self):
        return hash((self.kind, self.d, tuple(self.params.tolist()), self.kappa, self.R_char))

    def __eq__(self, other):
        return (isinstance(other, Domain) and self.kind == other.kind and self.d == other.d
                and np.array_equal(self.params, other.params))

    @property
    def code(self):
        return _KINDS[self.kind]

    def _pack(self):
        g = self.geometry
        if self.kind == "ball":
            return np.concatenate([np.asarray(g["center"], float), [float(g["radius"])]])
        if self.kind == "box":
            return np.concatenate([np.asarray(g["lo"], float), np.asarray(g["hi"], float)])
        if self.kind == "lshape":
            return np.array([float(g["half_side"])])
        if self.kind == "slitball":
            return np.array([float(g["radius"])])
        return np.concatenate([np.asarray(g["center1"], float), [float(g["radius1"])],
                               np.asarray(g["center2"], float), [float(g["radius2"])]])

    def to_dict(self):
        g = {k: (np.asarray(v).tolist() if np.ndim(v) else v) for k, v in self.geometry.items()}
        return {"kind": self.kind, "d": self.d, "geometry": g, "kappa": self.kappa, "R_char": self.R_char}

    # ----- geometry -----

    def contains(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        out = np.array([inside(self.code, self.params, row) for row in x])
        return out if out.shape[0] > 1 else bool(out[0])

    def distance_to_boundary(self, x):
        """Distance from interior points x (n, d) to the complement."""
        x = np.atleast_2d(np.asarray(x, float))
        g = self.geometry
        if self.kind == "ball":
            return g["radius"] - np.linalg.norm(x - np.asarray(g["center"]), axis=1)
        if self.kind == "box":
            return np.minimum(x - np.asarray(g["lo"]), np.asarray(g["hi"]) - x).min(axis=1)
        if self.kind == "lshape":
            s = g["half_side"]
            dbox = (s - np.abs(x)).min(axis=1)
            # distance to the removed quadrant {x0 >= 0, x1 >= 0}
            dnotch = np.hypot(np.maximum(-x[:, 0], 0.0), np.maximum(-x[:, 1], 0.0))
            return np.minimum(dbox, dnotch)
        if self.kind == "slitball":
            R = g["radius"]
            dball = R - np.linalg.norm(x, axis=1)
            # distance to the slit {x1 = 0, x0 >= 0} within the ball
            proj = x.copy()
            proj[:, 1] = 0.0
            proj[:, 0] = np.maximum(proj[:, 0], 0.0)
            dslit = np.linalg.norm(x - proj, axis=1)
            return np.minimum(dball, dslit)
        c1, r1 = np.asarray(g["center1"]), g["radius1"]
        c2, r2 = np.asarray(g["center2"]), g["radius2"]
        return np.maximum(r1 - np.linalg.norm(x - c1, axis=1), r2 - np.linalg.norm(x - c2, axis=1))

    @property
    def bounding_box(self):
        g = self.geometry
        if self.kind == "ball":
            c = np.asarray(g["center"], float)
            return c - g["radius"], c + g["radius"]
        if self.kind == "box":
            return np.asarray(g["lo"], float), np.asarray(g["hi"], float)
        if self.kind == "lshape":
            s = g["half_side"]
            return np.full(self.d, -s), np.full(self.d, s)
        if self.kind == "slitball":
            return np.full(self.d, -g["radius"]), np.full(self.d, g["radius"])
        c1, c2 = np.asarray(g["center1"], float), np.asarray(g["center2"], float)
        lo = np.minimum(c1 - g["radius1"], c2 - g["radius2"])
        hi = np.maximum(c1 + g["radius1"], c2 + g["radius2"])
        return lo, hi

    @property
    def center(self):
        lo, hi = self.bounding_box
        return 0.5 * (lo + hi)

    @property
    def circumradius(self):
        """Radius of a ball about ``center`` containing the domain."""
        lo, hi = self.bounding_box
        return 0.5 * float(np.linalg.norm(hi - lo))

    @property
    def diameter(self):
        return 2.0 * self.circumradius

    def interior_point(self):
        g = self.geometry
        if self.kind == "ball":
            return np.asarray(g["center"], float)
        if self.kind == "twoballs":
            return np.asarray(g["center1"], float)
        if self.kind == "lshape":
            p = np.zeros(self.d)
            p[0] = p[1] = -0.5 * g["half_side"]
            return p
        if self.kind == "slitball":
            p = np.zeros(self.d)
            p[0] = -0.5 * g["radius"]
            return p
        return self.center

    # ----- boundary points and witnesses -----

    def boundary_point(self, name="default"):
        """A named boundary point used by the verifiers."""
        g = self.geometry
        e = np.zeros(self.d)
        if self.kind == "ball":
            e[0] = 1.0
            return np.asarray(g["center"], float) + g["radius"] * e
        if self.kind == "box":
            q = 0.5 * (np.asarray(g["lo"], float) + np.asarray(g["hi"], float))
            q[0] = g["hi"][0]
            return q
        if self.kind == "lshape":
            if name in ("default", "corner"):
                return e  # re-entrant corner at the origin
            e[0] = -g["half_side"]
            return e
        if self.kind == "slitball":
            if name in ("default", "tip"):
                return e  # tip of the slit
            e[0] = 0.5 * g["radius"]
            return e
        c1 = np.asarray(g["center1"], float)
        c2 = np.asarray(g["center2"], float)
        u = (c2 - c1) / np.linalg.norm(c2 - c1)
        if name == "second":
            return c2 - g["radius2"] * u
        return c1 + g["radius1"] * u  # facing point of the first ball

    def witness(self, Q, r, n_dirs=4096, seed=0):
        """A_r(Q): a point of D within distance r of Q far from the boundary.

        For ball boundaries this is Q moved r/2 along the inner normal; otherwise
        the candidate maximising min(distance to boundary, r - |A - Q|) over
        deterministic random directions and radii is returned.
        """
        Q = np.asarray(Q, float)
        for c, R in self._spheres():
            n = Q - c
            if abs(np.linalg.norm(n) - R) < 1e-12 * max(R, 1.0) and r <= R:
                return Q - 0.5 * r * n / np.linalg.norm(n)
        rng = np.random.default_rng(seed)
        dirs = rng.normal(size=(n_dirs, self.d))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        best, best_val = None, -np.inf
        for frac in np.linspace(0.05, 0.95, 19):
            pts = Q + frac * r * dirs
            ok = np.atleast_1d(self.contains(pts))
            if not ok.any():
                continue
            cand = pts[ok]
            val = np.minimum(self.distance_to_boundary(cand), r - frac * r)
            i = int(np.argmax(val))
            if val[i] > best_val:
                best, best_val = cand[i], val[i]
        if best is None:
            raise ParameterError(f"no interior point within {r} of {Q}")
        return best

    def _spheres(self):
        g = self.geometry
        if self.kind == "ball":
            return [(np.asarray(g["center"], float), g["radius"])]
        if self.kind == "twoballs":
            return [(np.asarray(g["center1"], float), g["radius1"]),
                    (np.asarray(g["center2"], float), g["radius2"])]
        return []

    def verify_fatness(self, Q_list, r_list, n_samples=2000, seed=0):
        """Rejection check that B(A_r(Q), kappa r) lies in D and in B(Q, r)."""
        rng = np.random.default_rng(seed)
        worst = np.inf
        for Q in Q_list:
            for r in r_list:
                A = self.witness(Q, r)
                z = rng.normal(size=(n_samples, self.d))
                z /= np.linalg.norm(z, axis=1)[:, None]
                rad = rng.uniform(size=(n_samples, 1)) ** (1.0 / self.d)
                pts = A + self.kappa * r * rad * z
                ok = np.all(np.atleast_1d(self.contains(pts)))
                ok = ok and np.all(np.linalg.norm(pts - np.asarray(Q), axis=1) < r)
                worst = min(worst, float(np.min(self.distance_to_boundary(A[None])) / r))
                if not ok:
                    return False, worst
        return True, worst


# ---------------------------------------------------------------------------
# catalog constructors


def ball(d, radius=1.0, center=None):
    c = np.zeros(d) if center is None else np.asarray(center, float)
    return Domain("ball", d, {"center": c, "radius": float(radius)}, kappa=0.5, R_char=float(radius))


def box(d, lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    return Domain("box", d, {"lo": lo, "hi": hi}, kappa=0.25, R_char=float(np.min(hi - lo)) / 2)


def lshape(d, half_side=1.0):
    # the tightest spots are the outer box corners, where the largest ball in
    # D n B(Q, r) has radius r/(1 + sqrt(d)); half of that leaves room for the
    # search-based witness
    kappa = 1.0 / (2.0 + 2.0 * math.sqrt(d))
    return Domain("lshape", d, {"half_side": float(half_side)}, kappa=kappa, R_char=float(half_side))


def slitball(d, radius=1.0):
    kappa = 1.0 / (2.0 + 2.0 * math.sqrt(2.0))
    return Domain("slitball", d, {"radius": float(radius)}, kappa=kappa, R_char=float(radius) / 2)


def twoballs(d, radius=0.5, gap=0.5):
    c1 = np.zeros(d)
    c2 = np.zeros(d)
    c1[0] = -(radius + gap / 2)
    c2[0] = radius + gap / 2
    return Domain("twoballs", d, {"center1": c1, "radius1": float(radius),
                                  "center2": c2, "radius2": float(radius)},
                  kappa=0.5, R_char=float(radius))


def make_domain(kind, d, **kw):
    kind = kind.lower()
    if kind == "ball":
        return ball(d, **kw)
    if kind == "box":
        return box(d, kw.get("lo", -np.ones(d)), kw.get("hi", np.ones(d)))
    if kind == "lshape":
        return lshape(d, **kw)
    if kind == "slitball":
        return slitball(d, **kw)
    if kind == "twoballs":
        return twoballs(d, **kw)
    raise ParameterError(f"unknown domain kind {kind!r}; expected one of {sorted(_KINDS)}")
