"""Quasi-static whisker mechanics oracle.

The whisker is discretized as n rigid inextensible segments joined by
torsional springs (EI per unit length; the base joint adds the compliant
mount stiffness in series). Equilibrium against a convex obstacle is found
by damped Newton iteration on the segment angles with a single active
unilateral contact constraint, which matches the at-most-one-contact-point
assumption of the tracking problem. Contact is frictionless, so the contact
force acts along the obstacle surface normal.

The oracle produces ground-truth contact points and base bending moments for
synthetic calibration grids and tracking trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import ContactState, Pose2, rot2

DEFAULT_SEGMENTS = 100
PIN_RADIUS = 2.0e-4  # matches a 0.4 mm dowel pin

# Newton tolerances: residual joint torque (N*m) and constraint gap (m)
_TORQUE_TOL = 1.0e-10
_GAP_TOL = 1.0e-10
# Relaxed acceptance for iterates stalled where the contact point crosses a
# mesh node: the discrete rod has a kink there and the contact normal is only
# determined within the kink's normal cone, so the KKT residual bottoms out
# near the kink-angle scale. Positional error stays well under 1 um.
_TORQUE_TOL_RELAXED = 5.0e-7
_GAP_TOL_RELAXED = 5.0e-6
_MAX_NEWTON = 80


class ConvergenceError(RuntimeError):
    """Equilibrium solve failed; carries the final residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class ContactAmbiguityError(RuntimeError):
    """The rest shape intersects the contour in more than one place."""


@dataclass(frozen=True)
class WhiskerSpec:
    """Geometry and stiffness of a straight or curved whisker.

    arc_radius is math.inf for a straight whisker. Curved whiskers curl
    counter-clockwise: the rest shape is a circular arc whose center sits at
    (0, arc_radius) in the base frame.
    """

    diameter: float
    arc_length: float
    arc_radius: float = math.inf
    elastic_modulus: float = 75.0e9
    base_stiffness: float = 1.7e-4

    def __post_init__(self):
        if self.diameter <= 0:
            raise ValueError("diameter must be positive")
        if self.arc_length <= 0:
            raise ValueError("arc_length must be positive")
        if self.arc_radius <= self.diameter:
            raise ValueError("arc_radius must exceed the diameter")
        if self.base_stiffness <= 0:
            raise ValueError("base_stiffness must be positive")

    @property
    def is_straight(self) -> bool:
        return math.isinf(self.arc_radius)

    @property
    def curvature(self) -> float:
        return 0.0 if self.is_straight else 1.0 / self.arc_radius

    @property
    def second_moment(self) -> float:
        return math.pi * self.diameter**4 / 64.0

    @property
    def bending_stiffness(self) -> float:
        """EI in N*m^2."""
        return self.elastic_modulus * self.second_moment


STRAIGHT_WHISKER = WhiskerSpec(diameter=2.0e-4, arc_length=0.055)
CURVED_WHISKER = WhiskerSpec(diameter=2.0e-4, arc_length=0.060, arc_radius=0.020)


@dataclass
class RodState:
    """Deformed whisker shape: node positions (n+1, 2) and segment angles (n,)."""

    nodes: np.ndarray
    angles: np.ndarray


@dataclass
class EquilibriumResult:
    in_contact: bool
    contact: ContactState | None
    moment: float
    rod: RodState
    force: np.ndarray = field(default_factory=lambda: np.zeros(2))
    contact_arc_pos: float = math.nan
    lam: float = 0.0
    residual: float = 0.0
    segment: int = -1
    seg_param: float = 0.0


# ---------------------------------------------------------------------------
# contours
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class PointPin:
    """A thin calibration pin, modelled as a small circle."""

    position: tuple[float, float]
    radius: float = PIN_RADIUS


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon with CCW vertices, shape (m, 2).

    Corners carry a small fillet radius (real prisms are not knife-edged);
    the polygon is treated as the Minkowski sum of an inset core and a disc
    of that radius, which keeps the contact distance field C1 at corners.
    """

    vertices: tuple[tuple[float, float], ...]
    corner_radius: float = 1.5e-4

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.shape[0] < 3:
            raise ValueError("polygon needs at least 3 vertices")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.any(cross <= 0):
            raise ValueError("vertices must be strictly convex and CCW")
        if self.corner_radius <= 0:
            raise ValueError("corner_radius must be positive")
        core = self.core
        ce = np.roll(core, -1, axis=0) - core
        ccross = ce[:, 0] * np.roll(ce, -1, axis=0)[:, 1] - ce[:, 1] * np.roll(ce, -1, axis=0)[:, 0]
        if np.any(ccross <= 0):
            raise ValueError("corner_radius too large for this polygon")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @property
    def core(self) -> np.ndarray:
        """Vertices of the polygon inset by corner_radius."""
        v = self.array
        m = v.shape[0]
        e = np.roll(v, -1, axis=0) - v
        n = np.stack([e[:, 1], -e[:, 0]], axis=1)
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        core = np.empty_like(v)
        rho = self.corner_radius
        for i in range(m):
            n0, n1 = n[i - 1], n[i]
            A = np.stack([n0, n1])
            b = np.array([n0 @ v[i] - rho, n1 @ v[i] - rho])
            core[i] = np.linalg.solve(A, b)
        return core


def rectangle(center, width, height, angle=0.0) -> ConvexPolygon:
    """Axis-aligned w x h rectangle rotated by angle about its center."""
    hw, hh = width / 2.0, height / 2.0
    corners = np.array([[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]])
    R = rot2(angle)
    pts = corners @ R.T + np.asarray(center, dtype=float)
    return ConvexPolygon(tuple(map(tuple, pts)))


def regular_polygon(center, n_sides, side_length, angle=0.0) -> ConvexPolygon:
    """Regular n-gon given its side length."""
    circumradius = side_length / (2.0 * math.sin(math.pi / n_sides))
    th = angle + 2.0 * math.pi * np.arange(n_sides) / n_sides
    pts = np.stack([np.cos(th), np.sin(th)], axis=1) * circumradius + np.asarray(center, float)
    return ConvexPolygon(tuple(map(tuple, pts)))


def contour_in_frame(contour, base: Pose2):
    """Express a world-frame contour in the base frame of the given pose."""
    R = rot2(-base.theta)
    t = base.translation

    def xf(p):
        return tuple(R @ (np.asarray(p, float) - t))

    if isinstance(contour, Circle):
        return Circle(xf(contour.center), contour.radius)
    if isinstance(contour, PointPin):
        return PointPin(xf(contour.position), contour.radius)
    if isinstance(contour, ConvexPolygon):
        return ConvexPolygon(tuple(xf(p) for p in contour.vertices))
    raise TypeError(f"unknown contour type {type(contour)!r}")


def _as_circle(contour):
    if isinstance(contour, Circle):
        return np.asarray(contour.center, float), contour.radius
    if isinstance(contour, PointPin):
        return np.asarray(contour.position, float), contour.radius
    return None


def points_signed_distance(contour, pts: np.ndarray) -> np.ndarray:
    """Signed distance of points to the contour (positive outside)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    circ = _as_circle(contour)
    if circ is not None:
        c, r = circ
        return np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) - r
    v = contour.core
    e0 = v
    e1 = np.roll(v, -1, axis=0)
    d_edge = _point_segment_distance(pts[:, None, :], e0[None], e1[None])  # (n, m)
    dmin = d_edge.min(axis=1)
    en = e1 - e0
    # inside iff left of every edge for a CCW polygon
    cross = (en[None, :, 0] * (pts[:, None, 1] - e0[None, :, 1])
             - en[None, :, 1] * (pts[:, None, 0] - e0[None, :, 0]))
    inside = np.all(cross > 0, axis=1)
    return np.where(inside, -dmin, dmin) - contour.corner_radius


def _point_segment_distance(p, a, b):
    """Distance from points p to segments (a, b); inputs broadcast, last dim 2."""
    ab = b - a
    denom = np.maximum((ab * ab).sum(axis=-1), 1e-300)
    t = np.clip(((p - a) * ab).sum(axis=-1) / denom, 0.0, 1.0)
    q = a + t[..., None] * ab
    return np.linalg.norm(p - q, axis=-1)


def _point_segment_closest(p, a, b):
    """Closest parameter and point on segments (a, b) from points p."""
    ab = b - a
    denom = np.maximum((ab * ab).sum(axis=-1), 1e-300)
    t = np.clip(((p - a) * ab).sum(axis=-1) / denom, 0.0, 1.0)
    q = a + t[..., None] * ab
    return t, q


def segments_min_distance(contour, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum signed distance from rod segments (a[i], b[i]) to the contour.

    Negative values indicate penetration; for polygon-crossing segments the
    depth is estimated from sampled interior points.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    circ = _as_circle(contour)
    if circ is not None:
        c, r = circ
        _, q = _point_segment_closest(c[None], a, b)
        return np.linalg.norm(q - c[None], axis=-1) - r
    # polygon: sample along the segment; the corner fillet bounds the field
    # curvature, so sub-mm rod segments are resolved well by a few samples
    ts = np.linspace(0.0, 1.0, 9)
    pts = a[:, None, :] + ts[None, :, None] * (b - a)[:, None, :]
    d = points_signed_distance(contour, pts.reshape(-1, 2)).reshape(a.shape[0], ts.size)
    return d.min(axis=1)


def _active_feature(contour, a: np.ndarray, b: np.ndarray):
    """Reduce the contour to the feature closest to rod segment (a, b).

    Circle-like contours and filleted polygon corners reduce to a point
    feature ("point", center, radius); a polygon face reduces to an edge of
    the inset core ("edge", e0, e1, fillet_radius). The feature is locally
    constant near a contact configuration, which makes finite differencing
    of the gap smooth.
    """
    circ = _as_circle(contour)
    if circ is not None:
        return ("point", circ[0], circ[1])
    core = contour.core
    rho = contour.corner_radius
    e0 = core
    e1 = np.roll(core, -1, axis=0)
    m = core.shape[0]
    # candidate 1: core vertices against the rod segment
    _, q_v = _point_segment_closest(core, a[None], b[None])
    d_v = np.linalg.norm(q_v - core, axis=-1)
    # candidate 2: rod endpoints against core edges
    best = ("point", core[int(np.argmin(d_v))], rho)
    best_d = float(d_v.min())
    for p in (a, b):
        t_e, q_e = _point_segment_closest(p[None], e0, e1)
        d_e = np.linalg.norm(q_e - p[None], axis=-1)
        j = int(np.argmin(d_e))
        if d_e[j] < best_d:
            best_d = float(d_e[j])
            tj = float(t_e[j])
            if tj <= 1e-9:
                best = ("point", e0[j], rho)
            elif tj >= 1.0 - 1e-9:
                best = ("point", e1[j], rho)
            else:
                best = ("edge", e0[j], e1[j], rho)
    return best


def _feature_segment_distance(feature, a: np.ndarray, b: np.ndarray):
    """Signed distance, rod parameter t and outward normal for rod segments
    (a[i], b[i]) against a frozen contour feature. Vectorized over rows."""
    kind = feature[0]
    if kind == "point":
        c, r = np.asarray(feature[1], float), feature[2]
        t, q = _point_segment_closest(c[None], a, b)
        diff = q - c[None]
        dist = np.linalg.norm(diff, axis=-1)
        nhat = diff / np.maximum(dist, 1e-30)[..., None]
        return dist - r, t, nhat
    # edge feature: candidates are rod endpoints vs edge and edge endpoints vs rod
    e0, e1 = np.asarray(feature[1], float), np.asarray(feature[2], float)
    rho = feature[3]
    n_rows = a.shape[0]
    cand_d = np.empty((n_rows, 4))
    cand_t = np.empty((n_rows, 4))
    cand_n = np.empty((n_rows, 4, 2))
    edge_n = _edge_outward_normal(e0, e1)
    for idx, (p, t_rod) in enumerate(((a, 0.0), (b, 1.0))):
        te, q = _point_segment_closest(p, e0[None], e1[None])
        diff = p - q
        dist = np.linalg.norm(diff, axis=-1)
        cand_d[:, idx] = dist
        cand_t[:, idx] = t_rod
        with np.errstate(invalid="ignore"):
            nn = diff / np.maximum(dist, 1e-30)[..., None]
        small = dist < 1e-12
        nn[small] = edge_n
        cand_n[:, idx] = nn
    for idx, ev in enumerate((e0, e1), start=2):
        t, q = _point_segment_closest(ev[None], a, b)
        diff = q - ev[None]
        dist = np.linalg.norm(diff, axis=-1)
        cand_d[:, idx] = dist
        cand_t[:, idx] = t
        with np.errstate(invalid="ignore"):
            nn = diff / np.maximum(dist, 1e-30)[..., None]
        small = dist < 1e-12
        nn[small] = edge_n
        cand_n[:, idx] = nn
    best = np.argmin(cand_d, axis=1)
    rows = np.arange(n_rows)
    d = cand_d[rows, best]
    t = cand_t[rows, best]
    nhat = cand_n[rows, best]
    # sign: rod midpoint behind the edge outward normal means core penetration
    mid = 0.5 * (a + b)
    behind = ((mid - e0[None]) * edge_n[None]).sum(axis=-1) < 0
    d = np.where(behind, -d, d)
    return d - rho, t, nhat


def _edge_outward_normal(e0, e1):
    """Outward normal of a CCW polygon edge."""
    t = e1 - e0
    n = np.array([t[1], -t[0]])
    return n / np.linalg.norm(n)


# ---------------------------------------------------------------------------
# rod model
# ---------------------------------------------------------------------------


class RodModel:
    """Precomputed discretization of a whisker: segment length, rest angles
    and joint stiffnesses.

    Joint 0 sits at the base and combines the mount stiffness with the elastic
    compliance of the first half segment in series; interior joints carry
    EI / segment_length. This mid-segment lumping keeps the discretization
    error of the tip compliance at O(1/n^2).
    """

    def __init__(self, spec: WhiskerSpec, n_segments: int = DEFAULT_SEGMENTS):
        if n_segments < 4:
            raise ValueError("need at least 4 segments")
        self.spec = spec
        self.n = n_segments
        self.seg_len = spec.arc_length / n_segments
        ei = spec.bending_stiffness
        k = np.full(n_segments, ei / self.seg_len)
        k[0] = 1.0 / (1.0 / spec.base_stiffness + self.seg_len / (2.0 * ei))
        self.stiffness = k
        kappa = spec.curvature
        rel = np.full(n_segments, kappa * self.seg_len)
        rel[0] = kappa * self.seg_len / 2.0
        self.rest_rel = rel
        self.rest_angles = np.cumsum(rel)
        self.rest = self.node_positions(self.rest_angles)
        self.arc_at_node = self.seg_len * np.arange(n_segments + 1)

    def node_positions(self, angles: np.ndarray) -> np.ndarray:
        steps = self.seg_len * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        nodes = np.zeros((angles.shape[0] + 1, 2))
        nodes[1:] = np.cumsum(steps, axis=0)
        return nodes

    def joint_deviation(self, angles: np.ndarray) -> np.ndarray:
        phi = np.empty_like(angles)
        phi[0] = angles[0] - self.rest_rel[0]
        phi[1:] = np.diff(angles) - self.rest_rel[1:]
        return phi

    def energy_gradient(self, angles: np.ndarray) -> np.ndarray:
        tau = self.stiffness * self.joint_deviation(angles)
        g = tau.copy()
        g[:-1] -= tau[1:]
        return g

    def stiffness_matrix(self) -> np.ndarray:
        k = self.stiffness
        K = np.zeros((self.n, self.n))
        idx = np.arange(self.n)
        K[idx, idx] = k
        K[idx[:-1], idx[:-1]] += k[1:]
        K[idx[:-1], idx[1:]] = -k[1:]
        K[idx[1:], idx[:-1]] = -k[1:]
        return K

    # rest-curve geometry helpers -----------------------------------------

    def rest_point(self, s: float) -> np.ndarray:
        spec = self.spec
        if spec.is_straight:
            return np.array([s, 0.0])
        R = spec.arc_radius
        return np.array([R * math.sin(s / R), R * (1.0 - math.cos(s / R))])

    def rest_tangent(self, s: float) -> np.ndarray:
        if self.spec.is_straight:
            return np.array([1.0, 0.0])
        a = s / self.spec.arc_radius
        return np.array([math.cos(a), math.sin(a)])

    def rest_inward_normal(self, s: float) -> np.ndarray:
        """Unit normal pointing toward the arc center (left of the tangent)."""
        t = self.rest_tangent(s)
        return np.array([-t[1], t[0]])


def rest_arc_position(spec: WhiskerSpec, point, n_probe: int = 400) -> float:
    """Arc position along the rest curve closest to a base-frame point."""
    rod = RodModel(spec, min(n_probe, 400))
    p = np.asarray(point, float)
    d = np.linalg.norm(rod.rest - p[None], axis=1)
    return float(rod.arc_at_node[int(np.argmin(d))])


# ---------------------------------------------------------------------------
# equilibrium solver
# ---------------------------------------------------------------------------


class EquilibriumSolver:
    """Damped-Newton elastica equilibrium against a single convex obstacle.

    One instance owns a warm-start state and must not be shared across
    threads; distinct instances are independent.
    """

    def __init__(self, spec: WhiskerSpec, n_segments: int = DEFAULT_SEGMENTS):
        self.rod = RodModel(spec, n_segments)
        self.K = self.rod.stiffness_matrix()
        self._warm_angles: np.ndarray | None = None
        self._warm_lam = 0.0
        self._warm_contact = False

    def reset(self):
        self._warm_angles = None
        self._warm_lam = 0.0
        self._warm_contact = False

    # -- public API --------------------------------------------------------

    def solve(self, contour_local) -> EquilibriumResult:
        """Equilibrium for a contour expressed in the whisker base frame."""
        rod = self.rod
        if self._warm_contact and self._warm_angles is not None:
            try:
                res = self._solve_contact(contour_local, self._warm_angles, self._warm_lam)
            except ConvergenceError:
                res = None
            if res is None:
                # an uncapped solve can tunnel through a small contour onto
                # the separated (tension) branch; retry with capped steps
                # before believing the release
                try:
                    res = self._solve_contact(contour_local, self._warm_angles,
                                              self._warm_lam, step_cap=2e-3)
                except ConvergenceError:
                    res = None
            if res is not None and res.in_contact:
                self._store(res)
                return res
            # contact released (or lost track): fall through to detection
        rest = rod.rest_angles
        nodes = rod.rest
        d_rest = segments_min_distance(contour_local, nodes[:-1], nodes[1:])
        pen = d_rest < 0.0
        if not pen.any():
            self._warm_contact = False
            self._warm_angles = rest.copy()
            return self._free_result()
        self._check_single_run(pen)
        start = self._warm_angles if self._warm_angles is not None else rest.copy()
        # cap the Newton step here: an uncapped solve can tunnel through a
        # small contour onto the separated (tension) branch, which is what
        # sent us down this fall-through path in the first place
        res = self._solve_contact(contour_local, start, max(self._warm_lam, 0.0),
                                  step_cap=2e-3)
        if res is None or not res.in_contact:
            # rest penetrates but the constrained solve released: geometry is
            # on the verge of contact; report the free shape
            self._warm_contact = False
            self._warm_angles = rest.copy()
            return self._free_result()
        self._store(res)
        return res

    # -- internals ----------------------------------------------------------

    def _store(self, res: EquilibriumResult):
        self._warm_angles = res.rod.angles.copy()
        self._warm_lam = res.lam
        self._warm_contact = res.in_contact

    def _free_result(self) -> EquilibriumResult:
        rod = self.rod
        return EquilibriumResult(
            in_contact=False,
            contact=None,
            moment=0.0,
            rod=RodState(rod.rest.copy(), rod.rest_angles.copy()),
        )

    @staticmethod
    def _check_single_run(pen: np.ndarray):
        idx = np.flatnonzero(pen)
        if idx.size == 0:
            return
        gaps = np.diff(idx)
        if np.any(gaps > 3):
            raise ContactAmbiguityError(
                "rest shape intersects the contour in multiple places; "
                "single-contact assumption violated"
            )

    def _constraint(self, contour, angles, seg):
        rod = self.rod
        nodes = rod.node_positions(angles)
        a = nodes[seg][None]
        b = nodes[seg + 1][None]
        feature = _active_feature(contour, nodes[seg], nodes[seg + 1])
        d, t, nhat = _feature_segment_distance(feature, a, b)
        return float(d[0]), float(t[0]), nhat[0], feature, nodes

    def _constraint_gradient(self, angles, seg, t, nhat):
        rod = self.rod
        w = np.zeros(rod.n)
        w[:seg] = 1.0
        w[seg] = t
        du = -nhat[0] * np.sin(angles) + nhat[1] * np.cos(angles)
        return rod.seg_len * w * du

    def _node_gap(self, contour, angles, j, feature):
        """Gap and outward normal for contact pinned at rod node j."""
        p = self.rod.node_positions(angles)[j]
        d, _, nhat = _feature_segment_distance(feature, p[None], p[None])
        return float(d[0]), nhat[0]

    def _constraint_hessian_fd(self, contour, angles, seg, feature, h=1e-7,
                               pin_node=None):
        """Finite-difference Hessian of the gap wrt segment angles, with the
        contour frozen to the active feature (smooth near contact). With
        pin_node set, the gap is measured at that node instead of along
        segment seg."""
        rod = self.rod
        n = rod.n
        pert = np.concatenate([np.eye(n) * h, -np.eye(n) * h])
        psis = angles[None, :] + pert  # (2n, n)
        steps = rod.seg_len * np.stack([np.cos(psis), np.sin(psis)], axis=-1)
        nodes = np.concatenate(
            [np.zeros((2 * n, 1, 2)), np.cumsum(steps, axis=1)], axis=1
        )
        w = np.zeros((2 * n, n))
        if pin_node is not None:
            a = nodes[:, pin_node]
            _, _, nhat = _feature_segment_distance(feature, a, a)
            w[:, :pin_node] = 1.0
        else:
            a = nodes[:, seg]
            b = nodes[:, seg + 1]
            _, t, nhat = _feature_segment_distance(feature, a, b)
            w[:, :seg] = 1.0
            w[:, seg] = t
        du = -nhat[:, 0:1] * np.sin(psis) + nhat[:, 1:2] * np.cos(psis)
        grads = rod.seg_len * w * du  # (2n, n)
        H = (grads[:n] - grads[n:]) / (2.0 * h)
        return 0.5 * (H + H.T)

    def _newton_fixed(self, contour, angles0, lam0, mode, max_iter=_MAX_NEWTON,
                      step_cap=None):
        """Damped Newton on the KKT system with a fixed constraint mode.

        mode is ("seg", i) for contact along segment i (rod parameter free)
        or ("node", j) for contact pinned at interior node j. Each mode is a
        smooth problem, so no mode switching happens inside this loop.
        Returns (angles, lam, info) on success, None on a hard stall; info
        carries the final gap, rod parameter, normal and residual.
        """
        rod = self.rod
        n = rod.n
        kind, idx = mode
        angles = angles0.copy()
        lam = lam0
        torque_scale = rod.spec.bending_stiffness / rod.seg_len**2  # N
        best = None
        # Levenberg-Marquardt damping: near a kink the KKT system turns
        # near-singular along the tangential slide mode, and the residual
        # bottoms out at the normal-cone ambiguity scale instead of zero
        mu = 0.0
        mu_scale = float(np.abs(np.diag(self.K)).mean())

        def evaluate(psi, lam_c):
            if kind == "node":
                p = rod.node_positions(psi)[idx]
                feature = _active_feature(contour, p, p)
                d, nhat = self._node_gap(contour, psi, idx, feature)
                t = 0.0
            else:
                d, t, nhat, feature, _ = self._constraint(contour, psi, idx)
            gd = self._constraint_gradient(psi, idx, t, nhat)
            r1 = rod.energy_gradient(psi) - lam_c * gd
            return d, t, nhat, feature, gd, r1

        clamp_run = 0
        nhat_ref = None  # side guard: reject iterates that tunnel through
        for it in range(max_iter):
            d, t, nhat, feature, gd, r1 = evaluate(angles, lam)
            if nhat_ref is None:
                nhat_ref = nhat
            res_inf = float(np.abs(r1).max())
            if res_inf < _TORQUE_TOL and abs(d) < _GAP_TOL:
                return angles, lam, {"d": d, "t": t, "nhat": nhat,
                                     "res": res_inf, "tight": True}
            # the segment parametrization degenerates when the closest point
            # clamps at an interior node: hand control back to the driver,
            # which will switch to the neighbor segment or pin the node
            if kind == "seg" and ((t <= 1e-7 and idx > 0)
                                  or (t >= 1.0 - 1e-7 and idx < n - 1)):
                clamp_run += 1
                if clamp_run >= 3:
                    return angles, lam, {"d": d, "t": t, "nhat": nhat,
                                         "res": res_inf, "tight": False}
            else:
                clamp_run = 0
            # stalled-iterate bookkeeping: near a kink the residual floor is
            # the normal-cone ambiguity scale lam * kink * seg_len
            j_kink = idx if kind == "node" else (idx if t < 0.5 else idx + 1)
            kink = abs(angles[j_kink] - angles[j_kink - 1]) if 0 < j_kink < n else 0.0
            stall_tol = max(_TORQUE_TOL_RELAXED, 8.0 * abs(lam) * kink * rod.seg_len)
            if (res_inf < stall_tol and abs(d) < _GAP_TOL_RELAXED
                    and lam > 0.0 and (best is None or res_inf < best[0])):
                best = (res_inf, angles.copy(), lam, t, nhat, d)
            if lam == 0.0:
                denom = float(gd @ gd)
                if denom > 0:
                    lam = max(float(gd @ (r1 + lam * gd)) / denom, 0.0)
            Hd = self._constraint_hessian_fd(
                contour, angles, idx, feature,
                pin_node=idx if kind == "node" else None,
            )
            J = np.zeros((n + 1, n + 1))
            J[:n, :n] = self.K - lam * Hd + mu * mu_scale * np.eye(n)
            J[:n, n] = -gd
            J[n, :n] = gd
            rhs = np.empty(n + 1)
            rhs[:n] = -r1
            rhs[n] = -d
            try:
                step = np.linalg.solve(J, rhs)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(J, rhs, rcond=None)[0]
            if step_cap is not None:
                s_max = float(np.abs(step[:n]).max())
                if s_max > step_cap:
                    step *= step_cap / s_max
            merit0 = float(r1 @ r1) + (torque_scale * d) ** 2
            alpha = 1.0
            for _ in range(12):
                cand = angles + alpha * step[:n]
                cand_lam = lam + alpha * step[n]
                dc, tc, nc, feat_c, gdc, r1c = evaluate(cand, cand_lam)
                if float(nc @ nhat_ref) <= 0.0:
                    alpha *= 0.5  # crossed to the far side of the contour
                    continue
                merit = float(r1c @ r1c) + (torque_scale * dc) ** 2
                if merit < merit0 * (1.0 - 1e-4 * alpha) or merit < _TORQUE_TOL**2:
                    break
                alpha *= 0.5
            angles = angles + alpha * step[:n]
            lam = lam + alpha * step[n]
            if alpha < 0.125:
                mu = max(4.0 * mu, 1e-4)
                if mu > 1e3:
                    break  # steps no longer make progress
            elif alpha == 1.0:
                mu = mu / 4.0 if mu > 1e-8 else 0.0
        if best is not None:
            res_b, angles_b, lam_b, t_b, nhat_b, d_b = best
            return angles_b, lam_b, {"d": d_b, "t": t_b, "nhat": nhat_b,
                                     "res": res_b, "tight": False}
        return None

    def _solve_contact(self, contour, angles0, lam0,
                       step_cap=None) -> EquilibriumResult | None:
        """Active-set driver: converge within a constraint mode, then follow
        the contact point across segment and node boundaries.

        A contact that converges to a segment end moves to the neighboring
        segment if that segment's closest approach is interior, or pins to
        the shared node otherwise. A node contact is released back to a
        segment when the segment interior penetrates or when the contact
        force leaves the kink's normal cone (tangential slide).
        """
        rod = self.rod
        n = rod.n
        angles = angles0.copy()
        lam = max(lam0, 0.0)
        nodes = rod.node_positions(angles)
        d_all = segments_min_distance(contour, nodes[:-1], nodes[1:])
        seg0 = int(np.argmin(d_all))
        _, t0, _, _, _ = self._constraint(contour, angles, seg0)
        mode = ("seg", seg0)
        if t0 <= 1e-7 and seg0 > 0:
            _, t_nb, _, _, _ = self._constraint(contour, angles, seg0 - 1)
            mode = ("seg", seg0 - 1) if t_nb < 1.0 - 1e-6 else ("node", seg0)
        elif t0 >= 1.0 - 1e-7 and seg0 < n - 1:
            _, t_nb, _, _, _ = self._constraint(contour, angles, seg0 + 1)
            mode = ("seg", seg0 + 1) if t_nb > 1e-6 else ("node", seg0 + 1)
        visited = set()
        backup = None  # last converged iterate at a boundary, for cycles
        last_residual = math.inf
        for outer in range(24):
            if mode in visited:
                break
            visited.add(mode)
            out = self._newton_fixed(contour, angles, lam, mode, step_cap=step_cap)
            if out is None:
                break
            angles, lam, info = out
            last_residual = info["res"]
            kind, idx = mode
            if kind == "seg":
                t = info["t"]
                interior = 1e-9 < t < 1.0 - 1e-9
                boundary_ok = (t <= 1e-9 and idx == 0) or (t >= 1.0 - 1e-9 and idx == n - 1)
                if interior or boundary_ok:
                    if lam <= 0.0:
                        return None  # separating: no sustained contact
                    return self._package(contour, angles, lam, idx,
                                         float(np.clip(t, 0.0, 1.0)),
                                         info["nhat"], info["res"])
                # contact reached a shared node: j is the node index
                if t <= 1e-9:
                    j, nb, clamp_end = idx, idx - 1, 1.0
                else:
                    j, nb, clamp_end = idx + 1, idx + 1, 0.0
                _, t_nb, _, _, _ = self._constraint(contour, angles, nb)
                if abs(t_nb - clamp_end) > 1e-6:
                    mode = ("seg", nb)  # neighbor holds an interior optimum
                else:
                    mode = ("node", j)
                backup = (angles.copy(), lam, idx, float(np.clip(t, 0.0, 1.0)), info)
                continue
            # node mode: validate the converged node contact
            j = idx
            p_nodes = rod.node_positions(angles)
            u_prev = p_nodes[j] - p_nodes[j - 1]
            u_next = p_nodes[j + 1] - p_nodes[j]
            s_prev = float(info["nhat"] @ u_prev) / rod.seg_len
            s_next = float(info["nhat"] @ u_next) / rod.seg_len
            d_l, t_l, _, _, _ = self._constraint(contour, angles, j - 1)
            d_r, t_r, _, _, _ = self._constraint(contour, angles, j)
            new_mode = None
            if t_r > 1e-6 and d_r < -1e-10:
                new_mode = ("seg", j)  # right segment interior penetrates
            elif t_l < 1.0 - 1e-6 and d_l < -1e-10:
                new_mode = ("seg", j - 1)
            elif s_prev > 1e-9 and s_next > 1e-9:
                new_mode = ("seg", j)  # force slides the contact forward
            elif s_prev < -1e-9 and s_next < -1e-9:
                new_mode = ("seg", j - 1)  # slides backward
            if new_mode is None:
                if lam <= 0.0:
                    return None
                return self._package(contour, angles, lam, j, 0.0,
                                     info["nhat"], info["res"])
            backup = (angles.copy(), lam, j, 0.0, info)
            mode = new_mode
        # mode cycling or stall: accept the best boundary iterate if sound
        if backup is not None:
            angles_b, lam_b, seg_b, t_b, info_b = backup
            if (lam_b > 0.0 and info_b["res"] < _TORQUE_TOL_RELAXED * 10
                    and abs(info_b["d"]) < _GAP_TOL_RELAXED):
                return self._package(contour, angles_b, lam_b, seg_b, t_b,
                                     info_b["nhat"], info_b["res"])
        # last resort: penalty fallback, then one more Newton pass
        angles = self._penalty_fallback(contour, angles)
        res = self._newton_polish(contour, angles, lam)
        if res is not None:
            return res
        raise ConvergenceError("equilibrium solve did not converge", last_residual)

    def _newton_polish(self, contour, angles0, lam0):
        """Single plain Newton pass used after the penalty fallback."""
        rod = self.rod
        n = rod.n
        angles = angles0.copy()
        lam = max(lam0, 0.0)
        for it in range(40):
            nodes = rod.node_positions(angles)
            d_all = segments_min_distance(contour, nodes[:-1], nodes[1:])
            seg = int(np.argmin(d_all))
            d, t, nhat, feature, _ = self._constraint(contour, angles, seg)
            gd = self._constraint_gradient(angles, seg, t, nhat)
            gE = rod.energy_gradient(angles)
            r1 = gE - lam * gd
            res_inf = float(np.abs(r1).max())
            if res_inf < _TORQUE_TOL and abs(d) < _GAP_TOL:
                if lam <= 0.0:
                    return None
                return self._package(contour, angles, lam, seg, t, nhat, res_inf)
            Hd = self._constraint_hessian_fd(contour, angles, seg, feature)
            J = np.zeros((n + 1, n + 1))
            J[:n, :n] = self.K - lam * Hd
            J[:n, n] = -gd
            J[n, :n] = gd
            rhs = np.empty(n + 1)
            rhs[:n] = -r1
            rhs[n] = -d
            try:
                step = np.linalg.solve(J, rhs)
            except np.linalg.LinAlgError:
                return None
            scale = min(1.0, 0.2 / max(np.abs(step[:n]).max(), 1e-12))
            angles += scale * step[:n]
            lam += scale * step[n]
        return None

    def _penalty_fallback(self, contour, angles0):
        rod = self.rod
        angles = angles0.copy()
        k_pen = rod.spec.bending_stiffness / rod.seg_len**3
        for mu in (1e2 * k_pen, 1e4 * k_pen, 1e6 * k_pen):
            for _ in range(200):
                nodes = rod.node_positions(angles)
                d_all = segments_min_distance(contour, nodes[:-1], nodes[1:])
                g = rod.energy_gradient(angles)
                H = self.K.copy()
                for seg in np.flatnonzero(d_all < 0):
                    d, t, nhat, feature, _ = self._constraint(contour, angles, int(seg))
                    if d >= 0:
                        continue
                    gd = self._constraint_gradient(angles, int(seg), t, nhat)
                    g += mu * d * gd
                    H += mu * np.outer(gd, gd)
                if np.abs(g).max() < 1e-9:
                    break
                step = np.linalg.solve(H, -g)
                scale = min(1.0, 0.1 / max(np.abs(step).max(), 1e-12))
                angles += scale * step
        return angles

    def _package(self, contour, angles, lam, seg, t, nhat, residual):
        rod = self.rod
        nodes = rod.node_positions(angles)
        q = (1.0 - t) * nodes[seg] + t * nodes[seg + 1]
        force = lam * nhat
        moment = float(q[0] * force[1] - q[1] * force[0])
        arc = rod.seg_len * (seg + t)
        return EquilibriumResult(
            in_contact=True,
            contact=ContactState(float(q[0]), float(q[1])),
            moment=moment,
            rod=RodState(nodes, angles.copy()),
            force=force,
            contact_arc_pos=arc,
            lam=lam,
            residual=residual,
            segment=seg,
            seg_param=t,
        )


def solve_equilibrium(
    spec: WhiskerSpec,
    base: Pose2,
    contour,
    n_segments: int = DEFAULT_SEGMENTS,
    solver: EquilibriumSolver | None = None,
) -> EquilibriumResult:
    """One-shot equilibrium solve; contour given in the world frame.

    Without a warm-started solver, contact is detected from the rest shape:
    configurations only reachable by sweeping (e.g. a deeply indented pin)
    require continuation via sweep_trajectory or indent_pin.
    """
    if solver is None:
        solver = EquilibriumSolver(spec, n_segments)
    local = contour_in_frame(contour, base)
    return solver.solve(local)


@dataclass
class SweepSample:
    time: float
    in_contact: bool
    contact: ContactState | None
    moment: float


def sweep_trajectory(
    spec: WhiskerSpec,
    base_trajectory,
    contour,
    n_segments: int = DEFAULT_SEGMENTS,
) -> list[SweepSample]:
    """Quasi-static sweep: one warm-started equilibrium per trajectory sample.

    base_trajectory is a sequence of (time, Pose2) with strictly increasing
    timestamps; the contour is fixed in the world frame. Contact loss yields
    a sample with NaN contact and zero moment.
    """
    times = [t for t, _ in base_trajectory]
    if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
        raise ValueError("timestamps must be strictly increasing")
    solver = EquilibriumSolver(spec, n_segments)
    out: list[SweepSample] = []
    for i, (t, base) in enumerate(base_trajectory):
        try:
            res = solver.solve(contour_in_frame(contour, base))
        except ConvergenceError as exc:
            raise ConvergenceError(f"sample {i} (t={t:.4f}s): {exc}", exc.residual) from exc
        except ContactAmbiguityError as exc:
            raise ContactAmbiguityError(f"sample {i} (t={t:.4f}s): {exc}") from exc
        out.append(SweepSample(t, res.in_contact, res.contact, res.moment))
    return out


# ---------------------------------------------------------------------------
# closed-form cross-check and calibration helpers
# ---------------------------------------------------------------------------


def analytic_pin_moment(spec: WhiskerSpec, contact_arc_pos: float, lateral_deflection: float) -> float:
    """Small-deflection cantilever base moment for a straight whisker.

    Point load at arc position a producing tip-side deflection d:
    F = 3 EI d / a^3, M = F a = 3 EI d / a^2. Assumes a rigid clamp at the
    base (no mount compliance).
    """
    if not spec.is_straight:
        raise ValueError("closed-form cantilever applies to straight whiskers only")
    if not 0.0 < contact_arc_pos <= spec.arc_length:
        raise ValueError(
            f"contact arc position {contact_arc_pos} outside (0, {spec.arc_length}]"
        )
    if abs(lateral_deflection) > 0.1 * contact_arc_pos:
        raise ValueError("deflection outside the small-deflection regime")
    return 3.0 * spec.bending_stiffness * lateral_deflection / contact_arc_pos**2


def indent_pin(
    spec: WhiskerSpec,
    arc_pos: float,
    depth: float,
    side: int = -1,
    pin_radius: float = PIN_RADIUS,
    step: float = 2.0e-4,
    n_segments: int = DEFAULT_SEGMENTS,
    solver: EquilibriumSolver | None = None,
) -> EquilibriumResult:
    """Press a calibration pin into the whisker by continuation.

    The pin starts just touching the rest curve at the given arc position and
    advances along the push direction until the whisker is displaced by
    `depth`. For straight whiskers side=-1 pushes toward -y (contacts on the
    right of the whisker); side=+1 toward +y. Curved whiskers are always
    pushed toward the arc center regardless of side.
    """
    if depth <= 0:
        raise ValueError("depth must be positive")
    rod = RodModel(spec, n_segments)
    if spec.is_straight:
        push = np.array([0.0, float(np.sign(side) or -1.0)])
    else:
        push = rod.rest_inward_normal(arc_pos)
    anchor = rod.rest_point(arc_pos)
    if solver is None:
        solver = EquilibriumSolver(spec, n_segments)
    start = -0.5 * pin_radius
    stop = depth - pin_radius
    n_steps = max(2, int(math.ceil((stop - start) / step)) + 1)
    res = None
    for u in np.linspace(start, stop, n_steps):
        center = anchor + u * push
        res = solver.solve(PointPin(tuple(center), pin_radius))
    assert res is not None
    return res


def pin_calibration_grid(
    spec: WhiskerSpec,
    arc_positions,
    depths,
    side: int = -1,
    pin_radius: float = PIN_RADIUS,
    n_segments: int = DEFAULT_SEGMENTS,
):
    """Synthetic calibration sweep: indent a pin on a grid of arc positions
    and depths, recording the solved contact point and base moment.

    Returns (positions (m, 2), moments (m,)).
    """
    depths = sorted(depths)
    positions = []
    moments = []
    for a in arc_positions:
        solver = EquilibriumSolver(spec, n_segments)
        rod = solver.rod
        if spec.is_straight:
            push = np.array([0.0, float(np.sign(side) or -1.0)])
        else:
            push = rod.rest_inward_normal(a)
        anchor = rod.rest_point(a)
        u = -0.5 * pin_radius
        for depth in depths:
            stop = depth - pin_radius
            n_steps = max(2, int(math.ceil((stop - u) / 2.0e-4)) + 1)
            res = None
            for uu in np.linspace(u, stop, n_steps):
                res = solver.solve(PointPin(tuple(anchor + uu * push), pin_radius))
            u = stop
            if res is not None and res.in_contact:
                positions.append([res.contact.px, res.contact.py])
                moments.append(res.moment)
    return np.asarray(positions), np.asarray(moments)
