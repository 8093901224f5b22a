"""
Rigid bodies as point-mass clouds.

A :class:`PointMassBody` is always expressed in its centre-of-mass frame;
every spatial integral over the mass density ``m(x)`` becomes a weighted
sum over its points.  Primitive shapes additionally keep their uniform
continuum :class:`DensityProfile`, which :mod:`pncollapse.quantum_ops` uses
when mass has to be attributed to a spatial grid.

Sphere placement
----------------
``discretize_primitive("sphere", ...)`` uses concentric shells.  Shell
boundaries are chosen so each shell holds the uniform-density share of its
point count, every point carries ``M / n``, and the shell radius is the
mass-weighted rms radius of the shell, so ``sum m r^2 = 3 M R^2 / 5``
holds exactly before the centre-of-mass shift (the shift changes it only at
second order in the small residual dipole of the lattice).  Points on a shell follow a spherical Fibonacci lattice
rotated by a per-shell random rotation drawn from ``seed``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InvalidInputError, InvalidParameterError

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))
SHAPES = ("sphere", "dumbbell", "triaxial-ellipsoid", "ring")


def rotation_matrix(angle: float, axis) -> np.ndarray:
    """Active rotation by ``angle`` about unit ``axis`` (Rodrigues form)."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    k = np.array([[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]])
    c, s = np.cos(angle), np.sin(angle)
    return c * np.eye(3) + s * k + (1.0 - c) * np.outer(n, n)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpinConfig:
    """Rotation about ``axis`` by ``angle`` (rad), spinning at ``rate`` (rad/s)."""

    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    angle: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(n)
        if n.shape != (3,) or not np.isfinite(norm) or norm == 0.0:
            raise InvalidParameterError("spin axis must be a non-zero 3-vector")
        object.__setattr__(self, "axis", _frozen(n / norm))
        object.__setattr__(self, "angle", float(np.mod(self.angle, 2.0 * np.pi)))
        object.__setattr__(self, "rate", float(self.rate))

    @property
    def matrix(self) -> np.ndarray:
        return rotation_matrix(self.angle, self.axis)

    @property
    def omega(self) -> np.ndarray:
        return self.rate * self.axis


@dataclass(frozen=True, eq=False)
class DensityProfile:
    """Uniform solid ellipsoid (a sphere when all semi-axes agree).

    ``orientation`` maps body-frame vectors to the lab frame.
    """

    semi_axes: np.ndarray
    mass: float
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "semi_axes", _frozen(self.semi_axes))
        object.__setattr__(self, "orientation", _frozen(self.orientation))

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * np.pi * float(np.prod(self.semi_axes))

    @property
    def extent(self) -> float:
        return float(np.max(self.semi_axes))

    def inside(self, x) -> np.ndarray:
        # the relative slack keeps grid nodes lying exactly on the surface
        # classified identically for every orientation
        xb = np.asarray(x, dtype=float) @ self.orientation
        q = np.sum((xb / self.semi_axes) ** 2, axis=-1)
        return q <= 1.0 + 1e-9

    def density(self, x) -> np.ndarray:
        return np.where(self.inside(x), self.mass / self.volume, 0.0)

    def rotated(self, rot: np.ndarray) -> "DensityProfile":
        return DensityProfile(self.semi_axes, self.mass, rot @ self.orientation)


@dataclass(frozen=True, eq=False)
class PointMassBody:
    """Point-mass cloud; recentred on its centre of mass at construction."""

    masses: np.ndarray
    positions: np.ndarray
    label: str = ""
    profile: DensityProfile | None = None

    def __post_init__(self):
        m = np.array(self.masses, dtype=float).reshape(-1)
        x = np.array(self.positions, dtype=float).reshape(-1, 3)
        if m.size == 0 or m.size != x.shape[0]:
            raise InvalidParameterError("masses and positions must be non-empty and aligned")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(x))):
            raise InvalidParameterError("non-finite mass or position")
        if np.any(m <= 0.0):
            raise InvalidParameterError("all point masses must be strictly positive")
        x = x - (m @ x) / m.sum()
        object.__setattr__(self, "masses", _frozen(m))
        object.__setattr__(self, "positions", _frozen(x))

    @property
    def n_points(self) -> int:
        return self.masses.size

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def radius(self) -> float:
        r = float(np.max(np.linalg.norm(self.positions, axis=1)))
        if self.profile is not None:
            r = max(r, self.profile.extent)
        return r


@dataclass(frozen=True)
class InertiaData:
    tensor: np.ndarray
    scalar_I: float
    axis: np.ndarray


# --------------------------------------------------------------------------
# primitives
# --------------------------------------------------------------------------

def _positive(params, *names):
    vals = []
    for name in names:
        if name not in params:
            raise InvalidParameterError(f"missing parameter {name!r}")
        v = np.asarray(params[name], dtype=float)
        if np.any(~np.isfinite(v)) or np.any(v <= 0.0):
            raise InvalidParameterError(f"parameter {name!r} must be positive")
        vals.append(v)
    return vals


def _fibonacci_sphere(k: int) -> np.ndarray:
    i = np.arange(k) + 0.5
    z = 1.0 - 2.0 * i / k
    rxy = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = i * _GOLDEN_ANGLE
    return np.column_stack([rxy * np.cos(phi), rxy * np.sin(phi), z])


def _largest_remainder(n: int, weights: np.ndarray) -> np.ndarray:
    raw = n * weights / weights.sum()
    counts = np.floor(raw).astype(int)
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[: n - counts.sum()]] += 1
    return counts


def _unit_ball_points(n: int, seed: int) -> np.ndarray:
    if n == 1:
        return np.zeros((1, 3))
    n_shells = max(1, int(round((3.0 * n / (4.0 * np.pi)) ** (1.0 / 3.0))))
    outer = np.arange(1, n_shells + 1, dtype=float)
    counts = _largest_remainder(n, outer ** 3 - (outer - 1.0) ** 3)
    counts = counts[counts > 0]
    rng = np.random.default_rng(seed)
    cum = np.concatenate([[0], np.cumsum(counts)])
    pts = []
    for s, k in enumerate(counts):
        ra, rb = (cum[s] / n) ** (1.0 / 3.0), (cum[s + 1] / n) ** (1.0 / 3.0)
        r_eff = np.sqrt(0.6 * (rb ** 5 - ra ** 5) / (rb ** 3 - ra ** 3))
        rot = Rotation.random(random_state=rng).as_matrix()
        pts.append(r_eff * _fibonacci_sphere(int(k)) @ rot.T)
    return np.vstack(pts)


def discretize_primitive(shape: str, params: dict, n_points: int, seed: int = 0,
                         label: str | None = None) -> PointMassBody:
    """Build a point cloud for a primitive shape.

    Parameters
    ----------
    shape : str
        ``"sphere"`` (``radius``, ``mass``), ``"dumbbell"`` (``separation``,
        ``mass``, optional ``lobe_radius``; lobes on the x axis),
        ``"triaxial-ellipsoid"`` (``semi_axes``, ``mass``) or ``"ring"``
        (``radius``, ``mass``; equal points in the xy plane).
    params : dict
        Lengths in metres, mass in kilograms.
    n_points : int
        Number of points; even for dumbbells.
    seed : int
        Seeds the shell rotations of the ball placement.
    """
    if int(n_points) < 1:
        raise InvalidParameterError("n_points must be >= 1")
    n = int(n_points)
    label = shape if label is None else label

    if shape == "sphere":
        radius, mass = _positive(params, "radius", "mass")
        pts = float(radius) * _unit_ball_points(n, seed)
        prof = DensityProfile(np.full(3, float(radius)), float(mass))
        return PointMassBody(np.full(n, float(mass) / n), pts, label, prof)

    if shape == "triaxial-ellipsoid":
        axes, mass = _positive(params, "semi_axes", "mass")
        if axes.shape != (3,):
            raise InvalidParameterError("semi_axes needs three lengths")
        pts = _unit_ball_points(n, seed) * axes
        prof = DensityProfile(axes, float(mass))
        return PointMassBody(np.full(n, float(mass) / n), pts, label, prof)

    if shape == "dumbbell":
        sep, mass = _positive(params, "separation", "mass")
        lobe_r = float(params.get("lobe_radius", 0.0))
        if n % 2:
            raise InvalidParameterError("dumbbell needs an even n_points")
        if lobe_r < 0.0 or (n > 2 and lobe_r <= 0.0):
            raise InvalidParameterError("lobe_radius must be positive when lobes have several points")
        half = n // 2
        lobe = lobe_r * _unit_ball_points(half, seed) if half > 1 else np.zeros((1, 3))
        off = np.array([float(sep) / 2.0, 0.0, 0.0])
        pts = np.vstack([lobe + off, lobe - off])
        return PointMassBody(np.full(n, float(mass) / n), pts, label)

    if shape == "ring":
        radius, mass = _positive(params, "radius", "mass")
        phi = 2.0 * np.pi * np.arange(n) / n
        pts = float(radius) * np.column_stack([np.cos(phi), np.sin(phi), np.zeros(n)])
        return PointMassBody(np.full(n, float(mass) / n), pts, label)

    raise InvalidParameterError(f"unknown shape {shape!r}; expected one of {SHAPES}")


# --------------------------------------------------------------------------
# queries
# --------------------------------------------------------------------------

def inertia_tensor(body: PointMassBody, axis=(0.0, 0.0, 1.0)) -> InertiaData:
    x, m = body.positions, body.masses
    r2 = np.einsum("ij,ij->i", x, x)
    tensor = np.sum(m * r2) * np.eye(3) - np.einsum("i,ij,ik->jk", m, x, x)
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    return InertiaData(tensor, float(n @ tensor @ n), n)


def rotate_body(body: PointMassBody, spin: SpinConfig) -> PointMassBody:
    rot = spin.matrix
    prof = body.profile.rotated(rot) if body.profile is not None else None
    return PointMassBody(body.masses, body.positions @ rot.T, body.label, prof)


def mass_current_samples(body: PointMassBody, spin: SpinConfig):
    """Point-supported rigid-rotation current ``J_i = m_i (Omega n) x x_i``.

    Returns
    -------
    positions : (N, 3) ndarray
    currents : (N, 3) ndarray, kg m / s per point
    """
    j = body.masses[:, None] * np.cross(spin.omega, body.positions)
    return body.positions.copy(), j


def total_angular_momentum(positions, currents) -> np.ndarray:
    return np.sum(np.cross(positions, currents), axis=0)


def is_symmetric_under(body: PointMassBody, spin: SpinConfig, tol: float | None = None) -> bool:
    """Whether rotating ``body`` by ``spin`` reproduces its point multiset.

    Greedy matching: each rotated point (in storage order) is paired with the
    nearest still-unmatched original point of equal mass; the test fails as
    soon as that distance exceeds ``tol`` (default ``1e-9`` body radii).
    """
    if tol is None:
        tol = 1e-9 * body.radius if body.radius > 0 else 1e-12
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")
    rotated = body.positions @ spin.matrix.T
    free = np.ones(body.n_points, dtype=bool)
    for p, m in zip(rotated, body.masses):
        cand = np.flatnonzero(free & np.isclose(body.masses, m, rtol=1e-12, atol=0.0))
        if cand.size == 0:
            return False
        d = np.linalg.norm(body.positions[cand] - p, axis=1)
        k = int(np.argmin(d))
        if d[k] > tol:
            return False
        free[cand[k]] = False
    return True


# --------------------------------------------------------------------------
# I/O
# --------------------------------------------------------------------------

def write_body_csv(body: PointMassBody, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mass_kg", "x_m", "y_m", "z_m"])
        for m, x in zip(body.masses, body.positions):
            w.writerow([f"{m:.16e}"] + [f"{v:.16e}" for v in x])


def read_body_csv(path, label: str = "") -> PointMassBody:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:4] != ["mass_kg", "x_m", "y_m", "z_m"]:
        raise InvalidInputError(f"{path}: expected header mass_kg,x_m,y_m,z_m")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    return PointMassBody(data[:, 0], data[:, 1:4], label)
