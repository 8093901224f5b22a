"""
Gravitoelectromagnetic fields of rotating bodies and order-of-magnitude estimates.

Static potentials are Green-function sums over the point cloud::

    phi(x) = -G sum_i m_i / |x - x_i|
    A(x)   = -(G / c^2) sum_i J_i / |x - x_i|

The gravitomagnetic field is the curl of the rescaled spatial potential
``4 A``, ``B = 4 curl A``.  Far from the body ``A -> -(G / 2c^2) (L x x) / r^3``,
so ``B`` reduces exactly to the dipole form::

    B = (2 G / c^2 r^3) [L - 3 (L . r^) r^]

with vector potential ``A_dip = -(2 G / c^2) (L x x) / r^3 = 4 A``.  The overall
sign and normalisation of ``A`` are convention dependent; only ``B`` is
pinned.

CODATA constants are listed in :mod:`pncollapse.constants`.
"""

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from . import _accel
from .constants import C, G, HBAR, M_SUN
from .core_model import PointMassBody, SpinConfig, mass_current_samples, total_angular_momentum
from .errors import InvalidInputError, SingularInputError


class NearFieldWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class GemField:
    position: np.ndarray
    phi: float
    A: np.ndarray
    B: np.ndarray


def _green_A(body, spin, pts, G_, c_):
    x, j = mass_current_samples(body, spin)
    return -(G_ / c_ ** 2) * _accel.green_sum(x, j, pts)


def curl_fd(fn, x, h: float) -> np.ndarray:
    """Central-difference curl of a vector field ``fn: (M, 3) -> (M, 3)`` at ``x``."""
    x = np.asarray(x, dtype=float)
    e = np.eye(3) * h
    pts = np.concatenate([x + e, x - e])
    v = fn(pts)
    d = (v[:3] - v[3:]) / (2 * h)  # d[i, k] = d_i A_k
    return np.array([d[1, 2] - d[2, 1], d[2, 0] - d[0, 2], d[0, 1] - d[1, 0]])


def gravito_potentials(body: PointMassBody, spin: SpinConfig, x, sigma: float = 0.0,
                       h: float | None = None, G_: float = G, c_: float = C) -> GemField:
    """``phi``, ``A`` and ``B`` of a rigidly spinning body at ``x``.

    ``B = 4 curl A`` is evaluated by central differences with step
    ``h = 1e-4 |x|`` unless given.  Points within ``max(sigma, h)`` of a
    source point trigger a :class:`NearFieldWarning`.
    """
    x = np.asarray(x, dtype=float)
    h = 1e-4 * np.linalg.norm(x) if h is None else h
    if h <= 0:
        raise SingularInputError("finite-difference step must be positive (x at the origin?)")
    dmin = np.min(np.linalg.norm(body.positions - x, axis=1))
    if dmin <= max(sigma, 2 * h):
        warnings.warn(f"field point within {dmin:.3e} m of a source point", NearFieldWarning, stacklevel=2)
    phi = -G_ * _accel.green_sum(body.positions, body.masses, x[None])[0, 0]
    a = _green_A(body, spin, x[None], G_, c_)[0]
    b = 4.0 * curl_fd(lambda p: _green_A(body, spin, p, G_, c_), x, h)
    return GemField(x, float(phi), a, b)


def dipole_field(L, x, G_: float = G, c_: float = C) -> np.ndarray:
    """``B = (2G / c^2 |x|^3) [L - 3 (L . x^) x^]``; accepts ``x`` of shape (3,) or (M, 3)."""
    L = np.asarray(L, dtype=float)
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(r == 0):
        raise SingularInputError("dipole field is singular at the origin")
    u = x / r
    return 2 * G_ / (c_ ** 2 * r ** 3) * (L - 3 * np.sum(L * u, axis=-1, keepdims=True) * u)


def dipole_potential(L, x, G_: float = G, c_: float = C) -> np.ndarray:
    """Vector potential ``-(2G / c^2) (L x x) / |x|^3`` whose curl is :func:`dipole_field`."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(r == 0):
        raise SingularInputError("dipole potential is singular at the origin")
    return -2 * G_ / c_ ** 2 * np.cross(np.asarray(L, dtype=float), x) / r ** 3


# --------------------------------------------------------------------------
# Sagnac phase
# --------------------------------------------------------------------------

def _plane(loop):
    p = np.asarray(loop, dtype=float)
    if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] < 3:
        raise InvalidInputError("loop must be at least three 3-vectors")
    c = p.mean(axis=0)
    _, s, vt = np.linalg.svd(p - c)
    if s[2] > 1e-9 * s[0]:
        raise InvalidInputError("loop is not planar")
    n = vt[2]
    # orient n with the loop circulation (right-hand rule)
    area = 0.5 * np.sum(np.cross(p - c, np.roll(p, -1, axis=0) - c), axis=0)
    if area @ n < 0:
        n = -n
    return p, c, n


@dataclass(frozen=True)
class SagnacResult:
    line_integral: float
    surface_integral: float

    @property
    def relative_gap(self) -> float:
        scale = max(abs(self.line_integral), abs(self.surface_integral), 1e-300)
        return abs(self.line_integral - self.surface_integral) / scale


def _sources(source, G_, c_):
    """Angular momentum and source radius (zero for a bare dipole)."""
    if isinstance(source, tuple):
        body, spin = source
        x, j = mass_current_samples(body, spin)
        L = total_angular_momentum(x, j)
        return L, body.radius
    L = np.asarray(source, dtype=float)
    if L.shape != (3,):
        raise InvalidInputError("source must be an angular momentum 3-vector or (body, spin)")
    return L, 0.0


def sagnac_phase(loop, source, n_line: int = 4, n_u: int = 3, n_alpha: int = 48,
                 G_: float = G, c_: float = C) -> SagnacResult:
    """Loop integral of the dipole potential and flux of the dipole field.

    Parameters
    ----------
    loop : (P, 3) array
        Vertices of a closed planar polygon (last vertex joins the first).
    source : 3-vector or (PointMassBody, SpinConfig)
        Angular momentum of the source; a body is reduced to its total ``L``
        and the loop must stay farther than ten body radii from the origin.
    n_line, n_u, n_alpha : int
        Gauss-Legendre orders per segment (line), per segment along the loop
        and along the dome meridian (surface).

    Notes
    -----
    The surface is the dome ``S(u, a) = c + sin(a) (P(u) - c) + rho cos(a) n``,
    ``a`` in ``[0, pi/2]``, with ``c`` the centroid, ``n`` the unit normal
    oriented with the circulation and ``rho`` the mean vertex distance from
    ``c``.  It spans the loop without crossing a source at the centroid; for a
    circular loop it is a hemisphere.
    """
    p, c, n = _plane(loop)
    L, radius = _sources(source, G_, c_)
    if radius > 0 and np.min(np.linalg.norm(p, axis=1)) <= 10 * radius:
        raise InvalidInputError("loop must stay beyond ten source radii for the dipole model")
    q = np.roll(p, -1, axis=0)
    seg = q - p

    t, w = roots_legendre(n_line)
    t, w = 0.5 * (t + 1), 0.5 * w
    pts = p[:, None, :] + t[None, :, None] * seg[:, None, :]
    a = dipole_potential(L, pts.reshape(-1, 3), G_, c_).reshape(pts.shape)
    line = float(np.einsum("k,sk->", w, np.einsum("skc,sc->sk", a, seg)))

    rho = float(np.mean(np.linalg.norm(p - c, axis=1)))
    tu, wu = roots_legendre(n_u)
    tu, wu = 0.5 * (tu + 1), 0.5 * wu
    ta, wa = roots_legendre(n_alpha)
    al, wa = 0.25 * np.pi * (ta + 1), 0.25 * np.pi * wa
    # boundary point P and its derivative along each segment (per unit segment parameter)
    bp = p[:, None, :] + tu[None, :, None] * seg[:, None, :]          # (S, U, 3)
    sa, ca = np.sin(al), np.cos(al)
    surf = (c + sa[None, None, :, None] * (bp[:, :, None, :] - c)
            + rho * ca[None, None, :, None] * n)                      # (S, U, A, 3)
    d_u = sa[None, None, :, None] * seg[:, None, None, :]
    d_a = (ca[None, None, :, None] * (bp[:, :, None, :] - c) - rho * sa[None, None, :, None] * n)
    normal = np.cross(d_a, d_u)  # outward on the dome, matching the circulation
    bf = dipole_field(L, surf.reshape(-1, 3), G_, c_).reshape(surf.shape)
    flux = np.einsum("u,a,suac->", wu, wa, bf * normal)
    return SagnacResult(line, float(flux))


def circular_loop(radius: float, n_segments: int, center=(0.0, 0.0, 0.0), normal=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Regular polygon inscribed in a circle, counter-clockwise about ``normal``."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    e1 = np.cross(n, [1.0, 0.0, 0.0])
    if np.linalg.norm(e1) < 1e-8:
        e1 = np.cross(n, [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    phi = 2 * np.pi * np.arange(n_segments) / n_segments
    return np.asarray(center, float) + radius * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)


# --------------------------------------------------------------------------
# order-of-magnitude estimates
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimateRow:
    """One estimate with its SI inputs and the order of magnitude quoted for it."""

    name: str
    inputs: dict
    value: float
    quoted_order: float = float("nan")

    @property
    def log10(self) -> float:
        return float(np.log10(self.value)) if self.value > 0 else float("-inf")


@dataclass(frozen=True)
class ChannelScalings:
    v_over_c: float
    rot_suppression: float
    mixed_suppression: float
    rows: list = field(default_factory=list)


def channel_scalings(M: float, R: float, Omega: float, c_: float = C) -> ChannelScalings:
    """Relative size of current and mixed channels versus the density channel.

    The strengths go as ``m^2 c^2 : m^2 v^2 : m^2 v c`` with ``v = Omega R``.
    """
    if M <= 0 or R <= 0 or Omega < 0:
        raise InvalidInputError("M, R must be positive and Omega non-negative")
    v = Omega * R / c_
    inputs = {"M_kg": M, "R_m": R, "Omega_rad_per_s": Omega}
    rows = [EstimateRow("v_over_c", inputs, v), EstimateRow("rot_suppression", inputs, v * v),
            EstimateRow("mixed_suppression", inputs, v)]
    return ChannelScalings(v, v * v, v, rows)


def entangling_rate(L: float, R: float, G_: float = G, c_: float = C, hbar: float = HBAR) -> float:
    """``G L^2 / (hbar c^2 R^3)`` in 1/s."""
    return G_ * L ** 2 / (hbar * c_ ** 2 * R ** 3)


def pulsar_rot_rate(M: float, R: float, nu: float, G_: float = G, c_: float = C, hbar: float = HBAR) -> float:
    """Entangling rate of a uniform sphere spinning at ``nu`` Hz.

    ``L = 2 pi I nu`` with ``I = 2 M R^2 / 5`` gives
    ``(16 pi^2 / 25) G M^2 R nu^2 / (hbar c^2)``.
    """
    L = 2 * np.pi * 0.4 * M * R ** 2 * nu
    return entangling_rate(L, R, G_, c_, hbar)


def dp_selfenergy_rate(M: float, R: float, d: float, G_: float = G, hbar: float = HBAR) -> float:
    """``G M^2 d^2 / (hbar R^3)``; valid for displacements ``d << R``."""
    if d >= R:
        warnings.warn("self-energy scaling assumes d << R", RuntimeWarning, stacklevel=2)
    return G_ * M ** 2 * d ** 2 / (hbar * R ** 3)


def crossover_distance(M: float, R: float, nu: float, G_: float = G, c_: float = C, hbar: float = HBAR) -> float:
    """Displacement at which the self-energy rate equals the rotational rate."""
    return float(np.sqrt(pulsar_rot_rate(M, R, nu, G_, c_, hbar) * hbar * R ** 3 / (G_ * M ** 2)))


PULSAR = {"M_kg": 2 * M_SUN, "R_m": 1e4, "nu_Hz": 700.0}
NANOROTOR = {"M_kg": 1.0, "R_m": 85e-9, "Omega_rad_per_s": 3.8e10}


def estimate_table(pulsar: dict = PULSAR, rotor: dict = NANOROTOR) -> list:
    """All order-of-magnitude rows with their quoted magnitudes."""
    M, R, nu = pulsar["M_kg"], pulsar["R_m"], pulsar["nu_Hz"]
    rot = channel_scalings(rotor["M_kg"], rotor["R_m"], rotor["Omega_rad_per_s"])
    psr = channel_scalings(M, R, 2 * np.pi * nu)
    d_x = crossover_distance(M, R, nu)
    return [
        EstimateRow("pulsar_rot_rate", dict(pulsar), pulsar_rot_rate(M, R, nu), 1e78),
        EstimateRow("dp_selfenergy_rate_d1m", {"M_kg": M, "R_m": R, "d_m": 1.0},
                    dp_selfenergy_rate(M, R, 1.0), 1e73),
        EstimateRow("crossover_distance", dict(pulsar), d_x, 10 ** 2.5),
        EstimateRow("nanorotor_v_over_c", dict(rotor), rot.v_over_c, 1.08e-5),
        EstimateRow("nanorotor_rot_suppression", dict(rotor), rot.rot_suppression, 1e-10),
        EstimateRow("nanorotor_mixed_suppression", dict(rotor), rot.mixed_suppression, 1e-5),
        EstimateRow("pulsar_v_over_c", dict(pulsar), psr.v_over_c, 0.147),
    ]


def write_estimates_csv(rows, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["name", "inputs", "value", "log10", "quoted_order"])
        for r in rows:
            w.writerow([r.name, json.dumps(r.inputs, sort_keys=True), f"{r.value:.16e}",
                        f"{r.log10:.16e}", f"{r.quoted_order:.16e}"])
