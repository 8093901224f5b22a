"""
Noise correlators of the gravitoelectromagnetic potentials.

The white noises added to the four-potential have equal-time correlators
``D_A^{mu nu}(x, y)``.  We parametrise every block with one radial profile
``g(r)`` and a 4x4 dimensionless coupling matrix::

    D_A^{mu nu}(x, y) = (G hbar / c^2) * K^{mu nu} * g(|x - y|)

    K = [[kappa_tt, kappa_mix, kappa_mix, kappa_mix],
         [kappa_mix, kappa_rot, 0,         0        ],
         [kappa_mix, 0,         kappa_rot, 0        ],
         [kappa_mix, 0,         0,         kappa_rot]]

With ``kappa_tt = 1`` and the capped Coulomb profile ``g = 1/max(r, sigma)``
the tt block gives ``c^2 D_A^{tt} = G hbar / r``, i.e. the Diosi-Penrose
generator.  Sharing the prefactor across blocks makes the density,
current and mixed channel strengths scale as ``m^2 c^2 : m^2 v^2 : m^2 v c``
for equal couplings.  ``K`` is positive semi-definite iff
``kappa_rot >= 0`` and ``kappa_tt * kappa_rot >= 3 kappa_mix^2``.

Every block of ``D_A`` carries units of m^2 s^-1 (per point-supported test
function).  Sampled matrices are ordered ``index = mu * N + s``.

Caveat: the capped Coulomb profile is not a positive-definite function
(its Fourier transform is ``4 pi sin(k sigma) / (sigma k^3)``), so point
sets can produce an indefinite tt block, even when every pair is farther
apart than ``sigma``.  The certificate in
:class:`SmearedKernelMatrix` reports this.  The ``"gaussian"`` family,
``erf(r / 2 sigma) / r``, is positive definite for every point set.
"""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import lsqr

from . import _accel
from .constants import C, G, HBAR
from .errors import InvalidInputError, InvalidParameterError, RankDeficiencyError, UnsupportedKernelError

FAMILIES = {"regularized-coulomb": _accel.COULOMB, "gaussian": _accel.GAUSSIAN,
            "tabulated": _accel.TABULATED}
PSD_RTOL = 1e-10


class NonPSDKernelWarning(UserWarning):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the noise correlators.

    ``table_r`` / ``table_g`` define the tabulated profile (``g`` in 1/m).
    The physical constants are fields so that reduced-unit test models can
    be built; they default to SI values.
    """

    family: str = "regularized-coulomb"
    sigma: float = 1e-7
    kappa_tt: float = 1.0
    kappa_rot: float = 0.0
    kappa_mix: float = 0.0
    G: float = G
    c: float = C
    hbar: float = HBAR
    table_r: tuple = ()
    table_g: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnsupportedKernelError(f"unknown kernel family {self.family!r}")
        if not self.sigma > 0:
            raise InvalidParameterError("sigma must be positive")
        if self.kappa_rot < 0:
            raise InvalidParameterError("kappa_rot must be >= 0")
        if min(self.G, self.c, self.hbar) <= 0:
            raise InvalidParameterError("physical constants must be positive")
        if self.family == "tabulated":
            r = np.asarray(self.table_r, dtype=float)
            if r.size < 2 or r.size != len(self.table_g) or np.any(np.diff(r) <= 0):
                raise InvalidParameterError("tabulated kernel needs increasing table_r matching table_g")

    @property
    def code(self) -> int:
        return FAMILIES[self.family]

    @property
    def prefactor(self) -> float:
        """``G hbar / c^2`` shared by every block."""
        return self.G * self.hbar / self.c ** 2

    @property
    def coupling(self) -> np.ndarray:
        k = np.diag([self.kappa_tt, self.kappa_rot, self.kappa_rot, self.kappa_rot]).astype(float)
        k[0, 1:] = k[1:, 0] = self.kappa_mix
        return k

    def tables(self):
        if self.family != "tabulated":
            return None, None
        return np.asarray(self.table_r, float), np.asarray(self.table_g, float)

    def profile(self, r) -> np.ndarray:
        """Radial profile ``g(r)`` in 1/m."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        zero = np.zeros((1, 3))
        pts = np.column_stack([r, np.zeros_like(r), np.zeros_like(r)])
        return _accel.radial_matrix(pts, zero, self.sigma, self.code, *self.tables())[:, 0]

    def profile_matrix(self, pa, pb=None) -> np.ndarray:
        pb = pa if pb is None else pb
        return _accel.radial_matrix(pa, pb, self.sigma, self.code, *self.tables())

    def to_dict(self) -> dict:
        d = {"family": self.family, "sigma_m": self.sigma, "kappa_tt": self.kappa_tt,
             "kappa_rot": self.kappa_rot, "kappa_mix": self.kappa_mix}
        if self.family == "tabulated":
            d["table_r_m"] = list(self.table_r)
            d["table_g_per_m"] = list(self.table_g)
        return d


def eval_kernel_A(spec: KernelSpec, mu: int, nu: int, x, y) -> float:
    """Correlator ``D_A^{mu nu}(x, y)`` with index 0 for t and 1..3 for x, y, z."""
    if spec.family not in FAMILIES:
        raise UnsupportedKernelError(spec.family)
    if not (0 <= mu <= 3 and 0 <= nu <= 3):
        raise InvalidParameterError("indices must lie in 0..3")
    r = np.linalg.norm(np.asarray(x, float) - np.asarray(y, float))
    return float(spec.prefactor * spec.coupling[mu, nu] * spec.profile(r)[0])


# --------------------------------------------------------------------------
# sampled matrices
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SmearedKernelMatrix:
    """Symmetric ``4N x 4N`` noise matrix with its PSD certificate."""

    matrix: np.ndarray
    n_points: int
    hbar: float = HBAR
    kind: str = "D_A"
    min_eig: float = field(init=False)
    max_eig: float = field(init=False)
    rank: int = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (4 * self.n_points, 4 * self.n_points):
            raise InvalidInputError("matrix must be 4N x 4N")
        if not np.allclose(m, m.T, rtol=1e-12, atol=1e-14 * np.max(np.abs(m), initial=0.0)):
            raise InvalidInputError("kernel matrix must be symmetric")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        ev = np.linalg.eigvalsh(m)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "min_eig", float(ev[0]))
        object.__setattr__(self, "max_eig", float(ev[-1]))
        scale = max(abs(ev[0]), abs(ev[-1]))
        object.__setattr__(self, "rank", int(np.sum(ev > 1e-12 * scale)) if scale > 0 else 0)

    @property
    def dim(self) -> int:
        return 4 * self.n_points

    @property
    def psd(self) -> bool:
        return self.min_eig >= -PSD_RTOL * max(self.max_eig, 0.0)

    @property
    def status(self) -> str:
        return "ok" if self.psd else "warning"

    def block(self, mu: int, nu: int) -> np.ndarray:
        n = self.n_points
        return self.matrix[mu * n:(mu + 1) * n, nu * n:(nu + 1) * n]

    def certificate(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "min_eig": self.min_eig,
                "max_eig": self.max_eig, "rank": self.rank, "psd": self.psd, "status": self.status}

    def to_csv(self, path) -> None:
        unit = "m^2 s^-1" if self.kind == "D_A" else "kg^2 m^-2 s^-1"
        with open(path, "w", newline="") as fh:
            fh.write(f"# {self.kind} units={unit} order=mu*N+s N={self.n_points}\n")
            w = csv.writer(fh)
            for row in self.matrix:
                w.writerow([f"{v:.16e}" for v in row])


def assemble_kernel_matrix(spec: KernelSpec, points) -> SmearedKernelMatrix:
    """Sample ``D_A`` on point-supported test functions at ``points``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] < 1:
        raise InvalidInputError("need at least one point")
    g = spec.profile_matrix(pts)
    mat = spec.prefactor * np.kron(spec.coupling, g)
    out = SmearedKernelMatrix(mat, pts.shape[0], spec.hbar)
    if not out.psd:
        warnings.warn(f"D_A is not PSD (min eig {out.min_eig:.3e}, max {out.max_eig:.3e})",
                      NonPSDKernelWarning, stacklevel=2)
    return out


def _support(d_a: SmearedKernelMatrix, rcond: float = 1e-12):
    lam, vec = np.linalg.eigh(d_a.matrix)
    keep = lam > rcond * max(lam[-1], 0.0)
    return lam[keep], vec[:, keep]


def saturating_DJ(d_a: SmearedKernelMatrix, rcond: float = 1e-12) -> SmearedKernelMatrix:
    """Smallest diffusion kernel allowed by the trade-off, ``(hbar^2/4) D_A^+``.

    The pseudo-inverse discards eigenvalues below ``rcond * max_eig``;
    the trade-off is then meaningful on the support of ``D_A`` only (see
    :func:`check_tradeoff`).
    """
    if not d_a.psd:
        raise InvalidInputError("D_A must be positive semi-definite")
    lam, vec = _support(d_a, rcond)
    if lam.size == 0:
        raise RankDeficiencyError("D_A vanishes; no diffusion kernel is defined")
    dj = (d_a.hbar ** 2 / 4.0) * (vec / lam) @ vec.T
    return SmearedKernelMatrix(dj, d_a.n_points, d_a.hbar, kind="D_J")


@dataclass(frozen=True)
class TradeoffResult:
    passed: bool
    margin: float
    support_rank: int


def check_tradeoff(d_a: SmearedKernelMatrix, d_j: SmearedKernelMatrix,
                   rcond: float = 1e-12) -> TradeoffResult:
    """Check ``D_A^{1/2} D_J D_A^{1/2} >= hbar^2/4`` on the support of ``D_A``.

    ``margin`` is the smallest eigenvalue minus ``hbar^2/4``; the check
    passes when ``margin >= -1e-10 hbar^2/4``.
    """
    if d_a.dim != d_j.dim:
        raise InvalidInputError("D_A and D_J dimensions differ")
    lam, vec = _support(d_a, rcond)
    root = np.sqrt(lam)
    m = root[:, None] * (vec.T @ d_j.matrix @ vec) * root[None, :]
    q = d_a.hbar ** 2 / 4.0
    margin = float(np.linalg.eigvalsh(0.5 * (m + m.T))[0] - q) if lam.size else 0.0
    return TradeoffResult(margin >= -1e-10 * q, margin, int(lam.size))


# --------------------------------------------------------------------------
# harmonic-gauge residual of a sampled noise realisation
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridNoise:
    """Noise four-potential on a regular space-time grid.

    ``a_t`` has shape ``(nt, nx, ny, nz)``, ``a_vec`` has ``(3, nt, nx, ny, nz)``.
    """

    a_t: np.ndarray
    a_vec: np.ndarray
    dt: float
    spacing: tuple

    def __post_init__(self):
        a_t = np.asarray(self.a_t, float)
        if a_t.ndim != 4 or min(a_t.shape) < 2:
            raise InvalidInputError("grid needs >= 2 nodes along time and each spatial axis")
        if np.shape(self.a_vec) != (3,) + a_t.shape:
            raise InvalidInputError("a_vec must have shape (3,) + a_t.shape")
        if self.dt <= 0 or len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise InvalidInputError("grid steps must be positive")


@dataclass(frozen=True)
class NoiseGaugeResidual:
    residual_norm: float
    max_abs: float


def _grad_1d(n: int, h: float) -> sp.csr_matrix:
    # identical stencil to np.gradient(edge_order=1)
    rows, cols, vals = [0, 0], [0, 1], [-1.0 / h, 1.0 / h]
    for i in range(1, n - 1):
        rows += [i, i]
        cols += [i - 1, i + 1]
        vals += [-0.5 / h, 0.5 / h]
    rows += [n - 1, n - 1]
    cols += [n - 2, n - 1]
    vals += [-1.0 / h, 1.0 / h]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def gauge_operator(shape, dt: float, spacing) -> sp.csr_matrix:
    """Sparse map ``(a_t, a_x, a_y, a_z) -> d_t a_t + div(a_vec) / 4`` on flattened grids."""
    steps = (dt,) + tuple(spacing)
    blocks = []
    for axis in range(4):
        mats = [sp.identity(n, format="csr") for n in shape]
        mats[axis] = _grad_1d(shape[axis], steps[axis])
        op = mats[0]
        for m in mats[1:]:
            op = sp.kron(op, m, format="csr")
        blocks.append(op if axis == 0 else 0.25 * op)
    return sp.hstack(blocks, format="csr")


def _residual_field(noise: GridNoise) -> np.ndarray:
    r = np.gradient(noise.a_t, noise.dt, axis=0)
    for k in range(3):
        r = r + 0.25 * np.gradient(noise.a_vec[k], noise.spacing[k], axis=k + 1)
    return r


def gauge_residual(noise: GridNoise) -> NoiseGaugeResidual:
    """Discrete ``d_t A^t + div(A)/4`` with central differences.

    The norm is ``sqrt(sum r^2 * dt * dx * dy * dz)`` over all grid nodes.
    """
    r = _residual_field(noise)
    vol = noise.dt * float(np.prod(noise.spacing))
    return NoiseGaugeResidual(float(np.sqrt(np.sum(r * r) * vol)), float(np.max(np.abs(r))))


def project_gauge(noise: GridNoise) -> GridNoise:
    """Orthogonal projection of a realisation onto the discrete gauge-constraint kernel."""
    shape = noise.a_t.shape
    d = gauge_operator(shape, noise.dt, noise.spacing)
    a = np.concatenate([np.ravel(noise.a_t), np.ravel(noise.a_vec)])
    if d.shape[0] <= 4000:
        y = np.linalg.lstsq(d.T.toarray(), a, rcond=None)[0]
    else:
        y = lsqr(d.T, a, atol=1e-15, btol=1e-15, iter_lim=20 * d.shape[0])[0]
    p = a - d.T @ y
    n = a.size // 4
    return GridNoise(p[:n].reshape(shape), p[n:].reshape((3,) + shape), noise.dt, noise.spacing)


def sample_grid_noise(shape, dt: float, spacing, amplitude: float = 1.0, seed: int = 0) -> GridNoise:
    """Unconstrained white-noise realisation of the four-potential on a grid."""
    rng = np.random.default_rng(seed)
    a_t = amplitude * rng.standard_normal(shape)
    a_vec = amplitude * rng.standard_normal((3,) + tuple(shape))
    return GridNoise(a_t, a_vec, dt, tuple(spacing))
