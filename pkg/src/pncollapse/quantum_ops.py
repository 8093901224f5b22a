"""
Finite-dimensional quantum representations of a rigid rotor.

Two kinds of Hilbert space are used:

* ``spin-rep`` -- the spin-``j`` irrep, basis ``|j, m>`` ordered
  ``m = j, j-1, ..., -j``;
* ``orientation-basis`` -- one basis vector per orientation of a reference
  body, treated as exactly orthonormal.

The mass-density operator is diagonal in the orientation basis with entries
given by binning each rotated body on a shared cubic grid.  The mass-current
operator of a rigid rotor is linear in the angular momentum,
``J_k(x) = sum_p T_kp(x) L_p`` with the classical dressing
``T_kp(x) = m(x) eps_{kpj} x_j / I`` (or ``m(x) (n x x)_k n_p / I`` for a rotor
locked to spin about ``n``).
"""

import csv
from dataclasses import dataclass

import numpy as np

from .constants import HBAR
from .core_model import PointMassBody, SpinConfig, rotate_body, rotation_matrix
from .errors import InvalidInputError, InvalidParameterError

_EPS = np.zeros((3, 3, 3))
_EPS[0, 1, 2] = _EPS[1, 2, 0] = _EPS[2, 0, 1] = 1.0
_EPS[0, 2, 1] = _EPS[2, 1, 0] = _EPS[1, 0, 2] = -1.0


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense operator with a Hermiticity flag checked on construction."""

    data: np.ndarray
    hermitian: bool = False
    label: str = ""

    def __post_init__(self):
        a = np.array(self.data, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidInputError("operator must be a square matrix")
        if self.hermitian:
            scale = max(np.linalg.norm(a), 1e-300)
            if np.linalg.norm(a - a.conj().T) > 1e-12 * scale:
                raise InvalidInputError(f"operator {self.label!r} flagged Hermitian is not")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def to_csv(self, path) -> None:
        write_operators_csv({self.label or "op": self}, path)


def write_operators_csv(ops: dict, path) -> None:
    """Write operators as ``name,row,col,real,imag`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "row", "col", "real", "imag"])
        for name, op in ops.items():
            a = np.asarray(op)
            for i in range(a.shape[0]):
                for j in range(a.shape[1]):
                    w.writerow([name, i, j, f"{a[i, j].real:.16e}", f"{a[i, j].imag:.16e}"])


def _check_j(j) -> float:
    twoj = 2.0 * float(j)
    if twoj < 1 or abs(twoj - round(twoj)) > 1e-12:
        raise InvalidParameterError(f"j must be a positive half-integer, got {j}")
    return round(twoj) / 2.0


def spin_dim(j) -> int:
    return int(round(2 * _check_j(j))) + 1


def angular_momentum_ops(j, hbar: float = HBAR):
    """Spin-``j`` matrices ``(Lx, Ly, Lz)`` in the ``Lz`` eigenbasis.

    Examples
    --------
    >>> lx, ly, lz = angular_momentum_ops(0.5, hbar=1.0)
    >>> np.real(np.diag(lz.data)).tolist()
    [0.5, -0.5]
    """
    j = _check_j(j)
    m = j - np.arange(int(round(2 * j)) + 1)
    # <m+1| L+ |m> = sqrt(j(j+1) - m(m+1))
    lp = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), k=1)
    lx = 0.5 * hbar * (lp + lp.T)
    ly = -0.5j * hbar * (lp - lp.T)
    lz = hbar * np.diag(m)
    return (OperatorMatrix(lx, True, "Lx"), OperatorMatrix(ly, True, "Ly"),
            OperatorMatrix(lz, True, "Lz"))


def _l_stack(j, hbar):
    return np.array([op.data for op in angular_momentum_ops(j, hbar)])


def rotation_operator(theta: float, axis, j, hbar: float = HBAR) -> OperatorMatrix:
    """``exp(-i theta n.L / hbar)``, evaluated through the spectrum of ``n.L``."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    gen = np.einsum("k,kij->ij", n, _l_stack(j, hbar))
    lam, vec = np.linalg.eigh(gen)
    u = (vec * np.exp(-1j * theta * lam / hbar)) @ vec.conj().T
    return OperatorMatrix(u, False, "R")


def rotated_L_closed_form(theta: float, axis=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Coefficients ``M`` with ``R^dag L_i R = sum_j M_ij L_j``.

    For a rotation about z this is ``Lx cos - Ly sin``, ``Ly cos + Lx sin``,
    ``Lz``; in general ``M`` is the classical rotation matrix ``R(theta, n)``.
    """
    return rotation_matrix(theta, axis)


def conjugated_L(theta: float, axis, j, hbar: float = HBAR) -> np.ndarray:
    """``R^dag L_k R`` for k = x, y, z by explicit conjugation, shape ``(3, d, d)``."""
    u = rotation_operator(theta, axis, j, hbar).data
    return np.einsum("ji,kjl,lm->kim", u.conj(), _l_stack(j, hbar), u)


# --------------------------------------------------------------------------
# currents
# --------------------------------------------------------------------------

def current_dressing(positions, masses, I: float, constrained_axis=None) -> np.ndarray:
    """Dressing tensors ``T[s, k, p]`` with ``J_k(x_s) = sum_p T[s, k, p] L_p``."""
    if not I > 0:
        raise InvalidParameterError("moment of inertia must be positive")
    x = np.asarray(positions, dtype=float).reshape(-1, 3)
    m = np.asarray(masses, dtype=float).reshape(-1)
    if constrained_axis is None:
        # (L ^ x)_k = eps_kij L_i x_j
        t = np.einsum("kij,sj->ski", _EPS, x)
    else:
        n = np.asarray(constrained_axis, dtype=float)
        n = n / np.linalg.norm(n)
        t = np.cross(n, x)[:, :, None] * n[None, None, :]
    return (m / I)[:, None, None] * t


@dataclass(frozen=True, eq=False)
class CurrentSamples:
    positions: np.ndarray
    dressing: np.ndarray
    ops: np.ndarray  # (N, 3, d, d)


def current_operator_samples(j, body: PointMassBody, I: float, constrained_axis=None,
                             hbar: float = HBAR) -> CurrentSamples:
    """``J_k(x_s) = m_s (L ^ x_s)_k / I`` at every point of ``body``."""
    t = current_dressing(body.positions, body.masses, I, constrained_axis)
    ops = np.einsum("skp,pij->skij", t, _l_stack(j, hbar))
    return CurrentSamples(body.positions.copy(), t, ops)


# --------------------------------------------------------------------------
# shared binning of rotated bodies
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CellMasses:
    """Mass of each orientation in each cell of a shared cubic grid.

    ``weights[i, s]`` is the mass orientation ``i`` places in the cell centred
    at ``centres[s]``.  Cells that are empty for every orientation are dropped.
    """

    centres: np.ndarray
    weights: np.ndarray
    cell: float

    @property
    def n_cells(self) -> int:
        return self.centres.shape[0]


def _profile_cells(bodies, h):
    ext = max(b.profile.extent for b in bodies)
    k = int(np.ceil(ext / h)) + 1
    ax = h * np.arange(-k, k + 1)
    grid = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    w = np.array([b.profile.density(grid) for b in bodies]) * h ** 3
    w *= np.array([b.total_mass for b in bodies])[:, None] / w.sum(axis=1, keepdims=True)
    return grid, w


def _point_cells(bodies, h):
    idx = [np.rint(b.positions / h).astype(np.int64) for b in bodies]
    keys, inv = np.unique(np.vstack(idx), axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    w = np.zeros((len(bodies), keys.shape[0]))
    start = 0
    for i, b in enumerate(bodies):
        np.add.at(w[i], inv[start:start + b.n_points], b.masses)
        start += b.n_points
    return keys * h, w


def shared_binning(bodies, cell: float) -> CellMasses:
    """Bin several placements of a body on one grid of spacing ``cell``.

    Cell centres sit at integer multiples of ``cell``.  Bodies carrying a
    uniform density profile are sampled from the profile at the cell centres
    (so a sphere yields identical cells for every orientation); bare point
    clouds are binned by rounding each position to the nearest centre.
    Each orientation's cell masses sum to its total mass.
    """
    if not bodies:
        raise InvalidInputError("need at least one body")
    if not cell > 0:
        raise InvalidParameterError("cell size must be positive")
    if all(b.profile is not None for b in bodies):
        centres, w = _profile_cells(bodies, cell)
    else:
        centres, w = _point_cells(bodies, cell)
    keep = np.any(w > 0, axis=0)
    return CellMasses(centres[keep], w[:, keep], float(cell))


@dataclass(frozen=True, eq=False)
class MomentSet:
    """Per-state first moments, operator-ordered covariances and cell masses.

    ``cov[i, a, b] = <L_a L_b>_i - <L_a>_i <L_b>_i`` is Hermitian in ``(a, b)``
    but generally complex off the diagonal.
    """

    first: np.ndarray
    cov: np.ndarray
    mass_means: np.ndarray | None = None


def moments_of_states(states, j, hbar: float = HBAR) -> MomentSet:
    """Moments of ``L`` for a list of spin-``j`` density matrices."""
    ls = _l_stack(j, hbar)
    first, cov = [], []
    for rho in states:
        rho = np.asarray(rho, dtype=complex)
        mean = np.real(np.einsum("kij,ji->k", ls, rho))
        second = np.einsum("aij,bjk,ki->ab", ls, ls, rho)
        first.append(mean)
        cov.append(second - np.outer(mean, mean))
    return MomentSet(np.array(first), np.array(cov))


@dataclass(frozen=True, eq=False)
class OrientationModel:
    """Orientation basis built from rotations of a reference body."""

    body: PointMassBody
    orientations: tuple
    cells: CellMasses
    mass_ops: np.ndarray  # (S, n, n) diagonal
    moments: MomentSet

    @property
    def dim(self) -> int:
        return len(self.orientations)


def orientation_operators(body: PointMassBody, orientations, cell: float,
                          spin_states=None, j=None, hbar: float = HBAR) -> OrientationModel:
    """Diagonal ``m(x_s)`` in the orientation basis plus per-orientation moments.

    Parameters
    ----------
    body : PointMassBody
        Reference body.
    orientations : sequence of SpinConfig
    cell : float
        Grid spacing of the shared binning.
    spin_states : sequence of density matrices, optional
        Spin-``j`` embedding of each orientation state, used to fill the
        angular-momentum moments.
    """
    orientations = tuple(orientations)
    if not orientations:
        raise InvalidInputError("orientation list is empty")
    bodies = [rotate_body(body, s) for s in orientations]
    cells = shared_binning(bodies, cell)
    n, s = cells.weights.shape
    ops = np.zeros((s, n, n))
    ops[:, np.arange(n), np.arange(n)] = cells.weights.T
    if spin_states is not None:
        if len(spin_states) != n or j is None:
            raise InvalidInputError("need one spin state per orientation and j")
        mom = moments_of_states(spin_states, j, hbar)
    else:
        mom = MomentSet(np.zeros((n, 3)), np.zeros((n, 3, 3), complex))
    mom = MomentSet(mom.first, mom.cov, cells.weights.copy())
    return OrientationModel(body, orientations, cells, ops, mom)


# --------------------------------------------------------------------------
# small rotor with density and current channels on one Hilbert space
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RotorModel:
    """Operators ``m(x_s)`` and ``J_k(x_s) = sum_p T[s,k,p] L_p`` on spin-``j``.

    Orientation ``i`` is the spin state ``|R_i>``; the density operator is
    ``m(x_s) = sum_i <m(x_s)>_i |R_i><R_i|``.  Used for cross-checks where all
    three channels act on the same space.
    """

    j: float
    hbar: float
    positions: np.ndarray
    mass_ops: np.ndarray
    dressing: np.ndarray
    L: np.ndarray
    basis: np.ndarray  # columns |R_i>
    inertia: float
    cell_masses: np.ndarray  # classical weights of J

    @property
    def dim(self) -> int:
        return self.L.shape[1]

    @property
    def current_ops(self) -> np.ndarray:
        return np.einsum("skp,pij->skij", self.dressing, self.L)


def dumbbell_rotor_model(separation: float, mass: float, cell: float, theta: float = np.pi / 2,
                         j=1, hbar: float = HBAR, constrained_axis=None) -> RotorModel:
    """Two-lobe dumbbell on the x axis in a superposition of two orientations.

    ``|R_1> = (|j> + |-j>) / sqrt(2)`` and ``|R_2> = R_z(theta) |R_1>``, which
    are orthogonal for ``theta = pi / 2j``.  Cells come from the shared binning
    of both placements; the classical weights in ``J`` are the
    orientation-averaged cell masses and ``I`` is the body's ``I_z``.
    """
    from .core_model import discretize_primitive, inertia_tensor

    body = discretize_primitive("dumbbell", {"separation": separation, "mass": mass}, 2)
    spins = (SpinConfig((0, 0, 1), 0.0), SpinConfig((0, 0, 1), theta))
    cells = shared_binning([rotate_body(body, s) for s in spins], cell)
    d = spin_dim(j)
    r1 = np.zeros(d, complex)
    r1[0] = r1[-1] = 1 / np.sqrt(2)
    r2 = rotation_operator(theta, (0, 0, 1), j, hbar).data @ r1
    basis = np.column_stack([r1, r2])
    if abs(np.vdot(r1, r2)) > 1e-12:
        raise InvalidParameterError("orientation states are not orthogonal for this angle")
    proj = np.einsum("ia,ja->aij", basis, basis.conj())
    mass_ops = np.einsum("as,aij->sij", cells.weights, proj)
    i_z = inertia_tensor(body).scalar_I
    w = cells.weights.mean(axis=0)
    t = current_dressing(cells.centres, w, i_z, constrained_axis)
    return RotorModel(float(_check_j(j)), hbar, cells.centres, mass_ops, t, _l_stack(j, hbar),
                      basis, i_z, w)
