"""
Closed-form off-diagonal decay rates for a two-orientation superposition.

For ``rho = sum sigma_ij |R_i><R_j|`` the coherence ``sigma_12`` decays at

* the density rate ``(c^2 / 2 hbar^2) sum_ss' D_tt(s, s') dm_s dm_s'`` with
  ``dm_s = <m(x_s)>_1 - <m(x_s)>_2`` on a shared grid, and
* the current rate ``sum_pq Gamma_pq [dL_p dL_q + Cov_1(L_p, L_q) + Cov_2(L_q, L_p)]``
  with ``Gamma`` from :func:`pncollapse.dynamics.assemble_rot_coeffs`.

A body that maps onto itself under the rotation has ``dm = 0`` in every cell,
so its density rate vanishes while the current rate, fed by the
angular-momentum covariances, generally does not.
"""

import csv
import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import _accel
from .constants import HBAR
from .core_model import PointMassBody, SpinConfig, discretize_primitive, inertia_tensor, rotate_body
from .dynamics import assemble_rot_coeffs
from .errors import InvalidInputError
from .noise_kernels import KernelSpec, NonPSDKernelWarning
from .quantum_ops import MomentSet, moments_of_states, rotated_L_closed_form, rotation_operator, \
    shared_binning


@dataclass(frozen=True, eq=False)
class OrientationPair:
    """Reference body in two orientations, optionally with spin-rep moments."""

    body: PointMassBody
    spin1: SpinConfig
    spin2: SpinConfig
    moments: MomentSet | None = None

    def bodies(self):
        return rotate_body(self.body, self.spin1), rotate_body(self.body, self.spin2)

    def swapped(self) -> "OrientationPair":
        mom = None
        if self.moments is not None:
            mom = MomentSet(self.moments.first[::-1], self.moments.cov[::-1],
                            None if self.moments.mass_means is None else self.moments.mass_means[::-1])
        return OrientationPair(self.body, self.spin2, self.spin1, mom)


@dataclass(frozen=True)
class RateReport:
    """Rates in 1/s; ``rot_shift`` is the imaginary part (a frequency shift)."""

    dp_rate: float
    rot_rate: float
    rot_shift: float
    rot_first_moment: float
    rot_covariance: float

    def to_json(self, path=None, **extra) -> str:
        s = json.dumps({**asdict(self), **extra}, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s)
        return s


def cell_mass_difference(pair: OrientationPair, cell: float):
    """Cell centres and ``<m>_1 - <m>_2`` on the shared grid."""
    if not cell > 0:
        raise InvalidInputError("cell size must be positive")
    b1, b2 = pair.bodies()
    if (b1.profile is None) != (b2.profile is None):
        raise InvalidInputError("orientations must share one binning scheme")
    cells = shared_binning([b1, b2], cell)
    return cells.centres, cells.weights[0] - cells.weights[1]


def dp_offdiag_rate(pair: OrientationPair, spec: KernelSpec, cell: float | None = None) -> float:
    """Density-channel decay rate of ``sigma_12`` (1/s).

    ``cell`` defaults to ``sigma / 2``.  The rate is a quadratic form in the
    cell-mass difference, non-negative whenever the radial profile is a
    positive-definite function (``"gaussian"``).  The capped Coulomb profile
    is not, and on grids finer than ``sigma`` it can return a small negative
    value; a :class:`NonPSDKernelWarning` is then emitted and the value is
    returned unchanged.
    """
    cell = spec.sigma / 2 if cell is None else cell
    centres, dm = cell_mass_difference(pair, cell)
    nz = dm != 0.0
    if not np.any(nz):
        return 0.0
    x, w = centres[nz], dm[nz]
    s = _accel.pair_sum(x, w, x, w, spec.sigma, spec.code, *spec.tables())
    rate = float(spec.c ** 2 / (2 * spec.hbar ** 2) * spec.prefactor * spec.kappa_tt * s)
    if rate < 0:
        warnings.warn(f"negative density rate {rate:.3e}/s: the {spec.family} profile is not "
                      "positive definite on this grid", NonPSDKernelWarning, stacklevel=2)
    return rate


def rot_rate_terms(gamma, moments: MomentSet):
    """First-moment and covariance parts of the current-channel rate."""
    if moments is None or len(moments.first) != 2:
        raise InvalidInputError("rotational rate needs moments for both orientations")
    d = moments.first[0] - moments.first[1]
    first = float(d @ gamma @ d)
    cov = complex(np.sum(gamma * moments.cov[0]) + np.sum(gamma * moments.cov[1].T))
    return first, cov


def rot_offdiag_rate(pair: OrientationPair, spec: KernelSpec, body: PointMassBody | None = None,
                     I: float | None = None, constrained_axis=None, cell: float | None = None) -> RateReport:
    """Full :class:`RateReport` for the pair.

    ``body`` supplies the classical weights of the current (default: the
    pair's body in its first orientation) and ``I`` defaults to its moment of
    inertia about the ``spin2`` axis.
    """
    if pair.moments is None:
        raise InvalidInputError("rotational rate needs per-orientation moments")
    dp = dp_offdiag_rate(pair, spec, cell)
    b = rotate_body(pair.body, pair.spin1) if body is None else body
    if I is None:
        I = inertia_tensor(b, pair.spin2.axis).scalar_I
    gamma = assemble_rot_coeffs(spec, b.positions, b.masses, I, constrained_axis)
    first, cov = rot_rate_terms(gamma, pair.moments)
    total = first + cov
    return RateReport(dp, float(total.real), float(total.imag), first, float(cov.real))


@dataclass(frozen=True, eq=False)
class SpinMoments:
    moments: MomentSet
    closed_form_discrepancy: float


def moments_from_spinrep(rho1, theta: float, j, axis=(0.0, 0.0, 1.0), hbar: float = HBAR) -> SpinMoments:
    """Moments of ``rho1`` and of ``R rho1 R^dag`` for ``R = exp(-i theta n.L / hbar)``.

    State 2 is evaluated in closed form (``<L_a>_2 = M_ab <L_b>_1`` and
    ``<L_a L_b>_2 = M_ac M_bd <L_c L_d>_1`` with ``M`` the classical rotation
    matrix) and by explicit conjugation; the largest difference is returned
    and must stay below ``1e-10 hbar^2``.
    """
    rho1 = np.asarray(rho1, dtype=complex)
    m1 = moments_of_states([rho1], j, hbar)
    mr = rotated_L_closed_form(theta, axis)
    f2 = mr @ m1.first[0]
    second1 = m1.cov[0] + np.outer(m1.first[0], m1.first[0])
    second2 = mr @ second1 @ mr.T
    c2 = second2 - np.outer(f2, f2)
    u = rotation_operator(theta, axis, j, hbar).data
    direct = moments_of_states([u @ rho1 @ u.conj().T], j, hbar)
    gap = max(np.max(np.abs(direct.first[0] - f2)) / hbar, np.max(np.abs(direct.cov[0] - c2)) / hbar ** 2)
    if gap > 1e-10:
        raise ArithmeticError(f"closed-form moments disagree with conjugation by {gap:.3e}")
    mom = MomentSet(np.array([m1.first[0], f2]), np.array([m1.cov[0], c2]))
    return SpinMoments(mom, float(gap))


def polarized_state(j, direction=(1.0, 0.0, 0.0), hbar: float = HBAR) -> np.ndarray:
    """Density matrix of the highest-weight state of ``n.L``."""
    from .quantum_ops import angular_momentum_ops

    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    gen = sum(nk * op.data for nk, op in zip(n, angular_momentum_ops(j, hbar)))
    vec = np.linalg.eigh(gen)[1][:, -1]
    return np.outer(vec, vec.conj())


# --------------------------------------------------------------------------
# batch mode
# --------------------------------------------------------------------------

BATCH_COLUMNS = ("shape", "radius_m", "separation_m", "mass_kg", "n_points",
                 "theta_rad", "axis_x", "axis_y", "axis_z")


def _batch_body(row) -> PointMassBody:
    shape = row["shape"].strip()
    params = {"mass": float(row["mass_kg"])}
    if shape == "dumbbell":
        params["separation"] = float(row["separation_m"])
    else:
        params["radius"] = float(row["radius_m"])
    return discretize_primitive(shape, params, int(row["n_points"]))


def run_batch(in_path, out_path, spec: KernelSpec, j=1, header_lines=()) -> list:
    """Rates for every ``(body, theta, axis)`` row of a CSV file.

    The spin embedding uses the ``L_x``-polarised spin-``j`` state for the
    first orientation.  Output columns are the inputs followed by
    ``dp_rate_per_s, rot_rate_per_s, rot_shift_per_s``.
    """
    with open(in_path, newline="") as fh:
        rows = [r for r in csv.DictReader(fh)]
    if rows and set(BATCH_COLUMNS) - set(rows[0]):
        raise InvalidInputError(f"batch CSV needs columns {BATCH_COLUMNS}")
    rho1 = polarized_state(j, (1, 0, 0), spec.hbar)
    results = []
    for r in rows:
        body = _batch_body(r)
        axis = (float(r["axis_x"]), float(r["axis_y"]), float(r["axis_z"]))
        theta = float(r["theta_rad"])
        mom = moments_from_spinrep(rho1, theta, j, axis, spec.hbar).moments
        pair = OrientationPair(body, SpinConfig(axis, 0.0), SpinConfig(axis, theta), mom)
        results.append((r, rot_offdiag_rate(pair, spec)))
    with open(out_path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(list(BATCH_COLUMNS) + ["dp_rate_per_s", "rot_rate_per_s", "rot_shift_per_s"])
        for r, rep in results:
            w.writerow([r[c] for c in BATCH_COLUMNS]
                       + [f"{v:.16e}" for v in (rep.dp_rate, rep.rot_rate, rep.rot_shift)])
    return [rep for _, rep in results]
