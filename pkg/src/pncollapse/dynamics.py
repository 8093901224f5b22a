"""
Reduced master equation and its integration.

The dissipative part of the generator is a sum of double commutators::

    L(rho) = -(i/hbar)[H, rho] - (1/2 hbar^2) sum_ab K_ab [O_a, [O_b, rho]]

with operators ``O_(t,s) = c m(x_s)`` and ``O_(k,s) = J_k(x_s)`` and
``K = D_A`` sampled at the points ``x_s``.  Writing ``J_k(x_s) = T[s,k,p] L_p``
collapses the current blocks onto the three angular-momentum components:

* DP channel         ``dp[s,s'] [m_s, [m_s', .]]``,  ``dp = c^2 D_tt / 2 hbar^2``
* rotational channel ``rot[p,q] [L_p, [L_q, .]]``,  ``rot = T^T D_kl T / 2 hbar^2``
* mixed channels     ``mix[s,p] ([m_s, [L_p, .]] + [L_p, [m_s, .]])``,
  ``mix = c D_tk T / 2 hbar^2``

Each unordered pair ``(a, b)`` therefore appears twice with the same
coefficient; no extra factor of 1/2 is applied.  A single point at the
origin gives ``dp = G / (2 hbar sigma)`` for the default kernel.

Superoperators act on row-major vectorised density matrices
(``vec(A rho B) = (A kron B^T) vec(rho)``).
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import _accel
from .errors import InvalidInputError, StepSizeError
from .noise_kernels import KernelSpec, assemble_kernel_matrix
from .quantum_ops import current_dressing

MAX_DIM = 64


# --------------------------------------------------------------------------
# channel coefficients
# --------------------------------------------------------------------------

def assemble_dp_coeffs(spec: KernelSpec, positions) -> np.ndarray:
    """``c^2 D_A^tt(x_s, x_s') / (2 hbar^2)``, an ``N x N`` matrix (1/(kg^2 s))."""
    pts = np.asarray(positions, dtype=float).reshape(-1, 3)
    return (spec.c ** 2 / (2 * spec.hbar ** 2)) * spec.prefactor * spec.kappa_tt * spec.profile_matrix(pts)


def assemble_rot_coeffs(spec: KernelSpec, positions, masses, I: float,
                        constrained_axis=None) -> np.ndarray:
    """``Gamma_pq = (1/2 hbar^2) sum_ab D_A^kl(a, b) T_a[k, p] T_b[l, q]``.

    Equivalent to contracting the kernel with
    ``chi_{kp;lq} = m_a m_b eps_kpj eps_lqn x_a^j x_b^n / I^2``.
    """
    if spec.kappa_rot == 0.0:
        return np.zeros((3, 3))
    t = current_dressing(positions, masses, I, constrained_axis)
    s = _accel.dressed_pair_sum(np.asarray(positions, float).reshape(-1, 3), t, spec.sigma,
                                spec.code, *spec.tables())
    g = spec.kappa_rot * spec.prefactor / (2 * spec.hbar ** 2) * s
    return 0.5 * (g + g.T)


def assemble_mixed_coeffs(spec: KernelSpec, positions, dressing) -> tuple:
    """Mixed blocks ``(tk, kt)`` of shapes ``(N, 3)`` and ``(3, N)``.

    ``tk[s, p] = (c / 2 hbar^2) sum_b D_A^{tl}(s, b) T_b[l, p]`` couples
    ``m(x_s)`` with ``L_p``; ``kt`` is its transpose for the symmetric kernel.
    """
    pts = np.asarray(positions, dtype=float).reshape(-1, 3)
    t = np.asarray(dressing, dtype=float)
    if t.shape != (pts.shape[0], 3, 3):
        raise InvalidInputError("dressing must have one 3x3 block per sample point")
    if spec.kappa_mix == 0.0:
        z = np.zeros((pts.shape[0], 3))
        return z, z.T.copy()
    g = spec.profile_matrix(pts)
    tk = (spec.c / (2 * spec.hbar ** 2)) * spec.kappa_mix * spec.prefactor * (g @ t.sum(axis=1))
    return tk, tk.T.copy()


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Coefficients of the three channel families with enable flags."""

    dp_coeffs: np.ndarray
    rot_coeffs: np.ndarray
    mixed_tk: np.ndarray
    mixed_kt: np.ndarray
    enable_dp: bool = True
    enable_rot: bool = True
    enable_mixed: bool = True

    def __post_init__(self):
        for name in ("dp_coeffs", "rot_coeffs", "mixed_tk", "mixed_kt"):
            a = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(a)):
                raise InvalidInputError(f"{name} has non-finite entries")
            object.__setattr__(self, name, a)
        n = self.dp_coeffs.shape[0]
        if (self.dp_coeffs.shape != (n, n) or self.rot_coeffs.shape != (3, 3)
                or self.mixed_tk.shape != (n, 3) or self.mixed_kt.shape != (3, n)):
            raise InvalidInputError("inconsistent channel coefficient shapes")

    @property
    def n_points(self) -> int:
        return self.dp_coeffs.shape[0]


def assemble_channels(spec: KernelSpec, positions, masses=None, I=None, constrained_axis=None,
                      enable=("dp", "rot", "mixed")) -> ChannelSet:
    """All channel coefficients on one sample-point set.

    ``masses`` and ``I`` (classical weights of the current) are required
    when the rotational or mixed channels are enabled.
    """
    pts = np.asarray(positions, dtype=float).reshape(-1, 3)
    n = pts.shape[0]
    dp = assemble_dp_coeffs(spec, pts)
    rot = np.zeros((3, 3))
    tk, kt = np.zeros((n, 3)), np.zeros((3, n))
    if ("rot" in enable or "mixed" in enable) and (spec.kappa_rot or spec.kappa_mix):
        if masses is None or I is None:
            raise InvalidInputError("current channels need masses and I")
        if np.size(masses) != n:
            raise InvalidInputError("masses do not match the sample points")
        rot = assemble_rot_coeffs(spec, pts, masses, I, constrained_axis)
        tk, kt = assemble_mixed_coeffs(spec, pts, current_dressing(pts, masses, I, constrained_axis))
    return ChannelSet(dp, rot, tk, kt, "dp" in enable, "rot" in enable, "mixed" in enable)


# --------------------------------------------------------------------------
# superoperators
# --------------------------------------------------------------------------

def double_commutator_superop(a_ops, c_ops) -> np.ndarray:
    """Matrix of ``rho -> sum_i [A_i, [C_i, rho]]`` (row-major vectorisation)."""
    a = np.asarray(a_ops, dtype=complex)
    c = np.asarray(c_ops, dtype=complex)
    if a.ndim == 2:
        a, c = a[None], c[None]
    d = a.shape[-1]
    eye = np.eye(d)
    ac = np.einsum("aij,ajk->ik", a, c)
    ca = np.einsum("aij,ajk->ik", c, a)
    # (A kron C^T)[(i,j),(k,l)] = A_ik C_lj
    cross = np.einsum("aik,alj->ijkl", a, c) + np.einsum("aik,alj->ijkl", c, a)
    return np.kron(ac, eye) + np.kron(eye, ca.T) - cross.reshape(d * d, d * d)


def hamiltonian_superop(h, hbar: float) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    eye = np.eye(h.shape[0])
    return (-1j / hbar) * (np.kron(h, eye) - np.kron(eye, h.T))


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Generator on row-major vectorised ``dim x dim`` density matrices."""

    matrix: np.ndarray
    dim: int
    hbar: float
    dissipator: np.ndarray
    breakdown: dict = field(default_factory=dict)

    def apply(self, rho) -> np.ndarray:
        d = self.dim
        return (self.matrix @ np.asarray(rho, complex).reshape(-1)).reshape(d, d)

    def trace_defect(self) -> float:
        """``max |L^dag(1)|``, zero for a trace-preserving generator."""
        return float(np.max(np.abs(np.eye(self.dim).reshape(-1) @ self.matrix)))


def _hermitian(h, d):
    h = np.zeros((d, d), complex) if h is None else np.asarray(h, dtype=complex)
    if h.shape != (d, d):
        raise InvalidInputError("Hamiltonian dimension mismatch")
    if np.linalg.norm(h - h.conj().T) > 1e-12 * max(np.linalg.norm(h), 1e-300):
        raise InvalidInputError("Hamiltonian must be Hermitian")
    return h


def build_liouvillian(channels: ChannelSet, mass_ops, L_ops, H=None, hbar: float = 1.0) -> Liouvillian:
    """Assemble the reduced generator from channel coefficients.

    Parameters
    ----------
    channels : ChannelSet
    mass_ops : (N, d, d) array
        ``m(x_s)`` for every sample point.
    L_ops : (3, d, d) array
        Angular-momentum components.
    H : (d, d) array, optional
    hbar : float
    """
    m = np.asarray(mass_ops, dtype=complex)
    ls = np.asarray(L_ops, dtype=complex)
    d = ls.shape[-1]
    if m.shape != (channels.n_points, d, d) or ls.shape != (3, d, d):
        raise InvalidInputError("operator dimensions do not match the channels")
    if d > MAX_DIM:
        raise InvalidInputError(f"dimension {d} exceeds the dense limit {MAX_DIM}")
    h = _hermitian(H, d)
    parts = {}
    zero = np.zeros((d * d, d * d), complex)
    parts["dp"] = (-double_commutator_superop(m, np.einsum("st,tij->sij", channels.dp_coeffs, m))
                   if channels.enable_dp else zero)
    parts["rot"] = (-double_commutator_superop(ls, np.einsum("pq,qij->pij", channels.rot_coeffs, ls))
                    if channels.enable_rot else zero)
    if channels.enable_mixed:
        parts["mixed"] = -(double_commutator_superop(m, np.einsum("sp,pij->sij", channels.mixed_tk, ls))
                           + double_commutator_superop(ls, np.einsum("ps,sij->pij", channels.mixed_kt, m)))
    else:
        parts["mixed"] = zero
    diss = parts["dp"] + parts["rot"] + parts["mixed"]
    parts["hamiltonian"] = hamiltonian_superop(h, hbar)
    return Liouvillian(parts["hamiltonian"] + diss, d, hbar, diss, parts)


def liouvillian_from_kernel(kernel, ops, H=None, hbar: float = 1.0) -> Liouvillian:
    """Generic form ``-(1/2 hbar^2) sum_ab K_ab [O_a, [O_b, .]]``.

    ``ops`` has shape ``(M, d, d)`` matching the ``M x M`` kernel; used as an
    independent check on :func:`build_liouvillian`.
    """
    k = np.asarray(getattr(kernel, "matrix", kernel), dtype=float)
    o = np.asarray(ops, dtype=complex)
    if k.shape != (o.shape[0], o.shape[0]):
        raise InvalidInputError("kernel and operator list sizes differ")
    d = o.shape[-1]
    diss = -double_commutator_superop(o, np.einsum("ab,bij->aij", k, o)) / (2 * hbar ** 2)
    hs = hamiltonian_superop(_hermitian(H, d), hbar)
    return Liouvillian(hs + diss, d, hbar, diss, {"dissipator": diss, "hamiltonian": hs})


def full_operator_list(spec: KernelSpec, mass_ops, current_ops) -> np.ndarray:
    """Stack ``c m(x_s)`` and ``J_k(x_s)`` in kernel order ``mu * N + s``."""
    m = np.asarray(mass_ops, dtype=complex)
    j = np.asarray(current_ops, dtype=complex)
    return np.concatenate([spec.c * m, np.transpose(j, (1, 0, 2, 3)).reshape(-1, *m.shape[1:])])


def dp_only_liouvillian(positions, mass_ops, sigma: float, G: float, hbar: float) -> np.ndarray:
    """DP dissipator built term by term with ``(G/2 hbar) / max(r, sigma)``."""
    x = np.asarray(positions, dtype=float)
    m = np.asarray(mass_ops, dtype=complex)
    d = m.shape[-1]
    eye = np.eye(d)
    out = np.zeros((d * d, d * d), complex)
    for s in range(x.shape[0]):
        for t in range(x.shape[0]):
            w = G / (2 * hbar) / max(np.linalg.norm(x[s] - x[t]), sigma)
            a, b = m[s], m[t]
            out -= w * (np.kron(a @ b, eye) - np.kron(a, b.T) - np.kron(b, a.T) + np.kron(eye, (b @ a).T))
    return out


def channel_liouvillian(spec: KernelSpec, positions, mass_ops, current_ops, H=None) -> Liouvillian:
    """Generic-form generator from a kernel spec and explicit operators."""
    kern = assemble_kernel_matrix(spec, positions)
    return liouvillian_from_kernel(kern, full_operator_list(spec, mass_ops, current_ops), H, spec.hbar)


# --------------------------------------------------------------------------
# integration
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (T, d, d)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def validate_density_matrix(rho, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidInputError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise InvalidInputError("density matrix must be Hermitian")
    if abs(np.trace(rho) - 1) > 1e-12:
        raise InvalidInputError("density matrix must have unit trace")
    if np.linalg.eigvalsh(rho)[0] < -tol:
        raise InvalidInputError("density matrix has negative eigenvalues")
    return rho


def generator_norm(L: Liouvillian) -> float:
    """Induced 1-norm of the generator, used by the RK4 step guard."""
    return float(np.linalg.norm(L.matrix, 1))


def evolve(L: Liouvillian, rho0, t: float, n_steps: int = 100, method: str = "exact-exponential",
           dt: float | None = None) -> Trajectory:
    """Integrate ``d rho / dt = L rho`` on ``[0, t]``.

    ``exact-exponential`` propagates with ``expm(L dt)`` (scaling and squaring).
    ``rk4`` requires ``dt * ||L||_1 <= 0.1``; otherwise a :class:`StepSizeError`
    carrying the largest admissible step is raised.
    """
    rho = validate_density_matrix(rho0)
    if rho.shape[0] != L.dim:
        raise InvalidInputError("state and generator dimensions differ")
    if t < 0:
        raise InvalidInputError("t must be non-negative")
    if dt is not None:
        n_steps = max(1, int(np.ceil(t / dt - 1e-12)))
    dt = t / n_steps if n_steps > 0 else 0.0
    v = rho.reshape(-1).copy()
    out = [v]
    if method == "exact-exponential":
        prop = expm(L.matrix * dt)
        for _ in range(n_steps):
            v = prop @ v
            out.append(v)
    elif method == "rk4":
        norm = generator_norm(L)
        if dt * norm > 0.1:
            raise StepSizeError(f"dt={dt:.3e} violates dt*||L|| <= 0.1", suggested_dt=0.1 / norm)
        m = L.matrix
        for _ in range(n_steps):
            k1 = m @ v
            k2 = m @ (v + 0.5 * dt * k1)
            k3 = m @ (v + 0.5 * dt * k2)
            k4 = m @ (v + dt * k3)
            v = v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            out.append(v)
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    d = L.dim
    return Trajectory(np.linspace(0.0, t, n_steps + 1), np.array(out).reshape(-1, d, d))


def characteristic_time(L: Liouvillian) -> float:
    """``1 / max |Re lambda|`` over the generator spectrum."""
    rate = float(np.max(np.abs(np.linalg.eigvals(L.matrix).real)))
    return np.inf if rate == 0.0 else 1.0 / rate


@dataclass(frozen=True)
class DecayFit:
    rate: float
    frequency: float
    residual: float


def _flat_tol(v):
    return 16 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(v))))


def fit_decay_rate(traj: Trajectory, i: int, j: int) -> DecayFit:
    """Least-squares fit of ``rho_ij(t) = rho_ij(0) exp((-rate + i freq) t)``."""
    z = traj.states[:, i, j]
    if np.any(np.abs(z) == 0):
        raise InvalidInputError("coherence vanishes; cannot fit a rate")
    t = traj.times
    scale = float(np.max(np.abs(t))) or 1.0  # keep the design matrix well conditioned
    a = np.column_stack([t / scale, np.ones_like(t)])
    logs, phases = np.log(np.abs(z)), np.unwrap(np.angle(z))
    lg, res, *_ = np.linalg.lstsq(a, logs, rcond=None)
    ph = np.linalg.lstsq(a, phases, rcond=None)[0]
    # series flat to rounding carry no measurable slope; over tiny windows the
    # rounding noise would otherwise masquerade as a large rate
    if np.ptp(logs) <= _flat_tol(logs):
        lg[0] = 0.0
    if np.ptp(phases) <= _flat_tol(phases):
        ph[0] = 0.0
    return DecayFit(float(-lg[0] / scale) + 0.0, float(ph[0] / scale) + 0.0,  # no signed zeros
                    float(np.sqrt(res[0] / t.size)) if res.size else 0.0)


def superop_decay_rates(L: Liouvillian) -> np.ndarray:
    """Decay rates ``-Re lambda`` of the generator, sorted ascending."""
    return np.sort(-np.linalg.eigvals(L.matrix).real)


@dataclass(frozen=True)
class PositivityReport:
    passed: bool
    min_eig: float
    max_eig: float


def positivity_audit(L: Liouvillian) -> PositivityReport:
    """Conditional complete positivity of the dissipator.

    Builds ``C = sum_ij |i><j| (x) D(|i><j|)`` and checks that it is PSD on the
    complement of the maximally entangled vector, which holds iff ``D`` has
    Lindblad form.
    """
    d = L.dim
    diss = L.dissipator
    # C[(i,k),(j,l)] = D(|i><j|)[k, l]
    c = diss.T.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    c = 0.5 * (c + c.conj().T)
    omega = np.eye(d).reshape(-1) / np.sqrt(d)
    q, _ = np.linalg.qr(np.column_stack([omega, np.eye(d * d)[:, :-1]]))
    q = q[:, 1:]
    ev = np.linalg.eigvalsh(q.conj().T @ c @ q)
    scale = max(abs(ev[0]), abs(ev[-1]))
    return PositivityReport(bool(ev[0] >= -1e-10 * scale) if scale > 0 else True,
                            float(ev[0]), float(ev[-1]))


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def expectation(traj: Trajectory, op) -> np.ndarray:
    return np.real(np.einsum("tij,ji->t", traj.states, np.asarray(op)))


def write_trajectory_csv(traj: Trajectory, path, L_ops=None, coherences=((0, 1),)) -> None:
    """Columns: time, populations, selected coherence magnitudes, <Lx>, <Ly>, <Lz>."""
    d = traj.states.shape[1]
    coherences = [(i, j) for i, j in coherences if i < d and j < d]
    head = ["time_s"] + [f"p{i}" for i in range(d)] + [f"abs_rho{i}{j}" for i, j in coherences]
    cols = [traj.times] + [traj.states[:, i, i].real for i in range(d)]
    cols += [np.abs(traj.states[:, i, j]) for i, j in coherences]
    if L_ops is not None:
        head += ["Lx", "Ly", "Lz"]
        cols += [expectation(traj, op) for op in L_ops]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        for row in np.column_stack(cols):
            w.writerow([f"{v:.16e}" for v in row])


def trajectory_summary(traj: Trajectory, coherences=((0, 1),)) -> dict:
    out = {"n_times": int(traj.times.size), "t_final_s": float(traj.times[-1]), "fits": []}
    for i, j in coherences:
        if i < traj.states.shape[1] and j < traj.states.shape[1] and np.all(np.abs(traj.states[:, i, j]) > 0):
            f = fit_decay_rate(traj, i, j)
            out["fits"].append({"i": i, "j": j, "rate_per_s": f.rate, "frequency_rad_per_s": f.frequency})
    return out


def write_summary_json(summary: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
