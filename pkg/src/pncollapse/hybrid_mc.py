"""
Stochastic unravelling of the noise-averaged dynamics.

Each trajectory carries a pure state.  Per step it receives the unitary
``exp(-(i/hbar) sum_a W_a O_a)`` with Gaussian increments ``W = F xi sqrt(dt)``,
``F F^T = D_A``.  The noise average of ``U rho U^dag`` reproduces, to second
order in ``W``, the double-commutator generator
``-(1/2 hbar^2) sum_ab D_A,ab [O_a, [O_b, rho]]``.

Two step schemes are offered:

``joint``
    one unitary per step built from the full noise sum plus ``H dt``.
``strang``
    the noise sum is split along the eigen-directions ``Q_k = sum_a F_ak O_a``
    and applied palindromically with half-variance kicks around two half
    Hamiltonian steps.  Each one-direction kick averages exactly to
    ``exp(dt/2 L_k)``, so the ensemble mean follows a Strang splitting of
    the exact semigroup (global error O(dt^2)).

Trajectory ``i`` of a run with base seed ``s`` draws its quantum noise from
``SeedSequence(s, spawn_key=(i, 0))`` and, in hybrid runs, its classical
noise from ``spawn_key=(i, 1)``, so results do not depend on chunking.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidInputError, KernelError, StepSizeError

CHUNK = 512
CLIP = 1e-12


def eigen_factor(kernel, clip: float = CLIP) -> np.ndarray:
    """``F`` with ``F F^T = K`` from the eigen-decomposition of a PSD kernel.

    Eigenvalues above ``-clip * max`` are clipped to zero; more negative ones
    raise :class:`KernelError`.  Zero directions are dropped.
    """
    k = np.asarray(getattr(kernel, "matrix", kernel), dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise InvalidInputError("kernel must be square")
    lam, vec = np.linalg.eigh(0.5 * (k + k.T))
    top = max(lam[-1], 0.0) if lam.size else 0.0
    if lam.size and lam[0] < -clip * top:
        raise KernelError(f"kernel is not PSD (min eig {lam[0]:.3e}, max {top:.3e})")
    keep = lam > clip * top
    return vec[:, keep] * np.sqrt(lam[keep])


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    """``increments[n, a]``: ``n_steps`` draws of the correlated noise over ``dt``."""

    increments: np.ndarray
    dt: float
    seed: int


def sample_noise(kernel, dt: float, seed: int, n_steps: int = 1) -> NoiseRealization:
    """Increments ``W = F xi sqrt(dt)`` with covariance ``D_A dt``."""
    f = eigen_factor(kernel)
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((n_steps, f.shape[1]))
    return NoiseRealization(np.sqrt(dt) * xi @ f.T, float(dt), int(seed))


def _traj_rng(seed: int, idx: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(idx, stream)))


def _apply_eig(vec, phases, psi):
    # psi (n, d); vec (d, d) or (n, d, d); phases (n, d)
    if vec.ndim == 2:
        return ((psi @ vec.conj()) * phases) @ vec.T
    c = np.einsum("nji,nj->ni", vec.conj(), psi) * phases
    return np.einsum("nij,nj->ni", vec, c)


def step_guard(ops, kernel, dt: float, hbar: float) -> float:
    """``max ||O_a|| sqrt(lambda_max(D_A) dt) / hbar``; must not exceed 0.1."""
    o = np.asarray(ops)
    k = np.asarray(getattr(kernel, "matrix", kernel), dtype=float)
    norm = max(np.linalg.norm(x, 2) for x in o) if o.size else 0.0
    lam = max(np.linalg.eigvalsh(k)[-1], 0.0)
    return float(norm * np.sqrt(lam * dt) / hbar)


def max_stable_dt(ops, kernel, hbar: float, guard: float = 0.1) -> float:
    g1 = step_guard(ops, kernel, 1.0, hbar)
    return np.inf if g1 == 0 else (guard / g1) ** 2


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Ensemble mean state at checkpoints with per-element standard errors."""

    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_traj: int
    seed: int
    dt: float
    scheme: str
    classical: dict = field(default_factory=dict)

    def trace_distances(self, exact) -> np.ndarray:
        return np.array([trace_distance(a, b) for a, b in zip(self.mean, exact)])

    def summary(self, exact=None) -> dict:
        out = {"n_traj": self.n_traj, "seed": self.seed, "dt_s": self.dt, "scheme": self.scheme,
               "checkpoints": []}
        td = self.trace_distances(exact) if exact is not None else [None] * len(self.times)
        for t, m, e, d in zip(self.times, self.mean, self.stderr, td):
            row = {"time_s": float(t), "populations": np.real(np.diag(m)).tolist(),
                   "max_stderr": float(np.max(e))}
            if d is not None:
                row["trace_distance"] = float(d)
            out["checkpoints"].append(row)
        for k, v in self.classical.items():
            out[k] = np.asarray(v).tolist()
        return out

    def to_json(self, path, exact=None, extra=None) -> None:
        s = self.summary(exact)
        if extra:
            s.update(extra)
        with open(path, "w") as fh:
            json.dump(s, fh, indent=2, sort_keys=True)


def trace_distance(a, b) -> float:
    d = np.asarray(a) - np.asarray(b)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


class _QuantumStepper:
    """Pre-computed pieces of one noise step shared by all trajectories."""

    def __init__(self, ops, kernel, H, dt, hbar, scheme):
        self.ops = np.asarray(ops, dtype=complex)
        self.d = self.ops.shape[-1]
        self.f = eigen_factor(kernel)
        self.dt, self.hbar, self.scheme = dt, hbar, scheme
        h = np.zeros((self.d, self.d)) if H is None else np.asarray(H, dtype=complex)
        self.h = h
        self.q = np.einsum("ak,aij->kij", self.f, self.ops) if self.f.size else np.zeros((0, self.d, self.d))
        if scheme == "strang":
            self.q_lam, self.q_vec = np.linalg.eigh(self.q) if len(self.q) else (None, None)
            self.h_lam, self.h_vec = np.linalg.eigh(h)
        elif scheme != "joint":
            raise InvalidInputError(f"unknown scheme {scheme!r}")

    @property
    def n_noise(self) -> int:
        k = self.f.shape[1]
        return 2 * k if self.scheme == "strang" else k

    def draw(self, rng, n_steps):
        return rng.standard_normal((n_steps, self.n_noise))

    def step(self, psi, xi):
        dt, hb = self.dt, self.hbar
        if self.scheme == "joint":
            gen = self.h[None] * (dt / hb) + np.einsum("nk,kij->nij", xi, self.q) * (np.sqrt(dt) / hb)
            lam, vec = np.linalg.eigh(gen)
            return _apply_eig(vec, np.exp(-1j * lam), psi)
        half_h = np.exp(-0.5j * dt * self.h_lam / hb)[None, :]
        psi = _apply_eig(self.h_vec, half_h, psi)
        k = self.f.shape[1]
        s = np.sqrt(0.5 * dt) / hb
        order = list(range(k)) + list(range(k - 1, -1, -1))
        for slot, kk in enumerate(order):
            ph = np.exp(-1j * s * xi[:, slot, None] * self.q_lam[kk][None, :])
            psi = _apply_eig(self.q_vec[kk], ph, psi)
        return _apply_eig(self.h_vec, half_h, psi)


def _normalise_psi(psi0, d):
    psi = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi.size != d:
        raise InvalidInputError("initial state dimension mismatch")
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise InvalidInputError("initial state is zero")
    return psi / nrm


def unravel_quantum(ops, kernel, psi0, dt: float, n_steps: int, n_traj: int, seed: int,
                    H=None, hbar: float = 1.0, record_every: int | None = None,
                    scheme: str = "joint", guard: float = 0.1) -> EnsembleResult:
    """Ensemble mean of stochastic unitary trajectories.

    Parameters
    ----------
    ops : (M, d, d) array
        Hermitian operators coupled to the noise, e.g. the stack returned by
        :func:`pncollapse.dynamics.full_operator_list`.
    kernel : SmearedKernelMatrix or (M, M) array
        Noise covariance per unit time.
    psi0 : (d,) array
    dt, n_steps : step size and number of steps.
    n_traj, seed : ensemble size and base seed.
    record_every : int, optional
        Checkpoint spacing in steps (default: only the final time).
    scheme : {"joint", "strang"}
    """
    if n_traj < 1 or n_steps < 0:
        raise InvalidInputError("n_traj must be >= 1 and n_steps >= 0")
    g = step_guard(ops, kernel, dt, hbar)
    if g > guard:
        raise StepSizeError(f"noise step guard {g:.3g} exceeds {guard}",
                            suggested_dt=max_stable_dt(ops, kernel, hbar, guard))
    stepper = _QuantumStepper(ops, kernel, H, dt, hbar, scheme)
    psi0 = _normalise_psi(psi0, stepper.d)
    every = n_steps if not record_every else int(record_every)
    marks = [0] + list(range(every, n_steps + 1, every)) if every else [0]
    if marks[-1] != n_steps:
        marks.append(n_steps)
    d = stepper.d
    acc = np.zeros((len(marks), d, d), complex)
    acc2 = np.zeros((len(marks), d, d))
    for start in range(0, n_traj, CHUNK):
        idx = range(start, min(start + CHUNK, n_traj))
        xi = np.stack([stepper.draw(_traj_rng(seed, i), n_steps) for i in idx], axis=1)
        psi = np.tile(psi0, (len(idx), 1))
        c = 0
        for n in range(n_steps + 1):
            if n > 0:
                psi = stepper.step(psi, xi[n - 1])
            if n == marks[c]:
                outer = np.einsum("ni,nj->nij", psi, psi.conj())
                acc[c] += outer.sum(axis=0)
                acc2[c] += (np.abs(outer) ** 2).sum(axis=0)
                c += 1
    mean = acc / n_traj
    var = np.maximum(acc2 / n_traj - np.abs(mean) ** 2, 0.0)
    err = np.sqrt(var / max(n_traj - 1, 1))
    return EnsembleResult(np.array(marks) * dt, mean, err, n_traj, seed, dt, scheme)


# --------------------------------------------------------------------------
# hybrid classical-quantum steps
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ClassicalSector:
    """Sampled field values ``A_a`` and momenta ``pi_a`` with ``H_C = sum pi^2/2mu + k A^2/2``.

    ``coupling`` scales the mean-field backreaction ``-coupling <O_a> dt`` on
    ``pi_a``.
    """

    inertia: np.ndarray
    stiffness: np.ndarray
    coupling: float = 0.0

    def energy(self, A, pi) -> np.ndarray:
        return np.sum(0.5 * pi ** 2 / self.inertia + 0.5 * self.stiffness * A ** 2, axis=-1)


@dataclass(eq=False)
class HybridState:
    psi: np.ndarray  # (n, d)
    A: np.ndarray    # (n, M)
    pi: np.ndarray   # (n, M)


def leapfrog(sector: ClassicalSector, A, pi, dt: float):
    """Kick-drift-kick step of the free quadratic classical Hamiltonian."""
    pi = pi - 0.5 * dt * sector.stiffness * A
    A = A + dt * pi / sector.inertia
    pi = pi - 0.5 * dt * sector.stiffness * A
    return A, pi


def hybrid_step(state: HybridState, xi_q, j_incr, stepper: "_QuantumStepper",
                sector: ClassicalSector, dt: float) -> HybridState:
    """Advance a batch of hybrid trajectories by ``dt``.

    The quantum factor receives the ``A``-noise unitary only.  The classical
    momenta are kicked by the ``J``-noise increments and by the mean-field
    backreaction ``-coupling <O_a> dt`` evaluated on the pre-step state.
    """
    if sector.coupling:
        means = np.real(np.einsum("ni,aij,nj->na", state.psi.conj(), stepper.ops, state.psi))
    else:
        means = 0.0
    psi = stepper.step(state.psi, xi_q)
    A, pi = leapfrog(sector, state.A, state.pi, dt)
    pi = pi - j_incr - sector.coupling * means * dt
    return HybridState(psi, A, pi)


def run_hybrid(ops, kernel_A, kernel_J, psi0, sector: ClassicalSector, dt: float, n_steps: int,
               n_traj: int, seed: int, H=None, hbar: float = 1.0, scheme: str = "joint",
               record_every: int | None = None, guard: float = 0.1) -> EnsembleResult:
    """Hybrid ensemble; ``kernel_J`` (e.g. the saturating ``D_J``) drives the classical noise.

    Classical variables start at zero.  The returned result carries the
    classical momentum variance per site at every checkpoint in
    ``classical["pi_var"]`` and the mean energy in ``classical["energy"]``.
    """
    if kernel_J is None:
        raise ConfigError("hybrid run needs a D_J kernel")
    g = step_guard(ops, kernel_A, dt, hbar)
    if g > guard:
        raise StepSizeError(f"noise step guard {g:.3g} exceeds {guard}",
                            suggested_dt=max_stable_dt(ops, kernel_A, hbar, guard))
    stepper = _QuantumStepper(ops, kernel_A, H, dt, hbar, scheme)
    fj = eigen_factor(kernel_J)
    m = fj.shape[0]
    if m != len(stepper.ops):
        raise InvalidInputError("D_J size must match the operator list")
    psi0 = _normalise_psi(psi0, stepper.d)
    every = n_steps if not record_every else int(record_every)
    marks = [0] + list(range(every, n_steps + 1, every))
    if marks[-1] != n_steps:
        marks.append(n_steps)
    d = stepper.d
    acc = np.zeros((len(marks), d, d), complex)
    acc2 = np.zeros((len(marks), d, d))
    pi_sq = np.zeros((len(marks), m))
    pi_sum = np.zeros((len(marks), m))
    energy = np.zeros(len(marks))
    for start in range(0, n_traj, CHUNK):
        idx = range(start, min(start + CHUNK, n_traj))
        xq = np.stack([stepper.draw(_traj_rng(seed, i, 0), n_steps) for i in idx], axis=1)
        xj = np.stack([_traj_rng(seed, i, 1).standard_normal((n_steps, fj.shape[1])) for i in idx], axis=1)
        n = len(idx)
        st = HybridState(np.tile(psi0, (n, 1)), np.zeros((n, m)), np.zeros((n, m)))
        c = 0
        for k in range(n_steps + 1):
            if k > 0:
                st = hybrid_step(st, xq[k - 1], np.sqrt(dt) * xj[k - 1] @ fj.T, stepper, sector, dt)
            if k == marks[c]:
                outer = np.einsum("ni,nj->nij", st.psi, st.psi.conj())
                acc[c] += outer.sum(axis=0)
                acc2[c] += (np.abs(outer) ** 2).sum(axis=0)
                pi_sum[c] += st.pi.sum(axis=0)
                pi_sq[c] += (st.pi ** 2).sum(axis=0)
                energy[c] += sector.energy(st.A, st.pi).sum()
                c += 1
    mean = acc / n_traj
    err = np.sqrt(np.maximum(acc2 / n_traj - np.abs(mean) ** 2, 0.0) / max(n_traj - 1, 1))
    pm = pi_sum / n_traj
    classical = {"pi_mean": pm, "pi_var": pi_sq / n_traj - pm ** 2, "energy": energy / n_traj}
    return EnsembleResult(np.array(marks) * dt, mean, err, n_traj, seed, dt, scheme, classical)
