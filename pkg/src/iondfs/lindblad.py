"""Lindblad master equations for the ion-cavity system and a fixed-step RK4 solver.

Four variants are provided, from the full interaction-picture model down to
the ideal engineered reservoir:

* :func:`eq3_spec` - ions + cavity, H1(t), cavity decay and bare ionic decay;
* :func:`eq5_spec` - ions + cavity in the rotating frame, H2, rotated ionic decay;
* :func:`eq6_spec` - ions only, engineered channel Gamma*D[J] plus rotated ionic decay;
* :func:`eq7_spec` - ions only, Gamma*D[J].

All right-hand sides have the form
``drho/dt = -i[H, rho] + sum_k rate_k (L rho L^dag - {L^dag L, rho}/2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import model
from .hilbert import (
    TWO_IONS,
    DensityOperator,
    DimensionError,
    HilbertSpace,
    LinearOperator,
    StateVector,
    ions_with_cavity,
    partial_trace,
)
from .model import SystemParams

TRACE_DRIFT_TOL = 1e-6
NEGATIVITY_TOL = 1e-6
DEFAULT_SAFETY = 0.02


class IntegrationError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time:.10g}")
        self.time = time


OperatorFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Channel:
    """A decay channel ``rate * D[L(t)]``.

    ``jump`` maps an array of times of shape (n,) to operators of shape
    (n, d, d). Constant channels ignore their argument's values and set
    ``time_dependent=False``.
    """

    rate: float
    jump: OperatorFn
    time_dependent: bool = False
    label: str = ""

    def __post_init__(self):
        if not self.rate >= 0:
            raise ValueError(f"channel {self.label!r} has negative rate {self.rate}")


def constant(op: np.ndarray) -> OperatorFn:
    op = np.asarray(op, dtype=complex)

    def fn(ts):
        return np.broadcast_to(op, np.shape(ts) + op.shape)

    return fn


@dataclass(frozen=True)
class MasterEquationSpec:
    name: str
    space: HilbertSpace
    hamiltonian: Optional[OperatorFn]
    channels: tuple[Channel, ...]
    hamiltonian_time_dependent: bool = False
    rate_scale: float = 1.0
    params_digest: str = ""

    @property
    def time_dependent(self) -> bool:
        active = [c for c in self.channels if c.rate > 0]
        return self.hamiltonian_time_dependent or any(c.time_dependent for c in active)

    def hamiltonian_at(self, t: float) -> Optional[LinearOperator]:
        if self.hamiltonian is None:
            return None
        return LinearOperator(self.space, self.hamiltonian(np.array([t]))[0])

    def rhs(self, t: float, rho: np.ndarray) -> np.ndarray:
        """drho/dt at a single time (reference implementation, not the hot path)."""
        out = np.zeros_like(rho, dtype=complex)
        if self.hamiltonian is not None:
            h = self.hamiltonian(np.array([t]))[0]
            out += -1j * (h @ rho - rho @ h)
        for ch in self.channels:
            if ch.rate > 0:
                out += ch.rate * _dissipator(ch.jump(np.array([t]))[0], rho)
        return out


def _dissipator(a: np.ndarray, rho: np.ndarray) -> np.ndarray:
    ad = a.conj().T
    ada = ad @ a
    return a @ rho @ ad - 0.5 * (ada @ rho + rho @ ada)


def _matrix(x) -> np.ndarray:
    if isinstance(x, (LinearOperator, DensityOperator)):
        return x.matrix
    return np.asarray(x, dtype=complex)


def dissipator(jump, rho) -> np.ndarray:
    """A rho A^dag - {A^dag A, rho}/2."""
    a, r = _matrix(jump), _matrix(rho)
    if a.shape != r.shape:
        raise DimensionError(f"jump {a.shape} and state {r.shape} do not match")
    return _dissipator(a, r)


# -- the four model variants ---------------------------------------------


def _cavity_space(params: SystemParams) -> HilbertSpace:
    return ions_with_cavity(params.n_max)


def _ion_decay(params: SystemParams, with_cavity: bool) -> tuple[Channel, Channel]:
    nc = params.n_max + 1

    def make(index: int) -> OperatorFn:
        def fn(ts):
            s = model.rotated_lowering(params, np.asarray(ts, dtype=float))[index]
            if with_cavity:
                s = model._kron_batch(s, np.eye(nc, dtype=complex))
            return s

        return fn

    return (
        Channel(params.gamma_a, make(0), time_dependent=True, label="gamma_a"),
        Channel(params.gamma_b, make(1), time_dependent=True, label="gamma_b"),
    )


def eq3_spec(params: SystemParams) -> MasterEquationSpec:
    """Interaction picture: H1(t), kappa*D[a], gamma^i*D[sigma^i_ge]."""
    static, fast, coupling = model._h1_parts(params)

    def hamiltonian(ts):
        ts = np.asarray(ts, dtype=float)[:, None, None]
        x = np.exp(2j * params.omega1 * ts) * fast + np.exp(-1j * params.delta * ts) * coupling
        return static + x + np.swapaxes(x.conj(), -1, -2)

    nc = params.n_max + 1
    a = np.kron(np.eye(4), model.annihilation(params.n_max))
    sa = np.kron(model.on_ion(model.SIGMA_GE, "A"), np.eye(nc))
    sb = np.kron(model.on_ion(model.SIGMA_GE, "B"), np.eye(nc))
    channels = (
        Channel(params.kappa, constant(a), label="kappa"),
        Channel(params.gamma_a, constant(sa), label="gamma_a"),
        Channel(params.gamma_b, constant(sb), label="gamma_b"),
    )
    return MasterEquationSpec(
        "eq3", _cavity_space(params), hamiltonian, channels, True, params.max_rate(), params.digest()
    )


def eq5_spec(params: SystemParams) -> MasterEquationSpec:
    """Rotating frame with cavity: H2, kappa*D[a], gamma^i*D[R^dag sigma^i_ge R]."""
    h2 = model.build_h2(params).matrix
    a = np.kron(np.eye(4), model.annihilation(params.n_max))
    channels = (Channel(params.kappa, constant(a), label="kappa"),) + _ion_decay(params, True)
    return MasterEquationSpec(
        "eq5", _cavity_space(params), constant(h2), channels, False, params.max_rate(), params.digest()
    )


def eq6_spec(params: SystemParams) -> MasterEquationSpec:
    """Ions only after eliminating the cavity: Gamma*D[J] plus rotated ionic decay."""
    j = model.jump_operator(params).matrix
    channels = (Channel(params.reservoir_rate, constant(j), label="reservoir"),) + _ion_decay(
        params, False
    )
    return MasterEquationSpec("eq6", TWO_IONS, None, channels, False, params.max_rate(), params.digest())


def eq7_spec(params: SystemParams) -> MasterEquationSpec:
    """Ideal engineered reservoir: Gamma*D[J] only."""
    j = model.jump_operator(params).matrix
    channels = (Channel(params.reservoir_rate, constant(j), label="reservoir"),)
    return MasterEquationSpec("eq7", TWO_IONS, None, channels, False, params.max_rate(), params.digest())


# -- integration ------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    metadata: dict = field(default_factory=dict)
    observations: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    def density(self, i: int) -> DensityOperator:
        return DensityOperator(HilbertSpace(tuple(self.metadata["factor_dims"])), self.states[i])

    @property
    def final(self) -> DensityOperator:
        return self.density(-1)


def _liouvillian(spec: MasterEquationSpec) -> np.ndarray:
    """Superoperator acting on row-major vec(rho): vec(A rho B) = (A kron B^T) vec(rho)."""
    d = spec.space.dim
    eye = np.eye(d)
    t0 = np.zeros(1)
    lv = np.zeros((d * d, d * d), dtype=complex)
    if spec.hamiltonian is not None:
        h = spec.hamiltonian(t0)[0]
        lv += -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for ch in spec.channels:
        if ch.rate == 0:
            continue
        a = ch.jump(t0)[0]
        ada = a.conj().T @ a
        lv += ch.rate * (np.kron(a, a.conj()) - 0.5 * (np.kron(ada, eye) + np.kron(eye, ada.T)))
    return lv


def _check_state(rho: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(rho)):
        raise IntegrationError("non-finite density matrix", t)
    drift = abs(np.trace(rho) - 1)
    if drift > TRACE_DRIFT_TOL:
        raise IntegrationError(f"trace drift {drift:.3e}", t)
    low = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if low < -NEGATIVITY_TOL:
        raise IntegrationError(f"negative eigenvalue {low:.3e}", t)


def _as_density(rho0, space: HilbertSpace) -> np.ndarray:
    if isinstance(rho0, StateVector):
        rho0 = rho0.density()
    if isinstance(rho0, DensityOperator):
        if rho0.space != space:
            raise DimensionError(f"initial state on {rho0.space.factor_dims}, spec on {space.factor_dims}")
        rho0.check()
        return np.array(rho0.matrix)
    rho = np.asarray(rho0, dtype=complex)
    if rho.shape != (space.dim, space.dim):
        raise DimensionError(f"initial state shape {rho.shape} does not match {space.factor_dims}")
    DensityOperator(space, rho).check()
    return rho.copy()


def step_count(spec: MasterEquationSpec, t_end: float, safety: float = DEFAULT_SAFETY) -> int:
    rate = max(spec.rate_scale, 1.0 / t_end)
    return int(np.ceil(t_end * rate / safety - 1e-9))


def integrate(
    spec: MasterEquationSpec,
    rho0,
    t_end: float,
    *,
    safety: float = DEFAULT_SAFETY,
    stride: Optional[int] = None,
    observer: Optional[Callable[[float, np.ndarray], object]] = None,
    chunk: int = 4096,
    force_generic: bool = False,
) -> Trajectory:
    """Classical fixed-step RK4 from t=0 to ``t_end``.

    The step is ``dt = safety / max_rate`` rounded down so that an integer
    number of steps lands exactly on ``t_end``. States are recorded (and
    checked for trace drift and negativity) every ``stride`` steps and at the
    end; ``observer(t, rho)`` is called at each recorded point and its
    results are kept in ``Trajectory.observations``.

    Constant generators are stepped with the precomputed RK4 step map;
    ``force_generic`` uses the time-dependent loop regardless.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    rho = _as_density(rho0, spec.space)
    n = step_count(spec, t_end, safety)
    dt = t_end / n
    if stride is None:
        stride = max(1, n // 200)
    stride = max(1, int(stride))

    times, states, obs = [0.0], [rho.copy()], []
    if observer is not None:
        obs.append(observer(0.0, rho))

    def record(k: int, r: np.ndarray):
        t = t_end if k == n else k * dt
        _check_state(r, t)
        times.append(t)
        states.append(r.copy())
        if observer is not None:
            obs.append(observer(t, r))

    if spec.time_dependent or force_generic:
        _run_time_dependent(spec, rho, n, dt, stride, record, chunk)
    else:
        _run_constant(spec, rho, n, dt, stride, record)

    meta = {
        "spec": spec.name,
        "params_digest": spec.params_digest,
        "factor_dims": list(spec.space.factor_dims),
        "steps": n,
        "dt": dt,
        "safety": safety,
    }
    return Trajectory(np.array(times), np.array(states), meta, obs)


def _rk4_polynomial(lv: np.ndarray, dt: float) -> np.ndarray:
    x = dt * lv
    eye = np.eye(lv.shape[0])
    x2 = x @ x
    x3 = x2 @ x
    return eye + x + x2 / 2 + x3 / 6 + x3 @ x / 24


def _run_constant(spec, rho, n, dt, stride, record):
    # with a constant generator one RK4 step is the fixed linear map sum_k (dt L)^k / k!, k <= 4
    d = spec.space.dim
    step = _rk4_polynomial(_liouvillian(spec), dt)
    jump = np.linalg.matrix_power(step, stride)
    v = rho.reshape(d * d)
    k = 0
    while k + stride <= n:
        v = jump @ v
        k += stride
        record(k, v.reshape(d, d))
    if k < n:
        v = np.linalg.matrix_power(step, n - k) @ v
        record(n, v.reshape(d, d))


def _generator_batch(spec: MasterEquationSpec, ts: np.ndarray):
    """Effective non-Hermitian Hamiltonian and sqrt(rate)-scaled jumps at ``ts``."""
    d = spec.space.dim
    heff = np.zeros((len(ts), d, d), dtype=complex)
    if spec.hamiltonian is not None:
        heff += spec.hamiltonian(ts)
    jumps = []
    for ch in spec.channels:
        if ch.rate == 0:
            continue
        a = np.sqrt(ch.rate) * np.asarray(ch.jump(ts))
        a = np.broadcast_to(a, (len(ts), d, d))
        heff = heff - 0.5j * (np.swapaxes(a.conj(), -1, -2) @ a)
        jumps.append(a)
    if jumps:
        stack = np.stack(jumps, axis=1)
    else:
        stack = np.zeros((len(ts), 0, d, d), dtype=complex)
    return heff, stack, np.swapaxes(stack.conj(), -1, -2)


def _run_time_dependent(spec, rho, n, dt, stride, record, chunk):
    # generators are needed on the half-step grid t = m*dt/2, m = 0..2n
    def rhs(h, ls, lds, r):
        out = -1j * (h @ r - r @ h.conj().T)
        if ls.shape[0]:
            out += (ls @ r @ lds).sum(axis=0)
        return out

    half = 0.5 * dt
    k = 0
    while k < n:
        m = min(chunk, n - k)
        ts = (2 * k + np.arange(2 * m + 1)) * half
        heff, ls, lds = _generator_batch(spec, ts)
        for j in range(m):
            a, b, c = 2 * j, 2 * j + 1, 2 * j + 2
            k1 = rhs(heff[a], ls[a], lds[a], rho)
            k2 = rhs(heff[b], ls[b], lds[b], rho + half * k1)
            k3 = rhs(heff[b], ls[b], lds[b], rho + half * k2)
            k4 = rhs(heff[c], ls[c], lds[c], rho + dt * k3)
            rho = rho + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            k += 1
            if k % stride == 0 or k == n:
                record(k, rho)
    return rho


def propagate_pure(params: SystemParams, psi0: StateVector, t: float) -> StateVector:
    """R(t) psi0 using the closed-form frame unitary."""
    if psi0.space != TWO_IONS:
        raise DimensionError("propagate_pure acts on the two-ion space")
    return model.frame_unitary_at(params, t) @ psi0


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(0.5 * np.abs(np.linalg.eigvalsh(a - b)).sum())


def adiabatic_elimination_deviation(
    params: SystemParams,
    psi_ions: np.ndarray,
    reservoir_times: float = 5.0,
    safety: float = DEFAULT_SAFETY,
) -> float:
    """Max trace distance between ion-reduced cavity dynamics and the ideal reservoir.

    Runs the cavity model from ``psi_ions`` with the cavity in vacuum and the
    ion-only reservoir model from ``psi_ions`` up to ``reservoir_times / Gamma``,
    then compares the two ion states at every recorded time.
    """
    psi = np.asarray(psi_ions, dtype=complex)
    vac = np.zeros(params.n_max + 1, dtype=complex)
    vac[0] = 1
    full = np.kron(psi, vac)
    t_end = reservoir_times / params.reservoir_rate
    stride = max(1, step_count(eq7_spec(params), t_end, safety) // 400)
    with_cavity = integrate(eq5_spec(params), np.outer(full, full.conj()), t_end, safety=safety, stride=stride)
    ideal = integrate(eq7_spec(params), np.outer(psi, psi.conj()), t_end, safety=safety, stride=stride)
    if not np.allclose(with_cavity.times, ideal.times):
        raise IntegrationError("sample grids differ", t_end)
    space = _cavity_space(params)
    return max(
        trace_distance(partial_trace(DensityOperator(space, x), [0, 1]).matrix, y)
        for x, y in zip(with_cavity.states, ideal.states)
    )
