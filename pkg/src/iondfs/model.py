"""Two driven two-level ions coupled to a lossy cavity mode.

Rates are in units of the ion-cavity coupling ``g`` (``g = 1`` by default)
and times in units of ``1/g``.

Both drive-1 fields are resonant with the ionic transition, and each
drive-2 field is detuned by ``-2*omega1``. In the frame

    R^i(t) = exp(-i G1_i t) exp(-i G2_i t),
    G1_i = omega1 (e^{i phi1} sigma_eg + h.c.),
    G2_i = omega2 [cos(varphi) sigma_z + i sin(varphi)(e^{-i phi1} sigma_ge - e^{i phi1} sigma_eg)],

the Hamiltonian reduces, to leading order, to the resonant exchange
``(g/2)[a^dag J + a J^dag]`` with ``J = sigma^A_{+-} + sigma^B_{+-}``.

``omega2`` is the precession rate that appears in ``G2`` (and hence in the
period ``pi/omega2`` of the protected evolution). The static part of a
drive of Rabi amplitude ``A`` in the drive-1 rotating frame is ``A/2``, so
the second drive enters :func:`build_h1` with amplitude ``2*omega2``, and
the cavity sits at ``delta = -2*omega2`` so that it is resonant with the
dressed splitting ``2*omega2``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from .hilbert import (
    TWO_IONS,
    HilbertSpace,
    LinearOperator,
    StateVector,
    expm_herm_2x2,
    ions_with_cavity,
)

SIGMA_EG = np.array([[0, 1], [0, 0]], dtype=complex)  # |e><g|
SIGMA_GE = SIGMA_EG.T.copy()  # |g><e|
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
ID2 = np.eye(2, dtype=complex)

KET_E = np.array([1, 0], dtype=complex)
KET_G = np.array([0, 1], dtype=complex)

HIERARCHY_RATIO = 10.0


@dataclass(frozen=True)
class SystemParams:
    """Physical rates and classical-field phases (all angles in radians)."""

    g: float = 1.0
    kappa: float = 3.0
    gamma_a: float = 1.0 / 500.0
    gamma_b: float = 1.0 / 500.0
    omega1: float = 100.0
    omega2: float = 10.0
    phi_a1: float = 0.0
    phi_b1: float = 0.0
    varphi_a: float = 0.0
    varphi_b: float = 0.0
    n_max: int = 3

    def __post_init__(self):
        for name in ("g", "kappa", "gamma_a", "gamma_b", "omega1", "omega2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite non-negative rate, got {value!r}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def delta(self) -> float:
        """Cavity-ion detuning omega - omega0."""
        return -2.0 * self.omega2

    @property
    def drive2_amplitude(self) -> float:
        return 2.0 * self.omega2

    @property
    def reservoir_rate(self) -> float:
        """Engineered decay rate Gamma = g^2/kappa."""
        if self.kappa == 0:
            return float("inf")
        return self.g**2 / self.kappa

    @property
    def period(self) -> float:
        return np.pi / self.omega2

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def max_rate(self) -> float:
        rates = [self.omega1, self.omega2, self.g, self.kappa, self.gamma_a, self.gamma_b]
        if self.kappa > 0:
            rates.append(self.reservoir_rate)
        return max(rates)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def ion(self, which: str) -> tuple[float, float]:
        """(phi1, varphi) for ion 'A' or 'B'."""
        if which == "A":
            return self.phi_a1, self.varphi_a
        if which == "B":
            return self.phi_b1, self.varphi_b
        raise ValueError(f"ion must be 'A' or 'B', got {which!r}")


def hierarchy_report(params: SystemParams) -> dict:
    """Diagnose (never reject) the regime assumptions behind the reduced models.

    A ratio of at least ``HIERARCHY_RATIO`` is counted as "much larger".
    ``coupling_phase_consistent`` is False when the two ions' effective
    couplings carry different phases e^{2i phi^i_1}; the engineered jump
    operator is then not sigma^A_{+-} + sigma^B_{+-}.
    """
    gamma_max = max(params.gamma_a, params.gamma_b)
    ratio_12 = params.omega1 / params.omega2 if params.omega2 else float("inf")
    ratio_2g = params.omega2 / params.g if params.g else float("inf")
    ratio_res = params.reservoir_rate / gamma_max if gamma_max else float("inf")
    pa = np.exp(2j * params.phi_a1)
    pb = np.exp(2j * params.phi_b1)
    n = ratio_12
    return {
        "omega1_over_omega2": ratio_12,
        "omega2_over_g": ratio_2g,
        "reservoir_over_gamma": ratio_res,
        "omega1_gg_omega2": ratio_12 >= HIERARCHY_RATIO,
        "omega2_gg_g": ratio_2g >= HIERARCHY_RATIO,
        "reservoir_gg_gamma": ratio_res >= HIERARCHY_RATIO,
        "cyclic": bool(np.isfinite(n) and abs(n - round(n)) < 1e-9),
        "coupling_phase_consistent": bool(abs(pa - pb) < 1e-9),
    }


# -- single-ion building blocks -------------------------------------------


@dataclass(frozen=True)
class DressedBasis:
    plus_a: StateVector
    minus_a: StateVector
    plus_b: StateVector
    minus_b: StateVector

    def plus(self, which: str) -> np.ndarray:
        return (self.plus_a if which == "A" else self.plus_b).amplitudes

    def minus(self, which: str) -> np.ndarray:
        return (self.minus_a if which == "A" else self.minus_b).amplitudes


def dressed_pair(phi1: float, varphi: float) -> tuple[np.ndarray, np.ndarray]:
    c, s = np.cos(varphi / 2), np.sin(varphi / 2)
    plus = c * KET_E + 1j * np.exp(-1j * phi1) * s * KET_G
    minus = 1j * np.exp(1j * phi1) * s * KET_E + c * KET_G
    return plus, minus


def dressed_basis(params: SystemParams) -> DressedBasis:
    pa, ma = dressed_pair(params.phi_a1, params.varphi_a)
    pb, mb = dressed_pair(params.phi_b1, params.varphi_b)
    q = HilbertSpace((2,))
    return DressedBasis(StateVector(q, pa), StateVector(q, ma), StateVector(q, pb), StateVector(q, mb))


@dataclass(frozen=True)
class FrameGenerators:
    g1_a: np.ndarray
    g2_a: np.ndarray
    g1_b: np.ndarray
    g2_b: np.ndarray

    def of(self, which: str) -> tuple[np.ndarray, np.ndarray]:
        return (self.g1_a, self.g2_a) if which == "A" else (self.g1_b, self.g2_b)


def _generators(omega1: float, omega2: float, phi1: float, varphi: float):
    e = np.exp(1j * phi1)
    g1 = omega1 * (e * SIGMA_EG + np.conj(e) * SIGMA_GE)
    g2 = omega2 * (
        np.cos(varphi) * SIGMA_Z + 1j * np.sin(varphi) * (np.conj(e) * SIGMA_GE - e * SIGMA_EG)
    )
    return g1, g2


def frame_generators(params: SystemParams) -> FrameGenerators:
    g1a, g2a = _generators(params.omega1, params.omega2, params.phi_a1, params.varphi_a)
    g1b, g2b = _generators(params.omega1, params.omega2, params.phi_b1, params.varphi_b)
    return FrameGenerators(g1a, g2a, g1b, g2b)


def ion_frame(params: SystemParams, which: str, t):
    """R^i(t) and its time derivative for one ion; ``t`` may be an array.

    Returns two arrays of shape ``t.shape + (2, 2)``.
    """
    phi1, varphi = params.ion(which)
    g1, g2 = _generators(params.omega1, params.omega2, phi1, varphi)
    e1 = expm_herm_2x2(g1, t)
    e2 = expm_herm_2x2(g2, t)
    r = e1 @ e2
    rdot = -1j * (g1 @ r + e1 @ g2 @ e2)
    return r, rdot


def _kron_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product over the last two axes, broadcasting leading axes."""
    out = a[..., :, None, :, None] * b[..., None, :, None, :]
    shape = out.shape[:-4] + (a.shape[-2] * b.shape[-2], a.shape[-1] * b.shape[-1])
    return out.reshape(shape)


def _extend(op: np.ndarray, params: SystemParams, with_cavity: bool) -> tuple[HilbertSpace, np.ndarray]:
    if not with_cavity:
        return TWO_IONS, op
    return ions_with_cavity(params.n_max), np.kron(op, np.eye(params.n_max + 1))


def frame_unitary_at(params: SystemParams, t: float, with_cavity: bool = False) -> LinearOperator:
    ra, _ = ion_frame(params, "A", t)
    rb, _ = ion_frame(params, "B", t)
    space, mat = _extend(np.kron(ra, rb), params, with_cavity)
    return LinearOperator(space, mat)


def frame_unitary_derivative_at(params: SystemParams, t: float, with_cavity: bool = False) -> LinearOperator:
    ra, rda = ion_frame(params, "A", t)
    rb, rdb = ion_frame(params, "B", t)
    space, mat = _extend(np.kron(rda, rb) + np.kron(ra, rdb), params, with_cavity)
    return LinearOperator(space, mat)


# -- operators on the full space -----------------------------------------


def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), 1).astype(complex)


def on_ion(op: np.ndarray, which: str) -> np.ndarray:
    """Embed a single-ion operator into the two-ion space."""
    return np.kron(op, ID2) if which == "A" else np.kron(ID2, op)


def _h1_parts(params: SystemParams):
    """Decompose H1(t) = S + (X e^{2i omega1 t} + C e^{-i delta t} + h.c.)."""
    nc = params.n_max + 1
    ic = np.eye(nc)
    a = annihilation(params.n_max)
    static = np.zeros((4 * nc, 4 * nc), dtype=complex)
    fast = np.zeros_like(static)
    for which in ("A", "B"):
        phi1, varphi = params.ion(which)
        phi2 = phi1 - varphi
        drive1 = params.omega1 * np.exp(1j * phi1) * np.kron(on_ion(SIGMA_EG, which), ic)
        static += drive1 + drive1.conj().T
        fast += params.drive2_amplitude * np.exp(1j * phi2) * np.kron(on_ion(SIGMA_EG, which), ic)
    lowering = on_ion(SIGMA_EG, "A") + on_ion(SIGMA_EG, "B")
    coupling = params.g * np.kron(lowering, a)
    return static, fast, coupling


def build_h1(params: SystemParams, t: float) -> LinearOperator:
    """Interaction-picture Hamiltonian with the resonance conditions built in."""
    static, fast, coupling = _h1_parts(params)
    x = np.exp(2j * params.omega1 * t) * fast + np.exp(-1j * params.delta * t) * coupling
    return LinearOperator(ions_with_cavity(params.n_max), static + x + x.conj().T)


def dressed_lowering(params: SystemParams, which: str) -> np.ndarray:
    """|+><-| on one ion, embedded in the two-ion space."""
    plus, minus = dressed_pair(*params.ion(which))
    return on_ion(np.outer(plus, minus.conj()), which)


def jump_operator(params: SystemParams) -> LinearOperator:
    """J = sigma^A_{+-} + sigma^B_{+-}."""
    return LinearOperator(TWO_IONS, dressed_lowering(params, "A") + dressed_lowering(params, "B"))


def _exchange(params: SystemParams, j: np.ndarray) -> LinearOperator:
    x = np.kron(j, annihilation(params.n_max).conj().T)
    return LinearOperator(ions_with_cavity(params.n_max), 0.5 * params.g * (x + x.conj().T))


def build_h2(params: SystemParams) -> LinearOperator:
    """Effective exchange Hamiltonian (g/2)[a^dag J + a J^dag]."""
    return _exchange(params, jump_operator(params).matrix)


def rwa_hamiltonian(params: SystemParams) -> LinearOperator:
    """Static part of the frame Hamiltonian, keeping the per-ion coupling phases.

    Averaging the exact frame Hamiltonian gives
    (g/2)[a^dag sum_i e^{2i phi^i_1} sigma^i_{+-} + h.c.]; it coincides with
    :func:`build_h2` when both phase factors equal one.
    """
    j = sum(np.exp(2j * params.ion(w)[0]) * dressed_lowering(params, w) for w in ("A", "B"))
    return _exchange(params, j)


def rotated_lowering(params: SystemParams, t) -> tuple[np.ndarray, np.ndarray]:
    """R^dag sigma^i_ge R for both ions as 4x4 arrays; ``t`` may be an array."""
    out = []
    for which in ("A", "B"):
        r, _ = ion_frame(params, which, t)
        s = np.swapaxes(r.conj(), -1, -2) @ SIGMA_GE @ r
        out.append(_kron_batch(s, ID2) if which == "A" else _kron_batch(ID2, s))
    return out[0], out[1]


def transformed_decay_ops(params: SystemParams, t: float) -> list[tuple[float, LinearOperator]]:
    sa, sb = rotated_lowering(params, t)
    return [
        (params.gamma_a, LinearOperator(TWO_IONS, sa)),
        (params.gamma_b, LinearOperator(TWO_IONS, sb)),
    ]


# -- frame validation ----------------------------------------------------


def _frame_hamiltonian_batch(params: SystemParams, ts: np.ndarray) -> np.ndarray:
    """R^dag H1 R - i R^dag dR/dt at each time in ``ts``, shape (n, d, d)."""
    ts = np.asarray(ts, dtype=float)
    static, fast, coupling = _h1_parts(params)
    ph_fast = np.exp(2j * params.omega1 * ts)[:, None, None]
    ph_c = np.exp(-1j * params.delta * ts)[:, None, None]
    x = ph_fast * fast + ph_c * coupling
    h1 = static + x + np.swapaxes(x.conj(), -1, -2)
    ra, rda = ion_frame(params, "A", ts)
    rb, rdb = ion_frame(params, "B", ts)
    ic = np.broadcast_to(np.eye(params.n_max + 1, dtype=complex), ts.shape + (params.n_max + 1,) * 2)
    r = _kron_batch(_kron_batch(ra, rb), ic)
    rdot = _kron_batch(_kron_batch(rda, rb) + _kron_batch(ra, rdb), ic)
    rd = np.swapaxes(r.conj(), -1, -2)
    return rd @ h1 @ r - 1j * (rd @ rdot)


def frame_residual(params: SystemParams, t: float) -> LinearOperator:
    """R^dag(t) H1(t) R(t) - i R^dag(t) dR/dt - H2."""
    h = _frame_hamiltonian_batch(params, np.array([t]))[0]
    return LinearOperator(ions_with_cavity(params.n_max), h - build_h2(params).matrix)


def frame_residual_average(params: SystemParams, samples: int = 10_000, chunk: int = 2000) -> float:
    """Spectral norm of the residual averaged over one period pi/omega2 (Simpson rule)."""
    if samples % 2:
        samples += 1
    ts = np.linspace(0.0, params.period, samples + 1)
    weights = _simpson_weights(ts)
    h2 = build_h2(params).matrix
    total = np.zeros_like(h2)
    for start in range(0, len(ts), chunk):
        sl = slice(start, start + chunk)
        res = _frame_hamiltonian_batch(params, ts[sl]) - h2
        total += np.tensordot(weights[sl], res, axes=1)
    return float(np.linalg.norm(total / params.period, 2))


def _simpson_weights(ts: np.ndarray) -> np.ndarray:
    n = len(ts) - 1
    h = (ts[-1] - ts[0]) / n
    w = np.ones(n + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return w * h / 3


def hermitian_expm(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t H) for Hermitian H via eigendecomposition."""
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * t * vals)) @ vecs.conj().T


def frame_propagator_error(params: SystemParams, safety: float = 0.05) -> float:
    """||U_frame(tau) - exp(-i H2 tau)||_2 / tau over one period tau = pi/omega2.

    The exact frame propagator is R^dag(tau) U1(tau), with U1 obtained by RK4
    on H1(t). The ratio is a time-averaged residual rate that carries the
    second-order (Magnus) corrections the plain average misses.
    """
    tau = params.period
    static, fast, coupling = _h1_parts(params)
    rate = 2 * params.omega1 + 2 * params.drive2_amplitude + 2 * params.g * np.sqrt(params.n_max)
    n = int(np.ceil(tau * rate / safety))
    dt = tau / n
    # H1 at 2n+1 equally spaced half steps
    ts = np.arange(2 * n + 1) * (dt / 2)
    u = np.eye(static.shape[0], dtype=complex)

    def h_at(k):
        t = ts[k]
        x = np.exp(2j * params.omega1 * t) * fast + np.exp(-1j * params.delta * t) * coupling
        return static + x + x.conj().T

    h_prev = h_at(0)
    for step in range(n):
        h_mid = h_at(2 * step + 1)
        h_next = h_at(2 * step + 2)
        k1 = -1j * h_prev @ u
        k2 = -1j * h_mid @ (u + 0.5 * dt * k1)
        k3 = -1j * h_mid @ (u + 0.5 * dt * k2)
        k4 = -1j * h_next @ (u + dt * k3)
        u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        h_prev = h_next
    r_tau = frame_unitary_at(params, tau, with_cavity=True).matrix
    u_frame = r_tau.conj().T @ u
    target = hermitian_expm(build_h2(params).matrix, tau)
    return float(np.linalg.norm(u_frame - target, 2) / tau)
