"""Decoherence-free subspace of the engineered reservoir and its protected states.

The jump operator ``J = sigma^A_{+-} + sigma^B_{+-}`` annihilates the span of

    |1> = |++>,   |2> = (|-+> - |+->)/sqrt(2),

so every ``|Psi_r> = sqrt(1-r)|1> + sqrt(r) e^{i mu}|2>`` is stationary in the
rotating frame and evolves as ``R(t)|Psi_r>`` in the interaction picture.
The remaining states ``|3> = |-->`` and ``|4> = (|-+> + |+->)/sqrt(2)`` complete
the symmetric sector, which decays to ``|1>``.

:func:`invert_parameters` goes the other way: given a two-ion pure state it
finds drive phases and ``(r, mu)`` such that ``|Psi_r>`` equals that state at
``t = 0`` up to a global phase.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from . import model
from .hilbert import TWO_IONS, DimensionError, NotNormalizedError, StateVector
from .model import SystemParams

TWO_PI = 2 * np.pi
SQRT2 = np.sqrt(2.0)
ACCEPT_RESIDUAL = 1e-9
NO_SOLUTION_RESIDUAL = 1e-6
START_ANGLES = (-2 * np.pi / 3, 0.0, 2 * np.pi / 3)


class NoSolutionError(ValueError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def wrap_angle(x: float) -> float:
    """Map an angle into (-pi, pi]."""
    y = float(np.mod(x + np.pi, TWO_PI) - np.pi)
    if y <= -np.pi + 1e-12:
        y = np.pi
    return y


def wrap_mu(mu: float) -> float:
    """Map a relative phase into (0, 2*pi]."""
    y = float(np.mod(mu, TWO_PI))
    if y < 1e-12 or TWO_PI - y < 1e-12:
        y = TWO_PI
    return y


@dataclass(frozen=True)
class DfsCoordinates:
    """Location ``(r, mu)`` of a protected state; ``r`` is its concurrence."""

    r: float
    mu: float = TWO_PI

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"r must lie in [0, 1], got {self.r!r}")
        if not 0.0 < self.mu <= TWO_PI:
            raise ValueError(f"mu must lie in (0, 2*pi], got {self.mu!r}")

    @classmethod
    def wrapped(cls, r: float, mu: float) -> "DfsCoordinates":
        return cls(float(np.clip(r, 0.0, 1.0)), wrap_mu(mu))


@dataclass(frozen=True)
class ReservoirParameters:
    """The four adjustable drive phases, reported in (-pi, pi]."""

    phi_a1: float
    phi_b1: float
    varphi_a: float
    varphi_b: float

    def __post_init__(self):
        for name in ("phi_a1", "phi_b1", "varphi_a", "varphi_b"):
            object.__setattr__(self, name, wrap_angle(getattr(self, name)))

    @classmethod
    def of(cls, params: SystemParams) -> "ReservoirParameters":
        return cls(params.phi_a1, params.phi_b1, params.varphi_a, params.varphi_b)

    def apply_to(self, params: SystemParams) -> SystemParams:
        return params.with_(
            phi_a1=self.phi_a1, phi_b1=self.phi_b1, varphi_a=self.varphi_a, varphi_b=self.varphi_b
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.phi_a1, self.phi_b1, self.varphi_a, self.varphi_b])

    def to_dict(self) -> dict:
        return {
            "phi_a1": self.phi_a1,
            "phi_b1": self.phi_b1,
            "varphi_a": self.varphi_a,
            "varphi_b": self.varphi_b,
        }


@dataclass(frozen=True)
class InversionResult:
    params: ReservoirParameters
    coords: DfsCoordinates
    residual: float
    status: str  # "exact-closed-form" or "numeric"
    branch: str = ""


# -- basis and protected family ------------------------------------------


def _basis_matrix(phases) -> np.ndarray:
    """Columns |1>..|4> in the bare basis for phases (phi_a1, phi_b1, varphi_a, varphi_b)."""
    pa, ma = model.dressed_pair(phases[0], phases[2])
    pb, mb = model.dressed_pair(phases[1], phases[3])
    mp, pm = np.kron(ma, pb), np.kron(pa, mb)
    return np.stack(
        [np.kron(pa, pb), (mp - pm) / SQRT2, np.kron(ma, mb), (mp + pm) / SQRT2], axis=1
    )


def _phases(params: SystemParams) -> tuple[float, float, float, float]:
    return params.phi_a1, params.phi_b1, params.varphi_a, params.varphi_b


def dfs_basis(params: SystemParams) -> tuple[StateVector, StateVector, StateVector, StateVector]:
    m = _basis_matrix(_phases(params))
    return tuple(StateVector(TWO_IONS, m[:, k]) for k in range(4))


def psi_r(coords: DfsCoordinates, params: SystemParams) -> StateVector:
    m = _basis_matrix(_phases(params))
    amps = np.sqrt(1 - coords.r) * m[:, 0] + np.sqrt(coords.r) * np.exp(1j * coords.mu) * m[:, 1]
    return StateVector(TWO_IONS, amps)


def coefficients_at(coords: DfsCoordinates, params: SystemParams, t) -> np.ndarray:
    """Amplitudes on (|ee>, |eg>, |ge>, |gg>) of R(t)|Psi_r>, in closed form.

    ``t`` may be an array; the result then has shape ``t.shape + (4,)``.
    """
    t = np.asarray(t, dtype=float)
    r, mu = coords.r, coords.mu
    pa, pb = params.phi_a1, params.phi_b1
    ca, sa = np.cos(params.varphi_a / 2 - params.omega1 * t), np.sin(params.varphi_a / 2 - params.omega1 * t)
    cb, sb = np.cos(params.varphi_b / 2 - params.omega1 * t), np.sin(params.varphi_b / 2 - params.omega1 * t)
    ent = np.exp(1j * mu) * np.sqrt(r) / SQRT2
    prod = np.sqrt(1 - r)
    w = np.exp(-2j * params.omega2 * t)

    c1 = -1j * ent * (np.exp(1j * pb) * ca * sb - np.exp(1j * pa) * sa * cb) + w * prod * ca * cb
    c2 = -ent * (ca * cb + np.exp(1j * (pa - pb)) * sa * sb) + 1j * np.exp(-1j * pb) * w * prod * ca * sb
    c3 = ent * (ca * cb + np.exp(1j * (pb - pa)) * sa * sb) + 1j * np.exp(-1j * pa) * w * prod * sa * cb
    c4 = -1j * ent * (np.exp(-1j * pa) * sa * cb - np.exp(-1j * pb) * ca * sb) - np.exp(
        -1j * (pa + pb)
    ) * w * prod * sa * sb
    return np.stack([c1, c2, c3, c4], axis=-1)


def analytic_state_at(coords: DfsCoordinates, params: SystemParams, t: float) -> StateVector:
    return StateVector(TWO_IONS, coefficients_at(coords, params, float(t)))


# -- the spontaneous-emission example ------------------------------------

PSI_E_AMPLITUDES = np.array([0.0, 0.5, -0.5, 1 / SQRT2], dtype=complex)


def psi_e() -> StateVector:
    """(|eg> - |ge>)/2 + |gg>/sqrt(2)."""
    return StateVector(TWO_IONS, PSI_E_AMPLITUDES)


def psi_e_params(base: Optional[SystemParams] = None) -> SystemParams:
    """Drive phases under which psi_e() follows the closed form of :func:`psi_e_state_at`.

    Of the two phase assignments that keep psi_e() inside the DFS, only
    phi_a1 = pi, phi_b1 = 0 reproduces that closed form.
    """
    base = base or SystemParams()
    return base.with_(phi_a1=np.pi, phi_b1=0.0, varphi_a=np.pi, varphi_b=np.pi)


def psi_e_state_at(params: SystemParams, t):
    """Closed-form amplitudes of R(t) psi_e(); only omega1 and omega2 are read from ``params``.

    Returns a StateVector for scalar ``t`` and an array of shape ``(n, 4)`` otherwise.
    """
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    w = np.exp(-2j * params.omega2 * t)
    s1, c1 = np.sin(params.omega1 * t), np.cos(params.omega1 * t)
    s2, c2 = np.sin(2 * params.omega1 * t), np.cos(2 * params.omega1 * t)
    mid = c2 / 2 + 1j * w * s2 / (2 * SQRT2)
    amps = np.stack(
        [w * s1**2 / SQRT2 - 0.5j * s2, mid, -mid, w * c1**2 / SQRT2 + 0.5j * s2], axis=-1
    )
    return StateVector(TWO_IONS, amps) if scalar else amps


def symmetric_antisymmetric_decompose(
    psi: StateVector, params: SystemParams
) -> tuple[StateVector, StateVector]:
    """Projections onto span{|1>,|3>,|4>} and span{|2>}."""
    _require_pure_two_ion(psi)
    m = _basis_matrix(_phases(params))
    anti = m[:, 1] * np.vdot(m[:, 1], psi.amplitudes)
    return StateVector(TWO_IONS, psi.amplitudes - anti), StateVector(TWO_IONS, anti)


# -- inversion -----------------------------------------------------------


@dataclass(frozen=True)
class Table1Row:
    label: str
    state: np.ndarray
    params: ReservoirParameters
    dfs_overlap: complex  # <2|Psi(0)>, i.e. Psi_r = overlap * |2>


TABLE1 = (
    Table1Row(
        "phi_plus",
        np.array([1, 0, 0, 1]) / SQRT2,
        ReservoirParameters(np.pi / 2, np.pi / 2, 0.0, np.pi),
        1.0,
    ),
    Table1Row(
        "phi_minus",
        np.array([1, 0, 0, -1]) / SQRT2,
        ReservoirParameters(0.0, 0.0, 0.0, np.pi),
        1j,
    ),
    Table1Row(
        "psi_plus",
        np.array([0, 1, 1, 0]) / SQRT2,
        ReservoirParameters(-np.pi / 2, 0.0, np.pi, np.pi),
        -1j,
    ),
    Table1Row(
        "psi_minus",
        np.array([0, 1, -1, 0]) / SQRT2,
        ReservoirParameters(-np.pi / 2, -np.pi / 2, np.pi, np.pi),
        -1.0,
    ),
)


def _require_pure_two_ion(psi: StateVector) -> None:
    if psi.space != TWO_IONS:
        raise DimensionError(f"expected a two-ion state, got factors {psi.space.factor_dims}")
    if not psi.is_normalized(1e-9):
        raise NotNormalizedError(f"state norm {psi.norm:.12g} is not 1")


def _project(phases, psi: np.ndarray) -> tuple[np.ndarray, float, DfsCoordinates]:
    """Overlaps <k|psi>, the leftover weight outside span{|1>,|2>} and the best (r, mu)."""
    m = _basis_matrix(phases)
    a = m.conj().T @ psi
    w1, w2 = abs(a[0]) ** 2, abs(a[1]) ** 2
    inside = w1 + w2
    residual = float(max(0.0, 1.0 - inside))
    if inside == 0:
        return a, residual, DfsCoordinates(0.0)
    r = w2 / inside
    if w1 < 1e-24 or w2 < 1e-24:
        mu = TWO_PI
    else:
        mu = np.angle(a[1]) - np.angle(a[0])
    return a, residual, DfsCoordinates.wrapped(r, mu)


def forward_residual(params: SystemParams, coords: DfsCoordinates, psi0: StateVector) -> float:
    """1 - |<psi0|Psi_r>|^2 with |Psi_r> built from ``params`` at t = 0."""
    overlap = np.vdot(psi0.amplitudes, psi_r(coords, params).amplitudes)
    return float(max(0.0, 1.0 - abs(overlap) ** 2))


def ee_gg_parameters(m: float, n: float, theta: float) -> tuple[ReservoirParameters, DfsCoordinates]:
    """Closed-form solution for m|ee> + n e^{i theta}|gg> with m != n, m, n >= 0."""
    if m < 0 or n < 0:
        raise ValueError("m and n must be non-negative")
    if np.isclose(m, n, rtol=0, atol=1e-12):
        raise ValueError("closed form requires m != n")
    phi1 = 0.5 * (np.pi - theta)
    base = 0.5 * np.pi * (1 + np.sign(n - m))
    tilt = np.arctan(2 * np.sqrt(m * n) / abs(m - n))
    res = ReservoirParameters(phi1, phi1, base - tilt, base + tilt)
    r = 2 * m * n
    return res, DfsCoordinates.wrapped(r, theta / 2 if r > 0 else TWO_PI)


def _closed_form(psi: np.ndarray) -> Optional[tuple[ReservoirParameters, DfsCoordinates, str]]:
    for row in TABLE1:
        if abs(np.vdot(row.state, psi)) ** 2 > 1 - 1e-12:
            return row.params, DfsCoordinates(1.0), f"table1:{row.label}"
    if abs(psi[1]) < 1e-12 and abs(psi[2]) < 1e-12:
        m, n = abs(psi[0]), abs(psi[3])
        if not np.isclose(m, n, rtol=0, atol=1e-9):
            theta = np.angle(psi[3]) - np.angle(psi[0]) if m > 0 and n > 0 else 0.0
            res, coords = ee_gg_parameters(m, n, wrap_mu(theta))
            return res, coords, "ee-gg"
    return None


def _numeric(psi: np.ndarray) -> tuple[ReservoirParameters, DfsCoordinates, float]:
    def resid(x):
        a = _basis_matrix(x).conj().T @ psi
        return np.array([a[2].real, a[2].imag, a[3].real, a[3].imag])

    starts = [np.array(s) for s in itertools.product(START_ANGLES, repeat=4)]
    starts.sort(key=lambda s: float(np.sum(resid(s) ** 2)))
    best_x, best = None, np.inf
    for x0 in starts:
        sol = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        _, residual, _ = _project(sol.x, psi)
        if residual < best:
            best_x, best = sol.x, residual
        if best < 1e-13:
            break
    res = ReservoirParameters(*best_x)
    _, residual, coords = _project(res.as_array(), psi)
    return res, coords, residual


def invert_parameters(
    psi0: StateVector,
    strategy: str = "closed-form-first",
    base: Optional[SystemParams] = None,
) -> InversionResult:
    """Drive phases and DFS coordinates whose protected state equals ``psi0`` at t = 0.

    Every candidate is verified through the forward map. States outside the
    image of the map raise :class:`NoSolutionError`.
    """
    if strategy not in ("closed-form-first", "numeric"):
        raise ValueError(f"unknown strategy {strategy!r}")
    _require_pure_two_ion(psi0)
    base = base or SystemParams()
    psi = psi0.amplitudes

    if strategy == "closed-form-first":
        found = _closed_form(psi)
        if found is not None:
            res, coords, branch = found
            residual = forward_residual(res.apply_to(base), coords, psi0)
            if residual < ACCEPT_RESIDUAL:
                return InversionResult(res, coords, residual, "exact-closed-form", branch)

    res, coords, residual = _numeric(psi)
    residual = forward_residual(res.apply_to(base), coords, psi0)
    if residual > NO_SOLUTION_RESIDUAL:
        raise NoSolutionError(
            f"no drive phases map the DFS onto this state (best residual {residual:.3e})", residual
        )
    return InversionResult(res, coords, residual, "numeric", "least-squares")
