"""Entanglement, fidelity and geometric-phase observables of the protected evolution."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from . import lindblad, model
from .dfs import DfsCoordinates, ReservoirParameters, psi_e_params, psi_e, psi_e_state_at, psi_r
from .hilbert import (
    TWO_IONS,
    DensityOperator,
    DimensionError,
    StateVector,
    schmidt_decompose,
)
from .model import SystemParams

DEFAULT_PANELS = 4096
CYCLIC_TOL = 1e-9
PHASE_SNAP = 1e-9
FIDELITY_SLACK = 1e-9
ROUNDOFF_EIGENVALUE = 1e-14

SIGMA_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


class CyclicityError(ValueError):
    """omega1/omega2 is not an integer, so the protected evolution is not periodic."""


def wrap_phase(x: float) -> float:
    """Map a phase into (-pi, pi], snapping values within PHASE_SNAP of -pi to +pi."""
    y = float(np.mod(x + np.pi, 2 * np.pi) - np.pi)
    if y <= -np.pi + PHASE_SNAP or y > np.pi:
        return float(np.pi)
    return y


def phase_distance(a: float, b: float) -> float:
    """Distance between two phases on the circle."""
    return abs(float(np.angle(np.exp(1j * (a - b)))))


# -- entanglement --------------------------------------------------------


def concurrence(state) -> float:
    """Wootters concurrence of a two-qubit state (StateVector or DensityOperator)."""
    if isinstance(state, StateVector):
        if state.space != TWO_IONS:
            raise DimensionError("concurrence needs a two-qubit state")
        psi = state.amplitudes
        return float(min(1.0, abs(psi @ SIGMA_YY @ psi)))
    if not isinstance(state, DensityOperator):
        state = DensityOperator(TWO_IONS, np.asarray(state, dtype=complex))
    if state.space != TWO_IONS:
        raise DimensionError("concurrence needs a two-qubit state")
    state.check()
    # lambda_i are the singular values of A^T (sy x sy) A with rho = A A^dag;
    # eigenvalues at roundoff level are dropped so their square roots cannot leak in
    vals, vecs = np.linalg.eigh(state.matrix)
    vals = np.where(vals > ROUNDOFF_EIGENVALUE, vals, 0.0)
    a = vecs * np.sqrt(vals)
    lam = np.linalg.svd(a.T @ SIGMA_YY @ a, compute_uv=False)
    return float(np.clip(lam[0] - lam[1:].sum(), 0.0, 1.0))


# -- fidelity ------------------------------------------------------------


@dataclass
class FidelityCurve:
    times: np.ndarray
    fidelity: np.ndarray
    period: float = 1.0
    metadata: dict = field(default_factory=dict)

    @property
    def t_over_period(self) -> np.ndarray:
        return self.times / self.period

    def __post_init__(self):
        f = np.asarray(self.fidelity)
        if f.size and (f.min() < -FIDELITY_SLACK or f.max() > 1 + FIDELITY_SLACK):
            raise ValueError(f"fidelity outside [0, 1]: [{f.min()}, {f.max()}]")


def fidelity_trace(analytic, rho_prime, params: SystemParams, t: float) -> float:
    """<Psi(t)| R(t) rho'(t) R^dag(t) |Psi(t)>."""
    psi = analytic.amplitudes if isinstance(analytic, StateVector) else np.asarray(analytic)
    rho = rho_prime.matrix if isinstance(rho_prime, DensityOperator) else np.asarray(rho_prime)
    if psi.shape != (4,) or rho.shape != (4, 4):
        raise DimensionError("fidelity_trace works on the two-ion space")
    r = model.frame_unitary_at(params, t).matrix
    phi = r.conj().T @ psi
    return float(np.vdot(phi, rho @ phi).real)


def fig1_fidelity(
    params: Optional[SystemParams] = None,
    periods: float = 100.0,
    *,
    safety: float = lindblad.DEFAULT_SAFETY,
    stride: Optional[int] = None,
) -> FidelityCurve:
    """Fidelity of the ion-only dynamics with spontaneous emission, started from psi_e().

    The reference is the ideal protected trajectory of psi_e().

    ``params`` defaults to :func:`psi_e_params`. At those drive phases the ideal
    trajectory has a closed form; otherwise it is R(t) psi_e().
    """
    params = params or psi_e_params()
    t_end = periods * params.period
    closed = ReservoirParameters.of(params) == ReservoirParameters.of(psi_e_params())

    def observe(t, rho):
        ideal = psi_e_state_at(params, t) if closed else lindblad.propagate_pure(params, psi_e(), t)
        return fidelity_trace(ideal, rho, params, t)

    traj = lindblad.integrate(
        lindblad.eq6_spec(params), psi_e(), t_end, safety=safety, stride=stride, observer=observe
    )
    return FidelityCurve(traj.times, np.array(traj.observations), params.period, traj.metadata)


# -- geometric phases ----------------------------------------------------


@dataclass(frozen=True)
class GeometricPhaseResult:
    value: float  # wrapped into (-pi, pi]
    method: str  # "closed-form", "quadrature" or "degenerate"
    quadrature_points: int = 0
    raw: Optional[float] = None
    closed_form: Optional[float] = None


def cycle_number(params: SystemParams) -> int:
    """N = omega1/omega2, required to be an integer."""
    if params.omega2 <= 0:
        raise CyclicityError("omega2 must be positive for a cyclic evolution")
    ratio = params.omega1 / params.omega2
    n = int(round(ratio))
    if abs(ratio - n) > CYCLIC_TOL * max(1.0, ratio):
        raise CyclicityError(f"omega1/omega2 = {ratio!r} is not an integer")
    return n


def _grid(params: SystemParams, panels: int) -> np.ndarray:
    if panels < 2 or panels % 2:
        raise ValueError("Simpson quadrature needs an even number of panels")
    return np.linspace(0.0, params.period, panels + 1)


def global_geometric_phase(
    coords: DfsCoordinates, params: SystemParams, panels: int = DEFAULT_PANELS
) -> GeometricPhaseResult:
    """i * integral of <Psi|dPsi/dt> over one period; closed form 2*pi*(1 - r)."""
    cycle_number(params)
    psi = psi_r(coords, params).amplitudes
    ts = _grid(params, panels)
    ra, rda = model.ion_frame(params, "A", ts)
    rb, rdb = model.ion_frame(params, "B", ts)
    r = model._kron_batch(ra, rb)
    rdot = model._kron_batch(rda, rb) + model._kron_batch(ra, rdb)
    overlap = abs(np.vdot(psi, r[-1] @ psi))
    if abs(overlap - 1) > 1e-9:
        raise CyclicityError(f"state does not return after one period (|overlap| = {overlap:.12g})")
    generator = np.swapaxes(r.conj(), -1, -2) @ rdot
    integrand = 1j * np.einsum("i,tij,j->t", psi.conj(), generator, psi)
    raw = float(simpson(integrand.real, x=ts))
    closed = 2 * np.pi * (1 - coords.r)
    return GeometricPhaseResult(wrap_phase(raw), "quadrature", panels + 1, raw, closed)


def subsystem_closed_form(r: float, n_cycles: int) -> float:
    """arg[(-1)^(N+1) (cos(s pi) + i sqrt(1-r^2) sin(s pi))], s = sqrt((1-r)/(1+r)).

    For odd N the sign prefactor is one. For even N the single-ion frame
    returns to -I after a period, which shifts every subsystem phase by pi.
    """
    if r >= 1.0:
        return 0.0
    s = np.sqrt((1 - r) / (1 + r))
    z = np.cos(s * np.pi) + 1j * np.sqrt(1 - r * r) * np.sin(s * np.pi)
    if n_cycles % 2 == 0:
        z = -z
    return wrap_phase(np.angle(z))


def subsystem_geometric_phase(
    coords: DfsCoordinates,
    params: SystemParams,
    which: str = "A",
    method: str = "quadrature",
    panels: int = DEFAULT_PANELS,
) -> GeometricPhaseResult:
    """Geometric phase of one ion's reduced state under the bilocal frame unitary.

    beta = arg sum_k p_k <mu_k|R(tau)|mu_k> exp(-integral <mu_k|R^dag dR/dt|mu_k> dt),
    with p_k, |mu_k> the Schmidt data of |Psi_r> on that ion. Degenerate
    Schmidt coefficients (r = 1) give zero.
    """
    if method not in ("quadrature", "closed-form"):
        raise ValueError(f"unknown method {method!r}")
    n = cycle_number(params)
    decomp = schmidt_decompose(psi_r(coords, params))
    if decomp.degenerate:
        return GeometricPhaseResult(0.0, "degenerate", 0, 0.0, 0.0)
    closed = subsystem_closed_form(coords.r, n)
    if method == "closed-form":
        return GeometricPhaseResult(closed, "closed-form", 0, closed, closed)

    vectors = decomp.left_vectors if which == "A" else decomp.right_vectors
    ts = _grid(params, panels)
    r, rdot = model.ion_frame(params, which, ts)
    generator = np.swapaxes(r.conj(), -1, -2) @ rdot
    total = 0j
    for p, vec in zip(decomp.coefficients, vectors):
        if p == 0:
            continue
        mu = vec.amplitudes
        integrand = np.einsum("i,tij,j->t", mu.conj(), generator, mu)
        # the integrand is purely imaginary
        exponent = 1j * simpson(integrand.imag, x=ts)
        total += p * np.vdot(mu, r[-1] @ mu) * np.exp(-exponent)
    value = wrap_phase(np.angle(total))
    return GeometricPhaseResult(value, "quadrature", panels + 1, float(np.angle(total)), closed)


def phase_vs_entanglement_sweep(
    params: SystemParams, r_grid: Sequence[float], panels: int = DEFAULT_PANELS
) -> list[dict]:
    """One row per r: global phase (raw and wrapped) and subsystem phase (both methods)."""
    rows = []
    for r in r_grid:
        coords = DfsCoordinates(float(r))
        glob = global_geometric_phase(coords, params, panels)
        closed = subsystem_geometric_phase(coords, params, "A", "closed-form", panels)
        quad = subsystem_geometric_phase(coords, params, "A", "quadrature", panels)
        rows.append(
            {
                "r": float(r),
                "beta_global_raw": glob.raw,
                "beta_global_wrapped": glob.value,
                "beta_sub_closed": closed.value,
                "beta_sub_quadrature": quad.value,
            }
        )
    return rows
