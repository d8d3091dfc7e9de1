"""Dense linear algebra on small composite Hilbert spaces.

Conventions used throughout the package:

* factor order is (ion A, ion B[, cavity]);
* each ion is stored in the order (|e>, |g>), so ``sigma_z |e> = +|e>``;
* the cavity is truncated to Fock states |0> ... |n_max>.

Every value type wraps a read-only numpy array, so instances can be shared
freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence, Union

import numpy as np

DEGENERACY_TOL = 1e-8
NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10


class DimensionError(ValueError):
    """Operands live on incompatible spaces."""


class NotHermitianError(ValueError):
    pass


class NotNormalizedError(ValueError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HilbertSpace:
    factor_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims:
            raise DimensionError("a Hilbert space needs at least one factor")
        if any(d < 2 for d in dims):
            raise DimensionError(f"every factor must have dimension >= 2, got {dims}")
        object.__setattr__(self, "factor_dims", dims)

    @property
    def dim(self) -> int:
        return int(np.prod(self.factor_dims))

    @property
    def n_factors(self) -> int:
        return len(self.factor_dims)

    def __add__(self, other: "HilbertSpace") -> "HilbertSpace":
        return HilbertSpace(self.factor_dims + other.factor_dims)


QUBIT = HilbertSpace((2,))
TWO_IONS = HilbertSpace((2, 2))


def ions_with_cavity(n_max: int) -> HilbertSpace:
    return HilbertSpace((2, 2, n_max + 1))


@dataclass(frozen=True)
class StateVector:
    space: HilbertSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.size != self.space.dim:
            raise DimensionError(
                f"{amps.size} amplitudes for a space of dimension {self.space.dim}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def of(cls, amplitudes: Sequence[complex], dims: Sequence[int] | None = None) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if dims is None:
            dims = (2,) * int(round(np.log2(amps.size)))
        return cls(HilbertSpace(tuple(dims)), amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm
        if n == 0:
            raise NotNormalizedError("cannot normalize the zero vector")
        return StateVector(self.space, self.amplitudes / n)

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm - 1.0) < tol

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        _same_space(self.space, other.space)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityOperator":
        return DensityOperator(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)


@dataclass(frozen=True)
class LinearOperator:
    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        d = self.space.dim
        if mat.shape != (d, d):
            raise DimensionError(f"matrix shape {mat.shape} does not match dimension {d}")
        object.__setattr__(self, "matrix", mat)

    def dag(self) -> "LinearOperator":
        return LinearOperator(self.space, self.matrix.conj().T)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.abs(self.matrix - self.matrix.conj().T).max() < tol)

    def is_unitary(self, tol: float = 1e-10) -> bool:
        eye = np.eye(self.space.dim)
        return bool(np.abs(self.matrix.conj().T @ self.matrix - eye).max() < tol)

    def __matmul__(self, other):
        if isinstance(other, LinearOperator):
            _same_space(self.space, other.space)
            return LinearOperator(self.space, self.matrix @ other.matrix)
        if isinstance(other, StateVector):
            _same_space(self.space, other.space)
            return StateVector(self.space, self.matrix @ other.amplitudes)
        return NotImplemented

    def __add__(self, other: "LinearOperator") -> "LinearOperator":
        _same_space(self.space, other.space)
        return LinearOperator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "LinearOperator") -> "LinearOperator":
        _same_space(self.space, other.space)
        return LinearOperator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "LinearOperator":
        return LinearOperator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True)
class DensityOperator:
    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        d = self.space.dim
        if mat.shape != (d, d):
            raise DimensionError(f"matrix shape {mat.shape} does not match dimension {d}")
        object.__setattr__(self, "matrix", mat)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def check(self, herm_tol: float = 1e-10, trace_tol: float = 1e-9, psd_tol: float = 1e-9) -> None:
        """Raise ValueError unless Hermitian, unit-trace and positive semidefinite."""
        dev = np.abs(self.matrix - self.matrix.conj().T).max()
        if dev > herm_tol:
            raise NotHermitianError(f"density operator not Hermitian (deviation {dev:.3e})")
        if abs(np.trace(self.matrix) - 1) > trace_tol:
            raise ValueError(f"density operator trace {np.trace(self.matrix):.12g} != 1")
        lo = self.eigenvalues().min()
        if lo < -psd_tol:
            raise ValueError(f"density operator has negative eigenvalue {lo:.3e}")

    def expectation(self, op: LinearOperator) -> complex:
        return complex(np.trace(self.matrix @ op.matrix))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


Operand = Union[StateVector, LinearOperator, DensityOperator]


def _same_space(a: HilbertSpace, b: HilbertSpace) -> None:
    if a != b:
        raise DimensionError(f"space mismatch: {a.factor_dims} vs {b.factor_dims}")


def tensor_product(*parts: Operand) -> Operand:
    """Kronecker product of states or operators, factors concatenated left to right."""
    if not parts:
        raise ValueError("tensor_product needs at least one operand")
    kind = type(parts[0])
    if any(type(p) is not kind for p in parts):
        raise TypeError("tensor_product operands must all be of the same kind")
    space = reduce(lambda s, p: s + p.space, parts[1:], parts[0].space)
    if kind is StateVector:
        return StateVector(space, reduce(np.kron, [p.amplitudes for p in parts]))
    return kind(space, reduce(np.kron, [p.matrix for p in parts]))


def partial_trace(rho: DensityOperator, keep: Sequence[int]) -> DensityOperator:
    """Trace out every factor not listed in ``keep``; kept factors retain their order."""
    dims = rho.space.factor_dims
    keep = sorted(set(int(k) for k in keep))
    if not keep or any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionError(f"invalid factor indices {keep} for {len(dims)} factors")
    n = len(dims)
    tensor = rho.matrix.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # einsum labels: row indices 0..n-1, column indices n..2n-1; traced pairs share a label
    row = list(range(n))
    col = [i if i in traced else n + i for i in range(n)]
    out = keep + [n + k for k in keep]
    reduced = np.einsum(tensor, row + col, out)
    kept_dims = tuple(dims[k] for k in keep)
    d = int(np.prod(kept_dims))
    return DensityOperator(HilbertSpace(kept_dims), reduced.reshape(d, d))


@dataclass(frozen=True)
class SchmidtDecomposition:
    coefficients: np.ndarray
    left_vectors: tuple[StateVector, ...]
    right_vectors: tuple[StateVector, ...]
    degenerate: bool

    def reconstruct(self) -> np.ndarray:
        return sum(
            np.sqrt(p) * np.kron(u.amplitudes, v.amplitudes)
            for p, u, v in zip(self.coefficients, self.left_vectors, self.right_vectors)
        )


def schmidt_decompose(
    psi: StateVector, split: int = 1, degeneracy_tol: float = DEGENERACY_TOL
) -> SchmidtDecomposition:
    """Schmidt form of a pure state across factors[:split] | factors[split:].

    Coefficients are the squared singular values (they sum to one), sorted
    in descending order.
    """
    if not psi.is_normalized():
        raise NotNormalizedError(f"state norm {psi.norm:.12g} != 1")
    dims = psi.space.factor_dims
    if not 0 < split < len(dims):
        raise DimensionError(f"split {split} does not bipartition {len(dims)} factors")
    left, right = dims[:split], dims[split:]
    m = psi.amplitudes.reshape(int(np.prod(left)), int(np.prod(right)))
    u, s, vh = np.linalg.svd(m)
    k = len(s)
    p = s**2
    p = p / p.sum()
    lvecs = tuple(StateVector(HilbertSpace(left), u[:, i]) for i in range(k))
    rvecs = tuple(StateVector(HilbertSpace(right), vh[i, :]) for i in range(k))
    degenerate = k > 1 and abs(p[0] - p[1]) < degeneracy_tol
    return SchmidtDecomposition(_frozen(p).real.copy(), lvecs, rvecs, degenerate)


def expm_herm_2x2(generator: np.ndarray, t) -> np.ndarray:
    """exp(-i t G) for a Hermitian 2x2 G, via G = a0 I + a.sigma.

    ``t`` may be an array; the result then has shape ``t.shape + (2, 2)``.
    """
    g = np.asarray(generator, dtype=complex)
    a0 = 0.5 * (g[0, 0] + g[1, 1]).real
    az = 0.5 * (g[0, 0] - g[1, 1]).real
    ax = g[0, 1].real
    ay = -g[0, 1].imag
    w = np.sqrt(ax * ax + ay * ay + az * az)
    t = np.asarray(t, dtype=float)
    c = np.cos(w * t)
    # sin(w t)/w, finite at w=0
    sw = t * np.sinc(w * t / np.pi)
    phase = np.exp(-1j * a0 * t)
    out = np.empty(t.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c - 1j * sw * az
    out[..., 0, 1] = -1j * sw * (ax - 1j * ay)
    out[..., 1, 0] = -1j * sw * (ax + 1j * ay)
    out[..., 1, 1] = c + 1j * sw * az
    return out * phase[..., None, None]


def expm_2x2(generator: LinearOperator, t: float) -> LinearOperator:
    if generator.space.dim != 2:
        raise DimensionError("expm_2x2 needs a single two-level factor")
    if np.abs(generator.matrix - generator.matrix.conj().T).max() > 1e-12:
        raise NotHermitianError("generator must be Hermitian")
    return LinearOperator(generator.space, expm_herm_2x2(generator.matrix, t))


def eigh(op: LinearOperator, require_hermitian: bool = True):
    """Ascending eigenvalues and orthonormal eigenvectors (as StateVectors)."""
    m = op.matrix
    if require_hermitian and np.abs(m - m.conj().T).max() > HERMITIAN_TOL:
        raise NotHermitianError("operator is not Hermitian")
    try:
        vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigendecomposition did not converge: {exc}") from exc
    resid = np.abs(m @ vecs - vecs * vals).max()
    scale = max(1.0, float(np.abs(vals).max()))
    if resid > 1e-10 * scale:
        raise np.linalg.LinAlgError(f"eigenpair residual {resid:.3e} too large")
    return vals, [StateVector(op.space, vecs[:, i]) for i in range(len(vals))]
