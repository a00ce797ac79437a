"""Exact density-matrix dynamics for small qubit registers.

Density matrices are plain ``(2**N, 2**N)`` complex numpy arrays. Qubit 0 is
the leftmost tensor factor, i.e. the most significant bit of the
computational-basis index; it is the qubit that receives the input.

All functions are pure: they never modify their arguments.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Optional

import numpy as np

from .exceptions import (
    DimensionError,
    DomainError,
    InvariantError,
    NumericalError,
    ParameterError,
    ValidationError,
)

MAX_QUBITS = 12

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
UNITARY_TOL = 1e-9


class Topology(str, enum.Enum):
    FULL = "full"
    NN1D = "1dnn"


class Axis(str, enum.Enum):
    Z = "z"
    X = "x"


# --------------------------------------------------------------------------- #
# Basis helpers
# --------------------------------------------------------------------------- #


def n_qubits_of(rho: np.ndarray) -> int:
    """Number of qubits of a square ``2**N`` matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {rho.shape}")
    d = rho.shape[0]
    n = d.bit_length() - 1
    if d < 2 or (1 << n) != d:
        raise DimensionError(f"dimension {d} is not a power of two >= 2")
    return n


def _bit(n_qubits: int, qubit: int) -> np.ndarray:
    """Value (0/1) of ``qubit`` for every computational basis index."""
    idx = np.arange(1 << n_qubits)
    return (idx >> (n_qubits - 1 - qubit)) & 1


def z_diagonal(n_qubits: int, qubit: int) -> np.ndarray:
    """Diagonal of Z acting on ``qubit`` (entries +1/-1)."""
    _check_qubit(n_qubits, qubit)
    return 1.0 - 2.0 * _bit(n_qubits, qubit)


def _check_qubit(n_qubits: int, qubit: int) -> None:
    if not 0 <= qubit < n_qubits:
        raise DimensionError(f"qubit index {qubit} out of range for {n_qubits} qubits")


_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_string(label: str) -> np.ndarray:
    """Dense matrix of a Pauli string such as ``"XZI"`` (leftmost = qubit 0)."""
    out = np.ones((1, 1), dtype=complex)
    for ch in label.upper():
        out = np.kron(out, _PAULI[ch])
    return out


def basis_state(n_qubits: int, index: int = 0) -> np.ndarray:
    """Projector onto computational basis state ``index``."""
    d = 1 << n_qubits
    rho = np.zeros((d, d), dtype=complex)
    rho[index, index] = 1.0
    return rho


def maximally_mixed(n_qubits: int) -> np.ndarray:
    d = 1 << n_qubits
    return np.eye(d, dtype=complex) / d


def random_density_matrix(n_qubits: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    """Random mixed state from the induced (Ginibre) measure."""
    d = 1 << n_qubits
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def check_density_matrix(rho: np.ndarray, check_psd: bool = True) -> None:
    """Raise :class:`InvariantError` naming the first violated invariant."""
    rho = np.asarray(rho)
    n_qubits_of(rho)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_TOL:
        raise InvariantError("hermiticity", f"max |rho - rho^H| = {herm:.3e}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise InvariantError("trace", f"|Tr rho - 1| = {abs(tr - 1.0):.3e}")
    if check_psd:
        lo = np.linalg.eigvalsh(hermitize(rho))[0]
        if lo < -PSD_TOL:
            raise InvariantError("positivity", f"smallest eigenvalue {lo:.3e}")


# --------------------------------------------------------------------------- #
# Hamiltonian and propagator
# --------------------------------------------------------------------------- #


def ising_matrix(couplings: np.ndarray, field: float) -> np.ndarray:
    """Dense ``sum_{i<j} J_ij X_i X_j + h sum_i Z_i``.

    Returned as a real symmetric array; every term is real in the
    computational basis.
    """
    couplings = np.asarray(couplings, dtype=float)
    n = couplings.shape[0]
    d = 1 << n
    idx = np.arange(d)
    H = np.zeros((d, d))
    H[idx, idx] = field * sum(z_diagonal(n, i) for i in range(n))
    for i in range(n):
        for j in range(i + 1, n):
            if couplings[i, j] == 0.0:
                continue
            flip = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
            H[idx, idx ^ flip] += couplings[i, j]
    return H


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Disordered transverse-field Ising Hamiltonian (energies in units of Delta)."""

    n_qubits: int
    couplings: np.ndarray
    field: float
    topology: Topology
    matrix: np.ndarray = dc_field(repr=False)

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (ascending) and orthonormal eigenvectors, computed once."""
        try:
            return np.linalg.eigh(self.matrix)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
            cond = np.linalg.cond(self.matrix)
            raise NumericalError(f"eigendecomposition failed (cond={cond:.3e}): {exc}") from exc

    def reconstruction_error(self) -> float:
        return float(np.max(np.abs(self.matrix - ising_matrix(self.couplings, self.field))))


def build_hamiltonian(
    n_qubits: int,
    J: float,
    h: float,
    topology: Topology | str = Topology.FULL,
    rng: Optional[np.random.Generator] = None,
    max_qubits: int = MAX_QUBITS,
) -> Hamiltonian:
    """Draw couplings ``J_ij ~ U[-J/2, J/2]`` and assemble the Ising matrix.

    With the ``1dnn`` topology only the pairs ``(i, i+1)`` are drawn; all
    other couplings are zero. Pairs are drawn in lexicographic ``(i, j)``
    order so the result is a deterministic function of the generator state.
    """
    if n_qubits < 1:
        raise DimensionError("n_qubits must be >= 1")
    if n_qubits > max_qubits:
        raise DimensionError(f"n_qubits={n_qubits} exceeds the configured maximum {max_qubits}")
    if J < 0:
        raise ParameterError("J must be non-negative")
    topology = Topology(topology)
    rng = np.random.default_rng() if rng is None else rng
    couplings = np.zeros((n_qubits, n_qubits))
    for i in range(n_qubits):
        for j in range(i + 1, n_qubits):
            if topology is Topology.NN1D and j != i + 1:
                continue
            couplings[i, j] = couplings[j, i] = rng.uniform(-J / 2, J / 2)
    matrix = ising_matrix(couplings, h)
    return Hamiltonian(n_qubits, couplings, float(h), topology, matrix)


@dataclass(frozen=True, eq=False)
class Propagator:
    dt: float
    matrix: np.ndarray = dc_field(repr=False)
    eigenvalues: np.ndarray = dc_field(repr=False)
    eigenvectors: np.ndarray = dc_field(repr=False)

    def at(self, dt: float) -> "Propagator":
        """Propagator of the same Hamiltonian for another time step."""
        return _assemble(self.eigenvalues, self.eigenvectors, dt)


def _assemble(evals: np.ndarray, evecs: np.ndarray, dt: float) -> Propagator:
    if dt < 0:
        raise DomainError("dt must be non-negative")
    U = (evecs * np.exp(-1j * evals * dt)) @ evecs.conj().T
    return Propagator(float(dt), U, evals, evecs)


def propagator(H: Hamiltonian | np.ndarray, dt: float) -> Propagator:
    """``exp(-i H dt)`` via the cached eigendecomposition of ``H``."""
    if isinstance(H, Hamiltonian):
        evals, evecs = H.spectrum
    else:
        try:
            evals, evecs = np.linalg.eigh(np.asarray(H))
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    return _assemble(evals, evecs, dt)


def unitarity_error(U: np.ndarray) -> float:
    U = np.asarray(U)
    return float(np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0]))))


# --------------------------------------------------------------------------- #
# State maps
# --------------------------------------------------------------------------- #


def _conjugate(rho: np.ndarray, U: np.ndarray) -> np.ndarray:
    if U.shape != rho.shape:
        raise DimensionError(f"operator shape {U.shape} does not match state shape {rho.shape}")
    return hermitize(U @ rho @ U.conj().T)


def evolve(rho: np.ndarray, U: Propagator | np.ndarray) -> np.ndarray:
    """Unitary step ``U rho U^dagger``."""
    mat = U.matrix if isinstance(U, Propagator) else np.asarray(U)
    return _conjugate(np.asarray(rho), mat)


def apply_unitary(rho: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Like :func:`evolve` but validates that ``U`` is unitary first."""
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise DimensionError(f"expected a square operator, got {U.shape}")
    err = unitarity_error(U)
    if err > UNITARY_TOL:
        raise ValidationError(f"operator is not unitary (max |UU^H - I| = {err:.3e})")
    return _conjugate(np.asarray(rho), U)


def partial_trace_first(rho: np.ndarray) -> np.ndarray:
    """Trace out qubit 0."""
    n = n_qubits_of(rho)
    if n < 2:
        raise DimensionError("partial trace needs at least two qubits")
    half = 1 << (n - 1)
    r = np.asarray(rho).reshape(2, half, 2, half)
    return r[0, :, 0, :] + r[1, :, 1, :]


def input_state(s: float) -> np.ndarray:
    """``|psi_s><psi_s|`` with ``|psi_s> = sqrt(1-s)|0> + sqrt(s)|1>``."""
    if not 0.0 <= s <= 1.0 or not np.isfinite(s):
        raise DomainError(f"input value {s} outside [0, 1]")
    psi = np.array([np.sqrt(1.0 - s), np.sqrt(s)])
    return np.outer(psi, psi).astype(complex)


def inject_input(rho: np.ndarray, s: float) -> np.ndarray:
    """Replace qubit 0 by ``|psi_s>``, keeping the reduced state of the rest."""
    rho_s = input_state(s)
    n = n_qubits_of(rho)
    if n == 1:
        return rho_s * np.trace(rho)
    return np.kron(rho_s, partial_trace_first(rho))


def expect_z(rho: np.ndarray, qubit: int) -> float:
    n = n_qubits_of(rho)
    _check_qubit(n, qubit)
    val = np.dot(z_diagonal(n, qubit), np.diagonal(rho))
    return float(val.real)


def expect_z_all(rho: np.ndarray) -> np.ndarray:
    """``<Z_i>`` for every qubit, as a length-N vector."""
    n = n_qubits_of(rho)
    bits = (np.arange(1 << n)[None, :] >> (n - 1 - np.arange(n))[:, None]) & 1
    return (1.0 - 2.0 * bits) @ np.diagonal(rho).real


def signal(rho: np.ndarray, qubit: int) -> float:
    """Rescaled observable ``(<Z_i> + 1) / 2`` in [0, 1]."""
    return 0.5 * (expect_z(rho, qubit) + 1.0)


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    # Tr[rho^2] = sum |rho_ab|^2 for Hermitian rho
    return float(np.sum(np.abs(rho) ** 2))


def flip_probability(gamma: float, dt: float) -> float:
    return 0.5 * (1.0 - np.exp(-2.0 * gamma * dt))


def _hamming_weights(n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    x = idx[:, None] ^ idx[None, :]
    w = np.zeros_like(x)
    for q in range(n):
        w += (x >> q) & 1
    return w


_HAMMING_CACHE: dict[int, np.ndarray] = {}


def dephasing_mask(n_qubits: int, gamma: float, dt: float) -> np.ndarray:
    """Elementwise factor of the product of single-qubit Z phase-flip channels.

    An element ``rho_ab`` is multiplied by ``exp(-2 gamma dt)`` for every qubit
    on which ``a`` and ``b`` differ.
    """
    if n_qubits not in _HAMMING_CACHE:
        _HAMMING_CACHE[n_qubits] = _hamming_weights(n_qubits)
    return np.exp(-2.0 * gamma * dt) ** _HAMMING_CACHE[n_qubits]


def hadamard_all(n_qubits: int) -> np.ndarray:
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    out = np.ones((1, 1))
    for _ in range(n_qubits):
        out = np.kron(out, h)
    return out


def dephase(rho: np.ndarray, gamma: float, dt: float, axis: Axis | str = Axis.Z) -> np.ndarray:
    """Independent phase-flip channel on every qubit.

    ``E(rho) = (1-p) rho + p P rho P`` with ``p = (1 - exp(-2 gamma dt)) / 2`` and
    ``P = Z`` or ``X`` depending on ``axis``.
    """
    if gamma < 0 or not np.isfinite(gamma):
        raise DomainError("dephasing rate must be finite and non-negative")
    if dt <= 0:
        raise DomainError("dephasing interval must be positive")
    rho = np.asarray(rho)
    if gamma == 0.0:
        return rho.copy()
    n = n_qubits_of(rho)
    mask = dephasing_mask(n, gamma, dt)
    if Axis(axis) is Axis.Z:
        return rho * mask
    Hd = hadamard_all(n)
    return Hd @ ((Hd @ rho @ Hd) * mask) @ Hd


# --------------------------------------------------------------------------- #
# Operator-space (Pauli transfer) representation, small N only
# --------------------------------------------------------------------------- #


def pauli_labels(n_qubits: int) -> list[str]:
    """All ``4**N`` Pauli strings, ordered with the single-qubit Z_i first."""
    from itertools import product

    firsts = ["I" * i + "Z" + "I" * (n_qubits - i - 1) for i in range(n_qubits)]
    rest = ["".join(p) for p in product("IXYZ", repeat=n_qubits)]
    return firsts + [p for p in rest if p not in firsts]


def pauli_transfer_matrix(U: np.ndarray) -> np.ndarray:
    """``T_ji = Tr[B_j U B_i U^dagger] / 2**N`` over the Hermitian Pauli basis.

    With this normalization the basis is orthonormal under the Hilbert-Schmidt
    product and ``T`` is a real orthogonal matrix for any unitary ``U``.
    """
    n = n_qubits_of(U)
    basis = [pauli_string(lbl) for lbl in pauli_labels(n)]
    B = np.array(basis)
    evolved = np.einsum("ab,ibc,dc->iad", U, B, U.conj())
    T = np.einsum("jba,iab->ji", B, evolved) / (1 << n)
    return T.real
