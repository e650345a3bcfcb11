"""Dense operator algebra for three-level oscillators and their pairs.

Basis order is (|0>, |1>, |2>) everywhere.  Product spaces put oscillator A
first, so ``tensor(a, b)`` acts as ``a`` on A and ``b`` on B.  Density
matrices are vectorized by stacking columns, so that

    vec(A X B) = (B^T kron A) vec(X).
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

DIM = 3


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class DegenerateSteadyStateError(RuntimeError):
    """The Liouvillian kernel is not one-dimensional."""

    def __init__(self, kernel_dim: int, singular_values: np.ndarray):
        self.kernel_dim = kernel_dim
        self.singular_values = singular_values
        super().__init__(f"Liouvillian kernel has dimension {kernel_dim}, expected 1")


class EigenConvergenceError(RuntimeError):
    pass


def ket(n: int, dim: int = DIM) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return v


def ketbra(a: int, b: int, dim: int = DIM) -> np.ndarray:
    """Matrix unit |a><b|."""
    m = np.zeros((dim, dim), dtype=complex)
    m[a, b] = 1.0
    return m


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def spin1_operators() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(Sz, Sp, Sm, Sy)`` for a spin-1 in the (|0>, |1>, |2>) basis."""
    sz = ketbra(2, 2) - ketbra(0, 0)
    sp = np.sqrt(2.0) * (ketbra(2, 1) + ketbra(1, 0))
    sm = dag(sp)
    sy = 0.5j * (sm - sp)
    return sz, sp, sm, sy


SZ, SP, SM, SY = spin1_operators()
for _op in (SZ, SP, SM, SY):
    _op.setflags(write=False)


def _check_square(*mats: np.ndarray) -> int:
    dim = None
    for m in mats:
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {m.shape}")
        if dim is None:
            dim = m.shape[0]
        elif m.shape[0] != dim:
            raise DimensionError(f"dimension mismatch: {dim} vs {m.shape[0]}")
    return dim


def expectation(rho: np.ndarray, op: np.ndarray) -> complex:
    """Tr(rho op)."""
    _check_square(rho, op)
    return complex(np.einsum("ij,ji->", rho, op))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def dissipator(o: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Lindblad dissipator D[o]rho = o rho o^+ - {o^+ o, rho}/2."""
    _check_square(o, rho)
    od = dag(o)
    ood = od @ o
    return o @ rho @ od - 0.5 * (ood @ rho + rho @ ood)


def tensor(*ops: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def vectorize(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def devectorize(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise DimensionError(f"vector of length {v.size} is not a vectorized square matrix")
    return np.asarray(v).reshape((d, d), order="F")


def spre(a: np.ndarray) -> np.ndarray:
    """Superoperator of X -> a X."""
    return np.kron(np.eye(a.shape[0]), a)


def spost(a: np.ndarray) -> np.ndarray:
    """Superoperator of X -> X a."""
    return np.kron(a.T, np.eye(a.shape[0]))


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator of X -> -i[h, X]."""
    return -1j * (spre(h) - spost(h))


def dissipator_superop(o: np.ndarray) -> np.ndarray:
    od = dag(o)
    ood = od @ o
    return np.kron(o.conj(), o) - 0.5 * (spre(ood) + spost(ood))


def liouvillian(h: np.ndarray, jumps: Iterable[tuple[float, np.ndarray]] = ()) -> np.ndarray:
    """Matrix of rho -> -i[h, rho] + sum_k rate_k D[o_k] rho on column-stacked rho."""
    d = _check_square(h)
    out = commutator_superop(h).astype(complex)
    for rate, o in jumps:
        if rate < 0:
            raise ValueError(f"negative jump rate {rate}")
        _check_square(h, o)
        if rate:
            out += rate * dissipator_superop(o)
    assert out.shape == (d * d, d * d)
    return out


def trace_row(dim: int) -> np.ndarray:
    """Row vector t with t @ vec(rho) = Tr(rho)."""
    return vectorize(np.eye(dim)).real.astype(complex)


def hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + dag(rho))


def normalize_density(rho: np.ndarray) -> np.ndarray:
    rho = hermitize(rho)
    return rho / np.trace(rho).real


def steady_state_nullspace(lv: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Unique steady state of the superoperator ``lv`` from its SVD null vector.

    The kernel dimension is the number of singular values below
    ``rtol * max(1, s_max)``; anything other than one raises
    :class:`DegenerateSteadyStateError`.
    """
    _check_square(lv)
    _, s, vh = np.linalg.svd(lv)
    cutoff = rtol * max(1.0, s[0])
    kernel_dim = int(np.sum(s <= cutoff))
    if kernel_dim != 1:
        raise DegenerateSteadyStateError(kernel_dim, s)
    rho = devectorize(vh[-1].conj())
    return normalize_density(rho)


def eigen_spectrum(m: np.ndarray) -> np.ndarray:
    """All eigenvalues of a square complex matrix (LAPACK geev)."""
    _check_square(m)
    try:
        w = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise EigenConvergenceError("non-finite eigenvalues")
    return w


def is_density_matrix(
    rho: np.ndarray, herm_tol: float = 1e-10, trace_tol: float = 1e-10, pos_tol: float = 1e-8
) -> bool:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not np.all(np.isfinite(rho)):
        return False
    if np.max(np.abs(rho - dag(rho))) > herm_tol:
        return False
    if abs(np.trace(rho) - 1.0) > trace_tol:
        return False
    return bool(np.linalg.eigvalsh(hermitize(rho)).min() >= -pos_tol)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random full- or low-rank density matrix (Ginibre construction)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dag(g)
    return rho / np.trace(rho).real


def embed(op: np.ndarray, site: int, n_sites: int = 2) -> np.ndarray:
    """Place a single-site operator on ``site`` of an ``n_sites`` product space."""
    ops: Sequence[np.ndarray] = [op if k == site else np.eye(op.shape[0]) for k in range(n_sites)]
    return tensor(*ops)
