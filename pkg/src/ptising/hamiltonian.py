"""Non-Hermitian transverse-field Ising chain with a staggered imaginary field.

    H = sum_n [ delta * sx_n + (-1)**(n-1) * 1j * gain * sz_n ] - coupling * sum_bonds sz_n sz_{n+1}

Sites are 1-based in the formula above. In the computational basis bit ``n-1``
of a basis code holds site ``n``; a set bit means sz = +1, a cleared bit sz = -1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator

from .errors import DenseLimitExceeded, InvalidParameters

#: Largest chain for which a dense 2^N x 2^N matrix is materialized.
DENSE_LIMIT = 14


class Boundary(str, enum.Enum):
    PERIODIC = "periodic"
    OPEN = "open"


@dataclass(frozen=True)
class ChainParams:
    """Physical configuration of one diagonalization.

    ``delta`` is the transverse field, ``coupling`` the Ising J (J > 0
    ferromagnetic) and ``gain`` the staggered imaginary field gamma.
    """

    n_sites: int
    delta: float = 1.0
    coupling: float = 0.0
    gain: float = 0.0
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise InvalidParameters(f"n_sites must be a positive integer, got {self.n_sites!r}")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        if not self.delta > 0:
            raise InvalidParameters(f"delta must be > 0, got {self.delta!r}")
        if self.gain < 0:
            raise InvalidParameters(f"gain must be >= 0, got {self.gain!r}")
        if self.boundary is Boundary.PERIODIC and self.n_sites % 2:
            raise InvalidParameters(
                f"periodic chain needs an even number of sites for the staggered field, got N={self.n_sites}"
            )

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    @property
    def energy_scale(self) -> float:
        return float(np.hypot(self.coupling, self.delta))

    def bonds(self) -> list[tuple[int, int]]:
        """0-based site pairs coupled by the Ising term."""
        n = self.n_sites
        if self.boundary is Boundary.OPEN:
            return [(i, i + 1) for i in range(n - 1)]
        if n == 2:
            # both periodic bonds join the same pair
            return [(0, 1), (1, 0)]
        return [(i, (i + 1) % n) for i in range(n)]

    def with_(self, **changes) -> "ChainParams":
        return replace(self, **changes)


@lru_cache(maxsize=32)
def spin_values(n_sites: int) -> np.ndarray:
    """Array ``s[n, b]`` = sz eigenvalue (+1/-1) of 0-based site n in basis code b."""
    codes = np.arange(1 << n_sites, dtype=np.int64)
    s = np.empty((n_sites, codes.size), dtype=np.int8)
    for n in range(n_sites):
        s[n] = 2 * ((codes >> n) & 1) - 1
    s.setflags(write=False)
    return s


def stagger_signs(n_sites: int) -> np.ndarray:
    """(-1)**(n-1) for 1-based n: site 1 carries +1j*gain."""
    return np.where(np.arange(n_sites) % 2 == 0, 1.0, -1.0)


def diagonal(params: ChainParams) -> np.ndarray:
    """Diagonal of H: imaginary staggered field plus Ising energy."""
    s = spin_values(params.n_sites)
    field = stagger_signs(params.n_sites) @ s
    ising = np.zeros(params.dim)
    for i, j in params.bonds():
        ising += s[i] * s[j]
    return 1j * params.gain * field - params.coupling * ising


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense Hamiltonian together with its structural split.

    The diagonal part holds the Ising and imaginary-field terms; every
    off-diagonal entry equals ``params.delta`` and connects codes that differ
    in exactly one bit.
    """

    params: ChainParams
    diagonal: np.ndarray
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def offdiagonal_weight(self) -> float:
        return self.params.delta

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return apply_hamiltonian(self.params, v)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def build_hamiltonian(params: ChainParams, dense_limit: int = DENSE_LIMIT) -> OperatorMatrix:
    if params.n_sites > dense_limit:
        raise DenseLimitExceeded(
            f"N={params.n_sites} exceeds the dense limit {dense_limit}; "
            "use apply_hamiltonian / hamiltonian_operator instead"
        )
    d = diagonal(params)
    dim = params.dim
    h = np.diag(d)
    codes = np.arange(dim)
    for n in range(params.n_sites):
        h[codes ^ (1 << n), codes] = params.delta
    d.setflags(write=False)
    h.setflags(write=False)
    return OperatorMatrix(params=params, diagonal=d, matrix=h)


def _flip_sum(state: np.ndarray, n_sites: int) -> np.ndarray:
    # sum over n of state[b ^ (1 << n)], via reshapes instead of index arrays;
    # trailing axes (several vectors as columns) are carried along
    out = np.zeros_like(state)
    rest = state.shape[1:]
    for n in range(n_sites):
        view = state.reshape(-1, 2, 1 << n, *rest)
        out.reshape(-1, 2, 1 << n, *rest)[...] += view[:, ::-1]
    return out


def apply_hamiltonian(params: ChainParams, state: np.ndarray, diag: np.ndarray | None = None) -> np.ndarray:
    """Return H @ state without building H.

    ``diag`` may be passed to reuse a precomputed :func:`diagonal`.
    """
    state = np.asarray(state)
    if state.shape != (params.dim,):
        raise ValueError(f"state has shape {state.shape}, expected ({params.dim},)")
    if diag is None:
        diag = diagonal(params)
    state = state.astype(complex, copy=False)
    return diag * state + params.delta * _flip_sum(state, params.n_sites)


def hamiltonian_operator(params: ChainParams) -> LinearOperator:
    """Matrix-free ``LinearOperator`` for iterative eigensolvers."""
    d = diagonal(params)
    n = params.n_sites
    delta = params.delta

    def matvec(v):
        v = np.asarray(v, dtype=complex).reshape(-1)
        return d * v + delta * _flip_sum(v, n)

    return LinearOperator((params.dim, params.dim), matvec=matvec, dtype=complex)


def translation_permutation(n_sites: int) -> np.ndarray:
    """Permutation ``p`` with (T v)[p[b]] = v[b] for translation by one site.

    Site n is moved to site n+1 (mod N), i.e. the bit pattern is rotated left.
    """
    codes = np.arange(1 << n_sites)
    mask = (1 << n_sites) - 1
    return ((codes << 1) | (codes >> (n_sites - 1))) & mask


def translation_matrix(n_sites: int) -> np.ndarray:
    p = translation_permutation(n_sites)
    t = np.zeros((1 << n_sites, 1 << n_sites))
    t[p, np.arange(1 << n_sites)] = 1.0
    return t
