"""GF(2^r) arithmetic and the systematic-MDS parity operator.

``sigma`` computes the N - j parity symbols of a systematic (2N - j, N) MDS
code, applied position-wise to N equal-length symbol blocks (one block per
file).  ``recover`` inverts it given any j of the information blocks.

The parity matrix is a Cauchy matrix, so every square submatrix is
invertible and the recovery contract holds for every choice of known blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cache, cached_property
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "FieldSpec",
    "ParityCode",
    "FieldError",
    "FieldTooSmall",
    "LengthMismatch",
    "InsufficientKnowns",
    "InconsistentInput",
    "field_mul",
    "field_inv",
    "gf_scale",
    "gf_matmul",
    "gf_matrix_inverse",
    "build_parity_code",
    "sigma",
    "recover",
]

# primitive polynomials, so x (= 2) generates the multiplicative group
_POLYS = {3: 0b1011, 8: 0x11D, 16: 0x1100B}


class FieldError(Exception):
    pass


class FieldTooSmall(FieldError):
    pass


class LengthMismatch(FieldError):
    pass


class InsufficientKnowns(FieldError):
    pass


class InconsistentInput(FieldError):
    pass


@dataclass(frozen=True)
class FieldSpec:
    r: int = 8

    def __post_init__(self):
        if self.r not in _POLYS:
            raise ValueError(f"unsupported field exponent r={self.r}; choose one of {sorted(_POLYS)}")

    @property
    def reduction_polynomial(self) -> int:
        return _POLYS[self.r]

    @property
    def order(self) -> int:
        return 1 << self.r

    @property
    def dtype(self):
        return np.uint8 if self.r <= 8 else np.uint16


@cache
def _tables(r: int):
    q = 1 << r
    poly = _POLYS[r]
    exp = np.zeros(2 * q, dtype=np.int64)
    log = np.zeros(q, dtype=np.int64)
    x = 1
    for i in range(q - 1):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & q:
            x ^= poly
    exp[q - 1 : 2 * q - 2] = exp[: q - 1]
    mul_table = None
    if r <= 8:
        a = np.arange(q)
        la = log[a][:, None] + log[a][None, :]
        mul_table = exp[la].astype(np.uint8)
        mul_table[0, :] = 0
        mul_table[:, 0] = 0
    exp.setflags(write=False)
    log.setflags(write=False)
    return exp, log, mul_table


def field_mul(a: int, b: int, spec: FieldSpec) -> int:
    if a == 0 or b == 0:
        return 0
    exp, log, _ = _tables(spec.r)
    return int(exp[log[a] + log[b]])


def field_inv(a: int, spec: FieldSpec) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse")
    exp, log, _ = _tables(spec.r)
    return int(exp[(spec.order - 1 - log[a]) % (spec.order - 1)])


def gf_scale(c: int, x: np.ndarray, spec: FieldSpec) -> np.ndarray:
    """Multiply every symbol of ``x`` by the scalar ``c``."""
    if c == 0:
        return np.zeros_like(x)
    if c == 1:
        return x.copy()
    exp, log, mul_table = _tables(spec.r)
    if mul_table is not None:
        return mul_table[c][x]
    out = exp[log[x] + log[c]].astype(x.dtype)
    out[x == 0] = 0
    return out


def gf_matmul(a: np.ndarray, x: np.ndarray, spec: FieldSpec) -> np.ndarray:
    """Field product of a coefficient matrix (p x q) with symbol rows (q x L)."""
    a = np.asarray(a, dtype=np.int64)
    x = np.asarray(x)
    p, q = a.shape
    if q == 0 or x.shape[-1] == 0:
        return np.zeros((p, x.shape[-1]), dtype=spec.dtype)
    exp, log, mul_table = _tables(spec.r)
    if mul_table is not None:
        prod = mul_table[a[:, :, None], x[None, :, :]]
    else:
        prod = exp[log[a][:, :, None] + log[x][None, :, :]].astype(spec.dtype)
        prod[(a == 0)[:, :, None] | (x == 0)[None, :, :]] = 0
    return np.bitwise_xor.reduce(prod, axis=1).astype(spec.dtype, copy=False)


def gf_matrix_inverse(rows: Sequence[Sequence[int]], spec: FieldSpec) -> tuple[tuple[int, ...], ...]:
    """Gauss-Jordan inverse over GF(2^r); raises ZeroDivisionError if singular."""
    return _inverse(tuple(tuple(int(v) for v in row) for row in rows), spec.r)


@cache
def _inverse(rows: tuple[tuple[int, ...], ...], r: int) -> tuple[tuple[int, ...], ...]:
    spec = FieldSpec(r)
    n = len(rows)
    a = [list(row) + [int(i == j) for j in range(n)] for i, row in enumerate(rows)]
    for col in range(n):
        pivot = next((i for i in range(col, n) if a[i][col]), None)
        if pivot is None:
            raise ZeroDivisionError("singular matrix")
        a[col], a[pivot] = a[pivot], a[col]
        inv = field_inv(a[col][col], spec)
        a[col] = [field_mul(v, inv, spec) for v in a[col]]
        for i in range(n):
            if i != col and a[i][col]:
                f = a[i][col]
                a[i] = [v ^ field_mul(f, w, spec) for v, w in zip(a[i], a[col])]
    return tuple(tuple(row[n:]) for row in a)


@dataclass(frozen=True)
class ParityCode:
    """Parity part P (N x (N - j)) of a systematic generator [I | P]."""

    n_info: int
    deficiency: int
    parity_matrix: tuple[tuple[int, ...], ...]
    spec: FieldSpec = field(default_factory=FieldSpec)

    def __post_init__(self):
        if not 0 <= self.deficiency < self.n_info:
            raise ValueError(f"need 0 <= j < N, got j={self.deficiency}, N={self.n_info}")
        if len(self.parity_matrix) != self.n_info or any(
            len(row) != self.n_parity for row in self.parity_matrix
        ):
            raise ValueError("parity matrix must be N x (N - j)")

    @property
    def n_parity(self) -> int:
        return self.n_info - self.deficiency

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.array(self.parity_matrix, dtype=np.int64).reshape(self.n_info, self.n_parity)

    @classmethod
    def adjacent_xor(cls, n_info: int, spec: FieldSpec | None = None) -> "ParityCode":
        """The j = 1 code with parities i_1+i_2, i_2+i_3, ..., i_{N-1}+i_N."""
        rows = tuple(
            tuple(int(t == n or t == n - 1) for t in range(n_info - 1)) for n in range(n_info)
        )
        return cls(n_info, 1, rows, spec or FieldSpec())

    def submatrix_without(self, deleted: Sequence[int]) -> tuple[tuple[int, ...], ...]:
        drop = set(deleted)
        return tuple(row for n, row in enumerate(self.parity_matrix) if n not in drop)

    def satisfies_recovery_contract(self) -> bool:
        """Every delete-j-rows square submatrix is invertible (exhaustive)."""
        for deleted in combinations(range(self.n_info), self.deficiency):
            try:
                gf_matrix_inverse(self.submatrix_without(deleted), self.spec)
            except ZeroDivisionError:
                return False
        return True


def build_parity_code(N: int, j: int, spec: FieldSpec | None = None) -> ParityCode:
    spec = spec or FieldSpec()
    if 2 * N > spec.order:
        raise FieldTooSmall(f"Cauchy construction needs 2N <= 2^r, got N={N}, r={spec.r}")
    return _cauchy(N, j, spec.r)


@cache
def _cauchy(N: int, j: int, r: int) -> ParityCode:
    spec = FieldSpec(r)
    # x_n = n, y_t = N + t are distinct, so x_n + y_t (XOR) is never zero
    rows = tuple(tuple(field_inv(n ^ (N + t), spec) for t in range(N - j)) for n in range(N))
    return ParityCode(N, j, rows, spec)


def _check_blocks(blocks: Sequence[np.ndarray], count: int, what: str) -> int:
    if len(blocks) != count:
        raise LengthMismatch(f"expected {count} {what} blocks, got {len(blocks)}")
    lengths = {len(b) for b in blocks}
    if len(lengths) > 1:
        raise LengthMismatch(f"{what} blocks have unequal lengths {sorted(lengths)}")
    return lengths.pop() if lengths else 0


def sigma(code: ParityCode, info: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Parity blocks: out[t][s] = sum_n P[n][t] * info[n][s]."""
    length = _check_blocks(info, code.n_info, "information")
    stacked = np.asarray(info, dtype=code.spec.dtype).reshape(code.n_info, length)
    return list(gf_matmul(code.matrix.T, stacked, code.spec))


@cache
def _solve_matrix(code: ParityCode, used: tuple[int, ...]) -> np.ndarray:
    unknown = [n for n in range(code.n_info) if n not in used]
    a_t = tuple(tuple(code.parity_matrix[u][t] for u in unknown) for t in range(code.n_parity))
    inv = np.array(gf_matrix_inverse(a_t, code.spec), dtype=np.int64).reshape(len(unknown), len(unknown))
    inv.setflags(write=False)
    return inv


def recover(
    code: ParityCode,
    parities: Sequence[np.ndarray],
    known: Mapping[int, np.ndarray],
    check_consistency: bool = True,
) -> list[np.ndarray]:
    """All N information blocks from the parities plus at least j known blocks.

    The solve uses the j lowest-indexed known blocks; any further known
    blocks are compared against the solution.
    """
    j = code.deficiency
    if len(known) < j:
        raise InsufficientKnowns(f"need {j} known information blocks, got {len(known)}")
    length = _check_blocks(parities, code.n_parity, "parity")
    if any(len(b) != length for b in known.values()):
        raise LengthMismatch("known blocks differ in length from the parities")
    if any(not 0 <= n < code.n_info for n in known):
        raise ValueError("known index out of range")

    spec, dtype = code.spec, code.spec.dtype
    used = sorted(known)[:j]
    unknown = [n for n in range(code.n_info) if n not in used]

    rhs = np.asarray(parities, dtype=dtype).reshape(code.n_parity, length)
    if used:
        xs = np.asarray([known[n] for n in used], dtype=dtype).reshape(j, length)
        rhs = rhs ^ gf_matmul(code.matrix[used].T, xs, spec)

    # rhs_t = sum_u x_u P[u][t]  ->  x_U = (P_U^T)^{-1} rhs
    inv = _solve_matrix(code, tuple(used))
    solved = gf_matmul(inv, rhs, spec) if unknown else np.zeros((0, length), dtype=dtype)

    result: list[np.ndarray | None] = [None] * code.n_info
    for n in used:
        result[n] = np.array(known[n], dtype=dtype)
    for row, u in zip(solved, unknown):
        result[u] = row

    if check_consistency:
        for n, x in known.items():
            if n not in used and not np.array_equal(result[n], np.asarray(x, dtype=dtype)):
                raise InconsistentInput(f"known block {n} contradicts the parity equations")
    return result  # type: ignore[return-value]
