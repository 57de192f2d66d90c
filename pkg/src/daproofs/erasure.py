"""Systematic Reed-Solomon erasure codec over GF(2^16).

Shares are byte strings of equal even length; each big-endian byte pair
is one field symbol, and every lane (symbol position across the share
list) is coded independently. A message of k shares becomes a codeword
of 2k shares: the data symbols sit at evaluation points 0..k-1 and the
parity symbols are the interpolating polynomial evaluated at points
k..2k-1, so the prefix stays systematic. Any k of the 2k shares
reconstruct the codeword; decoding always re-evaluates the interpolated
polynomial at every point, so inconsistent inputs surface as a mismatch
between the reconstruction and whatever the caller committed to.

GF(2^16) is used (rather than the byte-oriented GF(2^8)) so codewords of
length 2k stay below the field size for k up to 16384. Arithmetic runs on
log/antilog tables built once at import; decoding interpolates in the
Lagrange basis.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

FIELD_BITS = 16
FIELD_SIZE = 1 << FIELD_BITS
_PRIMITIVE_POLY = 0x1100B  # x^16 + x^12 + x^3 + x + 1
_ORDER = FIELD_SIZE - 1

MAX_K = 16384


class Unrecoverable(Exception):
    """Fewer shares than needed to reconstruct the codeword."""


def _build_tables() -> tuple[np.ndarray, np.ndarray]:
    exp = np.zeros(2 * _ORDER, dtype=np.uint32)
    log = np.zeros(FIELD_SIZE, dtype=np.uint32)
    x = 1
    for i in range(_ORDER):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & FIELD_SIZE:
            x ^= _PRIMITIVE_POLY
    exp[_ORDER:] = exp[:_ORDER]
    return exp, log

_EXP, _LOG = _build_tables()

# Sentinel log for zero: any sum involving it lands in the zero-filled
# tail of _EXP_PAD, so products with zero come out zero without branching.
_ZERO_LOG = 1 << 17
_EXP_PAD = np.zeros(2 * _ZERO_LOG + 1, dtype=np.uint16)
_EXP_PAD[: 2 * _ORDER] = _EXP.astype(np.uint16)
_LOG_PAD = _LOG.astype(np.int64)
_LOG_PAD[0] = _ZERO_LOG


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(_EXP[int(_LOG[a]) + int(_LOG[b])])


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("inverse of zero in GF(2^16)")
    return int(_EXP[_ORDER - int(_LOG[a])])


def gf_div(a: int, b: int) -> int:
    return gf_mul(a, gf_inv(b))


def _matmul(matrix: np.ndarray, data: np.ndarray) -> np.ndarray:
    """GF(2^16) matrix product: (m, k) x (k, lanes) -> (m, lanes)."""
    m = matrix.shape[0]
    out = np.zeros((m, data.shape[1]), dtype=np.uint16)
    log_rows = _LOG_PAD[matrix]          # (m, k)
    log_data = _LOG_PAD[data]            # (k, lanes)
    for i in range(matrix.shape[1]):
        out ^= _EXP_PAD[log_rows[:, i, None] + log_data[None, i, :]]
    return out


@lru_cache(maxsize=None)
def _extension_matrix(k: int) -> np.ndarray:
    """Maps data symbols at points 0..k-1 to parity symbols at k..2k-1."""
    return _interpolation_matrix(tuple(range(k)), tuple(range(k, 2 * k)))


@lru_cache(maxsize=4096)
def _interpolation_matrix(xs: tuple[int, ...], targets: tuple[int, ...]) -> np.ndarray:
    """Rows evaluate the polynomial through points xs at each target.

    Entry [t, m] is the Lagrange basis L_m(target_t) over the support xs.
    """
    k = len(xs)
    denoms = []
    for m, xm in enumerate(xs):
        d = 1
        for j, xj in enumerate(xs):
            if j != m:
                d = gf_mul(d, xm ^ xj)
        denoms.append(d)
    matrix = np.zeros((len(targets), k), dtype=np.uint16)
    support = {x: m for m, x in enumerate(xs)}
    for t, target in enumerate(targets):
        if target in support:
            matrix[t, support[target]] = 1
            continue
        numer = 1
        for xj in xs:
            numer = gf_mul(numer, target ^ xj)
        for m, xm in enumerate(xs):
            matrix[t, m] = gf_div(numer, gf_mul(target ^ xm, denoms[m]))
    return matrix


def _shares_to_symbols(shares: Sequence[bytes]) -> np.ndarray:
    length = len(shares[0])
    if length == 0 or length % 2:
        raise ValueError("share length must be positive and even")
    for sh in shares:
        if len(sh) != length:
            raise ValueError("shares must all have the same length")
    return np.array([np.frombuffer(sh, dtype=">u2") for sh in shares], dtype=np.uint16)


def _symbols_to_shares(symbols: np.ndarray) -> list[bytes]:
    return [row.astype(">u2").tobytes() for row in symbols]


def rs_encode(data: Sequence[bytes]) -> list[bytes]:
    """Extend k equal-length shares to a systematic codeword of 2k shares."""
    k = len(data)
    if not 1 <= k <= MAX_K:
        raise ValueError(f"k must be in 1..{MAX_K}")
    symbols = _shares_to_symbols(data)
    parity = _matmul(_extension_matrix(k), symbols)
    return list(data) + _symbols_to_shares(parity)


def rs_decode(present: Sequence[tuple[int, bytes]], k: int) -> list[bytes]:
    """Reconstruct the full 2k-share codeword from any k present shares.

    present holds (position, share) pairs with distinct positions in
    [0, 2k). Raises Unrecoverable when fewer than k shares are given.
    The output is always a consistent re-encoding: positions beyond the
    first k used are re-evaluated, so a corrupted input share shows up
    as a difference between input and output at that position.
    """
    if not 1 <= k <= MAX_K:
        raise ValueError(f"k must be in 1..{MAX_K}")
    positions = [pos for pos, _ in present]
    if len(set(positions)) != len(positions):
        raise ValueError("duplicate share positions")
    if any(not 0 <= pos < 2 * k for pos in positions):
        raise ValueError("share position out of range")
    if len(present) < k:
        raise Unrecoverable("unrecoverable: fewer than k shares present")
    chosen = sorted(present, key=lambda item: item[0])[:k]
    xs = tuple(pos for pos, _ in chosen)
    symbols = _shares_to_symbols([sh for _, sh in chosen])
    matrix = _interpolation_matrix(xs, tuple(range(2 * k)))
    return _symbols_to_shares(_matmul(matrix, symbols))
