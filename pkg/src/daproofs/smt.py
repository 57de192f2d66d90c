"""Sparse Merkle tree committing to a map from 32-byte keys to byte values.

The tree has a fixed depth of 256; a key's bits (most significant first)
select the path from root to leaf. Absent keys hold the default value
(the empty byte string) whose leaf digest is 32 zero bytes; a populated
leaf stores hash(0x00 || key || value). Internal nodes reuse the 0x01
node hash from the merkle module, so the empty-tree root is the 256-fold
default chain over the zero leaf digest.

Only non-default nodes are stored, which bounds an update to one leaf
hash plus 256 node hashes regardless of tree population.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Iterator

from .merkle import DIGEST_SIZE, node_hash

DEPTH = 256
KEY_SIZE = 32
DEFAULT_VALUE = b""
DEFAULT_LEAF = b"\x00" * DIGEST_SIZE

_hash_invocations = 0


def hash_invocations() -> int:
    """Total leaf/node hash computations performed by this module."""
    return _hash_invocations


def _leaf_digest(key: bytes, value: bytes) -> bytes:
    global _hash_invocations
    _hash_invocations += 1
    return hashlib.sha256(b"\x00" + key + value).digest()


def _node(left: bytes, right: bytes) -> bytes:
    global _hash_invocations
    _hash_invocations += 1
    return node_hash(left, right)


def _build_empty_chain() -> tuple[bytes, ...]:
    chain = [DEFAULT_LEAF]
    for _ in range(DEPTH):
        chain.append(node_hash(chain[-1], chain[-1]))
    return tuple(chain)


# EMPTY_SUBTREE[h] is the digest of an all-default subtree of height h;
# EMPTY_SUBTREE[DEPTH] is the root of an empty tree.
EMPTY_SUBTREE = _build_empty_chain()


def _check_key(key: bytes) -> None:
    if not isinstance(key, (bytes, bytearray)) or len(key) != KEY_SIZE:
        raise ValueError("key must be exactly 32 bytes")


@dataclass(frozen=True)
class SparseProof:
    """Membership (or non-membership, when value is empty) proof.

    siblings holds all 256 sibling digests bottom-up (leaf level first).
    The wire format compresses default siblings behind a 256-bit bitmap.
    """

    key: bytes
    value: bytes
    siblings: tuple[bytes, ...]

    def to_bytes(self) -> bytes:
        bitmap = bytearray(32)
        included: list[bytes] = []
        for i, sib in enumerate(self.siblings):
            if sib != EMPTY_SUBTREE[i]:
                bitmap[i // 8] |= 1 << (7 - i % 8)
                included.append(sib)
        return bytes(bitmap) + b"".join(included)

    @classmethod
    def read_from(cls, raw: bytes, key: bytes, value: bytes) -> tuple["SparseProof", bytes]:
        if len(raw) < 32:
            raise ValueError("truncated sparse proof bitmap")
        bitmap = raw[:32]
        pos = 32
        siblings: list[bytes] = []
        for i in range(DEPTH):
            if bitmap[i // 8] & (1 << (7 - i % 8)):
                if len(raw) < pos + DIGEST_SIZE:
                    raise ValueError("truncated sparse proof siblings")
                siblings.append(raw[pos : pos + DIGEST_SIZE])
                pos += DIGEST_SIZE
            else:
                siblings.append(EMPTY_SUBTREE[i])
        return cls(key, value, tuple(siblings)), raw[pos:]


class StateTree:
    """Mutable key-value map with an incrementally maintained root.

    Non-default internal nodes are kept in a dict keyed by (level, prefix),
    where level counts bits consumed from the root (leaves at level 256)
    and prefix is the integer value of those bits.
    """

    def __init__(self) -> None:
        self._values: dict[bytes, bytes] = {}
        self._nodes: dict[tuple[int, int], bytes] = {}

    def copy(self) -> "StateTree":
        dup = StateTree.__new__(StateTree)
        dup._values = self._values.copy()
        dup._nodes = self._nodes.copy()
        return dup

    def _node_at(self, level: int, prefix: int) -> bytes:
        return self._nodes.get((level, prefix), EMPTY_SUBTREE[DEPTH - level])

    def root(self) -> bytes:
        return self._node_at(0, 0)

    def get(self, key: bytes) -> bytes:
        _check_key(key)
        return self._values.get(bytes(key), DEFAULT_VALUE)

    def items(self) -> Iterator[tuple[bytes, bytes]]:
        return iter(sorted(self._values.items()))

    def __len__(self) -> int:
        return len(self._values)

    def update(self, key: bytes, value: bytes) -> bytes:
        """Set key to value (empty value deletes) and return the new root."""
        _check_key(key)
        key = bytes(key)
        path = int.from_bytes(key, "big")
        if value == DEFAULT_VALUE:
            self._values.pop(key, None)
            node = DEFAULT_LEAF
        else:
            self._values[key] = bytes(value)
            node = _leaf_digest(key, value)
        self._store(DEPTH, path, node)
        for level in range(DEPTH, 0, -1):
            prefix = path >> (DEPTH - level)
            sibling = self._node_at(level, prefix ^ 1)
            if prefix & 1:
                node = _node(sibling, node)
            else:
                node = _node(node, sibling)
            self._store(level - 1, prefix >> 1, node)
        return node

    def _store(self, level: int, prefix: int, digest: bytes) -> None:
        if digest == EMPTY_SUBTREE[DEPTH - level]:
            self._nodes.pop((level, prefix), None)
        else:
            self._nodes[(level, prefix)] = digest

    def prove(self, key: bytes) -> SparseProof:
        """Proof for key's current value (the default value if absent)."""
        _check_key(key)
        key = bytes(key)
        path = int.from_bytes(key, "big")
        siblings = tuple(
            self._node_at(level, (path >> (DEPTH - level)) ^ 1)
            for level in range(DEPTH, 0, -1)
        )
        return SparseProof(key, self.get(key), siblings)


def verify(key: bytes, value: bytes, proof: SparseProof, root_digest: bytes) -> bool:
    """True iff proof shows that key maps to value under root_digest."""
    try:
        _check_key(key)
    except ValueError:
        return False
    key = bytes(key)
    if proof.key != key or proof.value != value:
        return False
    if len(proof.siblings) != DEPTH:
        return False
    if any(len(sib) != DIGEST_SIZE for sib in proof.siblings):
        return False
    path = int.from_bytes(key, "big")
    node = DEFAULT_LEAF if value == DEFAULT_VALUE else _leaf_digest(key, value)
    for i, sibling in enumerate(proof.siblings):
        if (path >> i) & 1:
            node = _node(sibling, node)
        else:
            node = _node(node, sibling)
    return node == root_digest


class WitnessError(Exception):
    """A witness is malformed: a proof fails, entries conflict, or a key
    required by the replayed operation is not covered."""


class WitnessSubtree:
    """Partial state tree reassembled from verified membership proofs.

    Supports updating the covered leaves and recomputing the resulting
    root, reading unchanged siblings from the proofs.
    """

    def __init__(self, root_digest: bytes) -> None:
        self._root = root_digest
        self._known: dict[tuple[int, int], bytes] = {}
        self._values: dict[bytes, bytes] = {}

    @classmethod
    def from_entries(
        cls, root_digest: bytes, entries: Iterable[tuple[bytes, bytes, SparseProof]]
    ) -> "WitnessSubtree":
        sub = cls(root_digest)
        seen: set[bytes] = set()
        for key, value, proof in entries:
            if key in seen:
                raise WitnessError("duplicate witness key")
            seen.add(key)
            if not verify(key, value, proof, root_digest):
                raise WitnessError("witness proof does not verify")
            sub._absorb(key, value, proof)
        return sub

    def _absorb(self, key: bytes, value: bytes, proof: SparseProof) -> None:
        self._values[bytes(key)] = bytes(value)
        path = int.from_bytes(key, "big")
        node = DEFAULT_LEAF if value == DEFAULT_VALUE else _leaf_digest(key, value)
        for i, sibling in enumerate(proof.siblings):
            level = DEPTH - i
            prefix = path >> i
            self._put_known(level, prefix, node)
            self._put_known(level, prefix ^ 1, sibling)
            node = _node(sibling, node) if prefix & 1 else _node(node, sibling)
        self._put_known(0, 0, node)

    def _put_known(self, level: int, prefix: int, digest: bytes) -> None:
        existing = self._known.get((level, prefix))
        if existing is not None and existing != digest:
            raise WitnessError("witness entries are inconsistent")
        self._known[(level, prefix)] = digest

    @property
    def covered(self) -> set[bytes]:
        return set(self._values)

    def get(self, key: bytes) -> bytes:
        if key not in self._values:
            raise WitnessError("key not covered by witness")
        return self._values[key]

    def update(self, key: bytes, value: bytes) -> None:
        if key not in self._values:
            raise WitnessError("key not covered by witness")
        self._values[key] = bytes(value)

    def root(self) -> bytes:
        """Recompute the root over the covered leaves and stored siblings."""
        level_nodes: dict[int, bytes] = {}
        for key, value in self._values.items():
            path = int.from_bytes(key, "big")
            level_nodes[path] = (
                DEFAULT_LEAF if value == DEFAULT_VALUE else _leaf_digest(key, value)
            )
        for i in range(DEPTH):
            level = DEPTH - i
            parents: dict[int, bytes] = {}
            for prefix in level_nodes:
                parent = prefix >> 1
                if parent in parents:
                    continue
                left = self._child(level, parent << 1, level_nodes, i)
                right = self._child(level, (parent << 1) | 1, level_nodes, i)
                parents[parent] = _node(left, right)
            level_nodes = parents
        return level_nodes.get(0, self._root)

    def _child(
        self, level: int, prefix: int, recomputed: dict[int, bytes], height: int
    ) -> bytes:
        if prefix in recomputed:
            return recomputed[prefix]
        known = self._known.get((level, prefix))
        if known is not None:
            return known
        return EMPTY_SUBTREE[height]
