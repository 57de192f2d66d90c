"""Index-binding Merkle trees over arbitrary leaf counts.

Leaves are hashed with a 0x00 domain prefix and internal nodes with 0x01,
so a leaf can never be confused with the serialization of two child
digests. Trees with a non-power-of-two leaf count use a left-heavy split:
the left subtree always holds the largest power of two strictly below the
current leaf count. Proofs carry the leaf index and tree size, and
verification recomputes the exact descent path for that index, so a proof
for index i never verifies for any other index.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

DIGEST_SIZE = 32

_LEAF_PREFIX = b"\x00"
_NODE_PREFIX = b"\x01"


def hash_bytes(data: bytes) -> bytes:
    """Plain SHA-256, used for block hashes and key derivation."""
    return hashlib.sha256(data).digest()


def leaf_hash(data: bytes) -> bytes:
    return hashlib.sha256(_LEAF_PREFIX + data).digest()


def node_hash(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(_NODE_PREFIX + left + right).digest()


def _left_size(n: int) -> int:
    """Largest power of two strictly below n (n >= 2)."""
    return 1 << ((n - 1).bit_length() - 1)


@dataclass(frozen=True)
class MerkleProof:
    """Membership-and-position proof: sibling digests in leaf-to-root order."""

    siblings: tuple[bytes, ...]
    leaf_index: int
    tree_size: int

    def to_bytes(self) -> bytes:
        out = [
            self.tree_size.to_bytes(8, "big"),
            self.leaf_index.to_bytes(8, "big"),
            len(self.siblings).to_bytes(2, "big"),
        ]
        out.extend(self.siblings)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "MerkleProof":
        proof, rest = cls.read_from(raw)
        if rest:
            raise ValueError("trailing bytes after Merkle proof")
        return proof

    @classmethod
    def read_from(cls, raw: bytes) -> tuple["MerkleProof", bytes]:
        if len(raw) < 18:
            raise ValueError("truncated Merkle proof")
        tree_size = int.from_bytes(raw[0:8], "big")
        leaf_index = int.from_bytes(raw[8:16], "big")
        count = int.from_bytes(raw[16:18], "big")
        end = 18 + count * DIGEST_SIZE
        if len(raw) < end:
            raise ValueError("truncated Merkle proof siblings")
        siblings = tuple(
            raw[18 + i * DIGEST_SIZE : 18 + (i + 1) * DIGEST_SIZE] for i in range(count)
        )
        return cls(siblings, leaf_index, tree_size), raw[end:]


def root(leaves: Sequence[bytes]) -> bytes:
    """Merkle root of a non-empty leaf list."""
    if not leaves:
        raise ValueError("empty tree")
    return _root_range(leaves, 0, len(leaves))


def _root_range(leaves: Sequence[bytes], lo: int, n: int) -> bytes:
    if n == 1:
        return leaf_hash(leaves[lo])
    split = _left_size(n)
    return node_hash(
        _root_range(leaves, lo, split),
        _root_range(leaves, lo + split, n - split),
    )


def prove(leaves: Sequence[bytes], index: int) -> MerkleProof:
    """Proof that leaves[index] is at position index under root(leaves)."""
    n = len(leaves)
    if not 0 <= index < n:
        raise IndexError("leaf index out of range")
    siblings_root_first: list[bytes] = []
    lo, size, idx = 0, n, index
    while size > 1:
        split = _left_size(size)
        if idx < split:
            siblings_root_first.append(_root_range(leaves, lo + split, size - split))
            size = split
        else:
            siblings_root_first.append(_root_range(leaves, lo, split))
            lo += split
            idx -= split
            size -= split
    return MerkleProof(tuple(reversed(siblings_root_first)), index, n)


def _descent_sides(tree_size: int, index: int) -> list[bool]:
    """Per level from root: True when the indexed leaf lies in the left subtree."""
    sides: list[bool] = []
    lo, size = 0, tree_size
    while size > 1:
        split = _left_size(size)
        if index < lo + split:
            sides.append(True)
            size = split
        else:
            sides.append(False)
            lo += split
            size -= split
    return sides


def verify_merkle_proof(
    element: bytes,
    proof: MerkleProof,
    root_digest: bytes,
    tree_size: int,
    index: int,
) -> bool:
    """True iff the proof binds element to position index in a tree of
    tree_size leaves committed by root_digest. Malformed input yields False,
    never an exception."""
    if tree_size < 1 or not 0 <= index < tree_size:
        return False
    if proof.tree_size != tree_size or proof.leaf_index != index:
        return False
    if any(len(sib) != DIGEST_SIZE for sib in proof.siblings):
        return False
    sides = _descent_sides(tree_size, index)
    if len(proof.siblings) != len(sides):
        return False
    node = leaf_hash(element)
    # siblings are leaf-to-root, descent sides are root-to-leaf
    for sib, on_left in zip(proof.siblings, reversed(sides)):
        node = node_hash(node, sib) if on_left else node_hash(sib, node)
    return node == root_digest
