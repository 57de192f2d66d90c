"""Fraud proof generation and verification.

Two kinds of proof exist. A transition proof demonstrates that replaying
one period of a block's data from its committed pre-root does not land on
the committed post-root (or, for the block-final slice, on the header's
state root after the producer's fee payout). A codec proof demonstrates
that the content of one committed row or column, reconstructed from
proven shares, does not hash to its committed axis root.

Verification never raises on attacker-supplied input: any structural
defect, failed membership proof, or unusable witness makes the verifier
return False. A proof only verifies True when every share and witness is
properly bound to the committed block and the replayed result still
disagrees with the commitment. A True verdict permanently rejects the
header in the client's header store.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

from . import merkle, rs2d
from .block import (
    DEFAULT_PERIOD,
    BlockHeader,
    BuiltBlock,
    DoubleTreeBlock,
    DoubleTreeHeader,
    ParseError,
    ParsedMessage,
    original_share_count,
    parse_period,
    parse_shares_with_spans,
    period,
)
from .erasure import Unrecoverable, rs_decode
from .merkle import MerkleProof
from .rs2d import COLUMN, ROW, CodecFault, ShareProof, share_index
from .smt import SparseProof, StateTree, WitnessError
from .state import (
    ERR,
    StateWitness,
    Transaction,
    apply_fee_payout,
    apply_transaction,
    make_tx_witness,
    make_witness,
    payout_keys,
    root_fee_payout,
    root_transition,
)


class HeaderStore:
    """Headers a client has downloaded, plus its permanent rejections."""

    def __init__(self) -> None:
        self.headers: dict[bytes, BlockHeader] = {}
        self.dt_headers: dict[bytes, DoubleTreeHeader] = {}
        self.rejected: set[bytes] = set()

    def add(self, header: BlockHeader) -> bytes:
        block_hash = header.block_hash()
        self.headers[block_hash] = header
        return block_hash

    def add_double_tree(self, header: DoubleTreeHeader) -> bytes:
        block_hash = header.block_hash()
        self.dt_headers[block_hash] = header
        return block_hash

    def get(self, block_hash: bytes) -> Optional[BlockHeader]:
        return self.headers.get(block_hash)

    def prev_state_root(self, header: BlockHeader) -> Optional[bytes]:
        prev = self.headers.get(header.prev_hash)
        return prev.state_root if prev else None

    def reject(self, block_hash: bytes) -> None:
        self.rejected.add(block_hash)

    def is_rejected(self, block_hash: bytes) -> bool:
        return block_hash in self.rejected

    def is_accepted(self, block_hash: bytes) -> bool:
        return block_hash in self.headers and block_hash not in self.rejected


# --- Transition fraud proofs -------------------------------------------------


@dataclass(frozen=True)
class TransitionFraudProof:
    """Shares of one period, their data-root proofs, and replay witnesses.

    start_index is the position of the first share within the block's
    original (pre-extension) share sequence. payout_witness is present
    only for the block-final slice, which replays the fee payout against
    the header state root.
    """

    block_hash: bytes
    start_index: int
    shares: tuple[bytes, ...]
    origins: tuple[int, ...]
    share_proofs: tuple[ShareProof, ...]
    witnesses: tuple[StateWitness, ...]
    payout_witness: Optional[StateWitness] = None


def _original_index_to_virtual(orig: int, k: int, origin: int, data_length: int) -> int:
    """Virtual data-tree index of original share orig under a proof origin."""
    r, c = divmod(orig, k)
    return share_index(ROW, r, c, origin, 2 * k, data_length)


def _trim_to_period(messages: Sequence[ParsedMessage], at_block_start: bool) -> list[ParsedMessage]:
    """Drop leading transfers that spill over from the previous period.

    A mid-block share run legitimately begins with the tail of the prior
    period; its transfers precede the first trace and are not part of the
    slice being replayed. At block start there is no prior period, so
    leading transfers are the slice.
    """
    if at_block_start:
        return list(messages)
    for i, parsed in enumerate(messages):
        if parsed.message.is_trace:
            return list(messages[i:])
    return []


def verify_transition_fraud_proof(
    proof: TransitionFraudProof, store: HeaderStore, p: int = DEFAULT_PERIOD
) -> bool:
    """True iff the proof pins an inconsistent period of a known block."""
    header = store.get(proof.block_hash)
    if header is None:
        return False
    try:
        width = rs2d.matrix_width_for(header.data_length)
    except ValueError:
        return False
    k = width // 2
    orig_count = original_share_count(header.data_length)

    count = len(proof.shares)
    if count == 0 or len(proof.origins) != count or len(proof.share_proofs) != count:
        return False
    y = proof.start_index
    if y < 0 or y + count > orig_count:
        return False

    for a, (share, origin, share_proof) in enumerate(
        zip(proof.shares, proof.origins, proof.share_proofs)
    ):
        if origin not in (ROW, COLUMN):
            return False
        virtual = _original_index_to_virtual(y + a, k, origin, header.data_length)
        if not rs2d.verify_share_merkle_proof(
            share, share_proof, header.data_root, header.data_length, virtual
        ):
            return False

    try:
        parsed = parse_shares_with_spans(proof.shares)
        trimmed = _trim_to_period(parsed, at_block_start=(y == 0))
        slice_ = parse_period([pm.message for pm in trimmed], p)
    except ParseError:
        return False

    if slice_.pre_root is None and y != 0:
        return False
    if slice_.post_root is None and y + count - 1 != orig_count - 1:
        return False
    if len(proof.witnesses) != len(slice_.txs):
        return False

    if slice_.pre_root is not None:
        inter: Union[bytes, object] = slice_.pre_root
    else:
        prev_root = store.prev_state_root(header)
        if prev_root is None:
            return False
        inter = prev_root

    try:
        for tx, witness in zip(slice_.txs, proof.witnesses):
            inter = root_transition(inter, tx, witness)
    except WitnessError:
        return False

    if slice_.post_root is not None:
        if proof.payout_witness is not None:
            return False
        return inter is ERR or inter != slice_.post_root

    # Block-final slice: the header's state root includes the fee payout.
    producer = header.additional_data
    if len(producer) == 32 and inter is not ERR:
        if proof.payout_witness is None:
            return False
        try:
            inter = root_fee_payout(inter, producer, proof.payout_witness)
        except WitnessError:
            return False
    return inter is ERR or inter != header.state_root


def _period_boundaries(parsed: Sequence[ParsedMessage]) -> list[tuple[int, int]]:
    """(start, end) message index ranges, one per period, end exclusive.

    The final range runs to the end of the message list even when the
    last message is a boundary trace: the block-final slice replays the
    fee payout against the header root.
    """
    ranges = []
    start = 0
    for i, pm in enumerate(parsed):
        if pm.message.is_trace:
            ranges.append((start, i + 1))
            start = i  # next period begins at its pre-root trace
    ranges.append((start, len(parsed)))
    return ranges


def generate_transition_fraud_proof(
    built: BuiltBlock, prev_state: StateTree
) -> Optional[TransitionFraudProof]:
    """Replay a block and emit a proof for the first faulty period.

    Returns None when every period replays to its boundary trace and the
    header state root matches the final payout. The prover needs the full
    block data and the previous block's state.
    """
    header = built.header
    payload_size = built.matrix.share_size - 2
    parsed = parse_shares_with_spans(built.shares)
    tree = prev_state.copy()

    for start, end in _period_boundaries(parsed):
        msgs = parsed[start:end]
        if not msgs:
            continue
        is_final = end == len(parsed)
        declared_post = msgs[-1].message.body if not is_final else None

        witnesses: list[StateWitness] = []
        inter: Union[bytes, object] = tree.root()
        failed = False
        for pm in msgs:
            if pm.message.is_trace:
                continue
            tx = pm.message.as_transaction()
            witnesses.append(make_tx_witness(tree, tx))
            if apply_transaction(tree, tx) is ERR:
                failed = True
                inter = ERR
                break
            inter = tree.root()

        payout_witness = None
        if declared_post is not None:
            mismatch = failed or inter != declared_post
        else:
            if not failed:
                payout_witness = make_witness(tree, payout_keys(built.producer))
                apply_fee_payout(tree, built.producer)
                inter = tree.root()
            mismatch = failed or inter != header.state_root

        if mismatch:
            y = msgs[0].start // payload_size
            if declared_post is None:
                end_share = len(built.shares) - 1
            else:
                end_share = (msgs[-1].end - 1) // payload_size
            share_run = built.shares[y : end_share + 1]
            share_proofs = []
            for offset in range(len(share_run)):
                r, c = divmod(y + offset, built.matrix.k)
                _, sp = rs2d.prove_share(built.matrix, r, c, ROW)
                share_proofs.append(sp)
            # align witnesses with what a verifier will parse out of the run;
            # a replay cut short by ERR pads with empty witnesses, which the
            # absorbing fold never examines
            reparsed = _trim_to_period(
                parse_shares_with_spans(share_run), at_block_start=(y == 0)
            )
            slice_ = parse_period([pm.message for pm in reparsed], built.p)
            witnesses = witnesses[: len(slice_.txs)]
            while len(witnesses) < len(slice_.txs):
                witnesses.append(StateWitness(()))
            return TransitionFraudProof(
                block_hash=header.block_hash(),
                start_index=y,
                shares=tuple(share_run),
                origins=tuple([ROW] * len(share_run)),
                share_proofs=tuple(share_proofs),
                witnesses=tuple(witnesses),
                payout_witness=payout_witness,
            )
    return None


# --- Codec fraud proofs -------------------------------------------------------


@dataclass(frozen=True)
class CodecFraudProof:
    """An axis root plus enough proven shares to reconstruct that axis."""

    block_hash: bytes
    axis: int
    j: int
    axis_root: bytes
    axis_root_proof: MerkleProof
    shares: tuple[tuple[bytes, int, int], ...]  # (share, pos, proof origin)
    share_proofs: tuple[ShareProof, ...]


def generate_codec_fraud_proof(
    fault: CodecFault, block_hash: bytes, commitment: rs2d.DataCommitment
) -> CodecFraudProof:
    """Wrap a recovery fault into a verifiable proof.

    Every decode input must carry its data-root proof; recovery tracks
    those for shares that arrived from the network.
    """
    if any(proof is None for proof in fault.proofs):
        raise ValueError("codec fault lacks share proofs for some inputs")
    width = commitment.matrix_width
    top_leaves = list(commitment.row_roots) + list(commitment.column_roots)
    top_index = fault.j if fault.axis == ROW else width + fault.j
    axis_root_proof = merkle.prove(top_leaves, top_index)
    return CodecFraudProof(
        block_hash=block_hash,
        axis=fault.axis,
        j=fault.j,
        axis_root=fault.axis_root,
        axis_root_proof=axis_root_proof,
        shares=fault.shares,
        share_proofs=tuple(fault.proofs),  # type: ignore[arg-type]
    )


def verify_codec_fraud_proof(proof: CodecFraudProof, store: HeaderStore) -> bool:
    """True iff the proven shares reconstruct an axis whose root differs
    from the committed one."""
    header = store.get(proof.block_hash)
    if header is None:
        return False
    try:
        width = rs2d.matrix_width_for(header.data_length)
    except ValueError:
        return False
    k = width // 2
    if proof.axis not in (ROW, COLUMN) or not 0 <= proof.j < width:
        return False

    top_index = proof.j if proof.axis == ROW else width + proof.j
    if not merkle.verify_merkle_proof(
        proof.axis_root,
        proof.axis_root_proof,
        header.data_root,
        2 * width,
        top_index,
    ):
        return False

    if len(proof.shares) < k or len(proof.share_proofs) != len(proof.shares):
        return False
    positions = [pos for _, pos, _ in proof.shares]
    if len(set(positions)) != len(positions):
        return False

    for (share, pos, ax), share_proof in zip(proof.shares, proof.share_proofs):
        if ax not in (ROW, COLUMN) or not 0 <= pos < width:
            return False
        try:
            virtual = share_index(
                proof.axis, proof.j, pos, ax, width, header.data_length
            )
        except ValueError:
            return False
        if not rs2d.verify_share_merkle_proof(
            share, share_proof, header.data_root, header.data_length, virtual
        ):
            return False

    try:
        recovered = rs_decode([(pos, share) for share, pos, _ in proof.shares], k)
    except (Unrecoverable, ValueError):
        return False
    return merkle.root(recovered) != proof.axis_root


# --- Double-tree transition fraud proofs --------------------------------------


@dataclass(frozen=True)
class DoubleTreeFraudProof:
    """Transition fraud proof against separate transfer and trace trees."""

    block_hash: bytes
    pre_trace: Optional[tuple[bytes, MerkleProof, int]]  # (trace, proof, x)
    post_trace: Optional[tuple[bytes, MerkleProof]]
    start_index: int
    txs: tuple[Transaction, ...]
    tx_proofs: tuple[MerkleProof, ...]
    witnesses: tuple[StateWitness, ...]
    payout_witness: Optional[StateWitness] = None


def verify_double_tree_fraud_proof(
    proof: DoubleTreeFraudProof,
    store: HeaderStore,
    p: int = DEFAULT_PERIOD,
    prev_state_root: Optional[bytes] = None,
) -> bool:
    """Verifier for the two-tree layout.

    The period a transfer belongs to is pure index arithmetic here, so in
    addition to the membership checks the proof must cover its period
    completely: from the period's first transfer to its last (or to the
    block's last transfer when no post-trace is given).
    """
    header = store.dt_headers.get(proof.block_hash)
    if header is None:
        return False
    count = len(proof.txs)
    if count == 0 or len(proof.tx_proofs) != count or len(proof.witnesses) != count:
        return False
    y = proof.start_index
    if y < 0 or y + count > header.tx_length:
        return False

    if proof.pre_trace is not None:
        trace, trace_proof, x = proof.pre_trace
        if not merkle.verify_merkle_proof(
            trace, trace_proof, header.trace_root, header.trace_length, x
        ):
            return False
    else:
        x = -1

    if proof.post_trace is not None:
        post, post_proof = proof.post_trace
        if not merkle.verify_merkle_proof(
            post, post_proof, header.trace_root, header.trace_length, x + 1
        ):
            return False

    # Period membership and completeness: the run starts where period x
    # starts and ends at the period (or block) boundary.
    if any(period(y + a, p) != x for a in range(count)):
        return False
    if y != (x + 1) * p:
        return False
    if proof.post_trace is not None:
        if y + count != (x + 2) * p:
            return False
    else:
        if y + count != header.tx_length:
            return False

    for a, (tx, tx_proof) in enumerate(zip(proof.txs, proof.tx_proofs)):
        if not merkle.verify_merkle_proof(
            tx.to_bytes(), tx_proof, header.tx_root, header.tx_length, y + a
        ):
            return False

    if proof.pre_trace is not None:
        inter: Union[bytes, object] = proof.pre_trace[0]
    else:
        if prev_state_root is None:
            prev = store.headers.get(header.prev_hash)
            dt_prev = store.dt_headers.get(header.prev_hash)
            if prev is not None:
                prev_state_root = prev.state_root
            elif dt_prev is not None:
                prev_state_root = dt_prev.state_root
        if prev_state_root is None:
            return False
        inter = prev_state_root

    try:
        for tx, witness in zip(proof.txs, proof.witnesses):
            inter = root_transition(inter, tx, witness)
    except WitnessError:
        return False

    if proof.post_trace is not None:
        if proof.payout_witness is not None:
            return False
        return inter is ERR or inter != proof.post_trace[0]

    producer = header.additional_data
    if len(producer) == 32 and inter is not ERR:
        if proof.payout_witness is None:
            return False
        try:
            inter = root_fee_payout(inter, producer, proof.payout_witness)
        except WitnessError:
            return False
    return inter is ERR or inter != header.state_root


def generate_double_tree_fraud_proof(
    built: DoubleTreeBlock, prev_state: StateTree
) -> Optional[DoubleTreeFraudProof]:
    """Replay a double-tree block; emit a proof for the first faulty period."""
    header = built.header
    tx_leaves = [tx.to_bytes() for tx in built.txs]
    tree = prev_state.copy()
    p = built.p
    n = len(built.txs)
    period_count = (n + p - 1) // p if n else 0

    for x in range(-1, max(period_count - 1, 0)):
        start = (x + 1) * p
        end = min((x + 2) * p, n)
        txs = built.txs[start:end]
        has_post = x + 1 < len(built.traces)
        declared_post = built.traces[x + 1] if has_post else None

        witnesses = []
        inter: Union[bytes, object] = tree.root()
        failed = False
        for tx in txs:
            witnesses.append(make_tx_witness(tree, tx))
            if apply_transaction(tree, tx) is ERR:
                failed = True
                inter = ERR
                break
            inter = tree.root()

        payout_witness = None
        if declared_post is not None:
            mismatch = failed or inter != declared_post
        else:
            if not failed:
                payout_witness = make_witness(tree, payout_keys(built.producer))
                apply_fee_payout(tree, built.producer)
                inter = tree.root()
            mismatch = failed or inter != header.state_root

        if mismatch:
            pre = None
            if x >= 0:
                pre_proof = merkle.prove(built.traces, x)
                pre = (built.traces[x], pre_proof, x)
            post = None
            if declared_post is not None:
                post = (declared_post, merkle.prove(built.traces, x + 1))
            return DoubleTreeFraudProof(
                block_hash=header.block_hash(),
                pre_trace=pre,
                post_trace=post,
                start_index=start,
                txs=tuple(txs),
                tx_proofs=tuple(merkle.prove(tx_leaves, i) for i in range(start, end)),
                witnesses=tuple(witnesses),
                payout_witness=payout_witness,
            )
        if declared_post is None:
            break
    return None


# --- Client-side application ---------------------------------------------------


def apply_fraud_proof(
    proof: Union[TransitionFraudProof, CodecFraudProof, DoubleTreeFraudProof],
    store: HeaderStore,
    p: int = DEFAULT_PERIOD,
) -> bool:
    """Verify a proof of either kind; permanently reject the header on True."""
    if isinstance(proof, TransitionFraudProof):
        ok = verify_transition_fraud_proof(proof, store, p)
    elif isinstance(proof, CodecFraudProof):
        ok = verify_codec_fraud_proof(proof, store)
    else:
        ok = verify_double_tree_fraud_proof(proof, store, p)
    if ok:
        store.reject(proof.block_hash)
    return ok


# --- Wire formats ---------------------------------------------------------------

_TRANSITION_TAG = b"T"
_CODEC_TAG = b"C"


def _encode_witness(witness: StateWitness) -> bytes:
    out = [len(witness.entries).to_bytes(2, "big")]
    for key, value, proof in witness.entries:
        out.append(key)
        out.append(len(value).to_bytes(2, "big"))
        out.append(value)
        out.append(proof.to_bytes())
    return b"".join(out)


def _read_witness(raw: bytes) -> tuple[StateWitness, bytes]:
    if len(raw) < 2:
        raise ValueError("truncated witness")
    count = int.from_bytes(raw[:2], "big")
    raw = raw[2:]
    entries = []
    for _ in range(count):
        if len(raw) < 34:
            raise ValueError("truncated witness entry")
        key = raw[:32]
        vlen = int.from_bytes(raw[32:34], "big")
        raw = raw[34:]
        if len(raw) < vlen:
            raise ValueError("truncated witness value")
        value = raw[:vlen]
        raw = raw[vlen:]
        proof, raw = SparseProof.read_from(raw, key, value)
        entries.append((key, value, proof))
    return StateWitness(tuple(entries)), raw


def encode_transition_fraud_proof(proof: TransitionFraudProof) -> bytes:
    if not proof.shares:
        raise ValueError("proof has no shares")
    share_size = len(proof.shares[0])
    out = [
        _TRANSITION_TAG,
        proof.block_hash,
        proof.start_index.to_bytes(8, "big"),
        share_size.to_bytes(4, "big"),
        len(proof.shares).to_bytes(2, "big"),
    ]
    out.extend(proof.shares)
    out.append(bytes(proof.origins))
    for sp in proof.share_proofs:
        out.append(sp.to_bytes())
    out.append(len(proof.witnesses).to_bytes(2, "big"))
    for witness in proof.witnesses:
        out.append(_encode_witness(witness))
    if proof.payout_witness is None:
        out.append(b"\x00")
    else:
        out.append(b"\x01")
        out.append(_encode_witness(proof.payout_witness))
    return b"".join(out)


def decode_transition_fraud_proof(raw: bytes) -> TransitionFraudProof:
    if raw[:1] != _TRANSITION_TAG:
        raise ValueError("not a transition fraud proof")
    raw = raw[1:]
    if len(raw) < 46:
        raise ValueError("truncated proof")
    block_hash = raw[:32]
    start_index = int.from_bytes(raw[32:40], "big")
    share_size = int.from_bytes(raw[40:44], "big")
    count = int.from_bytes(raw[44:46], "big")
    raw = raw[46:]
    if len(raw) < count * share_size + count:
        raise ValueError("truncated shares")
    shares = tuple(raw[i * share_size : (i + 1) * share_size] for i in range(count))
    raw = raw[count * share_size :]
    origins = tuple(raw[:count])
    raw = raw[count:]
    share_proofs = []
    for _ in range(count):
        sp, raw = ShareProof.read_from(raw)
        share_proofs.append(sp)
    if len(raw) < 2:
        raise ValueError("truncated witnesses")
    wcount = int.from_bytes(raw[:2], "big")
    raw = raw[2:]
    witnesses = []
    for _ in range(wcount):
        witness, raw = _read_witness(raw)
        witnesses.append(witness)
    if not raw:
        raise ValueError("truncated payout flag")
    flag, raw = raw[0], raw[1:]
    payout = None
    if flag == 1:
        payout, raw = _read_witness(raw)
    if raw:
        raise ValueError("trailing bytes after proof")
    return TransitionFraudProof(
        block_hash=block_hash,
        start_index=start_index,
        shares=shares,
        origins=origins,
        share_proofs=tuple(share_proofs),
        witnesses=tuple(witnesses),
        payout_witness=payout,
    )


def encode_codec_fraud_proof(proof: CodecFraudProof) -> bytes:
    if not proof.shares:
        raise ValueError("proof has no shares")
    share_size = len(proof.shares[0][0])
    out = [
        _CODEC_TAG,
        proof.block_hash,
        bytes([proof.axis]),
        proof.j.to_bytes(8, "big"),
        proof.axis_root,
        proof.axis_root_proof.to_bytes(),
        share_size.to_bytes(4, "big"),
        len(proof.shares).to_bytes(2, "big"),
    ]
    for share, pos, ax in proof.shares:
        out.append(pos.to_bytes(8, "big"))
        out.append(bytes([ax]))
        out.append(share)
    for sp in proof.share_proofs:
        out.append(sp.to_bytes())
    return b"".join(out)


def decode_codec_fraud_proof(raw: bytes) -> CodecFraudProof:
    if raw[:1] != _CODEC_TAG:
        raise ValueError("not a codec fraud proof")
    raw = raw[1:]
    if len(raw) < 73:
        raise ValueError("truncated proof")
    block_hash = raw[:32]
    axis = raw[32]
    j = int.from_bytes(raw[33:41], "big")
    axis_root = raw[41:73]
    axis_root_proof, raw = MerkleProof.read_from(raw[73:])
    if len(raw) < 6:
        raise ValueError("truncated share table")
    share_size = int.from_bytes(raw[:4], "big")
    count = int.from_bytes(raw[4:6], "big")
    raw = raw[6:]
    shares = []
    for _ in range(count):
        if len(raw) < 9 + share_size:
            raise ValueError("truncated share entry")
        pos = int.from_bytes(raw[:8], "big")
        ax = raw[8]
        share = raw[9 : 9 + share_size]
        raw = raw[9 + share_size :]
        shares.append((share, pos, ax))
    share_proofs = []
    for _ in range(count):
        sp, raw = ShareProof.read_from(raw)
        share_proofs.append(sp)
    if raw:
        raise ValueError("trailing bytes after proof")
    return CodecFraudProof(
        block_hash=block_hash,
        axis=axis,
        j=j,
        axis_root=axis_root,
        axis_root_proof=axis_root_proof,
        shares=tuple(shares),
        share_proofs=tuple(share_proofs),
    )


def encode_fraud_proof(proof: Union[TransitionFraudProof, CodecFraudProof]) -> bytes:
    if isinstance(proof, TransitionFraudProof):
        return encode_transition_fraud_proof(proof)
    return encode_codec_fraud_proof(proof)


def decode_fraud_proof(raw: bytes) -> Union[TransitionFraudProof, CodecFraudProof]:
    if raw[:1] == _TRANSITION_TAG:
        return decode_transition_fraud_proof(raw)
    if raw[:1] == _CODEC_TAG:
        return decode_codec_fraud_proof(raw)
    raise ValueError("unknown fraud proof tag")
