"""Account-based state machine over the sparse Merkle tree.

Accounts are keyed by 32-byte identifiers and hold a balance and a nonce;
an absent key is an account with balance 0 and nonce 0. A transfer is
legal when its nonce equals the sender's stored nonce and the sender can
cover amount plus fee; applying it debits the sender, bumps the sender
nonce, credits the recipient, and accrues the fee into the reserved
accumulator key. Illegal transfers yield ERR, which absorbs: once a
replay hits ERR it stays ERR.

Replay works either on a full tree (transition) or statelessly from a
root plus a witness (root_transition). A witness that fails verification
or does not cover the touched keys raises WitnessError; that is distinct
from ERR, which means the transaction itself is illegal. Verifiers rely
on the distinction: a bad witness invalidates a fraud proof, while an
illegal transaction is exactly what a fraud proof demonstrates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .merkle import hash_bytes
from .smt import SparseProof, StateTree, WitnessError, WitnessSubtree

U64_MAX = (1 << 64) - 1

# Reserved state key accumulating transaction fees within a block.
FEES_KEY = hash_bytes(b"__fees__")


class _ErrType:
    """Absorbing error value produced by illegal transitions."""

    _instance: Optional["_ErrType"] = None

    def __new__(cls) -> "_ErrType":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ERR"


ERR = _ErrType()

StateRoot = Union[bytes, _ErrType]


@dataclass(frozen=True)
class Transaction:
    """Balance transfer; wire format is from(32) to(32) amount(8) fee(8) nonce(8)."""

    sender: bytes
    recipient: bytes
    amount: int
    fee: int
    nonce: int

    WIRE_SIZE = 88

    def __post_init__(self) -> None:
        if len(self.sender) != 32 or len(self.recipient) != 32:
            raise ValueError("account keys must be 32 bytes")
        for name in ("amount", "fee", "nonce"):
            v = getattr(self, name)
            if not 0 <= v <= U64_MAX:
                raise ValueError(f"{name} out of 64-bit range")
        if self.amount + self.fee > U64_MAX:
            raise ValueError("amount plus fee overflows")

    def to_bytes(self) -> bytes:
        return (
            self.sender
            + self.recipient
            + self.amount.to_bytes(8, "big")
            + self.fee.to_bytes(8, "big")
            + self.nonce.to_bytes(8, "big")
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Transaction":
        if len(raw) != cls.WIRE_SIZE:
            raise ValueError("transaction record must be 88 bytes")
        return cls(
            sender=raw[0:32],
            recipient=raw[32:64],
            amount=int.from_bytes(raw[64:72], "big"),
            fee=int.from_bytes(raw[72:80], "big"),
            nonce=int.from_bytes(raw[80:88], "big"),
        )

    def touched_keys(self) -> tuple[bytes, ...]:
        """Keys read or written, in canonical order."""
        return tuple(sorted({self.sender, self.recipient, FEES_KEY}))


@dataclass(frozen=True)
class AccountValue:
    balance: int = 0
    nonce: int = 0

    def encode(self) -> bytes:
        if self.balance == 0 and self.nonce == 0:
            return b""
        return self.balance.to_bytes(8, "big") + self.nonce.to_bytes(8, "big")

    @classmethod
    def decode(cls, raw: bytes) -> "AccountValue":
        if raw == b"":
            return cls()
        if len(raw) != 16:
            raise ValueError("account value must be empty or 16 bytes")
        return cls(int.from_bytes(raw[:8], "big"), int.from_bytes(raw[8:], "big"))


@dataclass(frozen=True)
class StateWitness:
    """Key-value pairs plus membership proofs against one state root."""

    entries: tuple[tuple[bytes, bytes, SparseProof], ...]

    def keys(self) -> set[bytes]:
        return {key for key, _, _ in self.entries}


class _TreeView:
    """Adapter running the transfer rules against a full tree."""

    def __init__(self, tree: StateTree) -> None:
        self.tree = tree

    def get(self, key: bytes) -> bytes:
        return self.tree.get(key)

    def update(self, key: bytes, value: bytes) -> None:
        self.tree.update(key, value)

    def root(self) -> bytes:
        return self.tree.root()


def _apply_rules(view, tx: Transaction) -> Optional[bytes]:
    """Run the transfer on any get/update/root view; None means illegal."""
    sender = AccountValue.decode(view.get(tx.sender))
    if tx.nonce != sender.nonce:
        return None
    charge = tx.amount + tx.fee
    if sender.balance < charge:
        return None
    view.update(
        tx.sender, AccountValue(sender.balance - charge, sender.nonce + 1).encode()
    )
    recipient = AccountValue.decode(view.get(tx.recipient))
    view.update(
        tx.recipient,
        AccountValue(recipient.balance + tx.amount, recipient.nonce).encode(),
    )
    fees = AccountValue.decode(view.get(FEES_KEY))
    view.update(FEES_KEY, AccountValue(fees.balance + tx.fee, 0).encode())
    return view.root()


def apply_transaction(tree: StateTree, tx: Transaction) -> StateRoot:
    """In-place transfer; returns the new root or ERR if the transfer is illegal.

    The tree is only modified when the transfer is legal.
    """
    result = _apply_rules(_TreeView(tree), tx)
    return ERR if result is None else result


def transition(state: Union[StateTree, _ErrType], tx: Transaction) -> Union[StateTree, _ErrType]:
    """Pure transfer: returns a new tree, or the absorbing ERR."""
    if state is ERR:
        return ERR
    assert isinstance(state, StateTree)
    new = state.copy()
    return ERR if apply_transaction(new, tx) is ERR else new


def valid(txs: Iterable[Transaction], state: StateTree) -> bool:
    """True iff replaying every transfer in order never hits ERR."""
    current: Union[StateTree, _ErrType] = state.copy()
    for tx in txs:
        if current is ERR:
            return False
        current = ERR if apply_transaction(current, tx) is ERR else current  # type: ignore[arg-type]
    return current is not ERR


def make_witness(tree: StateTree, keys: Iterable[bytes]) -> StateWitness:
    """Minimal witness: one proven entry per key, in canonical order."""
    entries = tuple(
        (key, tree.get(key), tree.prove(key)) for key in sorted(set(keys))
    )
    return StateWitness(entries)


def make_tx_witness(tree: StateTree, tx: Transaction) -> StateWitness:
    return make_witness(tree, tx.touched_keys())


def root_transition(state_root: StateRoot, tx: Transaction, witness: StateWitness) -> StateRoot:
    """Stateless replay of one transfer from a root and a witness.

    Returns the post-root, or ERR when the transfer is illegal. Raises
    WitnessError when the witness is unusable (bad proofs, inconsistent
    entries, or missing touched keys); callers verifying fraud proofs
    treat that as a malformed proof, not as evidence of fraud.
    """
    if state_root is ERR:
        return ERR
    assert isinstance(state_root, bytes)
    subtree = WitnessSubtree.from_entries(state_root, witness.entries)
    missing = set(tx.touched_keys()) - subtree.covered
    if missing:
        raise WitnessError("witness does not cover all touched keys")
    result = _apply_rules(subtree, tx)
    return ERR if result is None else result


def apply_fee_payout(tree: StateTree, producer: bytes) -> bytes:
    """Credit accrued fees to the producer and reset the accumulator."""
    if len(producer) != 32:
        raise ValueError("producer key must be 32 bytes")
    fees = AccountValue.decode(tree.get(FEES_KEY))
    if fees.balance == 0:
        return tree.root()
    account = AccountValue.decode(tree.get(producer))
    tree.update(producer, AccountValue(account.balance + fees.balance, account.nonce).encode())
    tree.update(FEES_KEY, b"")
    return tree.root()


def collect_fees(tree: StateTree, producer: bytes) -> StateTree:
    """Pure fee payout, applied as a block's final implicit transition."""
    new = tree.copy()
    apply_fee_payout(new, producer)
    return new


def payout_keys(producer: bytes) -> tuple[bytes, ...]:
    return tuple(sorted({producer, FEES_KEY}))


def root_fee_payout(state_root: bytes, producer: bytes, witness: StateWitness) -> bytes:
    """Stateless fee payout replay; raises WitnessError on unusable witnesses."""
    subtree = WitnessSubtree.from_entries(state_root, witness.entries)
    if set(payout_keys(producer)) - subtree.covered:
        raise WitnessError("witness does not cover payout keys")
    fees = AccountValue.decode(subtree.get(FEES_KEY))
    if fees.balance == 0:
        return state_root
    account = AccountValue.decode(subtree.get(producer))
    subtree.update(
        producer, AccountValue(account.balance + fees.balance, account.nonce).encode()
    )
    subtree.update(FEES_KEY, b"")
    return subtree.root()


def total_supply(tree: StateTree) -> int:
    """Sum of all balances including the fee accumulator."""
    return sum(AccountValue.decode(value).balance for _, value in tree.items())
