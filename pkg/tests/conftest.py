import random

import pytest

from daproofs.merkle import hash_bytes
from daproofs.smt import StateTree
from daproofs.state import AccountValue, Transaction


def account_key(tag) -> bytes:
    return hash_bytes(f"account:{tag}".encode())


def funded_state(count: int = 6, balance: int = 10_000) -> tuple[StateTree, list[bytes]]:
    tree = StateTree()
    keys = [account_key(i) for i in range(count)]
    for key in keys:
        tree.update(key, AccountValue(balance, 0).encode())
    return tree, keys


def transfer_chain(keys, count, rng: random.Random, max_amount: int = 40) -> list[Transaction]:
    """Transfers that stay legal when applied in order from a funded state."""
    nonces = {key: 0 for key in keys}
    txs = []
    for _ in range(count):
        sender = rng.choice(keys)
        recipient = rng.choice(keys)
        txs.append(
            Transaction(
                sender=sender,
                recipient=recipient,
                amount=rng.randrange(1, max_amount),
                fee=rng.randrange(0, 4),
                nonce=nonces[sender],
            )
        )
        nonces[sender] += 1
    return txs


@pytest.fixture(scope="session")
def base_state():
    return funded_state()
