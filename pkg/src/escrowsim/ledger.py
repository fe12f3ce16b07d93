"""Minimal deterministic ledger.

Accounts, value transfer with flat gas fees, block production on a
configurable interval, contract escrow accounting, and timeout wakeups.
Block timestamps are the only clock contract code may observe.

Every operation preserves the conservation invariant exactly:

    sum(account balances) + sum(contract escrows) + fee_sink == genesis_total
"""

from __future__ import annotations

import hashlib
import heapq
import json
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .errors import GasPriceOutOfRange, InsufficientFunds, UnknownAddress, ValidationError
from .units import WEI_PER_GWEI, gwei, require_amount

DEFAULT_BLOCK_INTERVAL = 15      # seconds, mean inter-block time
JITTER_INTERVAL_RANGE = (5, 25)  # uniform integer draw, mean 15

CONTRACT_ADDRESS_PREFIX = "sc-"


@dataclass(frozen=True)
class Block:
    """A produced block: the height and the timestamp contracts see."""

    height: int
    timestamp: int


@dataclass
class GasSchedule:
    """Flat gas costs per transaction kind and the wei price per gas unit.

    The fee for a transaction is ``gas_price_wei * gas_units`` and never
    depends on the transferred value.  ``price_bounds_gwei`` is enforced at
    construction; pass ``None`` to allow any price (unit tests use tiny
    schedules).
    """

    transfer_gas: int = 21_000
    contract_call_gas: int = 50_000
    contract_deploy_gas: int = 200_000
    gas_price_wei: int = gwei(20)
    price_bounds_gwei: Optional[tuple[int, int]] = (1, 40)

    def __post_init__(self) -> None:
        require_amount(self.gas_price_wei, "gas_price_wei")
        if self.price_bounds_gwei is not None:
            lo, hi = self.price_bounds_gwei
            if not lo * WEI_PER_GWEI <= self.gas_price_wei <= hi * WEI_PER_GWEI:
                raise GasPriceOutOfRange(
                    f"gas price {self.gas_price_wei} wei outside [{lo}, {hi}] GWEI"
                )

    def transfer_fee(self) -> int:
        return self.gas_price_wei * self.transfer_gas

    def call_fee(self) -> int:
        return self.gas_price_wei * self.contract_call_gas

    def deploy_fee(self) -> int:
        return self.gas_price_wei * self.contract_deploy_gas


@dataclass(frozen=True)
class TxRecord:
    """One ledger transaction, as exported to the JSON-lines log."""

    block_height: int
    from_addr: str
    to_addr: str
    value_wei: int
    fee_wei: int
    kind: str

    def to_json_line(self) -> str:
        # Key order is fixed: block_height, from, to, value_wei, fee_wei, kind.
        return json.dumps(
            {
                "block_height": self.block_height,
                "from": self.from_addr,
                "to": self.to_addr,
                "value_wei": str(self.value_wei),
                "fee_wei": str(self.fee_wei),
                "kind": self.kind,
            },
            separators=(", ", ": "),
        )


@dataclass(frozen=True)
class Wakeup:
    """A scheduled timeout call, delivered at the first block >= fire_at."""

    contract_address: str
    fire_at: int


class Ledger:
    """Single-writer ledger state: accounts, contracts, fees, blocks, wakeups.

    ``jitter_seed=None`` selects deterministic block production (exact
    ``block_interval`` spacing); an integer seed draws integer intervals
    uniformly from ``JITTER_INTERVAL_RANGE`` so the mean converges to the
    configured interval.
    """

    def __init__(
        self,
        genesis: dict[str, int],
        gas: Optional[GasSchedule] = None,
        block_interval: int = DEFAULT_BLOCK_INTERVAL,
        jitter_seed: Optional[int] = None,
    ) -> None:
        for name, balance in genesis.items():
            if name.startswith(CONTRACT_ADDRESS_PREFIX):
                raise ValidationError(
                    f"genesis account {name!r} uses the reserved contract prefix"
                )
            require_amount(balance, f"genesis balance of {name}")
        self.accounts: dict[str, int] = dict(genesis)
        self.contracts: dict[str, object] = {}
        self.fee_sink: int = 0
        self.current_block = Block(height=0, timestamp=0)
        self.genesis_total: int = sum(genesis.values())
        self.gas = gas or GasSchedule()
        self.block_interval = block_interval
        self._rng = random.Random(jitter_seed) if jitter_seed is not None else None
        self.tx_log: list[TxRecord] = []
        self.wakeup_handler: Optional[Callable[[str, Block], None]] = None
        self._wakeup_heap: list[tuple[int, int, str]] = []
        self._wakeup_armed: dict[str, int] = {}  # contract address -> fire_at
        self._wakeup_seq = 0
        self._contract_seq = 0

    # ---- block production -----------------------------------------------

    def produce_block(self) -> Block:
        """Append one block and deliver every wakeup now due, in order."""
        if self._rng is None:
            interval = self.block_interval
        else:
            interval = self._rng.randint(*JITTER_INTERVAL_RANGE)
        prev = self.current_block
        block = Block(height=prev.height + 1, timestamp=prev.timestamp + interval)
        self.current_block = block
        self._deliver_due_wakeups(block)
        return block

    def _deliver_due_wakeups(self, block: Block) -> None:
        while self._wakeup_heap and self._wakeup_heap[0][0] <= block.timestamp:
            fire_at, _, addr = heapq.heappop(self._wakeup_heap)
            if self._wakeup_armed.get(addr) != fire_at:
                continue  # cancelled or rescheduled
            del self._wakeup_armed[addr]
            if self.wakeup_handler is not None:
                self.wakeup_handler(addr, block)

    def schedule_wakeup(self, contract_address: str, fire_at: int) -> None:
        """Arm the alarm-clock timer for a contract (one per contract)."""
        self._wakeup_seq += 1
        self._wakeup_armed[contract_address] = fire_at
        heapq.heappush(self._wakeup_heap, (fire_at, self._wakeup_seq, contract_address))

    def cancel_wakeup(self, contract_address: str) -> None:
        self._wakeup_armed.pop(contract_address, None)

    def armed_wakeup_count(self) -> int:
        return len(self._wakeup_armed)

    # ---- accounts and transfers ------------------------------------------

    def balance_of(self, addr: str) -> int:
        """Balance of a user account, or escrow of a contract account."""
        if addr in self.accounts:
            return self.accounts[addr]
        if addr in self.contracts:
            return self.contracts[addr].escrow  # type: ignore[attr-defined]
        raise UnknownAddress(addr)

    def _require_account(self, addr: str) -> None:
        if addr not in self.accounts:
            raise UnknownAddress(addr)

    def transfer(self, from_addr: str, to_addr: str, value: int) -> TxRecord:
        """Move ``value`` between user accounts; sender also pays the gas fee."""
        require_amount(value, "transfer value")
        self._require_account(from_addr)
        self._require_account(to_addr)
        fee = self.gas.transfer_fee()
        if self.accounts[from_addr] < value + fee:
            raise InsufficientFunds(
                f"{from_addr} has {self.accounts[from_addr]} wei, needs {value + fee}"
            )
        self.accounts[from_addr] -= value + fee
        self.accounts[to_addr] += value
        self.fee_sink += fee
        return self._log(from_addr, to_addr, value, fee, "transfer")

    # ---- contract plumbing -------------------------------------------------

    def register_contract(self, contract: object, payer: str) -> str:
        """Assign a fresh contract address; the payer covers the deploy fee."""
        self._require_account(payer)
        fee = self.gas.deploy_fee()
        if self.accounts[payer] < fee:
            raise InsufficientFunds(f"{payer} cannot pay deploy fee of {fee} wei")
        self._contract_seq += 1
        addr = f"{CONTRACT_ADDRESS_PREFIX}{self._contract_seq}"
        self.accounts[payer] -= fee
        self.fee_sink += fee
        self.contracts[addr] = contract
        self._log(payer, addr, 0, fee, "deploy")
        return addr

    def contract_call(self, caller: str, contract_addr: str, kind: str = "call") -> None:
        """Charge the flat call fee for a state-changing contract trigger."""
        self._require_account(caller)
        if contract_addr not in self.contracts:
            raise UnknownAddress(contract_addr)
        fee = self.gas.call_fee()
        if self.accounts[caller] < fee:
            raise InsufficientFunds(f"{caller} cannot pay call fee of {fee} wei")
        self.accounts[caller] -= fee
        self.fee_sink += fee
        self._log(caller, contract_addr, 0, fee, kind)

    def escrow_in(self, caller: str, contract_addr: str, value: int, kind: str = "lock") -> None:
        """Move value from a user account into a contract's escrow, plus call fee."""
        require_amount(value, "escrow value")
        self._require_account(caller)
        contract = self.contracts.get(contract_addr)
        if contract is None:
            raise UnknownAddress(contract_addr)
        fee = self.gas.call_fee()
        if self.accounts[caller] < value + fee:
            raise InsufficientFunds(
                f"{caller} has {self.accounts[caller]} wei, needs {value + fee}"
            )
        self.accounts[caller] -= value + fee
        contract.escrow += value  # type: ignore[attr-defined]
        self.fee_sink += fee
        self._log(caller, contract_addr, value, fee, kind)

    def escrow_out(self, contract_addr: str, to_addr: str, value: int, kind: str) -> None:
        """Release escrowed value to a user account (no fee on releases)."""
        require_amount(value, "release value")
        contract = self.contracts.get(contract_addr)
        if contract is None:
            raise UnknownAddress(contract_addr)
        if value == 0:
            return
        self._require_account(to_addr)
        if contract.escrow < value:  # type: ignore[attr-defined]
            raise InsufficientFunds(
                f"{contract_addr} escrow {contract.escrow} < release {value}"
            )
        contract.escrow -= value  # type: ignore[attr-defined]
        self.accounts[to_addr] += value
        self._log(contract_addr, to_addr, value, 0, kind)

    # ---- verification -------------------------------------------------------

    def conservation_check(self) -> bool:
        """Exact integer check of the conservation invariant."""
        total = sum(self.accounts.values()) + self.fee_sink
        total += sum(c.escrow for c in self.contracts.values())  # type: ignore[attr-defined]
        return total == self.genesis_total

    def _log(self, from_addr: str, to_addr: str, value: int, fee: int, kind: str) -> TxRecord:
        rec = TxRecord(
            block_height=self.current_block.height,
            from_addr=from_addr,
            to_addr=to_addr,
            value_wei=value,
            fee_wei=fee,
            kind=kind,
        )
        self.tx_log.append(rec)
        return rec

    def tx_log_lines(self) -> list[str]:
        return [rec.to_json_line() for rec in self.tx_log]

    def tx_log_digest(self) -> str:
        payload = "\n".join(self.tx_log_lines()).encode()
        return hashlib.sha256(payload).hexdigest()


def replay_balances(
    genesis: dict[str, int], records: Iterable[TxRecord]
) -> tuple[dict[str, int], int]:
    """Recompute final balances from genesis plus the transaction log.

    Contract addresses accumulate escrow like ordinary balances.  Used by
    tests to confirm that replaying the log reproduces the live state.
    """
    balances: dict[str, int] = dict(genesis)
    fee_sink = 0
    for rec in records:
        balances[rec.from_addr] = balances.get(rec.from_addr, 0) - rec.value_wei - rec.fee_wei
        balances[rec.to_addr] = balances.get(rec.to_addr, 0) + rec.value_wei
        fee_sink += rec.fee_wei
    return balances, fee_sink
