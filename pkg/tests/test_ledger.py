"""Ledger: blocks, transfers, fees, escrow plumbing, wakeups, conservation."""

import random

import pytest

from escrowsim.contracts import AgreementContract, ContractKind
from escrowsim.errors import (
    GasPriceOutOfRange,
    InsufficientFunds,
    UnknownAddress,
    ValidationError,
)
from escrowsim.ledger import GasSchedule, Ledger, replay_balances
from escrowsim.units import eth, format_eth, gwei, parse_wei


def zero_gas() -> GasSchedule:
    return GasSchedule(gas_price_wei=0, price_bounds_gwei=None)


# ---- units -----------------------------------------------------------------

def test_unit_relations():
    assert gwei(1) == 10**9
    assert eth(1) == 10**18
    assert eth(1) == gwei(10**9)


def test_parse_wei_accepts_decimal_strings():
    assert parse_wei("5000000000000000000") == 5 * 10**18
    assert parse_wei("0") == 0


def test_parse_wei_rejects_junk():
    with pytest.raises(ValueError):
        parse_wei("1.5")
    with pytest.raises(ValueError):
        parse_wei("-3")
    with pytest.raises(ValueError):
        parse_wei("0x10")


def test_format_eth():
    assert format_eth(10**18) == "1 ETH"
    assert format_eth(648 * 10**15) == "0.648 ETH"
    assert format_eth(0) == "0 ETH"


# ---- block production ---------------------------------------------------------

def test_deterministic_blocks_tick_every_15_seconds():
    ledger = Ledger({"a": eth(1)}, gas=zero_gas())
    first = ledger.produce_block()
    assert (first.height, first.timestamp) == (1, 15)
    for _ in range(239):
        last = ledger.produce_block()
    assert last.height == 240
    assert last.timestamp == 3600


def test_jittered_blocks_converge_to_the_mean_interval():
    ledger = Ledger({"a": eth(1)}, gas=zero_gas(), jitter_seed=7)
    prev = ledger.current_block.timestamp
    intervals = []
    for _ in range(10_000):
        block = ledger.produce_block()
        intervals.append(block.timestamp - prev)
        prev = block.timestamp
    assert all(5 <= step <= 25 for step in intervals)
    mean = sum(intervals) / len(intervals)
    # frozen: sample mean for seed 7 over 10000 draws is 14.8802
    assert mean == pytest.approx(14.8802, abs=1e-9)
    assert abs(mean - 15.0) < 0.5


def test_same_seed_reproduces_the_same_timestamps():
    a = Ledger({"x": eth(1)}, gas=zero_gas(), jitter_seed=42)
    b = Ledger({"x": eth(1)}, gas=zero_gas(), jitter_seed=42)
    for _ in range(500):
        assert a.produce_block() == b.produce_block()


# ---- gas schedule ----------------------------------------------------------------

def test_gas_price_bounds_enforced():
    with pytest.raises(GasPriceOutOfRange):
        GasSchedule(gas_price_wei=gwei(41))
    with pytest.raises(GasPriceOutOfRange):
        GasSchedule(gas_price_wei=0)
    GasSchedule(gas_price_wei=gwei(41), price_bounds_gwei=None)  # override ok


def test_fee_is_price_times_units_independent_of_value():
    gas = GasSchedule(gas_price_wei=gwei(20))
    assert gas.transfer_fee() == 21_000 * gwei(20)
    assert gas.call_fee() == 50_000 * gwei(20)
    assert gas.deploy_fee() == 200_000 * gwei(20)


# ---- transfers ---------------------------------------------------------------------

def test_transfer_debits_value_plus_fee():
    # fee of 21 wei: 21 gas units at 1 wei per unit
    gas = GasSchedule(transfer_gas=21, gas_price_wei=1, price_bounds_gwei=None)
    ledger = Ledger({"a": 1000, "b": 0}, gas=gas)
    ledger.transfer("a", "b", 100)
    assert ledger.balance_of("a") == 879
    assert ledger.balance_of("b") == 100
    assert ledger.fee_sink == 21
    assert ledger.conservation_check()


def test_transfer_boundary_spends_entire_balance():
    gas = GasSchedule(transfer_gas=21, gas_price_wei=1, price_bounds_gwei=None)
    ledger = Ledger({"a": 1000, "b": 0}, gas=gas)
    ledger.transfer("a", "b", 1000 - 21)
    assert ledger.balance_of("a") == 0


def test_transfer_insufficient_funds_changes_nothing():
    gas = GasSchedule(transfer_gas=21, gas_price_wei=1, price_bounds_gwei=None)
    ledger = Ledger({"a": 1000, "b": 5}, gas=gas)
    with pytest.raises(InsufficientFunds):
        ledger.transfer("a", "b", 1000)  # 1000 + 21 > 1000
    assert ledger.balance_of("a") == 1000
    assert ledger.balance_of("b") == 5
    assert ledger.fee_sink == 0


def test_unknown_addresses_raise():
    ledger = Ledger({"a": eth(1)}, gas=zero_gas())
    with pytest.raises(UnknownAddress):
        ledger.balance_of("nobody")
    with pytest.raises(UnknownAddress):
        ledger.transfer("a", "nobody", 1)
    with pytest.raises(UnknownAddress):
        ledger.transfer("nobody", "a", 1)


def test_genesis_rejects_reserved_contract_prefix():
    with pytest.raises(ValidationError):
        Ledger({"sc-1": 10}, gas=zero_gas())


# ---- contract escrow accounts --------------------------------------------------------

def _contract() -> AgreementContract:
    return AgreementContract(kind=ContractKind.DYNAMIC_PRICE, owner="own", end_user="")


def test_register_contract_assigns_sequential_addresses():
    ledger = Ledger({"own": eth(1)}, gas=zero_gas())
    assert ledger.register_contract(_contract(), payer="own") == "sc-1"
    assert ledger.register_contract(_contract(), payer="own") == "sc-2"


def test_escrow_in_and_out_preserve_conservation():
    ledger = Ledger({"alice": eth(2), "own": eth(1)}, gas=zero_gas())
    addr = ledger.register_contract(_contract(), payer="own")
    ledger.escrow_in("alice", addr, eth(1))
    assert ledger.balance_of(addr) == eth(1)  # contract address reads as escrow
    assert ledger.balance_of("alice") == eth(1)
    assert ledger.conservation_check()
    ledger.escrow_out(addr, "own", eth(1) // 4, kind="charge")
    ledger.escrow_out(addr, "alice", eth(1) - eth(1) // 4, kind="refund")
    assert ledger.balance_of(addr) == 0
    assert ledger.conservation_check()


def test_escrow_out_cannot_overdraw():
    ledger = Ledger({"alice": eth(2), "own": eth(1)}, gas=zero_gas())
    addr = ledger.register_contract(_contract(), payer="own")
    ledger.escrow_in("alice", addr, 100)
    with pytest.raises(InsufficientFunds):
        ledger.escrow_out(addr, "own", 101, kind="charge")


def test_deploy_fee_charged_to_payer():
    ledger = Ledger({"own": eth(1)}, gas=GasSchedule(gas_price_wei=gwei(20)))
    ledger.register_contract(_contract(), payer="own")
    assert ledger.balance_of("own") == eth(1) - 200_000 * gwei(20)
    assert ledger.fee_sink == 200_000 * gwei(20)
    assert ledger.conservation_check()


# ---- randomized conservation sweep --------------------------------------------------

def test_conservation_holds_under_random_op_storm():
    rng = random.Random(1234)
    gas = GasSchedule(transfer_gas=100, contract_call_gas=200,
                      contract_deploy_gas=300, gas_price_wei=3, price_bounds_gwei=None)
    names = ["a", "b", "c", "d"]
    ledger = Ledger({n: eth(1) for n in names}, gas=gas)
    contracts = []
    for step in range(2000):
        op = rng.randrange(5)
        try:
            if op == 0:
                ledger.transfer(rng.choice(names), rng.choice(names), rng.randrange(10**15))
            elif op == 1 and len(contracts) < 6:
                contracts.append(ledger.register_contract(_contract(), rng.choice(names)))
            elif op == 2 and contracts:
                ledger.escrow_in(rng.choice(names), rng.choice(contracts), rng.randrange(10**15))
            elif op == 3 and contracts:
                addr = rng.choice(contracts)
                held = ledger.balance_of(addr)
                if held:
                    ledger.escrow_out(addr, rng.choice(names), rng.randrange(held + 1), "charge")
            else:
                ledger.produce_block()
        except InsufficientFunds:
            pass
        assert ledger.conservation_check(), f"conservation broke at step {step}"


# ---- transaction log -------------------------------------------------------------------

def test_tx_log_replay_reproduces_balances():
    gas = GasSchedule(transfer_gas=10, contract_call_gas=20,
                      contract_deploy_gas=30, gas_price_wei=2, price_bounds_gwei=None)
    ledger = Ledger({"a": eth(1), "b": eth(1)}, gas=gas)
    addr = ledger.register_contract(_contract(), payer="a")
    ledger.transfer("a", "b", 12345)
    ledger.escrow_in("b", addr, 777)
    ledger.escrow_out(addr, "a", 500, kind="refund")
    balances, fee_sink = replay_balances({"a": eth(1), "b": eth(1)}, ledger.tx_log)
    assert fee_sink == ledger.fee_sink
    for name in ("a", "b"):
        assert balances[name] == ledger.balance_of(name)
    assert balances[addr] == ledger.balance_of(addr)


def test_tx_log_lines_have_fixed_key_order_and_string_amounts():
    gas = GasSchedule(transfer_gas=10, gas_price_wei=2, price_bounds_gwei=None)
    ledger = Ledger({"a": eth(1), "b": 0}, gas=gas)
    ledger.transfer("a", "b", 42)
    line = ledger.tx_log_lines()[0]
    assert line == (
        '{"block_height": 0, "from": "a", "to": "b",'
        ' "value_wei": "42", "fee_wei": "20", "kind": "transfer"}'
    )


def test_tx_log_digest_is_stable():
    def build():
        ledger = Ledger({"a": eth(1), "b": 0}, gas=zero_gas(), jitter_seed=5)
        for i in range(50):
            ledger.produce_block()
            ledger.transfer("a", "b", i)
        return ledger.tx_log_digest()

    assert build() == build()


# ---- wakeups -----------------------------------------------------------------------

def test_wakeup_fires_on_first_block_at_or_after_fire_at():
    ledger = Ledger({"a": eth(1)}, gas=zero_gas())
    fired = []
    ledger.wakeup_handler = lambda addr, block: fired.append((addr, block.timestamp))
    ledger.schedule_wakeup("sc-9", fire_at=31)
    ledger.produce_block()  # 15
    ledger.produce_block()  # 30
    assert fired == []
    ledger.produce_block()  # 45 >= 31
    assert fired == [("sc-9", 45)]
    ledger.produce_block()
    assert len(fired) == 1  # delivered once


def test_cancelled_wakeup_never_fires():
    ledger = Ledger({"a": eth(1)}, gas=zero_gas())
    fired = []
    ledger.wakeup_handler = lambda addr, block: fired.append(addr)
    ledger.schedule_wakeup("sc-1", fire_at=20)
    ledger.cancel_wakeup("sc-1")
    for _ in range(5):
        ledger.produce_block()
    assert fired == []
    assert ledger.armed_wakeup_count() == 0


def test_reschedule_replaces_previous_wakeup():
    ledger = Ledger({"a": eth(1)}, gas=zero_gas())
    fired = []
    ledger.wakeup_handler = lambda addr, block: fired.append(block.timestamp)
    ledger.schedule_wakeup("sc-1", fire_at=20)
    ledger.schedule_wakeup("sc-1", fire_at=100)
    for _ in range(10):
        ledger.produce_block()
    assert fired == [105]
