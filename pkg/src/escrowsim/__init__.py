"""Deterministic simulator for escrow-settled monetization of on-demand services."""

from .contracts import (
    AgreementContract,
    ConstraintTerms,
    ContractKind,
    ContractState,
    FlexibleTerms,
    IncomeShares,
    QuotaTerms,
    Settlement,
)
from .errors import SimulationError
from .ledger import Block, GasSchedule, Ledger, TxRecord
from .oracle import oracle_settlement
from .orchestrator import SessionOrchestrator, SessionRequest
from .pricing import QosPreferences, Quote, RateCard, compare_fee_methods, quote_price
from .scenario import (
    ScenarioScript,
    SettlementReport,
    generate_random_script,
    parse_scenario,
    run_scenario,
)
from .units import eth, format_eth, gwei, parse_wei

__version__ = "0.1.0"

__all__ = [
    "AgreementContract",
    "Block",
    "ConstraintTerms",
    "ContractKind",
    "ContractState",
    "FlexibleTerms",
    "GasSchedule",
    "IncomeShares",
    "Ledger",
    "QosPreferences",
    "Quote",
    "QuotaTerms",
    "RateCard",
    "ScenarioScript",
    "SessionOrchestrator",
    "SessionRequest",
    "Settlement",
    "SettlementReport",
    "SimulationError",
    "TxRecord",
    "compare_fee_methods",
    "eth",
    "format_eth",
    "generate_random_script",
    "gwei",
    "oracle_settlement",
    "parse_scenario",
    "parse_wei",
    "quote_price",
    "run_scenario",
]
