"""Escrow agreement contracts.

Seven monetization templates over one explicit state machine:

    DEPLOYED -> QUOTED -> USER_SIGNED -> ACTIVE -> (STOPPED | EXPIRED) -> SETTLED

Escrow is strictly positive exactly in USER_SIGNED, ACTIVE, STOPPED and
EXPIRED, and zero once SETTLED.  All money math is exact integer wei;
prorated charges round down so the remainder favors the end user.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import (
    AlreadyVoted,
    InvalidShares,
    NoOpenSession,
    NotAVoter,
    NotEndUser,
    NotOwner,
    NotYetReleased,
    QuotaExhausted,
    SessionAlreadyOpen,
    WrongState,
)
from .ledger import Block, Ledger
from .units import require_amount

DEFAULT_REFUND_THRESHOLD_BP = 7_500  # availability below this forces a full refund
IDENTITY_MULTIPLIER_BP = 10_000


class ContractState(Enum):
    DEPLOYED = "deployed"
    QUOTED = "quoted"
    USER_SIGNED = "user_signed"
    ACTIVE = "active"
    STOPPED = "stopped"
    EXPIRED = "expired"
    SETTLED = "settled"


class ContractKind(Enum):
    FIXED_PRICE = "fixed_price"
    DYNAMIC_PRICE = "dynamic_price"
    TIME_LIMITED_QUOTA = "time_limited_quota"
    FLEXIBLE_PERIOD = "flexible_period"
    INCOME_DIVISION = "income_division"
    CONSENSUS_DECISION = "consensus_decision"
    CONSTRAINT_BASED = "constraint_based"


# Kinds whose escrow settles by the time-based stop/expire path.
TIME_SETTLED_KINDS = frozenset(
    {
        ContractKind.FIXED_PRICE,
        ContractKind.DYNAMIC_PRICE,
        ContractKind.FLEXIBLE_PERIOD,
        ContractKind.CONSTRAINT_BASED,
    }
)


# ---------------------------------------------------------------------------
# per-kind terms
# ---------------------------------------------------------------------------

@dataclass
class QuotaTerms:
    """Prepaid per-minute balance consumed across start/stop sessions."""

    per_minute_price: int
    minutes_purchased: int = 0
    minutes_consumed: int = 0
    open_session_start: Optional[int] = None
    sessions: list[dict] = field(default_factory=list)

    def minutes_remaining(self) -> int:
        return self.minutes_purchased - self.minutes_consumed


@dataclass
class IncomeShares:
    """Ordered integer shares over a common denominator; they must sum exactly."""

    numerators: dict[str, int]
    denominator: int

    def validate(self) -> None:
        if not self.numerators or self.denominator <= 0:
            raise InvalidShares("shares must be non-empty with a positive denominator")
        if any(n <= 0 for n in self.numerators.values()):
            raise InvalidShares("every share must be > 0")
        if sum(self.numerators.values()) != self.denominator:
            raise InvalidShares(
                f"numerators sum to {sum(self.numerators.values())}, "
                f"denominator is {self.denominator}"
            )


@dataclass
class VotingState:
    """Strict-majority ballot gating the companion agreement contract."""

    voters: frozenset[str]
    votes: dict[str, str] = field(default_factory=dict)  # voter -> "yes" | "no"
    enacted: bool = False  # sticky once a tally reaches strict majority


@dataclass
class ConstraintTerms:
    """Legal/regional admissibility plus a price multiplier in basis points."""

    gdpr_required: bool = False
    allowed_regions: frozenset[str] = frozenset()
    price_multiplier_bp: int = IDENTITY_MULTIPLIER_BP

    def __post_init__(self) -> None:
        if self.price_multiplier_bp < 0:
            raise ValueError("price multiplier must be >= 0")


@dataclass
class FlexibleTerms:
    """Standby guarantee: a non-refundable minimum charge for fast deployment."""

    standby_rate: int  # wei per second
    standby_window_seconds: int
    min_charge: int = -1  # derived when left unset

    def __post_init__(self) -> None:
        require_amount(self.standby_rate, "standby_rate")
        if self.standby_window_seconds < 0:
            raise ValueError("standby window must be >= 0")
        derived = self.standby_rate * self.standby_window_seconds
        if self.min_charge == -1:
            self.min_charge = derived
        elif self.min_charge != derived:
            raise ValueError("min_charge must equal standby_rate * standby_window_seconds")


@dataclass(frozen=True)
class ConstraintEvaluation:
    admissible: bool
    price_multiplier_bp: int


@dataclass(frozen=True)
class Settlement:
    """Final money split of one contract: owner-side payouts plus user refund."""

    charge: int
    refund: int
    payouts: dict[str, int]


# ---------------------------------------------------------------------------
# the agreement contract
# ---------------------------------------------------------------------------

@dataclass
class AgreementContract:
    """One deployed contract instance; escrow accounting lives on the ledger."""

    kind: ContractKind
    owner: str
    end_user: str
    price: int = 0  # max price for time-based templates
    lock_time_seconds: int = 0
    refund_threshold_bp: int = DEFAULT_REFUND_THRESHOLD_BP
    state: ContractState = ContractState.DEPLOYED
    session_start_time: int = 0
    release_time: int = 0
    escrow: int = 0
    address: str = ""
    quota: Optional[QuotaTerms] = None
    shares: Optional[IncomeShares] = None
    voting: Optional[VotingState] = None
    constraints: Optional[ConstraintTerms] = None
    flexible: Optional[FlexibleTerms] = None
    division_address: Optional[str] = None  # agreement routed through a division contract
    settlement: Optional[Settlement] = None

    def require_state(self, *allowed: ContractState) -> None:
        if self.state not in allowed:
            raise WrongState(
                f"{self.address or self.kind.value}: state is {self.state.value}, "
                f"needs {'/'.join(s.value for s in allowed)}"
            )


def mark_quoted(contract: AgreementContract) -> None:
    """DEPLOYED -> QUOTED once the owner's price terms are attached."""
    contract.require_state(ContractState.DEPLOYED)
    if contract.kind in TIME_SETTLED_KINDS and contract.price <= 0:
        raise ValueError("escrow templates need a positive price to be quoted")
    contract.state = ContractState.QUOTED


# ---------------------------------------------------------------------------
# funding and signatures
# ---------------------------------------------------------------------------

def lock_funds(
    ledger: Ledger, contract: AgreementContract, sender: str, value: int, now: Block
) -> bool:
    """Escrow the full agreed price; reject any other value with False.

    On success the sender is recorded as the funding end user, the session
    start is stamped with the current block time, and the release time is
    set to ``start + lock_time_seconds``.  A contract is fundable once.
    """
    if contract.kind not in TIME_SETTLED_KINDS:
        raise WrongState(f"{contract.kind.value} contracts are not funded by lock_funds")
    contract.require_state(ContractState.QUOTED)
    if value != contract.price:
        return False  # value does not match the agreed price; nothing changes
    ledger.escrow_in(sender, contract.address, value, kind="lock")
    contract.end_user = sender
    contract.session_start_time = now.timestamp
    contract.release_time = now.timestamp + contract.lock_time_seconds
    contract.state = ContractState.USER_SIGNED
    return True


def countersign(ledger: Ledger, contract: AgreementContract, signer: str) -> None:
    """Owner countersignature activates the agreement."""
    contract.require_state(ContractState.USER_SIGNED)
    if signer != contract.owner:
        raise NotOwner(f"{signer} is not the owner {contract.owner}")
    ledger.contract_call(signer, contract.address)
    contract.state = ContractState.ACTIVE


# ---------------------------------------------------------------------------
# time-based settlement
# ---------------------------------------------------------------------------

def _charge_for_usage(contract: AgreementContract, used: int, availability_bp: int) -> int:
    if availability_bp < contract.refund_threshold_bp:
        return 0  # availability dropped below the threshold: full refund
    if contract.kind is ContractKind.FIXED_PRICE:
        return contract.price
    if contract.kind is ContractKind.FLEXIBLE_PERIOD:
        usage_price = contract.price - contract.flexible.min_charge
        prorated = usage_price * used // contract.lock_time_seconds
        return contract.flexible.min_charge + prorated
    # dynamic-price proration, also used by constraint-based and division-linked
    return contract.price * used // contract.lock_time_seconds


def _payouts_for_charge(ledger: Ledger, contract: AgreementContract, charge: int) -> dict[str, int]:
    if contract.division_address is not None:
        division = ledger.contracts[contract.division_address]
        return settle_with_division(division, charge)
    return {contract.owner: charge} if charge > 0 else {}


def _execute_settlement(
    ledger: Ledger,
    contract: AgreementContract,
    used: int,
    availability_bp: int,
    via: ContractState,
) -> Settlement:
    charge = _charge_for_usage(contract, used, availability_bp)
    refund = contract.escrow - charge
    payouts = _payouts_for_charge(ledger, contract, charge)
    contract.state = via
    for recipient, amount in payouts.items():
        ledger.escrow_out(contract.address, recipient, amount, kind="charge")
    ledger.escrow_out(contract.address, contract.end_user, refund, kind="refund")
    assert contract.escrow == 0
    contract.state = ContractState.SETTLED
    contract.settlement = Settlement(charge=charge, refund=refund, payouts=payouts)
    return contract.settlement


def stop_and_settle(
    ledger: Ledger,
    contract: AgreementContract,
    caller: str,
    now: Block,
    availability_bp: int = 10_000,
) -> Settlement:
    """End-user stop: charge the used time pro rata, refund the rest."""
    contract.require_state(ContractState.ACTIVE)
    if caller != contract.end_user:
        raise NotEndUser(f"{caller} is not the end user {contract.end_user}")
    ledger.contract_call(caller, contract.address)
    used = min(now.timestamp - contract.session_start_time, contract.lock_time_seconds)
    return _execute_settlement(ledger, contract, used, availability_bp, ContractState.STOPPED)


def expire_and_settle(
    ledger: Ledger,
    contract: AgreementContract,
    now: Block,
    availability_bp: int = 10_000,
) -> Settlement:
    """Timeout settlement at the release time: the full period is charged.

    Triggered by the alarm-clock wakeup, so no party pays a call fee.
    """
    contract.require_state(ContractState.ACTIVE)
    if now.timestamp < contract.release_time:
        raise NotYetReleased(
            f"release at {contract.release_time}, block time is {now.timestamp}"
        )
    used = contract.lock_time_seconds
    return _execute_settlement(ledger, contract, used, availability_bp, ContractState.EXPIRED)


def abort_and_refund(ledger: Ledger, contract: AgreementContract) -> Settlement:
    """Full refund on a provider-side fault (e.g. failed deployment)."""
    contract.require_state(ContractState.USER_SIGNED, ContractState.ACTIVE)
    contract.state = ContractState.STOPPED
    refund = contract.escrow
    ledger.escrow_out(contract.address, contract.end_user, refund, kind="refund")
    contract.state = ContractState.SETTLED
    contract.settlement = Settlement(charge=0, refund=refund, payouts={})
    return contract.settlement


# ---------------------------------------------------------------------------
# prepaid quota
# ---------------------------------------------------------------------------

def quota_purchase(
    ledger: Ledger, contract: AgreementContract, sender: str, minutes: int, value: int
) -> bool:
    """Escrow ``minutes * per_minute_price``; any other value is rejected."""
    if contract.kind is not ContractKind.TIME_LIMITED_QUOTA:
        raise WrongState(f"{contract.kind.value} contracts do not sell quota minutes")
    contract.require_state(ContractState.QUOTED)
    if minutes <= 0:
        raise ValueError("minutes purchased must be > 0")
    if value != contract.quota.per_minute_price * minutes:
        return False
    ledger.escrow_in(sender, contract.address, value, kind="lock")
    contract.end_user = sender
    contract.quota.minutes_purchased = minutes
    contract.state = ContractState.ACTIVE
    return True


def quota_start(ledger: Ledger, contract: AgreementContract, caller: str, now: Block) -> str:
    """Open a metered session; returns its access token."""
    contract.require_state(ContractState.ACTIVE)
    terms = contract.quota
    if terms.open_session_start is not None:
        raise SessionAlreadyOpen(contract.address)
    if terms.minutes_remaining() <= 0:
        raise QuotaExhausted(contract.address)
    ledger.contract_call(caller, contract.address)
    terms.open_session_start = now.timestamp
    token = f"{contract.address}/q{len(terms.sessions) + 1}"
    terms.sessions.append(
        {"token": token, "start": now.timestamp, "stop": None, "minutes": 0}
    )
    return token


def quota_stop(ledger: Ledger, contract: AgreementContract, caller: str, now: Block) -> int:
    """Close the open session; bill started minutes, clamped to the remainder."""
    terms = contract.quota
    if terms is None or terms.open_session_start is None:
        raise NoOpenSession(contract.address)
    contract.require_state(ContractState.ACTIVE)
    ledger.contract_call(caller, contract.address)
    elapsed = now.timestamp - terms.open_session_start
    minutes = min(-(-elapsed // 60), terms.minutes_remaining())  # ceil, then clamp
    charge = minutes * terms.per_minute_price
    ledger.escrow_out(contract.address, contract.owner, charge, kind="charge")
    terms.minutes_consumed += minutes
    record = terms.sessions[-1]
    record["stop"] = now.timestamp
    record["minutes"] = minutes
    terms.open_session_start = None
    total = terms.minutes_consumed * terms.per_minute_price
    contract.settlement = Settlement(
        charge=total, refund=0, payouts={contract.owner: total} if total else {}
    )
    if terms.minutes_remaining() == 0:
        assert contract.escrow == 0
        contract.state = ContractState.SETTLED
    return minutes


# ---------------------------------------------------------------------------
# income division
# ---------------------------------------------------------------------------

def set_income_shares(
    ledger: Ledger, contract: AgreementContract, proposer: str, shares: IncomeShares
) -> None:
    """Record the agreed division; quoting freezes it."""
    if contract.kind is not ContractKind.INCOME_DIVISION:
        raise WrongState(f"{contract.kind.value} contracts carry no income shares")
    contract.require_state(ContractState.DEPLOYED)
    shares.validate()
    ledger.contract_call(proposer, contract.address)
    contract.shares = shares
    contract.state = ContractState.QUOTED


def settle_with_division(contract: AgreementContract, charge: int) -> dict[str, int]:
    """Split a charge across the recorded shares by largest remainder.

    Each party gets floor(charge * numerator / denominator); leftover wei go
    one each to the largest remainders, ties broken by share listing order.
    Payouts always sum exactly to the charge.
    """
    if contract.shares is None:
        raise WrongState(f"{contract.address}: no income shares recorded")
    require_amount(charge, "charge")
    shares = contract.shares
    payouts: dict[str, int] = {}
    remainders: list[tuple[int, int, str]] = []  # (-remainder, listing index, address)
    for index, (addr, numerator) in enumerate(shares.numerators.items()):
        exact_numerator = charge * numerator
        payouts[addr] = exact_numerator // shares.denominator
        remainders.append((-(exact_numerator % shares.denominator), index, addr))
    leftover = charge - sum(payouts.values())
    remainders.sort()
    for _, _, addr in remainders[:leftover]:
        payouts[addr] += 1
    return payouts


# ---------------------------------------------------------------------------
# consensus voting
# ---------------------------------------------------------------------------

def init_vote(
    ledger: Ledger, contract: AgreementContract, caller: str, voters: set[str]
) -> None:
    """Register the voter set; the ballot then runs until enacted."""
    if contract.kind is not ContractKind.CONSENSUS_DECISION:
        raise WrongState(f"{contract.kind.value} contracts hold no ballot")
    contract.require_state(ContractState.DEPLOYED)
    if caller != contract.owner:
        raise NotOwner(f"{caller} is not the owner {contract.owner}")
    if not voters:
        raise ValueError("voter set must be non-empty")
    ledger.contract_call(caller, contract.address)
    contract.voting = VotingState(voters=frozenset(voters))
    contract.state = ContractState.QUOTED


def cast_vote(ledger: Ledger, contract: AgreementContract, voter: str, choice: str) -> None:
    if contract.voting is None:
        raise WrongState(f"{contract.address}: ballot not initialized")
    if voter not in contract.voting.voters:
        raise NotAVoter(voter)
    if voter in contract.voting.votes:
        raise AlreadyVoted(voter)
    if choice not in ("yes", "no"):
        raise ValueError(f"vote must be 'yes' or 'no', got {choice!r}")
    ledger.contract_call(voter, contract.address)
    contract.voting.votes[voter] = choice


def tally_and_enact(contract: AgreementContract) -> dict:
    """Strict-majority tally; enactment is sticky and unlocks the companion."""
    if contract.voting is None:
        raise WrongState(f"{contract.address}: ballot not initialized")
    voting = contract.voting
    yes = sum(1 for choice in voting.votes.values() if choice == "yes")
    if 2 * yes > len(voting.voters):
        voting.enacted = True
    return {"enacted": voting.enacted, "yes": yes, "voters": len(voting.voters)}


# ---------------------------------------------------------------------------
# constraint evaluation
# ---------------------------------------------------------------------------

def evaluate_constraints(
    terms: ConstraintTerms, provider_region: str, gdpr_compliant: bool
) -> ConstraintEvaluation:
    """Admissibility of a provider offer under the end user's constraints."""
    admissible = (not terms.gdpr_required or gdpr_compliant) and (
        not terms.allowed_regions or provider_region in terms.allowed_regions
    )
    return ConstraintEvaluation(
        admissible=admissible, price_multiplier_bp=terms.price_multiplier_bp
    )


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def export_contract(contract: AgreementContract) -> dict:
    """Stable-keyed contract snapshot embedded in scenario reports."""
    terms: dict = {}
    if contract.kind in TIME_SETTLED_KINDS:
        terms["price_wei"] = str(contract.price)
        terms["lock_time_seconds"] = contract.lock_time_seconds
        terms["refund_threshold_bp"] = contract.refund_threshold_bp
    if contract.quota is not None:
        terms["per_minute_price_wei"] = str(contract.quota.per_minute_price)
        terms["minutes_purchased"] = contract.quota.minutes_purchased
        terms["minutes_consumed"] = contract.quota.minutes_consumed
        terms["sessions"] = [
            {
                "token": s["token"],
                "start": s["start"],
                "stop": s["stop"],
                "minutes": s["minutes"],
            }
            for s in contract.quota.sessions
        ]
    if contract.shares is not None:
        terms["shares"] = {
            addr: [num, contract.shares.denominator]
            for addr, num in contract.shares.numerators.items()
        }
    if contract.voting is not None:
        terms["voters"] = sorted(contract.voting.voters)
        terms["votes"] = {v: contract.voting.votes[v] for v in sorted(contract.voting.votes)}
        terms["enacted"] = contract.voting.enacted
    if contract.constraints is not None:
        terms["gdpr_required"] = contract.constraints.gdpr_required
        terms["allowed_regions"] = sorted(contract.constraints.allowed_regions)
        terms["price_multiplier_bp"] = contract.constraints.price_multiplier_bp
    if contract.flexible is not None:
        terms["standby_rate_wei_per_second"] = str(contract.flexible.standby_rate)
        terms["standby_window_seconds"] = contract.flexible.standby_window_seconds
        terms["min_charge_wei"] = str(contract.flexible.min_charge)
    if contract.division_address is not None:
        terms["division_address"] = contract.division_address
    snapshot = {
        "address": contract.address,
        "kind": contract.kind.value,
        "state": contract.state.value,
        "escrow_wei": str(contract.escrow),
        "owner": contract.owner,
        "end_user": contract.end_user,
        "terms": terms,
    }
    if contract.settlement is not None:
        snapshot["settlement"] = {
            "charge_wei": str(contract.settlement.charge),
            "refund_wei": str(contract.settlement.refund),
            "payouts": {a: str(v) for a, v in contract.settlement.payouts.items()},
        }
    return snapshot
