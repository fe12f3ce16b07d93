"""Session lifecycle orchestration.

Drives the full workflow: quote and contract deployment, user payment and
fund lock, countersignature, simulated container deployment with URL
issuance, availability monitoring, and settlement, either by an end-user
stop or by the alarm-clock timeout wakeup at the release time.

Workflow step identifiers 1..16 are appended to each session's step log:
1 quote+deploy, 2 price notification, 3 pay+lock, 4 signed notification,
5 countersign, 6 deployment request, 7 deployment, 8 deploy success,
9 URL issued, 10 URL shared, 11 user stop signature, 12 undeployment,
13 funds unlocked and returned pro rata, 14-15 settlement notifications,
16 completion notification.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from . import contracts as sc
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
from .errors import (
    DeploymentFailed,
    InadmissibleOffer,
    QuoteExpired,
    SessionNotActive,
    WrongState,
)
from .ledger import Block, Ledger
from .pricing import BP_SCALE, Quote, QosPreferences, RateCard, quote_price


@dataclass
class QosTrace:
    """Availability samples observed during a session, in block-time order."""

    samples: list[tuple[int, bool]] = field(default_factory=list)

    def record(self, timestamp: int, available: bool) -> None:
        if self.samples and timestamp < self.samples[-1][0]:
            raise ValueError("sample timestamps must be non-decreasing")
        self.samples.append((timestamp, available))

    def availability_bp(self) -> int:
        """Unweighted sample mean, floored to basis points; no samples = fully up."""
        if not self.samples:
            return BP_SCALE
        up = sum(1 for _, available in self.samples if available)
        return BP_SCALE * up // len(self.samples)


@dataclass
class SessionRequest:
    end_user: str
    owner: str
    prefs: QosPreferences
    constraints: Optional[ConstraintTerms] = None
    shares: Optional[IncomeShares] = None  # income-division kind
    consensus_address: Optional[str] = None  # consensus kind: enacted ballot
    flexible: Optional[FlexibleTerms] = None


@dataclass
class SessionRecord:
    contract_address: str
    end_user: str
    owner: str
    quote: Quote
    url_token: str = ""
    deploy_block: Optional[int] = None
    stop_block: Optional[int] = None
    step_log: list[int] = field(default_factory=list)
    trace: QosTrace = field(default_factory=QosTrace)
    settlement: Optional[Settlement] = None
    settled_by: str = ""  # "stop" | "expiry" | "abort"


class SessionOrchestrator:
    """Serializes session events onto the ledger's single-writer state.

    The provider placement decision is a stub: every request is served by
    the one configured provider (region + GDPR posture below).
    """

    def __init__(
        self,
        ledger: Ledger,
        rate_card: Optional[RateCard] = None,
        provider_region: str = "EU",
        provider_gdpr_compliant: bool = True,
        refund_threshold_bp: int = sc.DEFAULT_REFUND_THRESHOLD_BP,
        deployment_latency_seconds: int = 0,
    ) -> None:
        self.ledger = ledger
        self.rate_card = rate_card or RateCard()
        self.provider_region = provider_region
        self.provider_gdpr_compliant = provider_gdpr_compliant
        self.refund_threshold_bp = refund_threshold_bp
        self.deployment_latency_seconds = deployment_latency_seconds
        self.sessions: list[SessionRecord] = []
        self._by_contract: dict[str, SessionRecord] = {}
        self._token_seq = 0
        self.fail_next_deployment = False  # fault-injection hook
        ledger.wakeup_handler = self._handle_wakeup

    # ---- steps 1-2: quote and contract deployment -------------------------

    def request_session(self, req: SessionRequest) -> SessionRecord:
        """Price the request and deploy its agreement contract in QUOTED state."""
        req.prefs.validate()
        multiplier_bp = sc.IDENTITY_MULTIPLIER_BP
        if req.constraints is not None:
            evaluation = sc.evaluate_constraints(
                req.constraints, self.provider_region, self.provider_gdpr_compliant
            )
            if not evaluation.admissible:
                raise InadmissibleOffer(
                    f"no provider satisfies constraints (region {self.provider_region})"
                )
            multiplier_bp = evaluation.price_multiplier_bp

        kind = req.prefs.monetization_kind
        quote = quote_price(
            req.prefs,
            self.rate_card,
            current_height=self.ledger.current_block.height,
            constraint_multiplier_bp=multiplier_bp,
            flexible=req.flexible,
        )

        division_address = None
        if kind is ContractKind.INCOME_DIVISION:
            division_address = self._deploy_division(req)
        elif kind is ContractKind.CONSENSUS_DECISION:
            self._require_enacted(req.consensus_address)

        contract = self._build_agreement(req, kind, quote, division_address)
        contract.address = self.ledger.register_contract(contract, payer=req.owner)
        sc.mark_quoted(contract)

        session = SessionRecord(
            contract_address=contract.address,
            end_user=req.end_user,
            owner=req.owner,
            quote=quote,
        )
        session.step_log += [1, 2]
        self.sessions.append(session)
        self._by_contract[contract.address] = session
        return session

    def _build_agreement(
        self,
        req: SessionRequest,
        kind: ContractKind,
        quote: Quote,
        division_address: Optional[str],
    ) -> AgreementContract:
        agreement_kind = kind
        if kind in (ContractKind.INCOME_DIVISION, ContractKind.CONSENSUS_DECISION):
            agreement_kind = ContractKind.DYNAMIC_PRICE  # companion agreement contract
        contract = AgreementContract(
            kind=agreement_kind,
            owner=req.owner,
            end_user=req.end_user,
            price=quote.price,
            lock_time_seconds=req.prefs.max_period_seconds,
            refund_threshold_bp=self.refund_threshold_bp,
            division_address=division_address,
        )
        if agreement_kind is ContractKind.TIME_LIMITED_QUOTA:
            contract.quota = QuotaTerms(per_minute_price=quote.per_minute_price)
        if agreement_kind is ContractKind.CONSTRAINT_BASED:
            contract.constraints = req.constraints or ConstraintTerms()
        if agreement_kind is ContractKind.FLEXIBLE_PERIOD:
            contract.flexible = req.flexible or FlexibleTerms(
                standby_rate=self.rate_card.standby_rate_wei_per_second,
                standby_window_seconds=req.prefs.max_period_seconds,
            )
        return contract

    def _deploy_division(self, req: SessionRequest) -> str:
        if req.shares is None:
            raise ValueError("income-division request needs shares")
        division = AgreementContract(
            kind=ContractKind.INCOME_DIVISION, owner=req.owner, end_user=req.end_user
        )
        division.address = self.ledger.register_contract(division, payer=req.owner)
        sc.set_income_shares(self.ledger, division, req.owner, req.shares)
        return division.address

    def _require_enacted(self, consensus_address: Optional[str]) -> None:
        if consensus_address is None:
            raise ValueError("consensus request needs the ballot contract address")
        ballot = self.ledger.contracts[consensus_address]
        if ballot.voting is None or not ballot.voting.enacted:
            raise WrongState(f"ballot {consensus_address} has not enacted the agreement")

    # ---- auxiliary consensus contract --------------------------------------

    def deploy_consensus(self, owner: str, voters: set[str]) -> AgreementContract:
        """Deploy the voting contract and register its voter set."""
        ballot = AgreementContract(
            kind=ContractKind.CONSENSUS_DECISION, owner=owner, end_user=""
        )
        ballot.address = self.ledger.register_contract(ballot, payer=owner)
        sc.init_vote(self.ledger, ballot, owner, voters)
        return ballot

    # ---- step 3: payment ----------------------------------------------------

    def user_approve_and_pay(
        self, session: SessionRecord, value: int, payer: Optional[str] = None
    ) -> bool:
        """Lock the quoted price in escrow and arm the release-time wakeup.

        Whoever funds the lock is recorded as the end user.
        """
        if self.ledger.current_block.height > session.quote.expires_at_block:
            raise QuoteExpired(
                f"quote expired at block {session.quote.expires_at_block}"
            )
        contract = self._contract(session)
        now = self.ledger.current_block
        sender = payer if payer is not None else session.end_user
        accepted = sc.lock_funds(self.ledger, contract, sender, value, now)
        if not accepted:
            return False
        session.end_user = sender
        self.ledger.schedule_wakeup(contract.address, contract.release_time)
        session.step_log.append(3)
        return True

    # ---- steps 4-10: countersign, deploy, URL -------------------------------

    def countersign_and_deploy(self, session: SessionRecord) -> str:
        """Activate the agreement and simulate the container deployment."""
        contract = self._contract(session)
        sc.countersign(self.ledger, contract, session.owner)
        session.step_log += [4, 5, 6]
        if self.fail_next_deployment:
            self.fail_next_deployment = False
            self.ledger.cancel_wakeup(contract.address)
            session.settlement = sc.abort_and_refund(self.ledger, contract)
            session.settled_by = "abort"
            raise DeploymentFailed(f"simulated deployment fault for {contract.address}")
        session.deploy_block = self.ledger.current_block.height
        session.url_token = self._issue_url_token(contract.address)
        session.step_log += [7, 8, 9, 10]
        return session.url_token

    def _issue_url_token(self, contract_address: str) -> str:
        self._token_seq += 1
        tag = hashlib.sha256(f"{self._token_seq}:{contract_address}".encode()).hexdigest()
        return f"vc-{self._token_seq:04d}-{tag[:12]}"

    # ---- monitoring -----------------------------------------------------------

    def record_qos_sample(self, session: SessionRecord, available: bool) -> None:
        """Append one availability observation at the current block time."""
        contract = self._contract(session)
        if session.deploy_block is None or contract.state is not ContractState.ACTIVE:
            raise SessionNotActive(session.contract_address)
        session.trace.record(self.ledger.current_block.timestamp, available)

    # ---- steps 11-16: settlement ----------------------------------------------

    def end_session(self, session: SessionRecord, caller: str) -> Settlement:
        """End-user stop: undeploy, settle pro rata, cancel the wakeup."""
        contract = self._contract(session)
        settlement = sc.stop_and_settle(
            self.ledger,
            contract,
            caller,
            self.ledger.current_block,
            availability_bp=session.trace.availability_bp(),
        )
        self.ledger.cancel_wakeup(contract.address)
        session.stop_block = self.ledger.current_block.height
        session.settlement = settlement
        session.settled_by = "stop"
        session.step_log += [11, 12, 13, 14, 15, 16]
        return settlement

    def on_wakeup(self, session: SessionRecord, block: Block) -> Optional[Settlement]:
        """Timeout settlement; a no-op if the session already settled."""
        contract = self._contract(session)
        if contract.state is ContractState.SETTLED:
            return None
        if contract.state is ContractState.USER_SIGNED:
            # Locked but never countersigned: the release time frees the funds.
            session.settlement = sc.abort_and_refund(self.ledger, contract)
            session.settled_by = "expiry"
            session.stop_block = block.height
            session.step_log += [13, 14, 15, 16]
            return session.settlement
        settlement = sc.expire_and_settle(
            self.ledger,
            contract,
            block,
            availability_bp=session.trace.availability_bp(),
        )
        session.stop_block = block.height
        session.settlement = settlement
        session.settled_by = "expiry"
        session.step_log += [12, 13, 14, 15, 16]
        return settlement

    def _handle_wakeup(self, contract_address: str, block: Block) -> None:
        session = self._by_contract.get(contract_address)
        if session is not None:
            self.on_wakeup(session, block)

    # ---- quota passthroughs ------------------------------------------------------

    def quota_purchase(
        self, session: SessionRecord, minutes: int, value: int, payer: Optional[str] = None
    ) -> bool:
        contract = self._contract(session)
        sender = payer if payer is not None else session.end_user
        accepted = sc.quota_purchase(self.ledger, contract, sender, minutes, value)
        if accepted:
            session.end_user = sender
            session.step_log.append(3)
        return accepted

    def quota_start(self, session: SessionRecord, caller: str) -> str:
        contract = self._contract(session)
        token = sc.quota_start(self.ledger, contract, caller, self.ledger.current_block)
        if session.deploy_block is None:
            session.deploy_block = self.ledger.current_block.height
        if not session.url_token:
            session.url_token = self._issue_url_token(contract.address)
        return token

    def quota_stop(self, session: SessionRecord, caller: str) -> int:
        contract = self._contract(session)
        minutes = sc.quota_stop(self.ledger, contract, caller, self.ledger.current_block)
        session.settlement = contract.settlement
        return minutes

    def _contract(self, session: SessionRecord) -> AgreementContract:
        return self.ledger.contracts[session.contract_address]
