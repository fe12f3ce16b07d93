"""Exception hierarchy shared by all simulator components."""


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


# ---- ledger ----------------------------------------------------------------

class UnknownAddress(SimulationError):
    """Address is not a registered account or contract."""


class InsufficientFunds(SimulationError):
    """Sender balance cannot cover value plus gas fee."""


class GasPriceOutOfRange(SimulationError):
    """Gas price falls outside the configured GWEI bounds."""


# ---- contract state machines ------------------------------------------------

class WrongState(SimulationError):
    """Operation not allowed in the contract's current state."""


class NotOwner(SimulationError):
    """Caller is not the contract owner."""


class NotEndUser(SimulationError):
    """Caller is not the recorded end user."""


class NotYetReleased(SimulationError):
    """Expiry requested before the release time."""


class QuotaExhausted(SimulationError):
    """No prepaid minutes remain on the quota."""


class SessionAlreadyOpen(SimulationError):
    """A metered session is already running on this quota."""


class NoOpenSession(SimulationError):
    """Stop requested but no metered session is open."""


class InvalidShares(SimulationError):
    """Income shares are empty, non-positive, or do not sum to the denominator."""


class NotAVoter(SimulationError):
    """Address is not registered in the voter set."""


class AlreadyVoted(SimulationError):
    """Voter has already cast a ballot."""


# ---- pricing / orchestration --------------------------------------------------

class InvalidPreferences(SimulationError):
    """Service preferences violate their invariants."""


class InadmissibleOffer(SimulationError):
    """Constraint evaluation rejected the provider offer."""


class QuoteExpired(SimulationError):
    """Payment arrived after the quote's expiry block."""


class SessionNotActive(SimulationError):
    """Session is not in a deployed, unsettled state."""


class DeploymentFailed(SimulationError):
    """Simulated container deployment fault (test injection)."""


# ---- scenario ingestion --------------------------------------------------------

class ParseError(SimulationError):
    """Scenario document is not well formed."""


class ValidationError(SimulationError):
    """Scenario document parsed but violates schema invariants."""
