"""Monetary units.

All settlement arithmetic runs on exact integers denominated in wei.
Python integers are unbounded, so no overflow can occur silently; the
only illegal amount is a negative one.
"""

WEI_PER_GWEI = 10**9
WEI_PER_ETH = 10**18
GWEI_PER_ETH = 10**9


def gwei(n: int) -> int:
    """Convert a GWEI count to wei."""
    return n * WEI_PER_GWEI


def eth(n: int) -> int:
    """Convert an ETH count to wei."""
    return n * WEI_PER_ETH


def require_amount(value: int, what: str = "amount") -> int:
    """Validate that ``value`` is a non-negative integer number of wei."""
    if not isinstance(value, int) or isinstance(value, bool):
        raise TypeError(f"{what} must be an int (wei), got {type(value).__name__}")
    if value < 0:
        raise ValueError(f"{what} must be non-negative, got {value}")
    return value


def parse_wei(text: str, what: str = "amount") -> int:
    """Parse a decimal-string wei amount (scripts carry amounts as strings)."""
    try:
        value = int(text, 10)
    except (TypeError, ValueError):
        raise ValueError(f"{what} must be a decimal integer string, got {text!r}")
    return require_amount(value, what)


def format_eth(wei: int) -> str:
    """Human-readable ETH rendering of a wei amount, exact."""
    whole, frac = divmod(wei, WEI_PER_ETH)
    if frac == 0:
        return f"{whole} ETH"
    return f"{whole}.{frac:018d}".rstrip("0") + " ETH"
