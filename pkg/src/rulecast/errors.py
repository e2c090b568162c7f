"""Exception types shared across the package."""


class RulecastError(Exception):
    """Base class for all rulecast errors."""


class DataError(RulecastError):
    """Malformed input: bad CSV cells, schema violations, missing columns."""


class TrainingError(RulecastError):
    """Training cannot proceed, e.g. fewer deduplicated rules than requested."""
