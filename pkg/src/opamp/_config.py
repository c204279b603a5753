import os

ENUMERATION_CAP = 200_000
DEFAULT_DENSE_CAP = 2048
WALK_BUDGET = 10**7
PORT_CAP = 2**26
STATE_BUDGET = 2**25


def dense_cap(override=None):
    """Dense eigen-solver cap; the OPAMP_DENSE_CAP env var overrides the default."""
    if override is not None:
        return int(override)
    raw = os.environ.get("OPAMP_DENSE_CAP")
    if raw:
        try:
            return int(raw)
        except ValueError:
            pass
    return DEFAULT_DENSE_CAP
