"""Exception types shared across the package.

Two failure families matter to callers: problems with the data itself
(malformed files, impossible treatment codes, shape mismatches) and
numerical breakdowns inside an estimation routine (degenerate designs,
non-converging solvers).  The command line maps them to distinct exit
codes, so they are kept as separate classes.
"""


class DataError(ValueError):
    """Raised when observations or files violate the data contract."""


class NumericalError(RuntimeError):
    """Raised when a numerical routine cannot produce a trustworthy result."""
