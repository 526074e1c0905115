"""Observation container, validation, and CSV round-trip.

An observation set holds ``n`` rows of (outcome, binary treatment,
covariates).  The CSV layout is one header row ``y,d,x1,...,xp`` followed
by one row per observation, UTF-8 encoded with ``\\n`` line endings.
Floats are written with 17 significant digits so that a write/read cycle
reproduces every value bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = ["ObservationSet", "GroundTruth", "validate", "read_csv", "write_csv"]


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ObservationSet:
    """Immutable sample of outcomes, treatments, and covariates.

    Parameters
    ----------
    y : ndarray, shape (n,)
        Observed outcomes.
    d : ndarray, shape (n,)
        Treatment indicators, expected to be exactly 0.0 or 1.0.
    x : ndarray, shape (n, p)
        Covariate rows, p >= 1.

    The constructor only enforces array ranks; content checks (finiteness,
    binary treatment, arm presence) are reported by :func:`validate` so
    that suspect data can still be loaded and inspected.
    """

    y: np.ndarray
    d: np.ndarray
    x: np.ndarray

    def __post_init__(self) -> None:
        y = _readonly(np.atleast_1d(self.y))
        d = _readonly(np.atleast_1d(self.d))
        x = _readonly(self.x)
        if y.ndim != 1 or d.ndim != 1:
            raise DataError("y and d must be one-dimensional")
        if x.ndim != 2:
            raise DataError("x must be a two-dimensional matrix")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class GroundTruth:
    """True data-generating quantities kept alongside simulated draws.

    The contrast ``mu1_coef - mu0_coef`` equals ``beta0`` and
    ``active_set`` lists the nonzero positions of ``beta0`` in increasing
    order.  The propensity model is ``clip(sigmoid(x @ propensity_coef +
    propensity_intercept), propensity_clip, 1 - propensity_clip)``.
    """

    beta0: np.ndarray
    active_set: np.ndarray
    mu1_coef: np.ndarray
    mu0_coef: np.ndarray
    propensity_coef: np.ndarray
    noise_sd1: float
    noise_sd0: float
    propensity_clip: float
    mu1_intercept: float = 0.0
    mu0_intercept: float = 0.0
    propensity_intercept: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta0", _readonly(self.beta0))
        object.__setattr__(self, "active_set", np.asarray(self.active_set, dtype=np.int64))
        object.__setattr__(self, "mu1_coef", _readonly(self.mu1_coef))
        object.__setattr__(self, "mu0_coef", _readonly(self.mu0_coef))
        object.__setattr__(self, "propensity_coef", _readonly(self.propensity_coef))


def validate(obs: ObservationSet) -> list[str]:
    """Check an observation set against the data contract.

    Returns a list of human-readable violations, one entry per problem
    found; an empty list means the set is fit for estimation.  Checks:
    consistent lengths, p >= 1, finite y and x, d exactly 0 or 1, and
    (for n >= 2) that both treatment arms appear.
    """
    problems: list[str] = []
    n = obs.n
    if obs.d.shape[0] != n:
        problems.append(f"d has length {obs.d.shape[0]}, expected {n}")
    if obs.x.shape[0] != n:
        problems.append(f"x has {obs.x.shape[0]} rows, expected {n}")
    if obs.p < 1:
        problems.append("x must have at least one column")

    bad_y = np.flatnonzero(~np.isfinite(obs.y))
    if bad_y.size:
        problems.append(f"y is not finite at row {bad_y[0]}")
    bad_rows = np.flatnonzero(~np.isfinite(obs.x).all(axis=1))
    if bad_rows.size:
        problems.append(f"x is not finite at row {bad_rows[0]}")
    bad_d = np.flatnonzero(~((obs.d == 0.0) | (obs.d == 1.0)))
    if bad_d.size:
        problems.append(f"d is not 0 or 1 at row {bad_d[0]}")

    if n >= 2 and bad_d.size == 0 and obs.d.shape[0] == n:
        if not np.any(obs.d == 0.0):
            problems.append("arm 0 absent")
        if not np.any(obs.d == 1.0):
            problems.append("arm 1 absent")
    return problems


def _format(v: float) -> str:
    return format(v, ".17g")


def write_csv(obs: ObservationSet, path: str) -> None:
    """Write observations to ``path`` in the ``y,d,x1,...,xp`` layout.

    Values are serialized with 17 significant digits; reading the file
    back yields arrays equal to the originals.
    """
    header = "y,d," + ",".join(f"x{j}" for j in range(1, obs.p + 1))
    lines = [header]
    for i in range(obs.n):
        row = [_format(obs.y[i]), _format(obs.d[i])]
        row.extend(_format(v) for v in obs.x[i])
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path: str) -> ObservationSet:
    """Parse a ``y,d,x1,...,xp`` CSV file into an observation set.

    Raises
    ------
    DataError
        If the header deviates from the expected layout, a cell fails to
        parse as a number (reported with row and column), a row has the
        wrong number of fields, or a treatment value is not 0 or 1.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataError("empty file: expected header y,d,x1,...,xp")

    fields = lines[0].split(",")
    p = len(fields) - 2
    expected = ["y", "d"] + [f"x{j}" for j in range(1, p + 1)]
    if p < 1 or fields != expected:
        raise DataError(
            "malformed header: expected y,d,x1,...,xp but found " + repr(lines[0])
        )

    n = len(lines) - 1
    y = np.empty(n)
    d = np.empty(n)
    x = np.empty((n, p))
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != p + 2:
            raise DataError(f"row {i}: expected {p + 2} fields, found {len(cells)}")
        try:
            y[i] = float(cells[0])
        except ValueError:
            raise DataError(f"row {i}, column y: cannot parse {cells[0]!r}") from None
        try:
            d[i] = float(cells[1])
        except ValueError:
            raise DataError(f"row {i}, column d: cannot parse {cells[1]!r}") from None
        if d[i] not in (0.0, 1.0):
            raise DataError(f"row {i}: treatment must be 0 or 1, found {cells[1]!r}")
        for j in range(p):
            try:
                x[i, j] = float(cells[j + 2])
            except ValueError:
                raise DataError(
                    f"row {i}, column x{j + 1}: cannot parse {cells[j + 2]!r}"
                ) from None
    return ObservationSet(y=y, d=d, x=x)
