"""Result records shared by the exact and estimated sensitivity scans."""

from dataclasses import dataclass

from .graph import Direction


@dataclass(frozen=True)
class SensitivityRecord:
    """One sensitivity value for one perturbation direction.

    ``steps`` is the number of Krylov steps taken (0 for closed-form dense
    evaluation) and ``matvecs`` counts base-operator applications, where one
    product with a doubled block operator counts as two. ``converged`` is
    False when the step budget ran out before the stopping rule fired.
    """

    direction: Direction
    method: str
    value: float
    steps: int = 0
    matvecs: int = 0
    converged: bool = True

    def __post_init__(self):
        # numerical code hands in numpy scalars; coerce so repr()/json of a
        # record is plain-Python everywhere (full-precision CSV cells rely
        # on float repr)
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "matvecs", int(self.matvecs))
        object.__setattr__(self, "converged", bool(self.converged))


def sort_records(records):
    """Deterministic ranking: descending value, ties by (i, j) ascending."""
    return sorted(records, key=lambda r: (-r.value, r.direction.i, r.direction.j))


@dataclass
class ScanResult:
    """Outcome of a sensitivity scan over a set of directions.

    ``records`` are ranked by :func:`sort_records`. ``exact`` holds the dense
    oracle value per direction pair when one was computed (scatter data).
    Per-direction failures are collected instead of aborting the scan.
    """

    records: list
    exact: dict = None
    failures: list = None
    aggregate: float = 0.0

    def csv(self, index_base=1):
        """Fixed-order CSV: i, j, method, approx, exact, steps, matvecs."""
        lines = ["i,j,method,approx,exact,steps,matvecs"]
        for r in self.records:
            d = r.direction
            exact = ""
            if self.exact is not None and d.pair() in self.exact:
                exact = repr(self.exact[d.pair()])
            lines.append(
                f"{d.i + index_base},{d.j + index_base},{r.method},"
                f"{r.value!r},{exact},{r.steps},{r.matvecs}"
            )
        return "\n".join(lines) + "\n"
