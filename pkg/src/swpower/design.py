"""Treatment schedules for stepped wedge trials.

A design is a set of binary treatment sequences over ``J`` periods together
with the number of clusters assigned to each sequence. Every sequence starts
on control, steps onto intervention exactly once, and stays on. Marginal and
joint treatment-assignment probabilities are computed by direct enumeration
over the sequences, which is exact for balanced and unbalanced allocations
alike.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DesignError",
    "TrialDesign",
    "build_balanced_design",
    "parse_design_matrix",
    "render_design_matrix",
]


class DesignError(ValueError):
    """Raised when a treatment schedule is malformed."""


def _check_sequence(row: tuple[int, ...]) -> None:
    if any(v not in (0, 1) for v in row):
        raise DesignError(f"sequence entries must be 0/1, got {row}")
    if row[0] != 0:
        raise DesignError(f"sequence {row} is treated in period 1; all clusters must start on control")
    if any(a > b for a, b in zip(row, row[1:])):
        raise DesignError(f"sequence {row} is non-monotone; once stepped on, a cluster stays on")
    if row[-1] != 1:
        raise DesignError(f"sequence {row} never steps onto intervention")


@dataclass(frozen=True)
class TrialDesign:
    """Cluster-by-period treatment schedule.

    Parameters
    ----------
    J : int
        Number of periods.
    sequences : tuple of tuple of int
        One binary J-vector per distinct treatment sequence.
    cluster_counts : tuple of int
        Clusters assigned to each sequence (same order as ``sequences``).
    m : int
        Individuals per cluster-period.
    """

    J: int
    sequences: tuple[tuple[int, ...], ...]
    cluster_counts: tuple[int, ...]
    m: int = 1
    n: int = field(init=False)

    def __post_init__(self) -> None:
        if self.J < 2:
            raise DesignError(f"need at least 2 periods, got J={self.J}")
        if self.m < 1:
            raise DesignError(f"cluster-period size must be >= 1, got m={self.m}")
        if len(self.sequences) != len(self.cluster_counts):
            raise DesignError("one cluster count is required per sequence")
        if not self.sequences:
            raise DesignError("design has no sequences")
        seen = set()
        for row in self.sequences:
            if len(row) != self.J:
                raise DesignError(f"sequence {row} has {len(row)} periods, expected {self.J}")
            _check_sequence(row)
            if row in seen:
                raise DesignError(f"duplicate sequence {row}; merge duplicates into one cluster count")
            seen.add(row)
        if any(c < 1 for c in self.cluster_counts):
            raise DesignError(f"cluster counts must all be >= 1, got {self.cluster_counts}")
        object.__setattr__(self, "n", int(sum(self.cluster_counts)))

    @property
    def schedule(self) -> np.ndarray:
        """Sequence-by-period 0/1 matrix."""
        return np.asarray(self.sequences, dtype=int)

    @property
    def weights(self) -> np.ndarray:
        """Fraction of clusters on each sequence."""
        return np.asarray(self.cluster_counts, dtype=float) / self.n

    def cluster_rows(self) -> np.ndarray:
        """Cluster-by-period 0/1 matrix with one row per cluster."""
        return np.repeat(self.schedule, self.cluster_counts, axis=0)

    def marginal_treat_prob(self, j: int) -> float:
        """P(Z_j = 1): fraction of clusters on intervention in period ``j`` (1-based)."""
        if not 1 <= j <= self.J:
            raise DesignError(f"period {j} outside 1..{self.J}")
        counts = np.asarray(self.cluster_counts)
        return int(counts[self.schedule[:, j - 1] == 1].sum()) / self.n

    def joint_treat_probs(self, j: int, l: int) -> dict[tuple[int, int], float]:
        """Joint probabilities P(Z_j = a, Z_l = a') for two distinct periods.

        Enumerates the sequences weighted by their cluster counts (integer
        sums, one division, so the values stay in [0, 1] exactly); the four
        values sum to one and marginalize to :meth:`marginal_treat_prob`.
        """
        if not (1 <= j <= self.J and 1 <= l <= self.J):
            raise DesignError(f"period pair ({j},{l}) outside 1..{self.J}")
        if j == l:
            raise DesignError("within-period probabilities are marginal; use marginal_treat_prob")
        zj = self.schedule[:, j - 1]
        zl = self.schedule[:, l - 1]
        counts = np.asarray(self.cluster_counts)
        return {
            (a, b): int(counts[(zj == a) & (zl == b)].sum()) / self.n
            for a in (0, 1)
            for b in (0, 1)
        }


def build_balanced_design(J: int, n: int, m: int = 1) -> TrialDesign:
    """Canonical stepped wedge: J-1 sequences, sequence b steps on at period b+1.

    ``n`` must divide evenly across the J-1 sequences; otherwise construct an
    unbalanced design explicitly via :func:`parse_design_matrix`.
    """
    if J < 2:
        raise DesignError(f"need at least 2 periods, got J={J}")
    if n < J - 1:
        raise DesignError(f"need at least one cluster per sequence: n={n} < {J - 1}")
    if n % (J - 1) != 0:
        raise DesignError(
            f"{n} clusters do not divide evenly over {J - 1} sequences; "
            "build the unbalanced design explicitly (parse_design_matrix with per-sequence counts)"
        )
    sequences = tuple(
        tuple(0 if j <= b else 1 for j in range(1, J + 1)) for b in range(1, J)
    )
    counts = (n // (J - 1),) * (J - 1)
    return TrialDesign(J=J, sequences=sequences, cluster_counts=counts, m=m)


def parse_design_matrix(text: str, m: int = 1) -> TrialDesign:
    """Parse a comma-separated schedule into a validated design.

    Format: one row per sequence (or per cluster), entries 0/1. An optional
    header whose first column is ``count`` marks a counted layout where each
    row is ``count,z_1,...,z_J``. Duplicate schedule rows are collapsed into
    one sequence with summed cluster counts.
    """
    rows: list[list[str]] = []
    for line in io.StringIO(text):
        line = line.strip()
        if line:
            rows.append([cell.strip() for cell in line.split(",")])
    if not rows:
        raise DesignError("empty design matrix")

    counted = rows[0][0].lower() == "count"
    if counted:
        rows = rows[1:]
        if not rows:
            raise DesignError("design matrix has a header but no rows")

    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise DesignError("ragged design matrix: all rows must have the same number of columns")

    counts: dict[tuple[int, ...], int] = {}
    order: list[tuple[int, ...]] = []
    for r in rows:
        try:
            values = [int(v) for v in r]
        except ValueError as exc:
            raise DesignError(f"non-integer entry in design row {r}") from exc
        if counted:
            count, seq = values[0], tuple(values[1:])
            if count < 1:
                raise DesignError(f"cluster count must be >= 1, got {count}")
        else:
            count, seq = 1, tuple(values)
        if len(seq) < 2:
            raise DesignError(f"design row {r} has fewer than 2 periods")
        _check_sequence(seq)
        if seq not in counts:
            counts[seq] = 0
            order.append(seq)
        counts[seq] += count

    return TrialDesign(
        J=len(order[0]),
        sequences=tuple(order),
        cluster_counts=tuple(counts[s] for s in order),
        m=m,
    )


def render_design_matrix(design: TrialDesign) -> str:
    """Inverse of :func:`parse_design_matrix` (counted layout)."""
    lines = ["count," + ",".join(f"p{j}" for j in range(1, design.J + 1))]
    for seq, count in zip(design.sequences, design.cluster_counts):
        lines.append(f"{count}," + ",".join(str(v) for v in seq))
    return "\n".join(lines) + "\n"
