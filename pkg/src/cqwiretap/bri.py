"""Biregular functions f: S x X -> N, their section matrices and spectra.

A function is biregular on a regularity set M when every seed's preimage
of each m in M has one fixed size d_S and every input appears in each m's
preimage under one fixed count d_X of seeds (both nonzero, both constant
across M), forcing the size identity d_X |X| = d_S |S|.  The section
matrix of m counts seeds under which two inputs collide on m, normalized
to a symmetric doubly stochastic matrix; its second singular value
lambda2 is the quantity the leakage bounds consume, and the function is
irreducible when every lambda2 is strictly below 1.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import search_step
from .config import TABLE_CAP
from .errors import (
    ConstructionUnverifiedError,
    InvalidStateError,
    ResourceCapError,
    VerificationError,
)

LAMBDA2_TIE_TOL = 1e-10


@dataclass(frozen=True)
class RegularityReport:
    """Outcome of a biregularity check.

    ``violation`` is None when ok, else a triple: (m, "s", s) for a seed
    row whose preimage size disagrees with seed 0's, (m, "x", x) for an
    input column off seed-count, or (m, "constant", None) when m's
    constants differ from the first regular output's.
    """

    ok: bool
    d_s: int | None
    d_x: int | None
    violation: tuple | None = None
    message: str = ""


def verify_biregular(table, regularity_set) -> RegularityReport:
    """Check both regularity conditions for every m in the regularity set.

    Constants are anchored at seed row 0 / input column 0 of the first m;
    the first disagreeing (m, s) or (m, x) is reported.  Checks run in
    regularity-set order, rows before columns.
    """
    table = np.asarray(table)
    if table.ndim != 2:
        raise InvalidStateError(f"table must be 2-dimensional, got shape {table.shape}")
    regularity_set = tuple(regularity_set)
    if not regularity_set:
        raise InvalidStateError("regularity set is empty")
    d_s = d_x = None
    for m in regularity_set:
        hits = table == m
        row_counts = hits.sum(axis=1)
        col_counts = hits.sum(axis=0)
        d_s_m, d_x_m = int(row_counts[0]), int(col_counts[0])
        if d_s_m == 0:
            return RegularityReport(
                False, None, None, (m, "s", 0), f"empty preimage of {m!r} at seed 0"
            )
        bad = np.nonzero(row_counts != d_s_m)[0]
        if bad.size:
            return RegularityReport(
                False,
                None,
                None,
                (m, "s", int(bad[0])),
                f"seed {int(bad[0])} has {int(row_counts[bad[0]])} preimages of {m!r}, "
                f"expected {d_s_m}",
            )
        if d_x_m == 0:
            return RegularityReport(
                False, None, None, (m, "x", 0), f"input 0 never maps to {m!r}"
            )
        bad = np.nonzero(col_counts != d_x_m)[0]
        if bad.size:
            return RegularityReport(
                False,
                None,
                None,
                (m, "x", int(bad[0])),
                f"input {int(bad[0])} maps to {m!r} under {int(col_counts[bad[0]])} seeds, "
                f"expected {d_x_m}",
            )
        if d_s is None:
            d_s, d_x = d_s_m, d_x_m
        elif (d_s_m, d_x_m) != (d_s, d_x):
            return RegularityReport(
                False,
                None,
                None,
                (m, "constant", None),
                f"constants ({d_s_m}, {d_x_m}) for {m!r} differ from ({d_s}, {d_x})",
            )
    return RegularityReport(True, d_s, d_x)


@dataclass(frozen=True)
class SectionMatrix:
    """Normalized seed-collision matrix of one regular output."""

    m: object
    matrix: np.ndarray
    lambda2: float

    def __post_init__(self):
        p = self.matrix
        n = p.shape[0]
        if np.max(np.abs(p - p.T)) > 1e-12:
            raise InvalidStateError("section matrix must be symmetric")
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-12:
            raise InvalidStateError("section matrix rows must sum to 1")
        if np.max(np.abs(p.sum(axis=0) - 1.0)) > 1e-12:
            raise InvalidStateError("section matrix columns must sum to 1")
        if n and p.min() < 0.0:
            raise InvalidStateError("section matrix entries must be nonnegative")


class BriFunction:
    """A verified-biregular function with measured spectral data.

    Biregularity is enforced at construction (a failed check raises
    :class:`VerificationError` carrying the report).  Irreducibility
    (every lambda2 < 1) is measured, not assumed: the ``irreducible``
    property reports it, and near-ties at the top singular value are
    conservatively reported as lambda2 = 1.
    """

    __slots__ = ("table", "regularity_set", "d_s", "d_x", "_sections")

    def __init__(self, table, regularity_set):
        table = np.ascontiguousarray(np.asarray(table, dtype=np.int64))
        regularity_set = tuple(regularity_set)
        report = verify_biregular(table, regularity_set)
        if not report.ok:
            raise VerificationError(f"not biregular: {report.message}", report=report)
        table.setflags(write=False)
        self.table = table
        self.regularity_set = regularity_set
        self.d_s = report.d_s
        self.d_x = report.d_x
        self._sections = {}

    @property
    def n_seeds(self) -> int:
        return self.table.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.table.shape[1]

    @property
    def outputs(self) -> tuple:
        return tuple(sorted(set(np.unique(self.table).tolist()) | set(self.regularity_set)))

    @property
    def irreducible(self) -> bool:
        return all(lambda2(self, m) < 1.0 for m in self.regularity_set)

    def section(self, m) -> SectionMatrix:
        if m not in self.regularity_set:
            raise InvalidStateError(f"{m!r} is not in the regularity set")
        if m not in self._sections:
            hits = (self.table == m).astype(np.float64)
            counts = hits.T @ hits
            matrix = counts / (self.d_s * self.d_x)
            sv = np.linalg.svd(matrix, compute_uv=False)
            lam = 1.0 if sv[0] - sv[1] < LAMBDA2_TIE_TOL else float(sv[1])
            self._sections[m] = SectionMatrix(m, matrix, lam)
        return self._sections[m]


def section_matrix(f: BriFunction, m) -> SectionMatrix:
    """P_{f,m}(x, x') = |{s : f_s(x) = f_s(x') = m}| / (d_S d_X)."""
    return f.section(m)


def lambda2(f: BriFunction, m) -> float:
    """Second largest singular value of the section matrix of m.

    A tie with the top singular value (difference below 1e-10) is
    reported as exactly 1.0, failing irreducibility conservatively.
    """
    return f.section(m).lambda2


def preimage(f: BriFunction, s: int, m) -> np.ndarray:
    """Inputs x with f_s(x) = m, ascending."""
    return np.nonzero(f.table[s] == m)[0]


def sample_preimage(f: BriFunction, s: int, m, rng: np.random.Generator):
    """Uniform draw from f_s^{-1}(m) (exactly d_S candidates for m in M)."""
    candidates = preimage(f, s, m)
    if candidates.size == 0:
        raise InvalidStateError(f"empty preimage of {m!r} at seed {s}")
    return int(rng.choice(candidates))


def quadratic_form_bound(sm: SectionMatrix, omega) -> tuple[float, float]:
    """Evaluate <w|P|w> against lambda2 <w|w> + |<w|1>|^2.

    The all-ones direction carries the simple top singular value of a
    doubly stochastic symmetric matrix; everything orthogonal to it is
    contracted by lambda2.  Returns (lhs, rhs) for the caller to compare.
    """
    omega = np.asarray(omega, dtype=complex)
    n = sm.matrix.shape[0]
    lhs = float(np.real(omega.conj() @ sm.matrix @ omega))
    ones = np.full(n, 1.0 / np.sqrt(n))
    overlap = np.abs(np.dot(ones, omega)) ** 2
    rhs = float(sm.lambda2 * np.real(np.vdot(omega, omega)) + overlap)
    return lhs, rhs


def construct_exhaustive(
    n_seeds: int,
    n_inputs: int,
    n_outputs: int,
    lambda2_target: float,
    cap: int = TABLE_CAP,
):
    """Search all balanced tables for one with max lambda2 <= target.

    The regularity set is the full output set {0..n_outputs-1}, so every
    row partitions the inputs into n_outputs blocks of d_S and every
    column meets each output exactly d_X times; divisibility failures
    (including more outputs than inputs) return None immediately.
    Enumeration is canonical (first row a sorted block partition, later
    rows lexicographically nondecreasing) which preserves completeness up
    to row/column permutations; visiting more than ``cap`` search nodes
    raises a resource error with progress attached.
    """
    if n_outputs < 1 or n_seeds < 1 or n_inputs < 1:
        raise InvalidStateError("sizes must be positive")
    if n_inputs % n_outputs or n_seeds % n_outputs:
        return None
    d_s = n_inputs // n_outputs
    d_x = n_seeds // n_outputs
    regularity_set = tuple(range(n_outputs))

    table = np.zeros((n_seeds, n_inputs), dtype=np.int64)
    table[0] = np.arange(n_inputs) // d_s
    if n_seeds == 1:
        f = BriFunction(table, regularity_set)
        if max(lambda2(f, m) for m in regularity_set) <= lambda2_target:
            return f
        return None

    row_counts = np.zeros((n_seeds, n_outputs), dtype=np.int64)
    row_counts[0] = d_s
    col_counts = np.zeros((n_inputs, n_outputs), dtype=np.int64)
    col_counts[np.arange(n_inputs), table[0]] = 1
    nxt = np.zeros(n_seeds * n_inputs, dtype=np.int64)
    pos = n_inputs
    used = 0
    while True:
        status, pos, nodes = search_step(
            table,
            nxt,
            row_counts,
            col_counts,
            pos,
            n_seeds,
            n_inputs,
            n_outputs,
            d_s,
            d_x,
            cap - used,
        )
        used += int(nodes)
        if status == 0:
            return None
        if status == -1:
            raise ResourceCapError(
                f"table search exceeded {cap} nodes",
                requested=used,
                cap=cap,
                progress=f"deepest open cell at row {pos // n_inputs}",
            )
        candidate = BriFunction(table.copy(), regularity_set)
        if max(lambda2(candidate, m) for m in regularity_set) <= lambda2_target:
            return candidate


def construct_seeded(k: int, d: int, cap: int = TABLE_CAP) -> BriFunction:
    """Shifted-block candidate on S = X = Z_{2^k d}, gated by measurement.

    f_s(x) = floor(((x + s) mod 2^k d) / d) with regularity set
    {0..2^k - 1} is biregular by construction, but its spectral gap is a
    heuristic: the constructor verifies biregularity and requires the
    measured max lambda2 to meet the 4/d certificate, raising a
    construction-unverified error carrying the measured value otherwise.
    """
    if k < 1:
        raise InvalidStateError(f"k must be >= 1, got {k}")
    if d < 3:
        raise InvalidStateError(f"d must be >= 3, got {d}")
    length = (2**k) * d
    if length * length > cap:
        raise ResourceCapError(
            f"table with {length}x{length} cells exceeds cap {cap}",
            requested=length * length,
            cap=cap,
        )
    s_idx = np.arange(length).reshape(-1, 1)
    x_idx = np.arange(length).reshape(1, -1)
    table = ((x_idx + s_idx) % length) // d
    regularity_set = tuple(range(2**k))
    try:
        f = BriFunction(table, regularity_set)
    except VerificationError as exc:
        raise ConstructionUnverifiedError(
            f"seeded candidate k={k}, d={d} is not biregular: {exc}",
            report=exc.report,
        ) from exc
    measured = max(lambda2(f, m) for m in regularity_set)
    if measured > 4.0 / d:
        raise ConstructionUnverifiedError(
            f"seeded candidate k={k}, d={d} measured lambda2 {measured:.6f} "
            f"exceeds the 4/d certificate {4.0 / d:.6f}",
            measured_lambda2=measured,
        )
    return f
