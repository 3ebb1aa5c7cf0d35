"""Typical subspaces for product states and per-string channel outputs.

A string is typical for a distribution when every letter frequency sits
within ``delta / |alphabet|`` of its probability and letters of zero
probability never occur.  Lifting this to operators, the typical projector
of a state keeps the eigenvector products indexed by typical strings of its
spectrum; the conditional projector of a channel at an input string applies
the same filter per symbol group.  Both are assembled in a deterministic
eigenbasis (descending eigenvalues, near-ties ordered by phase-fixed
eigenvector entries) so repeated runs produce identical matrices.

``check_typical_projector`` reports the trace, rank, and eigenvalue windows
of the projected operators.  The eigenvalue sandwiches and the rank upper
bounds are sharp at every block length once the window constants
``gamma = delta * max |log2 q|`` are instantiated from the spectrum (for
conditional checks the constant ranges over all output spectra, and the
stated window additionally requires the output entropies to agree or the
string to have exact type).  The rank lower bounds and the trace bounds
tighten only as the block length grows, so they are reported, not promised.

``subnormalized_channel`` compresses each product output between its own
conditional projector and the typical projector of the average state.  The
result is dominated by the product channel whenever the two projector
families are compatible; this is measured on every output and a violation
raises rather than returning a channel that would poison later bounds.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import operators as op
from ._kernels import typical_mask
from .bounds import SubnormalizedCqChannel, check_psd_ordering, make_report
from .channels import tensor_power
from .config import STRING_CAP, TOL_ROWSUM, check_dim
from .errors import (
    DimensionMismatchError,
    InvalidStateError,
    ResourceCapError,
)

__all__ = [
    "TypicalSet",
    "TypicalProjector",
    "ConditionalTypicalProjector",
    "sorted_eigenbasis",
    "typical_set",
    "typical_projector",
    "cond_typical_projector",
    "check_typical_projector",
    "subnormalized_channel",
]

# eigenvalues at or below this are treated as exact zeros for the
# absent-letter rule; well above eigh noise, well below any real weight
SPECTRUM_FLOOR = 1e-12
# eigenvalues closer than this are ordered by eigenvector entries
TIE_TOL = 1e-10
# slop added to the frequency window so exact boundary cases are kept
MEMBER_GUARD = 1e-12


def sorted_eigenbasis(a: np.ndarray):
    """Hermitian eigendecomposition with a reproducible column order.

    Eigenvalues come out descending.  Each eigenvector is rescaled so its
    leading nonzero component is real and positive, and columns whose
    eigenvalues agree within ``TIE_TOL`` are ordered lexicographically by
    their entries.  Within a degenerate block the subspace basis is the one
    LAPACK returned, so determinism is per platform, which is all that
    byte-identical reruns need.
    """
    h = op.check_hermitian(np.asarray(a, dtype=complex))
    vals, vecs = np.linalg.eigh(h)
    vals = vals[::-1].copy()
    vecs = np.ascontiguousarray(vecs[:, ::-1])
    for c in range(vecs.shape[1]):
        nz = np.flatnonzero(np.abs(vecs[:, c]) > SPECTRUM_FLOOR)
        if nz.size:
            lead = vecs[nz[0], c]
            vecs[:, c] *= np.conj(lead) / abs(lead)
    start = 0
    while start < vals.size:
        stop = start + 1
        while stop < vals.size and vals[start] - vals[stop] <= TIE_TOL:
            stop += 1
        if stop - start > 1:
            order = sorted(
                range(start, stop),
                key=lambda c: tuple(
                    (round(x.real, 12), round(x.imag, 12)) for x in vecs[:, c]
                ),
            )
            vecs[:, start:stop] = vecs[:, order]
            vals[start:stop] = vals[order]
        start = stop
    return vals, vecs


def _validate_dist(p) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0 or np.any(p < 0.0) or abs(p.sum() - 1.0) > TOL_ROWSUM:
        raise InvalidStateError("need a probability vector summing to one")
    return p


def _validate_block(n, delta):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidStateError(f"block length must be a positive integer, got {n!r}")
    if not delta > 0.0:
        raise InvalidStateError(f"window width must be positive, got {delta!r}")
    return int(n), float(delta)


def _clean_spectrum(vals: np.ndarray) -> np.ndarray:
    q = np.clip(np.asarray(vals, dtype=float), 0.0, None)
    q[q <= SPECTRUM_FLOOR] = 0.0
    total = q.sum()
    if total <= 0.0:
        raise InvalidStateError("spectrum has no weight")
    return q / total


def _counts_admissible(counts, n, p, tol) -> bool:
    for q, c in zip(p, counts):
        if q <= SPECTRUM_FLOOR:
            if c:
                return False
        elif abs(c / n - q) > tol:
            return False
    return True


def _compositions(total: int, parts: int):
    """All tuples of ``parts`` nonnegative integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


def _profiles(p: np.ndarray, n: int, delta: float):
    """Admissible letter-count vectors with multiplicity and log2 weight."""
    tol = delta / p.size + MEMBER_GUARD
    out = []
    for counts in _compositions(n, p.size):
        if not _counts_admissible(counts, n, p, tol):
            continue
        size = math.factorial(n)
        for c in counts:
            size //= math.factorial(c)
        logw = sum(c * math.log2(q) for q, c in zip(p, counts) if c)
        out.append((counts, size, logw))
    return out


def _entropy_and_window(q: np.ndarray, delta: float):
    live = q[q > 0.0]
    entropy = float(-(live * np.log2(live)).sum())
    window = delta * float(np.max(np.abs(np.log2(live))))
    return entropy, window


@dataclass(frozen=True, eq=False)
class TypicalSet:
    """Letter-frequency window around a distribution.

    ``members`` lists the admitted strings in alphabet order when the full
    string space fits under the enumeration cap and is None otherwise;
    ``contains`` works in both modes.
    """

    p: np.ndarray
    n: int
    delta: float
    alphabet: tuple
    members: tuple | None

    def __post_init__(self):
        object.__setattr__(
            self, "_position", {x: i for i, x in enumerate(self.alphabet)}
        )

    def contains(self, xn) -> bool:
        xn = tuple(xn)
        if len(xn) != self.n:
            raise DimensionMismatchError(
                f"string length {len(xn)} != block length {self.n}"
            )
        counts = [0] * len(self.alphabet)
        for x in xn:
            i = self._position.get(x)
            if i is None:
                raise DimensionMismatchError(f"symbol {x!r} not in alphabet")
            counts[i] += 1
        tol = self.delta / len(self.alphabet) + MEMBER_GUARD
        return _counts_admissible(counts, self.n, self.p, tol)

    def __contains__(self, xn) -> bool:
        return self.contains(xn)

    def __len__(self) -> int:
        if self.members is None:
            raise ResourceCapError(
                "set was built in predicate mode; no member list to count",
                requested=len(self.alphabet) ** self.n,
                cap=STRING_CAP,
            )
        return len(self.members)

    def __iter__(self):
        if self.members is None:
            raise ResourceCapError(
                "set was built in predicate mode; no member list to iterate",
                requested=len(self.alphabet) ** self.n,
                cap=STRING_CAP,
            )
        return iter(self.members)


def typical_set(p, n, delta, alphabet=None, cap=None) -> TypicalSet:
    """Strings whose letter frequencies all sit within ``delta/|alphabet|``.

    Letters with zero probability must not occur at all.  Members are
    enumerated in alphabet order when ``|alphabet|**n`` fits under the cap
    (``STRING_CAP`` by default); otherwise the set is predicate-only.
    """
    p = _validate_dist(p)
    n, delta = _validate_block(n, delta)
    if alphabet is None:
        alphabet = tuple(range(p.size))
    else:
        alphabet = tuple(alphabet)
        if len(alphabet) != p.size:
            raise DimensionMismatchError(
                f"alphabet size {len(alphabet)} != distribution size {p.size}"
            )
        if len(set(alphabet)) != len(alphabet):
            raise InvalidStateError("alphabet has repeated symbols")
    limit = STRING_CAP if cap is None else int(cap)
    members = None
    if len(alphabet) ** n <= limit:
        tol = delta / p.size + MEMBER_GUARD
        mask = typical_mask(p.size, n, p, tol, p <= SPECTRUM_FLOOR)
        kept = []
        # product order is big-endian lexicographic, matching the mask index
        for hit, idx in zip(mask, itertools.product(range(p.size), repeat=n)):
            if hit:
                kept.append(tuple(alphabet[i] for i in idx))
        members = tuple(kept)
    return TypicalSet(p=p, n=n, delta=delta, alphabet=alphabet, members=members)


def _column_stack(bases, strings, dim_total):
    """One unit column per admitted string: the product of basis columns."""
    cols = np.empty((dim_total, len(strings)), dtype=complex)
    for t, jn in enumerate(strings):
        vec = np.ones(1, dtype=complex)
        for pos, j in enumerate(jn):
            vec = np.kron(vec, bases[pos][:, j])
        cols[:, t] = vec
    return cols


def _assemble(cols, dim_total):
    if cols.shape[1] == 0:
        return np.zeros((dim_total, dim_total), dtype=complex)
    proj = cols @ cols.conj().T
    return (proj + proj.conj().T) / 2.0


@dataclass(frozen=True, eq=False)
class TypicalProjector:
    """Projector onto eigenvector products indexed by spectrum-typical strings."""

    rho: np.ndarray
    n: int
    delta: float
    eigenvalues: np.ndarray
    basis: np.ndarray
    strings: tuple
    projector: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.strings)


def typical_projector(rho, n, delta, cap=None) -> TypicalProjector:
    """Typical projector of ``rho**(x) n`` in its deterministic eigenbasis."""
    rho = op.check_density(np.asarray(rho, dtype=complex))
    n, delta = _validate_block(n, delta)
    dim_total = check_dim(rho.shape[0] ** n, cap)
    vals, basis = sorted_eigenbasis(rho)
    q = _clean_spectrum(vals)
    strings = typical_set(q, n, delta).members
    cols = _column_stack([basis] * n, strings, dim_total)
    return TypicalProjector(
        rho=rho,
        n=n,
        delta=delta,
        eigenvalues=q,
        basis=basis,
        strings=strings,
        projector=_assemble(cols, dim_total),
    )


@dataclass(frozen=True, eq=False)
class ConditionalTypicalProjector:
    """Per-symbol-group typical projector at one channel input string.

    ``strings`` are the admitted eigenvalue-index strings and ``weights``
    their product eigenvalues; these are exactly the nonzero spectrum of
    the projected output.
    """

    xn: tuple
    delta: float
    strings: tuple
    weights: np.ndarray
    projector: np.ndarray

    @property
    def n(self) -> int:
        return len(self.xn)

    @property
    def rank(self) -> int:
        return len(self.strings)


def _group_filter(xn, spectra, delta, dim):
    """Admitted index strings: every symbol group's subsequence is typical
    for that symbol's spectrum, with window ``delta/dim``."""
    n = len(xn)
    tol = delta / dim + MEMBER_GUARD
    groups = []
    seen = []
    for a in xn:
        if a not in seen:
            seen.append(a)
    for a in seen:
        positions = [i for i, b in enumerate(xn) if b == a]
        m = len(positions)
        admitted = []
        for sub in itertools.product(range(dim), repeat=m):
            counts = [0] * dim
            for j in sub:
                counts[j] += 1
            if _counts_admissible(counts, m, spectra[a], tol):
                admitted.append(sub)
        groups.append((positions, admitted))
    strings = []
    for pick in itertools.product(*(admitted for _, admitted in groups)):
        jn = [0] * n
        for (positions, _), sub in zip(groups, pick):
            for i, j in zip(positions, sub):
                jn[i] = j
        strings.append(tuple(jn))
    strings.sort()
    return tuple(strings)


def cond_typical_projector(v, xn, delta, cap=None) -> ConditionalTypicalProjector:
    """Conditional typical projector of a cq channel at an input string.

    Defined for every string over the channel alphabet, typical or not;
    the projector commutes with the product output at the same string.
    """
    xn = tuple(xn)
    if not xn:
        raise InvalidStateError("input string is empty")
    for x in xn:
        if not v.has_symbol(x):
            raise DimensionMismatchError(f"symbol {x!r} not in channel alphabet")
    _, delta = _validate_block(len(xn), delta)
    dim_total = check_dim(v.dim ** len(xn), cap)
    spectra, bases = {}, {}
    for a in set(xn):
        vals, u = sorted_eigenbasis(v.output(a))
        spectra[a] = _clean_spectrum(vals)
        bases[a] = u
    strings = _group_filter(xn, spectra, delta, v.dim)
    weights = np.array(
        [
            float(np.prod([spectra[a][j] for a, j in zip(xn, jn)]))
            for jn in strings
        ]
    )
    cols = _column_stack([bases[a] for a in xn], strings, dim_total)
    return ConditionalTypicalProjector(
        xn=xn,
        delta=float(delta),
        strings=strings,
        weights=weights,
        projector=_assemble(cols, dim_total),
    )


def _unconditional_reports(rho, n, delta):
    rho = op.check_density(np.asarray(rho, dtype=complex))
    q = _clean_spectrum(np.linalg.eigvalsh(rho)[::-1])
    entropy, window = _entropy_and_window(q, delta)
    profiles = _profiles(q, n, delta)
    rank = sum(size for _, size, _ in profiles)
    trace = sum(size * 2.0**logw for _, size, logw in profiles)
    reports = [
        make_report("te1-trace", trace, 1.0),
        make_report("te2-rank-lower", 2.0 ** (n * (entropy - window)), float(rank)),
        make_report("te2-rank-upper", float(rank), 2.0 ** (n * (entropy + window))),
    ]
    if rank:
        low = 2.0 ** min(logw for _, _, logw in profiles)
        high = 2.0 ** max(logw for _, _, logw in profiles)
        reports.append(
            make_report("te3-eig-lower", 2.0 ** (-n * (entropy + window)), low)
        )
        reports.append(
            make_report("te3-eig-upper", high, 2.0 ** (-n * (entropy - window)))
        )
    else:
        # empty typical set: the sandwich is vacuous, the rank window is not
        reports.append(make_report("te3-eig-lower", 0.0, 0.0))
        reports.append(make_report("te3-eig-upper", 0.0, 0.0))
    return reports


def _string_profile(xn, spectra, delta, dim):
    """Rank, trace, and log-eigenvalue extremes of the projected output,
    computed per symbol group without materializing the projector."""
    rank = 1
    trace = 1.0
    log_lo = 0.0
    log_hi = 0.0
    for a in set(xn):
        m = sum(1 for b in xn if b == a)
        profiles = _profiles(spectra[a], m, delta)
        group_rank = sum(size for _, size, _ in profiles)
        if group_rank == 0:
            return 0, 0.0, None, None
        rank *= group_rank
        trace *= sum(size * 2.0**logw for _, size, logw in profiles)
        log_lo += min(logw for _, _, logw in profiles)
        log_hi += max(logw for _, _, logw in profiles)
    return rank, trace, log_lo, log_hi


def _conditional_reports(v, p, n, delta, cap):
    p = _validate_dist(p)
    if p.size != len(v.alphabet):
        raise DimensionMismatchError(
            f"distribution size {p.size} != alphabet size {len(v.alphabet)}"
        )
    check_dim(v.dim**n, cap)
    ts = typical_set(p, n, delta, alphabet=v.alphabet)
    if ts.members is None:
        raise ResourceCapError(
            "typical string enumeration exceeds the cap",
            requested=len(v.alphabet) ** n,
            cap=STRING_CAP,
        )
    if not ts.members:
        raise InvalidStateError("typical set is empty at this block length")
    spectra = {}
    for a in v.alphabet:
        spectra[a] = _clean_spectrum(np.linalg.eigvalsh(v.output(a))[::-1])
    cond_entropy = sum(
        prob * _entropy_and_window(spectra[a], delta)[0]
        for prob, a in zip(p, v.alphabet)
        if prob > 0.0
    )
    window = max(_entropy_and_window(spectra[a], delta)[1] for a in v.alphabet)

    ranks, traces, lows, highs = [], [], [], []
    for xn in ts.members:
        rank, trace, log_lo, log_hi = _string_profile(xn, spectra, delta, v.dim)
        ranks.append(rank)
        traces.append(trace)
        if rank:
            lows.append(log_lo)
            highs.append(log_hi)

    pv = np.zeros((v.dim, v.dim), dtype=complex)
    for prob, a in zip(p, v.alphabet):
        pv += prob * v.output(a)
    pi_avg = typical_projector(pv, n, delta, cap).projector
    vn = tensor_power(v, n, cap)
    avg_trace = min(
        float(np.trace(vn.output(xn) @ pi_avg).real) for xn in ts.members
    )

    reports = [
        make_report("te4-trace", min(traces), 1.0),
        make_report(
            "te6-rank-lower", 2.0 ** (n * (cond_entropy - window)), float(min(ranks))
        ),
        make_report(
            "te6-rank-upper", float(max(ranks)), 2.0 ** (n * (cond_entropy + window))
        ),
    ]
    if lows:
        reports.append(
            make_report(
                "te5-eig-lower", 2.0 ** (-n * (cond_entropy + window)), 2.0 ** min(lows)
            )
        )
        reports.append(
            make_report(
                "te5-eig-upper", 2.0 ** max(highs), 2.0 ** (-n * (cond_entropy - window))
            )
        )
    else:
        reports.append(make_report("te5-eig-lower", 0.0, 0.0))
        reports.append(make_report("te5-eig-upper", 0.0, 0.0))
    reports.append(make_report("te7-trace", avg_trace, 1.0))
    return reports


def check_typical_projector(source, n, delta, p=None, cap=None):
    """Trace, rank, and eigenvalue reports for a typical projector.

    With a density matrix: the projected power ``Pi rho**(x) n Pi`` is
    checked against the window constant from the spectrum (reports te1-te3).
    With a cq channel and an input distribution: the conditional projectors
    at every typical input string are checked, worst case per report, plus
    the projected trace against the average-state projector (te4-te7).
    Trace reports carry the measured value against the trivial bound 1.
    """
    n, delta = _validate_block(n, delta)
    if hasattr(source, "output") and hasattr(source, "alphabet"):
        if p is None:
            raise InvalidStateError(
                "conditional checks need the input distribution"
            )
        return _conditional_reports(source, p, n, delta, cap)
    return _unconditional_reports(source, n, delta)


def subnormalized_channel(v, p, n, delta, cap=None) -> SubnormalizedCqChannel:
    """Project each typical product output into the typical subspaces.

    Every output of ``v**(x) n`` at a typical string is compressed first by
    its conditional projector, then by the typical projector of the average
    state.  The trace deficit is measured and becomes the channel's
    epsilon.  Domination by the product channel is verified on every
    output; a violation raises :class:`PsdOrderingError`.
    """
    p = _validate_dist(p)
    if p.size != len(v.alphabet):
        raise DimensionMismatchError(
            f"distribution size {p.size} != alphabet size {len(v.alphabet)}"
        )
    n, delta = _validate_block(n, delta)
    dim_total = check_dim(v.dim**n, cap)
    ts = typical_set(p, n, delta, alphabet=v.alphabet)
    if ts.members is None:
        raise ResourceCapError(
            "typical string enumeration exceeds the cap",
            requested=len(v.alphabet) ** n,
            cap=STRING_CAP,
        )
    if not ts.members:
        raise InvalidStateError("typical set is empty at this block length")

    pv = np.zeros((v.dim, v.dim), dtype=complex)
    for prob, a in zip(p, v.alphabet):
        pv += prob * v.output(a)
    pi_avg = typical_projector(pv, n, delta, cap).projector
    vn = tensor_power(v, n, cap)

    outputs = {}
    for xn in ts.members:
        pi_cond = cond_typical_projector(v, xn, delta, cap).projector
        inner = pi_cond @ vn.output(xn) @ pi_cond
        out = pi_avg @ inner @ pi_avg
        outputs[xn] = (out + out.conj().T) / 2.0

    sub = SubnormalizedCqChannel(ts.members, dim_total, outputs)
    check_psd_ordering(sub, vn)
    return sub
