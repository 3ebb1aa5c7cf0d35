"""Certified inequality reports: the BRI leakage chain and expurgation.

Each check is packaged as a :class:`BoundReport` carrying both sides of
one inequality together with the measured slack.  The chain runs

    seed-average leakage
      <= worst-message expected divergence           (leakage-vs-divergence)
      <= the same under a dominated subnormalized
         channel, plus a trace-deficit charge        (divergence-vs-subnormalized)
      <= a log-average of quadratic divergences      (divergence-vs-renyi2)
      <= a spectral product lambda2 * rank * norm    (renyi2-vs-spectrum)

and the closing report (leakage-total) compares the leakage directly
against the combined spectral bound.  Everything is computed in bits;
exp2 of the quadratic divergence is tr(rho^2 sigma^+) exactly.

One caveat is recorded rather than hidden: the divergence-vs-renyi2 step
charges the trace deficit as "+ epsilon" in bits, but the underlying
estimate -t log t <= 1 - t is a natural-log inequality.  When every
preimage mixture coincides with the channel average (complete mixing)
and the channel is strictly subnormalized, the recorded right side is
log2(t) + (1 - t) < 0 while the left side is 0, so the report carries
honest negative slack.  The closing leakage-total report does not
inherit this: its derivation replaces the logarithm by the chord bound
log2(1 + u) <= u / ln 2 before the deficit enters.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import operators as op
from .bri import BriFunction, lambda2, preimage
from .channels import ClassicalChannel, CqChannel, holevo, mix, tensor_power
from .codes import TransmissionCode, WiretapCode
from .config import TOL_BOUND, TOL_ROWSUM, TOL_TRACE
from .errors import DimensionMismatchError, InvalidStateError, PsdOrderingError

LN2 = math.log(2.0)
ORDERING_TOL = 1e-10
# trace deficit below this is treated as exact normalization
DEFICIT_TOL = 1e-12


@dataclass(frozen=True)
class BoundReport:
    """One inequality lhs <= rhs with its measured slack.

    ``holds`` is slack >= -1e-9; infinities are legal on either side
    (slack of two infinite sides is 0 by convention).
    """

    name: str
    lhs: float
    rhs: float
    slack: float
    holds: bool


def make_report(name: str, lhs, rhs) -> BoundReport:
    lhs, rhs = float(lhs), float(rhs)
    if math.isinf(lhs) and math.isinf(rhs) and lhs == rhs:
        slack = 0.0
    else:
        slack = rhs - lhs
    return BoundReport(name, lhs, rhs, slack, slack >= -TOL_BOUND)


class SubnormalizedCqChannel:
    """Map from a finite alphabet to PSD operators with trace in [1-eps, 1].

    ``epsilon`` defaults to the measured worst trace deficit.  A claimed
    epsilon must cover the measured deficit; a claimed 0 that is
    numerically contradicted (some trace below 1 - 1e-12) is replaced by
    the measured value, since every bound consuming epsilon is valid only
    with the true deficit.
    """

    __slots__ = ("alphabet", "dim", "epsilon", "_outputs")

    def __init__(self, alphabet, dim, outputs, epsilon=None):
        alphabet = tuple(alphabet)
        if not alphabet:
            raise InvalidStateError("alphabet is empty")
        dim = int(dim)
        store = {}
        deficit = 0.0
        for x in alphabet:
            if x not in outputs:
                raise InvalidStateError(f"missing output for symbol {x!r}")
            a = op.check_psd(np.asarray(outputs[x], dtype=complex))
            if a.shape != (dim, dim):
                raise DimensionMismatchError(
                    f"output of {x!r} has shape {a.shape}, expected ({dim}, {dim})"
                )
            t = float(np.real(np.trace(a)))
            if t > 1.0 + TOL_TRACE:
                raise InvalidStateError(f"output of {x!r} has trace {t} > 1")
            deficit = max(deficit, 1.0 - t)
            store[x] = a
        deficit = max(0.0, deficit)
        if epsilon is None:
            epsilon = deficit
        else:
            epsilon = float(epsilon)
            if not 0.0 <= epsilon <= 1.0:
                raise InvalidStateError(f"epsilon must be in [0, 1], got {epsilon}")
            if epsilon == 0.0 and deficit > DEFICIT_TOL:
                epsilon = deficit
            elif deficit > epsilon + TOL_TRACE:
                raise InvalidStateError(
                    f"claimed epsilon {epsilon} but measured trace deficit {deficit}"
                )
        self.alphabet = alphabet
        self.dim = dim
        self.epsilon = float(epsilon)
        self._outputs = store

    @classmethod
    def from_channel(cls, v, scale: float = 1.0) -> "SubnormalizedCqChannel":
        """Uniform damping of a normalized channel: V'(x) = scale * V(x)."""
        if not 0.0 < scale <= 1.0:
            raise InvalidStateError(f"scale must be in (0, 1], got {scale}")
        return cls(v.alphabet, v.dim, {x: scale * v.output(x) for x in v.alphabet})

    def output(self, x) -> np.ndarray:
        try:
            return self._outputs[x]
        except KeyError:
            raise DimensionMismatchError(f"symbol {x!r} not in alphabet") from None

    def has_symbol(self, x) -> bool:
        return x in self._outputs

    def states(self) -> list:
        return [self._outputs[x] for x in self.alphabet]

    def uniform_average(self) -> np.ndarray:
        return mix(self, self.alphabet)

    def __len__(self) -> int:
        return len(self.alphabet)


def check_psd_ordering(v_prime, v, tol: float = ORDERING_TOL) -> float:
    """Assert V'(x) <= V(x) in PSD order for every shared symbol.

    Returns the most negative eigenvalue seen across the differences
    (0.0 when the ordering is exact); raises :class:`PsdOrderingError`
    when it drops below -tol.
    """
    worst = 0.0
    worst_x = None
    for x in v_prime.alphabet:
        diff = op.check_hermitian(v.output(x) - v_prime.output(x))
        w = np.linalg.eigvalsh(diff)
        low = float(w[0]) if w.size else 0.0
        if low < worst:
            worst, worst_x = low, x
    if worst < -tol:
        raise PsdOrderingError(
            f"channel ordering violated at symbol {worst_x!r}: "
            f"min eigenvalue of the difference is {worst:.3e}",
            min_eigenvalue=worst,
        )
    return worst


def _require_bri(f):
    if not isinstance(f, BriFunction):
        raise InvalidStateError(f"expected a verified BriFunction, got {type(f).__name__}")


def _require_alphabet(channel, f):
    if len(channel) != f.n_inputs or not all(
        channel.has_symbol(x) for x in range(f.n_inputs)
    ):
        raise DimensionMismatchError(
            f"channel alphabet does not match the {f.n_inputs} function inputs"
        )


def _check_m(f, m):
    if m not in f.regularity_set:
        raise InvalidStateError(f"{m!r} is not in the regularity set")


def _check_m_dist(f, m_dist) -> np.ndarray:
    p = np.asarray(m_dist, dtype=float)
    if p.ndim != 1 or p.size != len(f.regularity_set):
        raise DimensionMismatchError(
            f"message distribution length {p.size} != {len(f.regularity_set)}"
        )
    if p.min() < 0.0 or abs(p.sum() - 1.0) > TOL_ROWSUM:
        raise InvalidStateError("message distribution must be a probability vector")
    return p


def _preimage_mixtures(f, channel, m) -> list:
    return [mix(channel, preimage(f, s, m)) for s in range(f.n_seeds)]


def _seed_embedded_leakage(f, v, m_dist) -> float:
    """chi(M; S, V o f_S^{-1}) on the literal joint seed-output system.

    The per-message state is the block-diagonal embedding of all seeds'
    preimage mixtures, each weighted 1/|S|; the seed register is part of
    the eavesdropper's system.
    """
    k, d = f.n_seeds, v.dim
    states = {}
    for i, m in enumerate(f.regularity_set):
        block = np.zeros((k * d, k * d), dtype=complex)
        for s in range(k):
            block[s * d : (s + 1) * d, s * d : (s + 1) * d] = (
                mix(v, preimage(f, s, m)) / k
            )
        states[i] = block
    joint = CqChannel(range(len(f.regularity_set)), k * d, states, validate=False)
    return holevo(m_dist, joint)


def bound_leakage_by_divergence(f, v, m_dist) -> BoundReport:
    """Leakage of the seeded preimage ensemble vs the worst-message
    expected divergence from the channel average.

    lhs = chi(M; S, V o f_S^{-1}) computed on the explicit joint system;
    rhs = max_m E_S D(V o f_s^{-1}(m) || V(X)).
    """
    _require_bri(f)
    _require_alphabet(v, f)
    p = _check_m_dist(f, m_dist)
    lhs = _seed_embedded_leakage(f, v, p)
    v_avg = mix(v, range(f.n_inputs))
    rhs = max(
        float(np.mean([op.relative_entropy(r, v_avg) for r in _preimage_mixtures(f, v, m)]))
        for m in f.regularity_set
    )
    return make_report("leakage-vs-divergence", lhs, rhs)


def bound_divergence_by_subnormalized(f, v, v_prime, m) -> BoundReport:
    """Expected divergence under V vs under a dominated V', plus the
    trace-deficit charge epsilon * log2(|X| / d_S).

    Requires V' <= V in PSD order symbol by symbol (checked).
    """
    _require_bri(f)
    _require_alphabet(v, f)
    _require_alphabet(v_prime, f)
    _check_m(f, m)
    check_psd_ordering(v_prime, v)
    v_avg = mix(v, range(f.n_inputs))
    lhs = float(
        np.mean([op.relative_entropy(r, v_avg) for r in _preimage_mixtures(f, v, m)])
    )
    vp_avg = mix(v_prime, range(f.n_inputs))
    inner = np.mean(
        [op.relative_entropy(r, vp_avg) for r in _preimage_mixtures(f, v_prime, m)]
    )
    rhs = float(inner) + v_prime.epsilon * math.log2(f.n_inputs / f.d_s)
    return make_report("divergence-vs-subnormalized", lhs, rhs)


def bound_divergence_by_renyi2(f, v_prime, m) -> BoundReport:
    """Expected divergence vs log2 of the seed-averaged tr(rho^2 sigma^+),
    plus the trace deficit epsilon.

    See the module docstring for the complete-mixing caveat: with a
    strictly subnormalized channel whose preimage mixtures all equal the
    average, the right side is log2(t) + (1 - t) < 0 and the report
    honestly fails.
    """
    _require_bri(f)
    _require_alphabet(v_prime, f)
    _check_m(f, m)
    sigma = mix(v_prime, range(f.n_inputs))
    mixtures = _preimage_mixtures(f, v_prime, m)
    lhs = float(np.mean([op.relative_entropy(r, sigma) for r in mixtures]))
    avg_exp = float(np.mean([op.exp2_renyi2(r, sigma) for r in mixtures]))
    if math.isinf(avg_exp):
        rhs = math.inf
    elif avg_exp <= 0.0:
        rhs = -math.inf
    else:
        rhs = math.log2(avg_exp) + v_prime.epsilon
    return make_report("divergence-vs-renyi2", lhs, rhs)


def bound_renyi2_by_spectrum(f, v_prime, m) -> BoundReport:
    """Seed-averaged tr(rho^2 sigma^+) vs lambda2 * rank * max norm + 1."""
    _require_bri(f)
    _require_alphabet(v_prime, f)
    _check_m(f, m)
    sigma = mix(v_prime, range(f.n_inputs))
    lhs = float(
        np.mean([op.exp2_renyi2(r, sigma) for r in _preimage_mixtures(f, v_prime, m)])
    )
    if math.isinf(lhs):
        # unreachable for genuine inputs: sigma dominates every preimage
        # mixture by (d_S/|X|) r <= sigma, so a support leak is numerical;
        # the divergence convention makes the pair vacuously certified
        return make_report("renyi2-vs-spectrum", lhs, math.inf)
    norm = max(op.operator_norm(v_prime.output(x)) for x in range(f.n_inputs))
    rhs = lambda2(f, m) * op.rank_eps(sigma) * norm + 1.0
    return make_report("renyi2-vs-spectrum", lhs, rhs)


def bound_leakage_total(f, v, v_prime, m_dist) -> BoundReport:
    """Leakage vs the closed-form spectral bound

    (1/ln 2) max_m lambda2(f,m) * rank * max norm + eps + eps log2(|X|/d_S).
    """
    _require_bri(f)
    _require_alphabet(v, f)
    _require_alphabet(v_prime, f)
    p = _check_m_dist(f, m_dist)
    check_psd_ordering(v_prime, v)
    lhs = _seed_embedded_leakage(f, v, p)
    sigma = mix(v_prime, range(f.n_inputs))
    norm = max(op.operator_norm(v_prime.output(x)) for x in range(f.n_inputs))
    lam = max(lambda2(f, m) for m in f.regularity_set)
    eps = v_prime.epsilon
    rhs = (
        lam * op.rank_eps(sigma) * norm / LN2
        + eps
        + eps * math.log2(f.n_inputs / f.d_s)
    )
    return make_report("leakage-total", lhs, rhs)


def certify_chain(f, v, v_prime, m_dist) -> list:
    """All five chain reports in derivation order.

    The three per-message steps are evaluated for every m in the
    regularity set and the worst (smallest slack) report is kept, ties
    resolved toward the earlier m.
    """

    def worst(fn, *args):
        best = None
        for m in f.regularity_set:
            r = fn(*args, m)
            if best is None or r.slack < best.slack:
                best = r
        return best

    return [
        bound_leakage_by_divergence(f, v, m_dist),
        worst(bound_divergence_by_subnormalized, f, v, v_prime),
        worst(bound_divergence_by_renyi2, f, v_prime),
        worst(bound_renyi2_by_spectrum, f, v_prime),
        bound_leakage_total(f, v, v_prime, m_dist),
    ]


def pinsker_gap(sigma, mu_tensor_rho) -> BoundReport:
    """Trace-norm-squared vs 2 ln 2 times the relative entropy (bits)."""
    sigma = np.asarray(sigma, dtype=complex)
    mu_tensor_rho = np.asarray(mu_tensor_rho, dtype=complex)
    lhs = op.trace_norm(sigma - mu_tensor_rho) ** 2
    rhs = 2.0 * LN2 * op.relative_entropy(sigma, mu_tensor_rho)
    return make_report("pinsker", lhs, rhs)


def g_continuity(x: float) -> float:
    """(1 + x) h(x / (1 + x)), the additive term of the continuity bound."""
    x = float(x)
    if x < 0.0:
        raise InvalidStateError(f"argument must be nonnegative, got {x}")
    if x == 0.0:
        return 0.0
    return (1.0 + x) * op.binary_entropy(x / (1.0 + x))


def continuity_bound(m_dist, states, dim_d: int | None = None, ref=None) -> BoundReport:
    """Holevo quantity of an ensemble vs 2 eps' log2(d) + g(eps').

    eps' is half the average trace distance of the ensemble members from
    the reference state (the ensemble average unless ``ref`` is given;
    expurgation passes the unexpurgated average).  ``d`` defaults to the
    number of ensemble members, the dimension of the message register.
    """
    p = np.asarray(m_dist, dtype=float)
    states = [np.asarray(s, dtype=complex) for s in states]
    if p.ndim != 1 or p.size != len(states):
        raise DimensionMismatchError(
            f"distribution length {p.size} != {len(states)} states"
        )
    if p.min() < 0.0 or abs(p.sum() - 1.0) > TOL_ROWSUM:
        raise InvalidStateError("message distribution must be a probability vector")
    avg = sum(prob * s for prob, s in zip(p, states))
    lhs = op.entropy(avg) - sum(
        prob * op.entropy(s) for prob, s in zip(p, states) if prob > 0.0
    )
    ref_state = avg if ref is None else np.asarray(ref, dtype=complex)
    eps = 0.5 * float(
        sum(prob * op.trace_norm(s - ref_state) for prob, s in zip(p, states))
    )
    d = int(dim_d) if dim_d is not None else len(states)
    rhs = 2.0 * eps * math.log2(d) + g_continuity(eps)
    return make_report("continuity", lhs, rhs)


def expurgate_semantic(code, v):
    """Drop every message whose output strays more than twice the average
    trace distance from the uniform-ensemble average.

    Returns the restricted code and a report with lhs = largest kept
    distance and rhs = the 2x-average threshold.  Markov's inequality
    guarantees at least half the messages survive.  The kept messages are
    ordered by (distance, original position).
    """
    if isinstance(code, TransmissionCode):
        code = code.as_wiretap()
    if not isinstance(code, WiretapCode):
        raise InvalidStateError(f"expected a wiretap code, got {type(code).__name__}")
    messages = code.messages
    if len(messages) == 1:
        return code, make_report("expurgation", 0.0, 0.0)
    v_n = tensor_power(v, code.n)
    rho_m = {}
    for m in messages:
        acc = np.zeros((v_n.dim, v_n.dim), dtype=complex)
        for xn, prob in code.encoder.row(m).items():
            acc += prob * v_n.output(xn)
        rho_m[m] = acc
    rho = sum(rho_m.values()) / len(messages)
    dist = {m: op.trace_norm(rho_m[m] - rho) for m in messages}
    threshold = 2.0 * float(np.mean(list(dist.values())))
    order = {m: i for i, m in enumerate(messages)}
    kept = sorted(
        (m for m in messages if dist[m] <= threshold),
        key=lambda m: (dist[m], order[m]),
    )
    encoder = ClassicalChannel(kept, {m: dict(code.encoder.row(m)) for m in kept})
    restricted = WiretapCode(
        encoder, {m: code.decoders[m] for m in kept}, code.n, code.dim
    )
    report = make_report("expurgation", max(dist[m] for m in kept), threshold)
    return restricted, report
