"""Wiretap codes: plain, seeded, modular, and derandomized.

A transmission code carries deterministic codewords with sub-POVM decoders.
A wiretap code replaces the codeword map by a stochastic encoder.  A
common-randomness code is a seed-indexed family of wiretap codes sharing
one message set.  The modular construction coarse-grains a transmission
code along the preimages of a verified biregular function, and
derandomization concatenates a seed-transmitting code with several reuses
of a common-randomness code.

Encoders are stored sparsely (only strings with nonzero probability), and
the derandomized code can be evaluated blockwise, without materializing
operators on the full concatenated space.
"""

import itertools
import math
from functools import reduce

import numpy as np

from . import operators as op
from .bri import BriFunction, preimage
from .channels import ClassicalChannel, CqChannel, tensor_power
from .config import STRING_CAP, check_dim
from .errors import InvalidStateError


def _check_decoders(decoders, keys, dim):
    if set(decoders) != set(keys):
        raise InvalidStateError("decoders must cover the message set exactly")
    cleaned = {m: op.check_measurement(np.asarray(decoders[m], dtype=complex)) for m in keys}
    op.check_sub_povm(list(cleaned.values()), dim)
    return cleaned


class TransmissionCode:
    """Deterministic codewords with a sub-POVM decoder family."""

    __slots__ = ("codewords", "decoders", "n", "dim")

    def __init__(self, codewords, decoders, n: int, dim: int):
        self.n = int(n)
        self.dim = int(dim)
        cws = {}
        for c, x in dict(codewords).items():
            x = tuple(x)
            if len(x) != self.n:
                raise InvalidStateError(f"codeword for {c!r} has length {len(x)}, not {self.n}")
            cws[c] = x
        self.codewords = cws
        self.decoders = _check_decoders(decoders, cws, self.dim)

    @property
    def messages(self) -> tuple:
        return tuple(self.codewords)

    def as_wiretap(self) -> "WiretapCode":
        encoder = ClassicalChannel(
            self.messages, {c: {x: 1.0} for c, x in self.codewords.items()}
        )
        return WiretapCode(encoder, self.decoders, self.n, self.dim)


class WiretapCode:
    """Stochastic encoder over input strings plus a sub-POVM decoder family."""

    __slots__ = ("encoder", "decoders", "n", "dim")

    def __init__(self, encoder: ClassicalChannel, decoders, n: int, dim: int):
        self.n = int(n)
        self.dim = int(dim)
        for m in encoder.inputs:
            for x in encoder.row(m):
                if len(tuple(x)) != self.n:
                    raise InvalidStateError(
                        f"encoder row {m!r} contains a string of length {len(x)}, not {self.n}"
                    )
        self.encoder = encoder
        self.decoders = _check_decoders(decoders, encoder.inputs, self.dim)

    @property
    def messages(self) -> tuple:
        return self.encoder.inputs


class CommonRandomnessCode:
    """Seed-indexed family of wiretap codes over one message set."""

    __slots__ = ("seeds", "per_seed")

    def __init__(self, per_seed):
        per_seed = dict(per_seed)
        if not per_seed:
            raise InvalidStateError("need at least one seed")
        self.seeds = tuple(sorted(per_seed))
        first = per_seed[self.seeds[0]]
        for s in self.seeds:
            code = per_seed[s]
            if code.messages != first.messages or code.n != first.n or code.dim != first.dim:
                raise InvalidStateError("per-seed codes must share messages, length, dim")
        self.per_seed = per_seed

    @property
    def messages(self) -> tuple:
        return self.per_seed[self.seeds[0]].messages

    @property
    def n(self) -> int:
        return self.per_seed[self.seeds[0]].n

    @property
    def dim(self) -> int:
        return self.per_seed[self.seeds[0]].dim


class DerandomizedCode:
    """A seed-transmitting code driving N reuses of a common-randomness code.

    Holds the two components; error evaluation is blockwise
    (:func:`error_derandomized`), and :func:`derandomize` materializes the
    equivalent single wiretap code when the concatenated space is small.
    """

    __slots__ = ("seed_code", "inner", "n_repeats")

    def __init__(self, seed_code: TransmissionCode, inner: CommonRandomnessCode, n_repeats: int):
        if sorted(seed_code.messages) != sorted(inner.seeds):
            raise InvalidStateError("seed code must transmit exactly the inner seed set")
        if n_repeats < 1:
            raise InvalidStateError(f"need n_repeats >= 1, got {n_repeats}")
        self.seed_code = seed_code
        self.inner = inner
        self.n_repeats = int(n_repeats)

    @property
    def messages(self) -> tuple:
        return tuple(itertools.product(self.inner.messages, repeat=self.n_repeats))

    @property
    def n_total(self) -> int:
        return self.seed_code.n + self.inner.n * self.n_repeats


def _success(decoder: np.ndarray, state: np.ndarray) -> float:
    return float(np.trace(decoder @ state).real)


def error_max(code, w) -> float:
    """Worst-message decoding error sup_m sum_x E(x|m)(1 - tr(D_m W(x))).

    ``w`` is the single-letter channel; only strings in the encoder's
    support are evaluated, with output states cached per string.
    """
    if isinstance(code, TransmissionCode):
        code = code.as_wiretap()
    w_n = tensor_power(w, code.n)
    cache = {}
    worst = 0.0
    for m in code.messages:
        total = 0.0
        for x, prob in code.encoder.row(m).items():
            if prob == 0.0:
                continue
            if x not in cache:
                cache[x] = w_n.output(x)
            total += prob * (1.0 - _success(code.decoders[m], cache[x]))
        worst = max(worst, total)
    return worst


def error_expected_cr(crcode: CommonRandomnessCode, w) -> float:
    """Seed-average of the per-seed worst-message error."""
    return sum(error_max(crcode.per_seed[s], w) for s in crcode.seeds) / len(crcode.seeds)


def assemble_bri_modular(t: TransmissionCode, f: BriFunction) -> CommonRandomnessCode:
    """Coarse-grain a transmission code along a biregular function.

    For seed s and message m the encoder is uniform over the codewords of
    the preimage f_s^{-1}(m) and the decoder is the sum of their decoders.
    The transmission code's messages must be exactly 0..|X|-1, the
    function's input indices.
    """
    if not isinstance(f, BriFunction):
        raise InvalidStateError("modular assembly needs a verified BriFunction")
    if sorted(t.messages) != list(range(f.n_inputs)):
        raise InvalidStateError(
            f"transmission code messages must be 0..{f.n_inputs - 1} to feed the function"
        )
    per_seed = {}
    for s in range(f.n_seeds):
        rows = {}
        decoders = {}
        for m in f.regularity_set:
            row = {}
            total = np.zeros((t.dim, t.dim), dtype=complex)
            for c in preimage(f, s, m):
                c = int(c)
                x = t.codewords[c]
                row[x] = row.get(x, 0.0) + 1.0 / f.d_s
                total = total + t.decoders[c]
            rows[m] = row
            decoders[m] = total
        encoder = ClassicalChannel(f.regularity_set, rows)
        per_seed[s] = WiretapCode(encoder, decoders, t.n, t.dim)
    return CommonRandomnessCode(per_seed)


def codeword_channel(t: TransmissionCode, v) -> CqChannel:
    """The channel c -> V^{(x)n}(x^n_c) seen through the codeword map."""
    v_n = tensor_power(v, t.n)
    outputs = {c: v_n.output(x) for c, x in t.codewords.items()}
    return CqChannel(t.messages, v_n.dim, outputs, validate=False)


def derandomize(
    seed_code: TransmissionCode,
    crcode: CommonRandomnessCode,
    n_repeats: int,
    cap: int | None = None,
) -> WiretapCode:
    """Materialize the derandomized code as a single wiretap code.

    Encoder: mixture over the uniform seed of the seed codeword followed by
    N independent draws from the seed's inner encoder.  Decoder: coarse
    graining sum_s D'_s (x) D^s_{m_1} (x) ... (x) D^s_{m_N}.
    """
    d = DerandomizedCode(seed_code, crcode, n_repeats)
    dim = check_dim(seed_code.dim * crcode.dim**n_repeats, cap)
    messages = d.messages
    if len(messages) * len(crcode.seeds) > STRING_CAP:
        raise InvalidStateError("derandomized message set exceeds the string cap")
    weight = 1.0 / len(crcode.seeds)
    rows = {}
    decoders = {}
    for mbar in messages:
        row = {}
        for s in crcode.seeds:
            head = seed_code.codewords[s]
            block_rows = [crcode.per_seed[s].encoder.row(m) for m in mbar]
            for combo in itertools.product(*(r.items() for r in block_rows)):
                string = head + tuple(itertools.chain.from_iterable(x for x, _ in combo))
                prob = weight
                for _, p in combo:
                    prob *= p
                if prob > 0.0:
                    row[string] = row.get(string, 0.0) + prob
        rows[mbar] = row
        total = np.zeros((dim, dim), dtype=complex)
        for s in crcode.seeds:
            parts = [seed_code.decoders[s]] + [crcode.per_seed[s].decoders[m] for m in mbar]
            total = total + reduce(np.kron, parts)
        decoders[mbar] = total
    encoder = ClassicalChannel(messages, rows)
    return WiretapCode(encoder, decoders, d.n_total, dim)


def error_derandomized(d: DerandomizedCode, w) -> float:
    """Exact worst-message error of the derandomized code, blockwise.

    The decoder trace factorizes over the seed block and the N message
    blocks, so the error needs only the seed-block confusion matrix
    A[s, s'] and per-block terms B[s, s', m]; no operator on the
    concatenated space is formed.
    """
    seeds = d.inner.seeds
    k = len(seeds)
    w_head = tensor_power(w, d.seed_code.n)
    head_states = {s: w_head.output(d.seed_code.codewords[s]) for s in seeds}
    a = np.array(
        [[_success(d.seed_code.decoders[s2], head_states[s1]) for s2 in seeds] for s1 in seeds]
    )
    w_block = tensor_power(w, d.inner.n)
    cache = {}
    msgs = d.inner.messages
    b = np.zeros((k, k, len(msgs)))
    for i, s1 in enumerate(seeds):
        enc = d.inner.per_seed[s1].encoder
        for m_i, m in enumerate(msgs):
            for x, prob in enc.row(m).items():
                if prob == 0.0:
                    continue
                if x not in cache:
                    cache[x] = w_block.output(x)
                for j, s2 in enumerate(seeds):
                    b[i, j, m_i] += prob * _success(d.inner.per_seed[s2].decoders[m], cache[x])
    worst = 0.0
    for mbar in itertools.product(range(len(msgs)), repeat=d.n_repeats):
        success = 0.0
        for i in range(k):
            for j in range(k):
                term = a[i, j]
                for m_i in mbar:
                    term *= b[i, j, m_i]
                success += term
        worst = max(worst, 1.0 - success / k)
    return float(worst)


def rate(code) -> float:
    """Bits per channel use; the derandomized form is N log2|M| / (n'+nN)."""
    if isinstance(code, DerandomizedCode):
        return (
            code.n_repeats
            * math.log2(len(code.inner.messages))
            / (code.seed_code.n + code.inner.n * code.n_repeats)
        )
    return math.log2(len(code.messages)) / code.n


def transmission_code_pgm(codewords, w, n: int) -> TransmissionCode:
    """Square-root-measurement decoders for the given codewords.

    With S = sum_c W(x_c), each decoder is S^{-1/2} W(x_c) S^{-1/2}
    (pseudo-inverse on the support), so the family sums to the support
    projector of S and is always a valid sub-POVM.
    """
    codewords = {c: tuple(x) for c, x in dict(codewords).items()}
    w_n = tensor_power(w, n)
    states = {c: w_n.output(x) for c, x in codewords.items()}
    total = sum(states.values())
    vals, vecs = np.linalg.eigh(op.check_hermitian(total))
    mask = vals > 1e-12 * vals.max()
    inv_sqrt = (vecs[:, mask] / np.sqrt(vals[mask])) @ vecs[:, mask].conj().T
    decoders = {c: inv_sqrt @ rho @ inv_sqrt for c, rho in states.items()}
    return TransmissionCode(codewords, decoders, n, w_n.dim)
