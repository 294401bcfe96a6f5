"""Security and statistics checks.

Exact part: on tiny fields every outcome of the dealer's (and simulator's)
randomness is enumerated by replaying the real code against a scripted
random source, and the adversary's view distribution is accumulated as
exact rationals. Real and simulated distributions are then compared for
equality, not closeness.

Statistical part: Pearson chi-squared against the uniform distribution,
used at production field size where enumeration is impossible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Hashable, Iterator

import numpy as np
from scipy import stats

from .crypto import RandomSource, SeededRandomSource, SystemRandomSource
from .errors import ParameterError, RandomnessError
from .field import DEFAULT_FIELD, Field
from .protocol import (
    ReceiverKeys,
    SenderKeys,
    SessionParams,
    UMessage,
    VMessage,
    dealer_generate,
    ideal_functionality,
    positionwise_oracle,
    receiver_count,
    receiver_encode,
    sender_respond,
    simulate_malicious_receiver,
    simulate_malicious_sender,
)

MAX_ENUM_MODULUS = 7
MAX_ENUM_N = 3
MAX_DEALER_OUTCOMES = 1_000_000

ReceiverAdversary = Callable[[ReceiverKeys], UMessage]
SenderAdversary = Callable[[UMessage, SenderKeys], VMessage]


class ViewDistribution(dict):
    """Map from serialized view to its exact probability."""

    def add(self, view: Hashable, weight: Fraction) -> None:
        self[view] = self.get(view, 0) + weight

    def total(self) -> Fraction:
        return sum(self.values(), Fraction(0))


# -- exhaustive replay ---------------------------------------------------------

class ScriptedSource(RandomSource):
    """Replays a fixed prefix of choices, then answers 0; records every draw."""

    def __init__(self, prefix: list[int]) -> None:
        self.prefix = prefix
        self.choices: list[int] = []
        self.bounds: list[int] = []

    def _draw(self, bound: int) -> int:
        i = len(self.choices)
        c = self.prefix[i] if i < len(self.prefix) else 0
        if c >= bound:
            raise RandomnessError("scripted choice exceeds bound; program is not replayable")
        self.choices.append(c)
        self.bounds.append(bound)
        return c

    def below_each(self, bounds) -> np.ndarray:
        return np.array([self._draw(int(b)) for b in np.asarray(bounds).ravel()], dtype=np.uint64)

    def randbelow(self, bound: int) -> int:
        return self._draw(bound)

    def random_bytes(self, k: int) -> bytes:
        raise RandomnessError("scripted source only supports bounded draws")


def enumerate_outcomes(fn: Callable[[RandomSource], object]) -> Iterator[tuple[object, Fraction]]:
    """Yield ``(fn(src), probability)`` for every path through ``fn``'s draws.

    ``fn`` must be deterministic given its draws. Paths are visited in
    lexicographic order by running ``fn`` once per path.
    """
    prefix: list[int] = []
    while True:
        src = ScriptedSource(prefix)
        result = fn(src)
        yield result, Fraction(1, math.prod(src.bounds))
        choices, bounds = src.choices, src.bounds
        i = len(choices) - 1
        while i >= 0 and choices[i] + 1 >= bounds[i]:
            i -= 1
        if i < 0:
            return
        prefix = choices[:i] + [choices[i] + 1]


def _check_bounds(params: SessionParams) -> None:
    p, n = params.field.modulus, params.n
    if p > MAX_ENUM_MODULUS or n > MAX_ENUM_N:
        raise ParameterError(f"enumeration needs p <= {MAX_ENUM_MODULUS} and n <= {MAX_ENUM_N}")
    size = ((p - 1) * p * p) ** n * math.factorial(n)
    if size > MAX_DEALER_OUTCOMES:
        raise ParameterError(f"{size} dealer outcomes exceeds the {MAX_DEALER_OUTCOMES} limit")


@lru_cache(maxsize=4)
def dealer_outcomes(modulus: int, n: int) -> tuple[tuple[SenderKeys, ReceiverKeys, Fraction], ...]:
    """Every key tuple the dealer can output, with its probability."""
    params = SessionParams(n, Field(modulus))
    _check_bounds(params)
    return tuple((sk, rk, pr) for (sk, rk), pr in enumerate_outcomes(lambda src: dealer_generate(params, src)))


def _t(values) -> tuple[int, ...]:
    return tuple(int(v) for v in values)


def receiver_view(rk: ReceiverKeys, v) -> tuple:
    return (_t(rk.pads), _t(rk.expected), _t(v))


def sender_view(sk: SenderKeys, u) -> tuple:
    return (tuple(zip(_t(sk.a), _t(sk.b))), _t(sk.q.mapping), _t(u))


def honest_receiver(x) -> ReceiverAdversary:
    return lambda rk: receiver_encode(x, rk)


def honest_sender(y) -> SenderAdversary:
    return lambda u, sk: sender_respond(u, y, sk)


def _prepare(corrupt: str, x, y, params: SessionParams):
    if corrupt not in ("sender", "receiver"):
        raise ParameterError(f"corrupt must be 'sender' or 'receiver', got {corrupt!r}")
    _check_bounds(params)
    f = params.field
    xs, ys = _t(f.asarray(x)), _t(f.asarray(y))
    if len(xs) != params.n or len(ys) != params.n:
        raise ParameterError("inputs must have n positions")
    return xs, ys, dealer_outcomes(f.modulus, params.n)


def enumerate_real_view(
    corrupt: str,
    x,
    y,
    params: SessionParams,
    adversary: ReceiverAdversary | SenderAdversary | None = None,
    include_output: bool = False,
) -> ViewDistribution:
    """Exact distribution of the corrupt party's view in a real run.

    With ``include_output`` and a corrupt sender, the honest receiver's
    count is appended to each view, so the joint distribution is compared.
    """
    xs, ys, outcomes = _prepare(corrupt, x, y, params)
    dist = ViewDistribution()
    if corrupt == "receiver":
        adv = adversary or honest_receiver(xs)
        for sk, rk, pr in outcomes:
            v = sender_respond(adv(rk), ys, sk)
            dist.add(receiver_view(rk, v.values), pr)
    else:
        adv = adversary or honest_sender(ys)
        for sk, rk, pr in outcomes:
            u = receiver_encode(xs, rk)
            view = sender_view(sk, u.values)
            if include_output:
                view += (receiver_count(adv(u, sk), rk),)
            dist.add(view, pr)
    return dist


def enumerate_sim_view(
    corrupt: str,
    x,
    y,
    params: SessionParams,
    adversary: ReceiverAdversary | SenderAdversary | None = None,
    include_output: bool = False,
) -> ViewDistribution:
    """Exact distribution of the view the simulator hands the adversary.

    The simulator sees the dealer transcript and the ideal functionality
    only. Its own coins are enumerated too, once per distinct value of the
    transcript parts the simulator actually reads.
    """
    xs, ys, outcomes = _prepare(corrupt, x, y, params)
    # group dealer outcomes by what the simulator reads, then expand each group once
    groups: dict[tuple, list] = {}
    if corrupt == "receiver":
        adv = adversary or honest_receiver(xs)
        oracle = positionwise_oracle(ys)
        for sk, rk, pr in outcomes:
            key = (_t(rk.pads), _t(rk.expected), _t(sk.q.mapping))
            group = groups.setdefault(key, [0, sk, rk])
            group[0] += pr

        def run(sk: SenderKeys, rk: ReceiverKeys, src: RandomSource) -> tuple:
            v = simulate_malicious_receiver(adv, rk, sk.q, oracle, src)
            return receiver_view(rk, v.values)
    else:
        adv = adversary or honest_sender(ys)
        for sk, rk, pr in outcomes:
            key = (_t(sk.a), _t(sk.b), _t(sk.q.mapping))
            group = groups.setdefault(key, [0, sk, rk])
            group[0] += pr

        def run(sk: SenderKeys, rk: ReceiverKeys, src: RandomSource) -> tuple:
            seen = []

            def strategy(u: UMessage) -> VMessage:
                seen.append(u.values)
                return adv(u, sk)

            extracted = simulate_malicious_sender(strategy, sk, src)
            view = sender_view(sk, seen[0])
            if include_output:
                view += (ideal_functionality(xs, _t(extracted)),)
            return view

    dist = ViewDistribution()
    for weight, sk, rk in groups.values():
        for view, w in enumerate_outcomes(lambda src: run(sk, rk, src)):
            dist.add(view, weight * w)
    return dist


def exhaustive_correctness(x, y, params: SessionParams) -> int:
    """Check real count == ideal count for every dealer outcome; return outcomes checked."""
    xs, ys, outcomes = _prepare("receiver", x, y, params)
    want = ideal_functionality(xs, ys)
    for sk, rk, _ in outcomes:
        got = receiver_count(sender_respond(receiver_encode(xs, rk), ys, sk), rk)
        if got != want:
            raise AssertionError(f"count {got} != ideal {want} for keys {receiver_view(rk, [])}")
    return len(outcomes)


# -- chi-squared ---------------------------------------------------------------

@dataclass(frozen=True)
class UniformityResult:
    statistic: float
    p_value: float
    buckets: int
    passed: bool


def chi_squared_uniformity(
    samples,
    modulus: int,
    exclude: int | None = None,
    buckets: int = 256,
    alpha: float = 1e-3,
    min_expected: float = 20.0,
) -> UniformityResult:
    """Pearson test of ``samples`` against uniform on ``Z_modulus`` minus ``exclude``.

    Domains larger than ``buckets`` are split into equal-width value ranges
    (the last one shorter); expected counts use each range's exact size.
    """
    arr = np.asarray(samples, dtype=np.uint64)
    if arr.size and int(arr.max()) >= modulus:
        raise ParameterError("sample outside the domain")
    domain = modulus - (exclude is not None)
    if exclude is not None and (arr == np.uint64(exclude)).any():
        return UniformityResult(math.inf, 0.0, 0, False)
    if modulus <= buckets:
        sizes = np.ones(modulus)
        index = arr.astype(np.int64)
        width = 1
    else:
        width = -(-modulus // buckets)
        count = -(-modulus // width)
        sizes = np.full(count, float(width))
        sizes[-1] = modulus - width * (count - 1)
        index = (arr // np.uint64(width)).astype(np.int64)
    if exclude is not None:
        sizes[exclude // width] -= 1
    observed = np.bincount(index, minlength=len(sizes)).astype(float)
    keep = sizes > 0
    observed, sizes = observed[keep], sizes[keep]
    expected = arr.size * sizes / domain
    if arr.size == 0 or expected.min() < min_expected:
        raise ParameterError(
            f"too few samples: {arr.size} give {expected.min() if arr.size else 0:.1f} "
            f"expected per bucket, need {min_expected}"
        )
    stat, p = stats.chisquare(observed, expected)
    return UniformityResult(float(stat), float(p), int(len(sizes)), bool(p >= alpha))


# -- verification suites (used by the CLI) -------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _random_inputs(field: Field, n: int, rng: RandomSource, count: int) -> list[tuple[tuple, tuple]]:
    p = field.modulus
    pairs = [(tuple([1] * n), tuple([1] * n)), (tuple([0] * n), tuple([1] * n))]
    while len(pairs) < count:
        x = _t(rng.below(p, n))
        y = _t(rng.below(p, n))
        pairs.append((x, y))
    return pairs[:count]


def shifting_receiver(shift: int) -> ReceiverAdversary:
    """Malicious receiver that ignores its input and sends ``r + shift``."""

    def adv(rk: ReceiverKeys) -> UMessage:
        f = rk.field
        return UMessage(rk.session_id, f.vadd(rk.pads, np.full(rk.n, shift, dtype=np.uint64)))

    return adv


def constant_sender(value: int) -> SenderAdversary:
    """Malicious sender that replies with the same element everywhere."""
    return lambda u, sk: VMessage(u.session_id, np.full(sk.n, value, dtype=np.uint64))


def verify_security(modulus: int, n: int, pairs: int = 10, rng: RandomSource | None = None) -> list[CheckResult]:
    field = Field(modulus)
    params = SessionParams(n, field)
    rng = rng or SystemRandomSource()
    results = []
    for x, y in _random_inputs(field, n, rng, pairs):
        for corrupt in ("receiver", "sender"):
            real = enumerate_real_view(corrupt, x, y, params, include_output=True)
            sim = enumerate_sim_view(corrupt, x, y, params, include_output=True)
            ok = real == sim and real.total() == 1 and sim.total() == 1
            results.append(CheckResult(f"p={modulus} n={n} corrupt={corrupt} x={x} y={y}", ok,
                                       f"{len(real)} views"))
    x, y = _random_inputs(field, n, rng, 3)[2]
    for name, corrupt, adv in (
        ("shifting receiver", "receiver", shifting_receiver(1)),
        ("constant sender", "sender", constant_sender(0)),
    ):
        real = enumerate_real_view(corrupt, x, y, params, adv, include_output=True)
        sim = enumerate_sim_view(corrupt, x, y, params, adv, include_output=True)
        results.append(CheckResult(f"p={modulus} n={n} {name} x={x} y={y}", real == sim,
                                   f"{len(real)} views"))
    return results


def verify_correctness(trials: int, max_n: int = 512, rng: RandomSource | None = None,
                       field: Field = DEFAULT_FIELD) -> list[CheckResult]:
    """Random sessions with planted matches; count must equal the ideal count exactly."""
    rng = rng or SystemRandomSource()
    failures = 0
    identity_failures = 0
    for _ in range(trials):
        n = 1 + rng.randbelow(max_n)
        x = rng.below(field.modulus - 2, n)
        y = rng.below(field.modulus - 2, n)
        plant = rng.below(2, n).astype(bool)
        y[plant] = x[plant]
        skeys, rkeys = dealer_generate(SessionParams(n, field), rng)
        v = sender_respond(receiver_encode(x, rkeys), y, skeys)
        if receiver_count(v, rkeys) != ideal_functionality(x, y):
            failures += 1
        # v[Q(t)] - s[Q(t)] == a_t (x_t - y_t)
        q = skeys.q.mapping
        lhs = field.vsub(v.values[q], rkeys.expected[q])
        rhs = field.vmul(skeys.a, field.vsub(x, y))
        identity_failures += int(not np.array_equal(lhs, rhs))
    return [
        CheckResult(f"count equals ideal over {trials} sessions", failures == 0, f"{failures} failures"),
        CheckResult("per-position difference identity", identity_failures == 0,
                    f"{identity_failures} failures"),
    ]


def u_samples(x_label: int, count: int, rng: RandomSource, field: Field = DEFAULT_FIELD,
              per_session: int = 1000) -> np.ndarray:
    """``u_t`` values produced for a fixed input label across fresh sessions."""
    out = []
    remaining = count
    while remaining:
        n = min(per_session, remaining)
        _, rk = dealer_generate(SessionParams(n, field), rng)
        out.append(receiver_encode(np.full(n, x_label, dtype=np.uint64), rk).values)
        remaining -= n
    return np.concatenate(out)


def verify_uniformity(trials: int, rng: RandomSource | None = None,
                      field: Field = DEFAULT_FIELD) -> list[CheckResult]:
    rng = rng or SystemRandomSource()
    x_label = 140737496743936  # label of cell (0, 0)
    res_u = chi_squared_uniformity(u_samples(x_label, trials, rng, field), field.modulus)
    # mismatched positions: v - s = a (x - y) must be uniform on the nonzero elements
    diffs = []
    remaining = trials
    while remaining:
        n = min(1000, remaining)
        skeys, rkeys = dealer_generate(SessionParams(n, field), rng)
        x = np.full(n, x_label, dtype=np.uint64)
        y = np.full(n, x_label + 1, dtype=np.uint64)
        v = sender_respond(receiver_encode(x, rkeys), y, skeys)
        diffs.append(field.vsub(v.values, rkeys.expected))
        remaining -= n
    res_v = chi_squared_uniformity(np.concatenate(diffs), field.modulus, exclude=0)
    return [
        CheckResult(f"u uniform over Z_p ({trials} samples)", res_u.passed,
                    f"chi2={res_u.statistic:.1f} p={res_u.p_value:.4f}"),
        CheckResult(f"v - s uniform over Z_p minus 0 ({trials} samples)", res_v.passed,
                    f"chi2={res_v.statistic:.1f} p={res_v.p_value:.4f}"),
    ]


def seeded(seed: int | None) -> RandomSource:
    return SeededRandomSource(seed) if seed is not None else SystemRandomSource()
