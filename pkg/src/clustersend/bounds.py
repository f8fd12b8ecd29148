"""Lower bounds, protocol selection and the killing-assignment witness oracle."""

from __future__ import annotations

import enum
import logging
from collections import Counter
from dataclasses import asdict, dataclass, replace
from itertools import combinations
from math import comb
from typing import Hashable, List, Optional, Sequence, Tuple

from .model import (
    ConfigurationError,
    FailureModel,
    SigningScheme,
    SystemSpec,
    guarded_term,
    validate_system,
)

log = logging.getLogger(__name__)


class BoundKind(enum.Enum):
    SIGMA_SENDER_LARGER = "sigma1"
    SIGMA_RECEIVER_LARGER = "sigma2"
    TAU1 = "tau1"
    TAU2 = "tau2"


@dataclass(frozen=True)
class BoundReport:
    kind: BoundKind
    q: int
    r: int
    value: int
    applicable: bool = True
    side_condition: str = ""

    def to_json(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


def _decompose(kind: BoundKind, numerator: int, divisor: int, n_other: int, penalty: int):
    if divisor <= 0:
        raise ConfigurationError(
            f"{kind.value} undefined: divisor {divisor} <= 0 (too many faults)"
        )
    q, r = divmod(numerator, divisor)
    return BoundReport(kind, q, r, q * n_other + r + guarded_term(penalty, r))


def sigma1(spec: SystemSpec) -> BoundReport:
    n1, f1, n2, f2 = spec.counts
    return _decompose(BoundKind.SIGMA_SENDER_LARGER, f1 + 1, n2 - f2, n2, f2)


def sigma2(spec: SystemSpec) -> BoundReport:
    n1, f1, n2, f2 = spec.counts
    return _decompose(BoundKind.SIGMA_RECEIVER_LARGER, f2 + 1, n1 - f1, n1, f1)


def tau1(spec: SystemSpec) -> BoundReport:
    n1, f1, n2, f2 = spec.counts
    return _decompose(BoundKind.TAU1, 2 * f1 + 1, n2 - f2, n2, f2)


def tau2(spec: SystemSpec) -> BoundReport:
    n1, f1, n2, f2 = spec.counts
    return _decompose(BoundKind.TAU2, f2 + 1, n1 - 2 * f1, n1, 2 * f1)


def sigma(spec: SystemSpec) -> BoundReport:
    """Minimum number of inter-cluster messages under crash failures.

    Both counting arguments (top faulty receivers vs. faulty senders, and the
    mirrored one) bound every protocol regardless of which cluster is larger,
    so the report carries the larger of the two. When they tie, the index of
    the larger cluster is reported (cluster 1 on equal sizes).
    """
    n1, _, n2, _ = spec.counts
    s1, s2 = sigma1(spec), sigma2(spec)
    primary, other = (s1, s2) if n1 >= n2 else (s2, s1)
    if other.value > primary.value:
        primary, other = other, primary
    note = f"{other.kind.value}={other.value} (q={other.q}, r={other.r})"
    return replace(primary, side_condition=note)


def tau(spec: SystemSpec) -> BoundReport:
    """Minimum number of replica certificates under Byzantine failures."""
    n1, _, n2, _ = spec.counts
    applicable = (
        spec.failure_model is FailureModel.BYZANTINE and spec.signing.replica_signing
    )
    if n1 >= n2:
        report = tau1(spec)
        note = ""
        if n1 == n2:
            try:
                t2 = tau2(spec)
                note = f"tau2={t2.value} (q={t2.q}, r={t2.r})"
            except ConfigurationError as exc:
                note = f"tau2 undefined: {exc}"
    else:
        report = tau2(spec)
        note = ""
    if not applicable:
        note = "; ".join(filter(None, [note, "requires Byzantine failures with replica signing"]))
    return replace(report, applicable=applicable, side_condition=note)


# -- protocol selection -------------------------------------------------------


class Protocol(enum.Enum):
    RB_BCS = "rb-bcs"
    RB_BRS = "rb-brs"
    BS_BCS = "bs-bcs"
    BS_BRS = "bs-brs"
    SPBS = "spbs"
    RPBS = "rpbs"

    @property
    def partitioned(self) -> bool:
        return self in (Protocol.SPBS, Protocol.RPBS)


class Flavor(enum.Enum):
    BCS = "bcs"
    BRS = "brs"


_FIXED_FLAVOR = {
    Protocol.RB_BCS: Flavor.BCS,
    Protocol.BS_BCS: Flavor.BCS,
    Protocol.RB_BRS: Flavor.BRS,
    Protocol.BS_BRS: Flavor.BRS,
}


@dataclass(frozen=True)
class ProtocolChoice:
    """A protocol instance.

    `sender_set_size` and `receipt_threshold` are test hooks that override the
    sizes the protocol would choose; they exist to check that weakening a
    protocol is caught by the verification campaign.
    """

    protocol: Protocol
    alpha: Optional[int] = None
    flavor: Flavor = Flavor.BCS
    compact_certs: bool = False
    sender_set_size: Optional[int] = None
    receipt_threshold: Optional[int] = None

    def __post_init__(self):
        fixed = _FIXED_FLAVOR.get(self.protocol)
        if fixed is not None and self.flavor is not fixed:
            object.__setattr__(self, "flavor", fixed)

    @classmethod
    def of(cls, protocol: str | Protocol, flavor: str | Flavor | None = None, **kw):
        protocol = Protocol(protocol)
        flavor = Flavor(flavor) if flavor is not None else _FIXED_FLAVOR.get(protocol, Flavor.BCS)
        return cls(protocol, flavor=flavor, **kw)

    @property
    def mutated(self) -> bool:
        return self.sender_set_size is not None or self.receipt_threshold is not None

    @property
    def label(self) -> str:
        if self.protocol.partitioned:
            return f"{self.protocol.value}-({self.alpha},{self.flavor.value})"
        return self.protocol.value

    def to_json(self) -> dict:
        d = {
            "protocol": self.protocol.value,
            "alpha": self.alpha,
            "flavor": self.flavor.value,
            "compact_certs": self.compact_certs,
        }
        if self.sender_set_size is not None:
            d["sender_set_size"] = self.sender_set_size
        if self.receipt_threshold is not None:
            d["receipt_threshold"] = self.receipt_threshold
        return d

    @classmethod
    def from_json(cls, data: dict) -> "ProtocolChoice":
        allowed = {
            "protocol", "alpha", "flavor", "compact_certs",
            "sender_set_size", "receipt_threshold",
        }
        unknown = set(data) - allowed
        if unknown:
            raise ConfigurationError(f"unknown protocol fields: {sorted(unknown)}")
        return cls.of(
            data["protocol"],
            data.get("flavor"),
            alpha=data.get("alpha"),
            compact_certs=bool(data.get("compact_certs", False)),
            sender_set_size=data.get("sender_set_size"),
            receipt_threshold=data.get("receipt_threshold"),
        )


class NoApplicableProtocol(ConfigurationError):
    """No cluster-sending protocol has its preconditions met."""


def flavor_for(spec: SystemSpec) -> Flavor:
    """Certificate flavor matching the environment.

    Replica signing under Byzantine failures gets the replica-certificate
    protocols; every other setting uses cluster certificates (native,
    emulated, or omitted when faults are benign).
    """
    if spec.failure_model is FailureModel.BYZANTINE and spec.signing is SigningScheme.REPLICA:
        return Flavor.BRS
    return Flavor.BCS


def partition_alpha(spec: SystemSpec, protocol: Protocol, flavor: Flavor) -> BoundReport:
    if protocol is Protocol.SPBS:
        return sigma1(spec) if flavor is Flavor.BCS else tau1(spec)
    if protocol is Protocol.RPBS:
        return sigma2(spec) if flavor is Flavor.BCS else tau2(spec)
    raise ValueError(f"{protocol.value} is not partitioned")


def resolve(spec: SystemSpec, choice: ProtocolChoice) -> ProtocolChoice:
    """Fill in alpha for partitioned protocols."""
    if choice.protocol.partitioned and choice.alpha is None:
        return replace(choice, alpha=partition_alpha(spec, choice.protocol, choice.flavor).value)
    return choice


def preconditions(spec: SystemSpec, choice: ProtocolChoice) -> List[str]:
    """Violated preconditions of running `choice` on `spec` (empty = runnable)."""
    problems = list(validate_system(spec))
    if problems:
        return problems
    n1, f1, n2, f2 = spec.counts
    flavor = choice.flavor
    byz = spec.failure_model is FailureModel.BYZANTINE
    if flavor is Flavor.BRS and not spec.signing.replica_signing:
        problems.append("brs protocols need replica signing")
    if flavor is Flavor.BCS and byz and spec.signing is SigningScheme.NONE:
        problems.append("bcs protocols under Byzantine failures need (emulated) cluster signing")

    p = choice.protocol
    if p is Protocol.BS_BCS:
        if not n1 > f1 + f2:
            problems.append(f"n1 > f1 + f2 fails ({n1} <= {f1 + f2})")
        if not n2 > f1 + f2:
            problems.append(f"n2 > f1 + f2 fails ({n2} <= {f1 + f2})")
    elif p is Protocol.BS_BRS:
        if not n1 > 2 * f1 + f2:
            problems.append(f"n1 > 2f1 + f2 fails ({n1} <= {2 * f1 + f2})")
        if not n2 > 2 * f1 + f2:
            problems.append(f"n2 > 2f1 + f2 fails ({n2} <= {2 * f1 + f2})")
    elif p.partitioned:
        try:
            bound = partition_alpha(spec, p, flavor)
        except ConfigurationError as exc:
            problems.append(str(exc))
            return problems
        size = n1 if p is Protocol.SPBS else n2
        alpha = bound.value if choice.alpha is None else choice.alpha
        if alpha != bound.value:
            problems.append(f"alpha must equal {bound.kind.value}={bound.value}, got {alpha}")
        if alpha > size:
            side = "n1" if p is Protocol.SPBS else "n2"
            problems.append(f"alpha <= {side} fails ({alpha} > {size})")
    if choice.sender_set_size is not None:
        s = choice.sender_set_size
        limit = min(n1, n2) if p in (Protocol.BS_BCS, Protocol.BS_BRS) else n1
        if p.partitioned:
            problems.append("sender_set_size does not apply to partitioned protocols")
        elif not 1 <= s <= limit:
            problems.append(f"sender_set_size {s} out of range 1..{limit}")
    return problems


def linear_robust(spec: SystemSpec, flavor: Flavor) -> bool:
    """Blanket robustness condition of the linear protocols: n > 3f (bcs) or n > 4f (brs)."""
    k = 3 if flavor is Flavor.BCS else 4
    return spec.c1.n > k * spec.c1.f and spec.c2.n > k * spec.c2.f


def select_protocol(spec: SystemSpec, compact_certs: bool = False) -> ProtocolChoice:
    """Pick the cheapest protocol whose preconditions hold on `spec`.

    Bijective sending when both clusters are large enough, sender- or
    receiver-partitioned bijective sending when one side is too small,
    reliable broadcast otherwise.
    """
    problems = validate_system(spec)
    if problems:
        raise NoApplicableProtocol("; ".join(problems))
    flavor = flavor_for(spec)
    n1, f1, n2, f2 = spec.counts
    need = f1 + f2 if flavor is Flavor.BCS else 2 * f1 + f2
    bs = Protocol.BS_BCS if flavor is Flavor.BCS else Protocol.BS_BRS
    rb = Protocol.RB_BCS if flavor is Flavor.BCS else Protocol.RB_BRS
    compact = compact_certs and flavor is Flavor.BRS

    candidates = [ProtocolChoice(bs, flavor=flavor, compact_certs=compact)]
    partitioned = [Protocol.SPBS, Protocol.RPBS]
    if n1 <= need and n2 > need:
        partitioned.reverse()
    for p in partitioned:
        try:
            alpha = partition_alpha(spec, p, flavor).value
        except ConfigurationError:
            continue
        candidates.append(ProtocolChoice(p, alpha=alpha, flavor=flavor, compact_certs=compact))
    candidates.append(ProtocolChoice(rb, flavor=flavor, compact_certs=False))

    for choice in candidates:
        if not preconditions(spec, choice):
            return choice
    raise NoApplicableProtocol(f"no protocol applies to {spec.counts}")


def message_formula(spec: SystemSpec, choice: ProtocolChoice) -> int:
    """Closed-form inter-cluster message count of an (unmutated) protocol."""
    n1, f1, n2, f2 = spec.counts
    p = choice.protocol
    if p is Protocol.RB_BCS:
        return (f1 + 1) * (f2 + 1)
    if p is Protocol.RB_BRS:
        return (2 * f1 + 1) * (f2 + 1)
    if p is Protocol.BS_BCS:
        return f1 + f2 + 1
    if p is Protocol.BS_BRS:
        return 2 * f1 + f2 + 1
    return partition_alpha(spec, p, choice.flavor).value


# -- witness oracle -----------------------------------------------------------


@dataclass(frozen=True)
class KillingAssignment:
    """Faulty senders and receivers that together touch every scheduled message."""

    senders: frozenset
    receivers: frozenset
    method: str = "exact"


#: Above this many candidate subsets the exact search is skipped.
EXACT_SEARCH_LIMIT = 200_000


def killing_assignment(
    schedule: Sequence[Tuple[Hashable, Hashable]],
    f1: int,
    f2: int,
    exact_limit: int = EXACT_SEARCH_LIMIT,
) -> Optional[KillingAssignment]:
    """Find <= f1 faulty senders and <= f2 faulty receivers covering `schedule`.

    The greedy fast path faults the `f2` busiest receivers (and, mirrored,
    the `f1` busiest senders). If that fails, subsets of the side with fewer
    candidates are enumerated exactly. Returns None when no assignment
    exists. If the exact search is over `exact_limit` the answer is only
    heuristic and a warning is logged.
    """
    edges = list(schedule)
    if not edges:
        return KillingAssignment(frozenset(), frozenset(), "greedy")

    found = _greedy(edges, f1, f2)
    if found is not None:
        return found

    senders = sorted(set(s for s, _ in edges), key=repr)
    receivers = sorted(set(r for _, r in edges), key=repr)
    k_r, k_s = min(f2, len(receivers)), min(f1, len(senders))
    by_receivers = comb(len(receivers), k_r)
    by_senders = comb(len(senders), k_s)
    if min(by_receivers, by_senders) > exact_limit:
        log.warning("killing_assignment: exact search skipped, result is heuristic")
        return None

    if by_receivers <= by_senders:
        for dead in combinations(receivers, k_r):
            dead = frozenset(dead)
            alive = {s for s, r in edges if r not in dead}
            if len(alive) <= f1:
                return KillingAssignment(frozenset(alive), dead, "exact")
    else:
        for dead in combinations(senders, k_s):
            dead = frozenset(dead)
            alive = {r for s, r in edges if s not in dead}
            if len(alive) <= f2:
                return KillingAssignment(dead, frozenset(alive), "exact")
    return None


def _greedy(edges, f1: int, f2: int) -> Optional[KillingAssignment]:
    by_receiver = Counter(r for _, r in edges)
    top = frozenset(r for r, _ in _ranked(by_receiver)[:f2])
    alive = {s for s, r in edges if r not in top}
    if len(alive) <= f1:
        return KillingAssignment(frozenset(alive), top, "greedy")
    by_sender = Counter(s for s, _ in edges)
    top = frozenset(s for s, _ in _ranked(by_sender)[:f1])
    alive = {r for s, r in edges if s not in top}
    if len(alive) <= f2:
        return KillingAssignment(top, frozenset(alive), "greedy")
    return None


def _ranked(counter: Counter):
    return sorted(counter.items(), key=lambda kv: (-kv[1], repr(kv[0])))


class ScheduleCapExceeded(Exception):
    """No schedule up to the cap survives every fault assignment."""


MAX_ORACLE_CLUSTER = 5


def min_schedule_size(n1: int, f1: int, n2: int, f2: int, cap: int) -> int:
    """Smallest m <= cap such that some m-message schedule has no killing assignment.

    Exhaustive and independent of the closed-form bounds. Repeating a
    (sender, receiver) pair never helps, since both copies die together, so
    schedules are edge sets of the complete bipartite graph. Only edge sets
    whose row and column degrees are non-increasing are checked: any schedule
    can be relabelled into that form without changing whether it survives.
    """
    if max(n1, n2) > MAX_ORACLE_CLUSTER:
        raise ConfigurationError(f"oracle limited to clusters of <= {MAX_ORACLE_CLUSTER}")
    if n1 - f1 < 1 or n2 - f2 < 1:
        raise ConfigurationError("both clusters need a non-faulty replica")
    pairs = [(s, r) for s in range(n1) for r in range(n2)]
    for m in range(1, min(cap, len(pairs)) + 1):
        for chosen in combinations(range(len(pairs)), m):
            schedule = [pairs[k] for k in chosen]
            if not _degrees_sorted(schedule, n1, n2):
                continue
            if killing_assignment(schedule, f1, f2) is None:
                return m
    raise ScheduleCapExceeded(f"no surviving schedule with <= {cap} messages")


def _degrees_sorted(schedule, n1: int, n2: int) -> bool:
    rows = [0] * n1
    cols = [0] * n2
    for s, r in schedule:
        rows[s] += 1
        cols[r] += 1
    return all(a >= b for a, b in zip(rows, rows[1:])) and all(
        a >= b for a, b in zip(cols, cols[1:])
    )
