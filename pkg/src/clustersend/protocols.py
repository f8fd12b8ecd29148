"""The cluster-sending protocols: sender-side plans and receiver-side handlers.

A protocol is split in two. The sender side is a `Plan`, a fixed list of
inter-cluster sends computed from the clusters' sizes and fault bounds only
(never from the actual fault assignment). The receiver side is
`ReceiverState`, the event handlers a replica of the receiving cluster runs.
Execution, scheduling and adversaries live in :mod:`clustersend.sim`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .bounds import Flavor, Protocol, ProtocolChoice, resolve, sigma1, sigma2
from .certs import Certificate, CertificateLedger, SizeBreakdown
from .model import (
    ClusterView,
    ConfigurationError,
    FailureModel,
    ReplicaId,
    SigningScheme,
    SystemSpec,
)


@dataclass(frozen=True)
class Partition:
    parts: Tuple[Tuple[ReplicaId, ...], ...]
    remainder: Tuple[ReplicaId, ...]
    c: int

    def nonempty(self) -> Tuple[Tuple[ReplicaId, ...], ...]:
        return self.parts + ((self.remainder,) if self.remainder else ())


def c_partition(replicas: Sequence[ReplicaId], c: int, policy: str = "ascending") -> Partition:
    """Split `replicas` into ``len // c`` parts of size `c` plus a remainder."""
    if c <= 0:
        raise ValueError("part size must be positive")
    if policy != "ascending":
        raise ValueError(f"unknown selection policy {policy!r}")
    members = sorted(replicas)
    q = len(members) // c
    parts = tuple(tuple(members[i * c:(i + 1) * c]) for i in range(q))
    return Partition(parts, tuple(members[q * c:]), c)


@dataclass(frozen=True)
class Bijection:
    pairs: Tuple[Tuple[ReplicaId, ReplicaId], ...]

    def __post_init__(self):
        sources = [a for a, _ in self.pairs]
        targets = [b for _, b in self.pairs]
        if len(set(sources)) != len(sources) or len(set(targets)) != len(targets):
            raise ValueError("bijection endpoints must be distinct")

    @classmethod
    def in_order(cls, sources: Sequence[ReplicaId], targets: Sequence[ReplicaId]) -> "Bijection":
        if len(sources) != len(targets):
            raise ValueError("bijection needs equally sized sets")
        return cls(tuple(zip(sources, targets)))

    def __call__(self, source: ReplicaId) -> ReplicaId:
        return dict(self.pairs)[source]


@dataclass(frozen=True)
class Send:
    sender: ReplicaId
    receiver: ReplicaId
    with_value: bool = True


@dataclass(frozen=True)
class Plan:
    choice: ProtocolChoice
    sends: Tuple[Send, ...]
    threshold: int

    @property
    def flavor(self) -> Flavor:
        return self.choice.flavor

    def sends_of(self, sender: ReplicaId) -> List[int]:
        return [k for k, s in enumerate(self.sends) if s.sender == sender]


# -- sender side --------------------------------------------------------------


def _rb_sends(c1: ClusterView, c2: ClusterView, k1: int) -> List[Send]:
    s1, s2 = c1.first(k1), c2.first(c2.f + 1)
    return [Send(a, b) for a in s1 for b in s2]


def _bs_sends(c1: ClusterView, c2: ClusterView, k: int, with_value: int) -> List[Send]:
    b = Bijection.in_order(c1.first(k), c2.first(k))
    return [Send(a, t, i < with_value) for i, (a, t) in enumerate(b.pairs)]


def _spbs_sends(c1: ClusterView, c2: ClusterView, alpha: int, with_value: int) -> List[Send]:
    sends = []
    for part in c_partition(c1.first(alpha), c2.n).nonempty():
        b = Bijection.in_order(part, c2.first(len(part)))
        sends.extend(Send(a, t) for a, t in b.pairs)
    return [Send(s.sender, s.receiver, k < with_value) for k, s in enumerate(sends)]


def _rpbs_sends(c1: ClusterView, c2: ClusterView, alpha: int, with_value: int) -> List[Send]:
    sends = []
    for part in c_partition(c2.first(alpha), c1.n).nonempty():
        b = Bijection.in_order(c1.first(len(part)), part)
        sends.extend(Send(a, t) for a, t in b.pairs)
    return [Send(s.sender, s.receiver, k < with_value) for k, s in enumerate(sends)]


def build_plan(choice: ProtocolChoice, c1: ClusterView, c2: ClusterView) -> Plan:
    """Sender-side schedule of `choice`, computed from cluster views only."""
    f1, f2 = c1.f, c2.f
    counts = SystemSpec.of(c1.n, f1, c2.n, f2)
    choice = resolve(counts, choice)
    brs = choice.flavor is Flavor.BRS
    threshold = choice.receipt_threshold or (f1 + 1 if brs else 1)
    p = choice.protocol
    compact = choice.compact_certs and brs

    if p in (Protocol.RB_BCS, Protocol.RB_BRS):
        k1 = choice.sender_set_size or (2 * f1 + 1 if brs else f1 + 1)
        sends = _rb_sends(c1, c2, k1)
    elif p in (Protocol.BS_BCS, Protocol.BS_BRS):
        k = choice.sender_set_size or (2 * f1 + f2 + 1 if brs else f1 + f2 + 1)
        sends = _bs_sends(c1, c2, k, f1 + f2 + 1 if compact else k)
    elif p is Protocol.SPBS:
        payload = sigma1(counts).value if compact else choice.alpha
        sends = _spbs_sends(c1, c2, choice.alpha, payload)
    elif p is Protocol.RPBS:
        payload = sigma2(counts).value if compact else choice.alpha
        sends = _rpbs_sends(c1, c2, choice.alpha, payload)
    else:
        raise ConfigurationError(f"unknown protocol {p}")
    return Plan(choice, tuple(sends), threshold)


# -- messages -----------------------------------------------------------------


@dataclass(frozen=True)
class Envelope:
    """One message. `value` is always the subject digest; `has_payload` says
    whether the value itself travels with it (compact certificates omit it)."""

    sender: ReplicaId
    receiver: ReplicaId
    value: bytes
    certs: Tuple[Certificate, ...] = ()
    has_payload: bool = True
    kind: str = "protocol"

    @property
    def inter_cluster(self) -> bool:
        return self.sender.cluster != self.receiver.cluster

    @property
    def size(self) -> SizeBreakdown:
        total = SizeBreakdown(value_bytes=len(self.value) if self.has_payload else 0)
        for cert in self.certs:
            total = total + cert.size
        return total


def cert_mode(spec: SystemSpec, flavor: Flavor) -> str:
    """How envelopes of `flavor` are certified under `spec`'s signing scheme.

    One of "replica", "cluster", "emulated" or "none". Certificates add
    nothing when faults are benign, so they are left out when the scheme
    cannot supply cluster certificates.
    """
    if flavor is Flavor.BRS:
        if not spec.signing.replica_signing:
            raise ConfigurationError("brs protocols need replica signing")
        return "replica"
    if spec.signing is SigningScheme.CLUSTER:
        return "cluster"
    if spec.signing is SigningScheme.EMULATED:
        return "emulated"
    if spec.failure_model is FailureModel.BYZANTINE:
        if spec.signing is SigningScheme.REPLICA:
            return "emulated"
        raise ConfigurationError("bcs under Byzantine failures needs cluster signing")
    return "none"


# -- receiver side ------------------------------------------------------------


@dataclass
class ReceiverState:
    """Event handlers and state of one replica of the receiving cluster."""

    replica: ReplicaId
    mode: str
    threshold: int
    ledger: CertificateLedger
    received: Set[bytes] = field(default_factory=set)
    relayed: Set[tuple] = field(default_factory=set)
    tallies: Dict[bytes, Set[ReplicaId]] = field(default_factory=dict)
    payloads: Set[bytes] = field(default_factory=set)

    def _valid(self, env: Envelope) -> List[Optional[Certificate]]:
        if self.mode == "none":
            return [None] if env.has_payload else []
        return [c for c in env.certs if self.ledger.verify(c, env.value, 1)]

    def on_inter(self, env: Envelope) -> List[Tuple[bytes, Tuple[Certificate, ...], bool]]:
        """A message from the sending cluster; returns what to broadcast locally."""
        out = []
        for cert in self._valid(env):
            key = (env.value, cert, env.has_payload)
            if key in self.relayed:
                continue
            self.relayed.add(key)
            out.append((env.value, () if cert is None else (cert,), env.has_payload))
        return out

    def on_local(self, env: Envelope) -> bool:
        """A message relayed within the receiving cluster; True if newly received."""
        if env.value in self.received:
            return False
        valid = self._valid(env)
        if not valid:
            return False
        if self.mode != "replica":
            self.received.add(env.value)
            return True
        tally = self.tallies.setdefault(env.value, set())
        tally.update(c.signer for c in valid)
        if env.has_payload:
            self.payloads.add(env.value)
        if len(tally) >= self.threshold and env.value in self.payloads:
            self.received.add(env.value)
            return True
        return False


# -- protocol entry points ----------------------------------------------------


def _execute(spec: SystemSpec, choice: ProtocolChoice, value: bytes, ctx):
    from .sim import RunContext

    ctx = ctx or RunContext()
    return ctx.run(spec, choice, value)


def rb_bcs(spec: SystemSpec, value: bytes, ctx=None):
    """Reliable-broadcast sending with cluster certificates."""
    return _execute(spec, ProtocolChoice(Protocol.RB_BCS), value, ctx)


def rb_brs(spec: SystemSpec, value: bytes, ctx=None):
    """Reliable-broadcast sending with replica certificates."""
    return _execute(spec, ProtocolChoice(Protocol.RB_BRS, flavor=Flavor.BRS), value, ctx)


def bs_bcs(spec: SystemSpec, value: bytes, ctx=None):
    return _execute(spec, ProtocolChoice(Protocol.BS_BCS), value, ctx)


def bs_brs(spec: SystemSpec, value: bytes, ctx=None, compact: bool = False):
    choice = ProtocolChoice(Protocol.BS_BRS, flavor=Flavor.BRS, compact_certs=compact)
    return _execute(spec, choice, value, ctx)


def spbs(spec: SystemSpec, value: bytes, alpha: Optional[int] = None,
         flavor: Flavor | str = Flavor.BCS, ctx=None, compact: bool = False):
    choice = ProtocolChoice(Protocol.SPBS, alpha=alpha, flavor=Flavor(flavor), compact_certs=compact)
    return _execute(spec, choice, value, ctx)


def rpbs(spec: SystemSpec, value: bytes, alpha: Optional[int] = None,
         flavor: Flavor | str = Flavor.BCS, ctx=None, compact: bool = False):
    choice = ProtocolChoice(Protocol.RPBS, alpha=alpha, flavor=Flavor(flavor), compact_certs=compact)
    return _execute(spec, choice, value, ctx)
