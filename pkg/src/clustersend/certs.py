"""Simulated certificates.

Certificates are ledger entries, not cryptography. Non-forgeability is
enforced structurally: a certificate verifies only if the run's ledger issued
it, and the ledger refuses to issue anything a non-faulty replica (or a
cluster's non-faulty majority) did not agree to.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Set, Tuple

from .model import (
    ConfigurationError,
    IntegrityError,
    ReplicaId,
    SigningScheme,
    SystemSpec,
)

#: Size of one signature in abstract units.
SIG_UNIT = 1


@dataclass(frozen=True)
class SizeBreakdown:
    value_bytes: int = 0
    replica_sig_count: int = 0
    cluster_sig_count: int = 0

    def total(self, unit: int = SIG_UNIT) -> int:
        return self.value_bytes + unit * (self.replica_sig_count + self.cluster_sig_count)

    def __add__(self, other: "SizeBreakdown") -> "SizeBreakdown":
        return SizeBreakdown(
            self.value_bytes + other.value_bytes,
            self.replica_sig_count + other.replica_sig_count,
            self.cluster_sig_count + other.cluster_sig_count,
        )


class SignerKind(enum.Enum):
    REPLICA = "replica"
    CLUSTER = "cluster"
    EMULATED = "emulated"


@dataclass(frozen=True)
class Certificate:
    subject: bytes
    kind: SignerKind
    cluster: int
    signers: Tuple[ReplicaId, ...] = ()
    parts: Tuple["Certificate", ...] = ()

    def __hash__(self) -> int:
        # certificates are hashed constantly by the ledger; compute once
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.subject, self.kind, self.cluster, self.signers, self.parts))
            object.__setattr__(self, "_hash", h)
        return h

    @property
    def signer(self) -> ReplicaId:
        if self.kind is not SignerKind.REPLICA:
            raise AttributeError("only replica certificates have a single signer")
        return self.signers[0]

    @property
    def size(self) -> SizeBreakdown:
        if self.kind is SignerKind.CLUSTER:
            return SizeBreakdown(cluster_sig_count=1)
        return SizeBreakdown(replica_sig_count=len(self.signers))

    def to_json(self) -> dict:
        return {
            "subject": self.subject.hex(),
            "kind": self.kind.value,
            "cluster": self.cluster,
            "signers": [r.to_json() for r in self.signers],
        }


def bundle(parts: Iterable[Certificate]) -> Certificate:
    """Group replica certificates into an emulated cluster certificate.

    Nothing is checked here; `CertificateLedger.verify` decides whether the
    bundle is acceptable.
    """
    parts = tuple(parts)
    if not parts:
        raise ValueError("an emulated certificate needs at least one part")
    if any(p.kind is not SignerKind.REPLICA for p in parts):
        raise ValueError("emulated certificates bundle replica certificates only")
    return Certificate(
        subject=parts[0].subject,
        kind=SignerKind.EMULATED,
        cluster=parts[0].cluster,
        signers=tuple(p.signer for p in parts),
        parts=parts,
    )


@dataclass
class CertificateLedger:
    """Per-run record of agreed values and issued certificates."""

    spec: SystemSpec
    unit: int = SIG_UNIT
    agreed: Dict[int, Set[bytes]] = field(default_factory=lambda: {1: set(), 2: set()})
    issued: Set[Certificate] = field(default_factory=set)

    def agree(self, cluster: int, value: bytes) -> None:
        """Atomic intra-cluster agreement on `value` (consensus is abstracted)."""
        c = self.spec.cluster(cluster)
        if not c.n > 2 * c.f:
            raise ConfigurationError(
                f"agreement in C{cluster} needs n > 2f (n={c.n}, f={c.f})"
            )
        self.agreed[cluster].add(value)

    def sign_replica(self, replica: ReplicaId, value: bytes) -> Certificate:
        if not self.spec.signing.replica_signing:
            raise ConfigurationError(f"{self.spec.signing.value} signing has no replica certificates")
        if not self.spec.is_faulty(replica) and value not in self.agreed[replica.cluster]:
            raise IntegrityError(
                f"non-faulty {replica} asked to sign non-agreed value {value.hex()}"
            )
        cert = Certificate(value, SignerKind.REPLICA, replica.cluster, (replica,))
        self.issued.add(cert)
        return cert

    def sign_cluster(self, cluster: int, value: bytes) -> Certificate:
        if value not in self.agreed[cluster]:
            raise IntegrityError(
                f"C{cluster} cannot cluster-sign {value.hex()}: no agreement"
            )
        scheme = self.spec.signing
        if scheme is SigningScheme.CLUSTER:
            cert = Certificate(value, SignerKind.CLUSTER, cluster)
            self.issued.add(cert)
            return cert
        if scheme.replica_signing:
            # emulation: f + 1 replica certificates stand in for one cluster certificate
            c = self.spec.cluster(cluster)
            signers = self.spec.nonfaulty(cluster)[: c.f + 1]
            return bundle(self.sign_replica(r, value) for r in signers)
        raise ConfigurationError(f"{scheme.value} signing cannot produce cluster certificates")

    def verify(self, cert: Certificate, value: bytes, cluster: int) -> bool:
        if cert.subject != value or cert.cluster != cluster:
            return False
        if cert.kind is SignerKind.EMULATED:
            needed = self.spec.cluster(cluster).f + 1
            distinct = {p.signer for p in cert.parts}
            if len(distinct) < needed:
                return False
            return all(self.verify(p, value, cluster) for p in cert.parts)
        if cert.kind is SignerKind.REPLICA and cert.signer.cluster != cluster:
            return False
        return cert in self.issued

    def signers_of(self, value: bytes, cluster: int = 1) -> FrozenSet[ReplicaId]:
        """Replicas holding an issued replica certificate for `value`."""
        return frozenset(
            c.signer
            for c in self.issued
            if c.kind is SignerKind.REPLICA and c.subject == value and c.cluster == cluster
        )
