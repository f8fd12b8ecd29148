"""Replicas, clusters, fault assignments and system-level validity checks."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple


class ConfigurationError(ValueError):
    """A system or protocol configuration violates a precondition."""


class IntegrityError(RuntimeError):
    """A non-faulty replica was asked to act outside its protocol script."""


class FailureModel(enum.Enum):
    CRASH = "crash"
    OMIT = "omit"
    BYZANTINE = "byzantine"

    @property
    def power(self) -> int:
        return _POWER[self]

    def at_least(self, other: "FailureModel") -> bool:
        """True if every behaviour legal under `other` is legal under self."""
        return self.power >= other.power


_POWER = {FailureModel.CRASH: 0, FailureModel.OMIT: 1, FailureModel.BYZANTINE: 2}


class SigningScheme(enum.Enum):
    NONE = "none"
    REPLICA = "replica"
    CLUSTER = "cluster"
    EMULATED = "emulated"

    @property
    def replica_signing(self) -> bool:
        return self in (SigningScheme.REPLICA, SigningScheme.EMULATED)


@dataclass(frozen=True, order=True)
class ReplicaId:
    cluster: int
    index: int

    def __str__(self) -> str:
        return f"c{self.cluster}r{self.index}"

    def to_json(self) -> List[int]:
        return [self.cluster, self.index]

    @classmethod
    def from_json(cls, data) -> "ReplicaId":
        cluster, index = data
        return cls(int(cluster), int(index))


@dataclass(frozen=True)
class ClusterView:
    """What protocol code is allowed to see of a cluster: its size and fault bound."""

    cluster: int
    n: int
    f: int

    @property
    def nf(self) -> int:
        return self.n - self.f

    def replicas(self) -> Tuple[ReplicaId, ...]:
        return tuple(ReplicaId(self.cluster, i) for i in range(self.n))

    def first(self, k: int) -> Tuple[ReplicaId, ...]:
        if k > self.n:
            raise ConfigurationError(
                f"cluster {self.cluster} has {self.n} replicas, cannot choose {k}"
            )
        return self.replicas()[:k]


@dataclass(frozen=True)
class ClusterSpec:
    """A cluster of `n` replicas tolerating `f` faults.

    `faulty` is the actual fault assignment F(C) of a run, a set of indices
    of size at most `f`. It defaults to empty.
    """

    n: int
    f: int
    faulty: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "faulty", frozenset(int(i) for i in self.faulty))

    @property
    def nf(self) -> int:
        return self.n - self.f

    def view(self, cluster: int) -> ClusterView:
        return ClusterView(cluster, self.n, self.f)

    def is_faulty(self, index: int) -> bool:
        return index in self.faulty

    def with_faulty(self, faulty: Iterable[int]) -> "ClusterSpec":
        return ClusterSpec(self.n, self.f, frozenset(faulty))

    def census(self, indices: Optional[Iterable[int]] = None) -> Tuple[int, int, int]:
        """(n, f, nf) of `indices` (default: the whole cluster) under the assignment."""
        members = set(range(self.n)) if indices is None else set(indices)
        bad = len(members & self.faulty)
        return len(members), bad, len(members) - bad

    def to_json(self) -> dict:
        return {"n": self.n, "f": self.f, "faulty": sorted(self.faulty)}

    @classmethod
    def from_json(cls, data: dict) -> "ClusterSpec":
        unknown = set(data) - {"n", "f", "faulty"}
        if unknown:
            raise ConfigurationError(f"unknown cluster fields: {sorted(unknown)}")
        return cls(int(data["n"]), int(data["f"]), frozenset(data.get("faulty", ())))


@dataclass(frozen=True)
class SystemSpec:
    """Sender cluster `c1`, receiver cluster `c2`, failure model and signing."""

    c1: ClusterSpec
    c2: ClusterSpec
    failure_model: FailureModel = FailureModel.BYZANTINE
    signing: SigningScheme = SigningScheme.CLUSTER

    @classmethod
    def of(
        cls,
        n1: int,
        f1: int,
        n2: int,
        f2: int,
        failure_model: FailureModel | str = FailureModel.BYZANTINE,
        signing: SigningScheme | str = SigningScheme.CLUSTER,
    ) -> "SystemSpec":
        return cls(
            ClusterSpec(n1, f1),
            ClusterSpec(n2, f2),
            FailureModel(failure_model),
            SigningScheme(signing),
        )

    def cluster(self, k: int) -> ClusterSpec:
        if k == 1:
            return self.c1
        if k == 2:
            return self.c2
        raise KeyError(k)

    def view(self, k: int) -> ClusterView:
        return self.cluster(k).view(k)

    def is_faulty(self, replica: ReplicaId) -> bool:
        return self.cluster(replica.cluster).is_faulty(replica.index)

    def nonfaulty(self, k: int) -> Tuple[ReplicaId, ...]:
        c = self.cluster(k)
        return tuple(ReplicaId(k, i) for i in range(c.n) if i not in c.faulty)

    def faulty(self, k: int) -> Tuple[ReplicaId, ...]:
        return tuple(ReplicaId(k, i) for i in sorted(self.cluster(k).faulty))

    def with_placement(self, f1: Iterable[int], f2: Iterable[int]) -> "SystemSpec":
        return SystemSpec(
            self.c1.with_faulty(f1), self.c2.with_faulty(f2), self.failure_model, self.signing
        )

    @property
    def counts(self) -> Tuple[int, int, int, int]:
        return self.c1.n, self.c1.f, self.c2.n, self.c2.f

    def to_json(self) -> dict:
        return {
            "c1": self.c1.to_json(),
            "c2": self.c2.to_json(),
            "failure_model": self.failure_model.value,
            "signing": self.signing.value,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SystemSpec":
        unknown = set(data) - {"c1", "c2", "failure_model", "signing"}
        if unknown:
            raise ConfigurationError(f"unknown system fields: {sorted(unknown)}")
        return cls(
            ClusterSpec.from_json(data["c1"]),
            ClusterSpec.from_json(data["c2"]),
            FailureModel(data.get("failure_model", "byzantine")),
            SigningScheme(data.get("signing", "cluster")),
        )


def guarded_term(i: int, j: int) -> int:
    """``i`` if ``j > 0`` else 0."""
    if i < 0 or j < 0:
        raise ValueError("guarded_term expects non-negative arguments")
    return i if j > 0 else 0


def validate_system(spec: SystemSpec) -> List[str]:
    """Return the violated constraints of `spec`; an empty list means valid."""
    problems = []
    for k in (1, 2):
        c = spec.cluster(k)
        if c.n < 1:
            problems.append(f"n{k} >= 1 fails: n{k}={c.n}")
        if c.f < 0:
            problems.append(f"f{k} >= 0 fails: f{k}={c.f}")
        if c.nf < 1:
            problems.append(f"nf{k} >= 1 fails: n{k}={c.n}, f{k}={c.f}")
        if len(c.faulty) > c.f:
            problems.append(f"|F(C{k})| <= f{k} fails: {len(c.faulty)} > {c.f}")
        out_of_range = [i for i in c.faulty if not 0 <= i < c.n]
        if out_of_range:
            problems.append(f"faulty indices of C{k} out of range: {sorted(out_of_range)}")
    if not spec.c1.n > 2 * spec.c1.f:
        problems.append(f"n1 > 2f1 fails: n1={spec.c1.n}, f1={spec.c1.f}")
    if spec.signing is SigningScheme.NONE and spec.failure_model is FailureModel.BYZANTINE:
        problems.append("signing 'none' requires crash or omit failures")
    # Clusters are indexed 1 and 2 and ReplicaId carries the index, so the
    # replica sets are disjoint by construction.
    return problems
