"""Deterministic execution of cluster-sending runs under adversaries.

The network is asynchronous and reliable: every envelope between non-faulty
replicas is delivered, in an order chosen by a `Schedule`. Faulty replicas
act through an `AdversaryTrace` (omitted envelopes, crashes, and, under
Byzantine failures, injected envelopes carrying forged or replayed
certificates).
"""

from __future__ import annotations

import json
import os
import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations, islice
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .bounds import (
    Flavor,
    ProtocolChoice,
    message_formula,
    preconditions,
    resolve,
    select_protocol,
)
from .certs import SIG_UNIT, Certificate, CertificateLedger, SignerKind, bundle
from .model import (
    ConfigurationError,
    FailureModel,
    IntegrityError,
    ReplicaId,
    SystemSpec,
)
from .protocols import Envelope, Plan, ReceiverState, build_plan, cert_mode


class IllegalTrace(ValueError):
    """An adversary trace does things its failure model does not allow."""


@dataclass(frozen=True, order=True)
class Placement:
    c1: frozenset = frozenset()
    c2: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "c1", frozenset(self.c1))
        object.__setattr__(self, "c2", frozenset(self.c2))

    def to_json(self) -> dict:
        return {"c1": sorted(self.c1), "c2": sorted(self.c2)}

    @classmethod
    def from_json(cls, data: dict) -> "Placement":
        return cls(frozenset(data.get("c1", ())), frozenset(data.get("c2", ())))


@dataclass(frozen=True)
class Injection:
    """An envelope fabricated by a faulty replica.

    A faulty sender in the sending cluster injects an inter-cluster message; a
    faulty replica of the receiving cluster injects a local one. The envelope
    carries `value` and certificates attributed to `signers` (replicas of the
    sending cluster).
    """

    sender: ReplicaId
    receiver: ReplicaId
    value: bytes
    signers: Tuple[ReplicaId, ...] = ()
    with_payload: bool = True

    def to_json(self) -> dict:
        return {
            "sender": self.sender.to_json(),
            "receiver": self.receiver.to_json(),
            "value": self.value.hex(),
            "signers": [s.to_json() for s in self.signers],
            "with_payload": self.with_payload,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Injection":
        return cls(
            ReplicaId.from_json(data["sender"]),
            ReplicaId.from_json(data["receiver"]),
            bytes.fromhex(data["value"]),
            tuple(ReplicaId.from_json(s) for s in data.get("signers", ())),
            bool(data.get("with_payload", True)),
        )


@dataclass(frozen=True)
class AdversaryTrace:
    """What the faulty replicas do in one run.

    drops: indices into the plan's sends that never take effect (omitted by a
        faulty sender or ignored by a faulty receiver).
    crash_at: (replica, k) pairs; the replica performs its first k protocol
        steps (sends, or handled inter-cluster messages) and then halts.
    injections: fabricated envelopes (Byzantine only).
    """

    placement: Placement = Placement()
    drops: frozenset = frozenset()
    crash_at: Tuple[Tuple[ReplicaId, int], ...] = ()
    injections: Tuple[Injection, ...] = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "drops", frozenset(self.drops))

    def to_json(self) -> dict:
        return {
            "placement": self.placement.to_json(),
            "drops": sorted(self.drops),
            "crash_at": [[r.to_json(), k] for r, k in self.crash_at],
            "injections": [i.to_json() for i in self.injections],
            "label": self.label,
        }

    @classmethod
    def from_json(cls, data: dict) -> "AdversaryTrace":
        unknown = set(data) - {"placement", "drops", "crash_at", "injections", "label"}
        if unknown:
            raise ConfigurationError(f"unknown trace fields: {sorted(unknown)}")
        return cls(
            Placement.from_json(data.get("placement", {})),
            frozenset(data.get("drops", ())),
            tuple((ReplicaId.from_json(r), int(k)) for r, k in data.get("crash_at", ())),
            tuple(Injection.from_json(i) for i in data.get("injections", ())),
            data.get("label", ""),
        )


@dataclass(frozen=True)
class Schedule:
    """Delivery order: explicit `picks` (index into the pending list) first,
    then seeded random choices, or FIFO when `seed` is None."""

    seed: Optional[int] = 0
    picks: Tuple[int, ...] = ()


def alternative_value(value: bytes) -> bytes:
    """A value the sending cluster did not agree on."""
    if not value:
        return b"\x01"
    return value[:-1] + bytes([(value[-1] + 1) % 256])


# -- legality -----------------------------------------------------------------


def check_trace(spec: SystemSpec, plan: Plan, trace: AdversaryTrace, value: bytes) -> List[str]:
    """Reasons `trace` is illegal for `spec` (with placement applied); empty = legal."""
    problems = []
    pl = trace.placement
    for k, faulty, c in ((1, pl.c1, spec.c1), (2, pl.c2, spec.c2)):
        if len(faulty) > c.f:
            problems.append(f"|F(C{k})| = {len(faulty)} exceeds f{k} = {c.f}")
        if any(not 0 <= i < c.n for i in faulty):
            problems.append(f"faulty index out of range in C{k}")
    is_faulty = lambda r: r.index in (pl.c1 if r.cluster == 1 else pl.c2)  # noqa: E731

    for k in trace.drops:
        if not 0 <= k < len(plan.sends):
            problems.append(f"drop index {k} out of range")
            continue
        send = plan.sends[k]
        if not (is_faulty(send.sender) or is_faulty(send.receiver)):
            problems.append(f"send {k} ({send.sender}->{send.receiver}) is between non-faulty replicas")
    for replica, steps in trace.crash_at:
        if not is_faulty(replica):
            problems.append(f"non-faulty {replica} cannot crash")
        if steps < 0:
            problems.append(f"negative crash step for {replica}")
    if trace.injections and spec.failure_model is not FailureModel.BYZANTINE:
        problems.append(f"{spec.failure_model.value} failures cannot inject messages")
    for inj in trace.injections:
        if not is_faulty(inj.sender):
            problems.append(f"injection from non-faulty {inj.sender}")
        if inj.receiver.cluster != 2:
            problems.append("injections target the receiving cluster")
        if inj.value != value:
            honest = [s for s in inj.signers if s.cluster != 1 or not is_faulty(s)]
            if honest:
                problems.append(
                    f"forged certificate for non-agreed value needs faulty signers, got {honest}"
                )
    return problems


def legal(spec: SystemSpec, plan: Plan, trace: AdversaryTrace, value: bytes) -> bool:
    return not check_trace(spec, plan, trace, value)


# -- transcript ---------------------------------------------------------------


@dataclass
class RunTranscript:
    spec: SystemSpec
    choice: ProtocolChoice
    value: bytes
    scheduled: Tuple[Envelope, ...]
    omitted: Tuple[int, ...]
    deliveries: List[dict]
    received: Dict[ReplicaId, set]
    confirmed: Dict[ReplicaId, bool]
    metrics: Dict[str, int]
    receipt: bool
    agreement: bool
    confirmation: bool
    trace: AdversaryTrace = AdversaryTrace()
    branching: List[int] = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return self.receipt and self.agreement and self.confirmation

    @property
    def msgs(self) -> int:
        return self.metrics["inter_cluster_msgs"]

    def summary(self) -> str:
        flag = lambda b: "true" if b else "false"  # noqa: E731
        return (
            f"msgs={self.msgs} receipt={flag(self.receipt)} "
            f"agreement={flag(self.agreement)} confirmation={flag(self.confirmation)}"
        )

    def to_json(self) -> dict:
        return {
            "system": self.spec.to_json(),
            "protocol": self.choice.to_json(),
            "value": self.value.hex(),
            "trace": self.trace.to_json(),
            "scheduled": [
                {
                    "from": e.sender.to_json(),
                    "to": e.receiver.to_json(),
                    "payload": e.has_payload,
                    "certs": [c.to_json() for c in e.certs],
                }
                for e in self.scheduled
            ],
            "omitted": list(self.omitted),
            "deliveries": self.deliveries,
            "received": {
                str(r): sorted(v.hex() for v in vals) for r, vals in sorted(self.received.items())
            },
            "confirmed": {str(r): c for r, c in sorted(self.confirmed.items())},
            "metrics": dict(self.metrics),
            "properties": {
                "receipt": self.receipt,
                "agreement": self.agreement,
                "confirmation": self.confirmation,
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


# -- engine -------------------------------------------------------------------


def _injected_certs(ledger: CertificateLedger, mode: str, inj: Injection) -> Tuple[Certificate, ...]:
    agreed = inj.value in ledger.agreed[1]
    if mode == "replica":
        return tuple(ledger.sign_replica(s, inj.value) for s in inj.signers)
    if mode in ("cluster", "emulated") and agreed:
        return (ledger.sign_cluster(1, inj.value),)
    if mode == "emulated" and inj.signers:
        return (bundle(ledger.sign_replica(s, inj.value) for s in inj.signers),)
    if mode == "cluster":
        # a cluster certificate nobody issued: it will not verify
        return (Certificate(inj.value, SignerKind.CLUSTER, 1),)
    return ()


def run(
    spec: SystemSpec,
    choice: ProtocolChoice,
    value: bytes,
    trace: Optional[AdversaryTrace] = None,
    schedule: Optional[Schedule] = None,
    unit: int = SIG_UNIT,
    record: bool = True,
) -> RunTranscript:
    """Execute one run to quiescence and evaluate the three properties."""
    choice = resolve(spec, choice)
    problems = preconditions(spec, choice)
    if problems:
        raise ConfigurationError("; ".join(problems))
    if trace is None:
        trace = AdversaryTrace(Placement(spec.c1.faulty, spec.c2.faulty))
    schedule = schedule or Schedule()
    spec = spec.with_placement(trace.placement.c1, trace.placement.c2)
    plan = build_plan(choice, spec.view(1), spec.view(2))
    problems = check_trace(spec, plan, trace, value)
    if problems:
        raise IllegalTrace("; ".join(problems))

    ledger = CertificateLedger(spec, unit)
    ledger.agree(1, value)
    mode = cert_mode(spec, plan.flavor)
    cluster_cert = ledger.sign_cluster(1, value) if mode in ("cluster", "emulated") else None
    crash = dict(trace.crash_at)

    scheduled = []
    pending: List[Envelope] = []
    omitted = []
    steps = Counter()
    for k, send in enumerate(plan.sends):
        if mode == "replica":
            certs = (ledger.sign_replica(send.sender, value),)
        else:
            certs = (cluster_cert,) if cluster_cert is not None else ()
        env = Envelope(send.sender, send.receiver, value, certs, send.with_value)
        scheduled.append(env)
        step = steps[send.sender]
        steps[send.sender] += 1
        if k in trace.drops or step >= crash.get(send.sender, step + 1):
            omitted.append(k)
        else:
            pending.append(env)
    for inj in trace.injections:
        certs = _injected_certs(ledger, mode, inj)
        pending.append(Envelope(inj.sender, inj.receiver, inj.value, certs, inj.with_payload, "injected"))
    # the send step is complete: non-faulty senders confirm on the reliable network
    confirmed = {r: True for r in spec.nonfaulty(1)}

    receivers = spec.view(2).replicas()
    states = {r: ReceiverState(r, mode, plan.threshold, ledger) for r in receivers}
    handled = Counter()
    deliveries = []
    branching = []
    local_msgs = 0
    rng = random.Random(schedule.seed) if schedule.seed is not None else None
    picks = schedule.picks
    t = 0
    while pending:
        branching.append(len(pending))
        if t < len(picks):
            idx = picks[t] % len(pending)
        elif rng is not None:
            idx = rng.randrange(len(pending))
        else:
            idx = 0
        env = pending.pop(idx)
        t += 1
        r = env.receiver
        state = states[r]
        effect = "ignored"
        if env.inter_cluster:
            if handled[r] < crash.get(r, handled[r] + 1):
                handled[r] += 1
                relays = state.on_inter(env)
                for v, certs, payload in relays:
                    for target in receivers:
                        pending.append(Envelope(r, target, v, certs, payload, "relay"))
                effect = "relayed" if relays else "ignored"
            else:
                effect = "crashed"
        else:
            local_msgs += 1
            effect = "received" if state.on_local(env) else "ignored"
        if record:
            deliveries.append({
                "step": t,
                "kind": env.kind,
                "from": env.sender.to_json(),
                "to": r.to_json(),
                "value": env.value.hex(),
                "signers": [list(s.to_json()) for c in env.certs for s in c.signers],
                "payload": env.has_payload,
                "effect": effect,
            })

    honest = spec.nonfaulty(2)
    receipt = all(value in states[r].received for r in honest)
    agreement = all(states[r].received <= {value} for r in honest)
    confirmation = receipt or not any(confirmed.values())

    sizes = [e.size for e in scheduled]
    metrics = {
        "inter_cluster_msgs": len(scheduled),
        "value_bytes_total": sum(s.value_bytes for s in sizes),
        "replica_sigs_total": sum(s.replica_sig_count for s in sizes),
        "cluster_sigs_total": sum(s.cluster_sig_count for s in sizes),
        "max_envelope_size": max((s.total(unit) for s in sizes), default=0),
        "local_msgs": local_msgs,
        "injected_msgs": len(trace.injections),
    }
    return RunTranscript(
        spec=spec,
        choice=choice,
        value=value,
        scheduled=tuple(scheduled),
        omitted=tuple(omitted),
        deliveries=deliveries,
        received={r: set(states[r].received) for r in receivers},
        confirmed=confirmed,
        metrics=metrics,
        receipt=receipt,
        agreement=agreement,
        confirmation=confirmation,
        trace=trace,
        branching=branching,
    )


class RunContext:
    """Adversary trace, schedule and size unit shared by protocol entry points."""

    def __init__(self, trace: Optional[AdversaryTrace] = None,
                 schedule: Optional[Schedule] = None, unit: int = SIG_UNIT):
        self.trace = trace
        self.schedule = schedule
        self.unit = unit

    def run(self, spec: SystemSpec, choice: ProtocolChoice, value: bytes) -> RunTranscript:
        return run(spec, choice, value, self.trace, self.schedule, self.unit)


def exhaust_schedules(spec, choice, value, trace=None, cap: int = 10_000) -> Iterator[RunTranscript]:
    """Every delivery order of one run, up to `cap` orders."""
    picks: List[int] = []
    for _ in range(cap):
        tr = run(spec, choice, value, trace, Schedule(seed=None, picks=tuple(picks)), record=False)
        yield tr
        sizes = tr.branching
        full = picks + [0] * (len(sizes) - len(picks))
        k = len(full) - 1
        while k >= 0 and full[k] + 1 >= sizes[k]:
            k -= 1
        if k < 0:
            return
        picks = full[:k] + [full[k] + 1]


# -- enumeration --------------------------------------------------------------


def _subsets(items: Sequence, k_max: int):
    for k in range(min(k_max, len(items)) + 1):
        yield from combinations(items, k)


def enumerate_placements(spec: SystemSpec, plan: Optional[Plan] = None) -> Iterator[Placement]:
    """All fault assignments with at most f faulty replicas per cluster.

    With a `plan`, replicas the plan never touches are interchangeable, so
    faulty ones among them are canonicalised to the lowest such indices.
    """
    sides = []
    for k in (1, 2):
        c = spec.cluster(k)
        indices = list(range(c.n))
        if plan is None:
            sides.append([frozenset(s) for s in _subsets(indices, c.f)])
            continue
        used = {s.sender.index for s in plan.sends if s.sender.cluster == k}
        used |= {s.receiver.index for s in plan.sends if s.receiver.cluster == k}
        inside = [i for i in indices if i in used]
        outside = [i for i in indices if i not in used]
        options = []
        for a in _subsets(inside, c.f):
            for extra in range(min(c.f - len(a), len(outside)) + 1):
                options.append(frozenset(a) | frozenset(outside[:extra]))
        sides.append(options)
    for a in sides[0]:
        for b in sides[1]:
            yield Placement(a, b)


def enumerate_adversaries(
    spec: SystemSpec,
    placement: Placement,
    choice: ProtocolChoice,
    value: bytes = b"v",
    budget: int = 64,
    seed: int = 0,
) -> Iterator[AdversaryTrace]:
    """A finite adversary basis for one placement.

    Drop patterns over the sends touching a faulty replica: every subset when
    there are at most `budget` of them, otherwise the empty and full patterns,
    each faulty replica's own sends and their complement, topped up with
    seeded random subsets. Two crash scripts (every faulty replica halts at
    once / after one step). Under Byzantine failures, additionally: a replay
    of the faulty senders' envelopes, and injections of one alternative value
    carrying certificates from each subset of the faulty senders, aimed at
    each non-empty subset of the receiving cluster (strongest first, at most
    `budget` of them), each with no drops and with all drops.
    """
    spec = spec.with_placement(placement.c1, placement.c2)
    choice = resolve(spec, choice)
    plan = build_plan(choice, spec.view(1), spec.view(2))
    faulty1, faulty2 = spec.faulty(1), spec.faulty(2)
    bad = set(faulty1) | set(faulty2)
    touching = [k for k, s in enumerate(plan.sends) if s.sender in bad or s.receiver in bad]
    rng = random.Random(hash((seed, tuple(sorted(placement.c1)), tuple(sorted(placement.c2)))) & 0xFFFFFFFF)

    if 2 ** len(touching) <= budget:
        patterns = [frozenset(c) for c in _subsets(touching, len(touching))]
    else:
        everything = frozenset(touching)
        patterns = [frozenset(), everything]
        for r in sorted(bad):
            mine = frozenset(k for k in touching if r in (plan.sends[k].sender, plan.sends[k].receiver))
            patterns += [mine, everything - mine]
        seen = set(patterns)
        patterns = list(dict.fromkeys(patterns))
        attempts = 0
        while len(patterns) < budget and attempts < 20 * budget:
            attempts += 1
            pick = frozenset(k for k in touching if rng.random() < 0.5)
            if pick not in seen:
                seen.add(pick)
                patterns.append(pick)

    for i, drops in enumerate(patterns):
        yield AdversaryTrace(placement, drops, label=f"drops#{i}")
    if bad:
        yield AdversaryTrace(placement, crash_at=tuple((r, 0) for r in sorted(bad)), label="crash@0")
        yield AdversaryTrace(placement, crash_at=tuple((r, 1) for r in sorted(bad)), label="crash@1")

    if spec.failure_model is not FailureModel.BYZANTINE or not bad:
        return
    everything = frozenset(touching)
    replay = tuple(
        Injection(s.sender, t, value, (s.sender,) if plan.flavor is Flavor.BRS else ())
        for s in plan.sends if s.sender in bad
        for t in spec.view(2).replicas()
    )
    if replay:
        yield AdversaryTrace(placement, injections=replay, label="replay")
    for script in islice(injection_scripts(spec, value), budget):
        for drops in (frozenset(), everything):
            yield AdversaryTrace(placement, drops, injections=script, label="inject")


def injection_scripts(spec: SystemSpec, value: bytes) -> Iterator[Tuple[Injection, ...]]:
    """Injections of an alternative value: faulty-signer subsets x target subsets.

    Each script sends the forged envelope to every target from a faulty sender
    (if any) and locally from a faulty receiving replica (if any). Yields
    ``2**|F(C1)| * (2**n2 - 1)`` scripts when any replica is faulty.
    """
    faulty1, faulty2 = spec.faulty(1), spec.faulty(2)
    if not faulty1 and not faulty2:
        return
    forged = alternative_value(value)
    receivers = spec.view(2).replicas()
    signer_sets = sorted(_subsets(faulty1, len(faulty1)), key=len, reverse=True)
    targets = sorted(
        (t for t in _subsets(receivers, len(receivers)) if t), key=len, reverse=True
    )
    injectors = [x for x in (faulty1[:1] + faulty2[:1])]
    for signers in signer_sets:
        for target in targets:
            yield tuple(
                Injection(src, dst, forged, tuple(signers))
                for src in injectors
                for dst in target
            )


# -- campaigns ----------------------------------------------------------------


@dataclass
class CampaignReport:
    spec: SystemSpec
    choice: ProtocolChoice
    runs: int = 0
    placements: int = 0
    counterexample: Optional[dict] = None

    @property
    def ok(self) -> bool:
        return self.counterexample is None

    def summary(self) -> str:
        if self.ok:
            return f"verified {self.runs} runs ({self.placements} placements)"
        return f"counterexample after {self.runs} runs"


def _check_placement(args) -> Tuple[int, Optional[dict]]:
    spec, choice, value, placement, seeds, budget, all_seeds = args
    runs = 0
    traces = list(enumerate_adversaries(spec, placement, choice, value, budget))
    for k, trace in enumerate(traces):
        # the strongest omission pattern and injections see every seed; the
        # rest rotate through the seed pool
        heavy = all_seeds or trace.label == "crash@1" or k == 1
        chosen = seeds if heavy else [seeds[k % len(seeds)]]
        for s in chosen:
            tr = run(spec, choice, value, trace, Schedule(seed=s), record=False)
            runs += 1
            if not tr.ok:
                return runs, {
                    "placement": placement.to_json(),
                    "trace": trace.to_json(),
                    "seed": s,
                    "receipt": tr.receipt,
                    "agreement": tr.agreement,
                    "confirmation": tr.confirmation,
                }
    return runs, None


def threads() -> int:
    try:
        return max(1, int(os.environ.get("CLUSTERSEND_THREADS", "1")))
    except ValueError:
        return 1


def campaign(
    spec: SystemSpec,
    choice: ProtocolChoice,
    value: bytes = b"v",
    seeds: Sequence[int] = tuple(range(50)),
    budget: int = 16,
    all_seeds: bool = False,
    max_enum: int = 6,
    workers: Optional[int] = None,
) -> CampaignReport:
    """Exhaustive verification over placements x adversary basis x seeds.

    Stops at the first counterexample.
    """
    if max(spec.c1.n, spec.c2.n) > max_enum:
        raise ConfigurationError(f"cluster sizes exceed the enumeration guard {max_enum}")
    choice = resolve(spec, choice)
    problems = preconditions(spec, choice)
    if problems:
        raise ConfigurationError("; ".join(problems))
    plan = build_plan(choice, spec.view(1), spec.view(2))
    placements = list(enumerate_placements(spec, plan))
    report = CampaignReport(spec, choice, placements=len(placements))
    jobs = [(spec, choice, value, p, list(seeds), budget, all_seeds) for p in placements]
    workers = workers or threads()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_check_placement, jobs, chunksize=max(1, len(jobs) // (4 * workers)))
            for runs, bad in results:
                report.runs += runs
                if bad and report.counterexample is None:
                    report.counterexample = bad
    else:
        for job in jobs:
            runs, bad = _check_placement(job)
            report.runs += runs
            if bad:
                report.counterexample = bad
                break
    return report


# -- sweeps -------------------------------------------------------------------

CSV_COLUMNS = [
    "n1", "f1", "n2", "f2", "model", "signing", "protocol", "alpha", "msgs",
    "value_bytes", "replica_sigs", "cluster_sigs", "receipt", "agreement",
    "confirmation", "max_size_units",
]


def sweep(
    grid: Iterable[SystemSpec],
    policy: Optional[ProtocolChoice] = None,
    value: bytes = b"v",
    seeds: Sequence[int] = (0, 1, 2),
    placement_cap: int = 256,
    compact_certs: bool = False,
    workers: Optional[int] = None,
) -> List[dict]:
    """One metrics row per grid point; failing cells are recorded, not raised."""
    jobs = [(spec, policy, value, tuple(seeds), placement_cap, compact_certs) for spec in grid]
    workers = workers or threads()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_cell, jobs))
    return [_sweep_cell(job) for job in jobs]


def _sweep_cell(job) -> dict:
    spec, policy, value, seeds, placement_cap, compact = job
    n1, f1, n2, f2 = spec.counts
    row = {
        "n1": n1, "f1": f1, "n2": n2, "f2": f2,
        "model": spec.failure_model.value, "signing": spec.signing.value,
        "protocol": "", "alpha": "", "msgs": "", "value_bytes": "", "replica_sigs": "",
        "cluster_sigs": "", "receipt": False, "agreement": False, "confirmation": False,
        "max_size_units": "",
    }
    try:
        choice = resolve(spec, policy or select_protocol(spec, compact_certs=compact))
        plan = build_plan(choice, spec.view(1), spec.view(2))
        placements = list(enumerate_placements(spec, plan))
        if len(placements) > placement_cap:
            rng = random.Random(hash(spec.counts) & 0xFFFFFFFF)
            placements = rng.sample(placements, placement_cap)
        ok = {"receipt": True, "agreement": True, "confirmation": True}
        first = None
        for placement in placements:
            traces = _sweep_traces(spec, placement, choice, plan, value)
            for trace in traces:
                for s in seeds:
                    tr = run(spec, choice, value, trace, Schedule(seed=s), record=False)
                    first = first or tr
                    for key in ok:
                        ok[key] = ok[key] and getattr(tr, key)
        m = first.metrics
        row.update(
            protocol=choice.protocol.value,
            alpha=choice.alpha if choice.alpha is not None else "",
            msgs=m["inter_cluster_msgs"],
            value_bytes=m["value_bytes_total"],
            replica_sigs=m["replica_sigs_total"],
            cluster_sigs=m["cluster_sigs_total"],
            max_size_units=m["max_envelope_size"],
            formula_msgs=message_formula(spec, choice),
            **ok,
        )
    except (ConfigurationError, IntegrityError, IllegalTrace) as exc:
        row["protocol"] = f"error: {exc}"
    return row


def _sweep_traces(spec, placement, choice, plan, value) -> List[AdversaryTrace]:
    placed = spec.with_placement(placement.c1, placement.c2)
    bad = set(placed.faulty(1)) | set(placed.faulty(2))
    everything = frozenset(
        k for k, s in enumerate(plan.sends) if s.sender in bad or s.receiver in bad
    )
    traces = [AdversaryTrace(placement), AdversaryTrace(placement, everything)]
    if spec.failure_model is FailureModel.BYZANTINE and bad:
        script = next(injection_scripts(placed, value))
        traces.append(AdversaryTrace(placement, everything, injections=script))
    return traces
