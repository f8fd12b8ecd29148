"""Cluster-sending protocols, lower-bound calculators and a deterministic simulator."""

from __future__ import annotations

from .bounds import (
    BoundReport,
    Flavor,
    NoApplicableProtocol,
    Protocol,
    ProtocolChoice,
    message_formula,
    min_schedule_size,
    select_protocol,
    sigma,
    tau,
)
from .certs import SIG_UNIT, Certificate, CertificateLedger
from .model import (
    ClusterSpec,
    ConfigurationError,
    FailureModel,
    IntegrityError,
    ReplicaId,
    SigningScheme,
    SystemSpec,
)
from .protocols import bs_bcs, bs_brs, build_plan, rb_bcs, rb_brs, rpbs, spbs
from .sim import (
    AdversaryTrace,
    Injection,
    Placement,
    RunContext,
    Schedule,
    campaign,
    enumerate_adversaries,
    enumerate_placements,
    run,
    sweep,
)

__all__ = [
    "AdversaryTrace", "BoundReport", "Certificate", "CertificateLedger", "ClusterSpec",
    "ConfigurationError", "FailureModel", "Flavor", "Injection", "IntegrityError",
    "NoApplicableProtocol", "Placement", "Protocol", "ProtocolChoice", "ReplicaId",
    "RunContext", "SIG_UNIT", "Schedule", "SigningScheme", "SystemSpec", "bs_bcs", "bs_brs",
    "build_plan", "campaign", "enumerate_adversaries", "enumerate_placements",
    "message_formula", "min_schedule_size", "rb_bcs", "rb_brs", "rpbs", "run",
    "select_protocol", "sigma", "spbs", "sweep", "tau",
]
