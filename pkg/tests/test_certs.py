from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from clustersend.certs import Certificate, CertificateLedger, SignerKind, SizeBreakdown, bundle
from clustersend.model import ConfigurationError, IntegrityError, ReplicaId, SystemSpec


def ledger(signing="cluster", n=4, f=1, faulty=()):
    spec = SystemSpec.of(n, f, n, f, "byzantine", signing).with_placement(faulty, ())
    led = CertificateLedger(spec)
    led.agree(1, b"v")
    return led


def test_native_cluster_certificate_verifies():
    led = ledger()
    cert = led.sign_cluster(1, b"v")
    assert led.verify(cert, b"v", 1)
    assert not led.verify(cert, b"w", 1)
    assert not led.verify(cert, b"v", 2)


def test_cluster_cannot_sign_unagreed_value():
    with pytest.raises(IntegrityError):
        ledger().sign_cluster(1, b"w")


def test_unissued_cluster_certificate_fails():
    led = ledger()
    assert not led.verify(Certificate(b"w", SignerKind.CLUSTER, 1), b"w", 1)


def test_honest_replica_refuses_unagreed_value():
    led = ledger("replica", faulty={0})
    with pytest.raises(IntegrityError):
        led.sign_replica(ReplicaId(1, 1), b"w")
    forged = led.sign_replica(ReplicaId(1, 0), b"w")
    assert led.verify(forged, b"w", 1)


def test_replica_signing_unavailable_under_cluster_scheme():
    with pytest.raises(ConfigurationError):
        ledger("cluster").sign_replica(ReplicaId(1, 0), b"v")


def test_emulated_certificate_has_f_plus_one_signers():
    led = ledger("emulated", n=7, f=2)
    cert = led.sign_cluster(1, b"v")
    assert cert.kind is SignerKind.EMULATED
    assert len(set(cert.signers)) == 3
    assert led.verify(cert, b"v", 1)
    assert cert.size == SizeBreakdown(replica_sig_count=3)


def test_faulty_only_bundle_is_too_small():
    led = ledger("emulated", n=7, f=2, faulty={0, 1})
    parts = [led.sign_replica(ReplicaId(1, i), b"w") for i in (0, 1)]
    assert not led.verify(bundle(parts), b"w", 1)
    # duplicating a signer does not help
    assert not led.verify(bundle(parts + parts[:1]), b"w", 1)


def test_size_breakdown_total():
    assert SizeBreakdown(3, 2, 1).total(unit=5) == 3 + 15


@given(st.integers(1, 4), st.data())
def test_forgery_closure(f, data):
    """Certificates for a non-agreed value only ever carry faulty signers."""
    n = 2 * f + 1 + data.draw(st.integers(0, 3))
    faulty = data.draw(st.sets(st.integers(0, n - 1), max_size=f))
    led = ledger("emulated", n=n, f=f, faulty=faulty)
    for i in range(n):
        r = ReplicaId(1, i)
        if i in faulty:
            led.sign_replica(r, b"w")
        else:
            with pytest.raises(IntegrityError):
                led.sign_replica(r, b"w")
    assert {r.index for r in led.signers_of(b"w")} <= faulty
    signed = [led.sign_replica(ReplicaId(1, i), b"w") for i in sorted(faulty)]
    if signed:
        assert not led.verify(bundle(signed), b"w", 1)
