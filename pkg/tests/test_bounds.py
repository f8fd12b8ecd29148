from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clustersend.bounds import (
    BoundKind,
    Flavor,
    NoApplicableProtocol,
    Protocol,
    ProtocolChoice,
    ScheduleCapExceeded,
    killing_assignment,
    min_schedule_size,
    preconditions,
    select_protocol,
    sigma,
    sigma1,
    sigma2,
    tau,
    tau1,
    tau2,
)
from clustersend.model import ConfigurationError, SystemSpec


def test_sigma_small_symmetric():
    rep = sigma(SystemSpec.of(3, 1, 3, 1))
    assert (rep.q, rep.r, rep.value) == (1, 0, 3)


@pytest.mark.parametrize("n1,n2", [(1, 1), (5, 2), (3, 3), (2, 7)])
def test_sigma_without_faults_is_one(n1, n2):
    assert sigma(SystemSpec.of(n1, 0, n2, 0)).value == 1


def test_sigma_equal_clusters():
    rep = sigma(SystemSpec.of(7, 2, 7, 2))
    assert (rep.q, rep.r, rep.value) == (0, 3, 5)
    assert rep.kind is BoundKind.SIGMA_SENDER_LARGER
    assert "sigma2=5" in rep.side_condition


def test_sigma_reports_the_larger_counting_bound():
    # at (3,1,4,3) the receiver-side count gives 6, the sender-side one 8
    spec = SystemSpec.of(3, 1, 4, 3)
    assert sigma2(spec).value == 6
    assert sigma1(spec).value == 8
    assert sigma(spec).value == 8 == min_schedule_size(3, 1, 4, 3, 12)


def test_tau_equal_clusters():
    rep = tau(SystemSpec.of(5, 1, 5, 1, "byzantine", "replica"))
    assert (rep.kind, rep.q, rep.r, rep.value) == (BoundKind.TAU1, 0, 3, 4)
    assert rep.applicable
    assert rep.side_condition.startswith("tau2=")


def test_tau_receiver_larger():
    rep = tau(SystemSpec.of(5, 1, 9, 2, "byzantine", "replica"))
    assert (rep.kind, rep.q, rep.r, rep.value) == (BoundKind.TAU2, 1, 0, 5)


def test_tau_without_faults_is_one():
    assert tau(SystemSpec.of(3, 0, 2, 0, "byzantine", "replica")).value == 1


def test_tau_not_applicable_without_replica_signing():
    assert not tau(SystemSpec.of(5, 1, 5, 1)).applicable


def test_undefined_divisor_is_reported():
    with pytest.raises(ConfigurationError):
        tau2(SystemSpec.of(4, 2, 6, 1))


@pytest.mark.parametrize("counts,protocol,alpha", [
    ((8, 3, 7, 2), Protocol.BS_BCS, None),
    ((13, 4, 4, 1), Protocol.SPBS, 7),
    ((4, 1, 13, 4), Protocol.RPBS, 7),
])
def test_selection(counts, protocol, alpha):
    choice = select_protocol(SystemSpec.of(*counts))
    assert choice.protocol is protocol
    assert choice.alpha == alpha


def test_selection_with_replica_signing_uses_brs():
    choice = select_protocol(SystemSpec.of(5, 1, 5, 1, "byzantine", "replica"))
    assert choice.protocol is Protocol.BS_BRS and choice.flavor is Flavor.BRS


def test_selection_falls_back_to_broadcast():
    # n2 too small for bijective sending and sigma1 too large for SPBS
    spec = SystemSpec.of(3, 1, 2, 1)
    assert select_protocol(spec).protocol is Protocol.RB_BCS


def test_selection_unsatisfiable_is_reported():
    with pytest.raises(NoApplicableProtocol):
        select_protocol(SystemSpec.of(2, 1, 2, 0))


def test_killing_assignment_examples():
    bij3 = [(("s", i), ("r", i)) for i in range(3)]
    assert killing_assignment(bij3, 1, 1) is None
    found = killing_assignment(bij3[:2], 1, 1)
    assert found is not None
    for s, r in bij3[:2]:
        assert s in found.senders or r in found.receivers


def test_short_schedules_die_at_three():
    pairs = [(s, r) for s in range(3) for r in range(3)]
    for m in (1, 2):
        for sched in itertools.combinations(pairs, m):
            assert killing_assignment(sched, 1, 1) is not None


def test_oracle_examples():
    assert min_schedule_size(3, 1, 3, 1, 5) == 3
    assert min_schedule_size(2, 0, 2, 0, 2) == 1
    assert min_schedule_size(4, 1, 2, 1, 6) == sigma(SystemSpec.of(4, 1, 2, 1)).value == 4


def test_oracle_cap():
    with pytest.raises(ScheduleCapExceeded):
        min_schedule_size(3, 1, 3, 1, 2)
    with pytest.raises(ConfigurationError):
        min_schedule_size(6, 1, 2, 0, 3)


@pytest.mark.parametrize("n", range(3, 13))
def test_equal_clusters_collapse(n):
    for f1, f2 in itertools.product(range(n), repeat=2):
        if n > f1 + f2 and n > 2 * f1:
            assert sigma(SystemSpec.of(n, f1, n, f2)).value == f1 + f2 + 1
        if n > 2 * f1 + f2:
            assert tau(SystemSpec.of(n, f1, n, f2, "byzantine", "replica")).value == 2 * f1 + f2 + 1


def test_monotone_in_faults():
    for n1, n2 in itertools.product(range(1, 10), repeat=2):
        for f1, f2 in itertools.product(range(n1), range(n2)):
            s = sigma(SystemSpec.of(n1, f1, n2, f2)).value
            if f1 + 1 < n1:
                assert sigma(SystemSpec.of(n1, f1 + 1, n2, f2)).value >= s
            if f2 + 1 < n2:
                assert sigma(SystemSpec.of(n1, f1, n2, f2 + 1)).value >= s


def test_tau_monotone_where_defined():
    for n1, n2 in itertools.product(range(1, 10), repeat=2):
        for f1, f2 in itertools.product(range(n1), range(n2)):
            try:
                t = tau(SystemSpec.of(n1, f1, n2, f2, "byzantine", "replica")).value
                up1 = tau(SystemSpec.of(n1, f1 + 1, n2, f2, "byzantine", "replica")).value
            except ConfigurationError:
                continue
            assert up1 >= t


specs = st.tuples(st.integers(1, 14), st.integers(1, 14)).flatmap(
    lambda n: st.tuples(st.just(n[0]), st.integers(0, n[0] - 1), st.just(n[1]), st.integers(0, n[1] - 1))
)


@settings(max_examples=300)
@given(specs, st.sampled_from([("byzantine", "cluster"), ("byzantine", "replica"),
                               ("byzantine", "emulated"), ("crash", "none"), ("omit", "none")]))
def test_selector_soundness(counts, env):
    spec = SystemSpec.of(*counts, *env)
    try:
        choice = select_protocol(spec)
    except NoApplicableProtocol:
        return
    assert preconditions(spec, choice) == []
    if choice.protocol is Protocol.SPBS:
        assert choice.alpha <= spec.c1.n
    if choice.protocol is Protocol.RPBS:
        assert choice.alpha <= spec.c2.n


@given(specs)
def test_bound_decomposition(counts):
    n1, f1, n2, f2 = counts
    spec = SystemSpec.of(*counts)
    rep = sigma1(spec)
    assert rep.q * (n2 - f2) + rep.r == f1 + 1 and 0 <= rep.r < n2 - f2
    assert rep.value == rep.q * n2 + rep.r + (f2 if rep.r else 0)
    rep = tau1(spec)
    assert rep.q * (n2 - f2) + rep.r == 2 * f1 + 1


def test_choice_json_round_trip():
    c = ProtocolChoice.of("spbs", "brs", alpha=7, compact_certs=True)
    assert ProtocolChoice.from_json(c.to_json()) == c
    with pytest.raises(ConfigurationError):
        ProtocolChoice.from_json({"protocol": "spbs", "bogus": 1})
