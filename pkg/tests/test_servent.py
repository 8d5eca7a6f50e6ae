import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from p2psim import servent as sv
from p2psim import wire_gnutella as gw
from p2psim.napster import make_record


def _state(neighbors=(1, 2, 3, 4), files=(), **cfg) -> sv.ServentState:
    st_ = sv.ServentState(b"S" * 16, "10.0.0.9", 6346, sv.ServentConfig(**cfg), set(neighbors))
    st_.local_index = [make_record(f, 1000) for f in files]
    return st_


def _query(did=b"G1" * 8, ttl=7, hops=0, text="foo"):
    return gw.Descriptor.build(did, gw.QueryPayload(0, text), ttl, hops)


def _verbs(actions):
    return [a.verb for a in actions]


# --- handshake -----------------------------------------------------------------


def test_handshake_accepts_matching_version():
    res = sv.handshake("GNUTELLA CONNECT/0.4\n\n", free_slots=2)
    assert res.accepted and res.response == "GNUTELLA OK\n\n"


def test_handshake_rejects_other_version():
    res = sv.handshake("GNUTELLA CONNECT/0.9", free_slots=2)
    assert not res.accepted and res.reason == "version"


def test_handshake_rejects_without_slots():
    res = sv.handshake(sv.connect_line(), free_slots=0)
    assert not res.accepted and res.reason == "slots"


def test_handshake_rejects_garbage():
    assert sv.handshake("HELLO", 3).reason == "malformed"


# --- routing -------------------------------------------------------------------


def test_last_hop_query_only_replies():
    s = _state(neighbors=(1, 2, 3, 4), files=["foo.mp3"])
    actions = sv.handle_descriptor(s, 1, _query(ttl=1, hops=6))
    replies = [a for a in actions if a.verb == sv.Verb.REPLY_BACK]
    assert len(replies) == 1 and replies[0].target == 1
    assert replies[0].descriptor.kind == gw.PayloadKind.QUERY_HIT
    assert sv.Verb.FORWARD not in _verbs(actions)


def test_duplicate_query_dropped():
    s = _state()
    sv.handle_descriptor(s, 1, _query())
    again = sv.handle_descriptor(s, 2, _query())
    assert len(again) == 1
    assert again[0].verb == sv.Verb.DROP and again[0].drop_reason == sv.DropReason.DUPLICATE


def test_orphan_pong_has_no_route():
    pong = gw.Descriptor.build(b"G9" * 8, gw.PongPayload(1, "1.2.3.4", 0, 0), 3)
    (action,) = sv.handle_descriptor(_state(), 1, pong)
    assert action.drop_reason == sv.DropReason.NO_REVERSE_ROUTE


def test_flood_skips_arrival():
    actions = sv.handle_descriptor(_state(), 2, _query(ttl=3))
    fwd = [a for a in actions if a.verb == sv.Verb.FORWARD]
    assert sorted(a.target for a in fwd) == [1, 3, 4]
    assert all((a.descriptor.ttl, a.descriptor.hops) == (2, 1) for a in fwd)


def test_ping_answered_with_own_pong():
    s = _state(files=["a.mp3", "b.mp3"])
    ping = gw.Descriptor.build(b"P" * 16, gw.PingPayload(), 4, 2)
    reply = next(a for a in sv.handle_descriptor(s, 3, ping) if a.verb == sv.Verb.REPLY_BACK)
    assert reply.target == 3
    assert reply.descriptor.payload.files_shared == 2
    # a reply must be able to travel back hops + 1 edges
    assert (reply.descriptor.ttl, reply.descriptor.hops) == (3, 0)


def test_reply_follows_reverse_path():
    s = _state()
    q = _query(ttl=5)
    sv.handle_descriptor(s, 2, q)
    hit = gw.Descriptor.build(q.descriptor_id, gw.QueryHitPayload(1, "1.1.1.1", 56, (), b"R" * 16), 4)
    (action,) = sv.handle_descriptor(s, 3, hit)
    assert action.verb == sv.Verb.REPLY_BACK and action.target == 2
    assert s.push_routes[b"R" * 16] == 3


def test_reply_to_own_query_delivered():
    s = _state()
    q = sv.originate_query(s, "foo", rng=random.Random(1))
    hit = gw.Descriptor.build(q.descriptor_id, gw.QueryHitPayload(1, "1.1.1.1", 56, (), b"R" * 16), 1)
    (action,) = sv.handle_descriptor(s, 4, hit)
    assert action.verb == sv.Verb.DELIVER


def test_reply_route_to_departed_neighbor():
    s = _state()
    q = _query(ttl=5)
    sv.handle_descriptor(s, 2, q)
    s.neighbors.discard(2)
    pong_like = gw.Descriptor.build(q.descriptor_id, gw.QueryHitPayload(1, "1.1.1.1", 56, (), b"R" * 16), 4)
    (action,) = sv.handle_descriptor(s, 3, pong_like)
    assert action.drop_reason == sv.DropReason.NO_REVERSE_ROUTE


# --- faults --------------------------------------------------------------------


def test_rule3_fault_echoes_to_arrival():
    actions = sv.handle_descriptor(_state(fault="rule3"), 2, _query(ttl=3))
    assert 2 in [a.target for a in actions if a.verb == sv.Verb.FORWARD]


def test_rule4_fault_keeps_ttl():
    fwd = [a for a in sv.handle_descriptor(_state(fault="rule4"), 1, _query(ttl=3)) if a.verb == sv.Verb.FORWARD]
    assert all((a.descriptor.ttl, a.descriptor.hops) == (3, 1) for a in fwd)


def test_rule5_fault_forwards_duplicates():
    s = _state(fault="rule5")
    sv.handle_descriptor(s, 1, _query())
    assert sv.Verb.FORWARD in _verbs(sv.handle_descriptor(s, 2, _query()))


def test_rule1_fault_forgets_own_id():
    s = _state(fault="rule1")
    q = sv.originate_query(s, "foo", rng=random.Random(1))
    assert (q.descriptor_id, q.kind) not in s.seen


def test_unknown_fault_rejected():
    with pytest.raises(ValueError):
        sv.ServentConfig(fault="rule9")


# --- local search ----------------------------------------------------------------


def test_token_match():
    hit = sv.answer_query("foo bar", 0, [make_record("Foo_Bar.mp3", 10)], 56)
    assert hit is not None and hit.num_hits == 1


def test_too_slow_to_answer():
    assert sv.answer_query("foo", 64, [make_record("foo.mp3", 10)], 28) is None


def test_empty_index():
    assert sv.answer_query("foo", 0, [], 56) is None


def test_all_tokens_required():
    assert sv.answer_query("foo baz", 0, [make_record("Foo_Bar.mp3", 10)], 56) is None


# --- pong caching ----------------------------------------------------------------


def _cached(hops_list):
    s = _state()
    for i, h in enumerate(hops_list):
        s.cache_pong(gw.PongPayload(6346, f"10.1.0.{i}", 0, 0), h)
    return s


def test_pong_cache_within_horizon():
    s = _cached([1, 3, 8])
    pongs = sv.pong_cache_answer(s, gw.DescriptorHeader(bytes(16), gw.PayloadKind.PING, 7, 0))
    assert pongs[0] == s.own_pong()
    assert len(pongs) == 3


def test_pong_cache_ttl_one():
    pongs = sv.pong_cache_answer(_cached([1, 3]), gw.DescriptorHeader(bytes(16), gw.PayloadKind.PING, 1, 0))
    assert len(pongs) == 1


def test_pong_cache_empty():
    assert len(sv.pong_cache_answer(_state(), gw.DescriptorHeader(bytes(16), gw.PayloadKind.PING, 7, 0))) == 1


def test_caching_servent_does_not_forward_pings():
    s = _cached([1, 2])
    s.config.pong_caching = True
    actions = sv.handle_descriptor(s, 1, gw.Descriptor.build(b"P" * 16, gw.PingPayload(), 7))
    assert set(_verbs(actions)) == {sv.Verb.REPLY_BACK}
    assert [a.descriptor.hops for a in actions] == [0, 1, 2]


# --- priority dropping -----------------------------------------------------------


K = gw.PayloadKind


@pytest.mark.parametrize(
    "queue, expect",
    [([K.PUSH, K.PING, K.QUERY], 1), ([K.QUERY_HIT, K.PUSH], 0), ([K.PONG, K.PONG], 0)],
)
def test_select_drop(queue, expect):
    assert sv.select_drop(queue) == expect


def test_outbound_queue_keeps_high_priority():
    q = sv.OutboundQueue(2)
    assert q.offer(K.PING) is None
    assert q.offer(K.PUSH) is None
    assert q.offer(K.QUERY_HIT) == K.PING
    assert q.offer(K.QUERY) == K.QUERY


@given(st.lists(st.sampled_from(list(K)), min_size=1, max_size=20))
def test_drop_choice_is_lowest_priority(kinds):
    i = sv.select_drop(kinds)
    assert all(gw.PRIORITY[kinds[i]] <= gw.PRIORITY[k] for k in kinds)
    assert all(gw.PRIORITY[k] > gw.PRIORITY[kinds[i]] for k in kinds[:i])


# --- connection health ---------------------------------------------------------


def test_silent_connection_dropped():
    assert sv.connection_health(sv.ConnHealth(0, 10_500), 11_000, False) == sv.Health.DROP


def test_answered_ping_keeps_idle_sender():
    assert sv.connection_health(sv.ConnHealth(10_500, 0), 11_000, True) == sv.Health.KEEP


def test_idle_sender_without_answer_dropped():
    assert sv.connection_health(sv.ConnHealth(10_500, 0), 11_000, False) == sv.Health.DROP


def test_fresh_connection_kept():
    assert sv.connection_health(sv.ConnHealth(10_000, 10_000), 11_000, False) == sv.Health.KEEP


# --- coverage --------------------------------------------------------------------


def test_coverage_examples():
    assert sv.coverage_estimate(4, 7, 1.0) == 16384
    assert sv.coverage_estimate(4, 7, 0.1) == 1638
    assert sv.coverage_estimate(5, 0, 1.0) == 1


def test_coverage_saturates():
    value, saturated = sv.coverage_estimate_checked(10, 40, 1.0)
    assert saturated and value == sv.COVERAGE_CAP


@given(st.integers(1, 12), st.integers(0, 10), st.fractions(0, 1))
def test_coverage_monotone_in_fraction(d, t, f):
    assert sv.coverage_estimate(d, t, f) <= sv.coverage_estimate(d, t, 1)


# --- push --------------------------------------------------------------------------


def test_push_echoes_servent_id():
    s = _state()
    hit = gw.QueryHitPayload(1, "1.1.1.1", 56, (gw.QueryHitResult(7, 10, "x"),), b"F" * 16)
    push = sv.initiate_push(s, hit, 7, random.Random(0))
    assert push.payload.servent_id == b"F" * 16
    assert push.payload.file_index == 7


def test_push_unknown_index():
    hit = gw.QueryHitPayload(1, "1.1.1.1", 56, (gw.QueryHitResult(7, 10, "x"),), b"F" * 16)
    with pytest.raises(ValueError):
        sv.initiate_push(_state(), hit, 8)


def test_push_without_route_dropped():
    push = gw.Descriptor.build(b"U" * 16, gw.PushPayload(b"F" * 16, 1, "1.1.1.1", 1), 5)
    (action,) = sv.handle_descriptor(_state(), 1, push)
    assert action.drop_reason == sv.DropReason.NO_REVERSE_ROUTE


def test_push_for_self_delivered():
    push = gw.Descriptor.build(b"U" * 16, gw.PushPayload(b"S" * 16, 1, "1.1.1.1", 1), 5)
    (action,) = sv.handle_descriptor(_state(), 1, push)
    assert action.verb == sv.Verb.DELIVER


# --- properties ----------------------------------------------------------------------


@given(
    st.sets(st.integers(0, 9), max_size=8),
    st.integers(0, 9),
    st.integers(1, 10),
    st.integers(0, 10),
    st.sampled_from(["ping", "query"]),
)
def test_forwarding_rules(neighbors, arrival, ttl, hops, kind):
    s = _state(neighbors=neighbors)
    payload = gw.PingPayload() if kind == "ping" else gw.QueryPayload(0, "x")
    desc = gw.Descriptor.build(b"H" * 16, payload, ttl, hops)
    actions = sv.handle_descriptor(s, arrival, desc)
    fwd = [a for a in actions if a.verb == sv.Verb.FORWARD]
    for a in actions:
        if a.verb in (sv.Verb.FORWARD, sv.Verb.REPLY_BACK):
            assert a.descriptor.ttl >= 1
    for a in fwd:
        assert a.target != arrival
        assert a.descriptor.ttl + a.descriptor.hops == ttl + hops
    if ttl == 1:
        assert not fwd
    else:
        assert {a.target for a in fwd} == neighbors - {arrival}
    assert _verbs(sv.handle_descriptor(s, arrival, desc)) == [sv.Verb.DROP]
