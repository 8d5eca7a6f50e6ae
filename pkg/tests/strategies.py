"""Hypothesis strategies for wire-level values."""

from hypothesis import strategies as st

from p2psim import wire_gnutella as gw
from p2psim import wire_napster as nw
from p2psim import wire_openft as ow

u8 = st.integers(0, 0xFF)
u16 = st.integers(0, 0xFFFF)
u32 = st.integers(0, 0xFFFFFFFF)
ids = st.binary(min_size=16, max_size=16)
ips = st.tuples(u8, u8, u8, u8).map(lambda t: ".".join(map(str, t)))
md5s = st.binary(min_size=16, max_size=16).map(bytes.hex)

# Gnutella strings are NUL-terminated UTF-8
cstrings = st.text(st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"), max_size=40)
# Napster fields: printable ASCII without the quote character
fields = st.text(st.characters(min_codepoint=0x20, max_codepoint=0x7E, blacklist_characters='"'), max_size=24)
nicks = fields.filter(bool)

gnutella_payloads = st.one_of(
    st.just(gw.PingPayload()),
    st.builds(gw.PongPayload, u16, ips, u32, u32),
    st.builds(gw.QueryPayload, u16, cstrings.filter(bool)),
    st.builds(
        gw.QueryHitPayload, u16, ips, u32,
        st.lists(st.builds(gw.QueryHitResult, u32, u32, cstrings), max_size=5).map(tuple), ids,
    ),
    st.builds(gw.PushPayload, ids, u32, ips, u16),
)
descriptors = st.builds(gw.Descriptor.build, ids, gnutella_payloads, u8, u8)

records = st.builds(
    nw.SharedFileRecord, fields, md5s, u32, st.integers(0, 512), st.integers(0, 96000), st.integers(0, 7200)
)
link_types = st.integers(0, 10)
search_results = st.builds(nw.SearchResult, records, nicks, u32, link_types)
ranges = st.one_of(st.none(), st.tuples(u16, u16).map(lambda t: tuple(sorted(t))))

_F = nw.Function
napster_bodies = st.one_of(
    st.builds(lambda *a: (_F.LOGIN, nw.LoginInfo(*a)), nicks, fields, u16, fields, link_types),
    st.builds(lambda *a: (_F.NEW_USER_LOGIN, nw.LoginInfo(*a)), nicks, fields, u16, fields, link_types, nicks),
    st.builds(lambda e: (_F.LOGIN_ACK, nw.LoginAck(e)), fields),
    st.builds(lambda r: (_F.SHARE, r), records),
    st.builds(
        lambda *a: (_F.SEARCH, nw.SearchQuery(*a)),
        st.none() | fields, st.none() | fields, ranges, st.integers(1, 1000), ranges, ranges,
    ),
    st.builds(lambda r: (_F.SEARCH_RESPONSE, r), search_results),
    st.builds(lambda n: (_F.BROWSE, nw.BrowseRequest(n)), nicks),
    st.builds(
        lambda n, rows: (_F.BROWSE_RESPONSE, nw.BrowseResponse(n, tuple(rows))),
        nicks, st.lists(search_results, max_size=3),
    ),
    st.builds(lambda fn, *a: (fn, nw.DownloadRequest(*a)), st.sampled_from([_F.DOWNLOAD_REQUEST, _F.ALT_DOWNLOAD_REQUEST]), nicks, fields),
    st.builds(
        lambda fn, *a: (fn, nw.DownloadAck(*a)),
        st.sampled_from([_F.DOWNLOAD_ACK, _F.ALT_DOWNLOAD_ACK]), nicks, u32, u16, fields, md5s, link_types,
    ),
    st.builds(lambda fn, *a: (fn, nw.TransferNotice(*a)), st.sampled_from([_F.DOWNLOADING_FILE, _F.DOWNLOAD_COMPLETE]), nicks, fields),
)

utf8 = st.text(st.characters(blacklist_categories=("Cs",)), max_size=30)
_K = ow.PacketKind
_share_kinds = st.sampled_from([_K.ADDSHARE, _K.REMSHARE, _K.MODSHARE])
_kv_kinds = st.sampled_from([_K.NODECAP, _K.SESSION, _K.STATS])
_opaque_kinds = st.sampled_from([k for k in _K if ow.payload_types(k) == (ow.Opaque,)])
_even_flags = st.integers(0, 7).map(lambda f: f << 1)
_any_flags = st.integers(0, 15)
openft_records = st.builds(
    nw.SharedFileRecord, utf8, md5s, st.integers(0, 2**64 - 1), u32, u32, u32
)
openft_packets = st.one_of(
    st.builds(lambda *a: ow.OpenFTPacket(_K.NODEINFO, ow.NodeInfo(*a[:4]), a[4]),
              ips, u16, u16, st.integers(1, 7).map(ow.NodeClass), _any_flags),
    st.builds(lambda *a: ow.OpenFTPacket(_K.CHILD, ow.ChildPayload(*a[:3]), a[3]),
              ips, u16, st.sampled_from(list(ow.ChildStatus)), _any_flags),
    st.builds(lambda k, r, f: ow.OpenFTPacket(k, ow.ShareRecord(r), f), _share_kinds, openft_records, _any_flags),
    st.builds(lambda k, items, f: ow.OpenFTPacket(k, ow.KeyValues(tuple(items)), f),
              _kv_kinds, st.lists(st.tuples(utf8, utf8), max_size=4), _any_flags),
    st.builds(lambda *a: ow.OpenFTPacket(_K.SEARCH, ow.SearchRequest(*a[:5]), a[5]),
              ids, u8, u8, u16, utf8, _even_flags),
    st.builds(lambda *a: ow.OpenFTPacket(_K.SEARCH, ow.SearchResponse(*a), ow.FLAG_RESPONSE),
              ids, u8, u8, ips, u16, u32, ids,
              st.lists(st.builds(ow.SearchHit, u32, u32, utf8), max_size=4).map(tuple)),
    st.builds(lambda k, d, f: ow.OpenFTPacket(k, ow.Opaque(d), f), _opaque_kinds, st.binary(max_size=32), _any_flags),
)
