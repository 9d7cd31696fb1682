"""Encodes a corpus of values and service messages with asyncua and writes
the reference bytes to crates/core/tests/data/codec_corpus.json.

Run from the repository root: python3 tools/oracle/codec_corpus.py
"""

import json
import math
import struct
import uuid
from datetime import datetime, timezone
from pathlib import Path

import asyncua
from asyncua import ua
from asyncua.ua import ua_binary as b

OUT = Path(__file__).resolve().parents[2] / "crates/core/tests/data/codec_corpus.json"
P = b.Primitives
VT = ua.VariantType


def f32_bits(x):
    return struct.unpack("<I", struct.pack("<f", x))[0]


def f64_bits(x):
    return struct.unpack("<Q", struct.pack("<d", x))[0]


def nodeid(ns, ident):
    n = ua.NodeId(ident, ns)
    if isinstance(ident, int):
        d = {"ns": ns, "i": ident}
    elif isinstance(ident, str):
        d = {"ns": ns, "s": ident}
    elif isinstance(ident, uuid.UUID):
        d = {"ns": ns, "g": ident.bytes_le.hex()}
    else:
        d = {"ns": ns, "b": ident.hex()}
    return n, d


def dt(*args):
    d = datetime(*args, tzinfo=timezone.utc)
    return d, ua.datetime_to_win_epoch(d)


scalars = []  # (type name, python value, json value, pack function)

for v in (True, False):
    scalars.append(("Boolean", v, v))
for v in (-128, -1, 0, 1, 127):
    scalars.append(("SByte", v, v))
for v in (0, 1, 127, 128, 255):
    scalars.append(("Byte", v, v))
for v in (-32768, -1, 0, 1, 1000, 32767):
    scalars.append(("Int16", v, v))
for v in (0, 1, 255, 256, 65535):
    scalars.append(("UInt16", v, v))
for v in (-(2**31), -42, -1, 0, 1, 123456789, 2**31 - 1):
    scalars.append(("Int32", v, v))
for v in (0, 1, 2**31, 0xDEADBEEF, 2**32 - 1):
    scalars.append(("UInt32", v, v))
for v in (0.0, -0.0, 1.5, -3.25, 3.4e38, 1e-45, math.inf, -math.inf, math.nan, math.pi):
    scalars.append(("Float", v, f32_bits(v)))
for v in (0.0, -0.0, 1.5, -3.25, 1.7976931348623157e308, 5e-324, math.inf, -math.inf, math.nan, math.e):
    scalars.append(("Double", v, f64_bits(v)))
for v in (None, "", "a", "hello world", "ü€\U0001F600", "x" * 1000, "line\nbreak", "a\x00b"):
    scalars.append(("String", v, v))
for args in ((1601, 1, 2), (1970, 1, 1), (2000, 1, 1), (2024, 2, 29, 12, 30, 45, 123456), (9999, 12, 31, 23, 59, 59)):
    d, ticks = dt(*args)
    scalars.append(("DateTime", d, ticks))
for v in (None, b"", b"\x00", bytes(range(256))):
    scalars.append(("ByteString", v, None if v is None else v.hex()))
for ns, ident in (
    (0, 0),
    (0, 5),
    (0, 255),
    (0, 256),
    (1, 1003),
    (255, 65535),
    (256, 1),
    (1, 65536),
    (2, 2**32 - 1),
    (1, ""),
    (2, "abc"),
    (1, "Device.Temperature"),
    (3, uuid.UUID("72962b91-fa75-4ae6-8d28-b404dc7daf63")),
    (0, uuid.UUID(int=0)),
    (3, b"\x01\x02"),
    (1, bytes(range(16))),
):
    n, d = nodeid(ns, ident)
    scalars.append(("NodeId", n, d))
for ns, name in ((0, None), (0, ""), (1, "n"), (2, "Temperature"), (32767, "max")):
    scalars.append(("QualifiedName", ua.QualifiedName(name, ns), {"ns": ns, "name": name}))
for locale, text in ((None, None), (None, "hi"), ("en", None), ("en", "hi"), ("", ""), ("de-DE", "Grüße")):
    lt = ua.LocalizedText(text, locale)
    scalars.append(("LocalizedText", lt, {"locale": locale, "text": text}))


def pack_scalar(t, v):
    if t in ("NodeId",):
        return b.nodeid_to_binary(v)
    if t in ("QualifiedName", "LocalizedText"):
        return b.struct_to_binary(v)
    return getattr(P, t).pack(v)


entries = []
for t, v, j in scalars:
    entries.append({"kind": t, "value": j, "hex": pack_scalar(t, v).hex()})

entries.append({"kind": "Variant", "value": {"t": "Empty"}, "hex": b.variant_to_binary(ua.Variant()).hex()})
for t, v, j in scalars:
    entries.append(
        {"kind": "Variant", "value": {"t": t, "v": j}, "hex": b.variant_to_binary(ua.Variant(v, getattr(VT, t))).hex()}
    )

d0, _ = dt(2024, 5, 1, 8, 0, 0)
d1, _ = dt(2024, 5, 1, 8, 0, 1, 500)
dv_cases = [
    (None, None, None, None, None, None),
    (("Int32", 42), None, None, None, None, None),
    (("Double", 1.5), 0x80340000, None, None, None, None),
    (None, 0x80000000, None, None, None, None),
    (("String", "ok"), None, d0, None, None, None),
    (("Int32", -7), None, None, None, d1, None),
    (("Int32", 1), 0, d0, 10, d1, 20),
    (("Boolean", True), 0x40000000, d0, None, None, 5),
    (("Float", 2.5), None, None, 9999, None, None),
    (("UInt16", 7), None, d0, None, d1, None),
    (("NodeId", ua.NodeId(5, 0)), None, None, None, None, None),
    (("LocalizedText", ua.LocalizedText("x", "en")), 0x00A00000, d1, None, d0, None),
    (("ByteString", b"\x01\x02\x03"), None, None, None, None, 1),
]


def dv_json(v, status, st, sp, svt, svp):
    def tj(t, x):
        for tt, xv, jj in scalars:
            if tt == t and (xv == x or (isinstance(xv, float) and isinstance(x, float) and struct.pack("<d", xv) == struct.pack("<d", x))):
                return jj
        if t == "Float":
            return f32_bits(x)
        if t == "Double":
            return f64_bits(x)
        if t == "NodeId":
            return {"ns": x.NamespaceIndex, "i": x.Identifier}
        if t == "LocalizedText":
            return {"locale": x.Locale, "text": x.Text}
        if t == "ByteString":
            return x.hex()
        return x

    return {
        # asyncua always encodes a value; None becomes an Empty variant.
        "value": {"t": "Empty"} if v is None else {"t": v[0], "v": tj(*v)},
        "status": status,
        "source_timestamp": None if st is None else ua.datetime_to_win_epoch(st),
        "source_picoseconds": sp,
        "server_timestamp": None if svt is None else ua.datetime_to_win_epoch(svt),
        "server_picoseconds": svp,
    }


def standard_datavalue(dv):
    parts = [b.struct_to_binary(dv)[:1]]
    if dv.Value is not None:
        parts.append(b.variant_to_binary(dv.Value))
    if dv.StatusCode is not None:
        parts.append(P.UInt32.pack(dv.StatusCode.value))
    if dv.SourceTimestamp is not None:
        parts.append(P.DateTime.pack(dv.SourceTimestamp))
    if dv.SourcePicoseconds is not None:
        parts.append(P.UInt16.pack(dv.SourcePicoseconds))
    if dv.ServerTimestamp is not None:
        parts.append(P.DateTime.pack(dv.ServerTimestamp))
    if dv.ServerPicoseconds is not None:
        parts.append(P.UInt16.pack(dv.ServerPicoseconds))
    return b"".join(parts)


for case in dv_cases:
    v, status, st, sp, svt, svp = case
    dv = ua.DataValue(
        Value=None if v is None else ua.Variant(v[1], getattr(VT, v[0])),
        StatusCode=None if status is None else ua.StatusCode(status),
        SourceTimestamp=st,
        SourcePicoseconds=sp,
        ServerTimestamp=svt,
        ServerPicoseconds=svp,
    )
    entry = {"kind": "DataValue", "value": dv_json(*case), "hex": b.struct_to_binary(dv).hex()}
    if sp is not None and svt is not None:
        # asyncua writes its dataclass field order (SourceTimestamp,
        # ServerTimestamp, SourcePicoseconds, ServerPicoseconds). The binary
        # encoding rules put SourcePicoseconds right after SourceTimestamp.
        entry["quirk"] = "datavalue-field-order"
        entry["standard_hex"] = standard_datavalue(dv).hex()
    entries.append(entry)


# Service messages, encoded with their type id prefix.
def header(handle, token=None):
    h = ua.RequestHeader()
    h.AuthenticationToken = token if token is not None else ua.NodeId(b"\x11" * 16, 1)
    h.Timestamp = d0
    h.RequestHandle = handle
    h.TimeoutHint = 10000
    return h


def rheader(handle, status=0):
    h = ua.ResponseHeader()
    h.Timestamp = d1
    h.RequestHandle = handle
    h.ServiceResult = ua.StatusCode(status)
    return h


def rvid(ns, ident, attr=13, rng=None, enc=None):
    r = ua.ReadValueId()
    r.NodeId = ua.NodeId(ident, ns)
    r.AttributeId = attr
    r.IndexRange = rng
    if enc is not None:
        r.DataEncoding = enc
    return r


messages = []

m = ua.ReadRequest()
m.RequestHeader = header(1)
m.Parameters.MaxAge = 0.0
m.Parameters.TimestampsToReturn = ua.TimestampsToReturn.Both
m.Parameters.NodesToRead = [rvid(1, 1003)]
messages.append(("ReadRequest", m, {"handle": 1, "nodes": 1}))

m = ua.ReadRequest()
m.RequestHeader = header(2)
m.Parameters.MaxAge = 500.0
m.Parameters.TimestampsToReturn = ua.TimestampsToReturn.Neither
m.Parameters.NodesToRead = [
    rvid(1, 1001, 13),
    rvid(0, 2256, 13),
    rvid(1, "Device", 3),
    rvid(1, 1002, 13, "1:2"),
    rvid(0, 84, 4, None, ua.QualifiedName("Default Binary", 0)),
]
messages.append(("ReadRequest", m, {"handle": 2, "nodes": 5}))

m = ua.ReadResponse()
m.ResponseHeader = rheader(1)
m.Results = [ua.DataValue(ua.Variant(42, VT.Int32), SourceTimestamp=d0, ServerTimestamp=d1)]
messages.append(("ReadResponse", m, {"handle": 1, "results": 1}))

m = ua.ReadResponse()
m.ResponseHeader = rheader(2)
m.Results = [
    ua.DataValue(ua.Variant(1.25, VT.Double)),
    ua.DataValue(StatusCode=ua.StatusCode(0x80340000)),
    ua.DataValue(ua.Variant(ua.QualifiedName("Device", 1), VT.QualifiedName)),
    ua.DataValue(StatusCode=ua.StatusCode(0x80360000)),
    ua.DataValue(ua.Variant("text", VT.String), ServerTimestamp=d1),
]
messages.append(("ReadResponse", m, {"handle": 2, "results": 5}))

m = ua.WriteRequest()
m.RequestHeader = header(3)
wv = ua.WriteValue()
wv.NodeId = ua.NodeId(1003, 1)
wv.AttributeId = 13
wv.Value = ua.DataValue(ua.Variant(7, VT.Int32))
m.Parameters.NodesToWrite = [wv]
messages.append(("WriteRequest", m, {"handle": 3, "nodes": 1}))

m = ua.WriteRequest()
m.RequestHeader = header(4)
ws = []
for ident, var, rng in ((1001, ua.Variant(-5, VT.Int32), None), (1002, ua.Variant(3.5, VT.Float), None), (1003, ua.Variant("s", VT.String), "0")):
    wv = ua.WriteValue()
    wv.NodeId = ua.NodeId(ident, 1)
    wv.AttributeId = 13
    wv.IndexRange = rng
    wv.Value = ua.DataValue(var, SourceTimestamp=d0)
    ws.append(wv)
m.Parameters.NodesToWrite = ws
messages.append(("WriteRequest", m, {"handle": 4, "nodes": 3}))

m = ua.WriteResponse()
m.ResponseHeader = rheader(3)
m.Results = [ua.StatusCode(0)]
messages.append(("WriteResponse", m, {"handle": 3, "results": 1}))

m = ua.WriteResponse()
m.ResponseHeader = rheader(4)
m.Results = [ua.StatusCode(0), ua.StatusCode(0x80740000), ua.StatusCode(0x803B0000)]
messages.append(("WriteResponse", m, {"handle": 4, "results": 3}))

m = ua.ServiceFault()
m.ResponseHeader = rheader(9, 0x80560000)
messages.append(("ServiceFault", m, {"handle": 9, "status": 0x80560000}))

m = ua.CloseSessionRequest()
m.RequestHeader = header(5)
m.DeleteSubscriptions = True
messages.append(("CloseSessionRequest", m, {"handle": 5}))

m = ua.CloseSessionResponse()
m.ResponseHeader = rheader(5)
messages.append(("CloseSessionResponse", m, {"handle": 5}))

m = ua.CreateSessionRequest()
m.RequestHeader = header(6, ua.NodeId(0, 0))
m.Parameters.ClientDescription.ApplicationUri = "urn:client"
m.Parameters.ClientDescription.ApplicationName = ua.LocalizedText("client")
m.Parameters.ClientDescription.ApplicationType = ua.ApplicationType.Client
m.Parameters.EndpointUrl = "opc.tcp://localhost:4840/"
m.Parameters.SessionName = "s1"
m.Parameters.ClientNonce = bytes(32)
m.Parameters.RequestedSessionTimeout = 60000.0
m.Parameters.MaxResponseMessageSize = 0
messages.append(("CreateSessionRequest", m, {"handle": 6}))

m = ua.ActivateSessionRequest()
m.RequestHeader = header(7)
tok = ua.AnonymousIdentityToken()
tok.PolicyId = "anonymous"
m.Parameters.UserIdentityToken = tok
m.Parameters.LocaleIds = ["en"]
messages.append(("ActivateSessionRequest", m, {"handle": 7}))

m = ua.ActivateSessionResponse()
m.ResponseHeader = rheader(7)
m.Parameters.ServerNonce = bytes(range(32))
messages.append(("ActivateSessionResponse", m, {"handle": 7}))

m = ua.GetEndpointsRequest()
m.RequestHeader = header(8, ua.NodeId(0, 0))
m.Parameters.EndpointUrl = "opc.tcp://localhost:4840/"
messages.append(("GetEndpointsRequest", m, {"handle": 8}))

m = ua.OpenSecureChannelRequest()
m.RequestHeader = header(10, ua.NodeId(0, 0))
m.Parameters.ClientProtocolVersion = 0
m.Parameters.RequestType = ua.SecurityTokenRequestType.Issue
m.Parameters.SecurityMode = ua.MessageSecurityMode.None_
m.Parameters.ClientNonce = b""
m.Parameters.RequestedLifetime = 600000
messages.append(("OpenSecureChannelRequest", m, {"handle": 10}))

m = ua.CloseSecureChannelRequest()
m.RequestHeader = header(11)
messages.append(("CloseSecureChannelRequest", m, {"handle": 11}))

for name, msg, expect in messages:
    entries.append({"kind": "message", "value": {"type": name, **expect}, "hex": b.struct_to_binary(msg).hex()})

OUT.parent.mkdir(parents=True, exist_ok=True)
OUT.write_text(json.dumps({"generator": f"asyncua {asyncua.__version__}", "entries": entries}, indent=1) + "\n")
print(f"{len(entries)} entries -> {OUT}")
