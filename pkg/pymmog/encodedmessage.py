"""A module for housing the EncodedMessage class and the wire codec.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Exported Classes:
EncodedMessage -- Buffer with typed put/get methods over the wire encoding.
SampleCodec -- Encoder/decoder of sample payloads for one TypeDescriptor.

Exported Functions:
encode_message -- Encode a WireMessage into bytes.
decode_message -- Decode bytes into a WireMessage.
encode_sample -- Encode field values per a TypeDescriptor.
decode_sample -- Decode a sample payload per a TypeDescriptor.
"""

__all__ = ['EncodedMessage', 'SampleCodec', 'encode_message',
           'decode_message', 'encode_sample', 'decode_sample']

import struct

try:
    from typing import Any, Dict, List, Mapping, Optional  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .crypt import fnv1a64
from .datatype import TypeDescriptor  # pylint: disable=unused-import
from .exception import DataError, MalformedMessage, OperationalError
from .message import WireMessage, DataSubmessage, HeartbeatSubmessage
from .message import AckNackSubmessage, GapSubmessage, DiscoverySubmessage
from .message import EntityRecord, QosSummary

_U8 = struct.Struct('<B')
_U16 = struct.Struct('<H')
_U16BE = struct.Struct('>H')
_U32 = struct.Struct('<I')
_U64 = struct.Struct('<Q')
_I64 = struct.Struct('<q')
_F32 = struct.Struct('<f')
_F64 = struct.Struct('<d')

_DATA_HEAD = struct.Struct('<IIQQB')
_HEARTBEAT = struct.Struct('<IQQ')
_ACKNACK_HEAD = struct.Struct('<IIQQB')
_GAP = struct.Struct('<IIQQ')
_RECORD_HEAD = struct.Struct('<IBB')
_QOS = struct.Struct('<BBIBBI')

_FIXED_FORMATS = {protocol.FIELD_U32: 'I',
                  protocol.FIELD_U64: 'Q',
                  protocol.FIELD_I64: 'q',
                  protocol.FIELD_F32: 'f',
                  protocol.FIELD_F64: 'd',
                  protocol.FIELD_BOOL: 'B'}


class EncodedMessage(object):  # pylint: disable=too-many-public-methods
    """A byte buffer with typed put/get methods.

    Public Functions:
    putU8 -- Appends an unsigned byte.
    putU16 -- Appends a little-endian u16.
    putU16BE -- Appends a big-endian u16 (submessage lengths).
    putU32 -- Appends a little-endian u32.
    putU64 -- Appends a little-endian u64.
    putI64 -- Appends a little-endian i64.
    putF32 -- Appends a little-endian IEEE single.
    putF64 -- Appends a little-endian IEEE double.
    putBool -- Appends a bool as one byte.
    putString -- Appends a u16 length and UTF-8 bytes.
    putOpaque -- Appends a u16 length and raw bytes.
    putRaw -- Appends raw bytes.
    getU8, getU16, getU16BE, getU32, getU64, getI64, getF32, getF64,
    getBool, getString, getOpaque, getRaw -- Read the next value.
    """

    def __init__(self, data=None):
        # type: (Optional[bytes]) -> None
        self.__output = bytearray()
        self.__input = memoryview(data if data is not None else b'')
        self.__inpos = 0

    def getvalue(self):
        # type: () -> bytes
        """Return the bytes appended so far."""
        return bytes(self.__output)

    def __len__(self):
        # type: () -> int
        return len(self.__output)

    # PUT methods

    def _pack(self, fmt, value, what):
        # type: (struct.Struct, Any, str) -> EncodedMessage
        try:
            self.__output += fmt.pack(value)
        except struct.error:
            raise DataError('%r is not a valid %s' % (value, what))
        return self

    def putU8(self, value):
        # type: (int) -> EncodedMessage
        return self._pack(_U8, value, 'u8')

    def putU16(self, value):
        # type: (int) -> EncodedMessage
        return self._pack(_U16, value, 'u16')

    def putU16BE(self, value):
        # type: (int) -> EncodedMessage
        return self._pack(_U16BE, value, 'u16')

    def putU32(self, value):
        # type: (int) -> EncodedMessage
        return self._pack(_U32, value, 'u32')

    def putU64(self, value):
        # type: (int) -> EncodedMessage
        return self._pack(_U64, value, 'u64')

    def putI64(self, value):
        # type: (int) -> EncodedMessage
        return self._pack(_I64, value, 'i64')

    def putF32(self, value):
        # type: (float) -> EncodedMessage
        return self._pack(_F32, value, 'f32')

    def putF64(self, value):
        # type: (float) -> EncodedMessage
        return self._pack(_F64, value, 'f64')

    def putBool(self, value):
        # type: (bool) -> EncodedMessage
        self.__output.append(1 if value else 0)
        return self

    def putString(self, value):
        # type: (str) -> EncodedMessage
        """Append a u16 length followed by the UTF-8 encoding of value."""
        try:
            data = value.encode('utf-8')
        except (UnicodeEncodeError, AttributeError):
            raise DataError('%r is not encodable text' % (value,))
        return self.putOpaque(data)

    def putOpaque(self, value):
        # type: (bytes) -> EncodedMessage
        """Append a u16 length followed by value."""
        if len(value) > 0xffff:
            raise DataError('opaque value of %d bytes is too long' % (len(value)))
        self.putU16(len(value))
        self.__output += value
        return self

    def putRaw(self, value):
        # type: (bytes) -> EncodedMessage
        self.__output += value
        return self

    # GET methods

    def _hasBytes(self, length):
        # type: (int) -> bool
        return self.__inpos + length <= len(self.__input)

    def remaining(self):
        # type: () -> int
        """Return the number of unread input bytes."""
        return len(self.__input) - self.__inpos

    def _takeBytes(self, length):
        # type: (int) -> bytes
        """Get the next length of bytes off the input.

        :raises MalformedMessage: If fewer bytes remain.
        """
        if not self._hasBytes(length):
            raise MalformedMessage('truncated input (need %d bytes, have %d)'
                                   % (length, self.remaining()))
        try:
            return self.__input[self.__inpos:self.__inpos + length].tobytes()
        finally:
            self.__inpos += length

    def _unpack(self, fmt):
        # type: (struct.Struct) -> Any
        if not self._hasBytes(fmt.size):
            raise MalformedMessage('truncated input (need %d bytes, have %d)'
                                   % (fmt.size, self.remaining()))
        try:
            return fmt.unpack_from(self.__input, self.__inpos)
        finally:
            self.__inpos += fmt.size

    def getU8(self):
        # type: () -> int
        return self._unpack(_U8)[0]

    def getU16(self):
        # type: () -> int
        return self._unpack(_U16)[0]

    def getU16BE(self):
        # type: () -> int
        return self._unpack(_U16BE)[0]

    def getU32(self):
        # type: () -> int
        return self._unpack(_U32)[0]

    def getU64(self):
        # type: () -> int
        return self._unpack(_U64)[0]

    def getI64(self):
        # type: () -> int
        return self._unpack(_I64)[0]

    def getF32(self):
        # type: () -> float
        return self._unpack(_F32)[0]

    def getF64(self):
        # type: () -> float
        return self._unpack(_F64)[0]

    def getBool(self):
        # type: () -> bool
        value = self.getU8()
        if value > 1:
            raise MalformedMessage('invalid bool byte %d' % (value))
        return value == 1

    def getOpaque(self):
        # type: () -> bytes
        return self._takeBytes(self.getU16())

    def getString(self):
        # type: () -> str
        data = self.getOpaque()
        try:
            return data.decode('utf-8')
        except UnicodeDecodeError as ex:
            raise MalformedMessage('invalid UTF-8: %s' % (ex))

    def getRaw(self, length):
        # type: (int) -> bytes
        return self._takeBytes(length)

    def unpack(self, fmt):
        # type: (struct.Struct) -> Any
        """Read a precompiled struct off the input."""
        return self._unpack(fmt)


class SampleCodec(object):
    """Encodes and decodes sample payloads of one type.

    Types without string fields are packed with a single precompiled struct.
    """

    def __init__(self, descriptor):
        # type: (TypeDescriptor) -> None
        self.descriptor = descriptor
        self.__fields = descriptor.fields
        self.__names = [name for name, _ in self.__fields]
        self.__bools = [code == protocol.FIELD_BOOL for _, code in self.__fields]
        if all(code in _FIXED_FORMATS for _, code in self.__fields):
            self.__fixed = struct.Struct(
                '<' + ''.join(_FIXED_FORMATS[code] for _, code in self.__fields))
        else:
            self.__fixed = None
        self.__keys = [(name, descriptor.kind_of(name))
                       for name in descriptor.key_fields]

    def key_bytes(self, values):
        # type: (Mapping[str, Any]) -> bytes
        """Encode only the key fields, in declaration order."""
        out = EncodedMessage()
        for name, code in self.__keys:
            _put_field(out, code, values[name])
        return out.getvalue()

    def instance_hash(self, values):
        # type: (Mapping[str, Any]) -> int
        """Return the FNV-1a 64 hash of the encoded key fields."""
        return fnv1a64(self.key_bytes(values))

    def encode(self, values):
        # type: (Mapping[str, Any]) -> bytes
        """Encode already validated field values."""
        if self.__fixed is not None:
            try:
                return self.__fixed.pack(*[values[name] for name in self.__names])
            except struct.error as ex:
                raise DataError('cannot encode sample: %s' % (ex))
        out = EncodedMessage()
        for name, code in self.__fields:
            _put_field(out, code, values[name])
        return out.getvalue()

    def decode(self, data):
        # type: (bytes) -> Dict[str, Any]
        """Decode a payload, requiring it to be consumed exactly.

        :raises MalformedMessage: On truncation, trailing bytes or bad values.
        """
        if self.__fixed is not None:
            if len(data) != self.__fixed.size:
                raise MalformedMessage('sample payload has %d bytes, expected %d'
                                       % (len(data), self.__fixed.size))
            raw = self.__fixed.unpack(data)
            values = {}
            for name, is_bool, value in zip(self.__names, self.__bools, raw):
                if is_bool:
                    if value > 1:
                        raise MalformedMessage('invalid bool byte %d' % (value))
                    value = value == 1
                values[name] = value
            return values
        inp = EncodedMessage(data)
        values = {}
        for name, code in self.__fields:
            values[name] = _get_field(inp, code)
        if inp.remaining():
            raise MalformedMessage('%d trailing bytes in sample' % (inp.remaining()))
        return values


def _put_field(out, code, value):
    # type: (EncodedMessage, int, Any) -> None
    if code == protocol.FIELD_U32:
        out.putU32(value)
    elif code == protocol.FIELD_U64:
        out.putU64(value)
    elif code == protocol.FIELD_I64:
        out.putI64(value)
    elif code == protocol.FIELD_F32:
        out.putF32(value)
    elif code == protocol.FIELD_F64:
        out.putF64(value)
    elif code == protocol.FIELD_BOOL:
        out.putBool(value)
    else:
        out.putString(value)


def _get_field(inp, code):
    # type: (EncodedMessage, int) -> Any
    if code == protocol.FIELD_U32:
        return inp.getU32()
    if code == protocol.FIELD_U64:
        return inp.getU64()
    if code == protocol.FIELD_I64:
        return inp.getI64()
    if code == protocol.FIELD_F32:
        return inp.getF32()
    if code == protocol.FIELD_F64:
        return inp.getF64()
    if code == protocol.FIELD_BOOL:
        return inp.getBool()
    return inp.getString()


def encode_sample(descriptor, values):
    # type: (TypeDescriptor, Mapping[str, Any]) -> bytes
    """Validate and encode field values per descriptor."""
    return SampleCodec(descriptor).encode(descriptor.check_values(values))


def decode_sample(descriptor, data):
    # type: (TypeDescriptor, bytes) -> Dict[str, Any]
    """Decode a sample payload per descriptor."""
    return SampleCodec(descriptor).decode(data)


# Submessage payloads

def _encode_payload(sub):
    # type: (Any) -> bytes
    out = EncodedMessage()
    if isinstance(sub, DataSubmessage):
        coherent = bool(sub.flags & protocol.DATA_COHERENT)
        if sub.flags & protocol.DATA_COHERENT_END and not coherent:
            raise DataError('coherent end flag without coherent set')
        if coherent != (sub.coherent_set_id is not None):
            raise DataError('coherent_set_id must be present iff flagged')
        try:
            out.putRaw(_DATA_HEAD.pack(sub.writer_id, sub.reader_id,
                                       sub.sequence, sub.instance_hash,
                                       sub.flags))
        except struct.error as ex:
            raise DataError('invalid DATA submessage: %s' % (ex))
        if coherent:
            out.putU32(sub.coherent_set_id)
        out.putU64(sub.source_timestamp)
        out.putU32(len(sub.payload))
        out.putRaw(sub.payload)
    elif isinstance(sub, HeartbeatSubmessage):
        out.putU32(sub.writer_id).putU64(sub.first_seq).putU64(sub.last_seq)
    elif isinstance(sub, AckNackSubmessage):
        if sub.nack_count > protocol.MAX_NACK_BITS:
            raise DataError('ACKNACK bitmap of %d bits is too long' % (sub.nack_count))
        if len(sub.bitmap) != (sub.nack_count + 7) // 8:
            raise DataError('ACKNACK bitmap length does not match its count')
        out.putU32(sub.reader_id).putU32(sub.writer_id)
        out.putU64(sub.ack_up_to).putU64(sub.nack_base).putU8(sub.nack_count)
        out.putRaw(sub.bitmap)
    elif isinstance(sub, GapSubmessage):
        out.putU32(sub.reader_id).putU32(sub.writer_id)
        out.putU64(sub.gap_start).putU64(sub.gap_end)
    elif isinstance(sub, DiscoverySubmessage):
        if len(sub.participant_guid) != protocol.GUID_SIZE:
            raise DataError('participant guid must be %d bytes' % (protocol.GUID_SIZE))
        out.putRaw(sub.participant_guid).putU32(sub.lease_ms)
        out.putU16(len(sub.records))
        for record in sub.records:
            _put_record(out, record)
    else:
        raise DataError('cannot encode submessage %r' % (sub,))
    return out.getvalue()


def _put_record(out, record):
    # type: (EncodedMessage, EntityRecord) -> None
    qos = record.qos
    try:
        out.putRaw(_RECORD_HEAD.pack(record.entity_id, record.kind, record.flags))
        out.putString(record.topic_name)
        out.putU64(record.type_hash)
        out.putRaw(_QOS.pack(qos.reliability, qos.history_kind,
                             qos.history_depth, qos.coherent_access,
                             qos.access_scope, qos.max_samples_per_instance))
    except struct.error as ex:
        raise DataError('invalid entity record: %s' % (ex))
    out.putOpaque(record.group_data)
    out.putString(record.filter_text)


def _get_record(inp):
    # type: (EncodedMessage) -> EntityRecord
    entity_id, kind, flags = inp.unpack(_RECORD_HEAD)
    topic_name = inp.getString()
    type_hash = inp.getU64()
    qos = QosSummary(*inp.unpack(_QOS))
    group_data = inp.getOpaque()
    filter_text = inp.getString()
    return EntityRecord(entity_id, kind, flags, topic_name, type_hash, qos,
                        group_data, filter_text)


def _decode_payload(sub_id, payload):
    # type: (int, bytes) -> Any
    inp = EncodedMessage(payload)
    if sub_id == protocol.DATA:
        writer_id, reader_id, seq, ihash, flags = inp.unpack(_DATA_HEAD)
        coherent_set_id = None
        if flags & protocol.DATA_COHERENT:
            coherent_set_id = inp.getU32()
        elif flags & protocol.DATA_COHERENT_END:
            raise MalformedMessage('coherent end flag without coherent set')
        timestamp = inp.getU64()
        data = inp.getRaw(inp.getU32())
        sub = DataSubmessage(writer_id, reader_id, seq, ihash, flags,
                             coherent_set_id, timestamp, data)
    elif sub_id == protocol.HEARTBEAT:
        sub = HeartbeatSubmessage(*inp.unpack(_HEARTBEAT))
    elif sub_id == protocol.ACKNACK:
        reader_id, writer_id, ack, base, count = inp.unpack(_ACKNACK_HEAD)
        bitmap = inp.getRaw((count + 7) // 8)
        sub = AckNackSubmessage(reader_id, writer_id, ack, base, count, bitmap)
    elif sub_id == protocol.GAP:
        sub = GapSubmessage(*inp.unpack(_GAP))
    else:
        guid = inp.getRaw(protocol.GUID_SIZE)
        lease = inp.getU32()
        records = [_get_record(inp) for _ in range(inp.getU16())]
        sub = DiscoverySubmessage(guid, lease, records)
    if inp.remaining():
        raise MalformedMessage('%d trailing bytes in submessage %d'
                               % (inp.remaining(), sub_id))
    return sub


_KNOWN_SUBMESSAGES = (protocol.DATA, protocol.HEARTBEAT, protocol.ACKNACK,
                      protocol.GAP, protocol.DISCOVERY)


def encode_message(message):
    # type: (WireMessage) -> bytes
    """Encode a WireMessage.

    :raises DataError: If the message is structurally invalid.
    :raises OperationalError: If the result exceeds the maximum message size.
    """
    if len(message.guid_prefix) != protocol.GUID_PREFIX_SIZE:
        raise DataError('guid prefix must be %d bytes' % (protocol.GUID_PREFIX_SIZE))
    out = EncodedMessage()
    out.putRaw(protocol.MAGIC).putU8(protocol.VERSION).putU8(message.flags)
    out.putRaw(message.guid_prefix)
    for sub in message.submessages:
        payload = _encode_payload(sub)
        if len(payload) > protocol.MAX_SUBMESSAGE_PAYLOAD:
            raise OperationalError('submessage payload of %d bytes exceeds the limit'
                                   % (len(payload)), protocol.RESOURCE_LIMIT)
        out.putU8(sub.submessage_id).putU16BE(len(payload)).putRaw(payload)
    if len(out) > protocol.MAX_MESSAGE_SIZE:
        raise OperationalError('message of %d bytes exceeds the limit' % (len(out)),
                               protocol.RESOURCE_LIMIT)
    return out.getvalue()


def decode_message(data):
    # type: (bytes) -> WireMessage
    """Decode a datagram; unknown submessage ids are skipped.

    :raises MalformedMessage: On a bad header, truncation or bad UTF-8.
    """
    inp = EncodedMessage(data)
    if inp.getRaw(4) != protocol.MAGIC:
        raise MalformedMessage('bad magic')
    version = inp.getU8()
    if version != protocol.VERSION:
        raise MalformedMessage('unsupported version %d' % (version))
    flags = inp.getU8()
    prefix = inp.getRaw(protocol.GUID_PREFIX_SIZE)
    submessages = []
    while inp.remaining():
        sub_id = inp.getU8()
        payload = inp.getRaw(inp.getU16BE())
        if sub_id in _KNOWN_SUBMESSAGES:
            submessages.append(_decode_payload(sub_id, payload))
    return WireMessage(prefix, submessages, flags)
