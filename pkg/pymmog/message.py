"""Records making up a wire message.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Exported Classes:
WireMessage -- A header plus an ordered list of submessages.
DataSubmessage -- One sample sent by a writer.
HeartbeatSubmessage -- A writer's advertised sequence range.
AckNackSubmessage -- A reader's cumulative ack and missing-sample bitmap.
GapSubmessage -- A writer's notice that a range was intentionally skipped.
DiscoverySubmessage -- A participant announcement with its entity records.
EntityRecord -- One endpoint inside a discovery announcement.
QosSummary -- The QoS fields carried by an EntityRecord.
"""

__all__ = ['WireMessage', 'DataSubmessage', 'HeartbeatSubmessage',
           'AckNackSubmessage', 'GapSubmessage', 'DiscoverySubmessage',
           'EntityRecord', 'QosSummary']

from collections import namedtuple

try:
    from typing import List  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol


class WireMessage(namedtuple('WireMessage',
                             ['guid_prefix', 'submessages', 'flags'])):
    """A datagram: 12-byte sender guid prefix, flags and submessages."""

    __slots__ = ()

    def __new__(cls, guid_prefix, submessages=(), flags=0):
        return super(WireMessage, cls).__new__(cls, bytes(guid_prefix),
                                               tuple(submessages), flags)

    @property
    def simulated(self):
        # type: () -> bool
        """Return True if the network simulator injected this message."""
        return bool(self.flags & protocol.FLAG_SIMULATED)


class DataSubmessage(namedtuple('DataSubmessage',
                                ['writer_id', 'reader_id', 'sequence',
                                 'instance_hash', 'flags', 'coherent_set_id',
                                 'source_timestamp', 'payload'])):
    """A sample; coherent_set_id is None unless the coherent flag is set."""

    __slots__ = ()
    submessage_id = protocol.DATA

    @property
    def coherent(self):
        # type: () -> bool
        return bool(self.flags & protocol.DATA_COHERENT)

    @property
    def coherent_end(self):
        # type: () -> bool
        return bool(self.flags & protocol.DATA_COHERENT_END)


class HeartbeatSubmessage(namedtuple('HeartbeatSubmessage',
                                     ['writer_id', 'first_seq', 'last_seq'])):
    __slots__ = ()
    submessage_id = protocol.HEARTBEAT


class AckNackSubmessage(namedtuple('AckNackSubmessage',
                                   ['reader_id', 'writer_id', 'ack_up_to',
                                    'nack_base', 'nack_count', 'bitmap'])):
    """Cumulative ack plus a bitmap of nack_count bits starting at nack_base.

    Bit i (least significant bit first within each byte) requests
    sequence number nack_base + i.
    """

    __slots__ = ()
    submessage_id = protocol.ACKNACK

    @classmethod
    def build(cls, reader_id, writer_id, ack_up_to, base, missing):
        # type: (int, int, int, int, List[int]) -> AckNackSubmessage
        """Build an ACKNACK requesting the missing sequence numbers."""
        count = 0
        bits = bytearray((protocol.MAX_NACK_BITS + 7) // 8)
        for seq in missing:
            offset = seq - base
            if offset < 0 or offset >= protocol.MAX_NACK_BITS:
                continue
            bits[offset // 8] |= 1 << (offset % 8)
            count = max(count, offset + 1)
        return cls(reader_id, writer_id, ack_up_to, base, count,
                   bytes(bits[:(count + 7) // 8]))

    def missing(self):
        # type: () -> List[int]
        """Return the sequence numbers requested by the bitmap."""
        result = []
        bits = bytearray(self.bitmap)
        for offset in range(self.nack_count):
            if bits[offset // 8] & (1 << (offset % 8)):
                result.append(self.nack_base + offset)
        return result


class GapSubmessage(namedtuple('GapSubmessage',
                               ['reader_id', 'writer_id', 'gap_start',
                                'gap_end'])):
    """The inclusive range [gap_start, gap_end] carries nothing for reader_id."""

    __slots__ = ()
    submessage_id = protocol.GAP


class QosSummary(namedtuple('QosSummary',
                            ['reliability', 'history_kind', 'history_depth',
                             'coherent_access', 'access_scope',
                             'max_samples_per_instance'])):
    __slots__ = ()


class EntityRecord(namedtuple('EntityRecord',
                              ['entity_id', 'kind', 'flags', 'topic_name',
                               'type_hash', 'qos', 'group_data',
                               'filter_text'])):
    """An endpoint announced by discovery; filter_text is '' when unfiltered."""

    __slots__ = ()

    @property
    def deleted(self):
        # type: () -> bool
        return bool(self.flags & protocol.RECORD_DELETED)

    @property
    def is_writer(self):
        # type: () -> bool
        return self.kind == protocol.ENTITY_WRITER


class DiscoverySubmessage(namedtuple('DiscoverySubmessage',
                                     ['participant_guid', 'lease_ms',
                                      'records'])):
    """A participant announcement; lease_ms 0 announces its departure."""

    __slots__ = ()
    submessage_id = protocol.DISCOVERY

    def __new__(cls, participant_guid, lease_ms, records=()):
        return super(DiscoverySubmessage, cls).__new__(
            cls, bytes(participant_guid), lease_ms, tuple(records))
