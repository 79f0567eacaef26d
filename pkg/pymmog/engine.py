"""The per-participant protocol engine.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

The engine owns every piece of protocol state of one participant: writer
histories and their reader proxies, reader caches and their writer
proxies, discovered remote participants and the outgoing datagrams.  It is
driven by tick() and by received datagrams; every entry point runs with
the participant lock held and queues listener events for dispatch after
the lock is released.

Reliable dissemination: written samples go out as DATA at the next tick.
Sequence numbers a reader will never get (filtered writer-side, written
before the match, evicted from history) are announced with a GAP placed
in front of the next DATA for that reader, or flushed together with the
HEARTBEAT.  HEARTBEATs go only to destinations holding unacknowledged
samples; readers answer each with an ACKNACK and the writer resends what
was NACKed.

Coherent sets ship to each reader as one datagram.  A reader with
coherent access commits the set to its cache once every writer stream
taking part has delivered everything before it.

Exported Classes:
Engine -- Protocol state machine of one participant.
WriterState, ReaderState -- Protocol state behind DataWriter/DataReader.
PublisherState -- Suspension, coherent set and outbox of a Publisher.
"""

__all__ = ['Engine', 'WriterState', 'ReaderState', 'PublisherState',
           'RemoteParticipant', 'MatchedEndpoint', 'guid_of']

from collections import namedtuple, OrderedDict
import logging
import struct

try:
    from typing import Any, Dict, List, Optional, Set, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .datatype import SampleInfo
from .encodedmessage import encode_message, decode_message
from .exception import Error, InterfaceError, MalformedMessage, OperationalError
from .filter import parse_filter
from .history import CacheChange, WriterHistory, ReaderCache
from .message import WireMessage, DataSubmessage, HeartbeatSubmessage
from .message import AckNackSubmessage, GapSubmessage, DiscoverySubmessage
from .message import EntityRecord
from .qos import KEEP_ALL, RELIABLE, check_compatible
from .status import StatusTracker

logger = logging.getLogger(__name__)

_ENTITY_ID = struct.Struct('>I')

# Encoded sizes used when packing submessages into datagrams.
_SUB_HEADER = 3
_DATA_FIXED = 25 + 8 + 4
_GAP_SIZE = _SUB_HEADER + 24
_HEARTBEAT_SIZE = _SUB_HEADER + 20
_DATAGRAM_BUDGET = protocol.MAX_MESSAGE_SIZE - protocol.HEADER_SIZE

MAX_SAMPLE_SIZE = protocol.MAX_SUBMESSAGE_PAYLOAD - _DATA_FIXED - 4

MatchedEndpoint = namedtuple('MatchedEndpoint',
                             ['guid', 'topic_name', 'qos', 'group_data',
                              'filter_text'])


def guid_of(prefix, entity_id):
    # type: (bytes, int) -> bytes
    return prefix + _ENTITY_ID.pack(entity_id)


def _sub_size(sub):
    # type: (Any) -> int
    if isinstance(sub, DataSubmessage):
        extra = 4 if sub.coherent_set_id is not None else 0
        return _SUB_HEADER + _DATA_FIXED + extra + len(sub.payload)
    if isinstance(sub, GapSubmessage):
        return _GAP_SIZE
    if isinstance(sub, HeartbeatSubmessage):
        return _HEARTBEAT_SIZE
    if isinstance(sub, AckNackSubmessage):
        return _SUB_HEADER + 25 + len(sub.bitmap)
    return _SUB_HEADER + 22 + sum(_record_size(r) for r in sub.records)


def _record_size(record):
    # type: (EntityRecord) -> int
    return (6 + 2 + len(record.topic_name.encode('utf-8')) + 8 + 12
            + 2 + len(record.group_data)
            + 2 + len(record.filter_text.encode('utf-8')))


class ReaderProxy(object):
    """A writer's view of one matched reader."""

    __slots__ = ('guid', 'reader_id', 'address', 'reliable', 'filter',
                 'relevant_from', 'processed_upto', 'announced_upto',
                 'acked_upto', 'record')

    def __init__(self, guid, address, reliable, filt, relevant_from, record):
        # type: (bytes, Any, bool, Any, int, EntityRecord) -> None
        self.guid = guid
        self.reader_id = record.entity_id
        self.address = address
        self.reliable = reliable
        self.filter = filt
        self.relevant_from = relevant_from
        self.processed_upto = relevant_from - 1
        self.announced_upto = 0
        self.acked_upto = 0
        self.record = record

    def passes(self, change):
        # type: (CacheChange) -> bool
        return self.filter is None or self.filter.matches(change.values)


class WriterProxy(object):
    """A reader's view of one matched writer."""

    __slots__ = ('guid', 'address', 'reliable', 'next_expected',
                 'last_accepted', 'pending', 'gaps', 'seen', 'record')

    def __init__(self, guid, address, reliable, record):
        # type: (bytes, Any, bool, EntityRecord) -> None
        self.guid = guid
        self.address = address
        self.reliable = reliable
        self.next_expected = 1
        self.last_accepted = 0
        self.pending = {}    # type: Dict[int, Any]
        self.gaps = []       # type: List[Tuple[int, int]]
        self.seen = False
        self.record = record

    def in_gap(self, seq):
        # type: (int) -> bool
        for start, end in self.gaps:
            if start <= seq <= end:
                return True
        return False


class CoherentBatch(object):
    """The writes of one coherent set, in write order."""

    __slots__ = ('set_id', 'members')

    def __init__(self, set_id):
        # type: (int) -> None
        self.set_id = set_id
        self.members = []  # type: List[Tuple[WriterState, CacheChange]]


class _Sample(object):
    __slots__ = ('values', 'sub')

    def __init__(self, values, sub):
        self.values = values
        self.sub = sub


class _UnitMember(object):
    __slots__ = ('unit',)

    def __init__(self, unit):
        self.unit = unit


class CoherentUnit(object):
    """A coherent set received by one reader, waiting to be committed."""

    def __init__(self, key, members):
        # type: (Tuple[bytes, int], List[Tuple[WriterProxy, DataSubmessage, Dict[str, Any]]]) -> None
        self.key = key
        self.members = members
        self.seqs = OrderedDict()  # type: OrderedDict
        for proxy, sub, _ in members:
            self.seqs.setdefault(proxy, []).append(sub.sequence)
        self.ready = set()  # type: Set[WriterProxy]

    def reliable_proxies(self):
        # type: () -> List[WriterProxy]
        return [proxy for proxy in self.seqs if proxy.reliable]

    def complete(self):
        # type: () -> bool
        return all(proxy in self.ready for proxy in self.reliable_proxies())


class PublisherState(object):
    def __init__(self, entity):
        # type: (Any) -> None
        self.entity = entity
        self.writers = []        # type: List[WriterState]
        self.suspended = False
        self.held = []           # type: List[Any]
        self.open_batch = None   # type: Optional[CoherentBatch]
        self.last_set_id = 0
        self.outbox = []         # type: List[Any]

    @property
    def qos(self):
        return self.entity.qos


class WriterState(object):
    def __init__(self, entity, entity_id, guid, topic, qos, publisher):
        # type: (Any, int, bytes, Any, Any, PublisherState) -> None
        self.entity = entity
        self.entity_id = entity_id
        self.guid = guid
        self.topic = topic
        self.qos = qos
        self.publisher = publisher
        self.history = WriterHistory(qos)
        self.last_seq = 0
        self.released_upto = 0
        self.last_ts = 0
        self.proxies = OrderedDict()  # type: OrderedDict
        self.set_index = {}           # type: Dict[int, CoherentBatch]
        self.incompatible = set()     # type: Set[bytes]
        self.tracker = StatusTracker()
        self.samples_sent = 0

    def record(self, deleted=False):
        # type: (bool) -> EntityRecord
        return EntityRecord(self.entity_id, protocol.ENTITY_WRITER,
                            protocol.RECORD_DELETED if deleted else 0,
                            self.topic.name, self.topic.type_hash,
                            self.qos.summary(), self.qos.group_data, '')


class ReaderState(object):
    def __init__(self, entity, entity_id, guid, topic, qos, expression):
        # type: (Any, int, bytes, Any, Any, Any) -> None
        self.entity = entity
        self.entity_id = entity_id
        self.guid = guid
        self.topic = topic
        self.qos = qos
        self.filter = expression
        self.cache = ReaderCache(qos)
        self.proxies = OrderedDict()  # type: OrderedDict
        self.units = {}               # type: Dict[Tuple[bytes, int], CoherentUnit]
        self.incompatible = set()     # type: Set[bytes]
        self.lost_writers = set()     # type: Set[bytes]
        self.tracker = StatusTracker()
        self.delivered = 0

    def record(self, deleted=False):
        # type: (bool) -> EntityRecord
        return EntityRecord(self.entity_id, protocol.ENTITY_READER,
                            protocol.RECORD_DELETED if deleted else 0,
                            self.topic.name, self.topic.type_hash,
                            self.qos.summary(), self.qos.group_data,
                            self.filter.text if self.filter is not None else '')


class RemoteParticipant(object):
    """A discovered participant; the local participant is one too."""

    def __init__(self, guid, address, lease_ms, now, own=False):
        # type: (bytes, Any, int, float, bool) -> None
        self.guid = guid
        self.prefix = guid[:protocol.GUID_PREFIX_SIZE]
        self.address = address
        self.lease_ms = lease_ms
        self.last_heard = now
        self.alive = True
        self.own = own
        self.records = {}        # type: Dict[int, EntityRecord]
        self.deleted_ids = set()  # type: Set[int]
        self.last_records = None  # type: Any


class Engine(object):
    """Protocol engine of one DomainParticipant.

    Public Functions:
    add_writer / remove_writer, add_reader / remove_reader -- Endpoints.
    write -- Store a sample and queue it for transmission.
    begin_coherent / end_coherent / suspend / resume -- Publisher control.
    take / read -- Remove or copy samples from a reader cache.
    tick -- Liveliness, discovery, transmission and heartbeats.
    receive -- Process one received datagram.
    """

    def __init__(self, participant):
        # type: (Any) -> None
        self.participant = participant
        self.prefix = participant.guid_prefix
        self.writers = OrderedDict()     # type: OrderedDict
        self.readers = OrderedDict()     # type: OrderedDict
        self.publishers = []             # type: List[PublisherState]
        self.remotes = OrderedDict()     # type: OrderedDict
        self.tombstones = OrderedDict()  # type: OrderedDict
        self.readers_of = {}             # type: Dict[bytes, List[ReaderState]]
        self.tracker = StatusTracker()
        self.discovery_dirty = True
        self.next_announce = 0.0
        self.next_heartbeat = 0.0
        self.__outgoing = []             # type: List[Tuple[Any, List[Any], bool]]
        self.retransmissions = 0
        self.datagrams_sent = 0
        self.bytes_sent = 0
        self.datagrams_received = 0
        self.bytes_received = 0
        self.malformed = 0

    # Properties of the participant

    @property
    def now(self):
        # type: () -> float
        return self.participant.clock.now_ms()

    @property
    def address(self):
        return self.participant.link.address

    def _event(self, state, hook, is_writer=False):
        # type: (Any, str, bool) -> None
        self.participant.dispatcher.queue(state.entity, hook,
                                          state.tracker.snapshot(is_writer))

    def _participant_event(self):
        # type: () -> None
        self.participant.dispatcher.queue(self.participant,
                                          'on_liveliness_changed',
                                          self.tracker.snapshot())

    # Endpoints

    def add_publisher(self, entity):
        # type: (Any) -> PublisherState
        state = PublisherState(entity)
        self.publishers.append(state)
        return state

    def remove_publisher(self, state):
        # type: (PublisherState) -> None
        for ws in list(state.writers):
            self.remove_writer(ws)
        self.publishers.remove(state)

    def add_writer(self, entity, entity_id, topic, qos, publisher):
        # type: (Any, int, Any, Any, PublisherState) -> WriterState
        ws = WriterState(entity, entity_id, guid_of(self.prefix, entity_id),
                         topic, qos, publisher)
        self.writers[entity_id] = ws
        publisher.writers.append(ws)
        self.discovery_dirty = True
        for remote in self.remotes.values():
            if remote.alive:
                for record in remote.records.values():
                    if not record.is_writer:
                        self._match_reader_record(ws, remote, record)
        return ws

    def remove_writer(self, ws):
        # type: (WriterState) -> None
        self.writers.pop(ws.entity_id, None)
        if ws in ws.publisher.writers:
            ws.publisher.writers.remove(ws)
        ws.proxies.clear()
        self._tombstone(ws.record(deleted=True))

    def add_reader(self, entity, entity_id, topic, qos, expression):
        # type: (Any, int, Any, Any, Any) -> ReaderState
        rs = ReaderState(entity, entity_id, guid_of(self.prefix, entity_id),
                         topic, qos, expression)
        self.readers[entity_id] = rs
        self.discovery_dirty = True
        for remote in self.remotes.values():
            if remote.alive:
                for record in remote.records.values():
                    if record.is_writer:
                        self._match_writer_record(rs, remote, record)
        return rs

    def remove_reader(self, rs):
        # type: (ReaderState) -> None
        self.readers.pop(rs.entity_id, None)
        for guid in list(rs.proxies):
            self._drop_writer_proxy(rs, guid, lost=False, notify=False)
        self._tombstone(rs.record(deleted=True))

    def _tombstone(self, record):
        # type: (EntityRecord) -> None
        expires = self.now + protocol.TOMBSTONE_LEASES * self.participant.lease_ms
        self.tombstones[record.entity_id] = (record, expires)
        self.discovery_dirty = True

    # Writing

    def write(self, ws, values, timestamp=None):
        # type: (WriterState, Dict[str, Any], Optional[int]) -> int
        """Store a sample in the writer history and release or hold it.

        :returns: The sequence number assigned to the sample.
        """
        topic = ws.topic
        values = topic.descriptor.check_values(values)
        payload = topic.codec.encode(values)
        if len(payload) > MAX_SAMPLE_SIZE:
            raise OperationalError('sample of %d bytes does not fit in a message'
                                   % (len(payload)), protocol.RESOURCE_LIMIT)
        if timestamp is None:
            ts = max(int(round(self.now * 1000)), ws.last_ts + 1)
        else:
            ts = int(timestamp)
            if ts < 0 or ts > 0xffffffffffffffff:
                raise InterfaceError('timestamp %r out of range' % (timestamp,))
        pub = ws.publisher
        batch = pub.open_batch
        seq = ws.last_seq + 1
        change = CacheChange(seq, topic.descriptor.key_of(values),
                             topic.codec.instance_hash(values), values, payload,
                             ts, batch.set_id if batch is not None else None)
        ws.history.add(change, lambda s: self._acked_by_all(ws, s))
        ws.last_seq = seq
        ws.last_ts = max(ws.last_ts, ts)
        if batch is not None:
            batch.members.append((ws, change))
            ws.set_index[seq] = batch
        elif pub.suspended:
            pub.held.append((ws, change))
        else:
            self._release(pub, (ws, change))
        return seq

    def _acked_by_all(self, ws, seq):
        # type: (WriterState, int) -> bool
        change = ws.history.get(seq)
        for proxy in ws.proxies.values():
            if not proxy.reliable or seq < proxy.relevant_from:
                continue
            if seq <= proxy.acked_upto:
                continue
            if change is not None and not proxy.passes(change):
                continue
            return False
        return True

    def _release(self, pub, item):
        # type: (PublisherState, Any) -> None
        if isinstance(item, CoherentBatch):
            for ws, change in item.members:
                ws.released_upto = max(ws.released_upto, change.sequence)
        else:
            ws, change = item
            ws.released_upto = max(ws.released_upto, change.sequence)
        pub.outbox.append(item)

    def begin_coherent(self, pub):
        # type: (PublisherState) -> int
        if not pub.qos.coherent_access:
            raise InterfaceError('publisher does not offer coherent access')
        if pub.open_batch is not None:
            raise InterfaceError('a coherent set is already open')
        pub.last_set_id = (pub.last_set_id % 0xffffffff) + 1
        pub.open_batch = CoherentBatch(pub.last_set_id)
        return pub.last_set_id

    def end_coherent(self, pub):
        # type: (PublisherState) -> None
        batch = pub.open_batch
        if batch is None:
            raise InterfaceError('no coherent set is open')
        pub.open_batch = None
        if not batch.members:
            return
        if pub.suspended:
            pub.held.append(batch)
        else:
            self._release(pub, batch)

    def suspend(self, pub):
        # type: (PublisherState) -> None
        pub.suspended = True

    def resume(self, pub):
        # type: (PublisherState) -> None
        if not pub.suspended:
            return
        pub.suspended = False
        held, pub.held = pub.held, []
        for item in held:
            self._release(pub, item)

    def all_acknowledged(self, ws):
        # type: (WriterState) -> bool
        if ws.publisher.outbox:
            return False
        for proxy in ws.proxies.values():
            if proxy.reliable and proxy.acked_upto < proxy.announced_upto:
                return False
        return True

    # Reading

    def take(self, rs, max_samples, remove=True):
        # type: (ReaderState, int, bool) -> List[Tuple[Dict[str, Any], SampleInfo]]
        if remove:
            result = rs.cache.take(max_samples)
            if result:
                # Room was freed: resume flow-controlled writer streams.
                self._drain(rs, list(rs.proxies.values()))
                self._flush()
            return result
        return rs.cache.read(max_samples)

    # Transmission

    def _queue(self, address, subs, standalone=False):
        # type: (Any, List[Any], bool) -> None
        if subs:
            self.__outgoing.append((address, subs, standalone))

    def _transmit(self, pub):
        # type: (PublisherState) -> None
        outbox, pub.outbox = pub.outbox, []
        for item in outbox:
            if isinstance(item, CoherentBatch):
                self._send_batch(item)
            else:
                self._send_change(*item)

    def _send_change(self, ws, change):
        # type: (WriterState, CacheChange) -> None
        seq = change.sequence
        by_address = OrderedDict()  # type: OrderedDict
        at_address = {}             # type: Dict[Any, int]
        for proxy in ws.proxies.values():
            at_address[proxy.address] = at_address.get(proxy.address, 0) + 1
            if seq < proxy.relevant_from:
                continue
            proxy.processed_upto = max(proxy.processed_upto, seq)
            if not proxy.passes(change):
                continue
            by_address.setdefault(proxy.address, []).append(proxy)
        ws.samples_sent += 1
        for address, proxies in by_address.items():
            subs = []
            if (len(proxies) >= 2 and len(proxies) == at_address[address]
                    and all(p.filter is None and p.announced_upto == seq - 1
                            for p in proxies)):
                subs.append(self._data(ws, protocol.BROADCAST_READER, change))
                for proxy in proxies:
                    proxy.announced_upto = seq
            else:
                for proxy in proxies:
                    if proxy.announced_upto < seq - 1:
                        subs.append(GapSubmessage(proxy.reader_id, ws.entity_id,
                                                  proxy.announced_upto + 1, seq - 1))
                    subs.append(self._data(ws, proxy.reader_id, change))
                    proxy.announced_upto = seq
            self._queue(address, subs)

    @staticmethod
    def _data(ws, reader_id, change, flags=0):
        # type: (WriterState, int, CacheChange, int) -> DataSubmessage
        return DataSubmessage(ws.entity_id, reader_id, change.sequence,
                              change.instance_hash, flags,
                              change.coherent_set_id if flags else None,
                              change.source_timestamp, change.payload)

    def _send_batch(self, batch):
        # type: (CoherentBatch) -> None
        targets = OrderedDict()  # type: OrderedDict
        for ws, _ in batch.members:
            for proxy in ws.proxies.values():
                targets.setdefault(proxy.guid, proxy.address)
        for guid, address in targets.items():
            self._queue(address, self._batch_submessages(batch, guid, True),
                        standalone=True)

    def _batch_submessages(self, batch, reader_guid, initial):
        # type: (CoherentBatch, bytes, bool) -> List[Any]
        """Build the datagram carrying batch to one reader.

        Members the reader does not get become GAPs; its last DATA carries
        the coherent end flag.
        """
        subs = []    # type: List[Any]
        last_data = None
        for ws, change in batch.members:
            proxy = ws.proxies.get(reader_guid)
            if proxy is None:
                continue
            seq = change.sequence
            if seq < proxy.relevant_from:
                continue
            if initial:
                proxy.processed_upto = max(proxy.processed_upto, seq)
                if proxy.announced_upto < seq - 1:
                    subs.append(GapSubmessage(proxy.reader_id, ws.entity_id,
                                              proxy.announced_upto + 1, seq - 1))
                proxy.announced_upto = max(proxy.announced_upto, seq)
            current = ws.history.get(seq)
            if current is None or not proxy.passes(current):
                subs.append(GapSubmessage(proxy.reader_id, ws.entity_id, seq, seq))
            else:
                last_data = len(subs)
                subs.append(self._data(ws, proxy.reader_id, current,
                                       protocol.DATA_COHERENT))
        if last_data is not None:
            subs[last_data] = subs[last_data]._replace(
                flags=protocol.DATA_COHERENT | protocol.DATA_COHERENT_END)
        return subs

    def _heartbeats(self):
        # type: () -> None
        for ws in self.writers.values():
            if not ws.proxies:
                continue
            first = ws.history.first_sequence()
            if first is None or first > ws.released_upto:
                first = ws.released_upto + 1
            for seq in [s for s in ws.set_index if s < first]:
                del ws.set_index[seq]
            due = OrderedDict()  # type: OrderedDict
            for proxy in ws.proxies.values():
                if proxy.reliable and proxy.acked_upto < proxy.announced_upto:
                    due[proxy.address] = True
            for address in due:
                subs = []
                for proxy in ws.proxies.values():
                    if (proxy.address == address and proxy.reliable
                            and proxy.announced_upto < proxy.processed_upto):
                        subs.append(GapSubmessage(proxy.reader_id, ws.entity_id,
                                                  proxy.announced_upto + 1,
                                                  proxy.processed_upto))
                        proxy.announced_upto = proxy.processed_upto
                subs.append(HeartbeatSubmessage(ws.entity_id, first,
                                                ws.released_upto))
                self._queue(address, subs)

    def _assemble(self, outgoing):
        # type: (List[Tuple[Any, List[Any], bool]]) -> List[Tuple[Any, WireMessage]]
        messages = []                 # type: List[Tuple[Any, WireMessage]]
        open_lists = OrderedDict()    # type: OrderedDict

        def close(address):
            subs, _ = open_lists.pop(address)
            messages.append((address, WireMessage(self.prefix, subs)))

        for address, subs, standalone in outgoing:
            if standalone:
                if address in open_lists:
                    close(address)
                messages.append((address, WireMessage(self.prefix, subs)))
                continue
            for sub in subs:
                size = _sub_size(sub)
                if address in open_lists and open_lists[address][1] + size > _DATAGRAM_BUDGET:
                    close(address)
                if address not in open_lists:
                    open_lists[address] = ([], 0)
                current, used = open_lists[address]
                current.append(sub)
                open_lists[address] = (current, used + size)
        for address in list(open_lists):
            close(address)
        return messages

    def _flush(self):
        # type: () -> None
        """Send queued submessages; datagrams to ourselves are processed here."""
        while self.__outgoing:
            outgoing, self.__outgoing = self.__outgoing, []
            local = []
            for address, message in self._assemble(outgoing):
                if address == self.address:
                    local.append(message)
                    continue
                data = encode_message(message)
                self.datagrams_sent += 1
                self.bytes_sent += len(data)
                self.participant.link.send(address, data)
            for message in local:
                self._process(message, self.address)

    # Tick

    def tick(self, now):
        # type: (float) -> None
        self._check_liveliness(now)
        for eid in [eid for eid, (_, expires) in self.tombstones.items()
                    if expires <= now]:
            del self.tombstones[eid]
        if self.discovery_dirty or now >= self.next_announce:
            self._announce(now)
        for pub in self.publishers:
            if pub.outbox:
                self._transmit(pub)
        if now >= self.next_heartbeat:
            self._heartbeats()
            self.next_heartbeat = now + self.participant.heartbeat_period
        self._flush()

    # Discovery

    def _records(self):
        # type: () -> List[EntityRecord]
        records = [ws.record() for ws in self.writers.values()]
        records.extend(rs.record() for rs in self.readers.values())
        records.extend(record for record, _ in self.tombstones.values())
        return records

    def _announce(self, now):
        # type: (float) -> None
        self.discovery_dirty = False
        self.next_announce = now + (float(self.participant.lease_ms)
                                    / protocol.DISCOVERY_DIVISOR)
        guid = self.participant.guid
        lease = self.participant.lease_ms
        chunks = []      # type: List[List[EntityRecord]]
        current = []     # type: List[EntityRecord]
        used = _SUB_HEADER + 22
        for record in self._records():
            size = _record_size(record)
            if current and (used + size > _DATAGRAM_BUDGET or len(current) == 0xffff):
                chunks.append(current)
                current, used = [], _SUB_HEADER + 22
            current.append(record)
            used += size
        chunks.append(current)
        peers = self.participant.link.peers()
        for records in chunks:
            sub = DiscoverySubmessage(guid, lease, records)
            for peer in peers:
                self._queue(peer, [sub], standalone=True)
            self._queue(self.address, [sub], standalone=True)

    def announce_departure(self):
        # type: () -> None
        """Tell every peer this participant is gone (lease 0)."""
        message = WireMessage(self.prefix, [DiscoverySubmessage(
            self.participant.guid, 0, [])])
        data = encode_message(message)
        for peer in self.participant.link.peers():
            self.participant.link.send(peer, data)

    def _on_discovery(self, sub, source):
        # type: (DiscoverySubmessage, Any) -> None
        guid = sub.participant_guid
        prefix = guid[:protocol.GUID_PREFIX_SIZE]
        own = prefix == self.prefix
        now = self.now
        remote = self.remotes.get(prefix)
        if sub.lease_ms == 0:
            if remote is None or own:
                return
            del self.remotes[prefix]
            for record in list(remote.records.values()):
                self._unmatch_record(remote, record, lost=False)
            if remote.alive:
                self.tracker.liveliness(-1, 0)
                self._participant_event()
            logger.debug("participant %s left", _hex(guid))
            return
        if remote is None:
            remote = RemoteParticipant(guid, source, sub.lease_ms, now, own)
            self.remotes[prefix] = remote
            if not own:
                self.tracker.liveliness(+1, 0)
                self._participant_event()
                logger.debug("discovered participant %s at %s", _hex(guid), source)
        elif not remote.alive:
            remote.alive = True
            remote.records = {}
            remote.last_records = None
            self.tracker.liveliness(+1, -1)
            self._participant_event()
            logger.debug("participant %s is alive again", _hex(guid))
        remote.last_heard = now
        remote.lease_ms = sub.lease_ms
        remote.address = source
        if sub.records == remote.last_records:
            return
        remote.last_records = sub.records
        for record in sub.records:
            eid = record.entity_id
            if eid in remote.deleted_ids:
                continue
            known = remote.records.get(eid)
            if record.deleted:
                remote.deleted_ids.add(eid)
                if known is not None:
                    del remote.records[eid]
                    self._unmatch_record(remote, known, lost=False)
                continue
            if known == record:
                continue
            if known is not None:
                self._unmatch_record(remote, known, lost=False)
            remote.records[eid] = record
            self._match_record(remote, record)

    def _match_record(self, remote, record):
        # type: (RemoteParticipant, EntityRecord) -> None
        if record.is_writer:
            for rs in list(self.readers.values()):
                self._match_writer_record(rs, remote, record)
        else:
            for ws in list(self.writers.values()):
                self._match_reader_record(ws, remote, record)

    def _match_writer_record(self, rs, remote, record):
        # type: (ReaderState, RemoteParticipant, EntityRecord) -> None
        if (record.topic_name != rs.topic.name
                or record.type_hash != rs.topic.type_hash):
            return
        guid = guid_of(remote.prefix, record.entity_id)
        if guid in rs.proxies:
            return
        policy = check_compatible(record.qos, rs.qos)
        if policy is not None:
            if guid not in rs.incompatible:
                rs.incompatible.add(guid)
                rs.tracker.incompatible_qos(policy)
                self._event(rs, 'on_requested_incompatible_qos')
            return
        reliable = rs.qos.reliability == RELIABLE and record.qos.reliability == RELIABLE
        proxy = WriterProxy(guid, remote.address, reliable, record)
        rs.proxies[guid] = proxy
        self.readers_of.setdefault(guid, []).append(rs)
        rs.tracker.match(+1, record.group_data)
        self._event(rs, 'on_subscription_matched')
        if guid in rs.lost_writers:
            rs.lost_writers.discard(guid)
            rs.tracker.liveliness(+1, -1)
        else:
            rs.tracker.liveliness(+1, 0)
        self._event(rs, 'on_liveliness_changed')
        logger.debug("reader %s matched writer %s", _hex(rs.guid), _hex(guid))

    def _match_reader_record(self, ws, remote, record):
        # type: (WriterState, RemoteParticipant, EntityRecord) -> None
        if (record.topic_name != ws.topic.name
                or record.type_hash != ws.topic.type_hash):
            return
        guid = guid_of(remote.prefix, record.entity_id)
        if guid in ws.proxies:
            return
        policy = check_compatible(ws.qos, record.qos)
        if policy is not None:
            if guid not in ws.incompatible:
                ws.incompatible.add(guid)
                ws.tracker.incompatible_qos(policy)
                self._event(ws, 'on_offered_incompatible_qos', True)
            return
        expression = None
        if record.filter_text and self.participant.writer_side_filtering:
            try:
                expression = parse_filter(record.filter_text, ws.topic)
            except Error:
                # Left to the reader.
                expression = None
        reliable = record.qos.reliability == RELIABLE
        ws.proxies[guid] = ReaderProxy(guid, remote.address, reliable,
                                       expression, ws.released_upto + 1, record)
        ws.tracker.match(+1, record.group_data)
        self._event(ws, 'on_publication_matched', True)
        logger.debug("writer %s matched reader %s", _hex(ws.guid), _hex(guid))

    def _unmatch_record(self, remote, record, lost):
        # type: (RemoteParticipant, EntityRecord, bool) -> None
        guid = guid_of(remote.prefix, record.entity_id)
        if record.is_writer:
            for rs in list(self.readers_of.get(guid, ())):
                self._drop_writer_proxy(rs, guid, lost)
        else:
            for ws in self.writers.values():
                ws.incompatible.discard(guid)
                if ws.proxies.pop(guid, None) is not None:
                    ws.tracker.match(-1)
                    self._event(ws, 'on_publication_matched', True)
        for rs in self.readers.values():
            rs.incompatible.discard(guid)

    def _drop_writer_proxy(self, rs, guid, lost, notify=True):
        # type: (ReaderState, bytes, bool, bool) -> None
        proxy = rs.proxies.pop(guid, None)
        if proxy is None:
            return
        readers = self.readers_of.get(guid)
        if readers is not None and rs in readers:
            readers.remove(rs)
            if not readers:
                del self.readers_of[guid]
        for unit in [u for u in rs.units.values() if proxy in u.seqs]:
            self._discard_unit(rs, unit)
        if not notify:
            return
        rs.tracker.match(-1)
        self._event(rs, 'on_subscription_matched')
        if lost:
            rs.lost_writers.add(guid)
            rs.tracker.liveliness(-1, +1)
        else:
            rs.tracker.liveliness(-1, 0)
        self._event(rs, 'on_liveliness_changed')

    def _check_liveliness(self, now):
        # type: (float) -> None
        for remote in self.remotes.values():
            if remote.own or not remote.alive:
                continue
            if now - remote.last_heard <= protocol.LIVELINESS_LEASE_FACTOR * remote.lease_ms:
                continue
            remote.alive = False
            for record in list(remote.records.values()):
                self._unmatch_record(remote, record, lost=True)
            remote.records = {}
            remote.last_records = None
            self.tracker.liveliness(-1, +1)
            self._participant_event()
            logger.info("participant %s is not alive (silent since %.1f ms)",
                        _hex(remote.guid), remote.last_heard)

    # Receiving

    def receive(self, source, data):
        # type: (Any, bytes) -> None
        self.datagrams_received += 1
        self.bytes_received += len(data)
        try:
            message = decode_message(data)
        except MalformedMessage as ex:
            self.malformed += 1
            logger.warning("dropped malformed datagram from %s: %s", source, ex)
            return
        if message.guid_prefix == self.prefix:
            return
        self._process(message, source)
        self._flush()

    def _process(self, message, source):
        # type: (WireMessage, Any) -> None
        prefix = message.guid_prefix
        sets = OrderedDict()  # type: OrderedDict
        tainted = set()       # type: Set[Tuple[int, int]]
        decoded = {}          # type: Dict[Tuple[int, int], Any]
        remote = self.remotes.get(prefix)
        if remote is not None and remote.alive:
            remote.last_heard = self.now
        for sub in message.submessages:
            if isinstance(sub, DiscoverySubmessage):
                self._on_discovery(sub, source)
                remote = self.remotes.get(prefix)
                continue
            if remote is None or not remote.alive:
                continue
            if isinstance(sub, DataSubmessage):
                self._on_data(prefix, sub, sets, tainted, decoded)
            elif isinstance(sub, GapSubmessage):
                self._on_gap(prefix, sub)
            elif isinstance(sub, HeartbeatSubmessage):
                self._on_heartbeat(prefix, sub, source)
            elif isinstance(sub, AckNackSubmessage):
                self._on_acknack(prefix, sub, source)
        for (reader_id, set_id), entries in sets.items():
            rs = self.readers.get(reader_id)
            if rs is None or (reader_id, set_id) in tainted:
                continue
            self._on_coherent_set(rs, prefix, set_id, entries)

    def _targets(self, writer_guid, reader_id):
        # type: (bytes, int) -> List[ReaderState]
        if reader_id == protocol.BROADCAST_READER:
            return list(self.readers_of.get(writer_guid, ()))
        rs = self.readers.get(reader_id)
        return [rs] if rs is not None else []

    def _decode(self, rs, sub, decoded):
        # type: (ReaderState, DataSubmessage, Dict[int, Any]) -> Optional[Dict[str, Any]]
        key = (id(sub), id(rs.topic))
        if key not in decoded:
            try:
                decoded[key] = rs.topic.codec.decode(sub.payload)
            except MalformedMessage as ex:
                self.malformed += 1
                logger.warning("dropped undecodable sample: %s", ex)
                decoded[key] = None
        values = decoded[key]
        return dict(values) if values is not None else None

    def _on_data(self, prefix, sub, sets, tainted, decoded):
        # type: (bytes, DataSubmessage, Any, Set[Tuple[int, int]], Dict[int, Any]) -> None
        writer_guid = guid_of(prefix, sub.writer_id)
        for rs in self._targets(writer_guid, sub.reader_id):
            proxy = rs.proxies.get(writer_guid)
            coherent = sub.coherent and rs.qos.coherent_access
            if proxy is None:
                if coherent:
                    tainted.add((rs.entity_id, sub.coherent_set_id))
                continue
            proxy.seen = True
            values = self._decode(rs, sub, decoded)
            if values is None:
                if coherent:
                    tainted.add((rs.entity_id, sub.coherent_set_id))
                continue
            if coherent:
                sets.setdefault((rs.entity_id, sub.coherent_set_id), []).append(
                    (proxy, sub, values))
                continue
            if proxy.reliable:
                seq = sub.sequence
                if seq < proxy.next_expected or seq in proxy.pending:
                    continue
                proxy.pending[seq] = _Sample(values, sub)
                self._drain(rs, [proxy])
            else:
                self._accept_best_effort(rs, proxy, sub, values)

    def _accept_best_effort(self, rs, proxy, sub, values):
        # type: (ReaderState, WriterProxy, DataSubmessage, Dict[str, Any]) -> None
        seq = sub.sequence
        if seq <= proxy.last_accepted:
            return
        if seq > proxy.last_accepted + 1:
            self._lose(rs, seq - proxy.last_accepted - 1)
        proxy.last_accepted = seq
        if not self._deliver(rs, proxy, sub, values, check_room=True):
            self._lose(rs, 1)

    def _lose(self, rs, count):
        # type: (ReaderState, int) -> None
        if count > 0:
            rs.tracker.lose(count)
            self._event(rs, 'on_sample_lost')

    def _deliver(self, rs, proxy, sub, values, unit=None, check_room=False):
        # type: (ReaderState, WriterProxy, DataSubmessage, Dict[str, Any], Any, bool) -> bool
        """Put one sample in the cache; False if a full KEEP_ALL refused it."""
        if rs.filter is not None and not rs.filter.matches(values):
            return True
        key = rs.topic.descriptor.key_of(values)
        if check_room and not rs.cache.has_room(key):
            return False
        info = SampleInfo(proxy.guid, sub.sequence, sub.coherent_set_id,
                          sub.coherent_end, True, sub.source_timestamp, key)
        rs.cache.insert(values, info, unit)
        rs.delivered += 1
        self.participant.dispatcher.queue_data_available(
            rs.entity, rs.tracker.snapshot)
        return True

    def _fits(self, rs, entries):
        # type: (ReaderState, List[Tuple[Any, Any, Dict[str, Any]]]) -> bool
        counts = {}  # type: Dict[Any, int]
        for _, _, values in entries:
            if rs.filter is not None and not rs.filter.matches(values):
                continue
            key = rs.topic.descriptor.key_of(values)
            counts[key] = counts.get(key, 0) + 1
        return all(rs.cache.has_room(key, n) for key, n in counts.items())

    def _drain(self, rs, proxies):
        # type: (ReaderState, List[WriterProxy]) -> None
        """Deliver in-order samples of reliable writer streams."""
        work = [p for p in proxies if p.reliable]
        while work:
            proxy = work.pop(0)
            if proxy.guid not in rs.proxies:
                continue
            work.extend(p for p in self._drain_one(rs, proxy) if p not in work)

    def _drain_one(self, rs, proxy):
        # type: (ReaderState, WriterProxy) -> List[WriterProxy]
        woken = []  # type: List[WriterProxy]
        while True:
            ne = proxy.next_expected
            if proxy.gaps:
                jumped = True
                while jumped:
                    jumped = False
                    for gap in list(proxy.gaps):
                        if gap[0] <= ne:
                            proxy.gaps.remove(gap)
                            if gap[1] >= ne:
                                ne = gap[1] + 1
                                jumped = True
                if ne != proxy.next_expected:
                    for seq in [s for s in proxy.pending if s < ne]:
                        del proxy.pending[seq]
                    proxy.next_expected = ne
            item = proxy.pending.get(ne)
            if item is None:
                return woken
            if isinstance(item, _UnitMember):
                unit = item.unit
                unit.ready.add(proxy)
                if not unit.complete() or not self._fits(rs, unit.members):
                    return woken
                self._commit(rs, unit)
                woken.extend(p for p in unit.seqs if p is not proxy and p.reliable)
                continue
            if (rs.qos.history_kind == KEEP_ALL
                    and not self._fits(rs, [(None, None, item.values)])):
                # Flow control until take() frees room.
                return woken
            del proxy.pending[ne]
            proxy.next_expected = ne + 1
            self._deliver(rs, proxy, item.sub, item.values)

    def _commit(self, rs, unit):
        # type: (ReaderState, CoherentUnit) -> None
        token = unit.key
        for proxy, sub, values in unit.members:
            self._deliver(rs, proxy, sub, values, unit=token)
        for proxy, seqs in unit.seqs.items():
            for seq in seqs:
                proxy.pending.pop(seq, None)
            if proxy.reliable:
                proxy.next_expected = max(proxy.next_expected, max(seqs) + 1)
            else:
                proxy.last_accepted = max(proxy.last_accepted, max(seqs))
        rs.units.pop(unit.key, None)
        logger.debug("reader %s committed coherent set %d (%d samples)",
                     _hex(rs.guid), unit.key[1], len(unit.members))

    def _discard_unit(self, rs, unit):
        # type: (ReaderState, CoherentUnit) -> None
        rs.units.pop(unit.key, None)
        for proxy, seqs in unit.seqs.items():
            for seq in seqs:
                proxy.pending.pop(seq, None)
            if proxy.reliable:
                proxy.gaps.append((min(seqs), max(seqs)))
        self._lose(rs, len(unit.members))
        self._drain(rs, [p for p in unit.seqs if p.guid in rs.proxies])

    def _on_coherent_set(self, rs, prefix, set_id, entries):
        # type: (ReaderState, bytes, int, List[Tuple[WriterProxy, DataSubmessage, Dict[str, Any]]]) -> None
        if not any(sub.coherent_end for _, sub, _ in entries):
            return
        key = (prefix, set_id)
        if key in rs.units:
            return
        for proxy, sub, _ in entries:
            if proxy.reliable and (sub.sequence < proxy.next_expected
                                   or sub.sequence in proxy.pending):
                return
            if not proxy.reliable and sub.sequence <= proxy.last_accepted:
                return
        unit = CoherentUnit(key, entries)
        reliable = unit.reliable_proxies()
        if not reliable:
            if self._fits(rs, entries):
                self._commit(rs, unit)
            else:
                self._lose(rs, len(entries))
            return
        rs.units[key] = unit
        for proxy in reliable:
            for seq in unit.seqs[proxy]:
                proxy.pending[seq] = _UnitMember(unit)
        self._drain(rs, reliable)

    def _on_gap(self, prefix, sub):
        # type: (bytes, GapSubmessage) -> None
        writer_guid = guid_of(prefix, sub.writer_id)
        for rs in self._targets(writer_guid, sub.reader_id):
            proxy = rs.proxies.get(writer_guid)
            if proxy is None:
                continue
            proxy.seen = True
            if proxy.reliable:
                if sub.gap_end < proxy.next_expected:
                    continue
                proxy.gaps.append((sub.gap_start, sub.gap_end))
                self._drain(rs, [proxy])
            elif (sub.gap_start <= proxy.last_accepted + 1
                  and sub.gap_end > proxy.last_accepted):
                proxy.last_accepted = sub.gap_end

    def _on_heartbeat(self, prefix, sub, source):
        # type: (bytes, HeartbeatSubmessage, Any) -> None
        writer_guid = guid_of(prefix, sub.writer_id)
        for rs in list(self.readers_of.get(writer_guid, ())):
            proxy = rs.proxies.get(writer_guid)
            if proxy is None or not proxy.reliable:
                continue
            ne = proxy.next_expected
            if proxy.seen and sub.first_seq > ne:
                self._skip_unavailable(rs, proxy, sub.first_seq)
                ne = proxy.next_expected
            missing = []
            last = min(sub.last_seq, ne + protocol.MAX_NACK_BITS - 1)
            for seq in range(ne, last + 1):
                if seq not in proxy.pending and not proxy.in_gap(seq):
                    missing.append(seq)
            self._queue(source, [AckNackSubmessage.build(
                rs.entity_id, sub.writer_id, ne - 1, ne, missing)])

    def _skip_unavailable(self, rs, proxy, first):
        # type: (ReaderState, WriterProxy, int) -> None
        """The writer no longer holds anything below first: count it lost."""
        lost = sum(1 for seq in range(proxy.next_expected, first)
                   if seq not in proxy.pending and not proxy.in_gap(seq))
        start = proxy.next_expected
        for seq in sorted(s for s in proxy.pending if s < first) + [first]:
            if seq > start:
                proxy.gaps.append((start, seq - 1))
            start = max(start, seq + 1)
        self._lose(rs, lost)
        self._drain(rs, [proxy])

    def _on_acknack(self, prefix, sub, source):
        # type: (bytes, AckNackSubmessage, Any) -> None
        ws = self.writers.get(sub.writer_id)
        if ws is None:
            return
        proxy = ws.proxies.get(guid_of(prefix, sub.reader_id))
        if proxy is None:
            return
        proxy.acked_upto = max(proxy.acked_upto, min(sub.ack_up_to, ws.released_upto))
        missing = sub.missing()
        if not missing:
            return
        first = ws.history.first_sequence()
        subs = []   # type: List[Any]
        batches = []  # type: List[CoherentBatch]
        gap = None  # type: Optional[List[int]]
        for seq in missing:
            if seq > ws.released_upto:
                break
            if gap is not None and seq <= gap[1]:
                continue
            change = ws.history.get(seq)
            end = None
            if seq < proxy.relevant_from:
                end = proxy.relevant_from - 1
            elif change is None:
                end = first - 1 if first is not None and seq < first else seq
            elif seq in ws.set_index:
                batch = ws.set_index[seq]
                if batch not in batches:
                    batches.append(batch)
                continue
            elif not proxy.passes(change):
                end = seq
            if end is not None:
                if gap is not None and seq == gap[1] + 1:
                    gap[1] = end
                else:
                    if gap is not None:
                        subs.append(GapSubmessage(proxy.reader_id, ws.entity_id,
                                                  gap[0], gap[1]))
                    gap = [seq, end]
                continue
            if gap is not None:
                subs.append(GapSubmessage(proxy.reader_id, ws.entity_id, gap[0], gap[1]))
                gap = None
            subs.append(self._data(ws, proxy.reader_id, change))
            self.retransmissions += 1
        if gap is not None:
            subs.append(GapSubmessage(proxy.reader_id, ws.entity_id, gap[0], gap[1]))
        self._queue(source, subs)
        for batch in batches:
            resend = self._batch_submessages(batch, proxy.guid, False)
            self.retransmissions += sum(1 for s in resend
                                        if isinstance(s, DataSubmessage))
            self._queue(source, resend, standalone=True)

    # Introspection

    def matched(self, state):
        # type: (Any) -> List[MatchedEndpoint]
        result = []
        for guid, proxy in state.proxies.items():
            record = proxy.record
            result.append(MatchedEndpoint(guid, record.topic_name, record.qos,
                                          record.group_data, record.filter_text))
        return result


def _hex(guid):
    # type: (bytes) -> str
    return ''.join('%02x' % b for b in bytearray(guid))
