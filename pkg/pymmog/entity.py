"""Topics, publishers, subscribers, writers and readers.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Entities are created through their parent (a DomainParticipant creates
topics, publishers and subscribers; a Publisher creates DataWriters; a
Subscriber creates DataReaders).  Every operation on a deleted entity
raises InterfaceError with code ENTITY_DELETED.

Exported Classes:
Topic -- A named, typed data stream.
FilteredTopic -- A topic restricted by a filter expression.
Publisher -- Groups writers; suspension and coherent sets.
Subscriber -- Groups readers.
DataWriter -- Writes samples of one topic.
DataReader -- Reads and takes samples of one topic.
"""

__all__ = ['Topic', 'FilteredTopic', 'Publisher', 'Subscriber',
           'DataWriter', 'DataReader']

import logging

try:
    from typing import Any, Dict, List, Optional, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .datatype import SampleInfo, TypeDescriptor  # pylint: disable=unused-import
from .encodedmessage import SampleCodec
from .exception import InterfaceError
from .filter import FilterExpression, parse_filter
from .qos import QosProfile
from .status import check_not_in_callback

logger = logging.getLogger(__name__)


def _check_qos(qos):
    # type: (Any) -> Optional[QosProfile]
    if qos is None or isinstance(qos, QosProfile):
        return qos
    if hasattr(qos, 'items'):
        return QosProfile.from_dict(qos)
    raise InterfaceError("qos must be a QosProfile or a mapping, not %s"
                         % (type(qos).__name__))


def _inherit(qos, parent, lease_ms):
    # type: (Optional[QosProfile], QosProfile, int) -> QosProfile
    """Merge an endpoint QoS with the presentation and group_data of its parent.

    Liveliness is asserted by the participant, so the effective
    liveliness_lease is always the participant lease.
    """
    if qos is None:
        qos = parent
    if qos.liveliness_lease != lease_ms and qos is not parent:
        logger.debug("endpoint lease %d ms replaced by participant lease %d ms",
                     qos.liveliness_lease, lease_ms)
    return qos.with_changes(
        coherent_access=qos.coherent_access or parent.coherent_access,
        access_scope=max(qos.access_scope, parent.access_scope),
        group_data=qos.group_data or parent.group_data,
        liveliness_lease=lease_ms)


class _Entity(object):
    """Common lifecycle of everything a participant owns."""

    _deleted = False
    listener = None  # type: Any

    def __init__(self, participant):
        # type: (Any) -> None
        self._participant = participant

    @property
    def participant(self):
        # type: () -> Any
        return self._participant

    @property
    def deleted(self):
        # type: () -> bool
        return self._deleted or self._participant.closed

    def _check_deleted(self):
        # type: () -> None
        """Check if the entity is usable.

        :raises InterfaceError: ENTITY_DELETED if it was deleted.
        """
        if self.deleted:
            raise InterfaceError("%s was deleted" % (type(self).__name__),
                                 protocol.ENTITY_DELETED)


class Topic(_Entity):
    """A named stream of samples of one TypeDescriptor."""

    def __init__(self, participant, name, descriptor):
        # type: (Any, str, TypeDescriptor) -> None
        super(Topic, self).__init__(participant)
        if not name:
            raise InterfaceError("topic name must not be empty")
        self.name = name
        self.descriptor = descriptor
        self.codec = SampleCodec(descriptor)

    @property
    def type_hash(self):
        # type: () -> int
        return self.descriptor.type_hash

    @property
    def topic(self):
        # type: () -> Topic
        return self

    def __repr__(self):
        # type: () -> str
        return 'Topic(%r, %r)' % (self.name, self.descriptor)


class FilteredTopic(_Entity):
    """A Topic whose readers only receive samples matching expression."""

    def __init__(self, topic, expression):
        # type: (Topic, Any) -> None
        super(FilteredTopic, self).__init__(topic.participant)
        if not isinstance(expression, FilterExpression):
            expression = parse_filter(expression, topic)
        self.topic = topic
        self.expression = expression

    @property
    def name(self):
        # type: () -> str
        return self.topic.name

    @property
    def descriptor(self):
        # type: () -> TypeDescriptor
        return self.topic.descriptor

    @property
    def codec(self):
        # type: () -> SampleCodec
        return self.topic.codec

    @property
    def type_hash(self):
        # type: () -> int
        return self.topic.type_hash


class Publisher(_Entity):
    """Owns DataWriters and controls when their samples are released.

    Public Functions:
    create_writer / delete_writer -- Manage writers.
    suspend_publication / resume_publication -- Hold and release samples.
    begin_coherent_changes / end_coherent_changes -- Group writes atomically.
    delete -- Delete the publisher and all of its writers.
    """

    def __init__(self, participant, qos):
        # type: (Any, QosProfile) -> None
        super(Publisher, self).__init__(participant)
        self.qos = qos
        self._writers = []  # type: List[DataWriter]
        self._state = participant.engine.add_publisher(self)

    @property
    def writers(self):
        # type: () -> List[DataWriter]
        return list(self._writers)

    def create_writer(self, topic, qos=None, listener=None):
        # type: (Topic, Any, Any) -> DataWriter
        """Create a DataWriter of topic on this publisher.

        :param qos: QosProfile; the publisher's QoS when omitted.
        :param listener: Optional Listener receiving writer events.
        """
        self._check_deleted()
        if isinstance(topic, FilteredTopic):
            raise InterfaceError("writers need a plain topic")
        if topic.participant is not self._participant:
            raise InterfaceError("topic %s belongs to another participant"
                                 % (topic.name))
        qos = _inherit(_check_qos(qos), self.qos, self._participant.lease_ms)
        with self._participant.lock:
            writer = DataWriter(self, topic, qos, listener)
            self._writers.append(writer)
        logger.debug("created writer %s on topic %s", writer, topic.name)
        return writer

    def delete_writer(self, writer):
        # type: (DataWriter) -> None
        self._check_deleted()
        if writer.publisher is not self:
            raise InterfaceError("writer belongs to another publisher")
        writer.delete()

    def suspend_publication(self):
        # type: () -> None
        """Hold written samples until resume_publication(); idempotent."""
        self._check_deleted()
        with self._participant.lock:
            self._participant.engine.suspend(self._state)

    def resume_publication(self):
        # type: () -> None
        """Release every held sample in write order; no-op if not suspended."""
        self._check_deleted()
        with self._participant.lock:
            self._participant.engine.resume(self._state)

    def begin_coherent_changes(self):
        # type: () -> int
        """Open a coherent set; writes until end_coherent_changes() join it.

        :returns: The coherent set id.
        :raises InterfaceError: If coherent access is not offered or a set
                                is already open.
        """
        self._check_deleted()
        with self._participant.lock:
            return self._participant.engine.begin_coherent(self._state)

    def end_coherent_changes(self):
        # type: () -> None
        self._check_deleted()
        with self._participant.lock:
            self._participant.engine.end_coherent(self._state)

    def delete(self):
        # type: () -> None
        """Delete this publisher and every writer it owns."""
        if self.deleted:
            return
        with self._participant.lock:
            for writer in list(self._writers):
                writer.delete()
            self._participant.engine.remove_publisher(self._state)
            self._deleted = True
        self._participant._forget(self)

    def _forget(self, writer):
        # type: (DataWriter) -> None
        if writer in self._writers:
            self._writers.remove(writer)


class Subscriber(_Entity):
    """Owns DataReaders.

    Public Functions:
    create_reader / delete_reader -- Manage readers.
    delete -- Delete the subscriber and all of its readers.
    """

    def __init__(self, participant, qos):
        # type: (Any, QosProfile) -> None
        super(Subscriber, self).__init__(participant)
        self.qos = qos
        self._readers = []  # type: List[DataReader]

    @property
    def readers(self):
        # type: () -> List[DataReader]
        return list(self._readers)

    def create_reader(self, topic, qos=None, listener=None):
        # type: (Any, Any, Any) -> DataReader
        """Create a DataReader of a Topic or FilteredTopic.

        :param qos: QosProfile; the subscriber's QoS when omitted.
        :param listener: Optional Listener receiving reader events.
        """
        self._check_deleted()
        if topic.participant is not self._participant:
            raise InterfaceError("topic %s belongs to another participant"
                                 % (topic.name))
        qos = _inherit(_check_qos(qos), self.qos, self._participant.lease_ms)
        with self._participant.lock:
            reader = DataReader(self, topic, qos, listener)
            self._readers.append(reader)
        logger.debug("created reader %s on topic %s", reader, topic.name)
        return reader

    def delete_reader(self, reader):
        # type: (DataReader) -> None
        self._check_deleted()
        if reader.subscriber is not self:
            raise InterfaceError("reader belongs to another subscriber")
        reader.delete()

    def delete(self):
        # type: () -> None
        """Delete this subscriber and every reader it owns."""
        if self.deleted:
            return
        with self._participant.lock:
            for reader in list(self._readers):
                reader.delete()
            self._deleted = True
        self._participant._forget(self)

    def _forget(self, reader):
        # type: (DataReader) -> None
        if reader in self._readers:
            self._readers.remove(reader)


class DataWriter(_Entity):
    """Writes samples of one topic.

    Public Functions:
    write -- Write one sample; returns its sequence number.
    history_samples -- The samples still held by the writer history.
    matched_subscriptions -- The matched remote readers.
    get_status -- Current StatusSet.
    wait_for_acknowledgments -- Block until reliable readers acknowledged.
    delete -- Delete the writer.
    """

    def __init__(self, publisher, topic, qos, listener=None):
        # type: (Publisher, Topic, QosProfile, Any) -> None
        participant = publisher.participant
        super(DataWriter, self).__init__(participant)
        self.publisher = publisher
        self.topic = topic
        self.qos = qos
        self.listener = listener
        self.entity_id = participant._next_entity_id(protocol.KIND_WRITER)
        self._state = participant.engine.add_writer(
            self, self.entity_id, topic, qos, publisher._state)

    @property
    def guid(self):
        # type: () -> bytes
        return self._state.guid

    def write(self, values, timestamp=None):
        # type: (Dict[str, Any], Optional[int]) -> int
        """Write one sample.

        :param values: Field values conforming to the topic's type.
        :param timestamp: Source timestamp in microseconds; the participant
                          clock when omitted.
        :returns: The sequence number of the sample.
        :raises DataError: If the values do not match the topic type.
        :raises OperationalError: RESOURCE_LIMIT if a KEEP_ALL history is
                                  full of unacknowledged samples.
        """
        self._check_deleted()
        with self._participant.lock:
            return self._participant.engine.write(self._state, values, timestamp)

    def history_samples(self):
        # type: () -> List[Tuple[int, Dict[str, Any]]]
        """Return (sequence number, values) of every sample in the history."""
        self._check_deleted()
        with self._participant.lock:
            return [(change.sequence, dict(change.values))
                    for change in self._state.history.changes()]

    @property
    def last_sequence(self):
        # type: () -> int
        return self._state.last_seq

    def matched_subscriptions(self):
        # type: () -> List[Any]
        self._check_deleted()
        with self._participant.lock:
            return self._participant.engine.matched(self._state)

    def get_status(self):
        # type: () -> Any
        self._check_deleted()
        with self._participant.lock:
            return self._state.tracker.snapshot(True)

    def wait_for_acknowledgments(self, timeout_ms):
        # type: (float) -> bool
        """Drive the participant until every reliable reader acknowledged.

        :returns: False if timeout_ms elapsed first.
        :raises InterfaceError: REENTRANCY if called from a listener.
        """
        check_not_in_callback('wait_for_acknowledgments')
        self._check_deleted()
        participant = self._participant
        deadline = participant.clock.now_ms() + timeout_ms
        while True:
            with participant.lock:
                if participant.engine.all_acknowledged(self._state):
                    return True
            if participant.clock.now_ms() >= deadline:
                return False
            participant.idle(participant.tick_period)
            self._check_deleted()

    def delete(self):
        # type: () -> None
        if self.deleted:
            return
        with self._participant.lock:
            self._participant.engine.remove_writer(self._state)
            self._deleted = True
        self.publisher._forget(self)

    def __repr__(self):
        # type: () -> str
        return 'DataWriter(%08x)' % (self.entity_id)


class DataReader(_Entity):
    """Receives samples of one topic, optionally filtered.

    Public Functions:
    take -- Remove and return samples from the cache.
    read -- Return samples, leaving them in the cache.
    matched_publications -- The matched remote writers.
    get_status -- Current StatusSet.
    delete -- Delete the reader.
    """

    def __init__(self, subscriber, topic, qos, listener=None):
        # type: (Subscriber, Any, QosProfile, Any) -> None
        participant = subscriber.participant
        super(DataReader, self).__init__(participant)
        self.subscriber = subscriber
        self.topic = topic
        self.qos = qos
        self.listener = listener
        expression = topic.expression if isinstance(topic, FilteredTopic) else None
        self.entity_id = participant._next_entity_id(protocol.KIND_READER)
        self._state = participant.engine.add_reader(
            self, self.entity_id, topic.topic, qos, expression)

    @property
    def guid(self):
        # type: () -> bytes
        return self._state.guid

    @property
    def filter(self):
        # type: () -> Optional[FilterExpression]
        return self._state.filter

    def take(self, max_samples=None):
        # type: (Optional[int]) -> List[Tuple[Dict[str, Any], SampleInfo]]
        """Remove up to max_samples samples (all if None) from the cache.

        A committed coherent set is returned whole or not at all.
        """
        return self.__fetch(max_samples, True)

    def read(self, max_samples=None):
        # type: (Optional[int]) -> List[Tuple[Dict[str, Any], SampleInfo]]
        """Like take() but leaves the samples in the cache."""
        return self.__fetch(max_samples, False)

    def __fetch(self, max_samples, remove):
        # type: (Optional[int], bool) -> List[Tuple[Dict[str, Any], SampleInfo]]
        self._check_deleted()
        if max_samples is not None and max_samples < 1:
            raise InterfaceError("max_samples must be at least 1")
        with self._participant.lock:
            if max_samples is None:
                max_samples = len(self._state.cache) or 1
            return self._participant.engine.take(self._state, max_samples, remove)

    def cache_size(self):
        # type: () -> int
        """Return the number of samples waiting in the cache."""
        self._check_deleted()
        return len(self._state.cache)

    def instance_count(self, key):
        # type: (Tuple[Any, ...]) -> int
        """Return how many samples of one instance the cache holds."""
        self._check_deleted()
        return self._state.cache.instance_count(tuple(key))

    def max_instance_count(self):
        # type: () -> int
        self._check_deleted()
        return self._state.cache.max_instance_count()

    def matched_publications(self):
        # type: () -> List[Any]
        self._check_deleted()
        with self._participant.lock:
            return self._participant.engine.matched(self._state)

    def get_status(self):
        # type: () -> Any
        self._check_deleted()
        with self._participant.lock:
            return self._state.tracker.snapshot(False)

    @property
    def delivered(self):
        # type: () -> int
        """Return how many samples were put in the cache so far."""
        return self._state.delivered

    def delete(self):
        # type: () -> None
        if self.deleted:
            return
        with self._participant.lock:
            self._participant.engine.remove_reader(self._state)
            self._deleted = True
        self.subscriber._forget(self)

    def __repr__(self):
        # type: () -> str
        return 'DataReader(%08x)' % (self.entity_id)
