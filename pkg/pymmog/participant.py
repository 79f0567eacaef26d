"""A module for joining a domain as a participant.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Exported Classes:
DomainParticipant -- One member of a domain; owns topics and endpoints.

Exported Functions:
create_participant -- Creates a DomainParticipant.
participant_options -- Splits and converts participant options.
"""

__all__ = ['create_participant', 'DomainParticipant', 'participant_options']

import binascii
import logging
import os
import random
import threading
import time

try:
    from typing import Any, Dict, List, Mapping, Optional  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .datatype import TypeDescriptor
from .engine import Engine, guid_of
from .entity import Topic, FilteredTopic, Publisher, Subscriber
from .exception import InterfaceError
from .link import SystemClock, UdpNetwork, strToBool
from .netsim import SimNetwork, default_network
from .qos import QosProfile
from .status import Dispatcher, Listener, StatusTracker, check_not_in_callback  # pylint: disable=unused-import

logger = logging.getLogger(__name__)

_OPTIONS = {'heartbeat_period': int,
            'tick_period': int,
            'writer_side_filtering': strToBool,
            'guid_prefix': str,
            'port': int}

_prefix_lock = threading.Lock()
_prefixes_in_use = set()  # type: set


def participant_options(options):
    # type: (Optional[Mapping[str, Any]]) -> Dict[str, Any]
    """Convert participant options to their typed values.

    :raises InterfaceError: For unknown options or unparsable values.
    """
    result = {'heartbeat_period': protocol.DEFAULT_HEARTBEAT_PERIOD,
              'tick_period': None,
              'writer_side_filtering': True,
              'guid_prefix': None,
              'port': None}  # type: Dict[str, Any]
    if options:
        for key, val in options.items():
            convert = _OPTIONS.get(key)
            if convert is None:
                raise InterfaceError("unknown participant option %s" % (key))
            if not isinstance(val, str):
                result[key] = val
                continue
            try:
                result[key] = convert(val)
            except ValueError as ex:
                raise InterfaceError("invalid value for %s: %s" % (key, ex))
    if result['heartbeat_period'] <= 0:
        raise InterfaceError("heartbeat_period must be positive")
    if result['tick_period'] is None:
        result['tick_period'] = result['heartbeat_period']
    elif result['tick_period'] <= 0:
        raise InterfaceError("tick_period must be positive")
    return result


def _reserve_prefix(requested, rng):
    # type: (Optional[str], Optional[random.Random]) -> bytes
    with _prefix_lock:
        if requested is not None:
            try:
                prefix = binascii.unhexlify(requested)
            except (TypeError, ValueError):
                raise InterfaceError("guid_prefix must be hexadecimal")
            if len(prefix) != protocol.GUID_PREFIX_SIZE:
                raise InterfaceError("guid_prefix must be %d bytes"
                                     % (protocol.GUID_PREFIX_SIZE))
            if prefix in _prefixes_in_use:
                raise InterfaceError("guid_prefix %s is in use" % (requested))
        else:
            while True:
                if rng is not None:
                    prefix = bytes(bytearray(rng.getrandbits(8)
                                             for _ in range(protocol.GUID_PREFIX_SIZE)))
                else:
                    prefix = os.urandom(protocol.GUID_PREFIX_SIZE)
                if prefix not in _prefixes_in_use:
                    break
        _prefixes_in_use.add(prefix)
        return prefix


def _release_prefix(prefix):
    # type: (bytes) -> None
    with _prefix_lock:
        _prefixes_in_use.discard(prefix)


def create_participant(domain_id=0,   # type: int
                       lease=protocol.DEFAULT_LEASE,  # type: int
                       network=None,  # type: Any
                       options=None,  # type: Optional[Mapping[str, Any]]
                       listener=None,  # type: Optional[Listener]
                       rng=None       # type: Optional[random.Random]
                       ):
    # type: (...) -> DomainParticipant
    """Return a new DomainParticipant.

    :param domain_id: Domain to join, 0 to 255.
    :param lease: Liveliness lease in milliseconds, at least 100 and at
                  least three heartbeat periods.
    :param network: A SimNetwork or UdpNetwork; the shared default
                    SimNetwork when omitted.
    :param options: Participant options (heartbeat_period, tick_period,
                    writer_side_filtering, guid_prefix, port).
    :param listener: Receives on_liveliness_changed for remote participants.
    :param rng: Random source for the guid prefix (deterministic runs).
    :raises OperationalError: DOMAIN_UNAVAILABLE if the link cannot be opened.
    """
    return DomainParticipant(domain_id, lease, network, options, listener, rng)


class DomainParticipant(object):
    """An application's membership in one domain.

    Public Functions:
    create_topic -- Register a named type.
    create_content_filtered_topic -- Restrict a topic with a filter.
    create_publisher / delete_publisher -- Manage publishers.
    create_subscriber / delete_subscriber -- Manage subscribers.
    get_status -- Liveliness of the remote participants.
    remote_participants -- Guids of the remote participants alive.
    tick -- Run one round of discovery, transmission and heartbeats.
    delete -- Leave the domain and delete every child entity.
    """

    closed = False
    listener = None  # type: Optional[Listener]

    def __init__(self, domain_id, lease, network, options, listener, rng):
        # type: (int, int, Any, Optional[Mapping[str, Any]], Optional[Listener], Optional[random.Random]) -> None
        if not isinstance(domain_id, int) or not 0 <= domain_id < 256:
            raise InterfaceError("domain_id %r is not in [0, 256)" % (domain_id,))
        if lease < protocol.MIN_LEASE:
            raise InterfaceError("lease must be at least %d ms" % (protocol.MIN_LEASE))
        opts = participant_options(options)
        if lease < protocol.LIVELINESS_LEASE_FACTOR * opts['heartbeat_period']:
            raise InterfaceError("lease of %d ms is shorter than %d heartbeat periods"
                                 % (lease, protocol.LIVELINESS_LEASE_FACTOR))
        self.domain_id = domain_id
        self.lease_ms = lease
        self.heartbeat_period = opts['heartbeat_period']
        self.tick_period = opts['tick_period']
        self.writer_side_filtering = opts['writer_side_filtering']
        self.listener = listener
        self.lock = threading.RLock()
        self.dispatcher = Dispatcher()

        if network is None:
            network = default_network()
        if not isinstance(network, (SimNetwork, UdpNetwork)):
            raise InterfaceError("unsupported network %r" % (network,))
        self.network = network
        self.guid_prefix = _reserve_prefix(opts['guid_prefix'], rng)
        try:
            if isinstance(network, SimNetwork):
                self.link = network.open(domain_id)
                self.clock = network.clock
            else:
                self.link = network.open(domain_id, opts['port'])
                self.clock = SystemClock()
        except Exception:
            _release_prefix(self.guid_prefix)
            raise

        self.guid = guid_of(self.guid_prefix, protocol.PARTICIPANT_ENTITY_ID)
        self.__counter = 0
        self.__topics = {}        # type: Dict[str, Topic]
        self.__publishers = []    # type: List[Publisher]
        self.__subscribers = []   # type: List[Subscriber]
        self.engine = Engine(self)
        self.link.receiver = self._receive
        self.__driver = None      # type: Optional[threading.Thread]

        logger.debug("participant %s joined domain %d at %s",
                     binascii.hexlify(self.guid_prefix), domain_id,
                     self.link.address)
        if self.link.simulated:
            network.attach(self)
        else:
            self.__driver = threading.Thread(target=self._drive,
                                             name='pymmog-%d' % (domain_id))
            self.__driver.daemon = True
            self.__driver.start()

    # Children

    def _check_closed(self):
        # type: () -> None
        """Check if the participant is usable.

        :raises InterfaceError: ENTITY_DELETED if it was deleted.
        """
        if self.closed:
            raise InterfaceError("participant was deleted", protocol.ENTITY_DELETED)

    def _next_entity_id(self, kind):
        # type: (int) -> int
        self.__counter += 1
        return (self.__counter << 8) | kind

    def create_topic(self, name, descriptor, key_fields=None):
        # type: (str, Any, Optional[List[str]]) -> Topic
        """Register a topic.

        :param descriptor: A TypeDescriptor, or (field, kind) pairs with
                           key_fields given separately.
        :raises InterfaceError: If name is registered with another type.
        """
        self._check_closed()
        if not isinstance(descriptor, TypeDescriptor):
            descriptor = TypeDescriptor(descriptor, key_fields or ())
        with self.lock:
            topic = self.__topics.get(name)
            if topic is not None:
                if topic.descriptor != descriptor:
                    raise InterfaceError("topic %s is registered with type %r"
                                         % (name, topic.descriptor))
                return topic
            topic = self.__topics[name] = Topic(self, name, descriptor)
        return topic

    def find_topic(self, name):
        # type: (str) -> Optional[Topic]
        return self.__topics.get(name)

    def create_content_filtered_topic(self, topic, expression):
        # type: (Topic, Any) -> FilteredTopic
        """Return topic restricted by a FilterExpression or filter text."""
        self._check_closed()
        if topic.participant is not self:
            raise InterfaceError("topic %s belongs to another participant"
                                 % (topic.name))
        return FilteredTopic(topic, expression)

    def create_publisher(self, group_data=b'', qos=None):
        # type: (bytes, Optional[QosProfile]) -> Publisher
        """Create a publisher; qos carries presentation and group_data."""
        self._check_closed()
        if qos is None:
            qos = QosProfile(group_data=group_data)
        elif group_data:
            qos = qos.with_changes(group_data=group_data)
        with self.lock:
            publisher = Publisher(self, qos)
            self.__publishers.append(publisher)
        return publisher

    def delete_publisher(self, publisher):
        # type: (Publisher) -> None
        self._check_closed()
        if publisher.participant is not self:
            raise InterfaceError("publisher belongs to another participant")
        publisher.delete()

    def create_subscriber(self, group_data=b'', qos=None):
        # type: (bytes, Optional[QosProfile]) -> Subscriber
        """Create a subscriber; qos carries presentation and group_data."""
        self._check_closed()
        if qos is None:
            qos = QosProfile(group_data=group_data)
        elif group_data:
            qos = qos.with_changes(group_data=group_data)
        with self.lock:
            subscriber = Subscriber(self, qos)
            self.__subscribers.append(subscriber)
        return subscriber

    def delete_subscriber(self, subscriber):
        # type: (Subscriber) -> None
        self._check_closed()
        if subscriber.participant is not self:
            raise InterfaceError("subscriber belongs to another participant")
        subscriber.delete()

    def _forget(self, child):
        # type: (Any) -> None
        if child in self.__publishers:
            self.__publishers.remove(child)
        if child in self.__subscribers:
            self.__subscribers.remove(child)

    @property
    def publishers(self):
        # type: () -> List[Publisher]
        return list(self.__publishers)

    @property
    def subscribers(self):
        # type: () -> List[Subscriber]
        return list(self.__subscribers)

    def get_status(self):
        # type: () -> Any
        self._check_closed()
        with self.lock:
            return self.engine.tracker.snapshot()

    def remote_participants(self):
        # type: () -> List[bytes]
        """Return the guids of the remote participants currently alive."""
        with self.lock:
            return [remote.guid for remote in self.engine.remotes.values()
                    if remote.alive and not remote.own]

    # Driving

    def tick(self):
        # type: () -> None
        """Run liveliness, discovery, transmission and heartbeats once.

        :raises InterfaceError: REENTRANCY if called from a listener.
        """
        check_not_in_callback('tick')
        if self.closed:
            return
        with self.lock:
            self.engine.tick(self.clock.now_ms())
        self.dispatcher.dispatch()

    def _receive(self, source, data):
        # type: (Any, bytes) -> None
        if self.closed:
            return
        with self.lock:
            self.engine.receive(source, data)
        self.dispatcher.dispatch()

    def idle(self, ms):
        # type: (float) -> None
        """Let ms milliseconds of (virtual or wall) time pass."""
        check_not_in_callback('idle')
        if self.link.simulated:
            self.network.run_for(ms)
        else:
            time.sleep(ms / 1000.0)

    def _drive(self):
        # type: () -> None
        """Poll the socket and tick on schedule until deleted."""
        next_tick = 0.0
        while not self.closed:
            now = self.clock.now_ms()
            if now >= next_tick:
                try:
                    self.tick()
                except Exception:  # pylint: disable=broad-except
                    logger.exception("tick failed")
                next_tick = now + self.tick_period
            try:
                self.link.poll(max(0.0, next_tick - self.clock.now_ms()) / 1000.0)
            except (OSError, ValueError):
                if not self.closed:
                    logger.exception("polling %s failed", self.link.address)
                return

    def delete(self):
        # type: () -> None
        """Delete every child, announce departure and close the link."""
        check_not_in_callback('delete')
        if self.closed:
            return
        with self.lock:
            for publisher in list(self.__publishers):
                publisher.delete()
            for subscriber in list(self.__subscribers):
                subscriber.delete()
            self.engine.announce_departure()
            self.closed = True
            self.link.close()
        _release_prefix(self.guid_prefix)
        if self.__driver is not None and self.__driver is not threading.current_thread():
            self.__driver.join(1.0)
        logger.debug("participant %s left domain %d",
                     binascii.hexlify(self.guid_prefix), self.domain_id)

    close = delete

    def __enter__(self):
        # type: () -> DomainParticipant
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        # type: (Any, Any, Any) -> None
        self.delete()
