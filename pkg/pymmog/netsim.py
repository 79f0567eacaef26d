"""Deterministic network simulator over virtual time.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Time is a simpy.Environment clock in milliseconds.  Every datagram draws
drop then jitter from one seeded random.Random, so the same seed and the
same send schedule give the same delivery schedule.

Exported Classes:
NetSimConfig -- Loss and latency parameters.
SimNetwork -- The simulated network: links, deliveries, fault injection.
SimLink -- A participant's endpoint on a SimNetwork.
VirtualClock -- Milliseconds of a simpy environment.

Exported Functions:
sim_send -- Schedule the delivery of one datagram.
default_network -- The process-wide network used when none is given.
"""

__all__ = ['NetSimConfig', 'SimNetwork', 'SimLink', 'VirtualClock',
           'Delivery', 'sim_send', 'default_network']

from collections import namedtuple, defaultdict
import logging
import random

try:
    from typing import Any, Callable, Dict, List, Optional, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

import simpy

from . import protocol
from .encodedmessage import encode_message
from .exception import InterfaceError, OperationalError
from .link import Link
from .message import WireMessage
from .status import check_not_in_callback

logger = logging.getLogger(__name__)


class NetSimConfig(namedtuple('NetSimConfig',
                              ['drop_probability', 'latency_mean',
                               'latency_jitter', 'reorder', 'rng_seed'])):
    """Loss probability, mean latency and uniform jitter (ms), FIFO switch."""

    __slots__ = ()

    def __new__(cls, drop_probability=0.0, latency_mean=50.0,
                latency_jitter=0.0, reorder=False, rng_seed=0):
        # type: (float, float, float, bool, int) -> NetSimConfig
        self = super(NetSimConfig, cls).__new__(
            cls, float(drop_probability), float(latency_mean),
            float(latency_jitter), bool(reorder), int(rng_seed))
        if not 0.0 <= self.drop_probability <= 1.0:
            raise OperationalError('drop_probability %r is not in [0, 1]'
                                   % (drop_probability,), protocol.CONFIG_ERROR)
        if self.latency_mean < 0 or self.latency_jitter < 0:
            raise OperationalError('latencies must not be negative',
                                   protocol.CONFIG_ERROR)
        if self.rng_seed < 0 or self.rng_seed > 0xffffffffffffffff:
            raise OperationalError('rng_seed must be an unsigned 64-bit value',
                                   protocol.CONFIG_ERROR)
        return self

    @classmethod
    def from_dict(cls, values):
        # type: (Dict[str, Any]) -> NetSimConfig
        unknown = set(values) - set(cls._fields)
        if unknown:
            raise OperationalError('unknown network settings: %s'
                                   % (', '.join(sorted(unknown))),
                                   protocol.CONFIG_ERROR)
        try:
            return cls(**values)
        except (TypeError, ValueError) as ex:
            raise OperationalError('invalid network settings: %s' % (ex),
                                   protocol.CONFIG_ERROR)


Delivery = namedtuple('Delivery', ['time', 'source', 'dest', 'size'])


class VirtualClock(object):
    """Milliseconds of virtual time."""

    def __init__(self, env):
        # type: (simpy.Environment) -> None
        self.__env = env

    def now_ms(self):
        # type: () -> float
        return float(self.__env.now)


class SimLink(Link):
    """An address on a SimNetwork; addresses are small integers."""

    def __init__(self, network, address, domain_id):
        # type: (SimNetwork, int, int) -> None
        self.__network = network
        self.address = address
        self.domain_id = domain_id
        self.closed = False

    @property
    def network(self):
        # type: () -> SimNetwork
        return self.__network

    @property
    def simulated(self):
        # type: () -> bool
        return True

    def send(self, address, data):
        # type: (Any, bytes) -> None
        if not self.closed:
            self.__network.sim_send(data, source=self.address, dest=address)

    def peers(self):
        # type: () -> List[Any]
        return self.__network.peers_of(self)

    def close(self):
        # type: () -> None
        if not self.closed:
            self.closed = True
            self.__network.detach_link(self)


class SimNetwork(object):
    """Simulated datagram network of any number of domains.

    Public Functions:
    open -- Open a link in a domain.
    attach -- Start ticking a participant on virtual time.
    sim_send -- Schedule delivery of one datagram.
    run_for / run_until -- Advance virtual time.
    silence / unsilence -- Drop everything an address sends.
    inject -- Deliver a crafted message flagged as simulator-injected.
    add_observer -- Watch every delivered datagram.
    """

    def __init__(self, config=None, env=None):
        # type: (Optional[NetSimConfig], Optional[simpy.Environment]) -> None
        self.config = config if config is not None else NetSimConfig()
        self.env = env if env is not None else simpy.Environment()
        self.clock = VirtualClock(self.env)
        self.rng = random.Random(self.config.rng_seed)
        self.drop_rule = None  # type: Optional[Callable[[Any, Any, bytes], bool]]
        self.__links = {}      # type: Dict[int, SimLink]
        self.__next_address = 1
        self.__silenced = set()  # type: set
        self.__last_delivery = {}  # type: Dict[Tuple[Any, Any], float]
        self.__observers = []  # type: List[Callable[..., None]]
        self.datagrams_sent = 0
        self.datagrams_dropped = 0
        self.datagrams_delivered = defaultdict(int)  # type: Dict[Any, int]
        self.bytes_delivered = defaultdict(int)      # type: Dict[Any, int]
        self.link_bytes = defaultdict(int)           # type: Dict[Tuple[Any, Any], int]

    @property
    def now(self):
        # type: () -> float
        return float(self.env.now)

    def open(self, domain_id):
        # type: (int) -> SimLink
        link = SimLink(self, self.__next_address, domain_id)
        self.__links[link.address] = link
        self.__next_address += 1
        return link

    def detach_link(self, link):
        # type: (SimLink) -> None
        self.__links.pop(link.address, None)

    def link(self, address):
        # type: (Any) -> Optional[SimLink]
        return self.__links.get(address)

    def peers_of(self, link):
        # type: (SimLink) -> List[Any]
        return [other.address for other in self.__links.values()
                if other is not link and other.domain_id == link.domain_id]

    def attach(self, participant):
        # type: (Any) -> None
        """Tick participant every tick_period ms, starting now."""
        self.env.process(self._ticker(participant))

    def _ticker(self, participant):
        while not participant.closed:
            participant.tick()
            yield self.env.timeout(participant.tick_period)

    def silence(self, address):
        # type: (Any) -> None
        """Drop every datagram sent by address from now on."""
        self.__silenced.add(address)

    def unsilence(self, address):
        # type: (Any) -> None
        self.__silenced.discard(address)

    def add_observer(self, observer):
        # type: (Callable[[float, Any, Any, bytes], None]) -> None
        """Call observer(time, source, dest, data) for every delivery."""
        self.__observers.append(observer)

    def sim_send(self, data, now=None, source=None, dest=None):
        # type: (bytes, Optional[float], Any, Any) -> List[Delivery]
        """Schedule data from source to dest (every peer of source if None).

        :returns: The scheduled deliveries; dropped datagrams are absent.
        :raises InterfaceError: If now lies in the past.
        """
        if now is None:
            now = self.now
        elif now < self.now:
            raise InterfaceError("cannot send at %.3f ms, the clock is at %.3f ms"
                                 % (now, self.now))
        if dest is None:
            link = self.__links.get(source)
            dests = self.peers_of(link) if link is not None else sorted(self.__links)
        else:
            dests = [dest]
        deliveries = []
        for target in dests:
            self.datagrams_sent += 1
            if self._dropped(source, target, data):
                self.datagrams_dropped += 1
                continue
            delay = self.config.latency_mean
            if self.config.latency_jitter:
                delay += self.rng.uniform(-self.config.latency_jitter,
                                          self.config.latency_jitter)
            when = now + max(0.0, delay)
            if not self.config.reorder:
                when = max(when, self.__last_delivery.get((source, target), when))
                self.__last_delivery[(source, target)] = when
            self._schedule(when, source, target, data)
            deliveries.append(Delivery(when, source, target, len(data)))
        return deliveries

    def _dropped(self, source, dest, data):
        # type: (Any, Any, bytes) -> bool
        # One draw per datagram, also when a rule drops it.
        draw = self.rng.random()
        if source in self.__silenced:
            return True
        if self.drop_rule is not None and self.drop_rule(source, dest, data):
            return True
        return draw < self.config.drop_probability

    def _schedule(self, when, source, dest, data):
        # type: (float, Any, Any, bytes) -> None
        event = self.env.timeout(when - self.env.now)
        event.callbacks.append(lambda _: self._deliver(source, dest, data))

    def _deliver(self, source, dest, data):
        # type: (Any, Any, bytes) -> None
        link = self.__links.get(dest)
        if link is None or link.closed:
            return
        self.datagrams_delivered[dest] += 1
        self.bytes_delivered[dest] += len(data)
        self.link_bytes[(source, dest)] += len(data)
        for observer in self.__observers:
            observer(self.now, source, dest, data)
        if link.receiver is not None:
            link.receiver(source, data)

    def inject(self, dest, message, source=None, delay=0.0):
        # type: (Any, Any, Any, float) -> None
        """Deliver a crafted message (WireMessage or bytes) to dest.

        WireMessages are encoded with the simulator-injected flag set.
        """
        if delay < 0:
            raise InterfaceError("inject delay must not be negative")
        if isinstance(message, WireMessage):
            message = encode_message(message._replace(
                flags=message.flags | protocol.FLAG_SIMULATED))
        self._schedule(self.now + delay, source, dest, bytes(message))

    def run_for(self, ms):
        # type: (float) -> None
        """Advance virtual time by ms."""
        self.run_until(self.now + ms)

    def run_until(self, when):
        # type: (float) -> None
        check_not_in_callback('run_until')
        if when > self.now:
            self.env.run(until=when)


def sim_send(network, data, now, source=None, dest=None):
    # type: (SimNetwork, bytes, float, Any, Any) -> List[Delivery]
    """Schedule one datagram on network at virtual time now."""
    return network.sim_send(data, now=now, source=source, dest=dest)


_default = None  # type: Optional[SimNetwork]


def default_network():
    # type: () -> SimNetwork
    """Return the shared SimNetwork used by create_participant by default."""
    global _default
    if _default is None:
        _default = SimNetwork()
    return _default
