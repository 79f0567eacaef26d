"""Datagram links and clocks used by the protocol engine.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

A link carries whole datagrams between participants of one domain.  The
simulated network (see netsim) and real UDP sockets present the same
interface so the engine never knows which one it runs over.

Exported Classes:
Link -- Interface of one participant's datagram endpoint.
SystemClock -- Wall clock in milliseconds.
UdpNetwork -- Factory of UDP links with an explicit peer list.
UdpLink -- One UDP socket.

Exported Functions:
strToBool -- Convert an option string to a bool.
parse_addr -- Split "host[:port]" into (host, port, ip version).
"""

__all__ = ['Link', 'SystemClock', 'UdpNetwork', 'UdpLink', 'strToBool',
           'parse_addr']

import logging
import select
import socket
import time
from ipaddress import ip_address

try:
    from urllib.parse import urlparse
except ImportError:
    from urlparse import urlparse  # type: ignore

try:
    from typing import Any, Callable, List, Optional, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .exception import InterfaceError, OperationalError

logger = logging.getLogger(__name__)

MAX_DATAGRAM = protocol.MAX_MESSAGE_SIZE


def strToBool(s):
    # type: (str) -> bool
    """Convert an option value to a Python boolean.

    :raises ValueError: If the value is not a valid boolean string.
    """
    if s.lower() == 'true':
        return True
    elif s.lower() == 'false':
        return False
    raise ValueError('"%s" is not a valid boolean string' % s)


class Link(object):
    """A participant's endpoint on a network.

    Received datagrams are handed to the receiver callback as
    (source address, bytes).
    """

    address = None   # type: Any
    receiver = None  # type: Optional[Callable[[Any, bytes], None]]

    def send(self, address, data):
        # type: (Any, bytes) -> None
        raise NotImplementedError

    def peers(self):
        # type: () -> List[Any]
        """Return the addresses discovery announcements are sent to."""
        raise NotImplementedError

    def broadcast(self, data):
        # type: (bytes) -> None
        for peer in self.peers():
            self.send(peer, data)

    def close(self):
        # type: () -> None
        pass

    @property
    def simulated(self):
        # type: () -> bool
        return False


class SystemClock(object):
    """Milliseconds since the epoch from the system clock."""

    def now_ms(self):
        # type: () -> float
        return time.time() * 1000.0


def _to_ipaddr(addr):
    # type: (str) -> Tuple[str, int]
    ipaddr = ip_address(addr)
    return (str(ipaddr), ipaddr.version)


def parse_addr(addr, default_port=None):
    # type: (str, Optional[int]) -> Tuple[str, Optional[int], int]
    """Parse "host", "host:port", "1.2.3.4:5" or "[::1]:5".

    :raises InterfaceError: If the address cannot be parsed.
    """
    port = default_port
    try:
        ip, ver = _to_ipaddr(addr)
    except ValueError:
        parsed = urlparse('//{}'.format(addr))
        try:
            hostname = parsed.hostname
            parsed_port = parsed.port
        except ValueError:
            raise InterfaceError("Invalid Host/IP Address format: %s" % (addr))
        if hostname is None:
            raise InterfaceError("Invalid Host/IP Address format: %s" % (addr))
        if parsed_port is not None:
            port = parsed_port
        try:
            ip, ver = _to_ipaddr(hostname)
        except ValueError:
            ip, ver = hostname, 4
    return ip, port, ver


class UdpNetwork(object):
    """Opens UDP links on one host; peers are listed explicitly.

    Peers without a port use base_port + domain_id.
    """

    def __init__(self, peers=(), host='127.0.0.1',
                 base_port=protocol.DEFAULT_BASE_PORT):
        # type: (Any, str, int) -> None
        self.host = host
        self.base_port = base_port
        self.__peers = list(peers)

    def add_peer(self, peer):
        # type: (str) -> None
        self.__peers.append(peer)

    def peer_addresses(self, domain_id):
        # type: (int) -> List[Tuple[str, int]]
        result = []
        for peer in self.__peers:
            host, port, _ = parse_addr(peer, self.base_port + domain_id)
            result.append((host, port))
        return result

    def open(self, domain_id, port=None):
        # type: (int, Optional[int]) -> UdpLink
        """Open a link; port None binds an ephemeral port.

        :raises OperationalError: DOMAIN_UNAVAILABLE if the socket cannot bind.
        """
        return UdpLink(self, domain_id, port)


class UdpLink(Link):
    """A datagram socket polled by its participant's driver."""

    def __init__(self, network, domain_id, port=None):
        # type: (UdpNetwork, int, Optional[int]) -> None
        self.__network = network
        self.__domain_id = domain_id
        host, _, ver = parse_addr(network.host)
        af = socket.AF_INET6 if ver == 6 else socket.AF_INET
        self.__sock = socket.socket(af, socket.SOCK_DGRAM)  # type: Optional[socket.socket]
        try:
            self.__sock.bind((host, port or 0))
        except (OSError, socket.error) as ex:
            self.__sock.close()
            self.__sock = None
            raise OperationalError('cannot open domain %d on %s:%s: %s'
                                   % (domain_id, host, port, ex),
                                   protocol.DOMAIN_UNAVAILABLE)
        self.__sock.setblocking(False)
        self.address = self.__sock.getsockname()[:2]
        self.datagrams_sent = 0
        self.datagrams_received = 0

    def peers(self):
        # type: () -> List[Any]
        return [peer for peer in self.__network.peer_addresses(self.__domain_id)
                if peer != self.address]

    def send(self, address, data):
        # type: (Any, bytes) -> None
        sock = self.__sock
        if sock is None:
            return
        try:
            sock.sendto(data, address)
            self.datagrams_sent += 1
        except (OSError, socket.error) as ex:
            # Unreachable peers are handled by liveliness.
            logger.debug("send to %s failed: %s", address, ex)

    def poll(self, timeout):
        # type: (float) -> int
        """Wait up to timeout seconds and hand every waiting datagram on."""
        sock = self.__sock
        if sock is None:
            return 0
        ready, _, _ = select.select([sock], [], [], max(0.0, timeout))
        count = 0
        while ready:
            try:
                data, source = sock.recvfrom(MAX_DATAGRAM)
            except (OSError, socket.error):
                break
            count += 1
            self.datagrams_received += 1
            if self.receiver is not None:
                self.receiver(source[:2], data)
        return count

    def close(self):
        # type: () -> None
        sock = self.__sock
        if sock is None:
            return
        try:
            sock.close()
        finally:
            self.__sock = None
