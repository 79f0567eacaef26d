"""Communication statuses and listener dispatch.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Exported Classes:
StatusSet -- Immutable snapshot of every status of an entity.
Listener -- Base class with no-op hooks; subclass and override.
StatusTracker -- The mutable counters behind an entity's StatusSet.
Dispatcher -- Serializes listener invocations of one participant.

Exported Functions:
check_not_in_callback -- Reject blocking calls made from a listener.
"""

__all__ = ['LivelinessChangedStatus', 'MatchedStatus', 'SampleLostStatus',
           'IncompatibleQosStatus', 'StatusSet', 'Listener', 'StatusTracker',
           'Dispatcher', 'check_not_in_callback', 'LISTENER_HOOKS']

from collections import namedtuple, deque
import logging
import threading

try:
    from typing import Any, Deque, Optional, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .exception import InterfaceError

logger = logging.getLogger(__name__)

LivelinessChangedStatus = namedtuple('LivelinessChangedStatus',
                                     ['alive_count', 'not_alive_count',
                                      'change_count'])
MatchedStatus = namedtuple('MatchedStatus',
                           ['current_count', 'total_count', 'change_count',
                            'last_group_data'])
SampleLostStatus = namedtuple('SampleLostStatus', ['total_count'])
IncompatibleQosStatus = namedtuple('IncompatibleQosStatus',
                                   ['total_count', 'last_policy_id'])


class StatusSet(namedtuple('StatusSet',
                           ['liveliness_changed', 'publication_matched',
                            'subscription_matched', 'sample_lost',
                            'requested_incompatible_qos',
                            'offered_incompatible_qos'])):
    """The statuses of an entity at one point in time.

    Writers maintain publication_matched and offered_incompatible_qos,
    readers subscription_matched, sample_lost, requested_incompatible_qos
    and liveliness_changed (matched writers alive / not alive), participants
    liveliness_changed (remote participants).  Unused statuses stay zero.
    """

    __slots__ = ()


LISTENER_HOOKS = ('on_data_available', 'on_liveliness_changed',
                  'on_subscription_matched', 'on_publication_matched',
                  'on_sample_lost', 'on_requested_incompatible_qos',
                  'on_offered_incompatible_qos')


class Listener(object):
    """Hooks receive (entity, status snapshot).

    Hooks must not block; blocking calls made from a hook raise an
    InterfaceError with code REENTRANCY.
    """

    def on_data_available(self, entity, status):
        pass

    def on_liveliness_changed(self, entity, status):
        pass

    def on_subscription_matched(self, entity, status):
        pass

    def on_publication_matched(self, entity, status):
        pass

    def on_sample_lost(self, entity, status):
        pass

    def on_requested_incompatible_qos(self, entity, status):
        pass

    def on_offered_incompatible_qos(self, entity, status):
        pass


class StatusTracker(object):
    """Counters of one entity; counts never go negative."""

    def __init__(self):
        # type: () -> None
        self.alive = 0
        self.not_alive = 0
        self.liveliness_changes = 0
        self.matched = 0
        self.matched_total = 0
        self.matched_changes = 0
        self.last_group_data = b''
        self.lost = 0
        self.incompatible = 0
        self.last_policy_id = 0

    def liveliness(self, alive_delta, not_alive_delta):
        # type: (int, int) -> None
        self.alive = max(0, self.alive + alive_delta)
        self.not_alive = max(0, self.not_alive + not_alive_delta)
        self.liveliness_changes += 1

    def match(self, delta, group_data=None):
        # type: (int, Optional[bytes]) -> None
        self.matched = max(0, self.matched + delta)
        if delta > 0:
            self.matched_total += delta
        if group_data is not None:
            self.last_group_data = group_data
        self.matched_changes += 1

    def lose(self, count):
        # type: (int) -> None
        self.lost += count

    def incompatible_qos(self, policy_id):
        # type: (int) -> None
        self.incompatible += 1
        self.last_policy_id = policy_id

    def snapshot(self, is_writer=False):
        # type: (bool) -> StatusSet
        matched = MatchedStatus(self.matched, self.matched_total,
                                self.matched_changes, self.last_group_data)
        unmatched = MatchedStatus(0, 0, 0, b'')
        incompatible = IncompatibleQosStatus(self.incompatible,
                                             self.last_policy_id)
        none = IncompatibleQosStatus(0, 0)
        return StatusSet(
            LivelinessChangedStatus(self.alive, self.not_alive,
                                    self.liveliness_changes),
            matched if is_writer else unmatched,
            unmatched if is_writer else matched,
            SampleLostStatus(self.lost),
            none if is_writer else incompatible,
            incompatible if is_writer else none)


_local = threading.local()


def in_callback():
    # type: () -> bool
    """Return True while a listener hook runs on this thread."""
    return getattr(_local, 'depth', 0) > 0


def check_not_in_callback(operation):
    # type: (str) -> None
    """Raise REENTRANCY if called from inside a listener hook."""
    if in_callback():
        raise InterfaceError('%s cannot be called from a listener' % (operation),
                             protocol.REENTRANCY)


class Dispatcher(object):
    """Queue of pending listener invocations for one participant.

    Events are queued while the participant lock is held and delivered by
    dispatch() after it is released.  A dispatch lock keeps invocations
    serialized.
    """

    def __init__(self):
        # type: () -> None
        self.__events = deque()  # type: Deque[Tuple[Any, Any, str, Any]]
        self.__lock = threading.Lock()
        self.__data_pending = set()  # type: set

    def queue(self, entity, hook, status):
        # type: (Any, str, StatusSet) -> None
        listener = entity.listener
        if listener is None or getattr(listener, hook, None) is None:
            return
        self.__events.append((entity, listener, hook, status))

    def queue_data_available(self, entity, status_fn):
        # type: (Any, Any) -> None
        """Queue one on_data_available per entity until it is dispatched."""
        listener = entity.listener
        if listener is None or getattr(listener, 'on_data_available', None) is None:
            return
        if id(entity) in self.__data_pending:
            return
        self.__data_pending.add(id(entity))
        self.__events.append((entity, listener, 'on_data_available', status_fn))

    def pending(self):
        # type: () -> int
        return len(self.__events)

    def dispatch(self):
        # type: () -> int
        """Invoke queued hooks in order; return how many ran."""
        if in_callback() or not self.__events:
            return 0
        count = 0
        with self.__lock:
            while self.__events:
                try:
                    entity, listener, hook, status = self.__events.popleft()
                except IndexError:
                    break
                if hook == 'on_data_available':
                    self.__data_pending.discard(id(entity))
                    status = status()
                _local.depth = getattr(_local, 'depth', 0) + 1
                try:
                    getattr(listener, hook)(entity, status)
                except Exception:  # pylint: disable=broad-except
                    logger.exception("listener %s raised", hook)
                finally:
                    _local.depth -= 1
                count += 1
        return count
