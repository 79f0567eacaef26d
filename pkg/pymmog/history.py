"""Writer histories and reader caches.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Exported Classes:
CacheChange -- One sample held by a writer history.
WriterHistory -- Per-instance bounded store of a writer's samples.
ReaderCache -- Per-instance bounded store of delivered samples.
"""

__all__ = ['CacheChange', 'WriterHistory', 'ReaderCache']

from collections import namedtuple, deque, OrderedDict

try:
    from typing import Any, Callable, Deque, Dict, List, Optional, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .exception import OperationalError
from .qos import KEEP_ALL, QosProfile  # pylint: disable=unused-import


class CacheChange(namedtuple('CacheChange',
                             ['sequence', 'key', 'instance_hash', 'values',
                              'payload', 'source_timestamp',
                              'coherent_set_id'])):
    """A written sample; coherent_set_id is None outside coherent sets."""

    __slots__ = ()


class WriterHistory(object):
    """The samples a writer can still (re)transmit.

    KEEP_LAST(d) replaces the oldest sample of a full instance.  KEEP_ALL
    only replaces it once every reliable reader has acknowledged it.
    """

    def __init__(self, qos):
        # type: (QosProfile) -> None
        self.__keep_all = qos.history_kind == KEEP_ALL
        self.__limit = qos.history_limit
        self.__changes = OrderedDict()  # type: OrderedDict
        self.__instances = {}           # type: Dict[Tuple[Any, ...], Deque[int]]

    def add(self, change, can_evict):
        # type: (CacheChange, Callable[[int], bool]) -> None
        """Store change, evicting the instance's oldest sample if full.

        :param can_evict: Returns True if a sequence number is acknowledged
                          by every reliable reader; consulted for KEEP_ALL.
        :raises OperationalError: RESOURCE_LIMIT if a KEEP_ALL instance is
                                  full of unacknowledged samples.
        """
        seqs = self.__instances.get(change.key)
        if seqs is None:
            seqs = self.__instances[change.key] = deque()
        if len(seqs) >= self.__limit:
            if self.__keep_all and not can_evict(seqs[0]):
                raise OperationalError('history of instance %r is full (%d samples)'
                                       % (change.key, self.__limit),
                                       protocol.RESOURCE_LIMIT)
            del self.__changes[seqs.popleft()]
        seqs.append(change.sequence)
        self.__changes[change.sequence] = change

    def get(self, seq):
        # type: (int) -> Optional[CacheChange]
        return self.__changes.get(seq)

    def first_sequence(self):
        # type: () -> Optional[int]
        """Return the lowest sequence number still held."""
        for seq in self.__changes:
            return seq
        return None

    def changes(self):
        # type: () -> List[CacheChange]
        return list(self.__changes.values())

    def __len__(self):
        # type: () -> int
        return len(self.__changes)


CacheEntry = namedtuple('CacheEntry', ['values', 'info', 'unit'])


class ReaderCache(object):
    """Delivered samples in commit order, bounded per instance.

    Samples committed together as a coherent set share a unit id; take()
    and read() return a unit whole or not at all.
    """

    def __init__(self, qos):
        # type: (QosProfile) -> None
        self.__keep_all = qos.history_kind == KEEP_ALL
        self.__limit = qos.history_limit
        self.__entries = OrderedDict()  # type: OrderedDict
        self.__instances = {}           # type: Dict[Tuple[Any, ...], Deque[int]]
        self.__counter = 0

    def has_room(self, key, count=1):
        # type: (Tuple[Any, ...], int) -> bool
        """Return True if count more samples of key fit without loss."""
        if not self.__keep_all:
            return True
        seqs = self.__instances.get(key)
        held = len(seqs) if seqs else 0
        return held + count <= self.__limit

    def insert(self, values, info, unit=None):
        # type: (Dict[str, Any], Any, Any) -> None
        """Append a sample; KEEP_LAST drops the instance's oldest if full.

        Dropping a member of another coherent unit drops the whole unit.
        """
        key = info.instance_key
        while self.instance_count(key) >= self.__limit:
            victim = self.__remove(self.__instances[key][0])
            if victim.unit is not None and victim.unit != unit:
                for counter in [c for c, e in self.__entries.items()
                                if e.unit == victim.unit]:
                    self.__remove(counter)
        self.__counter += 1
        self.__instances.setdefault(key, deque()).append(self.__counter)
        self.__entries[self.__counter] = CacheEntry(values, info, unit)

    def __remove(self, counter):
        # type: (int) -> CacheEntry
        entry = self.__entries.pop(counter)
        key = entry.info.instance_key
        seqs = self.__instances[key]
        seqs.remove(counter)
        if not seqs:
            del self.__instances[key]
        return entry

    def instance_count(self, key):
        # type: (Tuple[Any, ...]) -> int
        seqs = self.__instances.get(key)
        return len(seqs) if seqs else 0

    def max_instance_count(self):
        # type: () -> int
        return max([len(seqs) for seqs in self.__instances.values()] or [0])

    def __len__(self):
        # type: () -> int
        return len(self.__entries)

    def _select(self, max_samples):
        # type: (int) -> List[int]
        chosen = []   # type: List[int]
        group = []    # type: List[int]
        group_unit = None
        for counter, entry in self.__entries.items():
            if group and entry.unit is not None and entry.unit == group_unit:
                group.append(counter)
                continue
            if group:
                if chosen and len(chosen) + len(group) > max_samples:
                    return chosen
                chosen.extend(group)
                if len(chosen) >= max_samples:
                    return chosen
            group = [counter]
            group_unit = entry.unit
        if group and not (chosen and len(chosen) + len(group) > max_samples):
            chosen.extend(group)
        return chosen

    def read(self, max_samples):
        # type: (int) -> List[Tuple[Dict[str, Any], Any]]
        return [(dict(self.__entries[c].values), self.__entries[c].info)
                for c in self._select(max_samples)]

    def take(self, max_samples):
        # type: (int) -> List[Tuple[Dict[str, Any], Any]]
        result = []
        for counter in self._select(max_samples):
            entry = self.__remove(counter)
            result.append((entry.values, entry.info))
        return result
