"""QoS policies of publishers, subscribers, writers and readers.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Exported Classes:
QosProfile -- The per-endpoint bundle of QoS settings.

Exported Functions:
check_compatible -- Return the first policy an offer fails to satisfy.
"""

__all__ = ['BEST_EFFORT', 'RELIABLE', 'KEEP_LAST', 'KEEP_ALL', 'INSTANCE',
           'TOPIC', 'GROUP', 'MAX_GROUP_DATA', 'DEFAULT_RESOURCE_LIMIT',
           'QosProfile', 'check_compatible', 'RELIABLE_KEEP_ALL',
           'DEFAULT_QOS']

from collections import namedtuple

try:
    from typing import Any, Optional  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .exception import InterfaceError
from .message import QosSummary

# pylint: disable=bad-whitespace

# Reliability
BEST_EFFORT                = 1
RELIABLE                   = 2

# History
KEEP_LAST                  = 0
KEEP_ALL                   = 1

# Presentation access scope, ordered
INSTANCE                   = 0
TOPIC                      = 1
GROUP                      = 2

MAX_GROUP_DATA             = 1024
DEFAULT_RESOURCE_LIMIT     = 256

_RELIABILITY_NAMES = {'best_effort': BEST_EFFORT, 'reliable': RELIABLE}
_HISTORY_NAMES = {'keep_last': KEEP_LAST, 'keep_all': KEEP_ALL}
_SCOPE_NAMES = {'instance': INSTANCE, 'topic': TOPIC, 'group': GROUP}


class QosProfile(namedtuple('QosProfile',
                            ['reliability', 'history_kind', 'history_depth',
                             'coherent_access', 'access_scope', 'group_data',
                             'liveliness_lease',
                             'max_samples_per_instance'])):
    """Immutable QoS settings; validated when constructed.

    The defaults are BEST_EFFORT, KEEP_LAST(1), presentation
    (False, INSTANCE), no group data, a 1000 ms lease and 256 samples per
    instance.  Endpoints created by a participant carry the participant
    lease as their liveliness_lease.
    """

    __slots__ = ()

    def __new__(cls, reliability=BEST_EFFORT,     # type: int
                history_kind=KEEP_LAST,           # type: int
                history_depth=1,                  # type: int
                coherent_access=False,            # type: bool
                access_scope=INSTANCE,            # type: int
                group_data=b'',                   # type: bytes
                liveliness_lease=protocol.DEFAULT_LEASE,  # type: int
                max_samples_per_instance=DEFAULT_RESOURCE_LIMIT  # type: int
                ):
        # type: (...) -> QosProfile
        self = super(QosProfile, cls).__new__(
            cls, reliability, history_kind, history_depth,
            bool(coherent_access), access_scope, bytes(group_data),
            liveliness_lease, max_samples_per_instance)
        self._validate()
        return self

    def _validate(self):
        # type: () -> None
        if self.reliability not in (BEST_EFFORT, RELIABLE):
            raise InterfaceError("invalid reliability %r" % (self.reliability,))
        if self.history_kind not in (KEEP_LAST, KEEP_ALL):
            raise InterfaceError("invalid history kind %r" % (self.history_kind,))
        if self.history_kind == KEEP_LAST and self.history_depth < 1:
            raise InterfaceError("KEEP_LAST depth must be at least 1")
        if self.access_scope not in (INSTANCE, TOPIC, GROUP):
            raise InterfaceError("invalid access scope %r" % (self.access_scope,))
        if len(self.group_data) > MAX_GROUP_DATA:
            raise InterfaceError("group_data of %d bytes exceeds %d"
                                 % (len(self.group_data), MAX_GROUP_DATA))
        if self.liveliness_lease < protocol.MIN_LEASE:
            raise InterfaceError("liveliness lease must be at least %d ms"
                                 % (protocol.MIN_LEASE))
        if self.max_samples_per_instance < 1:
            raise InterfaceError("max_samples_per_instance must be positive")

    @property
    def reliable(self):
        # type: () -> bool
        return self.reliability == RELIABLE

    @property
    def history_limit(self):
        # type: () -> int
        """Return the number of samples kept per instance."""
        if self.history_kind == KEEP_LAST:
            return self.history_depth
        return self.max_samples_per_instance

    def with_changes(self, **kwargs):
        # type: (**Any) -> QosProfile
        """Return a copy with the given fields replaced."""
        values = self._asdict()
        values.update(kwargs)
        return QosProfile(**values)

    def summary(self):
        # type: () -> QosSummary
        """Return the fields announced by discovery."""
        depth = self.history_depth if self.history_kind == KEEP_LAST else 0
        return QosSummary(self.reliability, self.history_kind, depth,
                          1 if self.coherent_access else 0, self.access_scope,
                          self.max_samples_per_instance)

    @classmethod
    def from_dict(cls, values):
        # type: (Any) -> QosProfile
        """Build a profile from a JSON style dict with symbolic names."""
        kwargs = {}
        for key, value in values.items():
            if key == 'reliability' and not isinstance(value, int):
                value = _lookup(_RELIABILITY_NAMES, value, key)
            elif key == 'history_kind' and not isinstance(value, int):
                value = _lookup(_HISTORY_NAMES, value, key)
            elif key == 'access_scope' and not isinstance(value, int):
                value = _lookup(_SCOPE_NAMES, value, key)
            elif key == 'group_data' and not isinstance(value, bytes):
                value = value.encode('utf-8')
            elif key not in cls._fields:
                raise InterfaceError("unknown QoS field %s" % (key))
            kwargs[key] = value
        return cls(**kwargs)


def _lookup(names, value, key):
    # type: (dict, Any, str) -> int
    try:
        return names[str(value).lower()]
    except KeyError:
        raise InterfaceError("invalid %s %r" % (key, value))


def check_compatible(offered, requested):
    # type: (Any, Any) -> Optional[int]
    """Return None if offered satisfies requested, else the failing policy id.

    Both arguments may be QosProfile or QosSummary objects.
    """
    if offered.reliability < requested.reliability:
        return protocol.RELIABILITY_POLICY_ID
    if offered.access_scope < requested.access_scope:
        return protocol.PRESENTATION_POLICY_ID
    if requested.coherent_access and not offered.coherent_access:
        return protocol.PRESENTATION_POLICY_ID
    return None


DEFAULT_QOS = QosProfile()
RELIABLE_KEEP_ALL = QosProfile(reliability=RELIABLE, history_kind=KEEP_ALL)
