"""The game world: microcell regions, replicated entity state and views.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

The world is a width x height rectangle cut into square cells of
cell_size units; cells are numbered row by row.  Every replica keeps a
WorldView holding, per entity, the state with the greatest
(source_timestamp, writer_guid) seen so far, which makes merging
independent of delivery order.

Exported Classes:
WorldConfig -- World size and cell size.
EntityState -- One game object's replicated state.
WorldView -- A replica's merged view of the entities it receives.

Exported Functions:
region_of -- Region id of a position.
apply_update -- Merge one received sample into a view.
divergence -- Compare two views.
"""

__all__ = ['WorldConfig', 'EntityState', 'ViewEntry', 'WorldView',
           'ENTITY_TOPIC', 'ENTITY_TYPE', 'region_of', 'apply_update',
           'divergence', 'PLAYER', 'NPC', 'ITEM']

from collections import namedtuple
import math

try:
    from typing import Any, Dict, Iterable, Iterator, Optional, Set, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .datatype import TypeDescriptor
from .exception import DataError, InterfaceError

PLAYER = 1
NPC = 2
ITEM = 3

ENTITY_TOPIC = 'EntityState'

# Distance kept from the far edges by WorldConfig.clamp().
_EDGE = 1e-6

ENTITY_TYPE = TypeDescriptor([('entity_id', 'u64'),
                              ('kind', 'u32'),
                              ('region', 'u32'),
                              ('x', 'f64'),
                              ('y', 'f64'),
                              ('vx', 'f64'),
                              ('vy', 'f64'),
                              ('version', 'u64')],
                             ['entity_id'])


class WorldConfig(namedtuple('WorldConfig', ['width', 'height', 'cell_size'])):
    """World dimensions in world units."""

    __slots__ = ()

    def __new__(cls, width=1024.0, height=1024.0, cell_size=64.0):
        # type: (float, float, float) -> WorldConfig
        self = super(WorldConfig, cls).__new__(cls, float(width), float(height),
                                               float(cell_size))
        for name in cls._fields:
            value = getattr(self, name)
            if not value > 0 or math.isinf(value):
                raise InterfaceError("%s must be a positive number, not %r"
                                     % (name, value))
        return self

    @classmethod
    def from_dict(cls, values):
        # type: (Dict[str, Any]) -> WorldConfig
        unknown = set(values) - set(cls._fields)
        if unknown:
            raise InterfaceError("unknown world settings: %s"
                                 % (', '.join(sorted(unknown))))
        return cls(**values)

    @property
    def regions_x(self):
        # type: () -> int
        return int(math.ceil(self.width / self.cell_size))

    @property
    def regions_y(self):
        # type: () -> int
        return int(math.ceil(self.height / self.cell_size))

    @property
    def region_count(self):
        # type: () -> int
        return self.regions_x * self.regions_y

    def contains(self, x, y):
        # type: (float, float) -> bool
        return 0.0 <= x < self.width and 0.0 <= y < self.height

    def clamp(self, x, y):
        # type: (float, float) -> Tuple[float, float]
        """Return the nearest position inside the world."""
        return (min(max(x, 0.0), self.width - _EDGE),
                min(max(y, 0.0), self.height - _EDGE))


def region_of(x, y, cfg):
    # type: (float, float, WorldConfig) -> int
    """Return the id of the cell holding (x, y).

    :raises DataError: OUT_OF_BOUNDS outside [0, width) x [0, height).
    """
    if not cfg.contains(x, y):
        raise DataError("position (%r, %r) is outside the %gx%g world"
                        % (x, y, cfg.width, cfg.height),
                        protocol.OUT_OF_BOUNDS)
    return (int(math.floor(y / cfg.cell_size)) * cfg.regions_x
            + int(math.floor(x / cfg.cell_size)))


class EntityState(namedtuple('EntityState',
                             ['entity_id', 'kind', 'region', 'x', 'y',
                              'vx', 'vy', 'version'])):
    """Replicated state of one game object; key is entity_id."""

    __slots__ = ()

    def __new__(cls, entity_id, kind=PLAYER, region=0, x=0.0, y=0.0,
                vx=0.0, vy=0.0, version=0):
        # type: (int, int, int, float, float, float, float, int) -> EntityState
        return super(EntityState, cls).__new__(cls, entity_id, kind, region,
                                               float(x), float(y), float(vx),
                                               float(vy), version)

    def to_fields(self):
        # type: () -> Dict[str, Any]
        return self._asdict()

    @classmethod
    def from_fields(cls, values):
        # type: (Dict[str, Any]) -> EntityState
        return cls(**dict((name, values[name]) for name in cls._fields))

    def distance(self, other):
        # type: (EntityState) -> float
        return math.hypot(self.x - other.x, self.y - other.y)


ViewEntry = namedtuple('ViewEntry', ['state', 'source_timestamp', 'writer_guid'])


class WorldView(object):
    """Merged entity states of one replica.

    :param regions: The regions this view subscribes to, or None for all.
    """

    def __init__(self, regions=None):
        # type: (Optional[Iterable[int]]) -> None
        self.regions = frozenset(regions) if regions is not None else None
        self.__entries = {}  # type: Dict[int, ViewEntry]
        self.applied = 0
        self.stale = 0

    def get(self, entity_id):
        # type: (int) -> Optional[ViewEntry]
        return self.__entries.get(entity_id)

    def state(self, entity_id):
        # type: (int) -> Optional[EntityState]
        entry = self.__entries.get(entity_id)
        return entry.state if entry is not None else None

    def __contains__(self, entity_id):
        # type: (int) -> bool
        return entity_id in self.__entries

    def __len__(self):
        # type: () -> int
        return len(self.__entries)

    def __iter__(self):
        # type: () -> Iterator[int]
        return iter(sorted(self.__entries))

    def entries(self):
        # type: () -> Dict[int, ViewEntry]
        return dict(self.__entries)

    def merge(self, state, source_timestamp, writer_guid):
        # type: (EntityState, int, bytes) -> bool
        """Keep state if it is newer than the held one; True if kept."""
        held = self.__entries.get(state.entity_id)
        if held is not None and (source_timestamp, writer_guid) <= \
                (held.source_timestamp, held.writer_guid):
            self.stale += 1
            return False
        self.__entries[state.entity_id] = ViewEntry(state, source_timestamp,
                                                    writer_guid)
        self.applied += 1
        return True

    def expire(self, now_us, timeout_us):
        # type: (int, int) -> int
        """Drop entries whose source timestamp is older than timeout_us."""
        old = [eid for eid, entry in self.__entries.items()
               if now_us - entry.source_timestamp > timeout_us]
        for eid in old:
            del self.__entries[eid]
        return len(old)

    def restricted(self, regions):
        # type: (Optional[Iterable[int]]) -> Dict[int, ViewEntry]
        if regions is None:
            return dict(self.__entries)
        regions = frozenset(regions)
        return dict((eid, entry) for eid, entry in self.__entries.items()
                    if entry.state.region in regions)


def apply_update(view, sample, info):
    # type: (WorldView, Any, Any) -> WorldView
    """Merge a sample (EntityState or field values) into view.

    The sample replaces the held state only if its (source_timestamp,
    writer_guid) is greater; otherwise it is counted as stale.
    """
    if not isinstance(sample, EntityState):
        sample = EntityState.from_fields(sample)
    view.merge(sample, info.source_timestamp, info.writer_guid)
    return view


def divergence(a, b, regions=None):
    # type: (WorldView, WorldView, Optional[Iterable[int]]) -> Tuple[int, float]
    """Compare two views over their common regions.

    :param regions: Regions to compare; defaults to the intersection of
                    the views' own region sets.
    :returns: (number of entities missing from one view or differing,
               largest position distance of an entity held by both).
    """
    if regions is None:
        if a.regions is not None and b.regions is not None:
            regions = a.regions & b.regions
        else:
            regions = a.regions if a.regions is not None else b.regions
    left = a.restricted(regions)
    right = b.restricted(regions)
    count = len(set(left) ^ set(right))
    max_error = 0.0
    for eid in set(left) & set(right):
        ls, rs = left[eid].state, right[eid].state
        error = ls.distance(rs)
        if ls.version != rs.version or error > 0.0:
            count += 1
        max_error = max(max_error, error)
    return count, max_error
