"""A player's game session on top of a DomainParticipant.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

A session owns the entities it spawned, publishes their updates on the
EntityState topic and keeps a WorldView of the regions it is interested
in.  Moves that cross a region border are published as one coherent set
together with any entities carried along.

Exported Classes:
GameSession -- Publishing and area-of-interest subscription for one player.
AoiSubscription -- The filtered reader behind a session's view.

Exported Functions:
aoi_expression -- The filter text selecting a set of regions.
"""

__all__ = ['GameSession', 'AoiSubscription', 'aoi_expression',
           'SESSION_WRITER_QOS', 'SESSION_READER_QOS']

import logging

try:
    from typing import Any, Callable, Dict, Iterable, List, Optional  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .exception import DataError, InterfaceError, ProgrammingError
from .qos import QosProfile, RELIABLE, KEEP_ALL, GROUP
from .status import Listener
from .world import (ENTITY_TOPIC, ENTITY_TYPE, EntityState, WorldConfig,  # pylint: disable=unused-import
                    WorldView, apply_update, region_of)

logger = logging.getLogger(__name__)

SESSION_WRITER_QOS = QosProfile(reliability=RELIABLE, history_kind=KEEP_ALL,
                                coherent_access=True, access_scope=GROUP)
SESSION_READER_QOS = QosProfile(reliability=RELIABLE, history_kind=KEEP_ALL,
                                coherent_access=True, access_scope=GROUP)


def aoi_expression(regions):
    # type: (Iterable[int]) -> str
    """Return "region == a OR region == b ..." for the sorted regions."""
    return ' OR '.join('region == %d' % (r) for r in sorted(set(regions)))


class _ViewFeeder(Listener):
    """Takes every sample delivered to an AOI reader into the view."""

    def __init__(self, session, subscription):
        # type: (GameSession, AoiSubscription) -> None
        self.session = session
        self.subscription = subscription

    def on_data_available(self, entity, status):
        self.session._drain(entity)

    def on_subscription_matched(self, entity, status):
        self.session._retire_replaced(self.subscription, status)


class AoiSubscription(object):
    """The regions a session watches and the reader delivering them."""

    def __init__(self, session, regions, reader, expression):
        # type: (GameSession, frozenset, Any, Optional[str]) -> None
        self.session = session
        self.regions = regions
        self.reader = reader
        self.expression = expression

    @property
    def filtered(self):
        # type: () -> bool
        return self.expression is not None

    def __repr__(self):
        # type: () -> str
        return 'AoiSubscription(%s)' % (sorted(self.regions))


class GameSession(object):
    """One player's presence in the game world.

    Public Functions:
    spawn -- Create an entity owned by this session.
    publish_update -- Publish a new state of an owned entity.
    handoff -- Move an owned entity into another region atomically.
    move -- publish_update or handoff, whichever the move needs.
    subscribe_aoi -- Watch a set of regions; replaces the previous set.
    drain -- Take every pending sample into the view.
    expire -- Drop view entries not updated for staleness_timeout.
    close -- Delete the session's entities from the domain.
    """

    def __init__(self, participant,       # type: Any
                 world,                   # type: WorldConfig
                 login='',                # type: str
                 staleness_timeout_ms=2000.0,  # type: float
                 writer_qos=None,         # type: Optional[QosProfile]
                 reader_qos=None,         # type: Optional[QosProfile]
                 observer=None            # type: Optional[Callable[..., None]]
                 ):
        # type: (...) -> None
        """Create the session's topic, publisher, writer and subscriber.

        :param observer: Called as observer(state, info, accepted) for
                         every sample taken into the view.
        """
        self.participant = participant
        self.world = world
        self.login = login
        self.staleness_timeout_ms = staleness_timeout_ms
        self.observer = observer
        self.topic = participant.create_topic(ENTITY_TOPIC, ENTITY_TYPE)
        writer_qos = writer_qos or SESSION_WRITER_QOS
        reader_qos = reader_qos or SESSION_READER_QOS
        group = login.encode('utf-8')
        self.publisher = participant.create_publisher(
            qos=QosProfile(coherent_access=True, access_scope=GROUP,
                           group_data=group))
        self.writer = self.publisher.create_writer(self.topic, writer_qos)
        self.subscriber = participant.create_subscriber(
            qos=QosProfile(coherent_access=True, access_scope=GROUP,
                           group_data=group))
        self.reader_qos = reader_qos
        self.view = WorldView(())
        self.aoi = None        # type: Optional[AoiSubscription]
        self.__retiring = []   # type: List[AoiSubscription]
        self.__owned = {}      # type: Dict[int, EntityState]
        self.published = 0
        self.handoffs = 0

    # Ownership and publishing

    def owns(self, entity_id):
        # type: (int) -> bool
        return entity_id in self.__owned

    def owned(self):
        # type: () -> List[EntityState]
        """Return the last published state of every owned entity."""
        return [self.__owned[eid] for eid in sorted(self.__owned)]

    def spawn(self, entity_id, kind, x, y, vx=0.0, vy=0.0):
        # type: (int, int, float, float, float, float) -> EntityState
        """Take ownership of a new entity at (x, y); nothing is published.

        :raises InterfaceError: If the session already owns entity_id.
        """
        if entity_id in self.__owned:
            raise InterfaceError("entity %d is already owned" % (entity_id))
        state = EntityState(entity_id, kind, region_of(x, y, self.world),
                            x, y, vx, vy, 0)
        self.__owned[entity_id] = state
        return state

    def _checked(self, state):
        # type: (EntityState) -> EntityState
        held = self.__owned.get(state.entity_id)
        if held is None:
            raise ProgrammingError("entity %d is not owned by this session"
                                   % (state.entity_id), protocol.NOT_OWNER)
        region = region_of(state.x, state.y, self.world)
        if state.region != region:
            raise InterfaceError("entity %d at (%g, %g) is in region %d, not %d"
                                 % (state.entity_id, state.x, state.y,
                                    region, state.region))
        return state._replace(version=held.version + 1)

    def publish_update(self, state):
        # type: (EntityState) -> EntityState
        """Publish a new state of an owned entity.

        The version is taken from the session's counter of the entity.

        :returns: The published state.
        :raises ProgrammingError: NOT_OWNER for entities of other sessions.
        :raises DataError: OUT_OF_BOUNDS for positions outside the world.
        :raises InterfaceError: If the region does not hold the position.
        """
        state = self._checked(state)
        self.writer.write(state.to_fields())
        self.__owned[state.entity_id] = state
        self.published += 1
        return state

    def handoff(self, entity_id, new_x, new_y, carried=()):
        # type: (int, float, float, Iterable[int]) -> List[EntityState]
        """Move an owned entity to another region as one coherent set.

        Owned entities listed in carried move by the same offset and join
        the set.  A move inside the current region is a plain update.

        :returns: The published states.
        """
        held = self.__owned.get(entity_id)
        if held is None:
            raise ProgrammingError("entity %d is not owned by this session"
                                   % (entity_id), protocol.NOT_OWNER)
        region = region_of(new_x, new_y, self.world)
        moved = held._replace(x=float(new_x), y=float(new_y), region=region)
        if region == held.region:
            return [self.publish_update(moved)]
        dx, dy = moved.x - held.x, moved.y - held.y
        states = [self._checked(moved)]
        for eid in carried:
            other = self.__owned.get(eid)
            if other is None:
                raise ProgrammingError("entity %d is not owned by this session"
                                       % (eid), protocol.NOT_OWNER)
            x, y = other.x + dx, other.y + dy
            states.append(self._checked(other._replace(
                x=x, y=y, region=region_of(x, y, self.world))))
        self.publisher.begin_coherent_changes()
        try:
            for state in states:
                self.writer.write(state.to_fields())
        finally:
            self.publisher.end_coherent_changes()
        for state in states:
            self.__owned[state.entity_id] = state
        self.published += len(states)
        self.handoffs += 1
        logger.debug("entity %d handed off from region %d to %d",
                     entity_id, held.region, region)
        return states

    def move(self, entity_id, x, y, vx=None, vy=None):
        # type: (int, float, float, Optional[float], Optional[float]) -> List[EntityState]
        """Publish the entity at (x, y), handing it off if the region changes."""
        held = self.__owned.get(entity_id)
        if held is None:
            raise ProgrammingError("entity %d is not owned by this session"
                                   % (entity_id), protocol.NOT_OWNER)
        if vx is not None or vy is not None:
            held = held._replace(vx=held.vx if vx is None else float(vx),
                                 vy=held.vy if vy is None else float(vy))
            self.__owned[entity_id] = held
        region = region_of(x, y, self.world)
        if region != held.region:
            return self.handoff(entity_id, x, y)
        return [self.publish_update(held._replace(x=float(x), y=float(y)))]

    # Area of interest

    def subscribe_aoi(self, regions):
        # type: (Iterable[int]) -> AoiSubscription
        """Watch regions; a previous subscription is retired once the new
        reader has matched as many writers as the old one.

        :raises DataError: INVALID_REGION for an empty set or unknown ids.
        """
        regions = frozenset(regions)
        if not regions:
            raise DataError("an area of interest needs at least one region",
                            protocol.INVALID_REGION)
        for region in regions:
            if not isinstance(region, int) or not 0 <= region < self.world.region_count:
                raise DataError("region %r does not exist" % (region,),
                                protocol.INVALID_REGION)
        if regions == frozenset(range(self.world.region_count)):
            topic = self.topic
            expression = None
        else:
            expression = aoi_expression(regions)
            topic = self.participant.create_content_filtered_topic(
                self.topic, expression)
        subscription = AoiSubscription(self, regions, None, expression)
        reader = self.subscriber.create_reader(
            topic, self.reader_qos, _ViewFeeder(self, subscription))
        subscription.reader = reader
        previous = self.aoi
        self.aoi = subscription
        self.view.regions = regions
        if previous is not None:
            self.__retiring.append(previous)
            self._retire_replaced(subscription, reader.get_status())
        return subscription

    def _retire_replaced(self, subscription, status):
        # type: (AoiSubscription, Any) -> None
        if subscription is not self.aoi or not self.__retiring:
            return
        current = status.subscription_matched.current_count
        for old in list(self.__retiring):
            if old.reader.deleted:
                self.__retiring.remove(old)
                continue
            if current >= old.reader.get_status().subscription_matched.current_count:
                self._drain(old.reader)
                old.reader.delete()
                self.__retiring.remove(old)
                logger.debug("retired %r for %r", old, subscription)

    def _drain(self, reader):
        # type: (Any) -> int
        if reader.deleted:
            return 0
        count = 0
        regions = self.aoi.regions if self.aoi is not None else None
        for values, info in reader.take():
            state = EntityState.from_fields(values)
            if regions is not None and state.region not in regions:
                continue
            before = self.view.applied
            apply_update(self.view, state, info)
            count += 1
            if self.observer is not None:
                self.observer(state, info, self.view.applied > before)
        return count

    def drain(self):
        # type: () -> int
        """Take every pending sample of the current and retiring readers."""
        count = 0
        for sub in self.__retiring + ([self.aoi] if self.aoi is not None else []):
            count += self._drain(sub.reader)
        return count

    def expire(self, now_ms=None):
        # type: (Optional[float]) -> int
        """Drop view entries older than staleness_timeout_ms."""
        if now_ms is None:
            now_ms = self.participant.clock.now_ms()
        return self.view.expire(int(now_ms * 1000),
                                int(self.staleness_timeout_ms * 1000))

    def close(self):
        # type: () -> None
        """Delete the session's publisher and subscriber."""
        if self.participant.closed:
            return
        self.publisher.delete()
        self.subscriber.delete()
