#!/usr/bin/env python
"""
This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.
"""

import unittest

from pymmog import protocol
from pymmog.exception import DataError, InterfaceError, ProgrammingError
from pymmog.gamesession import GameSession, aoi_expression
from pymmog.world import EntityState, WorldConfig, ITEM, PLAYER

from .mmog_base import MmogBase


class MmogGameSessionTest(MmogBase):

    def setUp(self):
        super(MmogGameSessionTest, self).setUp()
        self.world = WorldConfig()
        self.seen = []
        self.owner = GameSession(self._participant(), self.world, login='Max')
        self.watcher = GameSession(self._participant(), self.world,
                                   login='John123', observer=self._observe)

    def _observe(self, state, info, accepted):
        self.seen.append((state, info, accepted))

    def _watch(self, regions, session=None):
        session = session or self.watcher
        aoi = session.subscribe_aoi(regions)
        self.wait_for(lambda: aoi.reader.matched_publications(),
                      what='the area of interest')
        return aoi

    def test_aoi_expression(self):
        self.assertEqual(aoi_expression([3, 1, 3]), 'region == 1 OR region == 3')
        self.assertEqual(aoi_expression([0]), 'region == 0')

    def test_spawn(self):
        state = self.owner.spawn(1, PLAYER, 70.0, 70.0)
        self.assertEqual((state.region, state.version), (17, 0))
        self.assertTrue(self.owner.owns(1))
        self.assertFalse(self.watcher.owns(1))
        self.assertEqual(self.owner.published, 0)
        with self.assertRaises(InterfaceError):
            self.owner.spawn(1, PLAYER, 1.0, 1.0)
        with self.assertRaises(DataError) as cm:
            self.owner.spawn(2, PLAYER, -1.0, 0.0)
        self.assertEqual(cm.exception.code, protocol.OUT_OF_BOUNDS)
        self.assertEqual([s.entity_id for s in self.owner.owned()], [1])

    def test_publish_update(self):
        aoi = self._watch([0])
        self.assertTrue(aoi.filtered)
        state = self.owner.spawn(1, PLAYER, 10.0, 10.0)
        first = self.owner.publish_update(state._replace(x=12.0))
        second = self.owner.publish_update(first._replace(x=14.0))
        self.assertEqual((first.version, second.version), (1, 2))
        self.wait_for(lambda: self.watcher.view.state(1) is not None
                      and self.watcher.view.state(1).version == 2,
                      what='the second update')
        self.assertEqual(self.watcher.view.state(1).x, 14.0)
        self.assertEqual([s.version for s, _, accepted in self.seen if accepted],
                         [1, 2])
        self.assertEqual(self.owner.published, 2)

    def test_publish_errors(self):
        state = self.owner.spawn(1, PLAYER, 10.0, 10.0)
        with self.assertRaises(ProgrammingError) as cm:
            self.watcher.publish_update(state)
        self.assertEqual(cm.exception.code, protocol.NOT_OWNER)
        with self.assertRaises(InterfaceError):
            self.owner.publish_update(state._replace(x=100.0))
        with self.assertRaises(DataError) as cm:
            self.owner.publish_update(state._replace(x=5000.0))
        self.assertEqual(cm.exception.code, protocol.OUT_OF_BOUNDS)
        for call in (lambda: self.watcher.handoff(1, 70.0, 10.0),
                     lambda: self.watcher.move(1, 11.0, 10.0)):
            with self.assertRaises(ProgrammingError) as cm:
                call()
            self.assertEqual(cm.exception.code, protocol.NOT_OWNER)
        self.assertEqual(self.owner.published, 0)

    def test_aoi_filters_regions(self):
        self._watch([1])
        near = self.owner.spawn(1, PLAYER, 70.0, 10.0)
        far = self.owner.spawn(2, PLAYER, 10.0, 10.0)
        self.owner.publish_update(far)
        self.owner.publish_update(near)
        self.wait_for(lambda: 1 in self.watcher.view, what='the near entity')
        self.settle(100)
        self.assertNotIn(2, self.watcher.view)
        self.assertEqual(set(s.entity_id for s, _, _ in self.seen), set([1]))

    def test_invalid_regions(self):
        for regions in ([], [256], [-1], ['3']):
            with self.assertRaises(DataError) as cm:
                self.watcher.subscribe_aoi(regions)
            self.assertEqual(cm.exception.code, protocol.INVALID_REGION)
        self.assertIsNone(self.watcher.aoi)

    def test_whole_world_is_unfiltered(self):
        aoi = self.watcher.subscribe_aoi(range(self.world.region_count))
        self.assertFalse(aoi.filtered)
        self.assertIs(aoi.reader.topic, self.watcher.topic)

    def test_handoff_is_one_coherent_set(self):
        self._watch([0, 1])
        self.owner.spawn(1, PLAYER, 60.0, 10.0)
        sword = self.owner.spawn(2, ITEM, 61.0, 10.0)
        self.owner.publish_update(sword)
        self.wait_for(lambda: 2 in self.watcher.view, what='the item')
        del self.seen[:]

        states = self.owner.handoff(1, 70.0, 12.0, carried=[2])
        self.assertEqual([(s.entity_id, s.region, s.version) for s in states],
                         [(1, 1, 1), (2, 1, 2)])
        self.assertEqual((states[1].x, states[1].y), (71.0, 12.0))
        self.assertEqual(self.owner.handoffs, 1)

        self.wait_for(lambda: len(self.seen) == 2, what='the handoff')
        infos = [info for _, info, _ in self.seen]
        self.assertIsNotNone(infos[0].coherent_set_id)
        self.assertEqual(infos[0].coherent_set_id, infos[1].coherent_set_id)
        self.assertEqual([info.coherent_end for info in infos], [False, True])
        self.assertEqual(self.watcher.view.state(2).region, 1)

    def test_handoff_inside_region_is_plain_update(self):
        self.owner.spawn(1, PLAYER, 10.0, 10.0)
        states = self.owner.handoff(1, 20.0, 10.0)
        self.assertEqual(len(states), 1)
        self.assertEqual(self.owner.handoffs, 0)

    def test_move(self):
        self.owner.spawn(1, PLAYER, 10.0, 10.0)
        moved = self.owner.move(1, 30.0, 10.0, vx=2.0)
        self.assertEqual((moved[0].x, moved[0].vx, moved[0].region),
                         (30.0, 2.0, 0))
        crossed = self.owner.move(1, 30.0, 70.0)
        self.assertEqual(crossed[0].region, 16)
        self.assertEqual(crossed[0].vx, 2.0)
        self.assertEqual(self.owner.handoffs, 1)

    def test_changing_aoi_retires_old_reader(self):
        old = self._watch([0])
        new = self.watcher.subscribe_aoi([1])
        self.assertFalse(old.reader.deleted)
        self.wait_for(lambda: old.reader.deleted, what='the old reader to retire')
        self.assertIs(self.watcher.aoi, new)
        self.assertEqual(self.watcher.view.regions, frozenset([1]))
        self.owner.publish_update(self.owner.spawn(1, PLAYER, 10.0, 10.0))
        self.owner.publish_update(self.owner.spawn(2, PLAYER, 70.0, 10.0))
        self.wait_for(lambda: 2 in self.watcher.view, what='the new region')
        self.settle(100)
        self.assertNotIn(1, self.watcher.view)

    def test_drain(self):
        self._watch([0])
        # without a listener the samples wait in the reader
        self.watcher.aoi.reader.listener = None
        self.owner.publish_update(self.owner.spawn(1, PLAYER, 10.0, 10.0))
        self.wait_for(lambda: self.watcher.aoi.reader.cache_size() == 1,
                      what='the sample')
        self.assertNotIn(1, self.watcher.view)
        self.assertEqual(self.watcher.drain(), 1)
        self.assertIn(1, self.watcher.view)
        self.assertEqual(self.watcher.drain(), 0)

    def test_expire(self):
        self._watch([0])
        self.owner.publish_update(self.owner.spawn(1, PLAYER, 10.0, 10.0))
        self.wait_for(lambda: 1 in self.watcher.view, what='the entity')
        self.assertEqual(self.watcher.expire(), 0)
        self.settle(self.watcher.staleness_timeout_ms + 100)
        self.assertEqual(self.watcher.expire(), 1)
        self.assertEqual(len(self.watcher.view), 0)

    def test_stale_update_rejected(self):
        self._watch([0])
        state = self.owner.publish_update(self.owner.spawn(1, PLAYER, 10.0, 10.0))
        self.wait_for(lambda: 1 in self.watcher.view, what='the entity')
        held = self.watcher.view.get(1)
        # an older copy of the same update loses on timestamp
        self.watcher.view.merge(EntityState(1, x=99.0),
                                held.source_timestamp - 1, held.writer_guid)
        self.assertEqual(self.watcher.view.state(1), state)

    def test_close(self):
        self.owner.close()
        self.assertTrue(self.owner.writer.deleted)
        self.owner.participant.delete()
        self.owner.close()


if __name__ == '__main__':
    unittest.main()
