#!/usr/bin/env python
"""
This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.
"""

import random
import unittest

from pymmog import protocol, qos
from pymmog.datatype import SampleInfo
from pymmog.exception import OperationalError
from pymmog.history import CacheChange, ReaderCache, WriterHistory
from pymmog.qos import QosProfile

from .mmog_base import MmogBase, entity


def change(seq, key=(1,)):
    return CacheChange(seq, key, 0, {'entity_id': key[0], 'seq': seq}, b'',
                       0, None)


def info(seq, key=(1,), unit=None):
    return SampleInfo(b'w' * 16, seq, unit, False, True, 0, key)


class MmogHistoryTest(unittest.TestCase):

    def test_keep_last_evicts(self):
        history = WriterHistory(QosProfile(history_depth=2))
        for seq in (1, 2, 3):
            history.add(change(seq), lambda s: False)
        self.assertEqual([c.sequence for c in history.changes()], [2, 3])
        self.assertIsNone(history.get(1))
        self.assertEqual(history.first_sequence(), 2)

    def test_keep_last_per_instance(self):
        history = WriterHistory(QosProfile(history_depth=1))
        history.add(change(1, (1,)), lambda s: False)
        history.add(change(2, (2,)), lambda s: False)
        history.add(change(3, (1,)), lambda s: False)
        self.assertEqual([c.sequence for c in history.changes()], [2, 3])
        self.assertEqual(len(history), 2)

    def test_keep_all_blocks_until_acknowledged(self):
        acked = set()
        history = WriterHistory(QosProfile(history_kind=qos.KEEP_ALL,
                                           max_samples_per_instance=2))
        history.add(change(1), acked.__contains__)
        history.add(change(2), acked.__contains__)
        with self.assertRaises(OperationalError) as cm:
            history.add(change(3), acked.__contains__)
        self.assertEqual(cm.exception.code, protocol.RESOURCE_LIMIT)
        acked.add(1)
        history.add(change(3), acked.__contains__)
        self.assertEqual([c.sequence for c in history.changes()], [2, 3])

    def test_empty_history(self):
        history = WriterHistory(QosProfile())
        self.assertIsNone(history.first_sequence())
        self.assertEqual(len(history), 0)

    def test_reader_keep_last(self):
        cache = ReaderCache(QosProfile(history_depth=2))
        for seq in (1, 2, 3):
            cache.insert({'seq': seq}, info(seq))
        cache.insert({'seq': 4}, info(4, (2,)))
        self.assertEqual(cache.instance_count((1,)), 2)
        self.assertEqual(cache.max_instance_count(), 2)
        self.assertTrue(cache.has_room((1,), 100))
        self.assertEqual([v['seq'] for v, _ in cache.take(10)], [2, 3, 4])
        self.assertEqual(len(cache), 0)
        self.assertEqual(cache.max_instance_count(), 0)

    def test_reader_keep_all_room(self):
        cache = ReaderCache(QosProfile(history_kind=qos.KEEP_ALL,
                                       max_samples_per_instance=2))
        self.assertTrue(cache.has_room((1,), 2))
        cache.insert({'seq': 1}, info(1))
        self.assertTrue(cache.has_room((1,)))
        self.assertFalse(cache.has_room((1,), 2))

    def test_read_keeps_samples(self):
        cache = ReaderCache(QosProfile(history_depth=5))
        cache.insert({'seq': 1}, info(1))
        first = cache.read(5)
        self.assertEqual(len(first), 1)
        first[0][0]['seq'] = 99
        self.assertEqual(cache.read(5)[0][0]['seq'], 1)
        self.assertEqual(len(cache), 1)

    def test_units_stay_whole(self):
        cache = ReaderCache(QosProfile(history_kind=qos.KEEP_ALL))
        cache.insert({'seq': 1}, info(1, (1,)))
        for seq in (2, 3, 4):
            cache.insert({'seq': seq}, info(seq, (seq,), 7), unit=7)
        cache.insert({'seq': 5}, info(5, (5,)))
        # The unit does not fit after the first sample
        self.assertEqual([v['seq'] for v, _ in cache.take(2)], [1])
        # A unit larger than max_samples is still returned whole
        self.assertEqual([v['seq'] for v, _ in cache.take(1)], [2, 3, 4])
        self.assertEqual([v['seq'] for v, _ in cache.take(1)], [5])

    def test_keep_last_drops_whole_unit(self):
        cache = ReaderCache(QosProfile())
        cache.insert({'seq': 1}, info(1, (1,), 7), unit=7)
        cache.insert({'seq': 2}, info(2, (2,), 7), unit=7)
        cache.insert({'seq': 3}, info(3, (3,)))
        cache.insert({'seq': 4}, info(4, (1,)))
        self.assertEqual(cache.instance_count((2,)), 0)
        self.assertEqual([v['seq'] for v, _ in cache.take(10)], [3, 4])

    def test_keep_last_within_own_unit(self):
        cache = ReaderCache(QosProfile())
        cache.insert({'seq': 1}, info(1, (1,), 7), unit=7)
        cache.insert({'seq': 2}, info(2, (2,), 8), unit=8)
        cache.insert({'seq': 3}, info(3, (1,), 8), unit=8)
        self.assertEqual([v['seq'] for v, _ in cache.take(10)], [2, 3])


class MmogHistoryBurstTest(MmogBase):
    """Random write bursts against KEEP_LAST readers of several depths."""

    observations = 600
    entities = 4

    def _bursts(self, depth):
        profile = QosProfile(history_depth=depth)
        writer, reader = self._pair(profile, profile)
        rng = random.Random(depth)
        pending = dict((k, []) for k in range(self.entities))
        version = 0
        for n in range(self.observations):
            for _ in range(rng.randint(1, 3 * depth)):
                version += 1
                k = rng.randrange(self.entities)
                writer.write(entity(k, version=version))
                pending[k].append(version)
            self.settle(rng.choice([1, 3, 10]))
            self.assertLessEqual(reader.max_instance_count(), depth,
                                 'depth %d observation %d' % (depth, n))
            if rng.random() < 0.1:
                self.settle(writer.participant.tick_period + 2 * self.latency)
                got = dict((k, []) for k in range(self.entities))
                for values, _ in reader.take():
                    got[values['entity_id']].append(values['version'])
                for k in range(self.entities):
                    self.assertEqual(got[k], pending[k][-depth:],
                                     'depth %d entity %d' % (depth, k))
                    pending[k] = []

    def test_depth_1(self):
        self._bursts(1)

    def test_depth_2(self):
        self._bursts(2)

    def test_depth_8(self):
        self._bursts(8)


if __name__ == '__main__':
    unittest.main()
