#!/usr/bin/env python
"""
This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.
"""

import unittest

from pymmog import protocol, qos
from pymmog.exception import OperationalError
from pymmog.netsim import NetSimConfig
from pymmog.qos import QosProfile

from .mmog_base import DropOnce, MmogBase, entity

RELIABLE = QosProfile(reliability=qos.RELIABLE, history_kind=qos.KEEP_ALL)


class MmogReliabilityTest(MmogBase):

    def test_retransmission(self):
        writer, reader = self._pair(RELIABLE, RELIABLE)
        rule = DropOnce([3, 4], source=writer.participant.link.address)
        self.network.drop_rule = rule
        for n in range(1, 7):
            writer.write(entity(1, version=n))
            self.settle(writer.participant.tick_period)
        self.assertTrue(writer.wait_for_acknowledgments(5000))
        self.assertEqual(rule.pending, set())
        self.assertEqual([v['version'] for v, _ in reader.take()],
                         [1, 2, 3, 4, 5, 6])
        self.assertEqual(reader.get_status().sample_lost.total_count, 0)
        self.assertGreaterEqual(writer.participant.engine.retransmissions, 2)

    def test_ordered_under_random_loss(self):
        writer, reader = self._pair(RELIABLE, RELIABLE)
        self.network.config = NetSimConfig(drop_probability=0.3,
                                           latency_mean=20, latency_jitter=15,
                                           rng_seed=99)
        for n in range(40):
            writer.write(entity(n % 4, version=n))
            if n % 5 == 4:
                self.settle(writer.participant.tick_period)
        self.assertTrue(writer.wait_for_acknowledgments(30000))
        self.assertEqual([v['version'] for v, _ in reader.take()],
                         list(range(40)))
        self.assertGreater(self.network.datagrams_dropped, 0)

    def test_best_effort_counts_losses(self):
        writer, reader = self._pair(reader_qos=QosProfile(history_depth=20))
        self.network.drop_rule = DropOnce([2, 3, 5])
        for n in range(1, 7):
            writer.write(entity(1, version=n))
            self.settle(writer.participant.tick_period)
        self.settle(100)
        self.assertEqual([v['version'] for v, _ in reader.take()], [1, 4, 6])
        self.assertEqual(reader.get_status().sample_lost.total_count, 3)

    def test_best_effort_writer_never_waits(self):
        writer, _ = self._pair()
        writer.write(entity(1))
        # done as soon as the sample has left the outbox
        self.assertTrue(writer.wait_for_acknowledgments(200))
        self.assertTrue(writer.wait_for_acknowledgments(0))

    def test_late_joiner_gets_gap(self):
        one = self._participant()
        writer = one.create_publisher().create_writer(self._topic(one), RELIABLE)
        for n in range(3):
            writer.write(entity(1, version=n))
        self.settle(100)
        two = self._participant()
        reader = two.create_subscriber().create_reader(self._topic(two), RELIABLE)
        self.wait_for(lambda: reader.matched_publications(), what='a match')
        writer.write(entity(1, version=3))
        self.assertTrue(writer.wait_for_acknowledgments(5000))
        self.assertEqual([v['version'] for v, _ in reader.take()], [3])
        self.assertEqual(reader.get_status().sample_lost.total_count, 0)

    def test_filtered_reliable_stream(self):
        writer, reader = self._pair(RELIABLE, RELIABLE, filter_text='region == 1')
        self.network.drop_rule = DropOnce([2], source=writer.participant.link.address)
        for n in range(6):
            writer.write(entity(n, region=n % 2))
            self.settle(writer.participant.tick_period)
        self.assertTrue(writer.wait_for_acknowledgments(5000))
        self.assertEqual([v['entity_id'] for v, _ in reader.take()], [1, 3, 5])

    def test_keep_all_resource_limit(self):
        limited = RELIABLE.with_changes(max_samples_per_instance=2)
        writer, _ = self._pair(limited, RELIABLE)
        writer.write(entity(1, version=1))
        writer.write(entity(1, version=2))
        with self.assertRaises(OperationalError) as cm:
            writer.write(entity(1, version=3))
        self.assertEqual(cm.exception.code, protocol.RESOURCE_LIMIT)
        # another instance still has room
        writer.write(entity(2, version=1))
        self.assertTrue(writer.wait_for_acknowledgments(5000))
        writer.write(entity(1, version=3))
        self.assertEqual([seq for seq, _ in writer.history_samples()], [2, 3, 4])

    def test_keep_last_writer_evicts(self):
        writer, _ = self._pair(QosProfile(reliability=qos.RELIABLE, history_depth=2),
                               RELIABLE)
        for n in range(5):
            writer.write(entity(1, version=n))
        self.assertEqual([v['version'] for _, v in writer.history_samples()], [3, 4])
        self.assertEqual(writer.last_sequence, 5)

    def test_acknowledgment_timeout(self):
        writer, reader = self._pair(RELIABLE, RELIABLE)
        self.network.silence(reader.participant.link.address)
        writer.write(entity(1))
        start = self.network.now
        self.assertFalse(writer.wait_for_acknowledgments(300))
        self.assertGreaterEqual(self.network.now - start, 300)

    def test_reader_flow_control(self):
        small = RELIABLE.with_changes(max_samples_per_instance=3)
        writer, reader = self._pair(RELIABLE, small)
        for n in range(8):
            writer.write(entity(1, version=n))
        self.settle(500)
        self.assertEqual(reader.cache_size(), 3)
        received = []
        while len(received) < 8:
            taken = reader.take()
            received.extend(v['version'] for v, _ in taken)
            self.settle(200)
            if not taken and self.network.now > 20000:
                break
        self.assertEqual(received, list(range(8)))
        self.assertEqual(reader.get_status().sample_lost.total_count, 0)


if __name__ == '__main__':
    unittest.main()
