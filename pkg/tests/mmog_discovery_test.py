#!/usr/bin/env python
"""
This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.
"""

import math
import unittest

from pymmog import protocol
from pymmog.message import DataSubmessage, WireMessage
from pymmog.status import Listener

from .mmog_base import MmogBase, entity


class LivelinessRecorder(Listener):
    def __init__(self, clock=None):
        self.changes = []
        self.times = []
        self.clock = clock

    def on_liveliness_changed(self, participant, status):
        self.changes.append((status.liveliness_changed.alive_count,
                             status.liveliness_changed.not_alive_count))
        if self.clock is not None:
            self.times.append(self.clock())


class MmogDiscoveryTest(MmogBase):

    lease = 200

    def test_silent_participant_is_not_alive(self):
        deliveries = []
        self.network.add_observer(
            lambda when, source, dest, data: deliveries.append((when, source, dest)))
        started = self.network.now
        recorder = LivelinessRecorder(lambda: self.network.now)
        writer, reader = self._pair()
        observer = reader.participant
        observer.listener = recorder
        silent = writer.participant
        self.network.silence(silent.link.address)
        silenced_at = self.network.now

        self.settle(2 * self.lease)
        self.assertEqual(observer.remote_participants(), [silent.guid])

        bound = (protocol.LIVELINESS_LEASE_FACTOR * self.lease
                 + silent.tick_period + self.latency)
        self.network.run_until(silenced_at + bound + 1)
        self.assertEqual(observer.remote_participants(), [])
        status = observer.get_status().liveliness_changed
        self.assertEqual((status.alive_count, status.not_alive_count), (0, 1))
        self.assertEqual(recorder.changes[-1], (0, 1))

        # the first observer tick strictly past the lease factor
        last_heard = max(when for when, source, dest in deliveries
                         if source == silent.link.address
                         and dest == observer.link.address)
        expires = last_heard + protocol.LIVELINESS_LEASE_FACTOR * self.lease
        ticks = math.floor((expires - started) / observer.tick_period) + 1
        self.assertEqual(recorder.times[-1],
                         started + ticks * observer.tick_period)

        reader_status = reader.get_status()
        self.assertEqual(reader_status.liveliness_changed.not_alive_count, 1)
        self.assertEqual(reader_status.subscription_matched.current_count, 0)
        self.assertEqual(reader.matched_publications(), [])

    def test_participant_comes_back(self):
        writer, reader = self._pair()
        silent = writer.participant
        self.network.silence(silent.link.address)
        self.settle(5 * self.lease)
        self.assertEqual(reader.matched_publications(), [])
        self.network.unsilence(silent.link.address)
        self.wait_for(lambda: reader.matched_publications(), what='a rematch')
        status = reader.get_status()
        self.assertEqual(status.liveliness_changed.alive_count, 1)
        self.assertEqual(status.liveliness_changed.not_alive_count, 0)
        self.assertEqual(status.subscription_matched.total_count, 2)
        participant_status = reader.participant.get_status().liveliness_changed
        self.assertEqual((participant_status.alive_count,
                          participant_status.not_alive_count), (1, 0))
        writer.write(entity(1))
        self.settle(100)
        self.assertEqual(len(reader.take()), 1)

    def test_departure(self):
        writer, reader = self._pair()
        writer.participant.delete()
        self.settle(50)
        self.assertEqual(reader.participant.remote_participants(), [])
        status = reader.get_status()
        self.assertEqual(status.subscription_matched.current_count, 0)
        # an orderly departure is not a liveliness loss
        self.assertEqual(status.liveliness_changed.not_alive_count, 0)
        participant_status = reader.participant.get_status().liveliness_changed
        self.assertEqual((participant_status.alive_count,
                          participant_status.not_alive_count), (0, 0))

    def test_deleted_writer_unmatched(self):
        writer, reader = self._pair()
        other = writer.publisher.create_writer(writer.topic)
        self.wait_for(lambda: len(reader.matched_publications()) == 2,
                      what='the second writer')
        writer.delete()
        self.wait_for(lambda: len(reader.matched_publications()) == 1,
                      what='the tombstone')
        self.assertEqual(reader.matched_publications()[0].guid, other.guid)
        self.assertEqual(reader.get_status().liveliness_changed.alive_count, 1)

    def test_tombstones_expire(self):
        writer, reader = self._pair()
        engine = writer.participant.engine
        writer.delete()
        self.assertEqual(len(engine.tombstones), 1)
        self.settle(protocol.TOMBSTONE_LEASES * self.lease + 100)
        self.assertEqual(len(engine.tombstones), 0)

    def test_domains_are_isolated(self):
        one = self._participant(domain_id=3)
        two = self._participant(domain_id=4)
        writer = one.create_publisher().create_writer(self._topic(one))
        reader = two.create_subscriber().create_reader(self._topic(two))
        self.settle()
        self.assertEqual(writer.matched_subscriptions(), [])
        self.assertEqual(reader.matched_publications(), [])

    def test_malformed_datagrams_are_counted(self):
        writer, reader = self._pair()
        engine = reader.participant.engine
        self.network.inject(reader.participant.link.address, b'garbage')
        self.network.inject(reader.participant.link.address, b'MDDS\x01\x00')
        self.settle(20)
        self.assertEqual(engine.malformed, 2)
        writer.write(entity(1))
        self.settle(100)
        self.assertEqual(len(reader.take()), 1)

    def test_unknown_sender_data_ignored(self):
        writer, reader = self._pair()
        stranger = WireMessage(b'\x77' * 12, [
            DataSubmessage(writer.entity_id, protocol.BROADCAST_READER, 1, 0, 0,
                           None, 0, writer.topic.codec.encode(entity(9)))])
        self.network.inject(reader.participant.link.address, stranger)
        self.settle(20)
        self.assertEqual(reader.cache_size(), 0)


if __name__ == '__main__':
    unittest.main()
