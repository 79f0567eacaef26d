#!/usr/bin/env python
"""
This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

The full-size runs take minutes; set MMOG_HUGE_TESTS=1 to run them.
"""

import random
import unittest

from pymmog import protocol, qos
from pymmog.encodedmessage import decode_message, encode_message
from pymmog.exception import MalformedMessage
from pymmog.message import (AckNackSubmessage, DataSubmessage, GapSubmessage,
                            HeartbeatSubmessage, WireMessage)
from pymmog.netsim import NetSimConfig
from pymmog.qos import QosProfile
from pymmog.scenario import load_config, run_scenario

from . import huge_tests_enabled, mmog_coherent_test, mmog_history_test
from .mmog_base import MmogBase, entity

WRITERS = 32
WRITES = 1000
CORPUS = 10000
OBSERVATIONS = 10000
COHERENT_SETS = 1000

RELIABLE = QosProfile(reliability=qos.RELIABLE, history_kind=qos.KEEP_ALL,
                      max_samples_per_instance=WRITES)


def random_submessage(rng):
    kind = rng.randrange(4)
    if kind == 0:
        flags = rng.choice([0, protocol.DATA_COHERENT,
                            protocol.DATA_COHERENT | protocol.DATA_COHERENT_END])
        set_id = rng.getrandbits(32) if flags else None
        payload = bytes(bytearray(rng.getrandbits(8)
                                  for _ in range(rng.randrange(200))))
        return DataSubmessage(rng.getrandbits(32), rng.getrandbits(32),
                              rng.getrandbits(64), rng.getrandbits(64), flags,
                              set_id, rng.getrandbits(64), payload)
    if kind == 1:
        return HeartbeatSubmessage(rng.getrandbits(32), rng.getrandbits(64),
                                   rng.getrandbits(64))
    if kind == 2:
        base = rng.getrandbits(48)
        missing = [base + rng.randrange(protocol.MAX_NACK_BITS)
                   for _ in range(rng.randrange(10))]
        return AckNackSubmessage.build(rng.getrandbits(32), rng.getrandbits(32),
                                       base, base, missing)
    return GapSubmessage(rng.getrandbits(32), rng.getrandbits(32),
                         rng.getrandbits(64), rng.getrandbits(64))


@unittest.skipUnless(huge_tests_enabled(), 'MMOG_HUGE_TESTS is not set')
class MmogHugeTest(unittest.TestCase):

    def test_mp32(self):
        report = run_scenario(load_config('mp32'))
        self.assertEqual(report.failed, [])
        self.assertIsNotNone(report['liveliness'])

    def test_mmog256(self):
        report = run_scenario(load_config('mmog256'))
        self.assertEqual(report.failed, [])
        self.assertEqual(report['players'], 256)
        self.assertEqual(len(report['subscribers']), 256)

    def test_mmog256_lossy(self):
        report = run_scenario(load_config('mmog256_lossy'))
        self.assertEqual(report.failed, [])
        self.assertGreater(report['retransmissions'], 0)
        self.assertGreater(report['datagrams_dropped'], 0)

    def test_codec_corpus(self):
        rng = random.Random(2012)
        prefix = b'\x05' * protocol.GUID_PREFIX_SIZE
        for _ in range(CORPUS):
            subs = [random_submessage(rng) for _ in range(rng.randrange(1, 5))]
            message = WireMessage(prefix, subs, rng.choice([0, protocol.FLAG_SIMULATED]))
            data = encode_message(message)
            self.assertEqual(decode_message(data), message)
            with self.assertRaises(MalformedMessage):
                decode_message(data[:-1])


@unittest.skipUnless(huge_tests_enabled(), 'MMOG_HUGE_TESTS is not set')
class MmogHugeReliabilityTest(MmogBase):

    def test_many_writers_in_order(self):
        reader_side = self._participant()
        reader = reader_side.create_subscriber().create_reader(
            self._topic(reader_side), RELIABLE)
        writers = []
        for _ in range(WRITERS):
            one = self._participant()
            writers.append(one.create_publisher().create_writer(self._topic(one),
                                                                RELIABLE))
        self.wait_for(lambda: len(reader.matched_publications()) == WRITERS,
                      timeout=20000, what='every writer')
        self.network.config = NetSimConfig(drop_probability=0.05,
                                           latency_mean=50, latency_jitter=20,
                                           rng_seed=7)

        received = dict((n, []) for n in range(WRITERS))

        def collect():
            for values, _ in reader.take():
                received[values['entity_id']].append(values['version'])

        batch = 50
        for start in range(0, WRITES, batch):
            for n, writer in enumerate(writers):
                for version in range(start, start + batch):
                    writer.write(entity(n, version=version))
            self.settle(reader_side.tick_period)
            collect()
        for writer in writers:
            self.assertTrue(writer.wait_for_acknowledgments(120000))
            collect()
        self.settle(200)
        collect()
        for n in range(WRITERS):
            self.assertEqual(received[n], list(range(WRITES)), 'writer %d' % (n))
        self.assertEqual(reader.get_status().sample_lost.total_count, 0)
        self.assertGreater(self.network.datagrams_dropped, 0)


@unittest.skipUnless(huge_tests_enabled(), 'MMOG_HUGE_TESTS is not set')
class MmogHugeHistoryBurstTest(mmog_history_test.MmogHistoryBurstTest):
    observations = OBSERVATIONS


@unittest.skipUnless(huge_tests_enabled(), 'MMOG_HUGE_TESTS is not set')
class MmogHugeRandomSetsTest(mmog_coherent_test.MmogRandomSetsTest):
    sets = COHERENT_SETS


if __name__ == '__main__':
    unittest.main()
