#!/usr/bin/env python

import unittest

from pymmog import crypt


class MmogCryptTest(unittest.TestCase):
    """Run basic tests of the crypt module."""

    # Published FNV-1a 64 test vectors
    FNV = {b'': 0xcbf29ce484222325,
           b'a': 0xaf63dc4c8601ec8c,
           b'foobar': 0x85944171f73967e8}

    def test_fnv1a64(self):
        """Test fnv1a64 against known vectors."""
        for data, expected in self.FNV.items():
            self.assertEqual(crypt.fnv1a64(data), expected)

    def test_fnv1a64_bytearray(self):
        self.assertEqual(crypt.fnv1a64(bytearray(b'foobar')),
                         crypt.fnv1a64(b'foobar'))

    def test_password_roundtrip(self):
        stored = crypt.hash_password('game123', iterations=1000)
        self.assertTrue(stored.startswith('pbkdf2_sha256$1000$'))
        self.assertTrue(crypt.verify_password('game123', stored))
        self.assertFalse(crypt.verify_password('game124', stored))

    def test_password_salted(self):
        one = crypt.hash_password('helloworld', iterations=1000)
        two = crypt.hash_password('helloworld', iterations=1000)
        self.assertNotEqual(one, two)

    def test_password_fixed_salt(self):
        salt = b'0123456789abcdef'
        self.assertEqual(crypt.hash_password('pw', salt, 1000),
                         crypt.hash_password('pw', salt, 1000))

    def test_malformed_stored(self):
        for stored in ('', 'plain', 'md5$1$00$00',
                       'pbkdf2_sha256$x$00$00',
                       'pbkdf2_sha256$0$00$00',
                       'pbkdf2_sha256$10$zz$00'):
            self.assertFalse(crypt.verify_password('pw', stored), stored)

    def test_random_token(self):
        token = crypt.random_token()
        self.assertEqual(len(token), 32)
        int(token, 16)
        self.assertNotEqual(token, crypt.random_token())
        self.assertEqual(len(crypt.random_token(4)), 8)


if __name__ == '__main__':
    unittest.main()
