#!/usr/bin/env python
"""
This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.
"""

import datetime
import unittest

import pytz

from pymmog.accounts import FixedClock
from pymmog.datatype import Date
from pymmog.exception import InterfaceError
from pymmog import tokens
from pymmog.tokens import TokenIssuer, well_formed


class MmogTokensTest(unittest.TestCase):

    def setUp(self):
        self.clock = FixedClock(datetime.datetime(2012, 6, 1, 8, tzinfo=pytz.utc))
        self.issuer = TokenIssuer(ttl=600, clock=self.clock)

    def test_issue(self):
        token = self.issuer.issue('Max', 'FULL', Date(2014, 9, 10))
        self.assertTrue(well_formed(token.token))
        self.assertEqual(token.expires_at - token.issued_at,
                         datetime.timedelta(seconds=600))
        other = self.issuer.issue('Max', 'FULL', Date(2014, 9, 10))
        self.assertNotEqual(token.token, other.token)
        self.assertEqual(token.to_json(), {
            'session_token': token.token, 'user_login': 'Max', 'privilege': 'FULL',
            'issued_at': '2012-06-01T08:00:00+00:00',
            'expires_at': '2012-06-01T08:10:00+00:00'})

    def test_validate(self):
        token = self.issuer.issue('Max', 'FULL', Date(2014, 9, 10))
        held, reason = self.issuer.validate(token.token)
        self.assertEqual((held, reason), (token, None))

    def test_unknown_tokens(self):
        for value in ('0' * 32, 'not a token', '0' * 31, 'A' * 32, None, 42):
            self.assertEqual(self.issuer.validate(value), (None, tokens.UNKNOWN_TOKEN))

    def test_expiry(self):
        token = self.issuer.issue('Max', 'FULL', Date(2014, 9, 10))
        self.clock.advance(seconds=599)
        self.assertIsNotNone(self.issuer.validate(token.token)[0])
        self.clock.advance(seconds=1)
        self.assertEqual(self.issuer.validate(token.token), (None, tokens.EXPIRED))
        # refused tokens are forgotten
        self.assertEqual(self.issuer.validate(token.token),
                         (None, tokens.UNKNOWN_TOKEN))

    def test_issue_forgets_expired_tokens(self):
        old = self.issuer.issue('Max', 'FULL', Date(2014, 9, 10))
        self.issuer.issue('John123', 'BASIC', Date(2013, 5, 11))
        self.assertEqual(len(self.issuer), 2)
        self.clock.advance(seconds=600)
        fresh = self.issuer.issue('Max', 'FULL', Date(2014, 9, 10))
        self.assertEqual(len(self.issuer), 1)
        self.assertEqual(self.issuer.validate(old.token),
                         (None, tokens.UNKNOWN_TOKEN))
        self.assertEqual(self.issuer.validate(fresh.token), (fresh, None))

    def test_account_expiry(self):
        self.clock.set(datetime.datetime(2013, 5, 11, 23, 55))
        token = self.issuer.issue('John123', 'BASIC', Date(2013, 5, 11))
        self.assertIsNotNone(self.issuer.validate(token.token)[0])
        self.clock.advance(minutes=6)
        self.assertEqual(self.issuer.validate(token.token),
                         (None, tokens.ACCOUNT_EXPIRED))

    def test_revoke(self):
        token = self.issuer.issue('Max', 'FULL', Date(2014, 9, 10))
        self.assertTrue(self.issuer.revoke(token.token))
        self.assertFalse(self.issuer.revoke(token.token))
        self.assertEqual(self.issuer.validate(token.token)[1], tokens.UNKNOWN_TOKEN)

    def test_ttl_must_be_positive(self):
        for ttl in (0, -1):
            with self.assertRaises(InterfaceError):
                TokenIssuer(ttl=ttl)


if __name__ == '__main__':
    unittest.main()
