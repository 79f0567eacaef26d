#!/usr/bin/env python
"""
This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.
"""

import unittest

from pymmog.accounts import AccountStore, CardStore, FixedClock
from pymmog.exception import AccessDenied
from pymmog.process import InProcessBinding
from pymmog import tokens
from pymmog.webapp import LoginServices, aoi_grant, create_app, fixture_path
from pymmog.world import WorldConfig

MAX = {'user_login': 'Max', 'password': 'game123',
       'card_number': '4111111111111111', 'card_expiry': '12/2015'}


class MmogWebappTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.clock = FixedClock()
        cls.accounts = AccountStore.from_jsonl(fixture_path('accounts.jsonl'), cls.clock)
        cls.cards = CardStore.from_jsonl(fixture_path('cards.jsonl'), cls.clock)

    def setUp(self):
        self.services = LoginServices(self.accounts, self.cards, domain_id=7)
        self.app = create_app(self.services)
        self.client = self.app.test_client()

    def _login(self, **changes):
        body = dict(MAX)
        body.update(changes)
        return self.client.post('/login', json=body)

    def test_login(self):
        response = self._login()
        self.assertEqual(response.status_code, 200)
        reply = response.get_json()
        self.assertTrue(reply['approved'])
        self.assertEqual(reply['privilege'], 'FULL')
        self.assertEqual(reply['expiration'], '09/10/2014')
        self.assertTrue(tokens.well_formed(reply['session_token']))
        self.assertEqual(self.services.last_trace[-1], ('reply', 'approve'))

    def test_login_denied(self):
        cases = (({'password': 'wrong'}, 'USER_CHECK_FAILED'),
                 ({'card_number': '4000000000000002'}, 'CARD_CHECK_FAILED'),
                 ({'password': 'wrong', 'card_number': '1'}, 'USER_CHECK_FAILED'))
        for changes, reason in cases:
            response = self._login(**changes)
            self.assertEqual(response.status_code, 401, changes)
            self.assertEqual(response.get_json(), {'approved': False, 'reason': reason})

    def test_malformed_requests(self):
        bodies = ({'user_login': 'Max'}, dict(MAX, password=7), ['Max'])
        for body in bodies:
            response = self.client.post('/login', json=body)
            self.assertEqual(response.status_code, 400)
            self.assertEqual(response.get_json()['reason'], 'MALFORMED_REQUEST')
        response = self.client.post('/login', data='{"user_login"',
                                    content_type='application/json')
        self.assertEqual(response.status_code, 400)
        self.assertEqual(self.client.post('/join', json={}).status_code, 400)
        self.assertEqual(self.client.post('/services/card_check',
                                          json={'card_number': 1}).status_code, 400)

    def test_session_and_join(self):
        token = self._login().get_json()['session_token']
        response = self.client.get('/session/%s' % (token))
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.get_json(), {'valid': True, 'user_login': 'Max',
                                               'privilege': 'FULL'})
        response = self.client.post('/join', json={'session_token': token})
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.get_json(), {
            'domain_id': 7, 'user_login': 'Max', 'privilege': 'FULL',
            'aoi_regions': list(aoi_grant('Max', WorldConfig()))})

    def test_bad_tokens(self):
        response = self.client.get('/session/%s' % ('0' * 32))
        self.assertEqual(response.status_code, 401)
        self.assertEqual(response.get_json(), {'valid': False,
                                               'reason': tokens.UNKNOWN_TOKEN})
        response = self.client.post('/join', json={'session_token': 'nope'})
        self.assertEqual(response.status_code, 401)
        self.assertEqual(response.get_json(), {'reason': tokens.UNKNOWN_TOKEN})
        with self.assertRaises(AccessDenied) as cm:
            self.services.join_game(None)
        self.assertEqual(cm.exception.reason, tokens.UNKNOWN_TOKEN)

    def test_expired_session(self):
        token = self._login().get_json()['session_token']
        saved = self.clock.now
        try:
            self.clock.advance(seconds=tokens.DEFAULT_TOKEN_TTL)
            response = self.client.post('/join', json={'session_token': token})
            self.assertEqual(response.get_json(), {'reason': tokens.EXPIRED})
        finally:
            self.clock.set(saved)

    def test_component_services(self):
        response = self.client.post('/services/user_check',
                                    json={'user_login': 'Max', 'password': 'game123'})
        self.assertEqual(response.get_json(), {'match': True, 'privilege': 'FULL',
                                               'expiration': '09/10/2014'})
        response = self.client.post('/services/card_check',
                                    json={'card_number': '4012888888881881',
                                          'expiry': '01/2010'})
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.get_json(), {'approved': False})

    def test_service_fault(self):
        def down(user_login, password):
            raise IOError('account store unreachable')

        self.services.bindings = dict(self.services.bindings,
                                      UserCheck=InProcessBinding(down))
        response = self._login()
        self.assertEqual(response.status_code, 401)
        self.assertEqual(response.get_json(), {'approved': False,
                                               'reason': 'SERVICE_UNAVAILABLE'})

    def test_unbound_port(self):
        self.services.bindings = {}
        response = self._login()
        self.assertEqual(response.status_code, 401)
        self.assertEqual(response.get_json(), {'approved': False,
                                               'reason': 'PORT_UNBOUND'})

    def test_http_bindings(self):
        bindings = self.services.http_bindings('http://login.example:8080/')
        self.assertEqual(bindings['UserCheck'].url,
                         'http://login.example:8080/services/user_check')
        self.assertEqual(bindings['CardCheck'].url,
                         'http://login.example:8080/services/card_check')

    def test_aoi_grant(self):
        world = WorldConfig()
        for login in ('Max', 'John123', 'bot-0001', u'Zoë'):
            regions = aoi_grant(login, world)
            self.assertEqual(list(regions), sorted(set(regions)))
            self.assertTrue(4 <= len(regions) <= 9, login)
            self.assertTrue(all(0 <= r < world.region_count for r in regions))
        self.assertEqual(aoi_grant('Max', world), aoi_grant('Max', world))
        self.assertEqual(aoi_grant('anyone', WorldConfig(64, 64, 64)), (0,))


if __name__ == '__main__':
    unittest.main()
