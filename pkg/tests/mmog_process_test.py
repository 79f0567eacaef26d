#!/usr/bin/env python
"""
This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.
"""

import copy
import io
import json
import threading
import unittest

import mock

from pymmog import protocol
from pymmog.exception import DataError, OperationalError
from pymmog.process import (HttpBinding, InProcessBinding, ProcessDefinition,
                            load_definition, run_process)
from pymmog.webapp import fixture_path

MAX = {'user_login': 'Max', 'password': 'game123',
       'card_number': '4111111111111111', 'card_expiry': '12/2015'}


def user_ok(user_login, password):
    return {'match': True, 'privilege': 'FULL', 'expiration': '09/10/2014'}


def user_bad(user_login, password):
    return {'match': False, 'privilege': '', 'expiration': ''}


def card_ok(card_number, expiry):
    return {'approved': True}


def card_bad(card_number, expiry):
    return {'approved': False}


def fixture_document():
    with io.open(fixture_path('user_approve.process.json'), encoding='utf-8') as f:
        return json.load(f)


class MmogProcessTest(unittest.TestCase):

    def setUp(self):
        self.definition = load_definition(fixture_path('user_approve.process.json'))
        self.release = threading.Event()

    def tearDown(self):
        self.release.set()

    def _run(self, user=user_ok, card=card_ok, message=MAX, timeout=2.0):
        bindings = {'UserCheck': InProcessBinding(user),
                    'CardCheck': InProcessBinding(card)}
        return run_process(self.definition, message, bindings, timeout)

    def _assertConfigError(self, document):
        with self.assertRaises(OperationalError) as cm:
            ProcessDefinition(document)
        self.assertEqual(cm.exception.code, protocol.CONFIG_ERROR)

    def test_definition(self):
        self.assertEqual(self.definition.name, 'UserApproveService')
        self.assertEqual(sorted(self.definition.ports), ['CardCheck', 'UserCheck'])
        self.assertEqual(self.definition.ports['UserCheck'].address,
                         '/services/user_check')
        self.assertEqual(self.definition.order[:3],
                         ['receive_request', 'check_user', 'check_card'])
        self.assertEqual(sorted(n.id for n in self.definition.groups['checks']),
                         ['check_card', 'check_user'])

    def test_approve(self):
        result = self._run()
        self.assertEqual(result.output, {'approved': True, 'user_login': 'Max',
                                         'privilege': 'FULL',
                                         'expiration': '09/10/2014'})
        self.assertEqual(result.node, 'approve')
        self.assertEqual(result.trace, [
            ('receive', 'receive_request'),
            ('invoke', 'check_user'), ('invoke', 'check_card'),
            ('complete', 'check_user'), ('complete', 'check_card'),
            ('decision', 'decide_user'), ('decision', 'decide_card'),
            ('reply', 'approve')])

    def test_bindings_receive_resolved_messages(self):
        user = mock.Mock(return_value=user_ok('Max', 'game123'))
        card = mock.Mock(return_value={'approved': True})
        self.assertTrue(self._run(user, card).output['approved'])
        user.assert_called_once_with(user_login='Max', password='game123')
        card.assert_called_once_with(card_number='4111111111111111',
                                     expiry='12/2015')

    def test_denials(self):
        self.assertEqual(self._run(user=user_bad).output,
                         {'approved': False, 'reason': 'USER_CHECK_FAILED'})
        self.assertEqual(self._run(card=card_bad).output,
                         {'approved': False, 'reason': 'CARD_CHECK_FAILED'})
        both = self._run(user=user_bad, card=card_bad)
        self.assertEqual(both.output['reason'], 'USER_CHECK_FAILED')
        # the card check still ran
        self.assertIn(('complete', 'check_card'), both.trace)

    def test_checks_run_concurrently(self):
        barrier = threading.Barrier(2, timeout=2.0)

        def user(user_login, password):
            barrier.wait()
            return user_ok(user_login, password)

        def card(card_number, expiry):
            barrier.wait()
            return card_ok(card_number, expiry)

        self.assertTrue(self._run(user, card, timeout=5.0).output['approved'])

    def test_timeout_gives_fault_reply(self):
        def stuck(card_number, expiry):
            self.release.wait(5.0)
            return card_ok(card_number, expiry)

        result = self._run(card=stuck, timeout=0.05)
        self.assertEqual(result.output, {'approved': False,
                                         'reason': 'SERVICE_UNAVAILABLE'})
        self.assertEqual(result.node, 'check_card')
        self.assertEqual(result.trace[-2:], [('timeout', 'check_card'),
                                             ('fault_reply', 'check_card')])

    def test_deadline_counts_from_issue(self):
        def slow_user(user_login, password):
            self.release.wait(0.3)
            return user_ok(user_login, password)

        def slow_card(card_number, expiry):
            self.release.wait(0.5)
            return card_ok(card_number, expiry)

        # joined after the user check, the card check still gets 0.4s in all
        result = self._run(user=slow_user, card=slow_card, timeout=0.4)
        self.assertEqual(result.output['reason'], 'SERVICE_UNAVAILABLE')
        self.assertEqual(result.trace[-3:], [('complete', 'check_user'),
                                             ('timeout', 'check_card'),
                                             ('fault_reply', 'check_card')])

    def test_failures_give_fault_reply(self):
        def broken(user_login, password):
            raise RuntimeError('database is down')

        def malformed(user_login, password):
            return {'match': 'yes', 'privilege': '', 'expiration': ''}

        for user in (broken, malformed, lambda **kwargs: None):
            result = self._run(user=user)
            self.assertEqual(result.output['reason'], 'SERVICE_UNAVAILABLE')
            self.assertEqual(result.trace[-2:], [('fault', 'check_user'),
                                                 ('fault_reply', 'check_user')])

    def test_unbound_port(self):
        with self.assertRaises(OperationalError) as cm:
            run_process(self.definition, MAX, {'UserCheck': InProcessBinding(user_ok)})
        self.assertEqual(cm.exception.code, protocol.PORT_UNBOUND)

    def test_bad_request(self):
        for message in (dict(MAX, card_expiry=None), {'user_login': 'Max'},
                        dict(MAX, extra='x')):
            with self.assertRaises(DataError):
                self._run(message=message)

    def test_invalid_definitions(self):
        base = fixture_document()
        mutations = []

        def mutate(fn):
            document = copy.deepcopy(base)
            fn(document)
            mutations.append(document)

        mutate(lambda d: d['edges'].append(['decide_card', 'receive_request']))
        mutate(lambda d: d['edges'].append(['approve', 'decide_user']))
        mutate(lambda d: d['nodes'].append({'id': 'again', 'kind': 'receive',
                                            'variable': 'request'}))
        mutate(lambda d: d['nodes'][1].update(port='Billing'))
        mutate(lambda d: d['nodes'][1].update(output='nowhere'))
        mutate(lambda d: d['nodes'][1]['input'].pop('password'))
        mutate(lambda d: d['nodes'][1]['input'].update(password='$request.pin'))
        mutate(lambda d: d['nodes'][2]['input'].update(number='$user.privilege'))
        mutate(lambda d: d['nodes'][3].update(condition='user.match =='))
        mutate(lambda d: d['nodes'][3].update(condition='user.age > 3'))
        mutate(lambda d: d['nodes'][3].update(then='approve'))
        mutate(lambda d: d['nodes'][4].update(kind='loop'))
        mutate(lambda d: d['nodes'].append(dict(d['nodes'][5])))
        mutate(lambda d: d['edges'].append(['ghost', 'approve']))
        mutate(lambda d: d['variables']['card'].update(approved='decimal'))
        mutate(lambda d: d['ports'][0].update(input={}))
        for document in mutations:
            self._assertConfigError(document)

    def test_dependent_group_members(self):
        document = fixture_document()
        document['nodes'][2]['input']['card_number'] = '$user.privilege'
        self._assertConfigError(document)
        document = fixture_document()
        document['edges'].append(['check_user', 'check_card'])
        self._assertConfigError(document)
        # the same dependency without the group is fine
        for node in document['nodes']:
            node.pop('parallel_group', None)
        definition = ProcessDefinition(document)
        self.assertEqual(definition.groups, {})

    def test_load_errors(self):
        with self.assertRaises(OperationalError) as cm:
            load_definition('/nonexistent/process.json')
        self.assertEqual(cm.exception.code, protocol.FIXTURE_ERROR)
        with self.assertRaises(OperationalError) as cm:
            ProcessDefinition.from_json('{"name": ')
        self.assertEqual(cm.exception.code, protocol.CONFIG_ERROR)

    def test_http_binding_unreachable(self):
        binding = HttpBinding('http://127.0.0.1:9/services/user_check')
        with self.assertRaises(OperationalError) as cm:
            binding.invoke(self.definition.ports['UserCheck'],
                           {'user_login': 'Max', 'password': 'x'}, 1.0)
        self.assertEqual(cm.exception.code, protocol.DOMAIN_UNAVAILABLE)


if __name__ == '__main__':
    unittest.main()
