"""Walk the user approval flow through its truth table.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Every case is run trials times; successive trials swap which of the two
checks completes first, and the outcome must not change.

Exported Functions:
run_auth_demo -- Run every case against account and card fixtures.
report_json -- Render a demo report as stable JSON.
"""

__all__ = ['run_auth_demo', 'report_json', 'AUTH_CASES', 'AuthCase']

from collections import namedtuple
import datetime
import json
import logging
import time

import pytz

try:
    from typing import Any, Dict, List, Optional  # pylint: disable=unused-import
except ImportError:
    pass

from .accounts import AccountStore, CardStore, FixedClock
from .process import InProcessBinding
from .webapp import LoginServices, fixture_path

logger = logging.getLogger(__name__)

AuthCase = namedtuple('AuthCase', ['name', 'login', 'password', 'card_number',
                                   'card_expiry', 'today', 'approved', 'reason'])

_GOOD_CARD = ('4111111111111111', '12/2015')
_DECLINED_CARD = ('4000000000000002', '12/2015')
_EXPIRED_CARD = ('4012888888881881', '01/2010')
_BAD_LUHN_CARD = ('4111111111111112', '12/2015')
_DAY = datetime.datetime(2012, 6, 1, tzinfo=pytz.utc)
_LATER = datetime.datetime(2013, 6, 1, tzinfo=pytz.utc)

AUTH_CASES = (
    AuthCase('approved', 'Max', 'game123', _GOOD_CARD[0], _GOOD_CARD[1],
             _DAY, True, None),
    AuthCase('wrong_password', 'Max', 'wrong', _GOOD_CARD[0], _GOOD_CARD[1],
             _DAY, False, 'USER_CHECK_FAILED'),
    AuthCase('declined_card', 'Max', 'game123', _DECLINED_CARD[0],
             _DECLINED_CARD[1], _DAY, False, 'CARD_CHECK_FAILED'),
    AuthCase('both_fail', 'Max', 'wrong', _DECLINED_CARD[0], _DECLINED_CARD[1],
             _DAY, False, 'USER_CHECK_FAILED'),
    AuthCase('unknown_login', 'Nobody', 'game123', _GOOD_CARD[0], _GOOD_CARD[1],
             _DAY, False, 'USER_CHECK_FAILED'),
    AuthCase('luhn_invalid', 'Max', 'game123', _BAD_LUHN_CARD[0],
             _BAD_LUHN_CARD[1], _DAY, False, 'CARD_CHECK_FAILED'),
    AuthCase('expired_card', 'Max', 'game123', _EXPIRED_CARD[0],
             _EXPIRED_CARD[1], _DAY, False, 'CARD_CHECK_FAILED'),
    AuthCase('basic_account', 'John123', 'helloworld', _GOOD_CARD[0],
             _GOOD_CARD[1], _DAY, True, None),
    AuthCase('expired_account', 'John123', 'helloworld', _GOOD_CARD[0],
             _GOOD_CARD[1], _LATER, False, 'USER_CHECK_FAILED'),
)


class _DelayedBinding(object):
    """Sleeps before handing the call on; orders completions in a group."""

    def __init__(self, binding, delay):
        # type: (Any, float) -> None
        self.binding = binding
        self.delay = delay

    def invoke(self, port, message, timeout):
        # type: (Any, Dict[str, Any], float) -> Dict[str, Any]
        time.sleep(self.delay)
        return self.binding.invoke(port, message, timeout)


def run_auth_demo(accounts_path=None, cards_path=None, trials=2, delay=0.01):
    # type: (Optional[str], Optional[str], int, float) -> Dict[str, Any]
    """Run AUTH_CASES against the fixtures.

    :param trials: Runs per case; odd trials delay the user check, even
                   trials the card check.
    :returns: {"cases": [...], "passed": bool}.  A case passes when every
              trial gives the expected outcome and ran both checks.
    :raises OperationalError: FIXTURE_ERROR if a fixture cannot be loaded.
    """
    clock = FixedClock(_DAY)
    accounts = AccountStore.from_jsonl(accounts_path or fixture_path('accounts.jsonl'),
                                       clock)
    cards = CardStore.from_jsonl(cards_path or fixture_path('cards.jsonl'), clock)
    services = LoginServices(accounts, cards)
    direct = {'UserCheck': InProcessBinding(services.user_check),
              'CardCheck': InProcessBinding(services.card_check)}
    results = []
    for case in AUTH_CASES:
        clock.set(case.today)
        outcomes = []
        both_ran = True
        for trial in range(max(1, trials)):
            slow = 'UserCheck' if trial % 2 else 'CardCheck'
            services.bindings = dict(
                (name, _DelayedBinding(binding, delay if name == slow else 0.0))
                for name, binding in direct.items())
            reply = services.login(case.login, case.password, case.card_number,
                                   case.card_expiry)
            outcomes.append((bool(reply.get('approved')), reply.get('reason'),
                             reply.get('privilege')))
            trace = services.last_trace
            invoked = set(node for event, node in trace if event == 'invoke')
            both_ran = both_ran and invoked == set(['check_user', 'check_card'])
        approved, reason, privilege = outcomes[0]
        consistent = all(outcome == outcomes[0] for outcome in outcomes)
        ok = (consistent and both_ran and approved == case.approved
              and reason == case.reason)
        logger.info("auth case %s: %s", case.name, 'ok' if ok else 'FAILED')
        results.append({'case': case.name,
                        'login': case.login,
                        'today': case.today.date().isoformat(),
                        'approved': approved,
                        'reason': reason,
                        'privilege': privilege,
                        'expected_approved': case.approved,
                        'expected_reason': case.reason,
                        'both_checks_ran': both_ran,
                        'consistent': consistent,
                        'passed': ok})
    return {'cases': results, 'passed': all(r['passed'] for r in results)}


def report_json(report):
    # type: (Dict[str, Any]) -> str
    return json.dumps(report, sort_keys=True, indent=2) + '\n'
