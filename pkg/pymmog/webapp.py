"""The login tier: account services, the approval process and HTTP.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Endpoints (JSON bodies):

    POST /login                {user_login, password, card_number, card_expiry}
    GET  /session/<token>
    POST /join                 {session_token}
    POST /services/user_check  {user_login, password}
    POST /services/card_check  {card_number, expiry}

Denials answer 401 with a reason; malformed bodies answer 400.

Exported Classes:
GameCredentials -- What join_game grants.
LoginServices -- Stores, approval process and token issuer wired together.

Exported Functions:
create_app -- Build the Flask application for a LoginServices.
fixture_path -- Path of a data file shipped with the package.
aoi_grant -- The initial area of interest of a login.
"""

__all__ = ['GameCredentials', 'LoginServices', 'create_app', 'fixture_path',
           'aoi_grant', 'MALFORMED_REQUEST']

from collections import namedtuple
import logging
import os

from flask import Flask, jsonify, request

try:
    from typing import Any, Callable, Dict, List, Optional, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

from . import process
from .accounts import AccountStore, CardStore, card_check, user_check
from .crypt import fnv1a64
from .datatype import DateFromText
from .exception import AccessDenied, Error
from .tokens import DEFAULT_TOKEN_TTL, TokenIssuer
from .world import WorldConfig

logger = logging.getLogger(__name__)

MALFORMED_REQUEST = 'MALFORMED_REQUEST'
USER_APPROVE_PROCESS = 'user_approve.process.json'

_FIXTURE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'fixtures')


def fixture_path(name):
    # type: (str) -> str
    return os.path.join(_FIXTURE_DIR, name)


GameCredentials = namedtuple('GameCredentials',
                             ['domain_id', 'user_login', 'privilege', 'aoi_regions'])


def aoi_grant(login, world):
    # type: (str, WorldConfig) -> Tuple[int, ...]
    """Return the home region of login and its neighbours, sorted."""
    home = fnv1a64(login.encode('utf-8')) % world.region_count
    hx, hy = home % world.regions_x, home // world.regions_x
    regions = []
    for y in range(max(hy - 1, 0), min(hy + 2, world.regions_y)):
        for x in range(max(hx - 1, 0), min(hx + 2, world.regions_x)):
            regions.append(y * world.regions_x + x)
    return tuple(sorted(regions))


class LoginServices(object):
    """The three independent services and the process composing them.

    The user check reads only the account store and the card check only
    the card store.

    Public Functions:
    user_check / card_check -- The component services.
    login -- Run the approval process and issue a token.
    validate -- Look up a token.
    join_game -- Admit a token holder to the game domain.
    """

    def __init__(self, accounts,          # type: AccountStore
                 cards,                   # type: CardStore
                 definition=None,         # type: Optional[process.ProcessDefinition]
                 bindings=None,           # type: Optional[Dict[str, Any]]
                 issuer=None,             # type: Optional[TokenIssuer]
                 domain_id=0,             # type: int
                 world=None,              # type: Optional[WorldConfig]
                 invoke_timeout=process.DEFAULT_INVOKE_TIMEOUT  # type: float
                 ):
        # type: (...) -> None
        self.accounts = accounts
        self.cards = cards
        if definition is None:
            definition = process.load_definition(fixture_path(USER_APPROVE_PROCESS))
        self.definition = definition
        if bindings is None:
            bindings = {'UserCheck': process.InProcessBinding(self.user_check),
                        'CardCheck': process.InProcessBinding(self.card_check)}
        self.bindings = bindings
        self.issuer = issuer if issuer is not None else TokenIssuer(DEFAULT_TOKEN_TTL,
                                                                    accounts.clock)
        self.domain_id = domain_id
        self.world = world or WorldConfig()
        self.invoke_timeout = invoke_timeout
        self.last_trace = []  # type: List[Tuple[str, str]]

    @classmethod
    def from_fixtures(cls, accounts_path=None, cards_path=None, clock=None, **kwargs):
        # type: (Optional[str], Optional[str], Any, **Any) -> LoginServices
        accounts = AccountStore.from_jsonl(accounts_path or fixture_path('accounts.jsonl'),
                                           clock)
        cards = CardStore.from_jsonl(cards_path or fixture_path('cards.jsonl'), clock)
        return cls(accounts, cards, **kwargs)

    def http_bindings(self, base_url):
        # type: (str) -> Dict[str, process.HttpBinding]
        """Bind every port of the definition to base_url + port address."""
        return dict((name, process.HttpBinding(base_url.rstrip('/') + port.address))
                    for name, port in self.definition.ports.items())

    def user_check(self, user_login, password):
        # type: (str, str) -> Dict[str, Any]
        return user_check(self.accounts, user_login, password)

    def card_check(self, card_number, expiry):
        # type: (str, str) -> Dict[str, bool]
        return card_check(self.cards, card_number, expiry)

    def login(self, user_login, password, card_number, card_expiry):
        # type: (str, str, str, str) -> Dict[str, Any]
        """Run the approval process; on approval add a session token.

        :returns: {"approved": bool, "reason"?, "session_token"?, ...}
        """
        result = process.run_process(self.definition,
                                     {'user_login': user_login,
                                      'password': password,
                                      'card_number': card_number,
                                      'card_expiry': card_expiry},
                                     self.bindings, self.invoke_timeout)
        self.last_trace = result.trace
        reply = dict(result.output)
        if not reply.get('approved'):
            logger.info("login of %r denied: %s", user_login, reply.get('reason'))
            return reply
        token = self.issuer.issue(user_login, reply['privilege'],
                                  DateFromText(reply['expiration']))
        reply.update(token.to_json())
        return reply

    def validate(self, token):
        # type: (Any) -> Dict[str, Any]
        held, reason = self.issuer.validate(token)
        if held is None:
            return {'valid': False, 'reason': reason}
        return {'valid': True, 'user_login': held.user_login,
                'privilege': held.privilege}

    def join_game(self, token):
        # type: (Any) -> GameCredentials
        """Admit the holder of a valid token.

        :raises AccessDenied: With the reason the token was refused.
        """
        held, reason = self.issuer.validate(token)
        if held is None:
            raise AccessDenied(reason)
        logger.info("%s joins domain %d", held.user_login, self.domain_id)
        return GameCredentials(self.domain_id, held.user_login, held.privilege,
                               aoi_grant(held.user_login, self.world))


def _body(*fields):
    # type: (*str) -> Optional[Dict[str, str]]
    body = request.get_json(silent=True)
    if not isinstance(body, dict):
        return None
    for field in fields:
        if not isinstance(body.get(field), str):
            return None
    return dict((field, body[field]) for field in fields)


def _malformed():
    # type: () -> Any
    return jsonify({'reason': MALFORMED_REQUEST}), 400


def create_app(services):
    # type: (LoginServices) -> Flask
    """Return a Flask application serving services."""
    app = Flask(__name__)
    app.config['LOGIN_SERVICES'] = services

    @app.route('/login', methods=['POST'])
    def login():
        body = _body('user_login', 'password', 'card_number', 'card_expiry')
        if body is None:
            return _malformed()
        try:
            reply = services.login(**body)
        except Error as e:
            logger.warning("login failed: %s", e)
            return jsonify({'approved': False, 'reason': e.name}), 401
        return jsonify(reply), 200 if reply.get('approved') else 401

    @app.route('/session/<token>', methods=['GET'])
    def session(token):
        reply = services.validate(token)
        return jsonify(reply), 200 if reply['valid'] else 401

    @app.route('/join', methods=['POST'])
    def join():
        body = _body('session_token')
        if body is None:
            return _malformed()
        try:
            credentials = services.join_game(body['session_token'])
        except AccessDenied as e:
            return jsonify({'reason': e.reason}), 401
        reply = credentials._asdict()
        reply['aoi_regions'] = list(credentials.aoi_regions)
        return jsonify(reply), 200

    @app.route('/services/user_check', methods=['POST'])
    def user_check_service():
        body = _body('user_login', 'password')
        if body is None:
            return _malformed()
        return jsonify(services.user_check(**body)), 200

    @app.route('/services/card_check', methods=['POST'])
    def card_check_service():
        body = _body('card_number', 'expiry')
        if body is None:
            return _malformed()
        return jsonify(services.card_check(**body)), 200

    return app
