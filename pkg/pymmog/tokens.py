"""Session tokens issued after an approved login.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Exported Classes:
SessionToken -- An issued token and what it grants.
TokenIssuer -- Issues and validates tokens.
"""

__all__ = ['SessionToken', 'TokenIssuer', 'DEFAULT_TOKEN_TTL',
           'UNKNOWN_TOKEN', 'EXPIRED', 'ACCOUNT_EXPIRED']

from collections import namedtuple
import datetime
import logging
import re
import threading

try:
    from typing import Callable, Dict, Optional, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

from .accounts import UtcClock
from .crypt import random_token
from .datatype import Date  # pylint: disable=unused-import
from .exception import InterfaceError

logger = logging.getLogger(__name__)

DEFAULT_TOKEN_TTL = 3600.0

# Reasons a token is refused
UNKNOWN_TOKEN = 'UNKNOWN_TOKEN'
EXPIRED = 'EXPIRED'
ACCOUNT_EXPIRED = 'ACCOUNT_EXPIRED'

TOKEN_BYTES = 16
_TOKEN_RE = re.compile(r'^[0-9a-f]{%d}$' % (TOKEN_BYTES * 2))


class SessionToken(namedtuple('SessionToken',
                              ['token', 'user_login', 'privilege',
                               'issued_at', 'expires_at',
                               'account_expiration'])):
    """token is 128 random bits as hex; times are aware UTC datetimes."""

    __slots__ = ()

    def to_json(self):
        # type: () -> Dict[str, str]
        return {'session_token': self.token,
                'user_login': self.user_login,
                'privilege': self.privilege,
                'issued_at': self.issued_at.isoformat(),
                'expires_at': self.expires_at.isoformat()}


def well_formed(token):
    # type: (object) -> bool
    return isinstance(token, str) and _TOKEN_RE.match(token) is not None


class TokenIssuer(object):
    """Keeps the tokens it has issued until they expire.

    :param ttl: Token lifetime in seconds.
    :param clock: Callable returning an aware UTC datetime.
    """

    def __init__(self, ttl=DEFAULT_TOKEN_TTL, clock=None):
        # type: (float, Optional[Callable[[], datetime.datetime]]) -> None
        if not ttl > 0:
            raise InterfaceError("token ttl must be positive, not %r" % (ttl,))
        self.ttl = datetime.timedelta(seconds=ttl)
        self.clock = clock or UtcClock()
        self.__lock = threading.Lock()
        self.__tokens = {}  # type: Dict[str, SessionToken]

    def issue(self, user_login, privilege, account_expiration):
        # type: (str, str, Date) -> SessionToken
        now = self.clock()
        token = SessionToken(random_token(TOKEN_BYTES), user_login, privilege,
                             now, now + self.ttl, account_expiration)
        with self.__lock:
            for held in [t for t in self.__tokens.values()
                         if now >= t.expires_at or now.date() > t.account_expiration]:
                del self.__tokens[held.token]
            self.__tokens[token.token] = token
        logger.info("issued session token for %s", user_login)
        return token

    def validate(self, token):
        # type: (object) -> Tuple[Optional[SessionToken], Optional[str]]
        """Return (SessionToken, None) or (None, reason)."""
        if not well_formed(token):
            return None, UNKNOWN_TOKEN
        with self.__lock:
            held = self.__tokens.get(token)  # type: ignore
            if held is None:
                return None, UNKNOWN_TOKEN
            now = self.clock()
            if now >= held.expires_at:
                del self.__tokens[held.token]
                return None, EXPIRED
            if now.date() > held.account_expiration:
                del self.__tokens[held.token]
                return None, ACCOUNT_EXPIRED
        return held, None

    def revoke(self, token):
        # type: (str) -> bool
        with self.__lock:
            return self.__tokens.pop(token, None) is not None

    def __len__(self):
        # type: () -> int
        with self.__lock:
            return len(self.__tokens)
