"""User accounts, payment cards and the two checks run against them.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

The account store and the card store are independent: user_check only
reads an AccountStore and card_check only reads a CardStore.

Account files are JSON lines, one account per line:

    {"user_login": "Max", "password": "game123", "user_privilege": "Full",
     "account_creation_date": "09/10/2008",
     "account_expiration_date": "09/10/2014"}

A "password" value is plaintext fixture input and is hashed at load; a
saved store writes "password_hash" instead.  Card files hold
{"card_number", "expiry" (MM/YYYY), "approved"} per line.

Exported Classes:
UserAccount -- One row of the account table.
AccountStore -- Accounts by login.
CardRecord -- One payment card.
CardStore -- Cards by number.
UtcClock -- The current time as an aware UTC datetime.
FixedClock -- A settable clock for tests and the harness.

Exported Functions:
luhn_valid -- Check the Luhn digit of a card number.
user_check -- Verify a login and password.
card_check -- Verify a card number and expiry.
"""

__all__ = ['UserAccount', 'AccountStore', 'CardRecord', 'CardStore',
           'UtcClock', 'FixedClock', 'luhn_valid', 'user_check', 'card_check',
           'PRIVILEGES', 'parse_expiry']

from collections import namedtuple
import calendar
import datetime
import io
import json
import logging
import os
import re
import tempfile
import threading

import pytz

try:
    from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from . import sqlstore
from .crypt import hash_password, verify_password
from .datatype import Date, DateFromText, DateToText  # pylint: disable=unused-import
from .exception import DataError, Error, IntegrityError, OperationalError

logger = logging.getLogger(__name__)

PRIVILEGES = ('FULL', 'BASIC')
MAX_TEXT = 25
ACCOUNT_TABLE = 'user_accounts'

_DIGITS_RE = re.compile(r'^[0-9]{12,19}$')
_EXPIRY_RE = re.compile(r'^\s*(\d{1,2})/(\d{4})\s*$')


class UtcClock(object):
    """Callable returning the current time in UTC."""

    def __call__(self):
        # type: () -> datetime.datetime
        return datetime.datetime.now(pytz.utc)


class FixedClock(object):
    """A clock that only moves when told to."""

    def __init__(self, now=None):
        # type: (Optional[datetime.datetime]) -> None
        if now is None:
            now = datetime.datetime(2012, 6, 1, tzinfo=pytz.utc)
        elif now.tzinfo is None:
            now = pytz.utc.localize(now)
        self.now = now

    def __call__(self):
        # type: () -> datetime.datetime
        return self.now

    def advance(self, **kwargs):
        # type: (**float) -> datetime.datetime
        """Move forward by datetime.timedelta(**kwargs)."""
        self.now = self.now + datetime.timedelta(**kwargs)
        return self.now

    def set(self, now):
        # type: (datetime.datetime) -> None
        self.now = now if now.tzinfo is not None else pytz.utc.localize(now)


def _today(clock):
    # type: (Optional[Callable[[], datetime.datetime]]) -> Date
    return (clock or UtcClock())().astimezone(pytz.utc).date()


def _text(name, value, limit=MAX_TEXT):
    # type: (str, Any, int) -> str
    if not isinstance(value, str) or not value:
        raise DataError('%s must be non-empty text' % (name))
    if len(value) > limit:
        raise IntegrityError('%s is longer than %d characters' % (name, limit),
                             protocol.CONSTRAINT_VIOLATION)
    return value


def _date(name, value):
    # type: (str, Any) -> Date
    if isinstance(value, Date):
        return value
    if value is None:
        raise IntegrityError('%s may not be NULL' % (name),
                             protocol.CONSTRAINT_VIOLATION)
    return DateFromText(value)


class UserAccount(namedtuple('UserAccount',
                             ['user_login', 'password_hash', 'user_privilege',
                              'account_creation_date',
                              'account_expiration_date'])):
    """An account; user_privilege is kept upper case."""

    __slots__ = ()

    @classmethod
    def create(cls, user_login, password, user_privilege,
               account_creation_date, account_expiration_date,
               password_hash=None):
        # type: (str, Optional[str], str, Any, Any, Optional[str]) -> UserAccount
        """Validate the values and hash the plaintext password.

        :raises IntegrityError: CONSTRAINT_VIOLATION on a missing value, an
                                over-long text or an expiration before
                                creation.
        :raises DataError: On a bad date or privilege.
        """
        login = _text('user_login', user_login)
        if password_hash is None:
            password_hash = hash_password(_text('password', password))
        privilege = _text('user_privilege', user_privilege).upper()
        if privilege not in PRIVILEGES:
            raise DataError('unknown privilege %r' % (user_privilege,))
        created = _date('account_creation_date', account_creation_date)
        expires = _date('account_expiration_date', account_expiration_date)
        if expires < created:
            raise IntegrityError('account %s expires before it was created' % (login),
                                 protocol.CONSTRAINT_VIOLATION)
        return cls(login, password_hash, privilege, created, expires)

    def to_json(self):
        # type: () -> Dict[str, str]
        return {'user_login': self.user_login,
                'password_hash': self.password_hash,
                'user_privilege': self.user_privilege,
                'account_creation_date': DateToText(self.account_creation_date),
                'account_expiration_date': DateToText(self.account_expiration_date)}

    @classmethod
    def from_json(cls, values):
        # type: (Dict[str, Any]) -> UserAccount
        return cls.create(values.get('user_login'), values.get('password'),
                          values.get('user_privilege'),
                          values.get('account_creation_date'),
                          values.get('account_expiration_date'),
                          password_hash=values.get('password_hash'))


def _read_lines(path):
    # type: (str) -> List[Tuple[int, Dict[str, Any]]]
    records = []
    try:
        with io.open(path, 'r', encoding='utf-8') as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                records.append((lineno, json.loads(line)))
    except (IOError, OSError, ValueError) as e:
        raise OperationalError('cannot read %s: %s' % (path, e),
                               protocol.FIXTURE_ERROR)
    return records


def _write_lines(path, records):
    # type: (str, Iterable[Dict[str, Any]]) -> None
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix='.tmp-', dir=directory)
    try:
        with io.open(fd, 'w', encoding='utf-8') as f:
            for record in records:
                f.write(json.dumps(record, sort_keys=True))
                f.write(u'\n')
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class AccountStore(object):
    """Accounts keyed by login.

    Writes are serialized; lookups read a consistent snapshot.

    Public Functions:
    add -- Insert a new account.
    get -- Return an account or None.
    user_check -- Verify a login.
    load_jsonl / load_sql -- Add accounts from a file or SQL text.
    save -- Write the store to a JSON lines file atomically.
    """

    def __init__(self, accounts=(), clock=None):
        # type: (Iterable[UserAccount], Optional[Callable[[], datetime.datetime]]) -> None
        self.clock = clock or UtcClock()
        self.__lock = threading.Lock()
        self.__accounts = {}  # type: Dict[str, UserAccount]
        for account in accounts:
            self.add(account)

    def __len__(self):
        # type: () -> int
        return len(self.__accounts)

    def logins(self):
        # type: () -> List[str]
        return sorted(self.__accounts)

    def add(self, account):
        # type: (UserAccount) -> UserAccount
        """:raises IntegrityError: CONSTRAINT_VIOLATION for a taken login."""
        with self.__lock:
            if account.user_login in self.__accounts:
                raise IntegrityError('user_login %r already exists' % (account.user_login),
                                     protocol.CONSTRAINT_VIOLATION)
            self.__accounts[account.user_login] = account
        return account

    def get(self, login):
        # type: (str) -> Optional[UserAccount]
        return self.__accounts.get(login)

    def user_check(self, login, password):
        # type: (str, str) -> Dict[str, Any]
        return user_check(self, login, password)

    @classmethod
    def from_jsonl(cls, path, clock=None):
        # type: (str, Optional[Callable[[], datetime.datetime]]) -> AccountStore
        store = cls(clock=clock)
        store.load_jsonl(path)
        return store

    def load_jsonl(self, path):
        # type: (str) -> int
        """Add every account of a JSON lines file; return the count."""
        count = 0
        for lineno, record in _read_lines(path):
            try:
                self.add(UserAccount.from_json(record))
            except (Error, AttributeError) as e:
                raise OperationalError('%s line %d: %s' % (path, lineno, e),
                                       protocol.FIXTURE_ERROR)
            count += 1
        logger.info("loaded %d accounts from %s", count, path)
        return count

    def load_sql(self, text):
        # type: (str) -> int
        """Run SQL statements and add the rows of the user_accounts table.

        Password values in the table are plaintext and are hashed here.
        """
        db = sqlstore.Database()
        db.run_script(text)
        result = sqlstore.execute(sqlstore.Select(None, ACCOUNT_TABLE, None), db)
        count = 0
        for row in result.rows:
            values = dict(zip(result.columns, row))
            self.add(UserAccount.create(values['user_login'], values['password'],
                                        values['user_privilege'],
                                        values['account_creation_date'],
                                        values['account_expiration_date']))
            count += 1
        logger.info("loaded %d accounts from SQL", count)
        return count

    def save(self, path):
        # type: (str) -> None
        """Replace path with the store's contents."""
        with self.__lock:
            records = [self.__accounts[login].to_json()
                       for login in sorted(self.__accounts)]
        _write_lines(path, records)


def user_check(store, login, password):
    # type: (AccountStore, str, str) -> Dict[str, Any]
    """Verify a login against an account store.

    :returns: {"match": bool, "privilege", "expiration"}; privilege and
              expiration are filled only on a match.  Unknown logins, wrong
              passwords and expired accounts do not match.
    """
    account = store.get(login) if isinstance(login, str) else None
    matched = (account is not None and isinstance(password, str)
               and verify_password(password, account.password_hash)
               and _today(store.clock) <= account.account_expiration_date)
    if not matched:
        logger.info("user check failed for %r", login)
        return {'match': False, 'privilege': '', 'expiration': ''}
    return {'match': True,
            'privilege': account.user_privilege,
            'expiration': DateToText(account.account_expiration_date)}


def luhn_valid(number):
    # type: (str) -> bool
    """Return True if number is 12 to 19 digits with a valid check digit."""
    if not isinstance(number, str) or not _DIGITS_RE.match(number):
        return False
    total = 0
    for i, ch in enumerate(reversed(number)):
        digit = ord(ch) - ord('0')
        if i % 2 == 1:
            digit *= 2
            if digit > 9:
                digit -= 9
        total += digit
    return total % 10 == 0


def parse_expiry(text):
    # type: (str) -> Tuple[int, int]
    """Return (month, year) of MM/YYYY text.

    :raises DataError: If text is not a valid month.
    """
    match = _EXPIRY_RE.match(text) if isinstance(text, str) else None
    if match is None or not 1 <= int(match.group(1)) <= 12:
        raise DataError('"%s" is not a MM/YYYY expiry' % (text,))
    return int(match.group(1)), int(match.group(2))


class CardRecord(namedtuple('CardRecord', ['card_number', 'expiry_month',
                                           'expiry_year', 'approved'])):
    """A payment card; valid through the last day of its expiry month."""

    __slots__ = ()

    @property
    def expiry(self):
        # type: () -> str
        return '%02d/%04d' % (self.expiry_month, self.expiry_year)

    @property
    def last_valid_day(self):
        # type: () -> Date
        days = calendar.monthrange(self.expiry_year, self.expiry_month)[1]
        return Date(self.expiry_year, self.expiry_month, days)

    @classmethod
    def from_json(cls, values):
        # type: (Dict[str, Any]) -> CardRecord
        number = values.get('card_number')
        if not luhn_valid(number):
            raise DataError('card number %r fails the Luhn check' % (number,))
        month, year = parse_expiry(values.get('expiry'))
        approved = values.get('approved')
        if not isinstance(approved, bool):
            raise DataError('approved must be true or false')
        return cls(number, month, year, approved)


class CardStore(object):
    """Payment cards keyed by number."""

    def __init__(self, cards=(), clock=None):
        # type: (Iterable[CardRecord], Optional[Callable[[], datetime.datetime]]) -> None
        self.clock = clock or UtcClock()
        self.__cards = {}  # type: Dict[str, CardRecord]
        for card in cards:
            self.__cards[card.card_number] = card

    def __len__(self):
        # type: () -> int
        return len(self.__cards)

    def get(self, card_number):
        # type: (str) -> Optional[CardRecord]
        return self.__cards.get(card_number)

    def card_check(self, card_number, expiry):
        # type: (str, str) -> Dict[str, bool]
        return card_check(self, card_number, expiry)

    @classmethod
    def from_jsonl(cls, path, clock=None):
        # type: (str, Optional[Callable[[], datetime.datetime]]) -> CardStore
        cards = []
        for lineno, record in _read_lines(path):
            try:
                cards.append(CardRecord.from_json(record))
            except (Error, AttributeError) as e:
                raise OperationalError('%s line %d: %s' % (path, lineno, e),
                                       protocol.FIXTURE_ERROR)
        logger.info("loaded %d cards from %s", len(cards), path)
        return cls(cards, clock)


def card_check(store, card_number, expiry):
    # type: (CardStore, str, str) -> Dict[str, bool]
    """Approve a card that is Luhn valid, unexpired, on file with the
    given expiry and flagged approved."""
    if not luhn_valid(card_number):
        return {'approved': False}
    try:
        month, year = parse_expiry(expiry)
    except DataError:
        return {'approved': False}
    card = store.get(card_number)
    approved = (card is not None and card.approved
                and (card.expiry_month, card.expiry_year) == (month, year)
                and _today(store.clock) <= card.last_valid_day)
    return {'approved': bool(approved)}
