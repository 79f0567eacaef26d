"""A small SQL interpreter over in-memory tables.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Supported statements (keywords are case-insensitive, a trailing semicolon
is optional):

    CREATE DATABASE name
    CREATE TABLE name (column VARCHAR(n) | DATE [NOT NULL], ...)
    INSERT INTO table [(column, ...)] [VALUES] (literal, ...)
    SELECT * | column[, column] FROM table [WHERE column = | == literal]

Literals are single-quoted strings ('' escapes a quote) and NULL.  DATE
values are written MM/DD/YYYY.  The first NOT NULL column of a table is
its unique key.

Exported Classes:
Database -- Tables and their rows.
Connection -- DB-API style connection to a Database.
Cursor -- Executes statements and fetches SELECT results.

Exported Functions:
parse_sql -- Parse one statement.
parse_script -- Parse a semicolon separated list of statements.
execute -- Execute a parsed statement against a Database.
connect -- Return a Connection to a new or given Database.
"""

__all__ = ['CreateDatabase', 'CreateTable', 'Column', 'Insert', 'Select',
           'Database', 'Table', 'Connection', 'Cursor', 'parse_sql',
           'parse_script', 'execute', 'connect', 'COLUMN_ALIASES']

from collections import namedtuple
import logging
import re
import threading

try:
    from typing import Any, Dict, List, Optional, Sequence, Tuple, Union  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .datatype import Date, DateFromText, DateToText  # pylint: disable=unused-import
from .exception import (DataError, Error, IntegrityError, ParseError,
                        ProgrammingError)

logger = logging.getLogger(__name__)

# Column names accepted for the names used by the account code.
COLUMN_ALIASES = {'user_privillage': 'user_privilege'}

CreateDatabase = namedtuple('CreateDatabase', ['name'])
Column = namedtuple('Column', ['name', 'type_name', 'length', 'not_null'])
CreateTable = namedtuple('CreateTable', ['name', 'columns'])
Insert = namedtuple('Insert', ['table', 'columns', 'values'])
Select = namedtuple('Select', ['columns', 'table', 'where'])

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>\d+)
  | (?P<string>'(?:[^']|'')*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|=)
  | (?P<punct>[(),;*])
""", re.VERBOSE)

_KEYWORDS = ('create', 'database', 'table', 'insert', 'into', 'values',
             'select', 'from', 'where', 'not', 'null', 'varchar', 'date')

_Token = namedtuple('_Token', ['kind', 'text', 'offset'])


def _tokenize(text):
    # type: (str) -> List[_Token]
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError('unexpected character %r' % (text[pos]),
                             _byte_offset(text, pos))
        kind = match.lastgroup
        if kind != 'ws':
            value = match.group()
            if kind == 'ident' and value.lower() in _KEYWORDS:
                kind = value.lower()
            elif kind == 'punct':
                kind = value
            tokens.append(_Token(kind, value, _byte_offset(text, pos)))
        pos = match.end()
    tokens.append(_Token('end', '', _byte_offset(text, len(text))))
    return tokens


def _byte_offset(text, pos):
    # type: (str, int) -> int
    return len(text[:pos].encode('utf-8', 'surrogatepass'))


class _Parser(object):
    """Recursive descent over the token list of one or more statements."""

    def __init__(self, text):
        # type: (str) -> None
        self.__tokens = _tokenize(text)
        self.__pos = 0

    def _peek(self):
        # type: () -> _Token
        return self.__tokens[self.__pos]

    def _next(self):
        # type: () -> _Token
        token = self.__tokens[self.__pos]
        if token.kind != 'end':
            self.__pos += 1
        return token

    def _accept(self, kind):
        # type: (str) -> Optional[_Token]
        if self._peek().kind == kind:
            return self._next()
        return None

    def _expect(self, kind, what=None):
        # type: (str, Optional[str]) -> _Token
        token = self._peek()
        if token.kind != kind:
            found = 'end of input' if token.kind == 'end' else repr(token.text)
            raise ParseError('expected %s, found %s' % (what or kind.upper(), found),
                             token.offset)
        return self._next()

    def at_end(self):
        # type: () -> bool
        while self._accept(';'):
            pass
        return self._peek().kind == 'end'

    def statement(self):
        # type: () -> Any
        token = self._peek()
        if token.kind == 'create':
            self._next()
            if self._accept('database'):
                stmt = CreateDatabase(self._name())  # type: Any
            elif self._accept('table'):
                stmt = self._create_table()
            else:
                raise ParseError('expected DATABASE or TABLE after CREATE',
                                 self._peek().offset)
        elif token.kind == 'insert':
            self._next()
            stmt = self._insert()
        elif token.kind == 'select':
            self._next()
            stmt = self._select()
        else:
            raise ParseError('unsupported statement %r' % (token.text or 'end of input'),
                             token.offset)
        token = self._peek()
        if token.kind not in (';', 'end'):
            raise ParseError('unexpected %r after statement' % (token.text),
                             token.offset)
        return stmt

    def _name(self):
        # type: () -> str
        return self._expect('ident', 'a name').text

    def _column_name(self):
        # type: () -> str
        name = self._name().lower()
        return COLUMN_ALIASES.get(name, name)

    def _create_table(self):
        # type: () -> CreateTable
        name = self._name()
        self._expect('(')
        columns = []
        while True:
            column = self._column_name()
            if self._accept('varchar'):
                self._expect('(')
                length = int(self._expect('number', 'a length').text)
                self._expect(')')
                type_name = 'VARCHAR'
            elif self._accept('date'):
                type_name, length = 'DATE', None
            else:
                raise ParseError('expected VARCHAR(n) or DATE',
                                 self._peek().offset)
            not_null = False
            if self._accept('not'):
                self._expect('null')
                not_null = True
            columns.append(Column(column, type_name, length, not_null))
            if not self._accept(','):
                break
        self._expect(')')
        return CreateTable(name, tuple(columns))

    def _literal(self):
        # type: () -> Optional[str]
        if self._accept('null'):
            return None
        token = self._expect('string', 'a quoted literal')
        return token.text[1:-1].replace("''", "'")

    def _list(self, item):
        # type: (Any) -> Tuple[Any, ...]
        self._expect('(')
        values = [item()]
        while self._accept(','):
            values.append(item())
        self._expect(')')
        return tuple(values)

    def _insert(self):
        # type: () -> Insert
        self._expect('into')
        table = self._name()
        if self._accept('values'):
            return Insert(table, None, self._list(self._literal))
        self._expect('(')
        if self._peek().kind == 'ident':
            # INSERT INTO t (columns) VALUES (...)
            columns = [self._column_name()]
            while self._accept(','):
                columns.append(self._column_name())
            self._expect(')')
            self._expect('values')
            return Insert(table, tuple(columns), self._list(self._literal))
        values = [self._literal()]
        while self._accept(','):
            values.append(self._literal())
        self._expect(')')
        return Insert(table, None, tuple(values))

    def _select(self):
        # type: () -> Select
        if self._accept('*'):
            columns = None  # type: Optional[Tuple[str, ...]]
        else:
            names = [self._column_name()]
            while self._accept(','):
                names.append(self._column_name())
            columns = tuple(names)
        self._expect('from')
        table = self._name()
        where = None
        if self._accept('where'):
            column = self._column_name()
            self._expect('op', '= or ==')
            where = (column, self._literal())
        return Select(columns, table, where)


def parse_sql(text):
    # type: (str) -> Any
    """Parse one statement.

    :raises ParseError: With the byte offset of the offending token.
    """
    parser = _Parser(text)
    stmt = parser.statement()
    if not parser.at_end():
        raise ParseError('only one statement expected', parser._peek().offset)
    return stmt


def parse_script(text):
    # type: (str) -> List[Any]
    """Parse every statement of a semicolon separated script."""
    parser = _Parser(text)
    statements = []
    while not parser.at_end():
        statements.append(parser.statement())
    return statements


class Table(object):
    """Column declarations and rows in insertion order."""

    def __init__(self, name, columns):
        # type: (str, Sequence[Column]) -> None
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise ProgrammingError('duplicate column in table %s' % (name),
                                   protocol.PARSE_ERROR)
        self.name = name
        self.columns = tuple(columns)
        self.rows = []  # type: List[Tuple[Any, ...]]
        self.key_index = None  # type: Optional[int]
        for i, column in enumerate(self.columns):
            if column.not_null:
                self.key_index = i
                break
        self.__keys = set()  # type: set

    def index_of(self, column):
        # type: (str) -> int
        for i, declared in enumerate(self.columns):
            if declared.name == column:
                return i
        raise ProgrammingError('unknown column %s in table %s' % (column, self.name),
                               protocol.UNKNOWN_COLUMN)

    def convert(self, column, value):
        # type: (Column, Optional[str]) -> Any
        if value is None:
            if column.not_null:
                raise IntegrityError('column %s may not be NULL' % (column.name),
                                     protocol.CONSTRAINT_VIOLATION)
            return None
        if column.type_name == 'DATE':
            try:
                return DateFromText(value)
            except DataError:
                raise DataError('column %s needs a MM/DD/YYYY date, got %r'
                                % (column.name, value), protocol.TYPE_ERROR)
        if column.length is not None and len(value) > column.length:
            raise IntegrityError('value for %s is longer than %d characters'
                                 % (column.name, column.length),
                                 protocol.CONSTRAINT_VIOLATION)
        return value

    def insert(self, row):
        # type: (Tuple[Any, ...]) -> None
        if self.key_index is not None:
            key = row[self.key_index]
            if key in self.__keys:
                raise IntegrityError('duplicate %s %r in table %s'
                                     % (self.columns[self.key_index].name, key,
                                        self.name),
                                     protocol.CONSTRAINT_VIOLATION)
            self.__keys.add(key)
        self.rows.append(row)


class Database(object):
    """Named tables; writes are serialized, reads see whole rows."""

    def __init__(self, name=None):
        # type: (Optional[str]) -> None
        self.name = name
        self.databases = set()  # type: set
        self.tables = {}        # type: Dict[str, Table]
        self.lock = threading.RLock()

    def table(self, name):
        # type: (str) -> Table
        table = self.tables.get(name.lower())
        if table is None:
            raise ProgrammingError('unknown table %s' % (name),
                                   protocol.UNKNOWN_TABLE)
        return table

    def run_script(self, text):
        # type: (str) -> List[Any]
        """Execute every statement of a script; return their results."""
        return [execute(stmt, self) for stmt in parse_script(text)]


ResultRows = namedtuple('ResultRows', ['columns', 'rows'])


def _shown(value):
    # type: (Any) -> Any
    return DateToText(value) if isinstance(value, Date) else value


_NO_MATCH = object()


def _where_value(column, literal):
    # type: (Column, Optional[str]) -> Any
    """Return the value a WHERE literal compares as; never raises."""
    if literal is None or column.type_name != 'DATE':
        return literal
    try:
        return DateFromText(literal)
    except DataError:
        return _NO_MATCH


def execute(statement, db):
    # type: (Any, Database) -> Any
    """Execute a parsed statement.

    :returns: ResultRows for SELECT, the inserted row count for INSERT,
              None otherwise.
    :raises ProgrammingError: TABLE_EXISTS, UNKNOWN_TABLE, UNKNOWN_COLUMN.
    :raises IntegrityError: ARITY_MISMATCH, CONSTRAINT_VIOLATION.
    """
    if isinstance(statement, str):
        statement = parse_sql(statement)
    if isinstance(statement, CreateDatabase):
        with db.lock:
            if statement.name.lower() in db.databases:
                raise ProgrammingError('database %s exists' % (statement.name),
                                       protocol.TABLE_EXISTS)
            db.databases.add(statement.name.lower())
            if db.name is None:
                db.name = statement.name
        return None
    if isinstance(statement, CreateTable):
        with db.lock:
            key = statement.name.lower()
            if key in db.tables:
                raise ProgrammingError('table %s exists' % (statement.name),
                                       protocol.TABLE_EXISTS)
            db.tables[key] = Table(statement.name, statement.columns)
        logger.debug("created table %s", statement.name)
        return None
    if isinstance(statement, Insert):
        with db.lock:
            table = db.table(statement.table)
            if statement.columns is None:
                columns = [c.name for c in table.columns]
            else:
                columns = list(statement.columns)
            if len(statement.values) != len(columns):
                raise IntegrityError('%d values for %d columns'
                                     % (len(statement.values), len(columns)),
                                     protocol.ARITY_MISMATCH)
            given = {}
            for name, value in zip(columns, statement.values):
                given[table.columns[table.index_of(name)].name] = value
            row = tuple(table.convert(column, given.get(column.name))
                        for column in table.columns)
            table.insert(row)
        return 1
    if isinstance(statement, Select):
        table = db.table(statement.table)
        names = statement.columns or tuple(c.name for c in table.columns)
        indexes = [table.index_of(name) for name in names]
        rows = list(table.rows)
        if statement.where is not None:
            column, literal = statement.where
            where = table.index_of(column)
            wanted = _where_value(table.columns[where], literal)
            rows = [row for row in rows if row[where] == wanted]
        return ResultRows(tuple(names),
                          [tuple(_shown(row[i]) for i in indexes) for row in rows])
    raise ProgrammingError('cannot execute %r' % (statement,), protocol.PARSE_ERROR)


class Cursor(object):
    """A cursor over a Database.

    Public Functions:
    execute -- Execute one statement.
    fetchone / fetchmany / fetchall -- Rows of the last SELECT.
    close -- Close the cursor.
    """

    description = None  # type: Optional[List[Tuple[Any, ...]]]

    def __init__(self, connection):
        # type: (Connection) -> None
        self.connection = connection
        self.closed = False
        self.arraysize = 1
        self.rowcount = -1
        self.rownumber = 0
        self.__rows = None  # type: Optional[List[Tuple[Any, ...]]]

    def __iter__(self):
        # type: () -> Cursor
        return self

    def __next__(self):
        # type: () -> Tuple[Any, ...]
        row = self.fetchone()
        if row is None:
            raise StopIteration
        return row

    next = __next__

    def _check_closed(self):
        # type: () -> None
        """Check if the cursor is usable.

        :raises Error: If the cursor or its connection is closed.
        """
        if self.closed:
            raise Error("cursor is closed")
        if self.connection.closed:
            raise Error("connection is closed")

    def close(self):
        # type: () -> None
        self._check_closed()
        self.__rows = None
        self.closed = True

    def execute(self, operation):
        # type: (str) -> None
        self._check_closed()
        self.description = None
        self.rowcount = -1
        self.rownumber = 0
        self.__rows = None
        result = execute(parse_sql(operation), self.connection.database)
        if isinstance(result, ResultRows):
            self.__rows = list(result.rows)
            self.rowcount = len(result.rows)
            self.description = [(name, None, None, None, None, None, None)
                                for name in result.columns]
        elif isinstance(result, int):
            self.rowcount = result

    def fetchone(self):
        # type: () -> Optional[Tuple[Any, ...]]
        self._check_closed()
        if self.__rows is None:
            raise Error("Previous execute did not produce any results or no call was issued yet")
        if self.rownumber >= len(self.__rows):
            return None
        row = self.__rows[self.rownumber]
        self.rownumber += 1
        return row

    def fetchmany(self, size=None):
        # type: (Optional[int]) -> List[Tuple[Any, ...]]
        if size is None:
            size = self.arraysize
        rows = []
        while len(rows) < size:
            row = self.fetchone()
            if row is None:
                break
            rows.append(row)
        return rows

    def fetchall(self):
        # type: () -> List[Tuple[Any, ...]]
        rows = []
        while True:
            row = self.fetchone()
            if row is None:
                return rows
            rows.append(row)


class Connection(object):
    """A connection to an in-memory Database."""

    def __init__(self, database):
        # type: (Database) -> None
        self.database = database
        self.closed = False

    def cursor(self):
        # type: () -> Cursor
        if self.closed:
            raise Error("connection is closed")
        return Cursor(self)

    def close(self):
        # type: () -> None
        if self.closed:
            raise Error("connection is closed")
        self.closed = True

    def commit(self):
        # type: () -> None
        """Statements apply immediately; nothing to commit."""
        pass


def connect(database=None):
    # type: (Optional[Database]) -> Connection
    """Return a Connection to database, or to a new empty Database."""
    return Connection(database if database is not None else Database())
