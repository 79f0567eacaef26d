"""Content filter expressions over sample fields.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Grammar (keywords and boolean literals are case-insensitive):

    expr := or
    or   := and ("OR" and)*
    and  := not ("AND" not)*
    not  := "NOT" not | "(" expr ")" | cmp
    cmp  := ident op literal
    op   := == | != | < | <= | > | >=

Literals are integers, floats, single-quoted strings ('' escapes a quote)
and true/false.  Identifiers may contain dots so that process variables
such as user.match can be referenced.

Exported Classes:
FilterExpression -- A parsed and type checked filter.
Comparison, And, Or, Not -- Nodes of the expression tree.

Exported Functions:
parse_filter -- Parse and type check filter text against a field schema.
eval_filter -- Evaluate a FilterExpression over field values.
"""

__all__ = ['FilterExpression', 'Comparison', 'And', 'Or', 'Not',
           'parse_filter', 'eval_filter', 'schema_of']

from collections import namedtuple
import operator
import re

try:
    from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .datatype import TypeDescriptor, kind_code, is_numeric_kind
from .exception import DataError, ParseError


class Comparison(namedtuple('Comparison', ['field', 'op', 'value'])):
    __slots__ = ()


class And(namedtuple('And', ['operands'])):
    __slots__ = ()


class Or(namedtuple('Or', ['operands'])):
    __slots__ = ()


class Not(namedtuple('Not', ['operand'])):
    __slots__ = ()


_OPERATORS = {'==': operator.eq,
              '!=': operator.ne,
              '<': operator.lt,
              '<=': operator.le,
              '>': operator.gt,
              '>=': operator.ge}

_EQUALITY_ONLY = ('==', '!=')

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<string>'(?:[^']|'')*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<op>==|!=|<=|>=|<|>)
  | (?P<paren>[()])
""", re.VERBOSE)

_KEYWORDS = ('and', 'or', 'not', 'true', 'false')

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
            tokens.append(_Token(kind, value, _byte_offset(text, pos)))
        pos = match.end()
    tokens.append(_Token('end', '', _byte_offset(text, len(text))))
    return tokens


def _byte_offset(text, pos):
    # type: (str, int) -> int
    return len(text[:pos].encode('utf-8', 'surrogatepass'))


def schema_of(target):
    # type: (Any) -> Dict[str, int]
    """Return a field name to kind code mapping for a topic-like object.

    Accepts a Topic (anything with a descriptor), a TypeDescriptor, or a
    mapping of field name to kind name or code.
    """
    if hasattr(target, 'descriptor'):
        target = target.descriptor
    if isinstance(target, TypeDescriptor):
        return dict(target.fields)
    schema = {}
    for name, kind in target.items():
        schema[name] = kind if isinstance(kind, int) else kind_code(kind)
    return schema


class _Parser(object):
    """Recursive descent parser producing a type checked tree."""

    def __init__(self, text, schema):
        # type: (str, Dict[str, int]) -> None
        self.__tokens = _tokenize(text)
        self.__pos = 0
        self.__schema = schema
        self.fields = set()  # type: set

    def _peek(self):
        # type: () -> _Token
        return self.__tokens[self.__pos]

    def _next(self):
        # type: () -> _Token
        token = self.__tokens[self.__pos]
        self.__pos += 1
        return token

    def _expect(self, kind, what):
        # type: (str, str) -> _Token
        token = self._next()
        if token.kind != kind:
            raise ParseError('expected %s, found %s' % (what, _describe(token)),
                             token.offset)
        return token

    def parse(self):
        # type: () -> Any
        node = self._or()
        token = self._peek()
        if token.kind != 'end':
            raise ParseError('unexpected %s' % (_describe(token)), token.offset)
        return node

    def _or(self):
        # type: () -> Any
        operands = [self._and()]
        while self._peek().kind == 'or':
            self._next()
            operands.append(self._and())
        return operands[0] if len(operands) == 1 else Or(tuple(operands))

    def _and(self):
        # type: () -> Any
        operands = [self._not()]
        while self._peek().kind == 'and':
            self._next()
            operands.append(self._not())
        return operands[0] if len(operands) == 1 else And(tuple(operands))

    def _not(self):
        # type: () -> Any
        token = self._peek()
        if token.kind == 'not':
            self._next()
            return Not(self._not())
        if token.kind == 'paren' and token.text == '(':
            self._next()
            node = self._or()
            closing = self._next()
            if closing.kind != 'paren' or closing.text != ')':
                raise ParseError('expected ")", found %s' % (_describe(closing)),
                                 closing.offset)
            return node
        return self._comparison()

    def _comparison(self):
        # type: () -> Comparison
        ident = self._expect('ident', 'a field name')
        op = self._expect('op', 'a comparison operator')
        literal = self._next()
        if literal.kind == 'number':
            if re.match(r'^-?\d+$', literal.text):
                value = int(literal.text)  # type: Any
            else:
                value = float(literal.text)
        elif literal.kind == 'string':
            value = literal.text[1:-1].replace("''", "'")
        elif literal.kind in ('true', 'false'):
            value = literal.kind == 'true'
        else:
            raise ParseError('expected a literal, found %s' % (_describe(literal)),
                             literal.offset)
        self._check(ident.text, op.text, value)
        self.fields.add(ident.text)
        return Comparison(ident.text, op.text, value)

    def _check(self, field, op, value):
        # type: (str, str, Any) -> None
        kind = self.__schema.get(field)
        if kind is None:
            raise DataError('unknown field "%s"' % (field))
        if kind == protocol.FIELD_STRING:
            if op not in _EQUALITY_ONLY:
                raise DataError('operator "%s" is not supported on string field "%s"'
                                % (op, field))
            if not isinstance(value, str):
                raise DataError('string field "%s" compared with %r' % (field, value))
        elif kind == protocol.FIELD_BOOL:
            if op not in _EQUALITY_ONLY:
                raise DataError('operator "%s" is not supported on bool field "%s"'
                                % (op, field))
            if not isinstance(value, bool):
                raise DataError('bool field "%s" compared with %r' % (field, value))
        elif is_numeric_kind(kind):
            if isinstance(value, (bool, str)):
                raise DataError('numeric field "%s" compared with %r' % (field, value))


def _describe(token):
    # type: (_Token) -> str
    if token.kind == 'end':
        return 'end of input'
    return '"%s"' % (token.text)


def _compile(node):
    # type: (Any) -> Callable[[Mapping[str, Any]], bool]
    if isinstance(node, Comparison):
        fn = _OPERATORS[node.op]
        field = node.field
        value = node.value
        return lambda values: fn(values[field], value)
    if isinstance(node, And):
        parts = [_compile(child) for child in node.operands]
        return lambda values: all([part(values) for part in parts])
    if isinstance(node, Or):
        parts = [_compile(child) for child in node.operands]
        return lambda values: any([part(values) for part in parts])
    inner = _compile(node.operand)
    return lambda values: not inner(values)


class FilterExpression(object):
    """A parsed filter: the original text, its tree and a compiled matcher."""

    def __init__(self, text, root, fields):
        # type: (str, Any, set) -> None
        self.text = text
        self.root = root
        self.fields = frozenset(fields)
        self.__matcher = _compile(root)

    def matches(self, values):
        # type: (Mapping[str, Any]) -> bool
        """Return True if the field values satisfy the expression."""
        return bool(self.__matcher(values))

    __call__ = matches

    def __eq__(self, other):
        # type: (Any) -> bool
        return isinstance(other, FilterExpression) and self.root == other.root

    def __ne__(self, other):
        # type: (Any) -> bool
        return not self == other

    def __hash__(self):
        # type: () -> int
        return hash(self.root)

    def __repr__(self):
        # type: () -> str
        return 'FilterExpression(%r)' % (self.text)


def parse_filter(text, topic):
    # type: (str, Any) -> FilterExpression
    """Parse filter text and type check it against a topic's fields.

    :raises ParseError: On a syntax error, with the byte offset.
    :raises DataError: On an unknown field or an unsupported field/op pair.
    """
    parser = _Parser(text, schema_of(topic))
    root = parser.parse()
    return FilterExpression(text, root, parser.fields)


def eval_filter(expr, values):
    # type: (FilterExpression, Mapping[str, Any]) -> bool
    """Evaluate expr over field values; every operand is evaluated."""
    return expr.matches(values)
