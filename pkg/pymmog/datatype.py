"""A module for housing the datatype classes.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Exported Classes:
TypeDescriptor -- The ordered field list and key of a topic type.
SampleInfo -- Metadata delivered with every sample.

Exported Functions:
kind_code -- Converts a field kind name to its wire code.
check_fields -- Validates a flat message against a field list.
DateFromText -- Converts MM/DD/YYYY text to a Date object.
DateToText -- Converts a Date object to MM/DD/YYYY text.

Field Kinds:
u32, u64, i64, f32, f64, bool, string
"""

__all__ = ['Date', 'TypeDescriptor', 'SampleInfo', 'TYPEMAP', 'KIND_NAMES',
           'kind_code', 'DateFromText', 'DateToText', 'is_numeric_kind',
           'check_fields']

from collections import namedtuple
from datetime import date as Date, datetime as Timestamp
import math

try:
    from typing import Any, Dict, Iterable, List, Mapping  # pylint: disable=unused-import
    from typing import Optional, Sequence, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .crypt import fnv1a64
from .exception import DataError, InterfaceError

TYPEMAP = {"u32": protocol.FIELD_U32,
           "u64": protocol.FIELD_U64,
           "i64": protocol.FIELD_I64,
           "f32": protocol.FIELD_F32,
           "f64": protocol.FIELD_F64,
           "bool": protocol.FIELD_BOOL,
           "string": protocol.FIELD_STRING}

KIND_NAMES = dict((code, name) for name, code in TYPEMAP.items())

_INT_RANGES = {protocol.FIELD_U32: (0, 0xffffffff),
               protocol.FIELD_U64: (0, 0xffffffffffffffff),
               protocol.FIELD_I64: (-0x8000000000000000, 0x7fffffffffffffff)}

_F32_MAX = 3.4028234663852886e38
MAX_STRING_BYTES = 0xffff
DATE_FORMAT = '%m/%d/%Y'


def kind_code(name):
    # type: (str) -> int
    """Return the wire code of a field kind name."""
    code = TYPEMAP.get(name.strip().lower())
    if code is None:
        raise InterfaceError('unknown field kind "%s"' % (name))
    return code


def is_numeric_kind(code):
    # type: (int) -> bool
    """Return True for the integer and floating point kinds."""
    return code in (protocol.FIELD_U32, protocol.FIELD_U64,
                    protocol.FIELD_I64, protocol.FIELD_F32,
                    protocol.FIELD_F64)


def DateFromText(text):
    # type: (str) -> Date
    """Convert MM/DD/YYYY text into a Date."""
    try:
        return Timestamp.strptime(text.strip(), DATE_FORMAT).date()
    except (ValueError, AttributeError):
        raise DataError('"%s" is not a MM/DD/YYYY date' % (text))


def DateToText(value):
    # type: (Date) -> str
    """Convert a Date into MM/DD/YYYY text."""
    return '%02d/%02d/%04d' % (value.month, value.day, value.year)


class SampleInfo(namedtuple('SampleInfo',
                            ['writer_guid', 'sequence_number',
                             'coherent_set_id', 'coherent_end', 'valid',
                             'source_timestamp', 'instance_key'])):
    """Metadata of one delivered sample.

    source_timestamp is in microseconds; instance_key is the tuple of raw
    key field values.
    """

    __slots__ = ()


class TypeDescriptor(object):
    """The ordered (name, kind) field list of a topic type and its key."""

    def __init__(self, fields, key_fields):
        # type: (Iterable[Tuple[str, str]], Iterable[str]) -> None
        """Create a TypeDescriptor.

        :param fields: Ordered (field name, kind name) pairs.
        :param key_fields: Names of the fields forming the instance key.
        :raises InterfaceError: If the declaration is inconsistent.
        """
        self.__fields = []   # type: List[Tuple[str, int]]
        self.__kinds = {}    # type: Dict[str, int]
        for name, kind in fields:
            if not name:
                raise InterfaceError("field names must be non-empty")
            if name in self.__kinds:
                raise InterfaceError('duplicate field "%s"' % (name))
            code = kind_code(kind) if not isinstance(kind, int) else kind
            if code not in KIND_NAMES:
                raise InterfaceError('unknown field kind %r' % (kind,))
            self.__fields.append((name, code))
            self.__kinds[name] = code
        if not self.__fields:
            raise InterfaceError("a type needs at least one field")

        keys = list(key_fields)
        if not keys:
            raise InterfaceError("key_fields must be non-empty")
        for key in keys:
            if key not in self.__kinds:
                raise InterfaceError('key field "%s" is not declared' % (key))
        # Key fields are hashed in declaration order.
        self.__keys = [name for name, _ in self.__fields if name in keys]
        self.__hash = fnv1a64(self.canonical().encode('utf-8'))

    @property
    def fields(self):
        # type: () -> List[Tuple[str, int]]
        """Return the ordered (name, kind code) pairs."""
        return list(self.__fields)

    @property
    def field_names(self):
        # type: () -> List[str]
        """Return the field names in declaration order."""
        return [name for name, _ in self.__fields]

    @property
    def key_fields(self):
        # type: () -> List[str]
        """Return the key field names in declaration order."""
        return list(self.__keys)

    @property
    def type_hash(self):
        # type: () -> int
        """Return the 64-bit hash identifying this type on the wire."""
        return self.__hash

    def kind_of(self, name):
        # type: (str) -> Optional[int]
        """Return the kind code of a field, or None if it is not declared."""
        return self.__kinds.get(name)

    def canonical(self):
        # type: () -> str
        """Return the canonical text the type hash is computed over."""
        return '%s|%s' % (','.join('%s:%s' % (name, KIND_NAMES[code])
                                   for name, code in self.__fields),
                          ','.join(self.__keys))

    def key_of(self, values):
        # type: (Mapping[str, Any]) -> Tuple[Any, ...]
        """Return the raw key values of a sample."""
        return tuple(values[name] for name in self.__keys)

    def check_values(self, values):
        # type: (Mapping[str, Any]) -> Dict[str, Any]
        """Validate field values and return them as a fresh dict.

        Integers are accepted for floating point fields and converted.

        :raises DataError: If a field is missing, unknown or out of range.
        """
        return check_fields(self.__fields, values)

    def __eq__(self, other):
        # type: (Any) -> bool
        return (isinstance(other, TypeDescriptor)
                and self.canonical() == other.canonical())

    def __ne__(self, other):
        # type: (Any) -> bool
        return not self == other

    def __hash__(self):
        # type: () -> int
        return self.__hash

    def __repr__(self):
        # type: () -> str
        return 'TypeDescriptor(%s)' % (self.canonical())


def _check_value(name, code, value):
    # type: (str, int, Any) -> Any
    if code in _INT_RANGES:
        if isinstance(value, bool) or not isinstance(value, int):
            raise DataError('field "%s" needs an integer, got %r' % (name, value))
        low, high = _INT_RANGES[code]
        if value < low or value > high:
            raise DataError('field "%s" value %d out of range' % (name, value))
        return value
    if code in (protocol.FIELD_F32, protocol.FIELD_F64):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise DataError('field "%s" needs a number, got %r' % (name, value))
        value = float(value)
        if (code == protocol.FIELD_F32 and not math.isinf(value)
                and not math.isnan(value) and abs(value) > _F32_MAX):
            raise DataError('field "%s" value %r overflows f32' % (name, value))
        return value
    if code == protocol.FIELD_BOOL:
        if not isinstance(value, bool):
            raise DataError('field "%s" needs a bool, got %r' % (name, value))
        return value
    if not isinstance(value, str):
        raise DataError('field "%s" needs a string, got %r' % (name, value))
    try:
        encoded = value.encode('utf-8')
    except UnicodeEncodeError:
        raise DataError('field "%s" is not valid unicode text' % (name))
    if len(encoded) > MAX_STRING_BYTES:
        raise DataError('field "%s" string is too long' % (name))
    return value


def check_fields(fields, values):
    # type: (Sequence[Tuple[str, int]], Mapping[str, Any]) -> Dict[str, Any]
    """Validate a flat message against ordered (name, kind code) pairs.

    :raises DataError: If a field is missing, unknown or of the wrong kind.
    """
    if not hasattr(values, 'keys'):
        raise DataError("field values must be a mapping")
    declared = dict(fields)
    for name in values.keys():
        if name not in declared:
            raise DataError('unknown field "%s"' % (name))
    checked = {}
    for name, code in fields:
        if name not in values:
            raise DataError('missing field "%s"' % (name))
        checked[name] = _check_value(name, code, values[name])
    return checked
