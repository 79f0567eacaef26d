"""Classes containing the exceptions for reporting errors.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.
"""

try:
    from typing import NoReturn, Optional  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol

__all__ = ['Warning', 'Error', 'InterfaceError', 'DatabaseError',
           'DataError', 'OperationalError', 'IntegrityError', 'InternalError',
           'ProgrammingError', 'NotSupportedError', 'MalformedMessage',
           'ParseError', 'AccessDenied', 'error_handler']


# The hierarchy mirrors PEP 249 so that the account store and the
# middleware report failures through one family of exceptions.

class Warning(Warning):  # type: ignore # pylint: disable=redefined-builtin
    """Raised for important warnings."""

    pass


class Error(Exception):
    """The base class of all other error exceptions.

    Every error carries the protocol error code it was raised for.
    """

    code = protocol.INTERNAL_ERROR

    def __init__(self, message, code=None):
        # type: (str, Optional[int]) -> None
        super(Error, self).__init__(message)
        if code is not None:
            self.code = code

    @property
    def name(self):
        # type: () -> str
        """Return the symbolic name of the error code."""
        return protocol.lookup_code(self.code)


class InterfaceError(Error):
    """Raised for misuse of the API: bad arguments, deleted entities."""

    code = protocol.PRECONDITION


class DatabaseError(Error):
    """Raised for errors that are related to the data being handled."""

    pass


class DataError(DatabaseError):
    """Raised for errors that are due to problems with the processed data."""

    code = protocol.TYPE_ERROR


class OperationalError(DatabaseError):
    """Raised for errors related to the operation of the system."""

    code = protocol.RESOURCE_LIMIT


class IntegrityError(DatabaseError):
    """Raised when the relational integrity of the account store is affected."""

    code = protocol.CONSTRAINT_VIOLATION


class InternalError(DatabaseError):
    """Raised when the implementation reaches an inconsistent state."""

    pass


class ProgrammingError(DatabaseError):
    """Raised for programming errors: syntax, unknown names, ownership."""

    code = protocol.PARSE_ERROR


class NotSupportedError(DatabaseError):
    """Raised for using an operation which is not supported."""

    pass


# These exceptions are specific to the pymmog implementation.

class MalformedMessage(DataError):
    """A datagram could not be decoded: bad header, truncation, bad UTF-8."""

    code = protocol.MALFORMED


class ParseError(ProgrammingError):
    """Raised for syntax errors; offset is the byte offset of the problem."""

    code = protocol.PARSE_ERROR

    def __init__(self, message, offset):
        # type: (str, int) -> None
        super(ParseError, self).__init__('%s (at byte %d)' % (message, offset))
        self.offset = offset


def error_handler(error_code, error_string):
    # type: (int, str) -> NoReturn
    """Raise the appropriate exception based on the error.

    :param error_code: The error code.
    :param error_string: Extra error information.
    :raises Error: The correct Error exception subclass.
    """
    info = '%s: %s' % (protocol.lookup_code(error_code), error_string)

    if error_code == protocol.MALFORMED:
        raise MalformedMessage(info)
    if error_code in protocol.INTERFACE_ERRORS:
        raise InterfaceError(info, error_code)
    if error_code in protocol.DATA_ERRORS:
        raise DataError(info, error_code)
    if error_code in protocol.OPERATIONAL_ERRORS:
        raise OperationalError(info, error_code)
    if error_code in protocol.INTEGRITY_ERRORS:
        raise IntegrityError(info, error_code)
    if error_code in protocol.INTERNAL_ERRORS:
        raise InternalError(info, error_code)
    if error_code in protocol.PROGRAMMING_ERRORS:
        raise ProgrammingError(info, error_code)

    raise DatabaseError(info, error_code)


class AccessDenied(InterfaceError):
    """Raised when a session token does not admit its holder."""

    def __init__(self, reason, message=None):
        # type: (str, Optional[str]) -> None
        super(AccessDenied, self).__init__(message or 'access denied: %s' % (reason))
        self.reason = reason
