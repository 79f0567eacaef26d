"""Constants for the pymmog wire protocol and error reporting.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.
"""

# pylint: disable=bad-whitespace

# Message Header
MAGIC                             = b'MDDS'
VERSION                           = 1
HEADER_SIZE                       = 18     # magic + version + flags + prefix
GUID_PREFIX_SIZE                  = 12
GUID_SIZE                         = 16
MAX_MESSAGE_SIZE                  = 65536
MAX_SUBMESSAGE_PAYLOAD            = 65535

# Header flags
FLAG_SIMULATED                    = 0x01

# Submessage Identifiers
DATA                              = 1
HEARTBEAT                         = 2
ACKNACK                           = 3
GAP                               = 4
DISCOVERY                         = 6

# DATA flags
DATA_COHERENT                     = 0x01
DATA_COHERENT_END                 = 0x02

# Reader entity id addressing every matched reader
BROADCAST_READER                  = 0

# DISCOVERY entity records
ENTITY_WRITER                     = 1
ENTITY_READER                     = 2
RECORD_DELETED                    = 0x01

# Entity kind bytes (low byte of an entity id)
KIND_PARTICIPANT                  = 0xC1
KIND_WRITER                       = 0x02
KIND_READER                       = 0x07
KIND_PUBLISHER                    = 0x08
KIND_SUBSCRIBER                   = 0x09
PARTICIPANT_ENTITY_ID             = 0x000001C1

# ACKNACK bitmap
MAX_NACK_BITS                     = 255

# Field Kinds
FIELD_U32                         = 1
FIELD_U64                         = 2
FIELD_I64                         = 3
FIELD_F32                         = 4
FIELD_F64                         = 5
FIELD_BOOL                        = 6
FIELD_STRING                      = 7

# Timing defaults (milliseconds)
DEFAULT_HEARTBEAT_PERIOD          = 50
DEFAULT_LEASE                     = 1000
MIN_LEASE                         = 100
LIVELINESS_LEASE_FACTOR           = 3
DISCOVERY_DIVISOR                 = 3
TOMBSTONE_LEASES                  = 3

# Datagram ports
DEFAULT_BASE_PORT                 = 7400

# Error Codes
PRECONDITION                      = -1
ENTITY_DELETED                    = -2
REENTRANCY                        = -3
TYPE_ERROR                        = -10
OUT_OF_BOUNDS                     = -11
INVALID_REGION                    = -12
MALFORMED                         = -13
PARSE_ERROR                       = -20
TABLE_EXISTS                      = -21
UNKNOWN_TABLE                     = -22
UNKNOWN_COLUMN                    = -23
NOT_OWNER                         = -24
CONSTRAINT_VIOLATION              = -30
ARITY_MISMATCH                    = -31
DOMAIN_UNAVAILABLE                = -40
RESOURCE_LIMIT                    = -41
PORT_UNBOUND                      = -42
INVOKE_TIMEOUT                    = -43
CONFIG_ERROR                      = -44
FIXTURE_ERROR                     = -45
ASSERTION_FAILED                  = -46
INTERNAL_ERROR                    = -50

INTERFACE_ERRORS = {PRECONDITION, ENTITY_DELETED, REENTRANCY}
DATA_ERRORS = {TYPE_ERROR, OUT_OF_BOUNDS, INVALID_REGION, MALFORMED}
PROGRAMMING_ERRORS = {PARSE_ERROR, TABLE_EXISTS, UNKNOWN_TABLE,
                      UNKNOWN_COLUMN, NOT_OWNER}
INTEGRITY_ERRORS = {CONSTRAINT_VIOLATION, ARITY_MISMATCH}
OPERATIONAL_ERRORS = {DOMAIN_UNAVAILABLE, RESOURCE_LIMIT, PORT_UNBOUND,
                      INVOKE_TIMEOUT, CONFIG_ERROR, FIXTURE_ERROR,
                      ASSERTION_FAILED}
INTERNAL_ERRORS = {INTERNAL_ERROR}

# QoS policy identifiers reported by incompatible-QoS statuses
RELIABILITY_POLICY_ID             = 11
PRESENTATION_POLICY_ID            = 3

stringifyError = {
    PRECONDITION: 'PRECONDITION',
    ENTITY_DELETED: 'ENTITY_DELETED',
    REENTRANCY: 'REENTRANCY',
    TYPE_ERROR: 'TYPE_ERROR',
    OUT_OF_BOUNDS: 'OUT_OF_BOUNDS',
    INVALID_REGION: 'INVALID_REGION',
    MALFORMED: 'MALFORMED',
    PARSE_ERROR: 'PARSE_ERROR',
    TABLE_EXISTS: 'TABLE_EXISTS',
    UNKNOWN_TABLE: 'UNKNOWN_TABLE',
    UNKNOWN_COLUMN: 'UNKNOWN_COLUMN',
    NOT_OWNER: 'NOT_OWNER',
    CONSTRAINT_VIOLATION: 'CONSTRAINT_VIOLATION',
    ARITY_MISMATCH: 'ARITY_MISMATCH',
    DOMAIN_UNAVAILABLE: 'DOMAIN_UNAVAILABLE',
    RESOURCE_LIMIT: 'RESOURCE_LIMIT',
    PORT_UNBOUND: 'PORT_UNBOUND',
    INVOKE_TIMEOUT: 'INVOKE_TIMEOUT',
    CONFIG_ERROR: 'CONFIG_ERROR',
    FIXTURE_ERROR: 'FIXTURE_ERROR',
    ASSERTION_FAILED: 'ASSERTION_FAILED',
    INTERNAL_ERROR: 'INTERNAL_ERROR',
}


def lookup_code(error_code):
    # type: (int) -> str
    """Return a string-ified version of an error code."""
    return stringifyError.get(error_code, '[UNKNOWN ERROR CODE]')
