"""Hashing helpers: instance keys, type hashes and stored passwords.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

Exported Functions:
fnv1a64 -- 64-bit FNV-1a hash of a byte string.
hash_password -- Salt and hash a password for storage.
verify_password -- Check a password against its stored form.
random_token -- Return an opaque random identifier.
"""

__all__ = ["fnv1a64", "hash_password", "verify_password", "random_token",
           "cryptographyImported"]

# Passwords are stored in the text form
#
#   pbkdf2_sha256$<iterations>$<salt hex>$<hash hex>
#
# When the cryptography package is installed its PBKDF2 implementation is
# used, otherwise hashlib's.  Both produce identical output.

import binascii
import hashlib
import hmac
import os

try:
    from typing import Optional  # pylint: disable=unused-import
except ImportError:
    pass

try:
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        from cryptography.hazmat.backends import default_backend
        from cryptography.hazmat.primitives import hashes
        from cryptography.hazmat.primitives.kdf.pbkdf2 import PBKDF2HMAC
    cryptographyImported = True
except ImportError:
    cryptographyImported = False

FNV_OFFSET_BASIS = 0xcbf29ce484222325
FNV_PRIME = 0x100000001b3
_MASK64 = 0xffffffffffffffff

PASSWORD_SCHEME = 'pbkdf2_sha256'
PASSWORD_ITERATIONS = 20000
SALT_BYTES = 16
HASH_BYTES = 32


def fnv1a64(data):
    # type: (bytes) -> int
    """Return the 64-bit FNV-1a hash of data."""
    h = FNV_OFFSET_BASIS
    for byte in bytearray(data):
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def _pbkdf2(password, salt, iterations):
    # type: (bytes, bytes, int) -> bytes
    if cryptographyImported:
        kdf = PBKDF2HMAC(algorithm=hashes.SHA256(), length=HASH_BYTES,
                         salt=salt, iterations=iterations,
                         backend=default_backend())
        return kdf.derive(password)
    return hashlib.pbkdf2_hmac('sha256', password, salt, iterations, HASH_BYTES)


def hash_password(password, salt=None, iterations=PASSWORD_ITERATIONS):
    # type: (str, Optional[bytes], int) -> str
    """Return the storable salted hash of password.

    :param password: The plaintext password.
    :param salt: Salt bytes; a random salt is generated when omitted.
    :param iterations: PBKDF2 iteration count.
    """
    if salt is None:
        salt = os.urandom(SALT_BYTES)
    digest = _pbkdf2(password.encode('utf-8'), salt, iterations)
    return '%s$%d$%s$%s' % (PASSWORD_SCHEME, iterations,
                            binascii.hexlify(salt).decode('ascii'),
                            binascii.hexlify(digest).decode('ascii'))


def verify_password(password, stored):
    # type: (str, str) -> bool
    """Return True if password hashes to the stored value.

    Malformed stored values never verify.
    """
    parts = stored.split('$')
    if len(parts) != 4 or parts[0] != PASSWORD_SCHEME:
        return False
    try:
        iterations = int(parts[1])
        salt = binascii.unhexlify(parts[2])
        expected = binascii.unhexlify(parts[3])
    except (ValueError, TypeError, binascii.Error):
        return False
    if iterations <= 0:
        return False
    digest = _pbkdf2(password.encode('utf-8'), salt, iterations)
    return hmac.compare_digest(digest, expected)


def random_token(nbytes=16):
    # type: (int) -> str
    """Return nbytes of randomness as lowercase hex."""
    return binascii.hexlify(os.urandom(nbytes)).decode('ascii')
