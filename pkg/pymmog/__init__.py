"""Data-centric publish-subscribe for multiplayer game state.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.
"""

__version__ = '1.0.0'

from .participant import *  # pylint: disable=wildcard-import
from .datatype import *     # pylint: disable=wildcard-import
from .exception import *    # pylint: disable=wildcard-import, redefined-builtin
from .filter import *       # pylint: disable=wildcard-import
from .qos import *          # pylint: disable=wildcard-import
from .world import *        # pylint: disable=wildcard-import
