"""Scenario runner: bot players on a simulated or loopback network.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

A scenario logs every bot in through the login services, joins each to
the game domain with its own participant and GameSession, lets discovery
settle, then moves every bot's player entity update_hz times a second
for duration_s.  After a drain phase the views of bots sharing an area of
interest are compared and the report's assertions are evaluated.

Configuration is JSON; the presets mp32, mmog256 and mmog256_lossy ship
with the package:

    {"name": "mp32", "players": 32, "update_hz": 10.0, "duration_s": 30.0,
     "qos": "reliable", "aoi_regions_per_player": 64, "aoi_groups": 4,
     "seed": 1, "lease_ms": 1000, "heartbeat_ms": 50, "drain_s": 10.0,
     "staleness_timeout_s": 5.0, "liveliness_check": true,
     "world": {"width": 1024, "height": 1024, "cell_size": 64},
     "net": {"drop_probability": 0.0, "latency_mean": 50.0,
             "latency_jitter": 0.0}}

Exported Classes:
ScenarioConfig -- A validated scenario configuration.
MetricsReport -- The result of a run.

Exported Functions:
load_config -- Read a configuration file or preset.
preset_names -- The names of the shipped presets.
run_scenario -- Run a scenario and return its report.
"""

__all__ = ['ScenarioConfig', 'MetricsReport', 'load_config', 'preset_names',
           'run_scenario', 'QOS_PRESETS']

from collections import namedtuple
import io
import json
import logging
import math
import os
import random
import threading
import time

try:
    from typing import Any, Dict, List, Mapping, Optional, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .accounts import (AccountStore, CardRecord, CardStore, FixedClock,
                       UserAccount)
from .crypt import hash_password
from .exception import Error, OperationalError
from .gamesession import SESSION_READER_QOS, SESSION_WRITER_QOS, GameSession
from .link import UdpNetwork
from .netsim import NetSimConfig, SimNetwork
from .participant import create_participant
from .qos import BEST_EFFORT, GROUP, KEEP_LAST, QosProfile
from .webapp import LoginServices
from .world import PLAYER, WorldConfig, divergence

logger = logging.getLogger(__name__)

_PRESET_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'presets')

_BEST_EFFORT_QOS = QosProfile(reliability=BEST_EFFORT, history_kind=KEEP_LAST,
                              history_depth=1, coherent_access=True,
                              access_scope=GROUP)

QOS_PRESETS = {'reliable': (SESSION_WRITER_QOS, SESSION_READER_QOS),
               'best_effort': (_BEST_EFFORT_QOS, _BEST_EFFORT_QOS)}

# Bot accounts hash with fewer rounds than stored accounts.
_BOT_HASH_ITERATIONS = 1000
_BOT_CARD = '4111111111111111'
_BOT_CARD_EXPIRY = '12/2015'
_REALTIME_BASE_PORT = protocol.DEFAULT_BASE_PORT + 100

_DEFAULTS = {'name': 'custom',
             'players': 4,
             'update_hz': 10.0,
             'duration_s': 10.0,
             'qos': 'reliable',
             'aoi_regions_per_player': None,
             'aoi_groups': 1,
             'seed': 0,
             'lease_ms': protocol.DEFAULT_LEASE,
             'heartbeat_ms': protocol.DEFAULT_HEARTBEAT_PERIOD,
             'drain_s': 10.0,
             'staleness_timeout_s': 5.0,
             'liveliness_check': False,
             'realtime': False}


def _config_error(message):
    # type: (str) -> OperationalError
    return OperationalError(message, protocol.CONFIG_ERROR)


class ScenarioConfig(namedtuple('ScenarioConfig',
                                ['name', 'players', 'world', 'update_hz',
                                 'duration_s', 'net', 'qos',
                                 'aoi_regions_per_player', 'aoi_groups', 'seed',
                                 'lease_ms', 'heartbeat_ms', 'drain_s',
                                 'staleness_timeout_s', 'liveliness_check',
                                 'realtime'])):
    """A scenario; aoi_regions_per_player None means the whole world."""

    __slots__ = ()

    @classmethod
    def from_dict(cls, values):
        # type: (Mapping[str, Any]) -> ScenarioConfig
        """Build and validate a configuration.

        :raises OperationalError: CONFIG_ERROR for unknown keys or bad values.
        """
        if not isinstance(values, dict):
            raise _config_error('a scenario configuration must be a JSON object')
        unknown = set(values) - set(cls._fields)
        if unknown:
            raise _config_error('unknown scenario settings: %s'
                                % (', '.join(sorted(unknown))))
        fields = dict(_DEFAULTS)
        fields.update((k, v) for k, v in values.items() if k not in ('world', 'net'))
        try:
            fields['world'] = WorldConfig.from_dict(dict(values.get('world') or {}))
        except (Error, TypeError, ValueError) as e:
            raise _config_error('invalid world settings: %s' % (e))
        fields['net'] = NetSimConfig.from_dict(dict(values.get('net') or {}))
        config = cls(**fields)
        config.validate()
        return config

    def with_changes(self, **changes):
        # type: (**Any) -> ScenarioConfig
        """Return a copy with fields replaced; net fields go in net."""
        net = dict(self.net._asdict())
        for key in list(changes):
            if key in NetSimConfig._fields:
                net[key] = changes.pop(key)
        config = self._replace(net=NetSimConfig.from_dict(net), **changes)
        config.validate()
        return config

    def validate(self):
        # type: () -> None
        def integer(name, low, high=None):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < low \
                    or (high is not None and value > high):
                raise _config_error('%s must be an integer >= %d, not %r'
                                    % (name, low, value))

        def positive(name):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) \
                    or not value > 0 or math.isinf(value):
                raise _config_error('%s must be a positive number, not %r'
                                    % (name, value))

        integer('players', 1)
        integer('seed', 0, 0xffffffffffffffff)
        integer('aoi_groups', 1)
        integer('lease_ms', protocol.MIN_LEASE)
        integer('heartbeat_ms', 1)
        for name in ('update_hz', 'duration_s', 'drain_s', 'staleness_timeout_s'):
            positive(name)
        if self.qos not in QOS_PRESETS:
            raise _config_error('qos must be one of %s, not %r'
                                % (', '.join(sorted(QOS_PRESETS)), self.qos))
        if self.lease_ms < protocol.LIVELINESS_LEASE_FACTOR * self.heartbeat_ms:
            raise _config_error('lease_ms must be at least %d heartbeat periods'
                                % (protocol.LIVELINESS_LEASE_FACTOR))
        if self.aoi_regions_per_player is not None:
            integer('aoi_regions_per_player', 1, self.world.region_count)
        if self.aoi_groups > self.world.region_count:
            raise _config_error('aoi_groups exceeds the %d regions of the world'
                                % (self.world.region_count))

    @property
    def reliable(self):
        # type: () -> bool
        return self.qos == 'reliable'

    def aoi_of(self, group):
        # type: (int) -> Optional[frozenset]
        """Return the regions of an AOI group; None for the whole world."""
        count = self.world.region_count
        per = self.aoi_regions_per_player
        if per is None or per >= count:
            return None
        stride = count // self.aoi_groups
        return frozenset((group * stride + j) % count for j in range(per))

    def to_dict(self):
        # type: () -> Dict[str, Any]
        values = self._asdict()
        values['world'] = dict(self.world._asdict())
        values['net'] = dict(self.net._asdict())
        return dict(values)


def preset_names():
    # type: () -> List[str]
    return sorted(name[:-5] for name in os.listdir(_PRESET_DIR)
                  if name.endswith('.json'))


def load_config(path_or_name):
    # type: (str) -> ScenarioConfig
    """Read a scenario file, or a shipped preset by name.

    :raises OperationalError: CONFIG_ERROR if it cannot be read or is invalid.
    """
    path = path_or_name
    if not os.path.exists(path) and path_or_name in preset_names():
        path = os.path.join(_PRESET_DIR, path_or_name + '.json')
    try:
        with io.open(path, 'r', encoding='utf-8') as f:
            values = json.load(f)
    except (IOError, OSError, ValueError) as e:
        raise _config_error('cannot load scenario %s: %s' % (path_or_name, e))
    return ScenarioConfig.from_dict(values)


class MetricsReport(object):
    """Metrics and assertion outcomes of one run.

    to_json() is byte-identical for equal configurations and seeds unless
    the wall-clock runtime is included.
    """

    def __init__(self, values, runtime_s=None):
        # type: (Dict[str, Any], Optional[float]) -> None
        self.values = values
        self.runtime_s = runtime_s

    @property
    def assertions(self):
        # type: () -> List[Dict[str, Any]]
        return self.values['assertions']

    @property
    def failed(self):
        # type: () -> List[str]
        return [a['name'] for a in self.assertions if not a['passed']]

    @property
    def passed(self):
        # type: () -> bool
        return not self.failed

    def __getitem__(self, key):
        # type: (str) -> Any
        return self.values[key]

    def to_json(self, timing=False):
        # type: (bool) -> str
        values = dict(self.values)
        if timing and self.runtime_s is not None:
            values['runtime_s'] = round(self.runtime_s, 3)
        return json.dumps(values, sort_keys=True, indent=2) + '\n'

    def check(self):
        # type: () -> None
        """:raises OperationalError: ASSERTION_FAILED naming the failures."""
        if self.failed:
            raise OperationalError('scenario assertions failed: %s'
                                   % (', '.join(self.failed)),
                                   protocol.ASSERTION_FAILED)


def _assertion(name, passed, detail):
    # type: (str, bool, str) -> Dict[str, Any]
    return {'name': name, 'passed': bool(passed), 'detail': detail}


def _round(value):
    # type: (float) -> float
    return round(float(value), 6)


class _Bot(object):
    """One player: credentials, participant, session and counters."""

    def __init__(self, index, login, group, regions):
        # type: (int, str, int, Optional[frozenset]) -> None
        self.index = index
        self.login = login
        self.group = group
        self.regions = regions
        self.entity_id = index + 1
        self.participant = None   # type: Any
        self.session = None       # type: Optional[GameSession]
        self.vx = 0.0
        self.vy = 0.0
        self.delivered = 0
        self.stale = 0
        self.staleness_sum = 0.0
        self.staleness_max = 0.0


class _Runtime(object):
    """Time and transport of a run: virtual (SimNetwork) or wall clock."""

    def __init__(self, config):
        # type: (ScenarioConfig) -> None
        self.config = config
        if config.realtime:
            ports = [_REALTIME_BASE_PORT + i for i in range(config.players)]
            self.network = UdpNetwork(peers=['127.0.0.1:%d' % (p) for p in ports])
            self.ports = ports  # type: List[Optional[int]]
        else:
            self.network = SimNetwork(config.net._replace(rng_seed=config.seed))
            self.ports = [None] * config.players
        self.lock = threading.Lock()

    @property
    def simulated(self):
        # type: () -> bool
        return not self.config.realtime

    def now_ms(self, participant=None):
        # type: (Any) -> float
        if self.simulated:
            return self.network.now
        return participant.clock.now_ms() if participant is not None else time.time() * 1000.0

    def advance(self, ms):
        # type: (float) -> None
        if self.simulated:
            self.network.run_for(ms)
        else:
            time.sleep(ms / 1000.0)

    def silence(self, bot):
        # type: (_Bot) -> None
        if self.simulated:
            self.network.silence(bot.participant.link.address)
        else:
            bot.participant.delete()


def _login_services(config, clock):
    # type: (ScenarioConfig, FixedClock) -> LoginServices
    accounts = AccountStore(clock=clock)
    for i in range(config.players):
        login = 'bot%03d' % (i)
        accounts.add(UserAccount.create(
            login, None, 'FULL', '01/01/2010', '01/01/2030',
            password_hash=hash_password(login, iterations=_BOT_HASH_ITERATIONS)))
    cards = CardStore([CardRecord(_BOT_CARD, 12, 2015, True)], clock)
    return LoginServices(accounts, cards)


def _join(config, runtime, services, rng):
    # type: (ScenarioConfig, _Runtime, LoginServices, random.Random) -> List[_Bot]
    writer_qos, reader_qos = QOS_PRESETS[config.qos]
    bots = []
    for i in range(config.players):
        login = 'bot%03d' % (i)
        reply = services.login(login, login, _BOT_CARD, _BOT_CARD_EXPIRY)
        if not reply.get('approved'):
            raise OperationalError('bot %s was not approved: %s'
                                   % (login, reply.get('reason')),
                                   protocol.ASSERTION_FAILED)
        credentials = services.join_game(reply['session_token'])
        group = i % config.aoi_groups
        bot = _Bot(i, login, group, config.aoi_of(group))
        options = {'heartbeat_period': config.heartbeat_ms,
                   'guid_prefix': '%024x' % (rng.getrandbits(96))}
        if runtime.ports[i] is not None:
            options['port'] = runtime.ports[i]
        bot.participant = create_participant(credentials.domain_id,
                                             config.lease_ms, runtime.network,
                                             options)
        bot.session = GameSession(bot.participant, config.world, login,
                                  config.staleness_timeout_s * 1000.0,
                                  writer_qos, reader_qos,
                                  _observer(runtime, bot))
        bots.append(bot)
    return bots


def _observer(runtime, bot):
    def observe(state, info, accepted):
        now = runtime.now_ms(bot.participant)
        staleness = max(0.0, now - info.source_timestamp / 1000.0)
        with runtime.lock:
            bot.delivered += 1
            if not accepted:
                bot.stale += 1
            bot.staleness_sum += staleness
            bot.staleness_max = max(bot.staleness_max, staleness)
    return observe


def _settle(config, runtime, bots):
    # type: (ScenarioConfig, _Runtime, List[_Bot]) -> bool
    """Run until every reader matched every writer, bounded by 3 leases."""
    expected = config.players
    waited = 0.0
    bound = protocol.LIVELINESS_LEASE_FACTOR * config.lease_ms
    while True:
        if all(b.session.aoi.reader.get_status().subscription_matched.current_count
               >= expected and
               b.session.writer.get_status().publication_matched.current_count
               >= expected for b in bots):
            return True
        if waited >= bound:
            return False
        runtime.advance(config.heartbeat_ms)
        waited += config.heartbeat_ms


def _drain(config, runtime, bots):
    # type: (ScenarioConfig, _Runtime, List[_Bot]) -> bool
    bound = config.drain_s * 1000.0
    # Best-effort samples are never acknowledged; give them one trip.
    minimum = (config.net.latency_mean + config.net.latency_jitter
               + 2 * config.heartbeat_ms)
    waited = 0.0
    while True:
        done = all(b.participant.engine.all_acknowledged(b.session.writer._state)
                   for b in bots)
        if done and waited >= minimum:
            for bot in bots:
                bot.session.drain()
            return True
        if waited >= bound:
            for bot in bots:
                bot.session.drain()
            return False
        runtime.advance(config.heartbeat_ms)
        waited += config.heartbeat_ms


def _measure_liveliness(config, runtime, bots):
    # type: (ScenarioConfig, _Runtime, List[_Bot]) -> Tuple[Dict[str, Any], Dict[str, Any]]
    silenced = bots[-1]
    observers = bots[:-1]
    guid = silenced.participant.guid
    bound = (protocol.LIVELINESS_LEASE_FACTOR * config.lease_ms + config.heartbeat_ms
             + config.net.latency_mean + config.net.latency_jitter)
    start = runtime.now_ms()
    runtime.silence(silenced)
    detected = {}  # type: Dict[int, float]
    waited = 0.0
    while len(detected) < len(observers) and waited <= bound + config.heartbeat_ms:
        runtime.advance(config.heartbeat_ms)
        waited += config.heartbeat_ms
        for bot in observers:
            if bot.index not in detected and guid not in bot.participant.remote_participants():
                detected[bot.index] = runtime.now_ms() - start
    times = sorted(detected.values())
    result = {'silenced': silenced.login,
              'observers': len(observers),
              'detected': len(times),
              'bound_ms': _round(bound),
              'max_detection_ms': _round(times[-1]) if times else None,
              'mean_detection_ms': _round(sum(times) / len(times)) if times else None}
    ok = len(times) == len(observers) and (not times or times[-1] <= bound)
    return result, _assertion('liveliness', ok,
                              '%d of %d observers detected %s within %.1f ms'
                              % (len(times), len(observers), silenced.login, bound))


def run_scenario(config):
    # type: (ScenarioConfig) -> MetricsReport
    """Run a scenario and return its report.

    The report's assertions are evaluated but not raised; call
    MetricsReport.check() to turn failures into ASSERTION_FAILED.
    """
    started = time.time()
    rng = random.Random(config.seed)
    runtime = _Runtime(config)
    world = config.world
    services = _login_services(config, FixedClock())
    logger.info("scenario %s: %d players, %.1f s at %g Hz, seed %d",
                config.name, config.players, config.duration_s,
                config.update_hz, config.seed)

    bots = _join(config, runtime, services, rng)
    assertions = []
    try:
        for bot in bots:
            x = rng.uniform(0.0, world.width)
            y = rng.uniform(0.0, world.height)
            x, y = world.clamp(x, y)
            speed = world.cell_size
            bot.vx = rng.uniform(-speed, speed)
            bot.vy = rng.uniform(-speed, speed)
            bot.session.spawn(bot.entity_id, PLAYER, x, y, bot.vx, bot.vy)
            bot.session.subscribe_aoi(bot.regions if bot.regions is not None
                                      else range(world.region_count))

        matched = _settle(config, runtime, bots)
        assertions.append(_assertion('discovery', matched,
                                     'every reader matched %d writers before updates'
                                     % (config.players)))
        logger.info("discovery settled at %.1f ms", runtime.now_ms())

        # Oracle: samples published per region.
        published = {}  # type: Dict[int, int]
        period = 1000.0 / config.update_hz
        dt = period / 1000.0
        rounds = int(round(config.duration_s * config.update_hz))
        for _ in range(rounds):
            for bot in bots:
                state = bot.session.owned()[0]
                x, y = state.x + bot.vx * dt, state.y + bot.vy * dt
                if not 0.0 <= x < world.width:
                    bot.vx = -bot.vx
                if not 0.0 <= y < world.height:
                    bot.vy = -bot.vy
                x, y = world.clamp(x, y)
                for sent in bot.session.move(bot.entity_id, x, y, bot.vx, bot.vy):
                    published[sent.region] = published.get(sent.region, 0) + 1
            runtime.advance(period)
        logger.info("updates finished at %.1f ms", runtime.now_ms())

        drained = _drain(config, runtime, bots)
        if config.reliable:
            assertions.append(_assertion('quiescence', drained,
                                         'every writer acknowledged within %.1f s'
                                         % (config.drain_s)))
        for bot in bots:
            bot.session.expire(runtime.now_ms(bot.participant))

        subscribers = []
        delivery_ok = True
        for bot in bots:
            if bot.regions is None:
                sent = sum(published.values())
            else:
                sent = sum(n for region, n in published.items() if region in bot.regions)
            exact = bot.delivered == sent if config.reliable else bot.delivered <= sent
            delivery_ok = delivery_ok and exact
            subscribers.append({
                'login': bot.login,
                'regions': sorted(bot.regions) if bot.regions is not None else 'all',
                'sent': sent,
                'delivered': bot.delivered,
                'stale': bot.stale,
                'bytes': bot.participant.engine.bytes_received,
                'staleness_mean_ms': _round(bot.staleness_sum / bot.delivered)
                if bot.delivered else 0.0,
                'staleness_max_ms': _round(bot.staleness_max)})
        assertions.append(_assertion(
            'delivery', delivery_ok,
            'delivered == sent for every subscriber' if config.reliable
            else 'delivered <= sent for every subscriber'))

        if config.net.drop_probability == 0.0 and config.heartbeat_ms and runtime.simulated:
            bound = config.net.latency_mean + config.net.latency_jitter + config.heartbeat_ms
            worst = max([s['staleness_max_ms'] for s in subscribers] + [0.0])
            assertions.append(_assertion('staleness', worst <= bound + 1e-3,
                                         'max staleness %.3f ms, bound %.3f ms'
                                         % (worst, bound)))

        pairs = 0
        diverged = []
        max_count, max_error = 0, 0.0
        for i, a in enumerate(bots):
            for b in bots[i + 1:]:
                if a.group != b.group:
                    continue
                pairs += 1
                count, error = divergence(a.session.view, b.session.view)
                max_count = max(max_count, count)
                max_error = max(max_error, error)
                if count or error:
                    diverged.append({'a': a.login, 'b': b.login, 'count': count,
                                     'max_error': _round(error)})
        if config.reliable:
            assertions.append(_assertion('convergence', not diverged,
                                         '%d of %d same-AOI pairs diverged'
                                         % (len(diverged), pairs)))

        liveliness = None
        if config.liveliness_check and len(bots) > 1:
            liveliness, outcome = _measure_liveliness(config, runtime, bots)
            assertions.append(outcome)

        engines = [bot.participant.engine for bot in bots]
        values = {
            'scenario': config.name,
            'seed': config.seed,
            'players': config.players,
            'qos': config.qos,
            'virtual_time_ms': _round(runtime.now_ms()) if runtime.simulated else None,
            'published': sum(published.values()),
            'handoffs': sum(bot.session.handoffs for bot in bots),
            'subscribers': subscribers,
            'divergence': {'pairs': pairs, 'diverged': diverged,
                           'max_count': max_count, 'max_error': _round(max_error)},
            'retransmissions': sum(e.retransmissions for e in engines),
            'datagrams_sent': sum(e.datagrams_sent for e in engines),
            'bytes_sent': sum(e.bytes_sent for e in engines),
            'datagrams_dropped': runtime.network.datagrams_dropped
            if runtime.simulated else None,
            'liveliness': liveliness,
            'assertions': assertions,
            'passed': all(a['passed'] for a in assertions),
        }
    finally:
        for bot in bots:
            if not bot.participant.closed:
                bot.session.close()
                bot.participant.delete()
    report = MetricsReport(values, time.time() - started)
    logger.info("scenario %s %s", config.name,
                'passed' if report.passed else 'failed: %s' % (', '.join(report.failed)))
    return report
