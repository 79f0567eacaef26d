"""A declarative process engine for composing services.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

A process definition is a JSON document:

    {
      "name": "UserApproveService",
      "variables": {"request": {"user_login": "string", ...}, ...},
      "ports": [{"name": "UserCheck", "service": "UserCheckService",
                 "operation": "user_check",
                 "input": {"user_login": "string", ...},
                 "output": {"match": "bool", ...},
                 "address": "/services/user_check"}, ...],
      "nodes": [
        {"id": "start", "kind": "receive", "variable": "request"},
        {"id": "check_user", "kind": "invoke", "port": "UserCheck",
         "input": {"user_login": "$request.user_login", ...},
         "output": "user", "parallel_group": "checks"},
        {"id": "decide", "kind": "decision", "condition": "user.match == true",
         "then": "approve", "else": "deny"},
        {"id": "approve", "kind": "reply", "values": {"approved": true}},
        ...
      ],
      "edges": [["start", "check_user"], ...],
      "fault_reply": {"approved": false, "reason": "SERVICE_UNAVAILABLE"}
    }

Strings of the form "$variable.field" are references; everything else is
a literal.  Decision conditions use the content filter grammar over
"variable.field" names.  Invokes that share a parallel_group are issued
concurrently and joined before any node that follows them.

Exported Classes:
ProcessDefinition -- A validated process.
PortDescriptor -- A service operation and its message schemas.
InProcessBinding -- Binds a port to a Python callable.
HttpBinding -- Binds a port to a JSON over HTTP endpoint.
ProcessResult -- Output message and execution trace.

Exported Functions:
load_definition -- Read and validate a definition file.
run_process -- Execute a definition for one input message.
"""

__all__ = ['ProcessDefinition', 'PortDescriptor', 'Node', 'InProcessBinding',
           'HttpBinding', 'ProcessResult', 'load_definition', 'run_process',
           'DEFAULT_INVOKE_TIMEOUT', 'SERVICE_UNAVAILABLE']

from collections import namedtuple
import concurrent.futures
import io
import json
import logging
import time

try:
    from urllib.request import Request, urlopen
    from urllib.error import URLError
except ImportError:
    from urllib2 import Request, URLError, urlopen  # type: ignore

try:
    from typing import Any, Callable, Dict, List, Mapping, Optional, Set, Tuple  # pylint: disable=unused-import
except ImportError:
    pass

from . import protocol
from .datatype import check_fields, kind_code
from .exception import DataError, Error, OperationalError
from .filter import parse_filter

logger = logging.getLogger(__name__)

DEFAULT_INVOKE_TIMEOUT = 2.0
SERVICE_UNAVAILABLE = 'SERVICE_UNAVAILABLE'

NODE_KINDS = ('receive', 'invoke', 'decision', 'reply')


def _config_error(message):
    # type: (str) -> OperationalError
    return OperationalError(message, protocol.CONFIG_ERROR)


def _schema(name, values):
    # type: (str, Any) -> Tuple[Tuple[str, int], ...]
    if not isinstance(values, dict) or not values:
        raise _config_error('%s must be a non-empty object of field kinds' % (name))
    try:
        return tuple((field, kind_code(kind)) for field, kind in sorted(values.items()))
    except (Error, AttributeError) as e:
        raise _config_error('%s: %s' % (name, e))


def _reference(value):
    # type: (Any) -> Optional[Tuple[str, str]]
    """Return (variable, field) of a "$variable.field" string, else None."""
    if isinstance(value, str) and value.startswith('$'):
        parts = value[1:].split('.')
        if len(parts) != 2 or not all(parts):
            raise _config_error('bad reference %r' % (value))
        return parts[0], parts[1]
    return None


class PortDescriptor(namedtuple('PortDescriptor',
                                ['name', 'service', 'operation', 'input',
                                 'output', 'address'])):
    """A logical port: input and output are (field, kind code) tuples."""

    __slots__ = ()

    @classmethod
    def from_dict(cls, values):
        # type: (Dict[str, Any]) -> PortDescriptor
        name = values.get('name')
        if not isinstance(name, str) or not name:
            raise _config_error('a port needs a name')
        return cls(name, values.get('service', name),
                   values.get('operation', name),
                   _schema('port %s input' % (name), values.get('input')),
                   _schema('port %s output' % (name), values.get('output')),
                   values.get('address'))


class Node(namedtuple('Node', ['id', 'kind', 'body'])):
    """One step of a process; body is the node's JSON object."""

    __slots__ = ()

    @property
    def parallel_group(self):
        # type: () -> Optional[str]
        return self.body.get('parallel_group')


def _references(values):
    # type: (Any) -> Set[Tuple[str, str]]
    refs = set()
    if isinstance(values, dict):
        for value in values.values():
            ref = _reference(value)
            if ref is not None:
                refs.add(ref)
    return refs


class ProcessDefinition(object):
    """A validated process definition.

    Validation checks that there is exactly one receive and at least one
    reply, that edges form a DAG over declared nodes, that references and
    decision conditions name declared variable fields, and that invokes in
    one parallel_group neither feed each other nor follow each other.
    """

    def __init__(self, document):
        # type: (Dict[str, Any]) -> None
        if not isinstance(document, dict):
            raise _config_error('a process definition must be a JSON object')
        self.name = document.get('name') or 'process'
        self.document = document
        self.variables = {}  # type: Dict[str, Tuple[Tuple[str, int], ...]]
        for var, fields in sorted((document.get('variables') or {}).items()):
            self.variables[var] = _schema('variable %s' % (var), fields)
        self.ports = {}  # type: Dict[str, PortDescriptor]
        for values in document.get('ports') or []:
            port = PortDescriptor.from_dict(values)
            if port.name in self.ports:
                raise _config_error('duplicate port %s' % (port.name))
            self.ports[port.name] = port
        self.nodes = []  # type: List[Node]
        self.__by_id = {}  # type: Dict[str, Node]
        for values in document.get('nodes') or []:
            node = Node(values.get('id'), values.get('kind'), values)
            if not isinstance(node.id, str) or not node.id:
                raise _config_error('every node needs an id')
            if node.id in self.__by_id:
                raise _config_error('duplicate node %s' % (node.id))
            if node.kind not in NODE_KINDS:
                raise _config_error('node %s has unknown kind %r' % (node.id, node.kind))
            self.nodes.append(node)
            self.__by_id[node.id] = node
        self.successors = dict((n.id, []) for n in self.nodes)    # type: Dict[str, List[str]]
        self.predecessors = dict((n.id, []) for n in self.nodes)  # type: Dict[str, List[str]]
        for edge in document.get('edges') or []:
            if not isinstance(edge, (list, tuple)) or len(edge) != 2:
                raise _config_error('an edge is a [from, to] pair, not %r' % (edge,))
            src, dst = edge
            if src not in self.__by_id or dst not in self.__by_id:
                raise _config_error('edge %r names an unknown node' % (edge,))
            self.successors[src].append(dst)
            self.predecessors[dst].append(src)
        self.fault_reply = dict(document.get('fault_reply')
                                or {'approved': False, 'reason': SERVICE_UNAVAILABLE})
        self.conditions = {}  # type: Dict[str, Any]
        self.order = self._validate()

    def node(self, node_id):
        # type: (str) -> Node
        return self.__by_id[node_id]

    @property
    def filter_schema(self):
        # type: () -> Dict[str, int]
        schema = {}
        for var, fields in self.variables.items():
            for field, kind in fields:
                schema['%s.%s' % (var, field)] = kind
        return schema

    def _check_refs(self, node, refs):
        # type: (Node, Set[Tuple[str, str]]) -> None
        for var, field in refs:
            if field not in dict(self.variables.get(var, ())):
                raise _config_error('node %s references undeclared $%s.%s'
                                    % (node.id, var, field))

    def _validate(self):
        # type: () -> List[str]
        receives = [n for n in self.nodes if n.kind == 'receive']
        if len(receives) != 1:
            raise _config_error('a process needs exactly one receive node, not %d'
                                % (len(receives)))
        if not any(n.kind == 'reply' for n in self.nodes):
            raise _config_error('a process needs at least one reply node')
        self.receive = receives[0]
        if self.predecessors[self.receive.id]:
            raise _config_error('the receive node cannot have predecessors')
        if self.receive.body.get('variable') not in self.variables:
            raise _config_error('receive variable %r is not declared'
                                % (self.receive.body.get('variable'),))

        # Kahn's algorithm; the definition order breaks ties.
        indegree = dict((n.id, len(self.predecessors[n.id])) for n in self.nodes)
        ready = [n.id for n in self.nodes if indegree[n.id] == 0]
        order = []
        while ready:
            nid = ready.pop(0)
            order.append(nid)
            for succ in self.successors[nid]:
                indegree[succ] -= 1
                if indegree[succ] == 0:
                    ready.append(succ)
        if len(order) != len(self.nodes):
            raise _config_error('the edges of process %s contain a cycle' % (self.name))

        schema = self.filter_schema
        for node in self.nodes:
            body = node.body
            if node.kind == 'invoke':
                port = self.ports.get(body.get('port'))
                if port is None:
                    raise _config_error('node %s invokes undeclared port %r'
                                        % (node.id, body.get('port')))
                if body.get('output') not in self.variables:
                    raise _config_error('node %s writes undeclared variable %r'
                                        % (node.id, body.get('output')))
                inputs = body.get('input')
                if not isinstance(inputs, dict):
                    raise _config_error('node %s input must be an object' % (node.id))
                missing = set(f for f, _ in port.input) - set(inputs)
                if missing:
                    raise _config_error('node %s does not supply %s'
                                        % (node.id, ', '.join(sorted(missing))))
                self._check_refs(node, _references(inputs))
            elif node.kind == 'decision':
                try:
                    self.conditions[node.id] = parse_filter(body.get('condition') or '',
                                                            schema)
                except Error as e:
                    raise _config_error('node %s condition: %s' % (node.id, e))
                for branch in ('then', 'else'):
                    target = body.get(branch)
                    if target not in self.successors[node.id]:
                        raise _config_error('node %s %s branch %r is not an edge'
                                            % (node.id, branch, target))
            elif node.kind == 'reply':
                if body.get('variable') is not None and \
                        body.get('variable') not in self.variables:
                    raise _config_error('node %s replies undeclared variable %r'
                                        % (node.id, body.get('variable')))
                self._check_refs(node, _references(body.get('values')))
        self._check_groups()
        return order

    def reachable(self, src, dst):
        # type: (str, str) -> bool
        seen = set()
        stack = list(self.successors[src])
        while stack:
            nid = stack.pop()
            if nid == dst:
                return True
            if nid not in seen:
                seen.add(nid)
                stack.extend(self.successors[nid])
        return False

    def _check_groups(self):
        # type: () -> None
        groups = {}  # type: Dict[str, List[Node]]
        for node in self.nodes:
            if node.kind == 'invoke' and node.parallel_group is not None:
                groups.setdefault(node.parallel_group, []).append(node)
        for group, members in groups.items():
            for a in members:
                for b in members:
                    if a is b:
                        continue
                    reads = set(var for var, _ in _references(b.body['input']))
                    if a.body['output'] in reads or self.reachable(a.id, b.id):
                        raise _config_error('invokes %s and %s of parallel group %s '
                                            'depend on each other' % (a.id, b.id, group))
        self.groups = groups

    @classmethod
    def from_json(cls, text):
        # type: (str) -> ProcessDefinition
        try:
            document = json.loads(text)
        except ValueError as e:
            raise _config_error('process definition is not JSON: %s' % (e))
        return cls(document)


def load_definition(path):
    # type: (str) -> ProcessDefinition
    """Read and validate a process definition file."""
    try:
        with io.open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except (IOError, OSError) as e:
        raise OperationalError('cannot read %s: %s' % (path, e), protocol.FIXTURE_ERROR)
    return ProcessDefinition.from_json(text)


class InProcessBinding(object):
    """Calls fn(**message) and returns its dict result."""

    def __init__(self, fn):
        # type: (Callable[..., Dict[str, Any]]) -> None
        self.fn = fn

    def invoke(self, port, message, timeout):
        # type: (PortDescriptor, Dict[str, Any], float) -> Dict[str, Any]
        return self.fn(**message)

    def __repr__(self):
        # type: () -> str
        return 'InProcessBinding(%s)' % (getattr(self.fn, '__name__', self.fn))


class HttpBinding(object):
    """POSTs the message as JSON to url and decodes the JSON response."""

    def __init__(self, url):
        # type: (str) -> None
        self.url = url

    def invoke(self, port, message, timeout):
        # type: (PortDescriptor, Dict[str, Any], float) -> Dict[str, Any]
        request = Request(self.url, data=json.dumps(message).encode('utf-8'),
                          headers={'Content-Type': 'application/json'})
        try:
            response = urlopen(request, timeout=timeout)
            try:
                return json.loads(response.read().decode('utf-8'))
            finally:
                response.close()
        except (URLError, IOError, ValueError) as e:
            raise OperationalError('%s at %s failed: %s' % (port.operation, self.url, e),
                                   protocol.DOMAIN_UNAVAILABLE)

    def __repr__(self):
        # type: () -> str
        return 'HttpBinding(%r)' % (self.url)


ProcessResult = namedtuple('ProcessResult', ['output', 'trace', 'node'])


class _Fault(Exception):
    def __init__(self, node_id, event):
        # type: (str, str) -> None
        super(_Fault, self).__init__(node_id)
        self.node_id = node_id
        self.event = event


class _Instance(object):
    """State of one running process instance."""

    def __init__(self, definition, bindings, timeout, executor):
        # type: (ProcessDefinition, Mapping[str, Any], float, Any) -> None
        self.definition = definition
        self.bindings = bindings
        self.timeout = timeout
        self.executor = executor
        self.variables = {}  # type: Dict[str, Dict[str, Any]]
        self.trace = []      # type: List[Tuple[str, str]]

    def resolve(self, value):
        # type: (Any) -> Any
        ref = _reference(value)
        if ref is None:
            return value
        var, field = ref
        return self.variables.get(var, {}).get(field)

    def flat(self):
        # type: () -> Dict[str, Any]
        values = {}
        for var, fields in self.definition.variables.items():
            held = self.variables.get(var, {})
            for field, _ in fields:
                values['%s.%s' % (var, field)] = held.get(field)
        return values

    def start(self, node):
        # type: (Node) -> Tuple[Any, float]
        """Issue an invoke; return its future and its monotonic deadline."""
        port = self.definition.ports[node.body['port']]
        message = dict((field, self.resolve(value))
                       for field, value in node.body['input'].items())
        message = dict((field, message[field]) for field, _ in port.input)
        self.trace.append(('invoke', node.id))
        try:
            message = check_fields(port.input, message)
        except DataError as e:
            logger.warning("process %s node %s: bad input: %s",
                           self.definition.name, node.id, e)
            raise _Fault(node.id, 'fault')
        binding = self.bindings[port.name]
        deadline = time.monotonic() + self.timeout
        return (self.executor.submit(binding.invoke, port, message, self.timeout),
                deadline)

    def finish(self, node, future, deadline):
        # type: (Node, Any, float) -> None
        port = self.definition.ports[node.body['port']]
        try:
            output = future.result(timeout=max(0.0, deadline - time.monotonic()))
        except concurrent.futures.TimeoutError:
            logger.warning("process %s node %s: %s.%s timed out after %gs",
                           self.definition.name, node.id, port.service,
                           port.operation, self.timeout)
            raise _Fault(node.id, 'timeout')
        except Exception as e:  # pylint: disable=broad-except
            logger.warning("process %s node %s: %s.%s failed: %s",
                           self.definition.name, node.id, port.service,
                           port.operation, e)
            raise _Fault(node.id, 'fault')
        try:
            output = check_fields(port.output, dict((f, output.get(f))
                                                    for f, _ in port.output))
        except (DataError, AttributeError) as e:
            logger.warning("process %s node %s: bad reply: %s",
                           self.definition.name, node.id, e)
            raise _Fault(node.id, 'fault')
        self.variables[node.body['output']] = output
        self.trace.append(('complete', node.id))

    def reply(self, node):
        # type: (Node) -> Dict[str, Any]
        output = {}  # type: Dict[str, Any]
        if node.body.get('variable') is not None:
            output.update(self.variables.get(node.body['variable'], {}))
        for field, value in (node.body.get('values') or {}).items():
            output[field] = self.resolve(value)
        self.trace.append(('reply', node.id))
        return output


def run_process(definition, message, bindings, timeout=DEFAULT_INVOKE_TIMEOUT):
    # type: (ProcessDefinition, Mapping[str, Any], Mapping[str, Any], float) -> ProcessResult
    """Execute definition for one input message.

    :param bindings: Port name to binding (InProcessBinding, HttpBinding or
                     anything with invoke(port, message, timeout)).
    :param timeout: Per-invoke deadline in seconds.
    :returns: ProcessResult(output, trace, reply node id).  A timed out or
              failing invoke ends the process with the fault reply.
    :raises OperationalError: PORT_UNBOUND before any node runs if an
                              invoked port has no binding.
    :raises DataError: If message does not match the receive variable.
    """
    unbound = sorted(set(n.body['port'] for n in definition.nodes
                         if n.kind == 'invoke') - set(bindings))
    if unbound:
        raise OperationalError('process %s has unbound ports: %s'
                               % (definition.name, ', '.join(unbound)),
                               protocol.PORT_UNBOUND)
    receive_var = definition.receive.body['variable']
    request = check_fields(definition.variables[receive_var], message)

    width = max([len(m) for m in definition.groups.values()] + [1])
    executor = concurrent.futures.ThreadPoolExecutor(max_workers=width)
    instance = _Instance(definition, bindings, timeout, executor)
    try:
        return _execute(definition, instance, receive_var, request)
    finally:
        executor.shutdown(wait=False)


def _execute(definition, instance, receive_var, request):
    # type: (ProcessDefinition, _Instance, str, Dict[str, Any]) -> ProcessResult
    activated = set([definition.receive.id])
    finished = set()  # type: Set[str]
    pending = list(definition.order)
    while pending:
        ready = [nid for nid in pending
                 if all(p in finished for p in definition.predecessors[nid])]
        if not ready:
            break
        runnable = [definition.node(nid) for nid in ready if nid in activated]
        for nid in ready:
            if nid not in activated:
                # Skipped nodes do not activate their successors.
                pending.remove(nid)
                finished.add(nid)
        if not runnable:
            continue
        invokes = [n for n in runnable if n.kind == 'invoke']
        others = [n for n in runnable if n.kind != 'invoke']
        batches = []  # type: List[List[Node]]
        grouped = {}  # type: Dict[str, List[Node]]
        for node in invokes:
            if node.parallel_group is None:
                batches.append([node])
            elif node.parallel_group in grouped:
                grouped[node.parallel_group].append(node)
            else:
                grouped[node.parallel_group] = [node]
                batches.append(grouped[node.parallel_group])
        try:
            # A group is issued as a whole before any member is joined;
            # completions are recorded in definition order.
            for batch in batches:
                futures = [(node,) + instance.start(node) for node in batch]
                for node, future, deadline in futures:
                    instance.finish(node, future, deadline)
        except _Fault as fault:
            instance.trace.append((fault.event, fault.node_id))
            instance.trace.append(('fault_reply', fault.node_id))
            logger.info("process %s ended with the fault reply", definition.name)
            return ProcessResult(dict(definition.fault_reply), instance.trace,
                                 fault.node_id)
        for node in invokes:
            activated.update(definition.successors[node.id])
        for node in others:
            if node.kind == 'receive':
                instance.variables[receive_var] = request
                instance.trace.append(('receive', node.id))
                activated.update(definition.successors[node.id])
            elif node.kind == 'decision':
                taken = definition.conditions[node.id].matches(instance.flat())
                branch = node.body['then'] if taken else node.body['else']
                instance.trace.append(('decision', node.id))
                activated.add(branch)
            else:
                output = instance.reply(node)
                logger.info("process %s replied from %s", definition.name, node.id)
                return ProcessResult(output, instance.trace, node.id)
        for node in runnable:
            pending.remove(node.id)
            finished.add(node.id)
    raise OperationalError('process %s finished without a reply' % (definition.name),
                           protocol.ASSERTION_FAILED)
