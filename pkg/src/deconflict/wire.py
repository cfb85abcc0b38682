"""Wire protocol for out-of-process agents.

Messages are line-delimited JSON with an explicit schema version:

    {"v": 1, "session_id": "...", "round": 0, "sender": "...",
     "kind": "initial_proposal", "setpoints": {"DG47": 0.3, ...},
     "flexibility": 0.3, "justification": "..."}

Optional fields (setpoints, flexibility, justification) are omitted when
absent. Errors travel as {"v": 1, "error": {"code": "...", "message": "..."}}.

Engine -> agent traffic uses two request shapes: an initial_proposal
with no setpoints solicits the agent's opening proposal, and a
consensus_update carrying the current reference point (plus an optional
suggested flexibility) solicits a counter_offer or an accept. The
serving side holds the scenario locally, so private objectives never
cross the wire.

Transports: the standard streams of a spawned subprocess
("stdio:<command line>") or a TCP socket ("tcp:host:port"). Run
`python -m deconflict.wire --help` to serve a strategy.
"""

from __future__ import annotations

import argparse
import json
import selectors
import shlex
import socket
import socketserver
import subprocess
import sys
from typing import IO, Callable

from .consensus import AgentFault
from .model import FeasibleSet, SetpointVector, build_feasible_set, load_scenario
from .sessions import SessionMessage
from .strategies import NegotiationContext, Strategy, StrategyResponse

WIRE_VERSION = 1


class ProtocolError(AgentFault):
    """A wire-level failure: malformed message, bad version, or timeout."""


def encode_message(msg: SessionMessage) -> str:
    """Serialize one message to a single JSON line (without newline)."""
    payload: dict = {
        "v": WIRE_VERSION,
        "session_id": msg.session_id,
        "round": msg.round,
        "sender": msg.sender,
        "kind": msg.kind,
    }
    if msg.setpoints is not None:
        payload["setpoints"] = msg.setpoints.as_dict()
    if msg.flexibility is not None:
        payload["flexibility"] = msg.flexibility
    if msg.justification is not None:
        payload["justification"] = msg.justification
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def decode_message(line: str) -> SessionMessage:
    """Parse one JSON line into a SessionMessage, checking the version."""
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError("wire", f"malformed JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ProtocolError("wire", "message must be a JSON object")
    if "error" in payload:
        err = payload["error"]
        raise ProtocolError("wire", f"{err.get('code')}: {err.get('message')}")
    version = payload.get("v")
    if version != WIRE_VERSION:
        raise ProtocolError(
            "wire", f"version mismatch: got {version!r}, expected {WIRE_VERSION}"
        )
    try:
        setpoints = payload.get("setpoints")
        return SessionMessage(
            session_id=str(payload["session_id"]),
            round=int(payload["round"]),
            sender=str(payload["sender"]),
            kind=str(payload["kind"]),
            setpoints=(
                SetpointVector.from_mapping(
                    {str(k): float(v) for k, v in setpoints.items()}
                )
                if setpoints is not None
                else None
            ),
            flexibility=(
                float(payload["flexibility"]) if "flexibility" in payload else None
            ),
            justification=(
                str(payload["justification"]) if "justification" in payload else None
            ),
        )
    except ProtocolError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ProtocolError("wire", f"invalid message: {exc}") from None


def _error_line(code: str, message: str) -> str:
    return json.dumps(
        {"v": WIRE_VERSION, "error": {"code": code, "message": message}},
        sort_keys=True,
        separators=(",", ":"),
    )


class WireAgentServer:
    """Serves one strategy over a line-based text stream pair."""

    def __init__(self, strategy: Strategy, feasible: FeasibleSet):
        self.strategy = strategy
        self.feasible = feasible
        # per-session memory of our own proposals; strategies stay stateless
        self._sessions: dict[str, dict[str, SetpointVector]] = {}

    def handle_line(self, line: str) -> str:
        line = line.strip()
        if not line:
            return _error_line("empty", "empty request line")
        try:
            request = decode_message(line)
        except ProtocolError as exc:
            return _error_line("bad_request", exc.reason)
        try:
            reply = self._dispatch(request)
        except ProtocolError as exc:
            return _error_line("bad_request", exc.reason)
        except Exception as exc:  # strategy bugs become protocol errors
            return _error_line("agent_error", str(exc))
        return encode_message(reply)

    def _dispatch(self, request: SessionMessage) -> SessionMessage:
        state = self._sessions.setdefault(request.session_id, {})
        if request.kind == "initial_proposal" and request.setpoints is None:
            ctx = NegotiationContext(feasible=self.feasible, round=request.round)
            proposal = self.strategy.initial_proposal(ctx)
            state["initial"] = proposal
            state["previous"] = proposal
            return SessionMessage(
                request.session_id,
                request.round,
                self.strategy.name,
                "initial_proposal",
                proposal,
            )
        if request.kind == "consensus_update":
            if "initial" not in state:
                raise ProtocolError(
                    self.strategy.name, "consensus_update before initial_proposal"
                )
            bad = self.feasible.first_violation(request.setpoints)
            if bad is not None:
                raise ProtocolError(
                    self.strategy.name,
                    f"reference setpoint for {bad} outside the feasible box",
                )
            ctx = NegotiationContext(
                feasible=self.feasible,
                round=request.round,
                reference=request.setpoints,
                own_initial=state["initial"],
                own_previous=state["previous"],
                suggested_flexibility=request.flexibility,
            )
            response = self.strategy.respond(ctx)
            if response.accept:
                return SessionMessage(
                    request.session_id, request.round, self.strategy.name, "accept"
                )
            state["previous"] = response.setpoints
            return SessionMessage(
                request.session_id,
                request.round,
                self.strategy.name,
                "counter_offer",
                response.setpoints,
                flexibility=response.flexibility,
            )
        if request.kind == "final_resolution":
            self._sessions.pop(request.session_id, None)
            return SessionMessage(
                request.session_id, request.round, self.strategy.name, "accept"
            )
        raise ProtocolError(
            self.strategy.name, f"unsupported request kind {request.kind!r}"
        )

    def serve_streams(self, rfile: IO[str], wfile: IO[str]) -> None:
        for line in rfile:
            wfile.write(self.handle_line(line) + "\n")
            wfile.flush()


def serve_stdio(strategy: Strategy, feasible: FeasibleSet) -> None:
    WireAgentServer(strategy, feasible).serve_streams(sys.stdin, sys.stdout)


def serve_tcp(strategy: Strategy, feasible: FeasibleSet, host: str, port: int):
    """Start a TCP server; returns the server object (serve_forever to run)."""
    server_core = WireAgentServer(strategy, feasible)

    class Handler(socketserver.StreamRequestHandler):
        def handle(self) -> None:
            for raw in self.rfile:
                reply = server_core.handle_line(raw.decode("utf-8"))
                self.wfile.write((reply + "\n").encode("utf-8"))

    return socketserver.ThreadingTCPServer((host, port), Handler)


# -- engine side ---------------------------------------------------------


class _StdioTransport:
    def __init__(self, command: str, timeout: float):
        self.command = command
        self.timeout = timeout
        self.proc: subprocess.Popen | None = None

    def start(self) -> None:
        self.proc = subprocess.Popen(
            shlex.split(self.command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
        )

    def roundtrip(self, line: str) -> str:
        if self.proc is None:
            self.start()
        assert self.proc is not None
        assert self.proc.stdin is not None and self.proc.stdout is not None
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()
        sel = selectors.DefaultSelector()
        sel.register(self.proc.stdout, selectors.EVENT_READ)
        ready = sel.select(self.timeout)
        sel.close()
        if not ready:
            raise TimeoutError(f"no reply within {self.timeout}s")
        reply = self.proc.stdout.readline()
        if not reply:
            raise ConnectionError("agent process closed its output")
        return reply

    def close(self) -> None:
        if self.proc is not None:
            if self.proc.stdin is not None:
                self.proc.stdin.close()
            self.proc.terminate()
            self.proc.wait(timeout=5)
            self.proc = None


class _TcpTransport:
    def __init__(self, host: str, port: int, timeout: float):
        self.address = (host, port)
        self.timeout = timeout
        self.sock: socket.socket | None = None
        self.rfile: IO[str] | None = None

    def start(self) -> None:
        self.sock = socket.create_connection(self.address, timeout=self.timeout)
        self.rfile = self.sock.makefile("r", encoding="utf-8")

    def roundtrip(self, line: str) -> str:
        if self.sock is None:
            self.start()
        assert self.sock is not None and self.rfile is not None
        self.sock.sendall((line + "\n").encode("utf-8"))
        reply = self.rfile.readline()
        if not reply:
            raise ConnectionError("agent socket closed")
        return reply

    def close(self) -> None:
        if self.sock is not None:
            self.sock.close()
            self.sock = None
            self.rfile = None


def _make_transport(endpoint: str, timeout: float):
    if endpoint.startswith("stdio:"):
        return _StdioTransport(endpoint[len("stdio:"):], timeout)
    if endpoint.startswith("tcp:"):
        host, _, port = endpoint[len("tcp:"):].rpartition(":")
        try:
            return _TcpTransport(host, int(port), timeout)
        except ValueError:
            raise ValueError(f"bad tcp endpoint {endpoint!r}") from None
    raise ValueError(f"unknown endpoint scheme: {endpoint!r}")


def call_external_agent(endpoint: str, msg: SessionMessage, timeout: float = 30.0) -> SessionMessage:
    """One-shot request/response against an external agent endpoint."""
    transport = _make_transport(endpoint, timeout)
    try:
        return decode_message(transport.roundtrip(encode_message(msg)))
    finally:
        transport.close()


class ExternalStrategy(Strategy):
    """Engine-side adapter: a remote agent behind the Strategy interface.

    The engines treat it exactly like an in-process strategy; replies
    are validated against the advertised feasible box before use, and a
    missing, malformed, or late reply raises AgentFault.
    """

    def __init__(self, name: str, endpoint: str, timeout: float = 30.0):
        self.name = name
        self.endpoint = endpoint
        self.timeout = timeout
        self._transport = _make_transport(endpoint, timeout)

    def close(self) -> None:
        self._transport.close()

    def _exchange(self, request: SessionMessage) -> SessionMessage:
        try:
            reply_line = self._transport.roundtrip(encode_message(request))
        except ProtocolError:
            raise
        except Exception as exc:
            raise AgentFault(self.name, f"transport failure: {exc}") from exc
        try:
            return decode_message(reply_line)
        except ProtocolError as exc:
            raise ProtocolError(self.name, exc.reason) from None

    def _checked_setpoints(
        self, reply: SessionMessage, feasible: FeasibleSet
    ) -> SetpointVector:
        if reply.setpoints is None:
            raise ProtocolError(self.name, f"{reply.kind} reply without setpoints")
        bad = feasible.first_violation(reply.setpoints)
        if bad is not None:
            raise ProtocolError(
                self.name, f"setpoint for {bad} outside the feasible box"
            )
        return reply.setpoints

    def initial_proposal(self, ctx: NegotiationContext) -> SetpointVector:
        request = SessionMessage("wire", ctx.round, "engine", "initial_proposal")
        reply = self._exchange(request)
        if reply.kind != "initial_proposal":
            raise ProtocolError(self.name, f"expected initial_proposal, got {reply.kind}")
        return self._checked_setpoints(reply, ctx.feasible)

    def respond(self, ctx: NegotiationContext) -> StrategyResponse:
        assert ctx.reference is not None
        request = SessionMessage(
            "wire",
            ctx.round,
            "engine",
            "consensus_update",
            ctx.reference,
            flexibility=ctx.suggested_flexibility,
        )
        reply = self._exchange(request)
        if reply.kind == "accept":
            # an accepting agent stands pat; engines ignore the setpoints
            fallback = ctx.own_previous if ctx.own_previous is not None else ctx.reference
            return StrategyResponse(fallback, reply.flexibility or 0.0, True)
        if reply.kind != "counter_offer":
            raise ProtocolError(self.name, f"expected counter_offer, got {reply.kind}")
        setpoints = self._checked_setpoints(reply, ctx.feasible)
        return StrategyResponse(
            setpoints,
            reply.flexibility if reply.flexibility is not None else 0.0,
            False,
        )


def main(argv: list[str] | None = None) -> int:
    """Serve a shipped strategy over stdio or TCP."""
    from .strategies import build_strategy

    parser = argparse.ArgumentParser(
        prog="python -m deconflict.wire", description=main.__doc__
    )
    parser.add_argument("--scenario", default="default", help="scenario file or bundled name")
    parser.add_argument("--hour", type=int, default=19)
    parser.add_argument("--name", default="agent")
    parser.add_argument("--strategy", default="scheduled")
    parser.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="strategy parameter, repeatable (e.g. objective=cost f0=0.5)",
    )
    parser.add_argument("--tcp", metavar="HOST:PORT", help="serve on TCP instead of stdio")
    args = parser.parse_args(argv)

    scenario = load_scenario(args.scenario)
    feasible = build_feasible_set(scenario, args.hour, scenario.initial_soc)
    params = dict(p.split("=", 1) for p in args.param)
    strategy = build_strategy(args.name, args.strategy, params, scenario, args.hour)
    if args.tcp:
        host, _, port = args.tcp.rpartition(":")
        with serve_tcp(strategy, feasible, host or "127.0.0.1", int(port)) as server:
            server.serve_forever()
    else:
        serve_stdio(strategy, feasible)
    return 0


if __name__ == "__main__":
    sys.exit(main())
