"""HTTP/1.1 + JSON servers and clients for the provider and cache server."""

from __future__ import annotations

import http.client
import logging
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Dict, List, Optional, Tuple

from . import wire
from .cache_server import CacheServer
from .errors import (ChronoCacheError, ErrorCode, UpstreamError, ValidationError,
                     error_for_code)
from .provider import Provider

log = logging.getLogger(__name__)

_STATUS = {
    ErrorCode.NOT_FOUND.value: HTTPStatus.NOT_FOUND,
    ErrorCode.NO_ENTRY.value: HTTPStatus.NOT_FOUND,
    ErrorCode.VALIDATION.value: HTTPStatus.BAD_REQUEST,
    ErrorCode.UPSTREAM_ERROR.value: HTTPStatus.BAD_GATEWAY,
    ErrorCode.STALE_PERIOD.value: HTTPStatus.CONFLICT,
}

Route = Callable[[dict], wire.Message]


def parse_addr(addr: str) -> Tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise ValidationError(f"address must be host:port, got {addr!r}")
    return host or "127.0.0.1", int(port)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    routes: Dict[Tuple[str, str], Route] = {}

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)

    def _reply(self, status: int, body: str) -> None:
        data = body.encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _dispatch(self, method: str) -> None:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        route = self.routes.get((method, self.path))
        if route is None:
            self._reply(HTTPStatus.NOT_FOUND, wire.dumps({"error": "NOT_FOUND",
                                                          "message": "no such endpoint"}))
            return
        try:
            body = wire.loads(raw) if method == "POST" else {}
            reply = route(body)
        except ChronoCacheError as exc:
            code = exc.code if exc.code in wire.WIRE_ERROR_CODES else ErrorCode.VALIDATION.value
            status = _STATUS.get(code, HTTPStatus.BAD_REQUEST)
            self._reply(status, wire.ErrorReply(code, exc.message).encode())
            return
        except Exception:
            log.exception("handler failed")
            self._reply(HTTPStatus.INTERNAL_SERVER_ERROR,
                        wire.dumps({"error": "UPSTREAM_ERROR", "message": "internal error"}))
            return
        self._reply(HTTPStatus.OK, reply.encode())

    def do_POST(self):
        self._dispatch("POST")

    def do_GET(self):
        self._dispatch("GET")


class Server:
    """ThreadingHTTPServer running on a background thread."""

    def __init__(self, routes: Dict[Tuple[str, str], Route], listen: str = "127.0.0.1:0"):
        handler = type("Handler", (_Handler,), {"routes": routes})
        self.httpd = ThreadingHTTPServer(parse_addr(listen), handler)
        self.httpd.daemon_threads = True
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"{host}:{port}"

    def start(self) -> "Server":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def provider_routes(sp: Provider) -> Dict[Tuple[str, str], Route]:
    def keys(body):
        req = wire.KeysRequest.from_json(body)
        return wire.KeysResponse(sp.params.m, req.t, tuple(sp.send_key(req.user_id, req.t)))

    def content_request(body):
        req = wire.ContentRequest.from_json(body)
        return wire.TagReply(sp.handle_content_request(req.c_name, req.node))

    def cache_request(body):
        req = wire.CacheRequest.from_json(body)
        return wire.CiphertextReply(sp.handle_cache_request(req.tag))

    def advance(body):
        return wire.PeriodReply(sp.advance_period(wire.AdvanceRequest.from_json(body).t))

    def period(body):
        return wire.PeriodReply(sp.t_curr)

    return {
        ("POST", "/v1/keys"): keys,
        ("POST", "/v1/content-request"): content_request,
        ("POST", "/v1/cache-request"): cache_request,
        ("POST", "/v1/admin/advance"): advance,
        ("GET", "/v1/period"): period,
    }


def cache_routes(cs: CacheServer) -> Dict[Tuple[str, str], Route]:
    def content(body):
        req = wire.ContentFetch.from_json(body)
        ct, hit = cs.send_content(req.tag)
        return wire.ContentReply(ct, hit)

    def stats(body):
        s = cs.stats_snapshot()
        return wire.StatsReply(s.hits, s.misses, s.hit_ratio, s.upstream_bytes)

    def reset(body):
        cs.reset_stats()
        return wire.Empty()

    return {
        ("POST", "/v1/content"): content,
        ("GET", "/v1/stats"): stats,
        ("POST", "/v1/admin/reset-stats"): reset,
    }


def serve_provider(sp: Provider, listen: str = "127.0.0.1:0") -> Server:
    return Server(provider_routes(sp), listen)


def serve_cache(cs: CacheServer, listen: str = "127.0.0.1:0") -> Server:
    return Server(cache_routes(cs), listen)


class HttpClient:
    """JSON-over-HTTP caller with one keep-alive connection per thread."""

    def __init__(self, addr: str, timeout: float = 10.0):
        self.host, self.port = parse_addr(addr)
        self.timeout = timeout
        self._local = threading.local()
        self._lock = threading.Lock()
        self.messages = 0

    def _conn(self) -> http.client.HTTPConnection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = self._local.conn = http.client.HTTPConnection(
                self.host, self.port, timeout=self.timeout)
        return conn

    def call(self, method: str, path: str, msg: Optional[wire.Message] = None) -> dict:
        with self._lock:
            self.messages += 1
        body = msg.encode().encode() if msg is not None else None
        headers = {"Content-Type": "application/json"} if body is not None else {}
        for attempt in (0, 1):
            conn = self._conn()
            try:
                conn.request(method, path, body=body, headers=headers)
                resp = conn.getresponse()
                data = resp.read()
                break
            except (http.client.HTTPException, ConnectionError) as exc:
                # stale keep-alive connection; reconnect once
                conn.close()
                self._local.conn = None
                if attempt:
                    raise UpstreamError(f"{self.host}:{self.port} unreachable: {exc}") from exc
            except OSError as exc:
                conn.close()
                self._local.conn = None
                raise UpstreamError(f"{self.host}:{self.port} unreachable: {exc}") from exc
        obj = wire.loads(data)
        if resp.status != HTTPStatus.OK:
            err = wire.ErrorReply.from_json(obj)
            raise error_for_code(err.error, err.message)
        return obj

    def close(self) -> None:
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            conn.close()
            self._local.conn = None


class HttpProviderLink(HttpClient):
    def fetch_keys(self, user_id: str, t: int) -> Tuple[int, List[Tuple[int, bytes]]]:
        reply = wire.KeysResponse.from_json(self.call("POST", "/v1/keys",
                                                      wire.KeysRequest(user_id, t)))
        return reply.m, list(reply.keys)

    def content_request(self, c_name: str, node: int) -> bytes:
        obj = self.call("POST", "/v1/content-request", wire.ContentRequest(c_name, node))
        return wire.TagReply.from_json(obj).tag

    def cache_request(self, tag: bytes) -> bytes:
        obj = self.call("POST", "/v1/cache-request", wire.CacheRequest(tag))
        return wire.CiphertextReply.from_json(obj).ciphertext

    def current_period(self) -> int:
        return wire.PeriodReply.from_json(self.call("GET", "/v1/period")).t_curr

    def advance(self, t: int) -> int:
        obj = self.call("POST", "/v1/admin/advance", wire.AdvanceRequest(t))
        return wire.PeriodReply.from_json(obj).t_curr


class HttpCacheLink(HttpClient):
    def content(self, tag: bytes) -> Tuple[bytes, bool]:
        reply = wire.ContentReply.from_json(self.call("POST", "/v1/content",
                                                      wire.ContentFetch(tag)))
        return reply.ciphertext, reply.hit

    def stats(self) -> wire.StatsReply:
        return wire.StatsReply.from_json(self.call("GET", "/v1/stats"))

    def reset_stats(self) -> None:
        self.call("POST", "/v1/admin/reset-stats", wire.Empty())
