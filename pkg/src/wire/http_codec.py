#!/usr/bin/env python3
"""
HTTP Codec - HTTP/1.1 请求头解析与响应渲染

解析只覆盖请求头（到 CRLFCRLF 为止），请求体视为不透明字节。
头部名称的大小写原样保留，审查器的大小写敏感匹配依赖这一点。
"""

import re
from dataclasses import dataclass, field
from typing import Optional, Tuple

from src.utils.errors import MalformedHttpError

CRLF = b"\r\n"
HEAD_TERMINATOR = b"\r\n\r\n"

CANONICAL_METHODS = ("GET", "HEAD", "POST", "PUT", "DELETE", "CONNECT", "OPTIONS", "TRACE", "PATCH")

# 请求行: 方法 SP 目标 SP 版本
_REQUEST_LINE = re.compile(rb"^([A-Za-z]+) (\S+) (HTTP/1\.[01])$")
_STATUS_LINE = re.compile(rb"^(HTTP/1\.[01]) (\d{3})(?: (.*))?$")

REASONS = {
    200: "OK",
    301: "Moved Permanently",
    302: "Found",
    400: "Bad Request",
    403: "Forbidden",
    404: "Not Found",
    500: "Internal Server Error",
}

Header = Tuple[str, str]


@dataclass(frozen=True)
class HttpRequest:
    """HTTP 请求头"""
    method: str
    path: str
    version: str = "HTTP/1.1"
    headers: Tuple[Header, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "headers", tuple(tuple(h) for h in self.headers))

    def header(self, name: str) -> Optional[str]:
        """按名称查找首个头部（名称比较不区分大小写）"""
        wanted = name.lower()
        for key, value in self.headers:
            if key.lower() == wanted:
                return value
        return None

    @property
    def host(self) -> Optional[str]:
        """Host 头的主机部分（去掉端口，保留原始大小写）"""
        value = self.header("host")
        if value is None:
            return None
        return value.rsplit(":", 1)[0] if value.count(":") == 1 else value


@dataclass(frozen=True)
class HttpResponse:
    """HTTP 响应"""
    status_code: int
    reason: str = ""
    headers: Tuple[Header, ...] = field(default_factory=tuple)
    body: bytes = b""

    def __post_init__(self):
        if not 100 <= self.status_code <= 599:
            raise MalformedHttpError(f"状态码超出范围: {self.status_code}")
        if not self.reason:
            object.__setattr__(self, "reason", REASONS.get(self.status_code, ""))
        object.__setattr__(self, "headers", tuple(tuple(h) for h in self.headers))


def _parse_headers(lines) -> Tuple[Header, ...]:
    headers = []
    for raw in lines:
        if not raw:
            continue
        name, sep, value = raw.partition(b":")
        if not sep or not name or name != name.strip():
            raise MalformedHttpError(f"头部格式错误: {raw[:60]!r}")
        headers.append((name.decode("latin-1"), value.strip(b" \t").decode("latin-1")))
    return tuple(headers)


def parse_http_request(data: bytes) -> HttpRequest:
    """
    解析请求头

    Raises:
        MalformedHttpError: 缺少请求行或 CRLFCRLF 终止符
    """
    end = data.find(HEAD_TERMINATOR)
    if end < 0:
        raise MalformedHttpError("请求头缺少 CRLFCRLF 终止符")

    lines = data[:end].split(CRLF)
    match = _REQUEST_LINE.match(lines[0])
    if not match:
        raise MalformedHttpError(f"请求行格式错误: {lines[0][:60]!r}")

    method, path, version = (part.decode("latin-1") for part in match.groups())
    return HttpRequest(method=method, path=path, version=version, headers=_parse_headers(lines[1:]))


def serialize_http_request(request: HttpRequest, body: bytes = b"") -> bytes:
    """序列化请求，头部名称逐字节保留"""
    head = f"{request.method} {request.path} {request.version}\r\n"
    for name, value in request.headers:
        head += f"{name}: {value}\r\n"
    return head.encode("latin-1") + CRLF + body


def render_http_response(response: HttpResponse) -> bytes:
    """渲染 HTTP/1.1 响应，Content-Length 以实际 body 为准"""
    head = f"HTTP/1.1 {response.status_code} {response.reason}\r\n"
    for name, value in response.headers:
        if name.lower() == "content-length":
            continue
        head += f"{name}: {value}\r\n"
    head += f"Content-Length: {len(response.body)}\r\n"
    return head.encode("latin-1") + CRLF + response.body


def parse_http_response(data: bytes) -> HttpResponse:
    """解析响应，body 按 Content-Length 截取"""
    end = data.find(HEAD_TERMINATOR)
    if end < 0:
        raise MalformedHttpError("响应头缺少 CRLFCRLF 终止符")

    lines = data[:end].split(CRLF)
    match = _STATUS_LINE.match(lines[0])
    if not match:
        raise MalformedHttpError(f"状态行格式错误: {lines[0][:60]!r}")

    headers = _parse_headers(lines[1:])
    body = data[end + len(HEAD_TERMINATOR):]
    for name, value in headers:
        if name.lower() == "content-length":
            try:
                length = int(value)
            except ValueError:
                raise MalformedHttpError(f"Content-Length 非法: {value}")
            if length > len(body):
                raise MalformedHttpError("响应体被截断")
            body = body[:length]
            break

    return HttpResponse(
        status_code=int(match.group(2)),
        reason=(match.group(3) or b"").decode("latin-1"),
        headers=headers,
        body=body,
    )


def looks_like_http_request(payload: bytes) -> bool:
    """负载以已知方法开头（方法名不区分大小写）且首行符合请求行语法"""
    line, sep, _ = payload.partition(CRLF)
    if not sep:
        return False
    match = _REQUEST_LINE.match(line)
    return bool(match) and match.group(1).decode("ascii").upper() in CANONICAL_METHODS
