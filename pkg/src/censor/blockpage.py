#!/usr/bin/env python3
"""
Block Page - 网关本地生成的 403 拦截页

页面本身只包含一个指向 10.10.34.34 的 iframe，每次渲染字节完全一致。
"""

from src.wire.http_codec import HttpResponse

BLOCKPAGE_MARKER = 'iframe src="http://10.10.34.34/'

BLOCKPAGE_BODY = (
    b'<html><head><meta http-equiv="Content-Type" content="text/html; charset=windows-1256">'
    b"<title>M1-6</title></head><body>"
    b'<iframe src="http://10.10.34.34/?type=Invalid Site&policy=MainPolicy" '
    b'style="width: 100%; height: 100%" scrolling="no" marginwidth="0" marginheight="0" '
    b'frameborder="0" vspace="0" hspace="0"></iframe>'
    b"</body></html>"
)

_BLOCKPAGE = HttpResponse(
    status_code=403,
    reason="Forbidden",
    headers=(
        ("Content-Type", "text/html; charset=windows-1256"),
        ("Connection", "close"),
    ),
    body=BLOCKPAGE_BODY,
)


def render_blockpage() -> HttpResponse:
    return _BLOCKPAGE
