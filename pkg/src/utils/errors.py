#!/usr/bin/env python3
"""
Errors - 统一异常定义

每个异常携带一个稳定的错误码 (code)，CLI 根据异常类型映射退出码:
- 场景解析 / 校验失败 -> 2
- 运行期探测 / 报告错误 -> 3
"""

from typing import Optional


class ChokepointError(Exception):
    """所有项目异常的基类"""

    code = "CHOKEPOINT_ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return f"[{self.code}] {self.message}"


# ==================== netsim ====================

class MalformedSpecError(ChokepointError):
    """拓扑描述不合法（路径缺少瓶颈路由器或路由器重复）"""
    code = "MALFORMED_SPEC"


class UnknownHostError(ChokepointError):
    """源 / 目的主机不在拓扑中"""
    code = "UNKNOWN_HOST"


# ==================== wire ====================

class MalformedDnsError(ChokepointError):
    code = "MALFORMED_DNS"


class MalformedHttpError(ChokepointError):
    code = "MALFORMED_HTTP"


class NotClientHelloError(ChokepointError):
    code = "NOT_CLIENT_HELLO"


class MalformedTlsError(ChokepointError):
    code = "MALFORMED_TLS"


# ==================== probe ====================

class EmptyInputError(ChokepointError):
    code = "EMPTY_INPUT"


class MissingBaselineError(ChokepointError):
    code = "MISSING_BASELINE"


# ==================== harness ====================

class ScenarioParseError(ChokepointError):
    """场景文件无法读取或结构错误，附带行号 / 字段路径"""

    code = "PARSE_ERROR"

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(f"field {field}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.line = line
        self.field = field


class ScenarioValidationError(ChokepointError):
    """场景内容违反不变量，invariant 指明违反的约束"""

    code = "VALIDATION_ERROR"

    def __init__(self, message: str, invariant: str = ""):
        if invariant:
            message = f"{invariant}: {message}"
        super().__init__(message)
        self.invariant = invariant


class PolicyError(ScenarioValidationError):
    """CensorPolicy 不变量被破坏"""
    code = "POLICY_INVALID"


class EmptyReportError(ChokepointError):
    code = "EMPTY_REPORT"


class ReportConsistencyError(ChokepointError):
    """报告中的聚合值无法由原始结论行重算得到"""
    code = "REPORT_INCONSISTENT"


class ProbeRuntimeError(ChokepointError):
    """探测执行期错误，附带探测计划上下文"""

    code = "PROBE_ERROR"

    def __init__(self, message: str, context: str = "", cause: Optional[Exception] = None):
        if context:
            message = f"{context}: {message}"
        super().__init__(message)
        self.context = context
        self.cause = cause
