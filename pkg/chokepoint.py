#!/usr/bin/env python3
"""
Chokepoint - 审查网关模拟器与主动测量探测套件

核心功能：
1. 在确定性的多 ISP 模拟网络中部署多层审查中间盒（DNS 投毒、HTTP 过滤、SNI 重置、协议白名单）
2. 从各观测点发起 DNS / HTTP / TLS 主动探测，并与未审查基线比对
3. 用递增 TTL 定位干扰所在跳，汇总各 ISP 的瓶颈共识
4. 输出可复现的 JSON 报告（相同场景 + 种子，字节一致）

退出码: 0 成功；2 场景解析 / 校验失败；3 运行期探测或报告错误

License: MIT
"""

import os
import sys

# 添加项目路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src import __version__  # noqa: E402

EXIT_OK = 0
EXIT_SCENARIO = 2
EXIT_RUNTIME = 3


def build_parser():
    import argparse

    parser = argparse.ArgumentParser(
        prog="chokepoint",
        description="Chokepoint - 审查网关模拟与分层探测",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
  chokepoint validate june2025                       # 校验随包附带的场景
  chokepoint run june2025 --out report.json          # 运行场景并写出报告
  chokepoint run june2025 --captures ./captures      # 同时写出完整抓包
  chokepoint report show report.json                 # 报告摘要
  chokepoint trace june2025 --domain twitter.com --layer dns
        """
    )
    parser.add_argument('--version', action='version', version=f'Chokepoint v{__version__}')
    parser.add_argument('--config', type=str, help='指定配置文件路径')
    parser.add_argument('--debug', action='store_true', help='启用调试模式')

    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='运行场景')
    run.add_argument('scenario', help='场景文件路径或随包场景名')
    run.add_argument('--out', type=str, help='报告输出路径')
    run.add_argument('--captures', type=str, help='完整抓包输出目录')
    run.add_argument('--seed', type=int, help='覆盖场景中的种子')
    run.add_argument('--workers', type=int, help='探测并发度')

    validate = sub.add_parser('validate', help='校验场景')
    validate.add_argument('scenario', help='场景文件路径或随包场景名')

    report = sub.add_parser('report', help='报告相关操作')
    report_sub = report.add_subparsers(dest='report_command', required=True)
    show = report_sub.add_parser('show', help='显示报告摘要')
    show.add_argument('report', help='报告路径')

    trace = sub.add_parser('trace', help='TTL 追踪单个域名')
    trace.add_argument('scenario', help='场景文件路径或随包场景名')
    trace.add_argument('--domain', required=True, help='目标域名')
    trace.add_argument('--layer', required=True, choices=['dns', 'http', 'tls'], help='探测层')
    trace.add_argument('--vantage', type=str, help='只追踪指定观测点')
    trace.add_argument('--max-ttl', type=int, help='最大 ttl')

    return parser


def cmd_run(args, config) -> int:
    from src.harness import load_scenario, run_scenario, write_captures, write_report

    scenario = load_scenario(args.scenario, answer_ttl=config.get("resolver.answer_ttl"))
    workers = args.workers or config.get("workers", 1)
    report = run_scenario(
        scenario,
        seed=args.seed,
        workers=workers,
        max_ttl=config.get("trace.max_ttl"),
        default_ttl=config.get("netsim.default_ttl"),
    )

    out = args.out or os.path.join(config.output_dir(), f"{scenario.name}-{report.seed}.json")
    write_report(report, out)
    if args.captures:
        write_captures(report, args.captures)

    stats = report.stats
    print(f"✅ 报告已写入: {out}")
    print(f"   DNS 投毒比例: {stats.poisoned_fraction:.4f}  放行协议: {', '.join(stats.allowed_protocol_set) or '-'}")
    print(f"   瓶颈共识: {stats.chokepoint_consensus or '-'}  预测不一致: {stats.oracle_disagreements}")
    return EXIT_OK


def cmd_validate(args, config) -> int:
    from src.harness import load_scenario

    scenario = load_scenario(args.scenario, answer_ttl=config.get("resolver.answer_ttl"))
    print(f"✅ 场景有效: {scenario.name}")
    print(f"   域名: {len(scenario.domains)}  观测点: {', '.join(scenario.plan.vantages)}")
    print(f"   瓶颈: {scenario.topology.chokepoint}  白名单模式: {scenario.policy.whitelist_mode}")
    return EXIT_OK


def cmd_report_show(args, config) -> int:
    from src.harness import load_report, render_summary

    print(render_summary(load_report(args.report)))
    return EXIT_OK


def cmd_trace(args, config) -> int:
    from src.harness import load_scenario
    from src.probe import consensus_chokepoint, ttl_trace
    from src.utils.errors import EmptyInputError

    scenario = load_scenario(args.scenario, answer_ttl=config.get("resolver.answer_ttl"))
    world = scenario.world(default_ttl=config.get("netsim.default_ttl"))
    max_ttl = args.max_ttl or scenario.plan.max_ttl or config.get("trace.max_ttl")
    vantages = [args.vantage] if args.vantage else list(scenario.plan.vantages)

    traces = []
    for vantage in vantages:
        result = ttl_trace(args.layer, args.domain.lower(), vantage, world, max_ttl)
        traces.append(result)
        print(f"\n📍 {vantage}  {args.layer}  {args.domain}")
        print("   ttl  outcome")
        for ttl, outcome in result.per_ttl_outcomes:
            print(f"   {ttl:>3}  {outcome.value}")
        print(f"   首个干扰 ttl: {result.first_interfering_ttl or '-'}  路由器: {result.chokepoint_router or '-'}")

    try:
        print(f"\n🔍 共识: {consensus_chokepoint(traces)}")
    except EmptyInputError:
        print("\n🔍 共识: - (没有观测到干扰)")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "validate": cmd_validate,
    "report": cmd_report_show,
    "trace": cmd_trace,
}


def main(argv=None) -> int:
    """主入口函数"""
    args = build_parser().parse_args(argv)

    # 加载配置
    from src.utils.config_manager import DEFAULT_CONFIG_PATH, ConfigManager
    config = ConfigManager(os.path.expanduser(args.config or DEFAULT_CONFIG_PATH))

    # 设置日志
    from src.utils.logger import default_log_file, setup_logger
    log_file = default_log_file(config.get("log_dir")) if config.get("log_to_file") else None
    logger = setup_logger(debug=args.debug, log_file=log_file)
    logger.debug(f"Chokepoint v{__version__} 启动中...")

    from src.utils.errors import ChokepointError, ScenarioParseError, ScenarioValidationError

    try:
        return COMMANDS[args.command](args, config)
    except (ScenarioParseError, ScenarioValidationError) as e:
        print(f"❌ 场景无效: {e}", file=sys.stderr)
        return EXIT_SCENARIO
    except ChokepointError as e:
        print(f"❌ 运行失败: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"❌ 文件错误: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
