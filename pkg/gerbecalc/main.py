"""
gerbecalc CLI 진입점

    gerbecalc [--log-level L] run <manifest> [--quad-nodes N] [--grid-override N] [--report <path>] [--jobs N]
    gerbecalc cohomology <complex-file> --dim q

종료 코드: 0 = 전부 PASS, 1 = FAIL 있음, 2 = 매니페스트/입력 오류
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from gerbecalc import __version__
from gerbecalc.api.manifest import parse_manifest
from gerbecalc.api.runner import run
from gerbecalc.core.nerve import cohomology, load_complex
from gerbecalc.models.report import RunOptions
from gerbecalc.utils.exceptions import CohomologyError, ManifestError
from gerbecalc.utils.logger import set_level, setup_logger

logger = setup_logger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gerbecalc", description="twisted differential K-theory verification engine")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="DEBUG | INFO | WARNING | ERROR (기본: 보고서를 stdout 에 쓰면 WARNING)")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="매니페스트의 검사 실행")
    run_parser.add_argument("manifest", type=Path)
    run_parser.add_argument("--quad-nodes", type=int, default=None, help="Gauss-Legendre 노드 수")
    run_parser.add_argument("--grid-override", type=int, default=None, help="매니페스트의 격자 크기 대신 사용")
    run_parser.add_argument("--report", type=Path, default=None, help="보고서 파일 (기본 stdout)")
    run_parser.add_argument("--jobs", type=int, default=None, help="동시에 실행할 검사 개수")

    cohomology_parser = commands.add_parser("cohomology", help="단체 복합체의 정수 코호몰로지")
    cohomology_parser.add_argument("complex_file", type=Path)
    cohomology_parser.add_argument("--dim", type=int, required=True, help="코호몰로지 차수 q (0..3)")
    return parser


def command_run(args: argparse.Namespace) -> int:
    try:
        manifest = parse_manifest(args.manifest.read_text(encoding="utf-8"))
        options = RunOptions.resolve(
            manifest, quad_nodes=args.quad_nodes, grid_override=args.grid_override, max_concurrent=args.jobs
        )
        report = run(manifest, options)
    except OSError as e:
        logger.error(f"❌ 매니페스트를 읽을 수 없음: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ManifestError as e:
        logger.error(f"❌ 매니페스트 오류: {e}")
        print(f"error: {args.manifest}: {e}", file=sys.stderr)
        return EXIT_INPUT
    text = report.to_text()
    if args.report is None:
        sys.stdout.write(text)
    else:
        args.report.write_text(text, encoding="utf-8")
        logger.info(f"✅ 보고서 저장: {args.report}")
    return report.exit_code


def command_cohomology(args: argparse.Namespace) -> int:
    try:
        complex_ = load_complex(args.complex_file)
        betti, torsion = cohomology(complex_, args.dim)
    except (OSError, CohomologyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    torsion_text = ",".join(str(d) for d in torsion) or "-"
    sys.stdout.write(f"H{args.dim} betti={betti} torsion={torsion_text}\n")
    return EXIT_PASS


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    quiet = args.command == "cohomology" or args.report is None
    set_level(args.log_level or ("WARNING" if quiet else "INFO"))
    if args.command == "run":
        return command_run(args)
    return command_cohomology(args)


if __name__ == "__main__":
    sys.exit(main())
