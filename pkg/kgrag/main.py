# kgrag/main.py
import logging
import sys
from typing import List, Optional

import structlog

from kgrag.cli.commands import build_parser
from kgrag.core.errors import ExitCode, KGError, UnresolvedEndpoint, exit_code_for
from kgrag.core.logging import configure_logging

logger = structlog.get_logger(__name__)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors
        return int(exc.code or 0)

    configure_logging(logging.INFO if args.verbose else logging.WARNING)
    try:
        return int(args.handler(args))
    except UnresolvedEndpoint as exc:
        for failure in exc.failures:
            print(f"unresolved {failure.role} {failure.endpoint!r} at {failure.origin}", file=sys.stderr)
        return int(exc.exit_code)
    except (KGError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return int(exit_code_for(exc))
    except Exception:
        logger.exception("unexpected_failure", command=args.command)
        return int(ExitCode.DOMAIN_ERROR)


if __name__ == "__main__":
    sys.exit(main())
