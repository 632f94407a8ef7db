"""`model-server` entrypoint."""

from __future__ import annotations

import argparse
import logging
import sys

from .app import create_app
from .backends import BackendError, LocalBackend, MockBackend

DEFAULT_PORT = 8731


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="model-server",
        description="Serve a text-generation endpoint for the coding pipeline.")
    parser.add_argument("--backend", choices=["mock", "local"], default="mock")
    parser.add_argument("--rules", help="canned-rules JSON (mock backend)")
    parser.add_argument("--model-path", help="local model directory (local backend)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=DEFAULT_PORT)
    parser.add_argument("--debug-log", action="store_true",
                        help="log prompt contents (off by default: prompts may "
                             "contain patient text)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.debug_log else logging.WARNING)

    if args.backend == "mock":
        if not args.rules:
            print("model-server: mock backend needs --rules", file=sys.stderr)
            return 2
        try:
            backend = MockBackend.from_file(args.rules)
        except (OSError, ValueError) as exc:
            print(f"model-server: {exc}", file=sys.stderr)
            return 2
    else:
        if not args.model_path:
            print("model-server: local backend needs --model-path", file=sys.stderr)
            return 2
        try:
            backend = LocalBackend(args.model_path)
        except BackendError as exc:
            print(f"model-server: {exc}", file=sys.stderr)
            return 2

    import uvicorn
    app = create_app(backend, debug_log=args.debug_log)
    uvicorn.run(app, host=args.host, port=args.port,
                log_level="info" if args.debug_log else "warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
