"""Command line: ler-export --corpus <file> --out <dir> --model <id>."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from ler.errors import LerError

from .align import ExportError
from .export import export_embeddings


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("LER_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(
        prog="ler-export",
        description="Export contextual embeddings for a corpus in the "
                    "pipeline's binary format.",
    )
    parser.add_argument("--corpus", required=True, help="corpus file (jsonl)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--model", required=True,
                        help="model id or local path of the encoder")
    parser.add_argument("--threads", type=int, default=1,
                        help="torch thread count (1 keeps runs reproducible)")
    args = parser.parse_args(argv)
    try:
        count = export_embeddings(args.corpus, args.out, args.model,
                                  threads=args.threads)
    except (ExportError, LerError) as exc:
        module = getattr(exc, "module", "bert_exporter")
        message = exc.message.replace('"', "'")
        print(f'ler-export: error module={module} message="{message}"',
              file=sys.stderr)
        return 1
    print(f"wrote {count} embedding files to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
