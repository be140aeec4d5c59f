import argparse
import logging
import os
import sys

from .engine import DEFAULT_MODEL_MAP, Engine
from .protocol import serve


def _model_override(value: str) -> tuple[str, str]:
    name, sep, source = value.partition("=")
    if not sep or not name or not source:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got {value!r}")
    return name, source


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trainer-worker",
        description="Serve fine-tuning requests as newline-delimited JSON over stdio.",
    )
    parser.add_argument(
        "--model",
        action="append",
        type=_model_override,
        default=[],
        metavar="NAME=PATH",
        help="map a model name to a checkpoint path or hub id (repeatable)",
    )
    parser.add_argument("--checkpoint-dir", help="overrides BEPATH_WORKER_CHECKPOINT_DIR")
    parser.add_argument("--log-level", default="INFO")
    args = parser.parse_args(argv)

    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")
    try:
        import transformers

        transformers.utils.logging.disable_progress_bar()
    except Exception:  # progress bars are cosmetic; never block startup on them
        pass

    model_map = dict(DEFAULT_MODEL_MAP)
    model_map.update(args.model)
    engine = Engine(model_map=model_map, checkpoint_dir=args.checkpoint_dir)
    try:
        serve(sys.stdin, sys.stdout, engine)
    except BrokenPipeError:
        logging.getLogger(__name__).info("client went away, exiting")
    return 0


if __name__ == "__main__":
    sys.exit(main())
