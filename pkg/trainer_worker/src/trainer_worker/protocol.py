"""Wire protocol: request dispatch and response framing.

Message formatting lives here so the engine never touches stdout. The
serve loop guarantees exactly one terminal response (ready / trained /
predicted / error) per request, with any number of progress lines in
between, and nothing else ever written to the output stream.
"""

import json
import logging

log = logging.getLogger(__name__)

PROTO_VERSION = 1


class RequestError(Exception):
    """Base for failures that become error responses instead of crashes."""

    code = "bad_request"


class BadRequest(RequestError):
    code = "bad_request"


class ModelUnavailable(RequestError):
    code = "model_unavailable"


class OutOfMemory(RequestError):
    code = "oom"


def _write(stream, payload: dict) -> None:
    stream.write(json.dumps(payload, separators=(",", ":")) + "\n")
    stream.flush()


def _error(stream, code: str, detail: str) -> None:
    log.warning("request failed (%s): %s", code, detail)
    _write(stream, {"kind": "error", "code": code, "detail": detail})


def serve(stdin, stdout, engine) -> None:
    """Process requests until shutdown, EOF, or a failed handshake."""
    while True:
        line = stdin.readline()
        if not line:
            log.info("stdin closed, exiting")
            return
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError:
            _error(stdout, "bad_request", "request line is not valid JSON")
            continue
        if not isinstance(request, dict):
            _error(stdout, "bad_request", "request must be a JSON object")
            continue
        kind = request.get("kind")
        if kind == "shutdown":
            log.info("shutdown requested")
            return
        try:
            if kind == "hello":
                got = request.get("proto_version")
                if got != PROTO_VERSION:
                    _error(stdout, "bad_request", f"unsupported proto_version {got!r}")
                    return  # version mismatch aborts the session
                _write(stdout, {"kind": "ready", "proto_version": PROTO_VERSION})
            elif kind == "train":
                trial_id = request.get("trial_id")

                def on_progress(epoch: int, loss: float) -> None:
                    _write(
                        stdout,
                        {"kind": "progress", "trial_id": trial_id, "epoch": epoch, "loss": loss},
                    )

                checkpoint_id, rows, metadata = engine.train(request, on_progress)
                _write(
                    stdout,
                    {
                        "kind": "trained",
                        "trial_id": trial_id,
                        "checkpoint_id": checkpoint_id,
                        "eval_predictions": rows,
                        "metadata": metadata,
                    },
                )
            elif kind == "predict":
                rows = engine.predict(request)
                _write(
                    stdout,
                    {
                        "kind": "predicted",
                        "checkpoint_id": request.get("checkpoint_id"),
                        "predictions": rows,
                    },
                )
            else:
                raise BadRequest(f"unknown request kind {kind!r}")
        except RequestError as exc:
            _error(stdout, exc.code, str(exc))
        except MemoryError:
            _error(stdout, "oom", "out of memory")
        except Exception as exc:  # keep serving; the reply carries the failure
            log.exception("unhandled error while handling %r", kind)
            _error(stdout, "bad_request", f"internal error: {exc}")
