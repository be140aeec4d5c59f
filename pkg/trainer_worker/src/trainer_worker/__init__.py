"""Out-of-process fine-tuning worker.

Reads newline-delimited JSON requests on stdin, writes responses on
stdout, and keeps everything else (logs, library chatter) on stderr.
One request is in flight at a time; callers that want parallelism spawn
more workers.
"""

__version__ = "0.1.0"

from .protocol import PROTO_VERSION, serve

__all__ = ["PROTO_VERSION", "serve", "__version__"]
