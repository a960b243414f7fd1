"""Client for tagging backends that live in a child process.

The wire protocol is line-delimited JSON over the child's stdin/stdout:
one request object per line, answered in order, UTF-8. A handshake
(`{"op": "hello"}`) must return the backend name and protocol version 1
before anything else is sent.
"""

from __future__ import annotations

import json
import subprocess
from typing import Optional, Sequence

from ..errors import BackendError, BackendUnreachableError

PROTOCOL_VERSION = 1


class ExternalBackendClient:
    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self.backend_name: Optional[str] = None
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except (OSError, ValueError) as exc:
            raise BackendUnreachableError(
                f"could not start backend {self.command!r}: {exc}"
            ) from exc
        self._hello()

    def _hello(self) -> None:
        reply = self.request({"op": "hello"})
        protocol = reply.get("protocol")
        if protocol != PROTOCOL_VERSION:
            self.close()
            raise BackendError(
                "protocol",
                f"backend speaks protocol {protocol!r}, expected {PROTOCOL_VERSION}",
            )
        self.backend_name = str(reply.get("backend", "external"))

    def request(self, message: dict) -> dict:
        if self._proc.poll() is not None:
            raise BackendUnreachableError("backend process has exited")
        try:
            self._proc.stdin.write(json.dumps(message) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendUnreachableError(f"backend pipe closed: {exc}") from exc
        line = self._proc.stdout.readline()
        if not line:
            raise BackendUnreachableError("backend closed its output stream")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendError("protocol", f"backend sent invalid JSON: {line!r}") from exc
        if not isinstance(reply, dict):
            raise BackendError("protocol", f"backend sent a non-object reply: {line!r}")
        if not reply.get("ok", False):
            raise BackendError(
                str(reply.get("code", "backend_error")),
                str(reply.get("message", "backend reported an error")),
            )
        return reply

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "ExternalBackendClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
