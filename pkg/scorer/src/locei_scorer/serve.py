"""linkforge-scorer/1 stdio server.

Handshake: the engine sends hello, we reply ready with the model name. Each
score request carries a target and D candidates; we reply with D finite
scores under the same example_id. Malformed requests get an error reply and
the process stays alive. One request is served at a time per connection;
concurrent engines each run their own process.
"""
from __future__ import annotations

import json
import sys

from .inputs import ScorerInput
from .model import RelevanceModel

PROTOCOL = "linkforge-scorer/1"


def _reply(obj, out) -> None:
    out.write(json.dumps(obj, ensure_ascii=False) + "\n")
    out.flush()


def _score_request(model: RelevanceModel, msg: dict) -> dict:
    target = msg["target"]
    candidates = msg["candidates"]
    if not candidates:
        raise ValueError("no candidates in request")
    items = [
        ScorerInput(
            target_title=target.get("title", ""),
            mentions=tuple(target.get("mentions", ()))[:10],
            target_lead=target.get("lead", ""),
            section_title=c.get("section", ""),
            candidate_text=c["text"],
        )
        for c in candidates
    ]
    scores = model.encode_and_score(items)
    return {"type": "scores", "example_id": msg["example_id"], "scores": scores}


def serve(model: RelevanceModel, name: str = "locei", stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            _reply({"type": "error", "message": f"invalid JSON request: {exc.msg}"}, stdout)
            continue
        msg_type = msg.get("type") if isinstance(msg, dict) else None
        try:
            if msg_type == "hello":
                if msg.get("protocol") != PROTOCOL:
                    _reply(
                        {"type": "error", "message": f"unsupported protocol {msg.get('protocol')!r}"},
                        stdout,
                    )
                else:
                    _reply({"type": "ready", "name": name}, stdout)
            elif msg_type == "score":
                _reply(_score_request(model, msg), stdout)
            elif msg_type == "shutdown":
                return
            else:
                _reply({"type": "error", "message": f"unknown request type {msg_type!r}"}, stdout)
        except (KeyError, TypeError, ValueError) as exc:
            _reply({"type": "error", "message": f"bad request: {exc}"}, stdout)
