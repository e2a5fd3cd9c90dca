"""HTTP wire API over a Session: JSON request/response, one route per operation.

Endpoints (all JSON bodies, explicit "status" field):

    GET  /api/status
    POST /api/corpus                newline-delimited records in the body
    POST /api/gold                  {"assignment": {doc_id: event_id}}
    GET  /api/heatmap?m=20
    GET  /api/cell_sample?row=&day=&n=&m=&seed=
    POST /api/question              {"row_lo":..,"row_hi":..,"day_lo":..,"day_hi":..,"m":..}
    POST /api/judgment              {"token":..,"label":..,"annotator":..}
    POST /api/retrain               optional training overrides
    GET  /api/clustering?tau=
    GET  /api/evaluation?tau=&m=
    GET  /api/feedback?tau=
    GET  /api/model

Errors return HTTP 400 with {"status": "error", "error": msg}; an exhausted
region returns 200 with {"status": "exhausted"}.
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .service import Session, SessionConfig

logger = logging.getLogger(__name__)

_CORS_HEADERS = {
    "Access-Control-Allow-Origin": "*",
    "Access-Control-Allow-Methods": "GET, POST, OPTIONS",
    "Access-Control-Allow-Headers": "Content-Type",
}


def _query_int(query: dict, name: str, default=None):
    if name not in query:
        return default
    return int(query[name][0])


def _query_float(query: dict, name: str, default=None):
    if name not in query:
        return default
    return float(query[name][0])


class ApiHandler(BaseHTTPRequestHandler):
    session: Session  # bound by make_server

    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        logger.debug("%s - %s", self.address_string(), fmt % args)

    # --- plumbing -----------------------------------------------------------

    def _send(self, code: int, payload: bytes, content_type="application/json"):
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        for key, value in _CORS_HEADERS.items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(payload)

    def _send_json(self, code: int, body: dict):
        self._send(code, json.dumps(body, sort_keys=True).encode("utf-8"))

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _read_json(self) -> dict:
        raw = self._read_body()
        if not raw:
            return {}
        body = json.loads(raw.decode("utf-8"))
        if not isinstance(body, dict):
            raise ValueError("request body must be a JSON object")
        return body

    def _handle(self, method: str):
        parsed = urlparse(self.path)
        query = parse_qs(parsed.query)
        try:
            handler = getattr(self, f"_{method}_{parsed.path.strip('/').replace('/', '_')}", None)
            if handler is None:
                self._send_json(404, {"status": "error", "error": f"no route {parsed.path}"})
                return
            handler(query)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            self._send_json(400, {"status": "error", "error": str(exc)})
        except Exception:
            logger.exception("internal error handling %s", self.path)
            self._send_json(500, {"status": "error", "error": "internal error"})

    def do_GET(self):
        self._handle("GET")

    def do_POST(self):
        self._handle("POST")

    def do_OPTIONS(self):
        self._send(204, b"")

    # --- routes --------------------------------------------------------------

    def _GET_api_status(self, query):
        self._send_json(200, self.session.status())

    def _POST_api_corpus(self, query):
        text = self._read_body().decode("utf-8")
        self._send_json(200, self.session.load_corpus_text(text))

    def _POST_api_gold(self, query):
        body = self._read_json()
        assignment = body.get("assignment")
        if not isinstance(assignment, dict):
            raise ValueError("body must contain an 'assignment' object")
        self._send_json(200, self.session.set_gold(assignment))

    def _GET_api_heatmap(self, query):
        payload = self.session.heatmap_payload(m=_query_int(query, "m"))
        self._send(200, payload)

    def _GET_api_cell_sample(self, query):
        body = self.session.cell_sample(
            row=_query_int(query, "row"),
            day=_query_int(query, "day"),
            n=_query_int(query, "n", 10),
            m=_query_int(query, "m"),
            seed=_query_int(query, "seed"),
        )
        self._send_json(200, body)

    def _POST_api_question(self, query):
        body = self._read_json()
        m = body.pop("m", None)
        self._send_json(200, self.session.region_question(body, m=m))

    def _POST_api_judgment(self, query):
        body = self._read_json()
        self._send_json(
            200,
            self.session.submit_judgment(
                token=body.get("token", ""),
                label=body.get("label", ""),
                annotator=body.get("annotator", ""),
            ),
        )

    def _POST_api_retrain(self, query):
        overrides = self._read_json() or None
        self._send_json(200, self.session.retrain(overrides))

    def _GET_api_clustering(self, query):
        self._send_json(200, self.session.clustering_report(tau=_query_float(query, "tau")))

    def _GET_api_evaluation(self, query):
        self._send_json(
            200,
            self.session.evaluation_report(
                tau=_query_float(query, "tau"), m=_query_int(query, "m")
            ),
        )

    def _GET_api_feedback(self, query):
        self._send_json(200, self.session.feedback_report(tau=_query_float(query, "tau")))

    def _GET_api_model(self, query):
        self._send(200, self.session.model_snapshot_json().encode("utf-8"))


def make_server(session: Session, port: int = 0, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """Bind a threaded HTTP server to the session; port 0 picks a free port."""
    handler = type("BoundApiHandler", (ApiHandler,), {"session": session})
    return ThreadingHTTPServer((host, port), handler)


def serve(config: SessionConfig) -> None:
    """Run the service until interrupted, restoring any persisted state."""
    session = Session.restore(config) if config.data_dir else Session(config)
    server = make_server(session, port=config.port, host="0.0.0.0")
    logger.info("serving on port %d", server.server_address[1])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
