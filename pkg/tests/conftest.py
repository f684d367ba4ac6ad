import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from gverify.dataset import build_catalog, build_fewshot_pack

FIXTURES = Path(__file__).parent / "fixtures"


class StubServer:
    """Local HTTP server recording JSON requests and replaying canned replies.

    ``responder(path, body)`` returns ``(status, payload)``; a status of
    ``None`` drops the connection without answering.
    """

    def __init__(self, responder):
        self.requests = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"null")
                stub.requests.append({"path": self.path, "headers": dict(self.headers), "body": body})
                status, payload = responder(self.path, body)
                if status is None:
                    self.close_connection = True
                    self.connection.shutdown(2)
                    return
                data = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/v1"
        self.thread = threading.Thread(target=self.httpd.serve_forever, args=(0.05,), daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def stub_server():
    servers = []

    def start(responder):
        server = StubServer(responder).__enter__()
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.__exit__()


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    """A generated catalog and few-shot pack shared across the session."""
    root = tmp_path_factory.mktemp("ws")
    manifest = build_catalog(root / "catalog")
    pack = build_fewshot_pack(root / "fewshot")
    return root, manifest, pack


# -- acceptance reporting ----------------------------------------------------

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_configure(config):
    config._gverify_criterion_times = {}
    config._gverify_criterion_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    match = _CRITERION.search(report.nodeid)
    if not match:
        return
    number, title = int(match.group(1)), match.group(2).replace("_", " ")
    config = item.config
    config._gverify_criterion_times[number] = config._gverify_criterion_times.get(number, 0.0) + report.duration
    previous = config._gverify_criterion_outcomes.get(number, (title, "passed"))[1]
    # a failure in any phase sticks; otherwise the call phase decides
    if previous == "failed" or (report.when != "call" and not report.failed):
        state = previous
    else:
        state = report.outcome
    config._gverify_criterion_outcomes[number] = (title, state)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = config._gverify_criterion_outcomes
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(outcomes):
        title, outcome = outcomes[number]
        verdict = "PASS" if outcome == "passed" else "FAIL" if outcome == "failed" else outcome.upper()
        seconds = config._gverify_criterion_times.get(number, 0.0)
        terminalreporter.write_line(f"criterion {number:>2} {verdict}  {title} ({seconds:.1f}s)")
