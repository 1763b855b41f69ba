"""Start the local inference service on an ephemeral port, call both
endpoints, and show that identical requests get byte-identical replies.

Requires the model directory from 04_train_models.py.
"""

import json
import sys
import urllib.request
from pathlib import Path

from vulnhunter.engine import Engine
from vulnhunter.service import start_background

MODELS = Path(__file__).parent / "artifacts" / "models"
if not MODELS.exists():
    sys.exit("run demos/04_train_models.py first to create demos/artifacts/models")

engine = Engine.load(MODELS)
server, _ = start_background(engine, port=0)
host, port = server.server_address
base = f"http://{host}:{port}"
print(f"service listening on {base}")

with urllib.request.urlopen(f"{base}/v1/health") as resp:
    print("health:", json.dumps(json.loads(resp.read()), indent=2)[:200])

body = json.dumps({
    "functions": [
        {"id": "clean-1", "code": (
            "int probe_a(int len, char *src) {\n"
            "    len++;\n    src = dst;\n    len += idx;\n    count--;\n}\n"
        )},
        {"id": "planted-1", "code": (
            "int probe_b(int n, char *p) {\n"
            "    n++;\n"
            "    hazard_alpha(p); hazard_alpha(p); hazard_alpha(n); hazard_alpha(p);\n"
            "    hazard_alpha(p); hazard_alpha(n);\n"
            "    idx--;\n}\n"
        )},
    ]
}).encode()

def post():
    req = urllib.request.Request(f"{base}/v1/analyze", data=body,
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return resp.read()

first, second = post(), post()
print("\nbyte-identical replies:", first == second)
payload = json.loads(first)
print(f"{len(payload['diagnostics'])} diagnostic(s) returned")
for d in payload["diagnostics"]:
    print(f"  {d['function_id']}: {d['cwe_id']} cvss={d['cvss']} ({d['band']})")

server.shutdown()
server.server_close()
