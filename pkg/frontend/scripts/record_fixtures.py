"""Record real service responses as byte-exact fixtures for the extension
tests.

Reuses the model directory from demos/04_train_models.py (run that first)
and captures the verbatim response bodies the service produced, so the
vitest stub replays exactly what a live vulnhunter service sends.
"""

import json
import sys
import urllib.request
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT / "src"))

from vulnhunter.corpus import SyntheticSpec, generate_synthetic  # noqa: E402
from vulnhunter.engine import Engine, demo_repair_provider  # noqa: E402
from vulnhunter.service import start_background  # noqa: E402

MODELS = ROOT / "demos" / "artifacts" / "models"
OUT = Path(__file__).resolve().parents[1] / "test" / "fixtures"

if not MODELS.exists():
    sys.exit("run demos/04_train_models.py first to create demos/artifacts/models")

records, _ = generate_synthetic(SyntheticSpec(n_records=400, n_cwe_ids=6,
                                              n_cwe_types=3, seed=42))
engine = Engine.load(MODELS, repair_provider=demo_repair_provider)


def diagnose(code: str):
    result = engine.analyze_functions([("probe", code)])
    return result.diagnostics[0] if result.diagnostics else None


# a planted record whose diagnostic carries a repair (top line holds the
# pattern), and a clean record the detector ignores
planted = next(
    r for r in records if r.vulnerable
    and (d := diagnose(r.code)) is not None and d.p_vulnerable > 0.9 and d.repair is not None
)
clean = next(r for r in records if not r.vulnerable and diagnose(r.code) is None)

server, _ = start_background(engine, port=0)
host, port = server.server_address
base = f"http://{host}:{port}"


def record(name: str, path: str, payload: dict | None = None) -> None:
    if payload is None:
        req = urllib.request.Request(f"{base}{path}")
    else:
        req = urllib.request.Request(
            f"{base}{path}",
            data=json.dumps(payload).encode("utf-8"),
            headers={"Content-Type": "application/json"},
        )
    with urllib.request.urlopen(req) as resp:
        body = resp.read().decode("utf-8")
        fixture = {
            "request": payload,
            "status": resp.status,
            "body": body,
        }
    out = OUT / f"{name}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(fixture, indent=2, sort_keys=True) + "\n")
    print(f"recorded {name}: status {fixture['status']}, {len(body)} bytes")


record("health", "/v1/health")
record("analyze_planted", "/v1/analyze",
       {"file_text": planted.code, "file": "file:///planted.c"})
record("analyze_clean", "/v1/analyze",
       {"file_text": clean.code, "file": "file:///clean.c"})

server.shutdown()
server.server_close()
print(f"fixtures written to {OUT}")
