"""Run the whole analysis pipeline on a source file: extract functions,
gate on the detector, localize lines via attention, classify the CWE,
estimate severity, and render the results.

Requires the model directory from 04_train_models.py.
"""

import sys
from pathlib import Path

from vulnhunter.engine import Engine, demo_repair_provider, diagnostics_to_sarif

MODELS = Path(__file__).parent / "artifacts" / "models"
if not MODELS.exists():
    sys.exit("run demos/04_train_models.py first to create demos/artifacts/models")

# one clean function and one planted function, both in the style the desk
# corpus trains on (these small models know only that distribution)
SOURCE = """\
int probe_clean(int acc, char *dst) {
    acc++;
    dst = data;
    acc += size;
    offset--;
    mask = acc;
}

int probe_handler(int count, char *buf) {
    count++;
    hazard_charlie(buf); hazard_charlie(count); hazard_charlie(buf);
    hazard_charlie(buf); hazard_charlie(count); hazard_charlie(buf);
    size--;
    count += mask;
}
"""

engine = Engine.load(MODELS, repair_provider=demo_repair_provider)
result = engine.analyze_source(SOURCE, file="demo.c")

print(f"{len(result.diagnostics)} finding(s)\n")
for d in result.diagnostics:
    print(f"{d.file}:{d.top_lines[0]} {d.function_name} "
          f"(lines {d.function_span[0]}-{d.function_span[1]})")
    print(f"  p(vulnerable) = {d.p_vulnerable:.3f}")
    print(f"  {d.cwe_id} ({d.cwe_confidence:.2f}) / {d.cwe_type} ({d.type_confidence:.2f})")
    print(f"  cvss {d.cvss:.2f} -> {d.band}")
    print(f"  {d.description}")
    print(f"  {d.url}")
    print("  top lines by attention mass:")
    for line, score in d.line_scores[:3]:
        print(f"    line {line}: {score:.3f}")
    if d.repair:
        print(f"  quick fix (line {d.repair.target_line}): {d.repair.replacement.strip()}")

print("\nSARIF rendering (first 400 chars):")
print(diagnostics_to_sarif(result)[:400], "...")
