"""Run the replication preset and write summary, traces and T-V point.

    python3 demos/replication_run.py [OUT_DIR]
"""
import json
import sys

from eitmemory.harness.outputs import emit_outputs
from eitmemory.harness.presets import replication_config
from eitmemory.harness.run import run_sequence

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out/replication"
cfg = replication_config()
result = run_sequence(cfg)
for path in emit_outputs(result, out, cfg):
    print("wrote", path)
print(json.dumps(result.row(), indent=2))
