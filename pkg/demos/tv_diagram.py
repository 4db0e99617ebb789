"""T-V points for a family of pure-loss memories, with and without excess noise."""
import sys

import numpy as np

from eitmemory.harness.outputs import emit_outputs
from eitmemory.harness.presets import tv_config
from eitmemory.harness.sweep import sweep

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out/tv"
rows = []
for eps in (0.0, 0.2):
    cfg = tv_config(excess_noise=eps, realizations=2000)
    rows += sweep(cfg, "pure_loss_efficiency", np.linspace(0.05, 0.6, 6), workers=2)
emit_outputs(rows, out)
for r in rows:
    print(f"eta {r['value']:.2f}  T {r['T']:.4f}  V {r['V']:.4f}  {r['region']}")
