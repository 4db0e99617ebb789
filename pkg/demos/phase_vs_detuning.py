"""Retrieved phase against two-photon detuning and against input phase."""
import math
import os
import sys

import numpy as np

from eitmemory.harness.config import RunConfig
from eitmemory.harness.outputs import write_csv
from eitmemory.harness.run import run_sequence

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
cfg = RunConfig(realizations=0).with_value("control.power", 40.0)

rows = []
for khz in np.linspace(-3, 3, 13):
    r = run_sequence(cfg.with_value("larmor_offset", 2 * math.pi * khz * 1e3))
    rows.append({"offset_kHz": khz, "phase": r.phases["retrieved_minus_input"]})
phases = np.unwrap([r["phase"] for r in rows])
slope = np.polyfit([r["offset_kHz"] for r in rows], phases, 1)[0]
print(f"retrieved phase slope {slope:.4f} rad/kHz")

rows2 = []
for phi in np.arange(8) * math.pi / 4:
    ph = run_sequence(cfg.with_value("signal.phase", float(phi))).phases
    rows2.append({"set_phase": phi, "input_phase": ph["input"], "retrieved_phase": ph["retrieved"]})

os.makedirs(out, exist_ok=True)
write_csv(f"{out}/phase_vs_offset.csv", rows, ("offset_kHz", "phase"))
write_csv(f"{out}/phase_transfer.csv", rows2, ("set_phase", "input_phase", "retrieved_phase"))
