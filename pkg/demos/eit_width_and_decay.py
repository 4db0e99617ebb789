"""EIT window width versus control power and efficiency versus storage time."""
import math

import numpy as np
from scipy.optimize import curve_fit

from eitmemory.eit_medium import EnsembleParams, eit_fwhm
from eitmemory.harness.config import RunConfig
from eitmemory.harness.run import run_sequence
from eitmemory.signal_synth import RABI_PER_SQRT_MW

params = EnsembleParams()
for p in (5, 10, 20, 40, 80, 140):
    print(f"{p:4d} mW  FWHM {eit_fwhm(params, RABI_PER_SQRT_MW * math.sqrt(p)) / 2 / math.pi / 1e6:.3f} MHz")

cfg = RunConfig(realizations=0)
taus = np.linspace(4e-6, 40e-6, 7)
eff = [run_sequence(cfg.with_value("timing.storage", float(t))).efficiency["efficiency"] for t in taus]
(a, tau_m), _ = curve_fit(lambda x, a, t: a * np.exp(-x / t), taus, eff, p0=(eff[0], 1e-5))
for t, e in zip(taus, eff):
    print(f"storage {t * 1e6:5.1f} us  efficiency {e:.4f}")
print(f"fitted memory time {tau_m * 1e6:.2f} us")
