"""
Accuracy against the number of moduli
=====================================

A desk-scale sweep: the error falls by roughly eight bits per added
modulus until it reaches the level of plain FP64 matmul.
"""

from pathlib import Path

import numpy as np

from crtgemm.bench import NATIVE, SweepSpec, emit_plot, run_accuracy_sweep

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)
csv_path = out_dir / "accuracy_vs_moduli.csv"

spec = SweepSpec(
    sizes=[(128, 128, 128)],
    phis=[0.5],
    moduli_counts=list(range(6, 19)),
    modes=["fast", "accurate"],
    seeds=list(range(4)),
    output_path=str(csv_path),
)
rows = run_accuracy_sweep(spec)

native = np.median([r["max_rel_err"] for r in rows if r["mode"] == NATIVE])
print(f"plain FP64 matmul: {native:.2e}")
for mode in spec.modes:
    for n in spec.moduli_counts:
        med = np.median([r["max_rel_err"] for r in rows if r["mode"] == mode and r["N"] == n])
        print(f"{mode:9s} N={n:2d}  median max rel err {med:.2e}")

print("plot:", emit_plot(csv_path, "error_vs_N"))
