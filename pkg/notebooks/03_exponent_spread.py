"""
Wide exponent ranges: fast against accurate scaling
===================================================

The fast mode bounds each dot product with the Cauchy-Schwarz inequality,
which is loose when entries span many binades.  The accurate mode bounds
it with an int8 product of rounded-up magnitudes and keeps more bits.
"""

from pathlib import Path

import numpy as np

from crtgemm import gen_matrix
from crtgemm.bench import SweepSpec, emit_plot, run_accuracy_sweep

M = gen_matrix(200, 200, 4.0, seed=3)
exps = np.log2(np.abs(M[M != 0]))
print(f"phi=4 entries span {exps.max() - exps.min():.0f} binades")

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)
csv_path = out_dir / "exponent_spread.csv"
spec = SweepSpec(
    sizes=[(128, 128, 128)],
    phis=[0.0, 0.5, 1.0, 2.0, 4.0],
    moduli_counts=[13, 15, 17],
    modes=["fast", "accurate"],
    seeds=[0, 1, 2],
    output_path=str(csv_path),
)
rows = run_accuracy_sweep(spec)
for n in spec.moduli_counts:
    for phi in spec.phis:
        med = {m: np.median([r["max_rel_err"] for r in rows if r["mode"] == m and r["N"] == n and r["phi"] == phi])
               for m in spec.modes}
        print(f"N={n} phi={phi}: fast {med['fast']:.2e}  accurate {med['accurate']:.2e}")

print("plot:", emit_plot(csv_path, "error_vs_phi"))
