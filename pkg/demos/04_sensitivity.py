"""How accurate must probability and fulfilment estimates be?

Expected fulfilments rank the operators, but the underlying numbers carry
errors. If two EF ranges overlap, selecting the nominally better action can
be wrong. This script computes EF ranges, checks when two actions remain
reliably ordered, and prints the ratio thresholds required for different
error levels (the quantity behind the grid/contour CSVs of
`uplan sensitivity`).
"""

from uplan import ErrorBoundedEF, distinguishable, ef_range, ratio_threshold
from uplan.sensitivity import sensitivity_grid

close_in = ErrorBoundedEF(probability=0.85, fulfilment=1000.0,
                          probability_error=0.05, fulfilment_error=0.1)
side = ErrorBoundedEF(probability=0.82, fulfilment=1000.0,
                      probability_error=0.05, fulfilment_error=0.1)

for name, action in (("Close_In", close_in), ("Side", side)):
    r = ef_range(action)
    print(f"{name}: EF {r.center:g} in [{r.low:g}, {r.high:g}] "
          f"(max error {r.epsilon_max:g})")

verdict, margin = distinguishable(close_in, side)
print(f"reliably ordered? {verdict} (margin {margin:g})")
print("With 5% probability error and 10% fulfilment error, 850 vs 820 is")
print("far inside the noise: the ranking should not be trusted.\n")

print("Minimum EF ratio for a trustworthy choice (equal error split):")
for gamma, delta in ((0.0, 0.0), (0.1, 0.1), (0.2, 0.3), (0.5, 0.5)):
    print(f"  probability error {gamma:.0%}, fulfilment error {delta:.0%}"
          f" -> EF ratio >= {ratio_threshold(gamma, delta):g}")

print()
rows = sensitivity_grid((0.0, 0.4), (0.0, 0.4), 0.1)
print("threshold grid (gamma down, delta across):")
deltas = sorted({d for _, d, _ in rows})
print("        " + "  ".join(f"{d:5.2f}" for d in deltas))
for gamma in sorted({g for g, _, _ in rows}):
    line = [f"{t:5.2f}" for g, d, t in rows if g == gamma]
    print(f"  {gamma:4.2f}  " + "  ".join(line))
print()
print("The table is symmetric: probability and fulfilment accuracy trade off")
print("one for one, so the axes can be read either way.")
