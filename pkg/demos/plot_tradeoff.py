"""
Security versus performance trade-off
=====================================

Evaluate the analytic cost model for a 100-line program and sweep the
program size to see how the secured metrics scale.
"""

import numpy as np

from trustengine.analysis import AnalysisInput, secured_metrics, sweep, sweep_csv

# a single point: 100 lines at 2 operations per line, every property
# costing one added operation per ten original ones
result = secured_metrics(AnalysisInput(n=100, k=2, l=(10, 10, 10, 10)))
for key, value in result.as_dict().items():
    print(f"{key:>24s}  {value:.6g}")

# the secured performance is a constant multiple of the baseline,
# 1 + sum(1/l) = 1.4 here, whatever the size of the program
table = sweep("10:1000:10", k=2, l=(10, 10, 10, 10))
ratio = table[:, 3] / table[:, 1]
print("perf ratio min/max:", ratio.min(), ratio.max())

# the raw secured Sec is negative for tiny programs and climbs toward 1;
# the clamped column pins those early rows at 0
first_positive = table[np.argmax(table[:, 4] > 0), 0]
print("secured Sec first positive at n =", int(first_positive))

# as the formulas are written, the secured Sec always trails the baseline
print("gap at n=1000:", table[-1, 2] - table[-1, 4])

# the table is ready for any plotting tool
print(sweep_csv(table[:3]), end="")
