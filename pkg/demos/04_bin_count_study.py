"""How many bins does angle regression need?

One "bin" means regressing the raw wrapped angle with an L2 loss; its
errors pile up where targets straddle +-pi. Two or more bins fix the wrap
failure. Over-binning wastes capacity without helping. (Smaller settings
than the packaged defaults so the demo runs in a few seconds; the
`boxlift toy` command runs the full study.)
"""

import numpy as np

from boxlift.geometry import wrap_angle
from boxlift.toy import bin_study, make_dataset, train

rows, _ = bin_study(
    bin_counts=(1, 2, 4, 8), n_train=2000, n_test=1500, epochs=150, seed=0
)
print(f"{'bins':>4}  {'head':<9}  {'median err (rad)':>16}  {'OS':>7}")
for row in rows:
    print(f"{row.bins:>4}  {row.kind:<9}  {row.median_error:>16.4f}  {row.mean_os:>7.4f}")

# Where does the single-bin (scalar L2) head fail? Near the wrap.
train_set = make_dataset(2000, 0.05, seed=0)
test_x, test_y = make_dataset(1500, 0.05, seed=1)
scalar, _ = train(train_set, kind="l2_scalar", epochs=150, seed=0)
errors = np.abs(wrap_angle(scalar.predict(test_x) - test_y))
near_wrap = np.abs(test_y) > 2.7
print(f"\nscalar-head median error near +-pi: {np.median(errors[near_wrap]):.3f} rad")
print(f"scalar-head median error elsewhere: {np.median(errors[~near_wrap]):.3f} rad")
