"""How a unit halts: progress, the dynamic threshold, and voids.

Each layer's "progress" is the change it makes to the unit's L2 norm.
The running range of observed progress sets the threshold
lambda = alpha * (max - min); a layer whose progress falls below
lambda is a void for that unit. Larger alpha means a more decisive
threshold and more voids.
"""

import numpy as np

from lacvoid import HaltPolicy, ProgressHistory, decide, detect_voids_offline

# a hand-picked progress sequence: one big jump, a dip, two small steps
deltas = [5.0, -1.0, 4.0, 0.1]

for alpha in (0.2, 0.5, 1.0):
    policy = HaltPolicy(alpha=alpha)
    history = ProgressHistory()
    print(f"alpha = {alpha}")
    for t, d in enumerate(deltas, start=1):
        history.append(np.float32([d]))
        decision = decide(history, np.float32([d]), policy)
        status = "VOID" if decision.void[0] else "kept"
        print(f"  layer {t}: delta {d:+5.2f}  lambda {float(decision.threshold_value[0]):5.2f}  -> {status}")
    print()

# the same decisions can be replayed from a recorded sequence at any alpha
print("void sets by alpha (offline replay of the same deltas):")
for alpha in (0.1, 0.3, 0.5, 0.8, 1.0):
    print(f"  alpha {alpha:.1f}: voids {sorted(detect_voids_offline(deltas, alpha)) or 'none'}")
# note the nesting: raising alpha only ever adds voids
