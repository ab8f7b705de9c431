"""
Driving the simulator by hand
=============================

A highway episode under a fixed heuristic, printing the 5x5 observation
the agent sees and the per-step reward.
"""

import numpy as np

from rldefense.envsim import Action, DrivingEnv, highway_config, merge_config

np.set_printoptions(precision=3, suppress=True)

cfg = highway_config()
env = DrivingEnv(cfg)
obs = env.reset(seed=3)

# row 0 is the ego car; rows 1-4 the nearest cars, relative to it
# columns: present, x, y, vx, vy
print(obs)

total = 0.0
for t in range(cfg.duration_steps):
    # speed up unless someone is close ahead in our lane
    ahead = (obs[1:, 0] == 1) & (np.abs(obs[1:, 2]) < 0.05) & (obs[1:, 1] > 0) & (obs[1:, 1] < 0.35)
    action = Action.SLOWER if ahead.any() else Action.FASTER
    res = env.step(action)
    total += res.reward
    obs = res.observation
    if res.done:
        break
print(f"steps {t + 1}  return {total:.2f}  crashed {res.crashed}")

# the merge scenario starts on a ramp (lane 0) that ends ahead
env = DrivingEnv(merge_config())
obs = env.reset(seed=3)
print("ramp ends at normalized x =", -obs[0, 1])
res = env.step(Action.LANE_LEFT)
print("after LANE_LEFT, ego lane:", env.lane[0])
