# %% [markdown]
# # The two plants
#
# A torque-limited pendulum (state: angle from upright, angular velocity)
# and a skid-steer robot whose instant centre of rotation sits `x_icr` ahead
# of the axle. Both step forward with a fixed time step and accept batches.

# %%
import numpy as np

from disco.dynamics import make_pendulum, make_skidsteer, rollout

pendulum = make_pendulum()
print(pendulum.name, "dt =", pendulum.dt, "torque bounds", pendulum.control_bounds.tolist())

# %% Hanging pendulum released with full torque for 2 s
traj = rollout(pendulum, [np.pi, 0.0], np.full((40, 1), 2.0), [1.0, 1.0])
print("angle after 2 s:", round(traj[-1, 0], 3), "velocity:", round(traj[-1, 1], 3))

# %% Heavier or longer poles respond more slowly to the same torque
for length, mass in [(0.5, 0.5), (1.0, 1.0), (2.0, 2.0)]:
    end = rollout(pendulum, [np.pi, 0.0], np.full((10, 1), 2.0), [length, mass])[-1]
    print(f"l={length} m={mass}: angle moved {end[0] - np.pi:.3f} rad in 0.5 s")

# %% [markdown]
# The robot drives a circle with constant wheel speeds. With a non-zero
# ICR offset the body slides sideways while turning.

# %%
robot = make_skidsteer()
wheels = np.tile([2.29, 4.38], (300, 1))
for x_icr in (0.0, 0.12, 0.24):
    path = rollout(robot, [0.75, 0.0, np.pi / 2], wheels, [x_icr, 0.06, 0.47])
    radius = np.hypot(path[:, 0], path[:, 1])
    print(f"x_icr={x_icr:.2f}: radius range {radius.min():.3f} .. {radius.max():.3f} m")

# %% Batched evaluation: one call steps many parameter settings at once
params = np.random.default_rng(0).uniform([0.0, 0.03, 0.3], [0.3, 0.08, 0.5], (5, 3))
print(robot.step(np.zeros(3), [3.0, 4.0], params).round(5))
