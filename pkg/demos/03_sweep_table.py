# %% [markdown]
# # The pose x distance evaluation table
#
# Every canonical pose at 1, 2 and 3 m, with per-axis pixel noise at the
# detector's test error. Each frame's setpoint is compared with the
# noiseless facing-camera setpoint at the same distance. Frames the
# geometry rejects (for example a non-positive disparity at long range) are
# counted, not scored.

# %%
import time

from f2f.evaluation import run_sweep
from f2f.synth import DETECTOR_TEST_ERROR_PX, NoiseSpec, Scenario

for sigma in (0.0, 2.0, DETECTOR_TEST_ERROR_PX):
    scenario = Scenario(distances=(1.0, 2.0, 3.0), noise=NoiseSpec(sigma, seed=0), trials=50)
    start = time.perf_counter()
    table = run_sweep(scenario)
    print(f"sigma = {sigma} px  ({scenario.n_frames} frames, {time.perf_counter() - start:.2f} s)")
    print(table.to_text())

# %% [markdown]
# Comparing shapes instead of absolute positions: with ``center_align`` the
# centroids are subtracted before differencing.

# %%
print(run_sweep(Scenario(distances=(1.0, 2.0, 3.0), noise=NoiseSpec(2.0), trials=50),
                center_align=True).to_text())
