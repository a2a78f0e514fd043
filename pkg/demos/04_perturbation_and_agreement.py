# %% [markdown]
# # Perturbed alignment vectors and rater agreement
#
# To test how sensitive people are to errors in the estimated facing
# direction, the alignment vector is jittered inside a box in spherical
# coordinates (polar axis along camera y). Raters then label each rendering,
# and Fleiss' kappa summarises how much they agree beyond chance.

# %%
import numpy as np

from f2f.evaluation import RatingMatrix, fleiss_kappa
from f2f.synth import PERTURB_BOUNDS_DEG, perturb_alignment

z = np.array([0.0, 0.0, -1.0])
for bound in PERTURB_BOUNDS_DEG:
    v = perturb_alignment(z, bound, count=2000, seed=int(bound))
    angle = np.degrees(np.arccos(np.clip(v @ z, -1, 1)))
    print(f"bound {bound:4.1f} deg: mean deviation {angle.mean():5.2f}, max {angle.max():5.2f}")

print("bound 0 is the identity:", np.array_equal(perturb_alignment(z, 0, count=3), np.tile(z, (3, 1))))

# %% [markdown]
# Five raters label twelve renderings as "facing", "partly" or "away".

# %%
rng = np.random.default_rng(0)
truth = rng.integers(0, 3, 12)
labels = [[t if rng.random() < 0.8 else rng.integers(0, 3) for _ in range(5)] for t in truth]
matrix = RatingMatrix.from_labels(labels, categories=[0, 1, 2])
print(matrix.counts)
print(f"kappa = {fleiss_kappa(matrix):.3f}")
print(f"perfect agreement: kappa = {fleiss_kappa([[5, 0, 0], [0, 5, 0], [0, 0, 5]])}")
