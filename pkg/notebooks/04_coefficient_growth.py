# %% [markdown]
# # Coefficient growth of a normal form
#
# For an analytic target the normal-form Taylor coefficients should grow at
# most geometrically: |c_J|^(1/|J|) stays bounded.  The CLI writes the same
# table with `ijets normal-form --growth`.

# %%
from ijets import catalog
from ijets.cli import growth_rows

entry = catalog.load("running")
_, nf = entry.frame(entry.target_jet(9), 8)
header, *rows = growth_rows(nf)
print(header)
for dep, order, mag, root in rows:
    print(f"order {order}: max |c| = {float(mag):.3e}, root = {float(root):.3f}")
