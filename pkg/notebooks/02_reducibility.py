# %% [markdown]
# # When does the reduced system see the whole pseudo-group?
#
# Compare the fiber dimensions d(n) of the determining system with the
# reduced dimensions for three small examples.

# %%
from ijets import catalog
from ijets.reduction import reduced_character_check, reducibility_check

for entry_id in ("ex5", "ex99", "xfxu"):
    e = catalog.load(entry_id)
    rep = reducibility_check(e.group, e.reduced(5), range(1, 6))
    verdict = (f"reducible from order {rep.order_of_reducibility}" if rep.reducible
               else "not reducible")
    print(f"{entry_id:5s} d = {rep.d}  reduced = {rep.d_reduced}  {verdict}")

# %% [markdown]
# ex99 is not reducible, yet its reduced Cartan characters agree with the
# characters of the full system in classes 1..p.

# %%
e = catalog.load("ex99")
print([reduced_character_check(e.group, e.reduced(n), n) for n in (2, 3, 4)])
