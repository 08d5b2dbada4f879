# %% [markdown]
# # Surfaces under X = f(x), Y = f'(x) y + g(x)
#
# The running catalog entry is a Lie pseudo-group acting on surfaces
# u = u(x, y).  This walk-through goes from its determining equations to
# the normal form of one concrete surface.

# %%
from ijets import catalog
from ijets.system import involutivity

entry = catalog.load("running")
print(entry.title)

# %% [markdown]
# ## Determining equations
# Involutive at order 2: the symbol indices sum to the rank of the
# prolonged symbol.

# %%
verdict = involutivity(*entry.system_pair("group", 2))
print(verdict.text())
print("sum k*beta =", verdict.weighted_indices, " rank at order 3 =", verdict.next_rank)

# %% [markdown]
# ## Reduced system
# Eliminating the fiber jets leaves equations for Xb, Yb, Ub; their
# parametric jets grow like 2n + 4.

# %%
red = entry.reduced(4)
print([red.dimension(n) for n in range(5)])
print(sorted(s.name for s in red.parametric_upto(2)))
print(involutivity(*entry.system_pair("reduced", 2)).text())

# %% [markdown]
# ## Moving frame and normal form
# The cross-section fixes the base point, u_yy = 1 and every u_{x^k}, u_{x^k y}.
# The remaining coefficients of the normalized surface are differential
# invariants of the original one.

# %%
target = entry.target_jet(7)
sol, nf = entry.frame(target, 6)
for name in ("Xb_x", "Ub_xx", "Ub_xy"):
    print(name, "=", sol.named()[name])
for (alpha, J), value in sorted(nf.invariants().items(), key=lambda t: (len(t[0][1]), t[0][1]))[:6]:
    print("u_" + "".join("xy"[j - 1] for j in J), "=", value)
