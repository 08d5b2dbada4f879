# %% [markdown]
# # Chains: integrating the frame along a line
#
# Restricted to the line y = 0, the normal-form equations become ODEs for
# the rectifying map.  ex10 has a closed-form answer; the running example is
# checked by recomposing the normal form from the integrated chain.

# %%
from ijets import catalog
from ijets.chains import empirical_order, integrate_chain, revalidate

ex10 = catalog.load("ex10")
prob, order, closed = ex10.chain_problem()
traj = integrate_chain(prob)
exact = catalog.closed_form_value(prob, closed)
print("end point", traj.component("Xb")[-1], "closed form", exact)
print("RK4 order estimate", round(empirical_order(prob, exact, "Xb", prob.span, 0.05), 3))

# %%
running = catalog.load("running")
prob, order, _ = running.chain_problem()
traj = integrate_chain(prob)
_, nf = running.frame(running.target_jet(order + 1, catalog.prob_target_spec(running)), order)
report = revalidate(prob, traj, nf)
print("max deviation along the chain:", report.max_deviation)
