"""
Gradient, conjugate gradient and Quasi-Newton
=============================================

Compare iteration counts of the three descent rules, and the multiplicative
update against the classical additive one, on the same ensemble.
"""

from jointdiag import generate, solve
from jointdiag.metrics import basis_diagnostics

gt = generate(n=20, K=5, snr_db=30, seed=3)

runs = {alg: solve(gt.noisy, algorithm=alg) for alg in ("gd", "cg", "qn")}
target = runs["cg"].final_objective * (1 + 1e-6)
for alg, r in runs.items():
    print(f"{alg}: f = {r.final_objective:.6e}, reaches the CG objective at iteration "
          f"{r.iterations_to_reach(target)}, {r.wall_time:.2f}s")

# QN spends its effort in the inner linear solve instead
inner = sum(row.inner_iters for row in runs["qn"].trace)
print(f"qn inner CG iterations in total: {inner}")

# additive updates U + lambda S stall because U^-1 U^-* becomes ill conditioned
add = solve(gt.noisy, algorithm="gd", update_mode="add", max_iters=2000, rel_tol=0.0)
mult = solve(gt.noisy, algorithm="gd", max_iters=2000, rel_tol=0.0)
print(f"additive GD after 2000 iterations: f = {add.final_objective:.6e}")
print(f"multiplicative GD reaches that at iteration {mult.iterations_to_reach(add.final_objective)}")

cond, inv_rho_add, inv_rho_mult = basis_diagnostics(add.U, A=gt.noisy)
print(f"at the additive solution: cond(U^-1 U^-*) = {cond:.2e}, "
      f"1/rho additive = {inv_rho_add:.2e}, 1/rho multiplicative = {inv_rho_mult:.2e}")
