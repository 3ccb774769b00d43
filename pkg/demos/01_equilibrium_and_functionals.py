"""Equilibrium, free energy and the two-sided gap bounds.

Builds the Gaussian weight on a truncated line, forms its equilibrium
m = gamma * rho^(1/(r+1)), and evaluates the energy gap, chi-squared
distance and dissipation for a few perturbations of m.  The sandwich
k1 chi2 <= gap <= k2 chi2 is printed next to each value.
"""

from ultrafast import build_grid, equilibrium, make_initial, make_weight, spectral_gap, verify_bounds

r = 2.0
grid = build_grid("truncated1d", 400, 9.0)
weight = make_weight(grid, "quadratic", sigma=1.0)
eq = equilibrium(weight, r)
print(f"gamma = {eq.gamma:.6f}   pressure level rho/m^(r+1) = {eq.pressure_level:.4f}")

C_P = spectral_gap(eq).C_P
print(f"discrete Poincare constant of m: {C_P:.5f}\n")

print(f"{'epsilon':>8} {'c':>7} {'C':>7} {'k1*chi2':>11} {'gap':>11} {'k2*chi2':>11} {'K*I - gap':>11}")
for eps in (0.05, 0.2, 0.4, 0.7):
    f = make_initial(eq, "cosine", epsilon=eps)
    rep = verify_bounds(f, eq, weight, C_P)
    print(f"{eps:8.2f} {rep.c:7.3f} {rep.C:7.3f} {rep.k1 * rep.chi2:11.3e} {rep.gap:11.3e} "
          f"{rep.k2 * rep.chi2:11.3e} {rep.control_slack:11.3e}  pass={rep.passed}")

# The constants degrade as the sandwich [c, C] widens, which is visible in
# the growing distance between the lower and upper columns.
