"""Truncation ladder: localized problems on growing boxes.

Each rung rescales the equilibrium and the initial data to unit mass on
the box of half-width k.  Solutions are compared on the inner interval
[-3, 3]; the L1 differences between consecutive rungs shrink as the boxes
grow.
"""

from ultrafast import Potential, build_grid, equilibrium, localization_study, make_initial, make_weight

r = 2.0
grid = build_grid("truncated1d", 400, 10.0)  # spacing 0.05 nests every rung
eq = equilibrium(make_weight(grid, "quadratic"), r)
f0 = make_initial(eq, "cosine", epsilon=0.3)

study = localization_study(Potential("quadratic").equilibrium_potential(r), f0, r, [4, 6, 8, 10], R=3.0)
print(f"common horizon t_end = {study.t_end:.4g}\n")
print(study.to_csv())
print("monotone:", study.monotone())
