"""Discrete Poincare constants and their refinement limits.

The uniform periodic measure has the closed-form gap 4 N^2 sin^2(pi/N),
whose limit gives C_P = 1/(4 pi^2).  For the Gaussian equilibrium
N(0, 3) the constant is the variance, 3.
"""

import math

from ultrafast import build_grid, equilibrium, make_weight, richardson, spectral_gap


def constant(kind, n, L=None, wkind="uniform"):
    grid = build_grid(kind, n, L)
    return spectral_gap(equilibrium(make_weight(grid, wkind), 2.0))


print("uniform periodic")
values = []
for n in (4, 32, 64, 128):
    res = constant("periodic1d", n)
    values.append(res.C_P)
    exact = 1.0 / (4 * n * n * math.sin(math.pi / n) ** 2)
    print(f"  N={n:4d}  C_P={res.C_P:.10f}  closed form={exact:.10f}  iterations={res.iterations}")
print(f"  extrapolated {richardson(values[-2:]):.8f}  vs 1/(4 pi^2) = {1 / (4 * math.pi**2):.8f}\n")

print("Gaussian weight, equilibrium N(0, 3)")
L = 6 * math.sqrt(3)
values = [constant("truncated1d", n, L, "quadratic").C_P for n in (200, 400, 800)]
for n, v in zip((200, 400, 800), values):
    print(f"  N={n:4d}  C_P={v:.8f}")
print(f"  extrapolated {richardson(values[-2:]):.8f}")
