# V(x, y) = x^2 y^2 has unbounded sublevel sets, yet the spectrum is discrete.
# The raw volume {V <= 1} keeps growing with the box; the effective
# potential's volume does not.

# %%
import math

from landscape_counting import ScalarField, build_grid, landscape, simon, sublevel_volume
from landscape_counting.landscape import effective_potential
from landscape_counting.verify import diagnose_discreteness_polynomial, l1_probe

V = simon()
h = 0.125
for L in (10, 20, 40, 80):
    g = build_grid(2, L, int(round(2 * L / h)) - 1, max_band_entries=math.inf)
    raw = sublevel_volume(ScalarField(g, V(g.coordinates())), 1.0)
    print(f"box {L:3d}: |{{V <= 1}}| = {raw:.3f}")

# %%
for L, n in ((20, 255), (40, 511)):
    g = build_grid(2, L, n, margin_fraction=0.1)
    W = effective_potential(landscape(V, g))
    print(f"box {L:3d}: |{{W <= 1}}| = {sublevel_volume(W, 1.0):.4f}")

# %%
print("nondegenerate in every direction:", diagnose_discreteness_polynomial(V))
probe = l1_probe(V, [5, 10, 20, 40], 40 / 128)
print(probe.verdict, "|", probe.note)
