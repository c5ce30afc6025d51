# The scale m(x, V): the radius r at which the average of V over B(x, r)
# times r^2 reaches 1. Compared with the Taylor-coefficient proxy M.

# %%
import numpy as np

from landscape_counting import PolynomialPotential, maximal_M, maximal_m
from landscape_counting.verify import equivalence_m_M, multiscale_sample

x2 = PolynomialPotential({(2,): 1.0})
print("m(0) =", maximal_m(x2, [0.0]), " (2/3)^(1/4) =", (2 / 3) ** 0.25)
print("M(0) =", maximal_M(x2, [0.0]), " 2^(1/4) =", 2 ** 0.25)

# %%
for x in (0.5, 1, 2, 5, 10, 40):
    m, M = maximal_m(x2, [x]), maximal_M(x2, [x])
    print(f"x = {x:5}: m = {m:8.4f}  M = {M:8.4f}  m/M = {m / M:.3f}")

# %%
# m varies on the scale 1/m, so sample log-uniformly in |x|
pts = multiscale_sample(1, 400, 50.0)
for k in (100, 200, 400):
    rep = equivalence_m_M(x2, pts[:k])
    print(k, "points: spread", round(rep.spread, 4))
