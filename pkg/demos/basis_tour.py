"""Tour of the expansion machinery: quadrature, orthonormal polynomials,
partitions and sampled refinement.
"""

import numpy as np

import uqsubgrad as uq

# ---------------------------------------------------------------
# The measure owns a fixed Gauss-Legendre rule; all norms are exact
# quadratures against it.
# ---------------------------------------------------------------
measure = uq.ThetaMeasure(0.0, 1.0)
print("||theta||_pi on uniform[0,1]:", uq.pi_norm(lambda t: t, measure), "(1/sqrt(3))")

family = uq.legendre_family(measure)
B = family.eval_matrix(measure.nodes, 12)
gram = np.einsum("ni,nj,n->ij", B, B, measure.weights)
print("max Gram deviation from identity (12 polynomials):", np.abs(gram - np.eye(12)).max())

# analysis/synthesis round trip: projecting a function in the span
# recovers its coefficients
rng = np.random.default_rng(0)
e = uq.Expansion(rng.standard_normal((6, 1)), family)
back = uq.analyze(lambda t: uq.synthesize(e, t), family, 6)
print("round-trip coefficient error:", np.abs(back.coefficients - e.coefficients).max())

# truncation splits the energy by Parseval
kept, remainder = uq.truncate(e, 3)
total = uq.expansion_pi_norm(e)
print("parseval check:", uq.expansion_pi_norm(kept) ** 2 + remainder**2 - total**2)

# ---------------------------------------------------------------
# Piecewise-constant families: raw cell values, refinement splits a
# cell at a sampled point without changing the function.
# ---------------------------------------------------------------
part = uq.Partition((0.5,))
pw = uq.piecewise_family(measure, part)
e2 = uq.Expansion(np.array([[2.0], [5.0]]), pw)
print("\npiecewise value at 0.7:", uq.synthesize(e2, 0.7)[0])

finer = uq.refine_partition(part, 0.25)
moved = uq.transfer_coefficients(e2, finer)
print("values preserved after split:", np.allclose(
    uq.synthesize(moved, np.linspace(0.01, 0.99, 50)),
    uq.synthesize(e2, np.linspace(0.01, 0.99, 50)),
))

# expected worst cell measure after n sampled splits decays like log(n)/n
print("\nmax-gap decay under sampled refinement:")
for n in (16, 64, 256):
    vals = []
    for trial in range(400):
        p = uq.Partition()
        r = np.random.default_rng(1000 * n + trial)
        while p.n_cells < n + 1:
            try:
                p = uq.refine_partition(p, r.uniform(0.0, 1.0))
            except uq.PartitionRejection:
                continue
        vals.append(uq.max_gap_measure(p, measure))
    print(f"  n={n:3d}: mean max-gap {np.mean(vals):.4f}  log(n)/n = {np.log(n)/n:.4f}")
