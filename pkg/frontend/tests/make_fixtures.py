"""Write service fixtures for the studio integration tests.

All coordinates are quantized to multiples of 1/1024 (dyadic rationals), so
the service's float64 blend followed by the float32 wire cast is exact and
byte-identity assertions hold with no tolerance.
"""

import sys
from pathlib import Path

import numpy as np

from carimorph.mesh import save_mesh
from carimorph.pca import fit_pca, save_model
from carimorph.synthetic import dome_mesh, smooth_displacement_basis

out = Path(sys.argv[1])
out.mkdir(parents=True, exist_ok=True)
q = 1024.0

rng = np.random.default_rng(20240812)
base = dome_mesh(8, 7)
base = base.with_vertices(np.round(base.vertices * q) / q)
basis = smooth_displacement_basis(base, 4, rng)

delta = np.round(basis[:, 0] * 0.1 * q) / q
normal = base.with_vertices(base.vector + delta)
cari = base.with_vertices(base.vector + 2.0 * delta)

corpus = []
for _ in range(12):
    z = rng.standard_normal(4) * 0.1
    disp = np.round((basis @ z) * q) / q
    corpus.append(base.with_vertices(base.vector + disp))

save_model(fit_pca(corpus, d=4), out / "model.cpca")
save_mesh(base, out / "mean.obj")
save_mesh(normal, out / "normal.obj")
save_mesh(cari, out / "cari.obj")
print("fixtures written to", out)
