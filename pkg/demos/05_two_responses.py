"""
Two outcomes measured at the same visits
========================================

With H responses at J visits the random-effect design is an indicator of the
(response, visit) cell, so q = H * J. The fitted correlation matrix then
splits into J x J blocks; the off-diagonal block holds the correlations
between the two outcomes across visits. This runs the command line tool end
to end on a small synthetic study.
"""

import tempfile
from pathlib import Path

import numpy as np

from cholshrink.cli import main
from cholshrink.io import read_matrix_csv

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    main(["simulate", "--output-dir", str(tmp / "sim"), "--structure", "tridiagonal",
          "--visits", "4", "--responses", "2", "--subjects", "120", "--sigma2", "0.05",
          "--seed", "5"])
    print((tmp / "sim" / "data.csv").read_text().splitlines()[:4])

    main(["fit", "--input", str(tmp / "sim" / "data.csv"), "--output-dir", str(tmp / "fit"),
          "--iters", "3000", "--burnin", "1500", "--seed", "5"])
    print(sorted(p.name for p in (tmp / "fit").iterdir()))

    np.set_printoptions(precision=2, suppress=True)
    print("truth:\n", read_matrix_csv(tmp / "sim" / "truth.csv")[:4, 4:])
    print("cross-correlation block, response 1 x response 2:\n",
          read_matrix_csv(tmp / "fit" / "rho_cross_1_2.csv"))
