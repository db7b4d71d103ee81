"""Grid-convergence table for the b and c PDE oracles against the closed forms.

Writes results/pde_convergence.csv with the interior max relative error of b and
the relative error of c at (0, 66) and (0, 132) for nu = ntau in {100, 200, 400, 800}.

    python3 scripts/pde_convergence.py [--outdir results]
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from mvhbond import REFERENCE_PARAMS, NumericsConfig, c_value
from mvhbond.output import RunManifest, csv_document, write_text
from mvhbond.pde_oracle import GridSpec, b_grid_error, solve_b_pde, solve_c_pde

SIZES = (100, 200, 400, 800)
V_POINTS = np.array([66.0, 132.0])


def run(outdir: Path) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    params = REFERENCE_PARAMS.replace(mu1=0.03)
    num = NumericsConfig()
    c_ref = c_value(params, 0.0, V_POINTS, num).c
    rows, prev = [], None
    for n in SIZES:
        spec = GridSpec(nu=n, ntau=n)
        err_b = b_grid_error(params, solve_b_pde(params, spec))
        c_pde = solve_c_pde(params, spec).interpolate(0.0, V_POINTS)
        rel_c = np.abs(c_pde / c_ref - 1.0)
        rows.append([n, n, err_b, (prev / err_b) if prev else float("nan"),
                     float(rel_c[0]), float(rel_c[1])])
        prev = err_b
    manifest = RunManifest(command="scripts/pde_convergence.py", params_file=None,
                           overrides={"mu1": 0.03}, params=params.to_dict(),
                           numerics=num.__dict__.copy(), output="pde_convergence.csv", seed=None)
    header = ["nu", "ntau", "b_max_rel_error", "b_halving_ratio", "c_rel_error_v66",
              "c_rel_error_v132"]
    path = outdir / "pde_convergence.csv"
    write_text(csv_document(manifest, header, rows), str(path))
    return path


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", type=Path, default=Path(__file__).resolve().parents[1] / "results")
    print(run(ap.parse_args().outdir))
