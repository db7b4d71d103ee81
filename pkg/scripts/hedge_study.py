"""Monte-Carlo hedging study at (t, v) = (0, 66): quadratic fit and rebalancing bias.

Writes results/hedge_fit.json (7-point initial-wealth sweep with the default
200,000 paths and 500 steps) and results/hedge_steps.csv (error at p0 = b for
125, 250, 500 and 1000 rebalancing steps on 50,000 paths), which shows the O(dt)
bias that the steps-doubling band is meant to cover.

    python3 scripts/hedge_study.py [--outdir results] [--paths N]
"""
from __future__ import annotations

import argparse
from pathlib import Path

from mvhbond import REFERENCE_PARAMS, NumericsConfig, b_price, c_value
from mvhbond.cli import main as cli
from mvhbond.mc_oracle import hedge_once, simulate_paths
from mvhbond.output import RunManifest, csv_document, write_text

V0 = 66.0
STEPS = (125, 250, 500, 1000)


def run(outdir: Path, paths: int = 200_000, study_paths: int = 50_000) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    fit_path = outdir / "hedge_fit.json"
    rc = cli(["hedge", "--v", repr(V0), "--p0-grid", "auto", "--paths", str(paths),
              "--out", str(fit_path)])
    if rc != 0:
        raise SystemExit(rc)
    params, num = REFERENCE_PARAMS, NumericsConfig()
    c = float(c_value(params, 0.0, V0, num).c)
    b = float(b_price(params, 0.0, V0).b)
    rows = []
    for n in STEPS:
        batch = simulate_paths(params, 0.0, V0, 1.0, study_paths, n, num.rng_seed, num.mc_block)
        res = hedge_once(params, 0.0, V0, 1.0, b, batch)
        rows.append([n, res.mean_sq_error, res.std_error, res.mean_sq_error_coarse,
                     res.bias_band, c, (res.mean_sq_error - c) / res.std_error])
    manifest = RunManifest(command="scripts/hedge_study.py", params_file=None, overrides={},
                           params=params.to_dict(), numerics=num.__dict__.copy(),
                           output="hedge_steps.csv", seed=num.rng_seed)
    steps_path = outdir / "hedge_steps.csv"
    write_text(csv_document(manifest, ["n_steps", "mean_sq_error", "std_error",
                                       "mean_sq_error_half_steps", "bias_band", "c", "z"], rows),
               str(steps_path))
    return [fit_path, steps_path]


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", type=Path, default=Path(__file__).resolve().parents[1] / "results")
    ap.add_argument("--paths", type=int, default=200_000)
    a = ap.parse_args()
    for p in run(a.outdir, a.paths):
        print(p)
