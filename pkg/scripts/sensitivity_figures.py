"""Parameter sweeps for b and c~ at t = 0 (drift, market price of risk, volatility, correlation).

Writes to results/:
  mu1_sweep.csv          b strictly increasing in mu1
  theta_bar_sweep.csv    b decreasing in theta_bar for rho > 0
  sigma1_rho{+,-}0.6.csv c~ over sigma1 in [0.05, 0.25] at v = 66 and 133
  rho_sweep.csv          c~ over rho in [-0.6, 0.6] at v = 66 and 132

    python3 scripts/sensitivity_figures.py [--outdir results]
"""
from __future__ import annotations

import argparse
from pathlib import Path

from mvhbond.cli import main as cli

BASE = ["--mu1", "0.02", "--sigma1", "0.15", "--theta-bar", "0.4"]


def _sweep(outdir: Path, name: str, extra: list[str]) -> Path:
    path = outdir / name
    rc = cli(["sensitivity", *extra, "--out", str(path)])
    if rc != 0:
        raise SystemExit(rc)
    return path


def run(outdir: Path) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    return [
        _sweep(outdir, "mu1_sweep.csv", [*BASE, "--param", "mu1", "--range", "-0.05", "0.1", "16",
                                         "--v", "66", "132"]),
        _sweep(outdir, "theta_bar_sweep.csv", [*BASE, "--param", "theta_bar", "--range", "0", "0.8",
                                               "9", "--v", "66", "132"]),
        _sweep(outdir, "sigma1_rho+0.6.csv", [*BASE, "--rho", "0.6", "--param", "sigma1",
                                              "--range", "0.05", "0.25", "21", "--v", "66", "133"]),
        _sweep(outdir, "sigma1_rho-0.6.csv", [*BASE, "--rho", "-0.6", "--param", "sigma1",
                                              "--range", "0.05", "0.25", "21", "--v", "66", "133"]),
        # the correlation study quotes v = 132 for this figure
        _sweep(outdir, "rho_sweep.csv", [*BASE, "--param", "rho", "--range", "-0.6", "0.6", "13",
                                         "--v", "66", "132"]),
    ]


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", type=Path, default=Path(__file__).resolve().parents[1] / "results")
    for p in run(ap.parse_args().outdir):
        print(p)
