"""Relative indices and solution residuals of the shipped wave problems as (J, K) grows."""
import argparse
import json
from pathlib import Path

from relmorse.cli import _wave_problem
from relmorse.index import relative_morse_index
from relmorse.wave import solve_wave

ROOT = Path(__file__).resolve().parents[1]
FIELDS = {"ex_thm41": ("g1", "g2"), "ex_thm43": ("g0", "g3"), "ex_thm42_minus": ("ginf",)}


def study(name: str, sizes, solve: bool):
    cfg = json.loads((ROOT / "configs" / f"{name}.json").read_text())
    for n in sizes:
        cfg["problem"].update(J=n, K=n)
        prob = _wave_problem(cfg)
        pairs = []
        for f in FIELDS[name]:
            p = relative_morse_index(prob.A, prob.multiplication(f))
            pairs.append(f"{f}=({p.index},{p.nullity})")
        line = f"{name:15s} J=K={n:2d} dim={prob.spec.n_modes:4d} " + " ".join(pairs)
        if solve:
            res = solve_wave(prob, cfg.get("method", "reduce_direct"))
            line += f" solutions={len(res.solutions)} residual={max(res.residuals):.1e}" \
                    f" fine={max(res.fine_residuals):.1e}"
        print(line)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 6, 8, 10, 12])
    ap.add_argument("--solve", action="store_true", help="also solve at each truncation")
    args = ap.parse_args()
    for name in FIELDS:
        study(name, args.sizes, args.solve)
