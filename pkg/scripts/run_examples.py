"""Run every shipped config through the CLI and print a one-line summary each."""
import argparse
import json
from pathlib import Path

from relmorse.cli import main

ROOT = Path(__file__).resolve().parents[1]


def summarize(rep: dict) -> str:
    res = rep.get("result") or {}
    if rep["command"] == "solve":
        return f"method={res['method']} solutions={len(res['solutions'])} max_residual={max(s['wave_residual'] for s in res['solutions']):.2e}"
    if rep["command"] == "spectrum":
        return f"{len(res['eigenvalues'])} eigenvalues"
    if rep["command"] == "flow":
        return f"flow={res['flow']['flow']} index={res['index']['index'] if res['index'] else None}"
    return json.dumps(res)[:80]


def run(out: Path, seed: int):
    for cfg in sorted((ROOT / "configs").glob("*.json")):
        dest = out / cfg.stem
        status = main(["--config", str(cfg), "--output", str(dest), "--seed", str(seed)])
        rep = json.loads((dest / "report.json").read_text())
        line = summarize(rep) if status == 0 else rep.get("refusal") or rep.get("failure")
        print(f"{cfg.stem:16s} exit={status}  {line}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--output", type=Path, default=Path("out/examples"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    run(args.output, args.seed)
