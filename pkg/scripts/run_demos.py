"""Run every shipped demo config through the CLI into out/<config name>/."""
import argparse
import json
import sys
import time
from pathlib import Path

from isotorus import cli

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "out"))
    ap.add_argument("names", nargs="*", help="config names (default: all)")
    args = ap.parse_args()
    paths = sorted((ROOT / "configs").glob("*.json"))
    if args.names:
        paths = [p for p in paths if p.stem in args.names]
    worst = 0
    for p in paths:
        command = json.loads(p.read_text())["command"]
        t0 = time.perf_counter()
        code = cli.main([command, "--config", str(p), "--out", str(Path(args.out) / p.stem)])
        print(f"{p.stem:24s} {command:14s} exit {code}  {time.perf_counter() - t0:6.1f}s")
        if p.stem != "mismatched_frequency":
            worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
