"""Run the pathwise inequality audits through the command-line surface.

Three audits, each against its shipped config:

  * geometry  -- Lipschitz bound of the chaining functional on Brownian paths
  * grr       -- Garsia-Rodemich-Rumsey modulus bound, per path and pair
  * rosenthal -- normalised Rademacher sums against the explicit constant

Artifacts (audit.csv, audit.json, manifest.json) land in one directory
per audit under --out.  Exit code is the worst of the three runs, so a
nonzero status means at least one audit found a violation or failed to
run.  Full run takes about a minute; most of it is the 10^5-replica
Rosenthal sample.
"""

import argparse
import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from holderclt import cli

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"

AUDITS = (
    ("geometry", CONFIGS / "brownian.toml", ["--paths", "100"]),
    ("grr", CONFIGS / "brownian.toml", ["--alpha", "0.4", "--p", "8", "--paths", "100"]),
    ("rosenthal", CONFIGS / "rosenthal.toml", []),
)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/audits", help="artifact root directory")
    ap.add_argument("--seed", type=int, default=None, help="override config seeds")
    args = ap.parse_args()

    worst = 0
    root = pathlib.Path(args.out)
    for kind, config, extra in AUDITS:
        out_dir = root / kind
        argv = ["audit", kind, "--config", str(config), "--out", str(out_dir)] + extra
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        print(f"== audit {kind}: holderclt {' '.join(argv)}")
        code = cli.run(argv)
        summary = json.loads((out_dir / "audit.json").read_text())
        print(f"   exit={code}  violations={summary['violations']}  "
              f"rows={len(summary['rows'])}")
        worst = max(worst, code)

    print("all clean" if worst == 0 else f"worst exit code {worst}")
    return worst


if __name__ == "__main__":
    raise SystemExit(main())
