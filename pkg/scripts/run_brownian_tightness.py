"""Tightness and Orlicz-envelope audits for Brownian partial sums.

Two bounds on the same ensemble of normalised partial-sum fields:

  1. tightness: the Holder-quotient p-norm of each stage against the
     chained moment bound built from the ball exponent (theta = 2 in
     parameter space) and a sub-gaussian weight psi(p) ~ sqrt(p).
  2. kramer: the Luxemburg norm of pathwise increments under the
     Young conjugate of the empirical log-mgf envelope, against the
     explicit constant C(Phi) = Phi^{-1}(1) / (54 K^2).

Both tables should come out violation-free with wide margins; the
second one also prints the submultiplicativity constant K and C(Phi)
so drift in the envelope estimate is visible.  Runs in ~10 s.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from holderclt import (CltExperiment, FieldModel, PsiFunction,
                       kramer_clt_audit, tightness_audit, write_report_csv,
                       write_report_json)


def print_rows(rows):
    print(f"{'n':>6}  {'statistic':<28} {'value':>10} {'bound':>10}  flag")
    for r in rows:
        print(f"{r.n:>6}  {r.statistic:<28} {r.value:>10.4f} {r.bound:>10.4f}"
              f"  {'VIOLATION' if r.violated else 'ok'}")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=33)
    ap.add_argument("--schedule", type=int, nargs="+", default=[1, 4, 16, 64])
    ap.add_argument("--replicas", type=int, default=500)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--p", type=float, nargs="+", default=[4.0, 8.0])
    ap.add_argument("--out", default="out/brownian_tightness")
    args = ap.parse_args()

    exp = CltExperiment(model=FieldModel.brownian(), grid=args.grid,
                        n_schedule=tuple(args.schedule),
                        replicas=args.replicas, seed=args.seed)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    psi = PsiFunction.power(exponent=0.5, a=2.5)
    tight = tightness_audit(exp, p_grid=tuple(args.p), theta=2.0, psi=psi)
    print(f"tightness: theta={tight.theta}  psi={tight.psi_name}  "
          f"violations={tight.violations}  worst margin={tight.worst_margin:.4f}")
    print_rows(tight.rows)
    write_report_csv(tight, out / "tightness.csv")
    write_report_json(tight, out / "tightness.json")

    print()
    kram = kramer_clt_audit(exp, run_verdict=False)
    print(f"kramer: K={kram.delta2:.6f}  C(Phi)={kram.c_phi_bar:.6f}  "
          f"violations={kram.violations}  worst margin={kram.worst_margin:.4f}")
    print_rows(kram.rows)
    write_report_csv(kram, out / "kramer.csv")
    write_report_json(kram, out / "kramer.json")

    print(f"\nartifacts in {out}/")
    return 1 if (tight.violations or kram.violations) else 0


if __name__ == "__main__":
    raise SystemExit(main())
