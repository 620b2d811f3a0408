#!/usr/bin/env python3
"""Early-stopping epoch counts: orthogonalizing vs unconstrained training.

Both models share the data and the initialization/training seeds, so the
difference in epochs isolates the effect of the training-time projection.
"""

import argparse

from semistruct.experiments import (
    ConvergenceConfig,
    run_convergence,
    write_reports_csv,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--p", type=int, default=1)
    ap.add_argument("--q", type=int, default=20)
    ap.add_argument("--overlap", action="store_true",
                    help="let unstructured inputs contain the X columns")
    ap.add_argument("--noise-sd", type=float, default=1.0)
    ap.add_argument("--replicates", type=int, default=5)
    ap.add_argument("--hidden", type=int, nargs="+", default=[100, 50])
    ap.add_argument("--max-epochs", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="convergence_report.csv")
    args = ap.parse_args()

    cfg = ConvergenceConfig(
        n=args.n,
        p=args.p,
        q=args.q,
        overlap=args.overlap,
        noise_sd=args.noise_sd,
        replicates=args.replicates,
        hidden=tuple(args.hidden),
        max_epochs=args.max_epochs,
        seed=args.seed,
        threads=args.threads,
    )
    reports = run_convergence(cfg)
    write_reports_csv(reports, args.out)
    diffs = [
        r.metrics["epoch_diff"] for r in reports if r.method == "Difference"
    ]
    if diffs:
        mean = sum(diffs) / len(diffs)
        print(f"mean epoch difference (constrained - unconstrained): {mean:+.1f}")
    print(f"wrote {args.out} ({len(reports)} reports)")


if __name__ == "__main__":
    main()
