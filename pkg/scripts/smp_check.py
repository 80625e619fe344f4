"""Necessary-condition scan and sign relation under the sign policy, with the
regression-versus-nested adjoint probe table. Takes several minutes at the
default sizes."""

import argparse
import json
from pathlib import Path

from jumpctl.experiments import smp_check
from jumpctl.insurance import SurplusModel


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outer-paths", type=int, default=200)
    ap.add_argument("--inner-paths", type=int, default=500)
    ap.add_argument("--regression-paths", type=int, default=20_000)
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("out/smp"))
    args = ap.parse_args()

    rep = smp_check(SurplusModel(), dt=args.dt, outer_paths=args.outer_paths, inner_paths=args.inner_paths,
                    seed=args.seed, regression_paths=args.regression_paths)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "smp_check.json").write_text(json.dumps(rep.to_dict(), indent=2) + "\n")
    for row in rep.per_time:
        print(row)
    summary = {k: v for k, v in rep.to_dict().items() if k != "adjoint_probe_table"}
    print(json.dumps(summary, indent=2))
    print("passed:", rep.passed())


if __name__ == "__main__":
    main()
