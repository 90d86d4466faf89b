#!/usr/bin/env python3
"""Builds the cpdlab extension module and runs a quick end-to-end check.

Usage: python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def build_module(workdir: Path) -> Path:
    subprocess.run(
        ["cargo", "build", "-p", "cpdlab-py", "--features", "extension-module"],
        cwd=REPO,
        check=True,
    )
    built = REPO / "target" / "debug" / "libcpdlab_py.so"
    if not built.exists():
        sys.exit(f"expected build artifact at {built}")
    target = workdir / "cpdlab.so"
    shutil.copy2(built, target)
    return target


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        build_module(workdir)
        sys.path.insert(0, str(workdir))
        import cpdlab

        fmt = cpdlab.Format([5, 4, 3])
        assert fmt.ambient_dim == 60
        assert fmt.segre_dim == 10

        # A rank-1 decomposition is perfectly conditioned.
        one = cpdlab.Rank1Tuple.random(fmt, 1, seed=7)
        res = cpdlab.condition_number(one)
        assert res.kappa is not None and abs(res.kappa - 1.0) < 1e-12, res.kappa
        assert (res.rows, res.cols) == (60, 10)

        # The two computation paths agree on a random tuple.
        t = cpdlab.Rank1Tuple.random(fmt, 2, seed=11)
        direct = cpdlab.condition_number(t).kappa
        oracle = cpdlab.condition_oracle(t)
        assert abs(direct - oracle) / direct < 1e-9, (direct, oracle)

        # Shared-factor constructions are flagged infinite.
        bad = cpdlab.Rank1Tuple.illposed_shared_first(fmt, 3, seed=1)
        assert cpdlab.condition_number(bad).kappa is None
        bad = cpdlab.Rank1Tuple.illposed_shared_third(fmt, 3, seed=2)
        assert cpdlab.condition_number(bad).infinite

        # Distances behave like metrics at zero and at scale.
        assert cpdlab.fubini_study_distance([1.0, 0.0], [2.0, 0.0]) < 1e-12
        quarter_turn = cpdlab.fubini_study_distance([1.0, 0.0], [0.0, 1.0])
        assert abs(quarter_turn - math.pi / 2) < 1e-12
        assert cpdlab.weighted_distance(t, t) < 1e-12

        # Small Monte Carlo run: kappa floor, ccdf shape, quantile, fit.
        kappas = cpdlab.sample_kappas(cpdlab.Format([3, 3, 2]), 2, seed=5, count=2000)
        assert len(kappas) == 2000
        assert all(k >= 1.0 - 1e-12 for k in kappas)
        assert kappas == cpdlab.sample_kappas(
            cpdlab.Format([3, 3, 2]), 2, seed=5, count=2000
        )
        xs, ccdf = cpdlab.estimate_ccdf(kappas, 1)
        assert all(a >= b for a, b in zip(ccdf, ccdf[1:]))
        q = cpdlab.quantile(kappas, 1, 0.5)
        assert xs[0] <= q <= xs[-1] or math.isinf(q)
        fit = cpdlab.tail_fit(xs, ccdf, (0.02, 0.5))
        assert fit["b"] > 0.0 and fit["n_points"] >= 10

        print("smoke test passed")


if __name__ == "__main__":
    main()
