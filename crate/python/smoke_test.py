"""Smoke test for the curvph extension module.

Uses an installed `curvph` if importable, otherwise the library built by
`cargo build --release -p curvph-py --features extension-module`.
"""

import json
import math
import pathlib
import shutil
import sys
import tempfile


def load():
    try:
        import curvph
        return curvph
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for profile in ("release", "debug"):
        lib = root / "target" / profile / "libcurvph.so"
        if lib.exists():
            tmp = pathlib.Path(tempfile.mkdtemp())
            shutil.copy(lib, tmp / "curvph.so")
            sys.path.insert(0, str(tmp))
            import curvph
            return curvph
    sys.exit("curvph extension not found; build it first")


def main():
    cv = load()

    m = cv.CurvatureModel.rank_one_symmetric(1.0, 4, 2)
    assert m.operator(0.0) == [[-4.0, 0.0, 0.0], [0.0, -4.0, 0.0], [0.0, 0.0, -1.0]]
    assert m.is_autonomous()

    k = cv.CurvatureModel.fixed("k", [[-1.0, 0.0], [0.0, 0.0]])
    eta, sigma = cv.propagate(k, [1.0, 1.0], [0.0, 1.0], 1.0)
    assert abs(eta[0] - math.cosh(1.0)) < 1e-9 and abs(sigma[0] - math.sinh(1.0)) < 1e-9
    assert abs(eta[1] - 2.0) < 1e-12 and abs(sigma[1] - 1.0) < 1e-12

    rep = cv.criterion_check(m, 2, 1.5, 2000, 7)
    assert rep["verdict"] == "pass", rep
    bad = cv.criterion_check(m, 2, 4.0, 10000, 7)
    assert bad["verdict"] == "fail"

    gap = cv.gap_functions(m, 2)
    assert (gap["alpha_inf"], gap["beta_sup"], gap["suggested_e"]) == (2.0, 1.0, 1.5)
    assert cv.corollary_margin(2.0, 1.0, 1.5) > 0

    lyap = cv.lyapunov_spectrum(m, 50.0, 3)
    for x, e in zip(lyap["exponents"], [-2, -2, -1, 1, 2, 2]):
        assert abs(x - e) < 0.02, lyap["exponents"]
    assert cv.splitting_dims(lyap["exponents"], 0.25) == (2, 2, 2)

    bump = cv.CurvatureModel.non_anosov(1.0, 3, 1, center=5.0, width=0.5, period=10.0)
    cones = cv.cone_invariance_test(bump, 1, 1.5, 20.0, 100, 1)
    assert cones["fraction_retained"] == 1.0
    frac = cv.time_in_bad_set(bump, 0.5, 10.0, 0.01)
    assert 0.0 < frac < 0.1

    try:
        cv.criterion_check(m, 2, -1.0, 10, 1)
    except ValueError as err:
        assert "c must be positive" in str(err)
    else:
        raise AssertionError("negative c accepted")

    code, report, csv = cv.run_config("model = rank_one\na = 1\nn = 4\nr = 2\ntask = gap")
    assert code == 0 and json.loads(report)["result"]["alpha_inf"] == 2.0
    assert csv.splitlines()[0] == "param,lambda_r,lambda_next,gap"

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
