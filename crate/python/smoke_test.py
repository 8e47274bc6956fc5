"""Smoke test for the Python extension.

Build and install it first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o target/wheels
    pip install target/wheels/adiabat-*.whl

`maturin develop` does the same inside a virtualenv. Then run `python python/smoke_test.py` from the repository root.
"""

import cmath
import math
import pathlib
import sys
import tempfile

import adiabat

ROOT = pathlib.Path(__file__).resolve().parent.parent


def check(cond, message):
    if not cond:
        print(f"FAIL {message}")
        sys.exit(1)
    print(f"ok   {message}")


def main():
    names = [name for name, _ in adiabat.list_families()]
    check("schwinger" in names and "cycling_lz" in names, "list_families")

    with tempfile.TemporaryDirectory() as out:
        report = adiabat.run(str(ROOT / "scenarios" / "schwinger-adiabatic.toml"), out)
        check(report["adiabatic"] is True, "off-resonant drive is adiabatic")
        eq1 = report["summary"]["max_standard"]
        check(abs(eq1 - math.sin(0.01) / 10.0) < 1e-10, f"standard criterion {eq1:.6e}")
        check(report["summary"]["oracle_deviation"] < 1e-8, "propagator matches closed form")
        check((pathlib.Path(out) / "schwinger-adiabatic" / "summary.json").exists(), "summary.json written")

        bad = (ROOT / "scenarios" / "schwinger-adiabatic.toml").read_text().replace("samples = 2001", "samples = 8")
        try:
            adiabat.run_toml(bad, out)
        except ValueError as e:
            check("samples" in str(e), "too few samples raises ValueError")
        else:
            check(False, "too few samples raises ValueError")

        reports = adiabat.sweep(str(ROOT / "scenarios" / "schwinger-adiabatic.toml"), "omega", [1.0, 2.0], out)
        check(len(reports) == 2, "sweep returns one report per value")

    u = adiabat.schwinger_unitary(10.0, 0.01, 1.0, 0.7)
    det = u[0][0] * u[1][1] - u[0][1] * u[1][0]
    check(abs(abs(det) - 1.0) < 1e-12 and isinstance(u[0][0], complex), "closed-form unitary")
    check(abs(cmath.phase(det)) < 1e-12, "closed-form unitary is special")

    p = adiabat.multipassage(50.0, 1.0, 12.1, [1, 2])
    check(0.005 < p[0] < 0.02 and p[1] <= 4.0 * p[0] * (1 + 1e-9), f"multi-passage p1={p[0]:.4e} p2={p[1]:.4e}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
