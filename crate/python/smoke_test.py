"""Smoke test of the Python bindings.

Build and install the extension first:

    pip install maturin
    pip install --no-build-isolation -e crates/python

then run ``python python/smoke_test.py`` from the repository root.
"""

import json
import sys

import ddro_py


def close(a, b, tol=1e-6):
    return abs(a - b) <= tol * max(abs(a), abs(b), 1.0)


def main():
    text = ddro_py.generate(7, t=2, i=3, j=1, k=10)
    assert text == ddro_py.generate(7, t=2, i=3, j=1, k=10), "generation is not deterministic"
    inst = json.loads(text)
    assert inst["version"] == "ddro-instance-v1"
    assert (inst["T"], inst["I"], inst["J"], inst["K"]) == (2, 3, 1, 10)

    pattern = ddro_py.pattern_instance("1-1", seed=0, k=20)
    report = json.loads(ddro_py.solve(pattern, json.dumps({"type": "Type1"})))
    table = json.loads(ddro_py.enumerate(pattern, ty=1))
    assert report["status"] == "converged", report["status"]
    assert close(report["lb"], table["objective"]), (report["lb"], table["objective"])
    print(f"pattern 1-1: sddip {report['lb']:.6f}, enumeration {table['objective']:.6f}")

    t3 = ddro_py.pattern_instance("3-1", seed=0, k=10)
    lower, upper = (json.loads(r) for r in ddro_py.solve_type3_bounds(t3))
    exact = json.loads(ddro_py.enumerate(t3, ty=3))["objective"]
    slack = 1e-6 * max(abs(exact), 1.0)
    assert lower["lb"] <= exact + slack and exact <= upper["ub"] + slack, (lower["lb"], exact, upper["ub"])
    print(f"pattern 3-1: {lower['lb']:.4f} <= {exact:.4f} <= {upper['ub']:.4f}")

    assert ddro_py.is_nonempty(pattern, 1, 2, [1.0, 0.0, 0.0])

    for bad in (lambda: ddro_py.solve("{"), lambda: ddro_py.enumerate(pattern, ty=4), lambda: ddro_py.pattern_instance("9-9")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("invalid input was accepted")

    print("python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
