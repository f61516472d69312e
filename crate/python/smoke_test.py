"""Smoke test for the mfglg_py extension module.

Build and install first, e.g.

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/mfglg-*.whl
"""

import math

import mfglg_py as mf


def main():
    assert mf.basis(0.0) == 1.0
    assert abs(mf.basis(0.5) - 0.5625) < 1e-15

    g = mf.Grid(1, -1.0, 1.0, 0.1)
    assert len(g) == 21
    cubic = [x[0] ** 3 - x[0] for x in g.nodes()]
    assert abs(g.interpolate(cubic, [0.33]) - (0.33**3 - 0.33)) < 1e-12

    lq = mf.LqOracle()
    assert lq.value(0.25, [0.7]) == 0.0
    assert abs(lq.gradient(0.0, [0.1])[0]) < 1e-15
    assert abs(lq.variance(0.0) - 0.1) < 1e-14

    sol = mf.solve("lq-1d", 0.2)
    assert sol["converged"]
    x = [p[0] for p in sol["x"]]
    mass = 0.2 * sum(sol["m_T"])
    assert abs(mass - 1.0) < 1e-6, mass
    peak = max(range(len(x)), key=lambda i: sol["m_T"][i])
    assert abs(x[peak] - 0.1) < 0.2

    report = mf.run("fp-only-ou", {"dx_list": "0.2,0.1"})
    rows = report["m"]
    assert rows[1]["e_2"] < rows[0]["e_2"]
    assert rows[1]["p_2"] > 2.0 and math.isfinite(rows[1]["p_2"])

    checks = mf.verify()
    assert all(passed for _, passed, _ in checks), [c for c in checks if not c[1]]
    print(f"ok: {len(checks)} checks, lq-1d {sol['iterations']} iterations, ou p_2 {rows[1]['p_2']:.2f}")


if __name__ == "__main__":
    main()
