"""Smoke test for the `hessian` extension module.

Build and install first:  pip install --no-build-isolation -e crates/python
Run:                      python3 python/smoke_test.py
"""

import math

import hessian


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    assert hessian.sigma_all([1.0, 2.0, 3.0]) == [1.0, 6.0, 11.0, 6.0]
    close(hessian.sigma_partial(1, [1.0, 2.0, 3.0], 0), 5.0, 0.0)

    values, vectors = hessian.eigh([[2.0, 1.0], [1.0, 2.0]])
    close(values[0], 3.0, 1e-12)
    close(values[1], 1.0, 1e-12)
    assert len(vectors) == 2

    cone = hessian.Cone("gamma_k", 2, 3)
    assert cone.contains([1.0, 1.0, 0.0])
    assert not cone.contains([1.0, -1.0, -1.0])

    ma = hessian.Operator("ma", 2)
    close(ma.eval([4.0, 1.0]), 2.0, 1e-12)
    close(sum(ma.normalize([4.0, 1.0])), 2.5, 1e-12)
    value, lin = ma.linearize([[4.0, 0.0], [0.0, 1.0]])
    close(value, 2.0, 1e-12)
    close(lin[0][0], 0.25, 1e-12)
    try:
        hessian.Operator("quotient", 3, k=2, l=2)
    except hessian.HessianError:
        pass
    else:
        raise AssertionError("l = k must be rejected")

    sol = hessian.solve(ma, hessian.Domain.unit_ball(2), 1.0 / 32.0)
    assert sol.admissible and sol.residual_max <= 1e-10
    close(sol([0.0, 0.0]), -0.5, 1e-10)
    assert sol.to_csv().startswith("x,y,u\n")
    assert sol.c0_check()["holds"]
    assert sol.subsolution_ordering()["holds"]
    assert sol.check_condition("cns", R=2.0)["satisfied"]
    est = sol.estimate()
    assert math.isfinite(est["functional_sup"])

    k2 = hessian.Operator("khessian", 3, k=2)
    ball = hessian.solve(k2, hessian.Domain.unit_ball(3), 1.0 / 16.0)
    close(ball([0.0, 0.0, 0.0]), -1.0 / (2.0 * math.sqrt(3.0)), 5e-3)

    rows = hessian.refinement_study(ma, hessian.Domain.unit_box(2), [1 / 16, 1 / 32, 1 / 64])
    assert rows[-1]["estimate"]["stabilization_ratio"] <= 0.1

    bd = hessian.blowdown_radial(0.5, 2, [1.0, 2.0, 4.0, 8.0])
    assert all(r["diameter_ok"] and r["invariance_defect"] <= 1e-12 for r in bd["rows"])

    audit = k2.audit(2000, 7)
    assert audit["total_violations"] == 0, audit

    rep = hessian.check_k_hessian_lower_bound([5.0, 5.0, -2.0], 2, 10.0)
    assert rep["satisfied"] and rep["conclusion_holds"]

    print("smoke test passed")


if __name__ == "__main__":
    main()
