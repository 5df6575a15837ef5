"""Smoke test for the Python bindings.

Build first:
    cargo build --release -p witnesskit-python
    cp target/release/libwitnesskit_py.so python/witnesskit.so
"""

import json
import math

import witnesskit as wk


def qubit_joint_exists(gamma):
    """Independent check with cvxpy: do the noisy Z and X qubit measurements admit a joint POVM?"""
    import cvxpy as cp
    import numpy as np

    eye = np.eye(2)
    z = np.diag([1.0, -1.0])
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    m = [(eye + s * gamma * z) / 2 for s in (1, -1)]
    n = [(eye + s * gamma * x) / 2 for s in (1, -1)]
    g = [[cp.Variable((2, 2), symmetric=True) for _ in range(2)] for _ in range(2)]
    cons = [g[a][b] >> 0 for a in range(2) for b in range(2)]
    cons += [g[a][0] + g[a][1] == m[a] for a in range(2)]
    cons += [g[0][b] + g[1][b] == n[b] for b in range(2)]
    prob = cp.Problem(cp.Minimize(0), cons)
    prob.solve()
    return prob.status == cp.OPTIMAL


def main():
    q = wk.Algebra.full(2)
    assert q.blocks == [2] and q.dim == 4

    ident = wk.Channel.identity(q)
    v = wk.check_compatibility(ident, ident)
    assert not v["compatible"] and v["slack"] > 0.01, v
    w = wk.witness_from_incompatible_pair(ident, ident)
    assert w.detects(ident, ident)

    xi = wk.xi_mm(2)
    m0, n0 = wk.noisy_mub_channels(2, wk.gamma_threshold(2))
    assert abs(xi.evaluate(m0, n0)) < 1e-10
    p1, p2 = wk.noisy_mub_channels(2, 1.0)
    assert xi.detects(p1, p2)

    task, alpha, delta = wk.task_from_witness(xi)
    assert alpha > 0
    post = task.p_post()
    assert task.p_prior_given(p1, p2) > post
    back = wk.witness_from_task(wk.DiscriminationTask.from_json(task.to_json()))
    assert back.detects(p1, p2)

    t0, l0 = wk.cloning_margins(2)
    assert abs(wk.xi_cc_clone(2).evaluate(t0, l0)) < 1e-10
    assert wk.check_compatibility(t0, l0)["joint"] is not None

    estimate, probes = wk.bisect_gamma(2, steps=8)
    assert abs(estimate - 1 / math.sqrt(2)) < 5e-3 and len(probes) == 8

    again = wk.Channel.from_json(ident.to_json())
    assert again.max_diff(ident) == 0.0
    try:
        wk.Channel.from_json(json.dumps({"in": {"blocks": [2]}}))
    except ValueError:
        pass
    else:
        raise AssertionError("malformed channel accepted")

    try:
        import cvxpy  # noqa: F401
    except ImportError:
        print("cvxpy missing, skipping cross-check")
    else:
        for gamma in (0.70, 0.72):
            m, n = wk.noisy_mub_channels(2, gamma)
            ours = wk.check_compatibility(m, n)["compatible"]
            assert ours == qubit_joint_exists(gamma), gamma

    print("smoke test passed")


if __name__ == "__main__":
    main()
