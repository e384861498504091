# SPDX-License-Identifier: Apache-2.0
"""Smoke test of the `slowbond` extension module."""

import json
import math

import slowbond


def main() -> None:
    line = slowbond.BetaRegime(0.0)
    robin = slowbond.BetaRegime(1.0, 2.0)
    neumann = slowbond.BetaRegime(math.inf)
    assert (line.kind, robin.kind, neumann.kind) == ("line", "robin", "neumann")

    gauss = slowbond.TestFunction.hermite_gaussian([1.0])
    assert abs(gauss.eval(0.5) - math.exp(-0.25)) < 1e-15
    assert abs(gauss.eval(0.5, k=1) + math.exp(-0.25)) < 1e-15

    # Heat flow of exp(-x^2) on the line: (1 + 4t)^(-1/2) exp(-x^2 / (1 + 4t)).
    t = 0.3
    evolved = gauss.evolve(line, t)
    expected = math.exp(-0.49 / (1 + 4 * t)) / math.sqrt(1 + 4 * t)
    assert abs(evolved.eval(0.7) - expected) < 1e-12

    odd = slowbond.TestFunction.hermite_gaussian([0.0, 1.0])
    assert slowbond.validate_membership(gauss, neumann)[0]
    assert not slowbond.validate_membership(odd, neumann)[0]

    records = slowbond.semigroup_apply(neumann, 0.1, gauss, [-1.0, 0.0, 1.0])
    assert [r[1] for r in records] == [None, None, "left", "right"]

    descriptor = json.loads(gauss.to_json())
    assert descriptor["family"] == "hermite_gaussian"
    assert slowbond.TestFunction.from_json(json.dumps(descriptor)).eval(1.0) == gauss.eval(1.0)

    # chi <H, H> with H = exp(-x^2) is chi sqrt(pi / 2).
    chi = 0.25
    static = slowbond.ou_covariance(0.5, line, gauss, gauss, 0.0)
    assert abs(static - chi * math.sqrt(math.pi / 2)) < 1e-10

    config = slowbond.LatticeConfig(10, 0.5, 1.0, 0.5, 0.1, sample_times=[0.0, 0.1], replicas=200, seed=3)
    streams = slowbond.simulate(config, [("g", gauss)])
    assert len(streams) == 200 and [s[0] for s in streams[0]] == [0.0, 0.1]
    assert streams == slowbond.simulate(config, [("g", gauss)])

    products = [s[0][1]["g"] * s[0][1]["g"] for s in streams]
    mean, se = slowbond.estimate(products)
    exact = slowbond.lattice_covariance(config, gauss, gauss, 0.0)
    assert abs(mean - exact) < 4 * se, (mean, se, exact)

    print(f"slowbond {slowbond.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
