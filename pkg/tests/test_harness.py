import numpy as np

from ivrobust.harness import CHECKS, check_instance, constant_constraint_dict, random_affine_dict, run_harness
from ivrobust.model import objective_bounds, objective_violations, parse_problem, problem_from_dict, robust_values


def _to_toml(d):
    # minimal writer for the harness dicts, enough to replay through the file parser
    lines = ["[problem]", f"n = {d['problem']['n']}", f"name = \"{d['problem']['name']}\""]
    for o in d["objective"]:
        lines += ["[[objective]]", f"lower = \"{o['lower']}\"", f"upper = \"{o['upper']}\""]
    for c in d["constraint"]:
        u = c["uncertainty"]
        lines += ["[[constraint]]", f"expr = \"{c['expr']}\"",
                  f"uncertainty = {{ box_lo = {u['box_lo']}, box_hi = {u['box_hi']}, grid = {u['grid']} }}"]
    lines += ["[set]", f"lo = {d['set']['lo']}", f"hi = {d['set']['hi']}",
              "[epsilon]", f"pairs = {d['epsilon']['pairs']}",
              "[grid]", f"lo = {d['grid']['lo']}", f"hi = {d['grid']['hi']}", f"counts = {d['grid']['counts']}"]
    return "\n".join(lines) + "\n"


def test_random_instances_are_well_formed():
    rng = np.random.default_rng(5)
    for k in range(20):
        n = int(rng.integers(1, 4))
        d = random_affine_dict(rng, n, 2, 2, name=f"r{k}")
        prob = problem_from_dict(d)
        assert objective_violations(prob, prob.grid.points()) == []
        again = parse_problem(_to_toml(d))
        X = prob.grid.points()
        np.testing.assert_array_equal(objective_bounds(prob, X)[0], objective_bounds(again, X)[0])
        np.testing.assert_array_equal(robust_values(prob, X), robust_values(again, X))


def test_constant_constraint_precisions():
    rng = np.random.default_rng(1)
    d = constant_constraint_dict(rng, 1, 3, 1, uniform=True)
    assert len({x for pair in d["epsilon"]["pairs"] for x in pair}) == 1
    d = constant_constraint_dict(rng, 1, 3, 1, uniform=False)
    assert all(a == b for a, b in d["epsilon"]["pairs"])


def test_small_run_is_clean_and_seeded():
    a = run_harness(6, seed=7)
    b = run_harness(6, seed=7)
    assert a.ok and a.violations == []
    assert [r.checks for r in a.results] == [r.checks for r in b.results]
    assert set(a.results[0].checks) == set(CHECKS)
    total = sum(sum(a.counts(name)) for name in CHECKS)
    assert total == 6 * len(CHECKS)


def test_check_instance_reports_every_check():
    rng = np.random.default_rng(3)
    prob = problem_from_dict(random_affine_dict(rng, 1, 2, 1, name="single"))
    res = check_instance(prob, 0, rng)
    assert set(res.checks) == set(CHECKS)
