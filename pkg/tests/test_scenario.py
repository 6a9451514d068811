import numpy as np
import pytest

from momentbounds.scenario import (
    FUNCTIONAL_KINDS,
    THEOREM_RULES,
    Mode,
    ScenarioError,
    build,
    parse_scenario,
    parse_scenarios,
)

MINIMAL = """
name: khinchine_pair
space: {kind: rademacher, n: 2}
functional: {kind: sum_weights, weights: [1, 1]}
checks:
  - {theorem: thm7, q: [2, 3, 4]}
"""


def test_minimal():
    sc = parse_scenario(MINIMAL)
    assert sc.name == "khinchine_pair"
    assert sc.functional["kind"] == "sum_weights"
    assert len(sc.checks) == 1 and sc.checks[0].qs == (2.0, 3.0, 4.0)
    assert sc.checks[0].mode is None
    built = build(sc)
    assert built.space.n == 2
    assert np.allclose(built.functional.evaluate(np.array([[1.0, 1.0]])), [2.0])


@pytest.mark.parametrize("text, field", [
    (MINIMAL.replace("thm7", "thm99"), "checks[0].theorem"),
    (MINIMAL.replace("thm7, q: [2, 3, 4]", "thm2, q: [1.5]"), "checks[0].q[0]"),
    (MINIMAL.replace("thm7, q: [2, 3, 4]", "thm1, q: [2.5]"), "checks[0].q[0]"),
    (MINIMAL.replace("thm7, q: [2, 3, 4]", "thm2"), "checks[0].q"),
    (MINIMAL.replace("thm7, q: [2, 3, 4]", "cor3, q: [2], theta: 2"), "checks[0].theta"),
    (MINIMAL.replace("thm7, q: [2, 3, 4]", "thm14, q: [2]"), "checks[0].theorem"),
    (MINIMAL.replace("sum_weights", "bogus"), "functional.kind"),
    (MINIMAL.replace("name: khinchine_pair\n", ""), "scenario.name"),
    (MINIMAL.replace("weights: [1, 1]", "weights: [1, 1, 1]"), "functional"),
    (MINIMAL + "extra: 1\n", "scenario"),
    (MINIMAL.replace("thm7, q: [2, 3, 4]", "thm7, q: [2], mode: {mc: {seed: 1, count: 10}}"), "count"),
    (MINIMAL.replace("thm7, q: [2, 3, 4]", "thm7, q: [x]"), "checks[0].q"),
])
def test_rejections_name_the_field(text, field):
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(text)
    assert field in str(exc.value)


def test_line_numbers():
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(MINIMAL.replace("thm7", "thm99"))
    assert exc.value.line == 6
    assert str(exc.value).startswith("line 6: ")


def test_syntax_error():
    with pytest.raises(ScenarioError, match="syntax"):
        parse_scenarios("name: [unclosed\n")
    with pytest.raises(ScenarioError):
        parse_scenarios("- just\n- a list\n")


def _doc(*names):
    items = "".join(f"  - name: {n}\n    space: {{kind: rademacher, n: 2}}\n    functional: {{kind: sum_weights}}\n"
                    for n in names)
    return "defaults: &d {q: [2]}\nscenarios:\n" + items


def test_multiple_and_duplicates():
    assert [s.name for s in parse_scenarios(_doc("a", "b"))] == ["a", "b"]
    with pytest.raises(ScenarioError, match="duplicate"):
        parse_scenarios(_doc("a", "a"))
    with pytest.raises(ScenarioError, match="expected one"):
        parse_scenario(_doc("a", "b"))
    assert parse_scenario(_doc("a")).name == "a"


def test_modes():
    sc = parse_scenario(MINIMAL.replace("thm7, q: [2, 3, 4]", "thm7, q: [2], mode: {mc: {seed: 4, count: 500}}"))
    assert sc.checks[0].mode == Mode("mc", 4, 500)
    sc = parse_scenario(MINIMAL.replace("thm7, q: [2, 3, 4]", "thm7, q: [2], mode: exact"))
    assert sc.checks[0].mode == Mode()
    assert Mode().key() == ("exact",) and Mode("mc", 1, 200).key() == ("mc", 1, 200)


@pytest.mark.parametrize("space, functional, n", [
    ("{kind: bernoulli, n: 3, p: 0.2}", "{kind: max_coord}", 3),
    ("{kind: rademacher, n: 4}", "{kind: distinct_values}", 4),
    ("{kind: rademacher, n: 3}", "{kind: chaos, d: 2}", 3),
    ("{kind: bernoulli, n: 4}", "{kind: boolean, d: 3}", 4),
    ("{kind: bernoulli, p: 0.3}", "{kind: triangles, n_vertices: 4}", 6),
    ("{kind: rademacher, n: 2}", "{kind: sup_linear, vectors: [[1, 2], [0, 1]]}", 2),
    ("{kind: rademacher, n: 2}", "{kind: ep_class, centered: true, tables: [[[-1, 1], [2, -2]]]}", 2),
    ("{marginals: [{support: [0, 1, 2]}, {support: [0, 1]}]}", "{kind: cond_rademacher, tables: [[[0, 1, 2], [0, 1]]]}", 2),
    ("{marginals: [{support: [0, 1]}, {uniform: [0, 1]}, {gaussian: [0, 2]}]}", "{kind: sum_weights}", 3),
    ("{kind: rademacher, n: 2}", "{kind: user_table, values: [0, 1, 1, 3]}", 2),
])
def test_functional_kinds_build(space, functional, n):
    sc = parse_scenario(f"name: s\nspace: {space}\nfunctional: {functional}\n")
    assert build(sc).space.n == n


def test_user_table_order():
    sc = parse_scenario("name: s\nspace: {kind: rademacher, n: 2}\nfunctional: {kind: user_table, values: [0, 1, 2, 3]}\n")
    b = build(sc)
    configs, _ = b.space.grid()
    assert b.functional.evaluate(configs).tolist() == [0, 1, 2, 3]


def test_reductions():
    base = "name: s\nspace: {kind: bernoulli, n: 2}\nfunctional: {kind: sum_weights}\n"
    assert build(parse_scenario(base + "reduction: infimum\n")).functional.reduction.kind == "drop_to_infimum"
    red = build(parse_scenario(base + "reduction: {baseline: [0, 0]}\n")).functional.reduction
    assert red.kind == "baseline" and red.baseline == (0.0, 0.0)
    with pytest.raises(ScenarioError):
        parse_scenario(base + "reduction: sideways\n")


def test_registry_tables_consistent():
    for rule in THEOREM_RULES.values():
        assert rule.kinds is None or rule.kinds <= set(FUNCTIONAL_KINDS)
        assert not (rule.uses_q and rule.uses_t)


def test_triangles_edge_count_checked():
    with pytest.raises(ScenarioError):
        parse_scenario("name: s\nspace: {kind: bernoulli, n: 5}\nfunctional: {kind: triangles, n_vertices: 4}\n")
