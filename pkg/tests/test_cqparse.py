import pytest
from hypothesis import given, settings, strategies as st

from cqenum.cqparse import parse_cq, project_query, refine_query, table_name
from cqenum.errors import (DuplicateQuantifier, NotSubsetClosed, QuantifiedVarUnused,
                           QuerySyntaxError, ScopeError)
from cqenum.fixtures import CYCLE4_QUANTIFIED, random_structure


def test_parse_quantified_cycle(cycle4q):
    assert cycle4q.variables == ("x1", "x2", "x3", "x4")
    assert cycle4q.free == ("x2", "x4")
    assert cycle4q.quantified == ("x1", "x3")
    assert str(parse_cq(str(cycle4q))) == str(cycle4q)


def test_parse_errors():
    with pytest.raises(DuplicateQuantifier):
        parse_cq("exists x x . E(x,y)")
    with pytest.raises(QuantifiedVarUnused):
        parse_cq("exists z . E(x,y)")
    for bad in ["E(x,y", "E(x,,y)", "E(x) F(y)", "exists . E(x)", "E(x);"]:
        with pytest.raises(QuerySyntaxError):
            parse_cq(bad)


def test_self_join_and_repeated_variables():
    q = parse_cq("E(x,x), E(x,y)")
    assert q.variables == ("x", "y")
    assert len(q.atoms) == 2


names = st.sampled_from(["x", "y", "z", "w"])
atoms = st.tuples(st.sampled_from(["R", "S"]), st.lists(names, min_size=1, max_size=3))


@given(st.lists(atoms, min_size=1, max_size=4), st.data())
@settings(max_examples=100, deadline=None)
def test_format_parse_roundtrip(body, data):
    text = ", ".join(f"{r}({','.join(a)})" for r, a in body)
    q = parse_cq(text)
    quant = data.draw(st.lists(st.sampled_from(q.variables), unique=True))
    if quant:
        q = parse_cq(f"exists {' '.join(quant)} . {text}")
    assert parse_cq(str(q)) == q


def test_projection_matches_single_atom(triangle, rng):
    # restricting the triangle to {x, z} leaves exactly the atom E(x, z)
    pq = project_query(triangle, ["x", "z"])
    for _ in range(20):
        A = random_structure(rng, {"E": 2}, rng.randint(1, 8))
        got = pq.evaluate(A)
        assert got == set(A.tuples("E"))


def test_projection_scope_error(triangle):
    with pytest.raises(ScopeError):
        project_query(triangle, ["q"])


def test_refine_query(cycle4):
    rq = refine_query(cycle4, [(), ("x1",), ("x2",), ("x1", "x2")])
    assert table_name(cycle4, cycle4.mask(["x1", "x2"])) == "R_{x1,x2}"
    assert "R_{x1,x2}" in rq.signature
    with pytest.raises(NotSubsetClosed):
        refine_query(cycle4, [(), ("x1", "x2")])
    with pytest.raises(ScopeError):
        refine_query(parse_cq(CYCLE4_QUANTIFIED), [()])


def test_duplicate_quantifier_example():
    with pytest.raises(DuplicateQuantifier):
        parse_cq("exists y y . E(x,y)")


def test_empty_scope_is_boolean(triangle, rng):
    from cqenum.relmodel import Signature, Structure
    pq = project_query(triangle, [])
    A = random_structure(rng, {"E": 2}, 4)
    assert pq.evaluate(A) == {()}
    empty = Structure.from_tuples({"E": []}, Signature.from_pairs([("E", 2)]))
    assert pq.evaluate(empty) == set()


def test_projection_against_oracle(rng):
    from cqenum.oracle import brute_projected
    from cqenum.fixtures import random_query
    for _ in range(40):
        q = parse_cq(random_query(rng, max_vars=5, quantify=False))
        A = random_structure(rng, {"R": 2, "S": 2, "T": 3}, rng.randint(1, 5))
        scope = [v for v in q.variables if rng.random() < 0.5]
        assert project_query(q, scope).evaluate(A) == set(brute_projected(q, A, scope).rows)


def test_full_scope_keeps_answers(rng):
    from cqenum.oracle import brute_eval
    from cqenum.fixtures import random_query
    for _ in range(20):
        q = parse_cq(random_query(rng, max_vars=4, quantify=False))
        A = random_structure(rng, {"R": 2, "S": 2, "T": 3}, 4)
        assert project_query(q, q.variables).evaluate(A) == set(brute_eval(q, A).rows)


def test_refined_query_atom_count(cycle4):
    rq = refine_query(cycle4, [(), ("x1",), ("x2",), ("x1", "x2")])
    assert len(rq.table_atoms()) == 4
    assert len(rq.atoms) == 8
    assert len(refine_query(cycle4, [()]).table_atoms()) == 1


def test_refined_answers_are_contained(rng):
    from cqenum.fixtures import random_query, random_refinement
    from cqenum.oracle import brute_eval, brute_eval_refined
    for _ in range(30):
        q = parse_cq(random_query(rng, max_vars=4, quantify=False))
        A = random_structure(rng, {"R": 2, "S": 2, "T": 3}, 3)
        r = random_refinement(rng, q, A)
        assert brute_eval_refined(r.refined_query(), r).rows <= brute_eval(q, A).rows
