from collections import defaultdict, deque

from hypothesis import given, settings
from hypothesis import strategies as st

from callcenter_iv.family import build_partition, coverage, flag_agencies

from conftest import call


def _bfs_components(calls):
    adj = defaultdict(set)
    for c in calls:
        nodes = ([f"C:{c.customer_id}"] if c.customer_id else []) + ([f"P:{c.phone}"] if c.phone else [])
        for n in nodes:
            adj[n]
        if len(nodes) == 2:
            adj[nodes[0]].add(nodes[1])
            adj[nodes[1]].add(nodes[0])
    seen, comps = set(), []
    for start in sorted(adj):
        if start in seen:
            continue
        comp, todo = set(), deque([start])
        seen.add(start)
        while todo:
            n = todo.popleft()
            comp.add(n)
            for m in adj[n] - seen:
                seen.add(m)
                todo.append(m)
        comps.append(frozenset(comp))
    return set(comps)


ids = st.one_of(st.none(), st.integers(0, 15).map(str))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(ids, ids), min_size=1, max_size=80))
def test_partition_matches_bfs(pairs):
    calls = [call(f"k{i}", customer=c, phone=p) for i, (c, p) in enumerate(pairs)]
    part = build_partition(calls)
    got = {frozenset(m) for m in part.members.values()}
    assert got == _bfs_components(calls)
    # every identified call maps to the component holding its nodes
    for c in calls:
        if c.customer_id:
            assert f"C:{c.customer_id}" in part.members[part.family_of[c.call_id]]
        elif c.phone:
            assert f"P:{c.phone}" in part.members[part.family_of[c.call_id]]
        else:
            assert c.call_id not in part.family_of


def test_transitive_chain_and_namespaces():
    calls = [call("1", customer="a", phone="x"), call("2", customer="b", phone="x"),
             call("3", customer="b", phone="y"), call("4", customer="c", phone="y"),
             call("5", customer="x", phone="a")]
    part = build_partition(calls)
    fam = {part.family_of[k] for k in "1234"}
    assert len(fam) == 1
    # the customer "x" and the phone "x" are different nodes
    assert part.family_of["5"] not in fam


def test_partition_ids_do_not_depend_on_order():
    calls = [call("1", customer="a", phone="x"), call("2", customer="b", phone="x"),
             call("3", customer="z", phone="q")]
    p1, p2 = build_partition(calls), build_partition(calls[::-1])
    assert p1.family_of == p2.family_of


def test_agency_threshold_is_strict():
    calls = [call(str(i), customer=f"c{i}", phone="shared") for i in range(26)]
    part = build_partition(calls)
    assert flag_agencies(part, 25) == {part.family_of["0"]}
    assert flag_agencies(part, 26) == set()


def test_coverage():
    calls = [call("1"), call("2", customer=None, phone="p"), call("3", customer=None)]
    cov = coverage(calls)
    assert cov["resolvable_by_customer_id"] == 1 / 3
    assert cov["resolvable_by_family"] == 2 / 3
    assert cov["gain"] == 1.0
