import pytest

from loopalg import golden
from loopalg.equiv import EPS, eps_truncate
from loopalg.multivec import EvoField, commutator
from loopalg.serialize import expr_from_doc
from loopalg.symexpr import jet


def test_all_records_committed():
    for name in golden.RECORDS:
        assert (golden.golden_dir() / f"{name}.json").is_file(), name


@pytest.mark.parametrize("name", golden.CHEAP)
def test_regenerated_record_matches_committed_bytes(tmp_path, name):
    golden.write_all(tmp_path, names=(name,), log=lambda *_: None)
    fresh = (tmp_path / f"{name}.json").read_bytes()
    assert fresh == (golden.golden_dir() / f"{name}.json").read_bytes()


@pytest.mark.parametrize("name", ["recursion-kdv", "recursion-ch", "recursion-2ch"])
def test_golden_flows_commute(name):
    rec = golden.load(name)
    flows = [EvoField(expr_from_doc(x) for x in f["xi"]) for f in rec["flows"]]
    for a in range(len(flows)):
        for b in range(a + 1, len(flows)):
            com = commutator(flows[a], flows[b])
            assert all(eps_truncate(c, rec["order"]).is_zero() for c in com.xi)


def test_golden_kdv_first_flow_is_kdv_type():
    rec = golden.load("recursion-kdv")
    u, ux = jet(1), jet(1, 1)
    assert expr_from_doc(rec["flows"][1]["xi"][0]) == u * ux + EPS ** 2 * jet(1, 3) / 12


def test_case2_solver_record_keeps_one_free_parameter():
    rec = golden.load("solver-nls-case2")
    assert rec["verified"] and len(rec["free_params"]) == 1
