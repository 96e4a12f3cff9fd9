"""Golden records for derived quantities: recursion Hamiltonians and solver transforms.

``compute(name)`` rebuilds one record from scratch; ``write_all`` is what
``loopalg --regen-golden`` runs.  Records are plain JSON so that comparison
is exact equality of documents.
"""
from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .equiv import AnsatzSpec, MiuraTransform, recursion, solve_equivalence
from .serialize import expr_to_doc
from .structures import deformation_rep, example, make_pair
from .multivec import EpsSeries
from .symexpr import const, jet
from .varcalc import LocalFunctional

__all__ = ["RECORDS", "CHEAP", "compute", "load", "write_all", "golden_dir", "transform_doc"]

Q = Fraction

# name -> (pencil, Casimir component, factor rule text, q_max)
_RECURSIONS = {
    "recursion-kdv": ("kdv", 1, "2/(2q+1)", 2),
    "recursion-ch": ("ch", 1, "2/(2q+1)", 2),
    "recursion-2ch": ("nls-case2", 2, "1/(q+1)", 1),
}
_FACTORS = {"2/(2q+1)": lambda q: Q(2, 2 * q + 1), "1/(q+1)": lambda q: Q(1, q + 1)}

RECORDS = tuple(_RECURSIONS) + ("solver-kdv", "solver-nls-case2")
CHEAP = tuple(_RECURSIONS) + ("solver-kdv",)


def golden_dir() -> Path:
    return Path(str(resources.files("loopalg").joinpath("golden")))


def transform_doc(T: MiuraTransform, order: int) -> dict:
    parts = T.forward_parts(order)
    return {"n": T.n, "order": order,
            "forward": {str(m): [expr_to_doc(x) for x in F] for m, F in sorted(parts.items()) if m}}


def _recursion_record(name: str) -> dict:
    pencil, comp, rule, q_max = _RECURSIONS[name]
    ex = example(pencil)
    steps = recursion(ex.omega1, ex.omega2, LocalFunctional(jet(comp), ex.n),
                      _FACTORS[rule], q_max, ex.order)
    return {"kind": "recursion", "pencil": pencil, "casimir": f"u{comp}", "factor": rule,
            "order": ex.order,
            "hamiltonians": [{"q": s.q, "density": expr_to_doc(s.hamiltonian.density)} for s in steps],
            "flows": [{"q": s.q, "xi": [expr_to_doc(x) for x in s.flow.xi]} for s in steps]}


def _solver_kdv() -> dict:
    pair = make_pair([const(1)])
    rep = deformation_rep(pair, [const(Q(-1, 24))])
    P = (EpsSeries({0: pair.omega1}, 2), EpsSeries({0: pair.omega2, 2: rep.Q[2]}, 2))
    kdv = example("kdv")
    res = solve_equivalence(P, (kdv.omega1, kdv.omega2), AnsatzSpec.polynomial(1, 2, 2), 2)
    return {"kind": "solver", "source": "kdv0 with c=-1/24", "target": "kdv",
            "verified": res.verified, "free_params": list(res.free_params),
            "transform": transform_doc(res.transform, 2), "family": transform_doc(res.family, 2)}


def _solver_case2() -> dict:
    from .cases import case2_miura
    report = case2_miura()
    res = report.data["case2_result"]
    return {"kind": "solver", "source": "nls0 with c=-(u^i)^2/24", "target": "nls-case2",
            "verified": res.verified, "free_params": list(res.free_params),
            "transform": transform_doc(res.transform, 2), "family": transform_doc(res.family, 2)}


def compute(name: str) -> dict:
    if name in _RECURSIONS:
        return _recursion_record(name)
    if name == "solver-kdv":
        return _solver_kdv()
    if name == "solver-nls-case2":
        return _solver_case2()
    raise KeyError(name)


def load(name: str) -> dict:
    return json.loads((golden_dir() / f"{name}.json").read_text("utf-8"))


def write_all(target: Path | None = None, names=RECORDS, log=print) -> list:
    target = Path(target) if target else golden_dir()
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for name in names:
        doc = compute(name)
        path = target / f"{name}.json"
        path.write_text(json.dumps(doc, indent=1, ensure_ascii=False, sort_keys=True) + "\n", "utf-8")
        written.append(path)
        log(f"wrote {path}")
    return written
