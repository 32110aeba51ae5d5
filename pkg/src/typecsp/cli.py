"""Command-line front end.

Every subcommand prints one JSON document (or writes it to ``--out``).
Exit codes: 0 for any answer (including UNSAT and hardness verdicts),
2 for invalid input, 3 when a resource limit was hit.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from typing import Optional

from . import algebra as alg
from . import polymorphism as poly
from .finite_csp import ResourceLimitExceeded, SolverConfig
from .formula import FormulaError
from .reduction import (ALL_COVERING, SINGLE_CANONICAL, CspInstance, InstanceError, decide, metrics,
                        reduce)
from .type_structure import REDUCE, ReductSpec, build, choose_m
from .type_structure import load as load_structure
from .unary_base import PartitionSpec, SpecError, enumerate_types, stabilise

EXIT_OK, EXIT_INVALID, EXIT_LIMIT = 0, 2, 3
DEFAULT_SEED = 0


class SchemaError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _need(obj, key, path, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(path, f"missing required key {key!r}")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise SchemaError(f"{path}.{key}", f"expected {kind.__name__}")
    return val


def read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}", f"invalid JSON ({exc.msg})") from exc
    except OSError as exc:
        raise SchemaError(path, str(exc)) from exc


@dataclass
class ProjectFile:
    spec: PartitionSpec
    reduct: ReductSpec
    instances: list = field(default_factory=list)
    assertions: dict = field(default_factory=dict)
    notices: list = field(default_factory=list)

    @property
    def core_and_tame(self) -> bool:
        return bool(self.assertions.get("is_model_complete_core")
                    and self.assertions.get("tame_endomorphisms"))

    @classmethod
    def from_json(cls, obj) -> "ProjectFile":
        part = _need(obj, "partition", "$", dict)
        blocks = _need(part, "blocks", "$.partition", list)
        for k, b in enumerate(blocks):
            _need(b, "name", f"$.partition.blocks[{k}]")
        try:
            spec = PartitionSpec.from_json(part)
        except SpecError as exc:
            raise SchemaError("$.partition", str(exc)) from exc
        red = _need(obj, "reduct", "$", dict)
        rels = _need(red, "relations", "$.reduct", list)
        for k, r in enumerate(rels):
            _need(r, "name", f"$.reduct.relations[{k}]")
            _need(r, "arity", f"$.reduct.relations[{k}]", int)
            if "formula" not in r and "definition" not in r:
                raise SchemaError(f"$.reduct.relations[{k}]", "missing required key 'formula'")
        reduct = ReductSpec.from_json(red, spec.names)
        instances = []
        for k, inst in enumerate(obj.get("instances", [])):
            _need(inst, "vars", f"$.instances[{k}]", list)
            instances.append(CspInstance.from_json(inst))
        out = cls(spec, reduct, instances, dict(obj.get("assertions", {})))
        if not spec.is_stabilised:
            out.spec, rewrite = stabilise(spec)
            out.reduct = reduct.rename_blocks(rewrite)
            split = {b: list(v) for b, v in rewrite.items() if len(v) > 1}
            out.notices.append(f"finite blocks split into singletons: {split}")
        return out


def load_project(path: str) -> ProjectFile:
    return ProjectFile.from_json(read_json(path))


def _config(args) -> SolverConfig:
    return SolverConfig(seed=args.seed, node_limit=args.node_limit, time_limit=args.time_limit)


def _instances(args, project: ProjectFile) -> list:
    if getattr(args, "instance", None):
        obj = read_json(args.instance)
        return [CspInstance.from_json(o) for o in (obj if isinstance(obj, list) else [obj])]
    if not project.instances:
        raise SchemaError("$.instances", "project has no instances and no --instance was given")
    return project.instances


def _pick_m(args, project: ProjectFile) -> int:
    m = args.m if getattr(args, "m", None) is not None else choose_m(project.spec, project.reduct, REDUCE)
    if m < 1:
        raise SpecError("m must be positive")
    return m


# -- commands -----------------------------------------------------------------

def cmd_types(args) -> dict:
    project = load_project(args.project)
    m = _pick_m(args, project)
    types = enumerate_types(project.spec, m)
    return {"m": m, "count": len(types),
            "types": [dict(p.to_json(), index=k, text=str(p)) for k, p in enumerate(types)],
            "notices": project.notices}


def cmd_build(args) -> dict:
    project = load_project(args.project)
    T = build(project.spec, project.reduct, _pick_m(args, project))
    return T.to_json(args.materialize_comp)


def cmd_reduce(args) -> dict:
    project = load_project(args.project)
    T = build(project.spec, project.reduct, _pick_m(args, project))
    out = []
    for psi in _instances(args, project):
        phi = reduce(psi, T, args.policy)
        out.append(dict(phi.to_json(), metrics=metrics(phi)))
    return {"m": T.m, "type_count": len(T), "instances": out}


def cmd_solve(args) -> dict:
    project = load_project(args.project)
    if args.prebuilt:
        T = load_structure(args.prebuilt)
        if T.spec != project.spec or T.reduct != project.reduct:
            raise SpecError("prebuilt type structure does not match the project")
    else:
        T = build(project.spec, project.reduct, _pick_m(args, project))
    reports, limited = [], False
    for psi in _instances(args, project):
        outcome = decide(psi, T, args.policy, _config(args))
        rep = {"verdict": {"sat": "SAT", "unsat": "UNSAT", "limit": "LIMIT"}[outcome.status],
               "metrics": outcome.metrics}
        if outcome.witness is not None:
            rep["witness"] = outcome.witness.to_json()
            rep["verified"] = outcome.verified
        if outcome.status != "sat" or args.stats:
            rep["stats"] = outcome.stats
        limited |= outcome.status == "limit"
        reports.append(rep)
    out = {"m": T.m, "type_count": len(T), "policy": args.policy, "results": reports,
           "notices": project.notices}
    if limited:
        raise _Limited(out)
    return out


def cmd_classify(args) -> dict:
    project = load_project(args.project)
    res = poly.classify_reduct(project.spec, project.reduct, project.core_and_tame,
                               expand=not args.no_expand, config=_config(args))
    out = res.to_json()
    out["user_assertions"] = {k: bool(project.assertions.get(k, False))
                              for k in ("is_model_complete_core", "tame_endomorphisms")}
    out["notices"] = project.notices
    if not args.stats:
        out["search"].pop("stats", None)
    return out


def cmd_polysearch(args) -> dict:
    D = poly.FiniteStructure.from_json(read_json(args.structure))
    ident = poly.IdentitySpec.parse(args.identity, args.idempotent)
    res = poly.has_polymorphism(D, ident, _config(args), shortcuts=not args.no_shortcuts)
    out = {"identity": str(ident), "domain_size": D.d, **res.to_json()}
    if not args.stats:
        out.pop("stats", None)
    return out


def cmd_algebra(args) -> dict:
    A = alg.FiniteAlgebra.from_json(read_json(args.algebra))
    if args.algebra_cmd == "hs-trivial":
        q = alg.has_trivial_two_quotient(A)
        return {"trivial_two_quotient": None if q is None else q.to_json()}
    if args.algebra_cmd == "closure":
        ops = sorted(alg.clone_closure(A, args.max_arity), key=lambda f: (f.arity, f.values))
        return {"max_arity": args.max_arity, "count": len(ops),
                "operations": [{"arity": f.arity, "table": list(f.values)} for f in ops]}
    return alg.check_mashup_lemma(A, args.g, args.h, args.use_clone).to_json()


class _Limited(Exception):
    def __init__(self, report):
        self.report = report


# -- parser -------------------------------------------------------------------

def _global_flags(p, seed, flag, none):
    p.add_argument("--seed", type=int, default=seed, help="solver tie-breaking seed")
    p.add_argument("--stats", action="store_true", default=flag, help="include solver statistics")
    p.add_argument("--time-limit", type=float, default=none, help="seconds per solver call")
    p.add_argument("--node-limit", type=int, default=none, help="search nodes per solver call")
    p.add_argument("--out", default=none, help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="typecsp", description="Constraint satisfaction for reducts "
                                "of unary structures via finite type structures.")
    _global_flags(p, DEFAULT_SEED, False, None)
    # the same flags are accepted after the subcommand; SUPPRESS keeps them from
    # overwriting values given before it
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS, argparse.SUPPRESS, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    def with_project(name, func, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.add_argument("project", help="project JSON file")
        sp.set_defaults(func=func)
        return sp

    sp = with_project("types", cmd_types, "list the m-types of the base structure")
    sp.add_argument("--m", type=int)
    sp = with_project("build", cmd_build, "build and export the type structure")
    sp.add_argument("--m", type=int)
    sp.add_argument("--materialize-comp", action="store_true")
    for name, func, help_ in (("reduce", cmd_reduce, "emit the finite CSP instance"),
                              ("solve", cmd_solve, "decide instances and print verified witnesses")):
        sp = with_project(name, func, help_)
        sp.add_argument("--m", type=int)
        sp.add_argument("--instance", help="instance JSON (object or list); default: project instances")
        sp.add_argument("--policy", choices=(ALL_COVERING, SINGLE_CANONICAL), default=ALL_COVERING)
    sp.add_argument("--prebuilt", help="type structure exported by 'build'")
    sp = with_project("classify", cmd_classify, "tractability verdict for the reduct")
    sp.add_argument("--no-expand", action="store_true", help="skip naming one constant per block")

    sp = sub.add_parser("polysearch", parents=[common],
                        help="search for a polymorphism satisfying an identity")
    sp.add_argument("--structure", required=True, help="finite structure or type structure JSON")
    sp.add_argument("--identity", required=True, help="siggers | siggers4 | cyclic:K | wnu:K | wnupair")
    sp.add_argument("--idempotent", action="store_true")
    sp.add_argument("--no-shortcuts", action="store_true", help="always solve the full indicator")
    sp.set_defaults(func=cmd_polysearch)

    sp = sub.add_parser("algebra", help="finite algebra checks", parents=[common])
    asub = sp.add_subparsers(dest="algebra_cmd", required=True)
    a = asub.add_parser("check-mashup", parents=[common])
    a.add_argument("algebra")
    a.add_argument("--g", required=True)
    a.add_argument("--h", required=True)
    a.add_argument("--use-clone", action="store_true", help="draw witnesses from term operations")
    a = asub.add_parser("hs-trivial", parents=[common])
    a.add_argument("algebra")
    a = asub.add_parser("closure", parents=[common])
    a.add_argument("algebra")
    a.add_argument("--max-arity", type=int, default=2)
    sp.set_defaults(func=cmd_algebra)
    return p


def _emit(report: dict, out: Optional[str]) -> None:
    text = json.dumps(report, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report = args.func(args)
    except _Limited as exc:
        _emit(exc.report, args.out)
        return EXIT_LIMIT
    except (ResourceLimitExceeded, alg.GuardExceeded) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (SchemaError, SpecError, FormulaError, InstanceError, KeyError, ValueError,
            OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for note in report.get("notices", []) if isinstance(report, dict) else []:
        print(f"notice: {note}", file=sys.stderr)
    _emit(report, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
