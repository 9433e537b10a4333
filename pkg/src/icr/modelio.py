"""JSON model files.

A model file is one JSON object::

    {
      "family": "discrete" | "gaussian",
      "variables": [{"name": "X1", "kind": "discrete", "support_size": 2}, ...],
      "conditionals": [
        {"target": ["X1"], "parents": ["X2"], "table": [[...], ...]},           # discrete
        {"target": ["X1"], "parents": ["X2", "X3"],
         "coef": [[...]], "intercept": [...], "cond_cov": [[...]]}              # gaussian
      ]
    }

Discrete tables nest parent axes outermost and target axes innermost, each
group in variable declaration order. Gaussian ``coef`` rows follow the
targets and columns the parents, both in declaration order.
"""

import json

from .errors import ICRError, ModelError
from .model import ConditionalModel, DiscreteConditional, GaussianConditional, VariableSpec


class ModelFormatError(ModelError):
    pass


def load_model(path) -> ConditionalModel:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelFormatError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    try:
        return parse_model(doc)
    except ModelFormatError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None


def _get(obj, key, where):
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{where}: expected an object")
    if key not in obj:
        raise ModelFormatError(f"{where}: missing key {key!r}")
    return obj[key]


def parse_model(doc) -> ConditionalModel:
    family = _get(doc, "family", "model")
    if family not in ("discrete", "gaussian"):
        raise ModelFormatError(f"family: unknown family {family!r}")
    raw_vars = _get(doc, "variables", "model")
    if not isinstance(raw_vars, list):
        raise ModelFormatError("variables: expected a list")
    variables = []
    for n, v in enumerate(raw_vars):
        where = f"variables[{n}]"
        name = _get(v, "name", where)
        kind = v.get("kind", "discrete" if "support_size" in v else "continuous")
        try:
            if kind == "discrete":
                variables.append(VariableSpec(name, int(_get(v, "support_size", where))))
            elif kind == "continuous":
                variables.append(VariableSpec(name))
            else:
                raise ModelFormatError(f"{where}: unknown kind {kind!r}")
        except (ModelError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"{where}: {exc}") from None
    expected_kind = "discrete" if family == "discrete" else "continuous"
    if any(v.kind != expected_kind for v in variables):
        raise ModelFormatError(f"family {family!r} requires {expected_kind} variables")
    index = {v.name: i for i, v in enumerate(variables)}

    raw_conds = _get(doc, "conditionals", "model")
    if not isinstance(raw_conds, list):
        raise ModelFormatError("conditionals: expected a list")
    conditionals = []
    for n, c in enumerate(raw_conds):
        where = f"conditionals[{n}]"
        try:
            target = [index[name] for name in _get(c, "target", where)]
            parents = [index[name] for name in c.get("parents", [])]
        except KeyError as exc:
            raise ModelFormatError(f"{where}: unknown variable {exc.args[0]!r}") from None
        except TypeError:
            raise ModelFormatError(f"{where}: target/parents must be lists of names") from None
        try:
            if family == "discrete":
                conditionals.append(DiscreteConditional(target, parents, _get(c, "table", where)))
            else:
                conditionals.append(
                    GaussianConditional(
                        target,
                        parents,
                        _get(c, "coef", where),
                        c.get("intercept", [0.0] * len(target)),
                        _get(c, "cond_cov", where),
                    )
                )
        except ModelFormatError:
            raise
        except (ICRError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"{where}: {exc}") from None
    try:
        return ConditionalModel(variables, conditionals)
    except ModelError as exc:
        raise ModelFormatError(str(exc)) from None


def model_to_dict(model) -> dict:
    variables = []
    for v in model.variables:
        entry = {"name": v.name, "kind": v.kind}
        if v.support_size is not None:
            entry["support_size"] = v.support_size
        variables.append(entry)
    conditionals = []
    for c in model.conditionals:
        entry = {"target": model.names(c.target), "parents": model.names(c.parents)}
        if model.family == "discrete":
            entry["table"] = c.table.tolist()
        else:
            entry["coef"] = c.coef.tolist()
            entry["intercept"] = c.intercept.tolist()
            entry["cond_cov"] = c.cond_cov.tolist()
        conditionals.append(entry)
    return {"family": model.family, "variables": variables, "conditionals": conditionals}


def dump_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")
