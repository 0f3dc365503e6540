"""Self-describing JSON text for trained models.

Every payload records a format tag, a version, the model kind and the knob
space it was trained on, so a file can be reloaded without the config.
"""

import json

from ..core import Knob, KnobSpace
from .cost import LinearCostModel, TreeCostModel
from .fitness import FitnessTable, LinearFitnessModel, M5FitnessModel
from .tree import ModelTree

FORMAT = "knobctl-model"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def space_to_dict(space: KnobSpace) -> list:
    return [{"name": k.name, "levels": list(k.levels), "accurate_level": k.accurate_level}
            for k in space.knobs]


def space_from_dict(d: list) -> KnobSpace:
    return KnobSpace(tuple(Knob(k["name"], tuple(k["levels"]), k["accurate_level"]) for k in d))


def model_to_dict(model) -> dict:
    body = {"format": FORMAT, "version": VERSION, "space": space_to_dict(model.space)}
    if isinstance(model, TreeCostModel):
        body.update(kind="cost_tree", n_features=model.n_features, tree=model.tree.to_dict())
    elif isinstance(model, LinearCostModel):
        body.update(kind="cost_linear", intercept=model.intercept, coef=model.coef.tolist())
    elif isinstance(model, FitnessTable):
        body.update(kind="fitness_table", epsilon_grid=model.epsilon_grid.tolist(),
                    table=model.table.tolist(), input_weights=model.input_weights)
    elif isinstance(model, M5FitnessModel):
        body.update(kind="fitness_m5", epsilon_grid=model.epsilon_grid.tolist(),
                    tree=model.tree.to_dict())
    elif isinstance(model, LinearFitnessModel):
        body.update(kind="fitness_linear", intercept=model.intercept, coef=model.coef.tolist())
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return body


def model_from_dict(body: dict):
    if body.get("format") != FORMAT:
        raise ModelFormatError(f"not a {FORMAT} payload")
    if body.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model version {body.get('version')!r}")
    space = space_from_dict(body["space"])
    kind = body.get("kind")
    if kind == "cost_tree":
        return TreeCostModel(space, ModelTree.from_dict(body["tree"]), body["n_features"])
    if kind == "cost_linear":
        return LinearCostModel(space, body["intercept"], body["coef"])
    if kind == "fitness_table":
        return FitnessTable(space, body["epsilon_grid"], body["table"], body["input_weights"])
    if kind == "fitness_m5":
        return M5FitnessModel(space, body["epsilon_grid"], ModelTree.from_dict(body["tree"]))
    if kind == "fitness_linear":
        return LinearFitnessModel(space, body["intercept"], body["coef"])
    raise ModelFormatError(f"unknown model kind {kind!r}")


def dumps(model) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, indent=1) + "\n"


def loads(text: str):
    try:
        body = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(str(exc)) from None
    return model_from_dict(body)


def save(model, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(model))


def load(path):
    with open(path) as fh:
        return loads(fh.read())
