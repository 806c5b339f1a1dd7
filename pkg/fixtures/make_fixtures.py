"""Regenerate the JSON fixtures in this directory: ``python fixtures/make_fixtures.py``."""
import json
import math
from pathlib import Path

import numpy as np
from ctxglue.nonlocality import pr_box, tsirelson_box, deterministic_behavior, to_scenario, BipartiteBehavior
from ctxglue.scenario import scenario_to_dict, Scenario, Observable, Context, Behavior
from ctxglue.intervention import model_to_dict, InterventionModel, qubit_question, SharedState, InterventionOp
from ctxglue.holonomy import Atlas, LogicWorld, TransitionMap, atlas_to_dict

HERE = Path(__file__).resolve().parent


def dump(name, doc):
    (HERE / name).write_text(json.dumps(doc, indent=2) + "\n")

local = BipartiteBehavior(0.5 * deterministic_behavior((0, 1), (0, 0)).p + 0.25 * deterministic_behavior((1, 1), (1, 0)).p
                          + 0.25 * deterministic_behavior((0, 0), (1, 1)).p)
for name, b in (("pr_box", pr_box()), ("chsh_quantum", tsirelson_box()), ("embeddable", local)):
    sb = to_scenario(b)
    dump(f"{name}.json", scenario_to_dict(sb.scenario, sb))
    dump(f"bipartite_{name}.json", b.to_dict())
s = Scenario((Observable("X", 2),), (Context("c0", ("X",)), Context("c1", ("X",))))
dump("store_context.json", scenario_to_dict(s, Behavior(s, {"c0": [1.0, 0.0], "c1": [0.0, 1.0]})))
bad = scenario_to_dict(s, Behavior(s, {"c0": [0.7, 0.4], "c1": [0.0, 1.0]}))
dump("bad_tables.json", bad)

qa, qb = qubit_question("A", 0.0), qubit_question("B", math.pi / 4)
dump("qubit45.json", model_to_dict(InterventionModel(SharedState("amplitude", [1, 0]), {"A": qa, "B": qb})))
d1 = InterventionOp("A", "stochastic", np.eye(3), [np.diag([1, 0, 0]), np.diag([0, 1, 1])])
d2 = InterventionOp("B", "stochastic", np.eye(3), [np.diag([1, 1, 0]), np.diag([0, 0, 1])])
dump("commuting.json", model_to_dict(InterventionModel(SharedState("stochastic", [0.2, 0.5, 0.3]), {"A": d1, "B": d2})))

atoms = ("yes", "no")
worlds = {w: LogicWorld.uniform(w, atoms) for w in ("c0", "c1", "c2")}
flat = [TransitionMap.identity(s, t, atoms) for s, t in (("c0", "c1"), ("c1", "c2"), ("c2", "c0"), ("c1", "c0"))]
dump("atlas_flat.json", atlas_to_dict(Atlas(worlds, flat)))
w2 = {w: LogicWorld.uniform(w, atoms) for w in ("c0", "c1")}
nonflat = [TransitionMap.identity("c0", "c1", atoms, {"yes": 0.0, "no": 0.5}),
           TransitionMap.identity("c1", "c0", atoms, {"yes": 0.0, "no": 0.3})]
dump("atlas_nonflat.json", atlas_to_dict(Atlas(w2, nonflat)))

psi = [[1 / math.sqrt(2), 0.0], [0.5 / math.sqrt(2), math.sqrt(3) / 2 / math.sqrt(2)]]
model = model_to_dict(InterventionModel(SharedState("amplitude", [complex(*v) for v in psi]), {"A": qa, "B": qb}))
dump("tradeoff.json", {"model": model, "question_pair": ["A", "B"], "memory_levels": [0, 2, 8],
                       "trials": 20000, "seed": 0, "noise": 0.0})
