"""Writes context_fixture.json: a 10-node database checkpoint with ~2000-char
programs and ~300-char deltas, every node the elite of its own cell.

Also prints the character ratio predicted by counting only program and delta
bodies (parent code plus five inspirations)."""

import json
import random
from pathlib import Path

rng = random.Random(7)
WORDS = ["step", "radius", "offset", "angle", "grid", "pair", "shell", "ring", "scale", "margin"]


def program(i):
    lines = [f"# candidate layout builder, variant {i}", "import math", ""]
    n = 0
    while sum(len(l) + 1 for l in lines) < 1960:
        a, b = rng.sample(WORDS, 2)
        lines.append(f"def {a}_{b}_{i}_{n}(x, y):")
        lines.append(f"    return math.hypot(x * {rng.uniform(0.1, 2):.4f}, y - {rng.uniform(0, 1):.4f})")
        n += 1
    return "\n".join(lines) + "\n"


def delta(i):
    summary = {
        "from_strategy": f"fixed {WORDS[i % 10]} spacing with a uniform ring of hexagons",
        "to_strategy": f"adaptive {WORDS[(i + 3) % 10]} spacing tuned per ring",
    }
    plan = {"modifications": [{
        "component": f"{WORDS[(i + 1) % 10]}_placement",
        "old_logic": "places every hexagon on a constant lattice step",
        "new_logic": f"shrinks the step by {i} percent on the outer ring and rotates alternate rings slightly",
        "hypothesis": "a tighter outer ring lowers the enclosing side without creating new overlaps",
    }]}
    return summary, plan


nodes = []
for i in range(10):
    score = round(0.40 + 0.01 * i + (0.005 if i % 3 == 0 else 0.0), 4)
    summary, plan = delta(i) if i else (None, None)
    nodes.append({
        "id": i,
        "parent_id": None if i == 0 else (i - 1) // 2,
        "island": i % 3,
        "iteration": i,
        "code": program(i),
        "summary": summary,
        "plan": plan,
        "report": {"combined_score": score, "per_case": {"rho": score * 0.2544}, "valid": True,
                   "feedback": f"valid packing; rho = {score * 0.2544:.6f}", "evals_used": {}, "wall_time": 0.0},
        "descriptor": {"complexity": 0.25, "diversity": 0.05 + 0.1 * i},
        "tokens": {"prompt_tokens": 0, "completion_tokens": 0, "estimated": False},
    })

ranked = sorted(nodes, key=lambda n: (-n["report"]["combined_score"], n["iteration"], n["id"]))
islands = [[0] + [n["id"] for n in nodes if n["island"] == k and n["id"] != 0] for k in range(3)]
checkpoint = {
    "schema_version": 1,
    "config": {"islands": 3, "population_size": 40, "archive_size": 20, "grid_bins": 10,
               "migration_interval": 10, "migration_rate": 0.1},
    "next_id": 10,
    "nodes": nodes,
    "islands": islands,
    "grid": [{"cell": [2, i], "elite": i} for i in range(10)],
    "archive": [n["id"] for n in ranked],
}
Path(__file__).with_name("context_fixture.json").write_text(json.dumps(checkpoint, indent=1) + "\n")


def level2(plan):
    return "".join(
        f"[Modification {k + 1}]\nCOMPONENT: {m['component']}\nOLD_LOGIC: {m['old_logic']}\n"
        f"NEW_LOGIC: {m['new_logic']}\nHYPOTHESIS: {m['hypothesis']}\n"
        for k, m in enumerate(plan["modifications"]))


code_len = [len(n["code"]) for n in nodes]
delta_len = [len(level2(n["plan"])) for n in nodes[1:]]
print("mean program chars", sum(code_len) / len(code_len))
print("mean level-2 delta chars", sum(delta_len) / len(delta_len))
# parent plus five inspirations, bodies only
mean_code = sum(code_len) / len(code_len)
mean_delta = sum(delta_len) / len(delta_len)
print("predicted ratio", (mean_code + 5 * mean_delta) / (6 * mean_code))
