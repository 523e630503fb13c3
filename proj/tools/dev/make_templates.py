#!/usr/bin/env python3
"""Regenerates data/templates.json. Edit the tables here, not the JSON."""
import json, re, sys
from pathlib import Path

C = {"is_manipulable": True, "exceeds_weight_limit": False}
M = {"is_manipulable": True}

MR = [
    ("give me the <absent_object>", C),
    ("pick up the <absent_object>", C),
    ("bring me the <absent_object>", C),
    ("hand me the <absent_object>", C),
    ("pick up the <absent_color> <absent_object>", C),
    ("give me the <absent_color> <absent_object>", C),
    ("move the <absent_color> <absent_object> to the left", C),
    ("put the <absent_object> in front of me", C),
    ("grab the <absent_object> and hold it up", C),
    ("push the <absent_object> a little to the right", M),
    ("slide the <absent_color> <absent_object> toward me", M),
    ("pick up the <absent_size> <absent_object>", C),
    ("lift the <absent_object> and put it back down", C),
    ("hand me the <absent_state> <absent_object>", C),
    ("open the <absent_object>", {"is_stateful": True, "state": ["open", "closed"]}),
    ("turn on the <absent_object>", {"is_stateful": True, "state": ["on", "off"]}),
    ("close the <absent_object>", {"is_stateful": True, "state": ["open", "closed"]}),
    ("point to the <absent_object>", {}),
    ("tap the <absent_color> <absent_object> twice", M),
    ("put the <absent_object> next to the other items", C),
    ("bring the <absent_size> <absent_color> <absent_object> over here", C),
]

AR = [
    ("pick up the <shared_color> <ambiguous_carryable_object>", C),
    ("pick up the <ambiguous_carryable_object>", C),
    ("hand me the <ambiguous_carryable_object>", C),
    ("give me the <shared_color> <ambiguous_carryable_object>", C),
    ("move the <ambiguous_carryable_object> a bit to the left", C),
    ("pick up the <shared_material> <ambiguous_carryable_object>", C),
    ("bring me the <shared_attribute> <ambiguous_carryable_object>", C),
    ("grab the <shared_shape> <ambiguous_carryable_object>", C),
    ("pick up the <shared_texture> <ambiguous_carryable_object>", C),
    ("hand me the <shared_size> <ambiguous_carryable_object>", C),
    ("put the <ambiguous_carryable_object> next to me", C),
    ("lift the <shared_color> <ambiguous_carryable_object>", C),
    ("point to the <ambiguous_object>", {}),
    ("touch the <shared_color> <ambiguous_object>", M),
    ("push the <ambiguous_object> forward", M),
    ("move the <shared_material> <ambiguous_carryable_object> closer to me", C),
    ("pick up the <ambiguous_carryable_object> and hold it", C),
    ("slide the <shared_attribute> <ambiguous_object> to the right", M),
    ("bring the <ambiguous_carryable_object> over here", C),
    ("set the <shared_color> <ambiguous_carryable_object> aside", C),
    ("turn the <ambiguous_object> around", M),
    ("open the <ambiguous_object>", {"is_manipulable": True, "is_stateful": True}),
    ("turn on the <ambiguous_object>", {"is_stateful": True}),
    ("wipe the <shared_color> <ambiguous_object>", {}),
    ("grab the <shared_size> <shared_color> <ambiguous_carryable_object>", C),
    ("hand me the <shared_material> <ambiguous_carryable_object> carefully", C),
    ("put the <shared_attribute> <ambiguous_carryable_object> in front of me", C),
]

SI = [
    ("hand me my favorite <subjective_object>", {}),
    ("bring me the <subjective_object> I like best", {}),
    ("give me the nicest <subjective_object>", {}),
    ("pick up the prettiest of the <subjective_objects>", {}),
    ("bring me the <subjective_object> that suits my mood", {}),
    ("hand me the <subjective_object> I would prefer", {}),
    ("pick up the best-looking <subjective_object>", {}),
    ("give me the <subjective_object> my partner likes", {}),
    ("bring me the <subjective_object> I usually choose", {}),
    ("hand me the more stylish <subjective_object>", {}),
    ("pick up whichever <subjective_object> I would enjoy most", {}),
    ("move my favorite <subjective_object> closer to me", {}),
    ("give me the <subjective_object> that matches my taste", {}),
    ("bring me the ugliest of the <subjective_objects>", {}),
    ("hand me the <subjective_object> that I find most appealing", {}),
    ("put my favorite <subjective_object> in front of me", {}),
    ("pick up the <subjective_object> that would make a good gift", {}),
    ("give me the more attractive of the <subjective_objects>", {}),
    ("bring me the <subjective_object> that looks the most fun", {}),
    ("hand me the <subjective_object> I would want to use today", {}),
    ("choose the best of the <subjective_objects> for me", {}),
    ("give me the coolest <subjective_object>", {}),
    ("bring me the <subjective_object> my guest would like most", {}),
]

UI = [
    ("move that over there", {}, "objects"),
    ("put it over there", {}, "objects"),
    ("pick that up", {}, "objects"),
    ("hand me that", {}, "objects"),
    ("bring it here", {}, "objects"),
    ("put this where it belongs", {}, "objects"),
    ("move the other one", {}, "objects"),
    ("give me that thing", {}, "objects"),
    ("put it back", {}, "objects"),
    ("take this and put it there", {}, "objects"),
    ("turn it off", {"is_stateful": True}, "objects"),
    ("open it", {"is_stateful": True}, "objects"),
    ("put the <underspecified_object> over there", {}, None),
    ("move the <underspecified_object> there", {}, None),
    ("put the <underspecified_object> where it goes", {}, None),
    ("place the <underspecified_object> next to it", {}, None),
    ("move the <underspecified_object> to the other place", {}, None),
    ("put the <underspecified_object> in its usual spot", {}, None),
    ("take the <underspecified_object> over there and leave it", {}, None),
    ("put the <underspecified_object> on top of that", {}, None),
    ("swap the <underspecified_object> with that one", {}, None),
    ("move the <underspecified_object> near the thing", {}, None),
    ("put it on the <underspecified_location>", {}, None),
    ("move that to the <underspecified_location>", {}, None),
    ("place this on the <underspecified_location>", {}, None),
    ("take that thing off the <underspecified_location>", {}, None),
    ("move the other one to the <underspecified_location>", {}, None),
    ("put them near the <underspecified_location>", {}, None),
    ("bring that from the <underspecified_location>", {}, None),
    ("leave it by the <underspecified_location>", {}, None),
]

PI = [
    ("put the <infeasible_object> inside the <target_location>", {}),
    ("place the <infeasible_object> in the <target_location>", {}),
    ("fit the <infeasible_object> into the <target_location>", {}),
    ("store the <infeasible_object> inside the <target_location>", {}),
    ("hide the <infeasible_object> in the <target_location>", {}),
]

def cap(modality, patterns):
    return [(p, {"required_modality": modality}) for p in patterns]

MC = cap("olfaction", [
    "does the <capability_object> smell bad?",
    "smell the <capability_object> and tell me if it is fresh",
    "does the <capability_object> smell strong?",
    "tell me what the <capability_object> smells like",
    "check whether the <capability_object> has gone off by its smell",
    "hand me the <capability_object> if it smells sweet",
    "does the <capability_object> have a pleasant scent?",
    "sniff the <capability_object> and describe the odor",
    "is the <capability_object> giving off a burning smell?",
    "pick up the <capability_object> only if it smells clean",
    "rate how fragrant the <capability_object> is",
]) + cap("audition", [
    "what sound does the <capability_object> make right now?",
    "is the <capability_object> making a noise?",
    "listen to the <capability_object> and tell me if it is working",
    "tell me how loud the <capability_object> is",
    "does the <capability_object> sound broken?",
    "hand me the <capability_object> if it is beeping",
    "is the <capability_object> ringing?",
    "describe the sound coming from the <capability_object>",
    "turn the <capability_object> toward me if you hear it buzzing",
    "can you hear the <capability_object> humming?",
    "tell me whether the <capability_object> is playing music",
]) + cap("proprioception", [
    "how heavy is the <capability_object>?",
    "tell me the exact weight of the <capability_object>",
    "lift the <capability_object> and tell me if it feels heavier than it looks",
    "is the <capability_object> heavier than a kilogram?",
    "feel how firmly the <capability_object> is attached and report back",
    "tell me if the <capability_object> feels soft or hard",
    "press the <capability_object> and tell me how much it resists",
    "does the <capability_object> feel loose?",
    "tell me how much force it takes to move the <capability_object>",
    "check whether the <capability_object> is hollow by its weight",
    "does the <capability_object> feel balanced when you hold it?",
]) + cap("thermal_sensing", [
    "is the <capability_object> hot?",
    "tell me the temperature of the <capability_object>",
    "pick up the <capability_object> if it is cold",
    "is the <capability_object> still warm?",
    "hand me the <capability_object> once it has cooled down",
    "check whether the <capability_object> is too hot to touch",
    "does the <capability_object> feel cold?",
    "tell me if the <capability_object> has heated up",
    "bring me the <capability_object> if it is at room temperature",
    "is the <capability_object> colder than the room?",
    "feel whether the <capability_object> is warm and report back",
    "let me know when the <capability_object> is warm enough",
])

CI = [
    ("give me the <contradictory_object> without touching it", {}),
    ("give me the <contradictory_color> <contradictory_object> without touching it", {}),
    ("pick up the <contradictory_object> but keep it where it is", {}),
    ("hand me the <contradictory_object> while leaving it untouched", {}),
    ("move the <contradictory_object> without moving it", {}),
    ("lift the <contradictory_color> <contradictory_object> and keep it resting in place", {}),
    ("bring me the <contradictory_object> but do not pick it up", {}),
    ("hold the <contradictory_object> with your gripper fully open", {}),
    ("pick up the <contradictory_object> without using your gripper", {}),
    ("put the <contradictory_object> on the <contradictory_location> but keep it off the <contradictory_location>", {}),
    ("move the <contradictory_object> to the <contradictory_location> without touching it", {}),
    ("place the <contradictory_object> on the <contradictory_location> and keep holding it in the air", {}),
    ("take the <contradictory_object> off the <contradictory_location> but leave it on the <contradictory_location>", {}),
    ("put the <contradictory_color> <contradictory_object> on the <contradictory_location> without letting go of it", {}),
]

FP = [
    ("open the <premise_object>", {"current_state": "open"}),
    ("close the <premise_object>", {"current_state": "closed"}),
    ("turn on the <premise_object>", {"current_state": "on"}),
    ("turn off the <premise_object>", {"current_state": "off"}),
    ("fill the <premise_object>", {"current_state": "full"}),
    ("empty the <premise_object>", {"current_state": "empty"}),
]

SECTIONS = [
    ("missing_referent", "MR", MR),
    ("ambiguous_referent", "AR", AR),
    ("subjective_intent", "SI", SI),
    ("underspecified_intent", "UI", UI),
    ("physical_infeasibility", "PI", PI),
    ("missing_capability", "MC", MC),
    ("contradictory", "CI", CI),
    ("false_premise", "FP", FP),
]

def placeholders(pattern):
    out = []
    for name in re.findall(r"<([a-z_]+)>", pattern):
        if name not in out:
            out.append(name)
    return out

def main():
    templates = []
    for category, prefix, rows in SECTIONS:
        for i, row in enumerate(rows, 1):
            pattern, constraints = row[0], row[1]
            t = {"id": f"{prefix}-{i:02d}", "category": category, "pattern": pattern,
                 "placeholders": placeholders(pattern), "constraints": constraints}
            if len(row) > 2 and row[2]:
                t["source"] = row[2]
            templates.append(t)
    out = Path(__file__).resolve().parents[2] / "data" / "templates.json"
    lines = ["["]
    for i, t in enumerate(templates):
        lines.append("  " + json.dumps(t) + ("," if i + 1 < len(templates) else ""))
    lines.append("]")
    out.write_text("\n".join(lines) + "\n")
    print(len(templates), "templates ->", out, file=sys.stderr)

if __name__ == "__main__":
    main()
