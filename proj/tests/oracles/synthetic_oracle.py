#!/usr/bin/env python3
"""Hand-trace of the bundled synthetic suite under the verify-plan strategy.

Walks each task's scripted replies step by step with the routing rules
written out longhand (safety first, then unfinished critical actions, then
ambiguity with/without enough detail, else proceed) and prints the pause
class of every task plus the resulting confusion matrix.

Usage: synthetic_oracle.py <data/synthetic>
"""

import json
import pathlib
import re
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))
import dom_oracle  # noqa: E402

CALL = re.compile(r'(click|setValue|finish)\((.*?)\)')
LEXICON = ["submit", "purchase", "place order", "delete", "send", "checkout", "check out"]


def parse_call(s):
    m = CALL.search(s)
    if not m:
        return None
    kind, args = m.group(1), m.group(2)
    if kind == "finish":
        return ("finish", None, None)
    if kind == "click":
        return ("click", int(args), None)
    target, value = args.split(",", 1)
    return ("setValue", int(target), json.loads(value.strip()))


def block(text, tag):
    m = re.search(r"<%s>(.*?)</%s>" % (tag, tag), text, re.S)
    return m.group(1) if m else ""


def node_at(root, path):
    n = root
    for i in path:
        n = n["children"][i]
    return n


def all_text(n):
    parts = [n.get("text") or ""]
    for c in n.get("children", []):
        if c["visible"]:
            parts.append(all_text(c))
    return " ".join(" ".join(parts).split())


def side_effect(snapshot, action):
    if action is None or action[0] != "click":
        return False
    kept = dom_oracle.kept(snapshot)
    if action[1] >= len(kept):
        return False
    n = node_at(snapshot, kept[action[1]][1])
    label = (n.get("attributes", {}).get("aria-label") or "") + " " + all_text(n)
    label = " ".join(label.lower().split())
    if re.search(r"\badd to cart\b", label):
        return False
    return any(re.search(r"\b%s\b" % re.escape(w), label) for w in LEXICON)


def run(task, fixture, replies, verifications):
    state, history, gathers = 0, [], 0
    for _ in range(20):
        k = len(history)
        reply = replies[k]
        ver = verifications[k]
        plan = block(reply, "Plan")
        critical = []
        for line in plan.splitlines():
            a = parse_call(line)
            if a and not re.search(r"non[- ]critical", line, re.I):
                critical.append(a)
        action = parse_call(block(reply, "Action"))
        if not any(parse_call(l) for l in plan.splitlines()):
            critical = [action]
        done = {(h[0], h[1]) for h in history}
        pending = [a for a in critical if a[0] != "finish" and (a[0], a[1]) not in done]
        ambiguous = "-> yes" in ver
        sufficient = "DETAILS: sufficient" in ver
        candidate = pending[0] if pending else action
        snapshot = fixture["states"][state]["snapshot"]
        if side_effect(snapshot, candidate):
            decision = "confirm"
        elif pending:
            decision = "critical"
        elif ambiguous and sufficient:
            decision = "pause"
        elif ambiguous:
            decision = "gather"
        else:
            decision = "proceed"
        if decision == "gather" and (candidate[0] == "finish" or gathers >= 3):
            decision = "pause"
        if decision == "pause":
            return {"pausedAt": k, "completed": False}
        gathers = gathers + 1 if decision == "gather" else 0
        if candidate[0] == "finish":
            gt = [tuple(a.get(x) for x in ("kind", "targetId", "value")) for a in task["groundTruth"] if a["kind"] != "finish"]
            return {"pausedAt": None, "completed": history == gt}
        for t in fixture["transitions"]:
            a = t["action"]
            if t["from"] == state and (a["kind"], a.get("targetId"), a.get("value")) == candidate:
                state = t["to"]
                break
        else:
            raise SystemExit("%s diverged at step %d" % (task["taskId"], k))
        history.append(candidate)
    return {"pausedAt": None, "completed": False}


def classify(task, out):
    if task["pauseStep"] is not None:
        if out["pausedAt"] == task["pauseStep"]:
            return "TP"
        if out["pausedAt"] is not None and out["pausedAt"] < task["pauseStep"]:
            return "FP"
        return "FN"
    if out["pausedAt"] is not None:
        return "FP"
    return "TN" if out["completed"] else "Excluded"


def main(root):
    root = pathlib.Path(root)
    script = json.load(open(root / "mock_script.json", encoding="utf-8"))
    counts = {"TP": 0, "FP": 0, "FN": 0, "TN": 0, "Excluded": 0}
    for line in open(root / "dataset.jsonl", encoding="utf-8"):
        task = json.loads(line)
        fixture = json.load(open(root / task["fixture"], encoding="utf-8"))
        replies, verifications = {}, {}
        for e in script:
            if e.get("task") != task["taskId"]:
                continue
            if "template" not in e:
                replies[e["step"]] = e["response"]
            elif e["template"] == "verification":
                verifications[e["step"]] = e["response"]
        out = run(task, fixture, replies, verifications)
        c = classify(task, out)
        counts[c] += 1
        print(task["taskId"], c, "pausedAt=%s" % out["pausedAt"])
    print("matrix", " ".join("%s=%d" % kv for kv in counts.items()))


if __name__ == "__main__":
    main(sys.argv[1])
