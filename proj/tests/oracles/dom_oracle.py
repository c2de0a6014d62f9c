#!/usr/bin/env python3
"""Independent oracle for snapshot fixtures.

Counts raw nodes with a plain recursive walk and enumerates the elements a
reader would keep by applying the retention rules by hand: drop invisible
subtrees, keep visible nodes that carry role / aria-label / name or are a
native control, and drop the ones that end up with nothing to show.

Usage: dom_oracle.py <snapshot.json>
"""

import json
import sys

CONTROLS = {"button", "a", "input", "select", "textarea", "option"}


def count(n):
    return 1 + sum(count(c) for c in n.get("children", []))


def attr(n, k):
    v = " ".join(n.get("attributes", {}).get(k, "").split())
    return v or None


def interactive(n):
    return any(attr(n, k) for k in ("role", "aria-label", "name")) or n["tag"].lower() in CONTROLS


def has_any_text(n):
    # own text or text of visible descendants that are not themselves controls
    if " ".join((n.get("text") or "").split()):
        return True
    return any(c["visible"] and not interactive(c) and has_any_text(c) for c in n.get("children", []))


def kept(n, path=()):
    if not n["visible"]:
        return []
    out = []
    if interactive(n):
        labelled = any(attr(n, k) for k in ("role", "aria-label", "name"))
        if labelled or has_any_text(n):
            out.append((n["tag"], path))
    for i, c in enumerate(n.get("children", [])):
        out += kept(c, path + (i,))
    return out


if __name__ == "__main__":
    doc = json.load(open(sys.argv[1], encoding="utf-8"))
    ks = kept(doc)
    print("nodes", count(doc))
    print("interactive", len(ks))
    for i, (tag, path) in enumerate(ks):
        print(i, tag, list(path))
