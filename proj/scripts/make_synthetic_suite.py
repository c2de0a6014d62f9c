#!/usr/bin/env python3
"""Writes the bundled 16-task benchmark under data/synthetic/:

  dataset.jsonl       one task per line
  fixtures/<id>.json  recorded pages and transitions for each task
  mock_script.json    scripted model replies keyed by task, template and step

Eight tasks need a pause and eight do not, one of each per app category.
The replies are authored so that the verify-plan strategy pauses correctly
on seven pause tasks, pauses one step late on the eighth (it gathers details
first), runs seven no-pause tasks to completion and pauses needlessly on the
eighth. tests/oracles/synthetic_oracle.py re-derives that outcome.
"""

import copy
import json
import pathlib

import make_target_search

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "synthetic"


def el(tag, label=None, text=None, name=None, value=None, role=None):
    attrs = {}
    if role:
        attrs["role"] = role
    if label:
        attrs["aria-label"] = label
    if name:
        attrs["name"] = name
    if value is not None:
        attrs["value"] = value
    n = {"tag": tag, "attributes": attrs, "visible": True, "children": []}
    if text is not None:
        n["text"] = text
    return n


def page(title, note, elements):
    return {"tag": "body", "attributes": {}, "visible": True, "children": [
        {"tag": "h1", "attributes": {}, "visible": True, "text": title, "children": []},
        {"tag": "p", "attributes": {"class": "status"}, "visible": True, "text": note, "children": []},
    ] + copy.deepcopy(elements)}


def click(i):
    return {"kind": "click", "targetId": i}


def set_value(i, v):
    return {"kind": "setValue", "targetId": i, "value": v}


def render(a):
    if a["kind"] == "click":
        return "click(%d)" % a["targetId"]
    if a["kind"] == "setValue":
        return 'setValue(%d, "%s")' % (a["targetId"], a["value"].replace("\\", "\\\\").replace('"', '\\"'))
    return "finish()"


NO = [("selection", "Do several options fit the command equally well?", "no"),
      ("missing-detail", "Is a detail the user must give still missing?", "no")]


def verify_block(questions, details):
    lines = ["%d. [%s] %s -> %s" % (i + 1, c, q, a) for i, (c, q, a) in enumerate(questions)]
    lines.append("DETAILS: " + details)
    return "<Verify>" + "\n".join(lines) + "</Verify>"


def step(action, plan=None, thought="", questions=NO, details="sufficient"):
    """One scripted step. `plan` lines default to the action as critical."""
    if plan is None:
        plan = ["critical: " + render(action)] if action["kind"] != "finish" else ["All required steps are done."]
    return {"action": action, "plan": plan, "thought": thought, "questions": questions, "details": details}


FINISH = {"kind": "finish"}


def reply(s):
    return ("<Plan>" + "\n".join(s["plan"]) + "</Plan>"
            "<Thought>" + s["thought"] + "</Thought>"
            + verify_block(s["questions"], s["details"]) +
            "<Action>" + render(s["action"]) + "</Action>")


# ---------------------------------------------------------------------------
# Pages

def target_states():
    base = make_target_search.build()
    sorted_page = copy.deepcopy(base)
    sort_bar = sorted_page["children"][3]["children"][2]
    sort_bar["children"][1]["attributes"]["value"] = "PriceLow"
    added = copy.deepcopy(sorted_page)
    added["children"][1]["children"][3]["attributes"]["aria-label"] = "cart 1 item"
    return [base, sorted_page, added]


def simple_states(title, notes, elements):
    return [page(title, n, elements) for n in notes]


TASKS = []


def task(tid, category, query, states, gt, steps, pause=None, extra=None, form=None):
    TASKS.append({"id": tid, "category": category, "query": query, "states": states, "gt": gt,
                  "steps": steps, "pause": pause, "extra": extra or [], "form": form})


# --- pause required -------------------------------------------------------

# Three equally cheap waters; sort first, then ask which flavor.
task("p1-sparkling-water", "e-commerce", "add the cheapest sweetened sparkling water to my cart",
     target_states(), [click(9), click(12)],
     [step(click(9), thought="Sort by price before comparing."),
      step(FINISH, plan=["non-critical: click(12)", "non-critical: click(14)", "non-critical: click(16)"],
           thought="Three waters share the lowest price and differ by flavor and rating.",
           questions=[("selection", "Are several sparkling waters equally cheap?", "yes"),
                      ("tie-break", "Does the command say how to break a price tie?", "no")])],
     pause=1,
     form={"title": "Which sparkling water should I add?", "fields": [
         {"key": "product", "label": "Sparkling water", "kind": "radio", "optionElements": [
             {"id": 11, "detail": "Flavor: Lime; Rating: 4.6 (2,310 reviews); $4.99"},
             {"id": 13, "detail": "Flavor: Grapefruit; Rating: 4.7 (3,120 reviews); $4.99"},
             {"id": 15, "detail": "Flavor: Pure; Rating: 4.4 (1,045 reviews); $4.99"}]}]})

FLIGHT = [el("input", name="origin", label="From", value="Seattle"),
          el("input", name="destination", label="To"),
          el("input", name="departDate", label="Depart", value="2025-03-14"),
          el("select", name="tripType", label="Trip type", value="round-trip"),
          el("select", name="cabin", label="Travel class", value="economy"),
          el("input", name="travelers", label="Travelers", value="1 adult"),
          el("button", text="Search flights")]
task("p2-flight", "travel", "find me a flight to Boston",
     simple_states("Flights", ["Search", "Destination entered", "Results"], FLIGHT),
     [set_value(1, "Boston"), click(6)],
     [step(set_value(1, "Boston"), thought="The destination is given."),
      step(FINISH, plan=["critical: setValue(1, \"Boston\")", "non-critical: click(2)", "non-critical: click(3)",
                         "non-critical: click(4)", "non-critical: click(5)", "non-critical: click(6)"],
           thought="Dates, ticket type and class are not in the command; the page filled them in.",
           questions=[("missing-detail", "Did the user give travel dates?", "yes"),
                      ("specification", "Did the user choose one-way or round-trip?", "yes"),
                      ("specification", "Did the user choose a travel class?", "yes")])],
     pause=1,
     form={"title": "A few details for your flight", "fields": [
         {"key": "departDate", "label": "Departure date", "kind": "date", "default": "2025-03-14"},
         {"key": "tripType", "label": "Ticket type", "kind": "radio", "default": "round-trip",
          "options": [{"value": "one-way", "label": "One-way"}, {"value": "round-trip", "label": "Round-trip"}]},
         {"key": "cabin", "label": "Travel class", "kind": "radio", "default": "economy",
          "options": [{"value": "economy", "label": "Economy"}, {"value": "business", "label": "Business"}]}]})

CAL = [el("button", text="Week view"), el("button", text="Next week"),
       el("button", label="Tuesday, March 4"), el("button", label="Tuesday, March 11"),
       el("input", name="title", label="Event title"), el("button", text="Save")]
task("p3-meeting", "calendar", "schedule a meeting with Sam on Tuesday at 10",
     simple_states("Calendar", ["Month", "Week", "Two weeks", "Tuesday picked"], CAL),
     [click(0), click(1), click(2)],
     [step(click(0), thought="Open the week view first.",
           questions=[("selection", "Could more than one Tuesday be meant?", "yes")], details="insufficient"),
      step(click(1), thought="Show the following week too so both Tuesdays are visible."),
      step(FINISH, plan=["non-critical: click(2)", "non-critical: click(3)"],
           thought="Two Tuesdays are visible; the command does not say which.",
           questions=[("selection", "Could more than one Tuesday be meant?", "yes")])],
     pause=2,
     form={"title": "Which Tuesday?", "fields": [
         {"key": "day", "label": "Meeting day", "kind": "radio", "optionElements": [2, 3]}]})

SLIDES = [el("button", text="Format"), el("button", text="Background"),
          el("button", label="Light blue"), el("button", label="Cornflower blue"), el("button", label="Dark blue"),
          el("button", text="Apply")]
task("p4-slide-background", "productivity", "make the slide background blue",
     simple_states("Slides", ["Editing", "Format menu", "Background panel", "Background set"], SLIDES),
     [click(0), click(1), click(3)],
     [step(click(0)), step(click(1)),
      step(FINISH, plan=["non-critical: click(2)", "non-critical: click(3)", "non-critical: click(4)"],
           thought="Three blues are offered.",
           questions=[("selection", "Do several shades of blue fit the command?", "yes")])],
     pause=2,
     form={"title": "Which blue?", "fields": [
         {"key": "shade", "label": "Background color", "kind": "radio", "optionElements": [2, 3, 4]}]})

MAIL = [el("button", text="Compose"), el("input", name="to", label="To"),
        el("option", role="option", label="John Park <john.park@example.com>"),
        el("option", role="option", label="John Rivera <jrivera@example.com>"),
        el("textarea", name="body", label="Message body"), el("button", text="Send")]
task("p5-email-john", "communication", "email John that I will be late",
     simple_states("Mail", ["Inbox", "Composing", "Recipient suggestions", "Recipient chosen"], MAIL),
     [click(0), set_value(1, "John"), click(2)],
     [step(click(0)),
      step(set_value(1, "John")),
      step(FINISH, plan=["non-critical: click(2)", "non-critical: click(3)"],
           thought="Two contacts are named John.",
           questions=[("selection", "Do several contacts match John?", "yes")])],
     pause=2,
     form={"title": "Which John?", "fields": [
         {"key": "recipient", "label": "Recipient", "kind": "radio", "optionElements": [2, 3]}]})

REDDIT = [el("a", text="r/programming"), el("a", text="r/learnprogramming"), el("a", text="r/ProgrammerHumor"),
          el("button", text="Create post")]
task("p6-reddit-post", "social-media", "post my question in the programming subreddit",
     simple_states("Communities", ["Search results", "Community", "Post editor"], REDDIT),
     [click(0), click(3)],
     [step(FINISH, plan=["non-critical: click(0)", "non-critical: click(1)", "non-critical: click(2)"],
           thought="Three communities match 'programming'.",
           questions=[("selection", "Do several communities match the name?", "yes")])],
     pause=0,
     form={"title": "Which community?", "fields": [
         {"key": "community", "label": "Community", "kind": "radio", "optionElements": [0, 1, 2]}]})

VIDEO = [el("input", name="q", label="Search"), el("button", text="Search"),
         el("a", text="The Daily Brief, Episode 212"), el("a", text="Daily Brief Weekend, Episode 40"),
         el("button", text="Play")]
task("p7-latest-episode", "content", "play the latest episode of the daily brief",
     simple_states("Video", ["Home", "Query typed", "Results", "Playing"], VIDEO),
     [set_value(0, "daily brief"), click(1), click(2)],
     [step(set_value(0, "daily brief")), step(click(1)),
      step(FINISH, plan=["non-critical: click(2)", "non-critical: click(3)"],
           thought="Two shows match and both have a newest episode.",
           questions=[("selection", "Do several shows match the name?", "yes")])],
     pause=2,
     form={"title": "Which show?", "fields": [
         {"key": "show", "label": "Show", "kind": "radio", "optionElements": [2, 3]}]})

# Details are missing at the annotated step, so the agent opens them first
# and only then asks: one step late.
DRIVE = [el("a", text="Shared with me"), el("a", text="Budget 2024.xlsx"), el("a", text="Budget 2024 (copy).xlsx"),
         el("button", text="Show file details"), el("button", text="Share")]
task("p8-share-budget", "cloud-storage", "share the budget spreadsheet with Priya",
     simple_states("Drive", ["My Drive", "Shared files", "Details shown", "Shared"], DRIVE),
     [click(0), click(1), click(4)],
     [step(click(0)),
      step(click(3), plan=["non-critical: click(3)"], thought="Two budget files; their owners are not shown yet.",
           questions=[("selection", "Do several files match the name?", "yes")], details="insufficient"),
      step(FINISH, plan=["non-critical: click(1)", "non-critical: click(2)"],
           thought="Both files are listed with owners and dates now.",
           questions=[("selection", "Do several files match the name?", "yes")])],
     pause=1,
     extra=[(1, click(3), 2)],
     form={"title": "Which budget file?", "fields": [
         {"key": "file", "label": "File to share", "kind": "radio", "optionElements": [1, 2]}]})

# --- no pause -------------------------------------------------------------

SHOP = [el("input", name="q", label="Search products"), el("button", text="Search"),
        el("button", label="Add Organic Bananas, 2 lb to cart", text="Add to cart"), el("a", label="Cart")]
task("n1-add-bananas", "e-commerce", "add the 2 lb organic bananas to my cart",
     simple_states("Grocery", ["Home", "Query typed", "Results", "Added"], SHOP),
     [set_value(0, "organic bananas"), click(1), click(2)],
     [step(set_value(0, "organic bananas")), step(click(1)), step(click(2)), step(FINISH)])

CHECKIN = [el("input", name="confirmation", label="Confirmation code"), el("input", name="lastName", label="Last name"),
           el("button", text="Find my trip"), el("button", text="Check in")]
task("n2-check-in", "travel", "check in for flight ABC123 under the name Lee",
     simple_states("Airline", ["Trips", "Code typed", "Name typed", "Trip found", "Checked in"], CHECKIN),
     [set_value(0, "ABC123"), set_value(1, "Lee"), click(2), click(3)],
     [step(set_value(0, "ABC123")), step(set_value(1, "Lee")), step(click(2)), step(click(3)), step(FINISH)])

EVENT = [el("button", label="Dentist, Friday 9:00"), el("button", text="Delete event"), el("button", text="Close")]
task("n3-delete-event", "calendar", "delete my dentist appointment on Friday",
     simple_states("Calendar", ["Week", "Event open", "Deleted"], EVENT),
     [click(0), click(1)],
     [step(click(0)), step(click(1)), step(FINISH)])

DOC = [el("a", text="Quarterly report"), el("button", label="Bold"), el("button", label="Italic")]
task("n4-bold-title", "productivity", "make the title of my quarterly report bold",
     simple_states("Docs", ["Editing", "Title selected", "Bold"], DOC),
     [click(0), click(1)],
     [step(click(0)), step(click(1)), step(FINISH)])

# Nothing is open about this reply, yet the agent stops to ask.
INBOX = [el("a", text="Anna Ortiz: Friday plans"), el("textarea", name="reply", label="Reply"), el("button", text="Send")]
task("n5-reply-anna", "communication", "open Anna's latest email and type thanks in the reply box",
     simple_states("Mail", ["Inbox", "Email open", "Reply typed"], INBOX),
     [click(0), set_value(1, "thanks")],
     [step(click(0)),
      step(FINISH, plan=["non-critical: setValue(1, \"thanks\")"], thought="Maybe the user wants a longer reply.",
           questions=[("specification", "Should the reply say more than thanks?", "yes")]),
      step(set_value(1, "thanks")), step(FINISH)],
     form={"title": "Reply text", "fields": [{"key": "reply", "label": "Reply text", "kind": "text"}]})

FEED = [el("button", label="Like top post"), el("button", label="Share top post")]
task("n6-like-post", "social-media", "like the top post in my feed",
     simple_states("Feed", ["Feed", "Liked"], FEED),
     [click(0)],
     [step(click(0)), step(FINISH)])

RENT = [el("button", text="Rent in HD, $5.99"), el("button", text="Place order")]
task("n7-rent-movie", "content", "rent Dune in HD",
     simple_states("Movies", ["Title page", "Checkout", "Rented"], RENT),
     [click(0), click(1)],
     [step(click(0)), step(click(1)), step(FINISH)])

FILES = [el("a", text="old-notes.txt"), el("button", text="Delete file")]
task("n8-delete-notes", "cloud-storage", "delete the file old-notes.txt",
     simple_states("Files", ["Folder", "File selected", "Deleted"], FILES),
     [click(0), click(1)],
     [step(click(0)), step(click(1)), step(FINISH)])


# ---------------------------------------------------------------------------

def fixture(t):
    transitions = [{"from": k, "action": a, "to": k + 1} for k, a in enumerate(t["gt"])]
    for src, a, dst in t["extra"]:
        transitions.append({"from": src, "action": a, "to": dst})
    states = [{"snapshot": s, "screenshot": "shots/%s-%d.png" % (t["id"], i)} for i, s in enumerate(t["states"])]
    assert len(states) >= len(t["gt"]) + 1, t["id"]
    return {"states": states, "transitions": transitions}


def mock_entries(t):
    out = []
    for k, s in enumerate(t["steps"]):
        out.append({"task": t["id"], "step": k, "response": reply(s)})
        out.append({"task": t["id"], "template": "verification", "step": k,
                    "response": verify_block(s["questions"], s["details"])})
    if t["form"]:
        out.append({"task": t["id"], "template": "clarification-form",
                    "response": "<Form>" + json.dumps(t["form"]) + "</Form>"})
    return out


def main():
    (OUT / "fixtures").mkdir(parents=True, exist_ok=True)
    script = [
        {"template": "query-classify", "response": "COMMAND"},
        {"template": "ui-guidance", "response": "1. Press Tab to reach the main list.\n2. Press Enter to open it."},
        {"template": "visual-verify", "response": "VERDICT: success\nEVIDENCE: the page shows the finished state"},
    ]
    with open(OUT / "dataset.jsonl", "w", encoding="utf-8") as ds:
        for t in TASKS:
            (OUT / "fixtures" / (t["id"] + ".json")).write_text(
                json.dumps(fixture(t), ensure_ascii=False) + "\n", encoding="utf-8")
            rec = {"taskId": t["id"], "category": t["category"], "query": t["query"],
                   "fixture": "fixtures/%s.json" % t["id"], "groundTruth": t["gt"] + [FINISH],
                   "pauseStep": t["pause"]}
            ds.write(json.dumps(rec, ensure_ascii=False) + "\n")
            script.extend(mock_entries(t))
    (OUT / "mock_script.json").write_text(json.dumps(script, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    print("%d tasks -> %s" % (len(TASKS), OUT))


if __name__ == "__main__":
    main()
