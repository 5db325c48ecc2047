#!/usr/bin/env python3
"""Generate the snack-bar example project under fixtures/snackbar.

Output is byte-identical to what the C++ library writes when it saves a
bundle, so `load -> save` of the generated tree is a no-op.

    python3 tools/fixture/make_snackbar_fixture.py [--out fixtures/snackbar]
"""

import argparse
import itertools
import json
import random
import shutil
from pathlib import Path

HERE = Path(__file__).resolve().parent
PROMPTS_PER_PARADIGM = 176

SHIFT_UP_TARGET = {
    "proceed_next_step": 62,
    "execute_acceptance_tests": 16,
    "developer_identified_fix": 9,
    "accept_agent_solution": 7,
    "initiate_next_plan_step": 5,
}
STRUCTURED_TARGET = {
    "manual_issue_fix": 52,
    "proceed_next_step": 27,
    "feature_planning": 5,
    "new_feature_implementation": 5,
    "other": 11,
}

REQUIREMENTS = [
    ("functional", "The system shall list all orderable products with name, price and category."),
    ("functional", "The system shall show allergen, diet and ingredient information for each product."),
    ("functional", "The system shall let customers search products by name."),
    ("functional", "The system shall display prices including VAT with two decimals."),
    ("functional", "The system shall show opening hours and disable ordering while the snack bar is closed."),
    ("functional", "Administrators shall be able to create, edit and archive products."),
    ("functional", "Administrators shall be able to manage product categories."),
    ("functional", "Administrators shall be able to attach a photo to a product."),
    ("functional", "Product availability shall follow manual toggles and stock levels."),
    ("functional", "All menu and stock changes shall be recorded in an audit history."),
    ("functional", "Administrators shall be able to schedule a daily special with its own price."),
    ("functional", "Customers shall register and sign in with a university email address."),
    ("functional", "Customers shall be able to reset a forgotten password by email."),
    ("functional", "Access to administrative functions shall be restricted by role."),
    ("functional", "Sessions shall expire after 30 minutes of inactivity and on logout."),
    ("functional", "Customers shall be able to add, change and remove cart items."),
    ("functional", "The cart shall show an always up-to-date total."),
    ("functional", "The cart shall persist between visits for seven days."),
    ("functional", "Customers shall be able to add a preparation note to a cart item."),
    ("functional", "Customers shall be able to apply one discount code per order."),
    ("functional", "Customers shall be able to check out a cart into a pickup order."),
    ("functional", "Customers shall choose a pickup slot with limited capacity."),
    ("functional", "Customers shall see their order history and reorder past orders."),
    ("functional", "Orders shall be cancellable until preparation starts, with refund."),
    ("functional", "Staff shall process orders through a queue with defined status transitions."),
    ("functional", "The system shall accept card and mobile payments through a payment provider."),
    ("functional", "The system shall issue receipts with a VAT breakdown."),
    ("functional", "The system shall provide sales reports, exports and a dashboard."),
    ("functional", "Customers shall see the live status of their order."),
    ("functional", "Customers shall be notified when an order is ready or delayed."),
    ("non_functional", "The menu shall load within 2 seconds for 200 concurrent users."),
    ("non_functional", "The service shall be available during opening hours and recover automatically."),
    ("non_functional", "The user interface shall meet WCAG 2.1 AA."),
    ("non_functional", "All traffic shall be encrypted and authentication shall be rate limited."),
    ("non_functional", "Personal data shall be exportable and deletable on request."),
]

C4 = {
    "elements": [
        ("customer", "Customer", "context", None, "Student or employee ordering snacks."),
        ("staff", "Snack bar staff", "context", None, "Prepares orders and maintains the menu."),
        ("snackbar-system", "Snack bar ordering system", "context", None, "Web application for ordering snacks for pickup."),
        ("payment-provider", "Payment provider", "context", None, "External card and mobile payment service."),
        ("email-service", "Email service", "context", None, "External transactional email delivery."),
        ("web-frontend", "Web frontend", "container", "snackbar-system", "Single-page application served to browsers."),
        ("api-backend", "API backend", "container", "snackbar-system", "REST API implementing the ordering domain."),
        ("database", "Database", "container", "snackbar-system", "PostgreSQL database."),
        ("menu-page", "Menu page", "component", "web-frontend", "Menu listing, search and filters."),
        ("cart-page", "Cart and checkout pages", "component", "web-frontend", "Cart editing and checkout flow."),
        ("admin-dashboard", "Admin dashboard", "component", "web-frontend", "Product, stock and report screens."),
        ("catalog-service", "Catalog service", "component", "api-backend", "Products, categories and specials."),
        ("auth-service", "Auth service", "component", "api-backend", "Accounts, sessions and roles."),
        ("cart-service", "Cart service", "component", "api-backend", "Cart persistence and pricing."),
        ("order-service", "Order service", "component", "api-backend", "Checkout, queue and order status."),
        ("payment-service", "Payment service", "component", "api-backend", "Provider adapter and webhooks."),
        ("inventory-service", "Inventory service", "component", "api-backend", "Stock levels and movements."),
        ("reporting-service", "Reporting service", "component", "api-backend", "Sales reports and exports."),
        ("notification-service", "Notification service", "component", "api-backend", "Email and push notifications."),
        ("price-calculator", "Price calculator", "code", "cart-service", "VAT, discount and total computation."),
        ("order-state-machine", "Order state machine", "code", "order-service", "Allowed order status transitions."),
    ],
    "relations": [
        ("customer", "snackbar-system", "orders snacks using"),
        ("staff", "snackbar-system", "manages menu and orders in"),
        ("snackbar-system", "payment-provider", "charges payments via"),
        ("snackbar-system", "email-service", "sends email via"),
        ("web-frontend", "api-backend", "calls JSON/HTTPS"),
        ("api-backend", "database", "reads and writes"),
        ("cart-service", "catalog-service", "reads prices from"),
        ("order-service", "cart-service", "converts carts from"),
        ("order-service", "payment-service", "requests payment from"),
        ("order-service", "inventory-service", "reserves stock in"),
        ("order-service", "notification-service", "publishes status to"),
        ("reporting-service", "order-service", "reads orders from"),
    ],
    "path_mappings": [
        ("frontend/src/menu/", "menu-page"),
        ("frontend/src/cart/", "cart-page"),
        ("frontend/src/admin/", "admin-dashboard"),
        ("backend/src/catalog/", "catalog-service"),
        ("backend/src/auth/", "auth-service"),
        ("backend/src/cart/", "cart-service"),
        ("backend/src/cart/pricing/", "price-calculator"),
        ("backend/src/orders/", "order-service"),
        ("backend/src/orders/state/", "order-state-machine"),
        ("backend/src/payments/", "payment-service"),
        ("backend/src/inventory/", "inventory-service"),
        ("backend/src/reports/", "reporting-service"),
        ("backend/src/notify/", "notification-service"),
        ("db/migrations/", "database"),
    ],
}

ADRS = [
    dict(id="ADR-0001", title="Use PostgreSQL for persistence", status="accepted", date="2025-09-01",
         context="Orders, stock and payments need transactional consistency. The team already operates PostgreSQL for other campus services.",
         decision="Store all domain data in a single PostgreSQL database accessed through the API backend only.",
         consequences="Row-level locking is available for stock reservation. The frontend never talks to the database directly."),
    dict(id="ADR-0002", title="REST API with JSON payloads", status="accepted", date="2025-09-01",
         context="The frontend is a single-page application and the reporting export is consumed by scripts.",
         decision="Expose a versioned REST API under /api/v1 with JSON request and response bodies.",
         consequences="Contract tests run against the OpenAPI description. Breaking changes need a new version prefix."),
    dict(id="ADR-0003", title="Server-side sessions with cookies", status="superseded", date="2025-09-08",
         context="Customers and staff sign in from browsers only.",
         decision="Keep sessions in the database and identify them with an HTTP-only cookie.",
         consequences="Every request needs a session lookup. Horizontal scaling requires shared session storage."),
    dict(id="ADR-0004", title="Short-lived access tokens with refresh cookie", status="accepted", date="2025-10-06",
         supersedes="ADR-0003",
         context="The kiosk display and the staff queue screen need API access without a browser session, and session lookups showed up in load tests.",
         decision="Issue 15-minute signed access tokens and keep a rotating refresh token in an HTTP-only cookie.",
         consequences="Session lookups disappear from the hot path. Token revocation relies on short lifetimes and refresh rotation."),
    dict(id="ADR-0005", title="Payment provider behind an adapter", status="accepted", date="2025-10-13",
         context="The university may change its payment provider when the current contract ends.",
         decision="Wrap the provider API in a payment-service adapter and confirm payments only through signed webhooks.",
         consequences="Switching providers touches one component. Order status never trusts client-side payment results."),
    dict(id="ADR-0006", title="Server-sent events for order status", status="proposed", date="2025-11-03",
         context="Customers watch the order status page while walking to the counter.",
         decision="Push order status changes to the browser with server-sent events and fall back to polling every 10 seconds.",
         consequences="Status updates arrive within seconds. Proxies must allow long-lived HTTP responses."),
]

SHIFT_UP_TEXTS = {
    "proceed_next_step": [
        "Proceed.", "Continue.", "Continue with the next subtask.", "Go ahead with the implementation.",
        "Proceed with subtask {n}.", "Carry on with the plan.", "Continue, the previous subtask is done.",
        "Go ahead and write the service layer.", "Proceed to the frontend part.",
    ],
    "execute_acceptance_tests": [
        "Run the acceptance tests for {issue}.", "Execute the robot tests linked to this issue.",
        "Run the tests again and report the failing ones.", "Run the acceptance tests before we continue.",
    ],
    "developer_identified_fix": [
        "The total in the cart summary is wrong after removing a line, fix it.",
        "There is a bug in the pickup slot validation, fix it.",
        "The login error message is shown twice, fix the form handler.",
        "Stock goes negative when two orders arrive together, fix the locking.",
    ],
    "accept_agent_solution": [
        "Accept your proposed solution.", "Looks good, go with option B.", "Approved, use your second approach.",
        "Looks good to me.",
    ],
    "initiate_next_plan_step": [
        "Open the next issue from the roadmap: {issue}.", "Start phase {phase}.",
        "Open the next issue and draft a plan.",
    ],
}

STRUCTURED_TEXTS = {
    "manual_issue_fix": [
        "The menu page doesn't work after adding an item, fix it.", "Checkout button is broken in the GUI.",
        "Login is not working on the staff page.", "The cart page crashes when the quantity is empty.",
        "The order queue shows an error after refresh, fix it.", "Prices show three decimals, that's a bug.",
        "The admin form doesn't work when the name has an umlaut.",
    ],
    "proceed_next_step": [
        "Continue.", "Proceed with the next step.", "Go ahead.", "Carry on with what you were doing.",
    ],
    "feature_planning": [
        "Make a plan for the admin dashboard feature.", "Let's do some planning for payments first.",
        "Design the data model for stock before writing code.",
    ],
    "new_feature_implementation": [
        "Implement the order history page.", "Add a search field to the menu.",
        "Create the CSV export for the sales report.", "Build the pickup slot selector.",
    ],
    "other": [
        "Explain what this file does.", "Summarize the current progress.", "Which libraries are we using?",
        "Explain how the database schema works.",
    ],
}


def canonical(obj):
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def rounded_percent(count, total):
    q, r = divmod(100 * count, total)
    if 2 * r > total or (2 * r == total and q % 2 == 1):
        q += 1
    return q


def composition(targets, total):
    """Counts summing to `total` whose half-to-even percentages equal `targets`,
    closest to the exact shares; ties broken lexicographically."""
    ranges = []
    for t in targets:
        lo = max(0, (t - 1) * total // 100)
        ranges.append([c for c in range(lo, (t + 1) * total // 100 + 2) if rounded_percent(c, total) == t])
    best = None
    for combo in itertools.product(*ranges):
        if sum(combo) != total:
            continue
        dist = sum(abs(100 * c - t * total) for c, t in zip(combo, targets))
        if best is None or (dist, combo) < best:
            best = (dist, combo)
    if best is None:
        raise SystemExit("no composition matches the target percentages")
    return list(best[1])


def parse_source(path):
    phases, stories, tests, issues = [], [], [], []
    story = issue = phase = None
    for raw in path.read_text(encoding="utf-8").splitlines():
        if not raw.strip() or raw.startswith("#"):
            continue
        kind, body = raw[0], raw[2:]
        if kind == "P":
            pid, name, goal, tasks, deps = [x.strip() for x in body.split("|")]
            phase = dict(id=pid, name=name, goal=goal,
                         architecture_tasks=[t.strip() for t in tasks.split(";") if t.strip()],
                         depends_on=[d.strip() for d in deps.split(";") if d.strip()], test_ids=[])
            phase["file"] = "%02d-%s.gwt" % (len(phases) + 1, name.lower().split()[0])
            phases.append(phase)
        elif kind == "I":
            title, desc = [x.strip() for x in body.split("|")]
            issue = dict(id="ISS-%d" % (len(issues) + 1), phase_ref=phase["id"], title=title, description=desc,
                         constraint_test_ids=[], status="open")
            issues.append(issue)
        elif kind == "S":
            role, goal, benefit, refs = [x.strip() for x in body.split("|")]
            story = dict(id="US-%d" % (len(stories) + 1), as_a=role, i_want=goal, so_that=benefit,
                         requirement_refs=[r.strip() for r in refs.split(",")])
            stories.append(story)
        elif kind == "T":
            name, spec = body.split("::")
            clauses = []
            for part in spec.split("|"):
                part = part.strip()
                clauses.append(({"G": "given", "W": "when", "T": "then"}[part[0]], part[2:].strip()))
            tid = "TC-%d" % (len(tests) + 1)
            tests.append(dict(id=tid, story_ref=story["id"], name=name.strip(), clauses=clauses, file=phase["file"]))
            phase["test_ids"].append(tid)
            issue["constraint_test_ids"].append(tid)
    return phases, stories, tests, issues


def render_gwt(tests):
    blocks = []
    for t in tests:
        lines = ["test: " + t["id"], "story: " + t["story_ref"], "name: " + t["name"]]
        prev = None
        for kind, text in t["clauses"]:
            kw = "And" if kind == prev else kind.capitalize()
            lines.append(kw + " " + text)
            prev = kind
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def slug(title):
    out, dash = "", False
    for ch in title:
        if ch.isascii() and ch.isalnum():
            if dash and out:
                out += "-"
            out += ch.lower()
            dash = False
        else:
            dash = True
    return out or "record"


def render_adr(a):
    head = ["---", "id: " + a["id"], "title: " + a["title"], "status: " + a["status"], "date: " + a["date"]]
    if "supersedes" in a:
        head.append("supersedes: " + a["supersedes"])
    head.append("---")
    return ("\n".join(head) + "\n\n## Context\n\n" + a["context"] + "\n\n## Decision\n\n" + a["decision"] +
            "\n\n## Consequences\n\n" + a["consequences"] + "\n")


def prompt_log(issues, phases, rng):
    shift_up_counts = composition(list(SHIFT_UP_TARGET.values()), PROMPTS_PER_PARADIGM)
    structured_counts = composition(list(STRUCTURED_TARGET.values()), PROMPTS_PER_PARADIGM)
    records = []
    for paradigm, counts, texts in (
        ("shift_up", dict(zip(SHIFT_UP_TARGET, shift_up_counts)), SHIFT_UP_TEXTS),
        ("structured_vibe", dict(zip(STRUCTURED_TARGET, structured_counts)), STRUCTURED_TEXTS),
    ):
        labels = [c for c, n in counts.items() for _ in range(n)]
        rng.shuffle(labels)
        for i, label in enumerate(labels):
            issue = issues[i * len(issues) // len(labels)]
            pool = texts[label]
            text = pool[rng.randrange(len(pool))].format(n=rng.randint(1, 5), issue=issue["id"], phase=issue["phase_ref"])
            day, minute = divmod(i * 37, 8 * 60)
            ts = "2025-%s-%02dT%02d:%02d:00Z" % ("10" if paradigm == "shift_up" else "11", 1 + day, 8 + minute // 60, minute % 60)
            rec = {"ts": ts, "paradigm": paradigm, "text": text, "label": label}
            if paradigm == "shift_up":
                rec["issue"] = issue["id"]
            records.append(rec)
    return records, structured_counts


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(HERE.parent.parent / "fixtures" / "snackbar"))
    ap.add_argument("--seed", type=int, default=2025)
    args = ap.parse_args()
    out = Path(args.out)

    phases, stories, tests, issues = parse_source(HERE / "snackbar_stories.txt")
    if out.exists():
        shutil.rmtree(out)

    def write(rel, text):
        p = out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(text.encode("utf-8"))

    manifest = {
        "name": "snackbar",
        "agent": {"kind": "mock", "seed": 42, "targeted_success_p": 0.5, "untargeted_success_p": 0.1,
                  "regression_rate": 0.05, "command": "", "timeout_seconds": 600},
        "runner": {"command": ""},
        "loop": {"max_iterations": 25, "require_plan_approval": True},
        "service": {"port": 8080},
    }
    write("shiftup.json", canonical(manifest))
    write("requirements/requirements.json", canonical({"requirements": [
        {"id": "REQ-%d" % (i + 1), "kind": k, "text": t} for i, (k, t) in enumerate(REQUIREMENTS)]}))
    write("stories/stories.json", canonical({"stories": stories}))
    write("roadmap/phases.json", canonical({"phases": [
        {k: p[k] for k in ("id", "name", "goal", "architecture_tasks", "test_ids", "depends_on")} for p in phases]}))

    elements = []
    for eid, name, level, parent, desc in C4["elements"]:
        e = {"id": eid, "name": name, "level": level, "description": desc}
        if parent:
            e["parent"] = parent
        elements.append(e)
    write("architecture/c4.json", canonical({
        "elements": elements,
        "relations": [{"from": f, "to": t, "label": l} for f, t, l in C4["relations"]],
        "path_mappings": [{"path_prefix": p, "element_id": e} for p, e in C4["path_mappings"]],
    }))
    for a in ADRS:
        write("architecture/adr/%s-%s.md" % (a["id"], slug(a["title"])), render_adr(a))

    for p in phases:
        write("tests/" + p["file"], render_gwt([t for t in tests if t["file"] == p["file"]]))

    for iss in issues:
        links = ["architecture/c4.json", "roadmap/phases.json#" + iss["phase_ref"]]
        write("issues/%s.json" % iss["id"], canonical(dict(iss, context_links=links)))

    rng = random.Random(args.seed)
    records, structured = prompt_log(issues, phases, rng)
    write("logs/prompts.jsonl", "".join(json.dumps(r, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"
                                        for r in records))

    print("wrote %s: %d requirements, %d stories, %d tests, %d phases, %d issues, %d prompts per paradigm"
          % (out, len(REQUIREMENTS), len(stories), len(tests), len(phases), len(issues), PROMPTS_PER_PARADIGM))
    print("structured_vibe counts:", dict(zip(STRUCTURED_TARGET, structured)))


if __name__ == "__main__":
    main()
