#!/usr/bin/env python3
"""Writes tests/fixtures/pipeline: a 20-example corpus, recorded API
responses, commit histories and a bot list. Prints the expected ledger and
quadrants computed by a direct re-scan."""

import json
import os
import shutil
from datetime import datetime, timedelta, timezone

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "pipeline")
BASE = datetime(2023, 1, 2, 9, 0, tzinfo=timezone.utc)


def iso(t):
    return t.strftime("%Y-%m-%dT%H:%M:%SZ")


def write(path, text):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", newline="\n") as f:
        f.write(text)


def dump(path, obj):
    write(path, json.dumps(obj, indent=1) + "\n")


# ---- commit histories ---------------------------------------------------------

commits = {"acme/widgets": [], "acme/gadgets": []}


def add_commits(repo, n, login, name, email, start):
    for i in range(n):
        commits[repo].append((start + timedelta(hours=7 * i), login, name, email))


t0 = datetime(2022, 3, 1, tzinfo=timezone.utc)
add_commits("acme/widgets", 30, "alice", "Alice Liddell", "alice@example.org", t0)
add_commits("acme/widgets", 20, "", "Alice L", "1234+Alice@users.noreply.github.com", t0 + timedelta(days=3))
add_commits("acme/widgets", 30, "carol", "Carol", "carol@example.org", t0 + timedelta(days=5))
add_commits("acme/widgets", 1, "bob", "Bob", "bob@example.org", t0 + timedelta(days=9))
add_commits("acme/widgets", 1, "", "Dave", "dave@example.org", t0 + timedelta(days=11))
add_commits("acme/widgets", 18, "zed", "Zed", "zed@example.org", t0 + timedelta(days=13))
add_commits("acme/gadgets", 12, "carol", "Carol", "carol@example.org", t0)
add_commits("acme/gadgets", 12, "zed", "Zed", "zed@example.org", t0 + timedelta(days=4))

# ---- historical reviews ---------------------------------------------------------

prs = {"acme/widgets": {}, "acme/gadgets": {}}
comment_id = [5000]


def comment(login, body, t):
    comment_id[0] += 1
    return {"id": comment_id[0], "user": None if login is None else {"login": login},
            "body": body, "created_at": iso(t)}


for i in range(40):
    number = i + 1
    t = BASE + timedelta(days=2 * i)
    people = ["zed"]
    if i % 5 == 0:
        people.append("alice")
    if i % 3 == 0:
        people.append("bob")
    prs["acme/widgets"][number] = {"created_at": t,
                                   "comments": [comment(p, "looks fine to me", t + timedelta(hours=1)) for p in people]}
for i in range(20):
    number = i + 1
    t = BASE + timedelta(days=3 * i)
    people = ["zed"] + (["bob"] if i % 2 == 0 else [])
    prs["acme/gadgets"][number] = {"created_at": t,
                                   "comments": [comment(p, "ok", t + timedelta(hours=2)) for p in people]}

# ---- the corpus -----------------------------------------------------------------
# (repo, split, reviewer, body, fate) where fate is kept, pr404, nomatch,
# ghost or the reviewer is a bot.

W, G = "acme/widgets", "acme/gadgets"
rows = [
    (W, "train", "alice", "Should this lock be released before the callback runs?", "kept"),
    (W, "train", "bob", "Nit: rename this to `buffer_size` for consistency.", "kept"),
    (W, "train", "dependabot[bot]", "```\nbump version\n```", "kept"),
    (W, "train", "carol", "This allocation happens on every call; can we hoist it?", "kept"),
    (W, "train", "alice", "`x += 1`", "kept"),
    (W, "train", "dave", "Missing a null check here.", "kept"),
    (W, "train", "Talbot", "Please add a test for the empty input.", "kept"),
    (W, "train", "bob", "Why not reuse the existing parser?", "nomatch"),
    (G, "train", "bob", "```cpp\nreturn std::move(v);\n```", "kept"),
    (G, "train", "zed", "The error message should name the file.", "pr404"),
    (W, "train", "bob", "Is this branch still reachable after the refactor?", "kept"),
    (W, "train", "alice", "Consider returning early to reduce nesting.", "kept"),
    (W, "validation", "alice", "Doc comment is out of date with the signature.", "kept"),
    (W, "validation", "ci-helper", "Coverage dropped by 0.3% on this file.", "kept"),
    (W, "validation", "bob", "This loop is quadratic for large inputs.", "kept"),
    (G, "validation", "dave", "Could we log the retry count here?", "kept"),
    (W, "test", "carol", "The timeout should come from the config, not a literal.", "kept"),
    (W, "test", "alice", "Does this handle the UTF-8 BOM case?", "kept"),
    (W, "test", "carol", "https://example.org/style-guide#naming", "kept"),
    (W, "test", "bob", "Who owns cleanup of this temp file?", "ghost"),
]

next_pr = {W: 101, G: 51}
corpus = []
for k, (repo, split, reviewer, body, fate) in enumerate(rows):
    number = next_pr[repo]
    next_pr[repo] += 1
    t = BASE + timedelta(days=90 + 2 * k)
    rec = {"repo": repo, "pr_id": number, "comment_id": 9000 + k,
           "m_pre": "@@ -1,3 +1,4 @@\n int f(int x) {\n-  return x;\n+  return g(x);\n }\n",
           "r_nl": body, "split": split, "language": "cpp"}
    corpus.append(rec)
    if fate == "pr404":
        continue
    comments = [comment("zed", "Thanks for the patch.", t + timedelta(minutes=30))]
    if fate == "kept":
        comments.append(comment(reviewer, body.replace("\n", "\r\n"), t + timedelta(hours=1)))
    elif fate == "ghost":
        comments.append(comment(None, body, t + timedelta(hours=1)))
    elif fate == "nomatch":
        comments.append(comment(reviewer, "An unrelated remark.", t + timedelta(hours=1)))
    prs[repo][number] = {"created_at": t, "comments": comments}

BOTS = "# known automation accounts\nci-helper\nrenovate\n\n# humans the suffix rule would catch\n!talbot\n"


def main():
    if os.path.exists(ROOT):
        shutil.rmtree(ROOT)
    write(os.path.join(ROOT, "corpus.jsonl"), "".join(json.dumps(r, sort_keys=True) + "\n" for r in corpus))
    write(os.path.join(ROOT, "bots.txt"), BOTS)
    for repo, events in commits.items():
        owner, name = repo.split("/")
        lines = [f"{int(t.timestamp())}\t{login}\t{nm}\t{email}\n" for t, login, nm, email in events]
        write(os.path.join(ROOT, "commits", owner, name + ".tsv"), "".join(lines))
    for repo, by_number in prs.items():
        owner, name = repo.split("/")
        listing = [{"number": n, "created_at": iso(p["created_at"]), "state": "closed"}
                   for n, p in sorted(by_number.items(), key=lambda kv: kv[1]["created_at"])]
        dump(os.path.join(ROOT, "api", "pulls-closed", owner, name, "page-1.json"), listing)
        for n, p in by_number.items():
            dump(os.path.join(ROOT, "api", "pr-comments", owner, name, str(n), "page-1.json"), p["comments"])
    expected()


def expected():
    bots = {"ci-helper", "renovate"}
    allow = {"talbot"}

    def is_bot(u):
        u = u.lower()
        return u not in allow and (u in bots or u.endswith("bot") or u.endswith("[bot]"))

    def natural(text):
        import re
        text = re.sub(r"```.*?(```|$)", " ", text, flags=re.S)
        text = re.sub(r"`[^`]*`", " ", text)
        text = re.sub(r"(https?://|www\.)\S*", " ", text)
        return any(c.isalpha() for c in text)

    ledger = {s: [0, 0, 0, 0, 0] for s in ("train", "validation", "test")}
    kept = []
    for (repo, split, reviewer, body, fate), rec in zip(rows, corpus):
        row = ledger[split]
        row[0] += 1
        if fate != "kept":
            row[1] += 1
        elif is_bot(reviewer):
            row[2] += 1
        elif not natural(body):
            row[3] += 1
        else:
            row[4] += 1
            kept.append((rec, reviewer))
    print("split,original,deleted,bots,code_only,final")
    for s, r in ledger.items():
        print(s + "," + ",".join(map(str, r)))

    def login_of(login, email):
        if login:
            return login.lower()
        if email.lower().endswith("@users.noreply.github.com"):
            return email.split("@")[0].split("+")[-1].lower()
        return None

    for rec, reviewer in kept:
        repo = rec["repo"]
        cutoff = prs[repo][rec["pr_id"]]["created_at"]
        window = [c for c in commits[repo] if c[0] < cutoff]
        alpha = sum(1 for c in window if login_of(c[1], c[3]) == reviewer.lower())
        reviews = [p for p in prs[repo].values() if p["created_at"] < cutoff and p["comments"]]
        logins = [{c["user"]["login"].lower() for c in p["comments"] if c["user"]} for p in reviews]
        r = sum(1 for s in logins if reviewer.lower() in s)
        aco = alpha / len(window) if window else 0.0
        rso = r / len(reviews) if reviews else 0.0
        quad = ("major_author" if aco >= 0.05 else "minor_author") + "_" + \
               ("major_reviewer" if rso >= 0.05 else "minor_reviewer")
        print(f"{rec['split']:<10} {repo:<13} pr={rec['pr_id']:<4} {reviewer:<7} "
              f"alpha={alpha}/{len(window)} r={r}/{len(reviews)} {quad}")


if __name__ == "__main__":
    main()
