#!/usr/bin/env python3
"""Regenerates the bundled synthetic corpora, predictions and audit labels.

Everything is derived from a fixed seed, so rerunning the script reproduces
data/synthetic byte for byte.
"""
import argparse
import json
import random
from pathlib import Path

VARIANTS = ["BabyThink", "Detailed", "Lengthy", "Summarized"]
FAMILIES = {"small-8b": 0.0, "large-11b": 0.1}
BENCHMARKS = ["MoT-PL", "LightR1", "Bel-PL"]


def math_item(r, i):
    a, b = r.randint(11, 40), r.randint(3, 9)
    obj = r.choice(["pencils", "apples", "tiles", "bottles"])
    c = r.choice(["box", "crate", "pack"])
    q = f"A store puts {a} {obj} in each {c}. How many {obj} are in {b} {c}es?"
    facts = [f"Each {c} holds {a} {obj}.", f"There are {b} {c}es."]
    calc = f"{a} * {b} = {a * b}"
    return q, facts, calc, str(a * b), (a, b, "*", a * b)


def code_item(r, i):
    n = r.randint(4, 9)
    vals = [r.randint(1, 20) for _ in range(n)]
    s = sum(vals)
    q = f"What does sum(xs) return in Python for xs = {vals}?"
    facts = [f"The list has {n} integers.", "The built-in sum() adds the elements from left to right."]
    head = vals[0] + vals[1]
    calc = f"{vals[0]} + {vals[1]} = {head}"
    return q, facts, calc, str(s), (vals[0], vals[1], "+", head)


def science_item(r, i):
    d, t = r.choice([(60, 2), (90, 3), (120, 4), (150, 5), (84, 6)])
    q = f"A cyclist covers {d} km in {t} hours at constant speed. What is the average speed in km per hour?"
    facts = [f"The distance is {d} km.", f"The time taken is {t} hours.", "Average speed is distance divided by time."]
    calc = f"{d} / {t} = {d // t}"
    return q, facts, calc, f"{d // t} km/h", (d, t, "/", d // t)


MAKERS = {"math": math_item, "code": code_item, "science": science_item}


def domains_for(n, r):
    # 28 / 17 / 55 mix, rounded, then shuffled.
    k_math, k_code = round(n * 0.28), round(n * 0.17)
    ds = ["math"] * k_math + ["code"] * k_code + ["science"] * (n - k_math - k_code)
    r.shuffle(ds)
    return ds


def reasoning(variant, facts, calc, answer, eq, i):
    a, b, op, res = eq
    if variant == "BabyThink":
        return f"We look at the numbers. {facts[0]} So the answer is {answer}."
    if variant == "Summarized":
        return f"{calc}. Answer: {answer}."
    if variant == "Detailed":
        steps = facts + [f"Compute {calc}.", f"Therefore the result is {answer}."]
        return " ".join(steps)
    # Lengthy: restates itself and slips on arithmetic now and then.
    slip = f"{a} {op} {b} = {res + 1}" if i % 5 == 0 else calc
    steps = facts + [
        "Let me think about this carefully.",
        f"Compute {slip}.",
        f"Let me double check: {calc}.",
        f"Let me double check: {calc}.",
        "Hmm, that seems fine.",
        f"Therefore the result is {answer}.",
    ]
    return " ".join(steps)


def make_examples(n, seed, prefix):
    r = random.Random(seed)
    items = []
    for i, dom in enumerate(domains_for(n, r)):
        q, facts, calc, ans, eq = MAKERS[dom](r, i)
        items.append({"id": f"{prefix}{i:04d}", "domain": dom, "query": q, "facts": facts, "calc": calc,
                      "answer": ans, "eq": eq})
    return items


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def corpus_rows(items, variant):
    rows = []
    for i, it in enumerate(items):
        rows.append({"id": it["id"], "domain": it["domain"], "query": it["query"],
                     "reasoning": reasoning(variant, it["facts"], it["calc"], it["answer"], it["eq"], i),
                     "answer": it["answer"], "meta": {"variant": variant}})
    return rows


def accuracy_of(family, variant, bench, bias):
    base = {"Original": 0.55, "BabyThink": 0.45, "Detailed": 0.7, "Lengthy": 0.5, "Summarized": 0.6}[variant]
    if family == "large-11b" and variant == "Lengthy":
        base = 0.8
    return min(0.95, base + bias + {"MoT-PL": 0.0, "LightR1": -0.15, "Bel-PL": 0.1}[bench])


def predictions(items, seed):
    r = random.Random(seed + 1)
    rows = []
    for family, bias in FAMILIES.items():
        for variant in ["Original"] + VARIANTS:
            for bench in BENCHMARKS:
                p = accuracy_of(family, variant, bench, bias)
                for it in items:
                    ok = r.random() < p
                    final = it["answer"] if ok else it["answer"] + "0"
                    rows.append({"example_id": it["id"], "benchmark": bench, "model": family,
                                 "model_variant": variant, "domain": it["domain"], "query": it["query"],
                                 "reference": it["answer"],
                                 "prediction": f"<think>{it['calc']}</think> {final}"})
    return rows


def audit_labels(n, seed):
    r = random.Random(seed + 2)
    rows = []
    for i in range(n):
        human = r.random() < 0.6
        judge = human if r.random() < 0.9 else not human
        rows.append({"example_id": f"audit{i:03d}", "human": human, "judge": judge})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "synthetic"))
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    items = make_examples(20, args.seed, "syn")
    for v in VARIANTS:
        write_jsonl(out / f"{v.lower()}.jsonl", corpus_rows(items, v))
    write_jsonl(out / "review50.jsonl", corpus_rows(make_examples(50, args.seed + 100, "rev"), "Lengthy"))
    write_jsonl(out / "predictions.jsonl", predictions(items, args.seed))
    write_jsonl(out / "audit.jsonl", audit_labels(60, args.seed))

    perf = {}
    for family, bias in FAMILIES.items():
        perf[family] = {}
        for bench in BENCHMARKS:
            base = accuracy_of(family, "Original", bench, bias)
            perf[family][bench] = {v: round(100 * (accuracy_of(family, v, bench, bias) - base) / base, 4)
                                   for v in VARIANTS}
    with open(out / "performance.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(perf, f, indent=2)
        f.write("\n")

    config = {
        "variants": {v: f"{v.lower()}.jsonl" for v in VARIANTS},
        "schema": "structured",
        "predictions": "predictions.jsonl",
        "audit_labels": "audit.jsonl",
        "performance": "performance.json",
        "output_dir": "out",
        "seed": 7,
        "fvcu_n": 12,
        "eval_n": 12,
        "offline": True,
    }
    with open(out / "config.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(config, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
