"""Smoke test for the hatelab Python bindings.

Build and install first:  pip install --no-build-isolation ./crates/py
"""
import json
import random

import hatelab

SYLLABLES = ["က", "ခ", "ဂ", "မာ", "နိုင်", "ငံ", "သူ", "တို့", "လူ", "ကောင်း", "စာ", "ပါ", "မြန်", "ရေး", "အိမ်"]
TERMS = ["ခွေး", "သတ်"]


def post(i, hate, rng):
    words = [rng.choice(SYLLABLES) + rng.choice(SYLLABLES) for _ in range(8)]
    if hate:
        words.insert(rng.randrange(len(words)), rng.choice(TERMS))
    return {
        "post_id": f"p{i}",
        "source_id": f"s{i % 7}",
        "source_name": "page",
        "created_at": None,
        "fetched_at": None,
        "text": " ".join(words),
        "url": None,
        "interactions": 0,
    }


def main():
    v = hatelab.detect_encoding("မြန်မာ")
    assert v["label"] in ("unicode", "neutral"), v
    text, converted = hatelab.normalize("မြန်မာ")
    assert not converted and text == "မြန်မာ"

    syl = hatelab.segment_syllables("မြန်မာနိုင်ငံ")
    assert [s["text"] for s in syl] == ["မြန်", "မာ", "နိုင်", "ငံ"], syl
    assert hatelab.segment_words("မြန်မာနိုင်ငံ", words=["မြန်မာ", "နိုင်ငံ"]) == ["မြန်မာ", "နိုင်ငံ"]

    assert hatelab.percent_agreement(["Yes", "No", "No", "Yes"], ["Yes", "No", "Yes", "Yes"]) == 0.75
    assert abs(hatelab.cohen_kappa(["Yes", "No", "No", "Yes"], ["Yes", "No", "Yes", "Yes"]) - 0.5) < 1e-12

    lex = hatelab.Lexicon("\n".join(f"{t}\tsmoke" for t in TERMS), "smoke")
    assert len(lex) == 2
    hits = lex.match_terms("သူ ခွေး ပါ", "x")
    assert [h["term"]["term"] for h in hits] == ["ခွေး"], hits

    rng = random.Random(1)
    labels = {f"p{i}": i % 5 == 0 for i in range(200)}
    raw = [post(i, labels[f"p{i}"], rng) for i in range(200)]
    clean, report = hatelab.clean_posts(raw, lex, seed=7)
    assert report["seed"] == 7 and len(clean) > 150, report["steps"]
    assert len(clean) == report["steps"][-1]["output_count"]

    examples = [(p["post_id"], p["tokens"], labels[p["post_id"]]) for p in clean]
    cv = hatelab.cross_validate(examples, "svm", k=3, seed=7, oversample=True)
    assert cv["macro_f1"] > 0.5, cv["confusion"]

    model = hatelab.Model.train(examples, "svm", seed=7, oversample=True)
    again = hatelab.Model.from_json(model.to_json())
    assert again.to_json() == model.to_json()
    hate, score = model.predict(["သူ", "ခွေး"])
    assert 0.0 <= score <= 1.0 and hate == (score > 0.5)

    items = model.infer(clean)
    picked = hatelab.sample_for_review(items, 10, "uncertainty")
    assert len(picked) == 10
    for it in picked:
        it["expert_label"] = "Yes" if labels[it["post_id"]] else "No"
    analysis = hatelab.disagreement_report(picked)
    assert sum(analysis["counts"].values()) == 10, analysis

    print(json.dumps({"posts": len(clean), "cv_macro_f1": cv["macro_f1"], "review": analysis["counts"]}, ensure_ascii=False))
    print("smoke test passed")


if __name__ == "__main__":
    main()
