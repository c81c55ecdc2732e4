#!/usr/bin/env python3
"""Regenerates the bundled fixtures under fixtures/.

Everything is synthetic and seeded; running the script twice produces
byte-identical files.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fixtures"

AR_WORDS = """
كتاب مدرسة طالب معلم بيت مدينة شارع سيارة طريق باب نافذة قلم ورقة درس
علم تاريخ لغة عربية شعر قصة رواية كاتب صحيفة خبر عالم بلد وطن شعب حكومة
وزير رئيس مجلس قانون حق عدل سلام حرب جيش أرض سماء بحر نهر جبل صحراء شمس
قمر نجم مطر ريح شجرة زهرة حديقة طعام خبز ماء حليب قهوة شاي سوق تاجر مال
عمل عامل مصنع شركة مكتب مشروع خطة فكرة سؤال جواب مشكلة حل نتيجة بداية نهاية
يوم ليلة صباح مساء أسبوع شهر سنة وقت ساعة دقيقة عائلة أب أم أخ أخت ابن بنت
صديق جار ضيف طبيب مستشفى دواء صحة مرض رياضة كرة فريق لاعب ملعب مباراة فوز
جميل كبير صغير جديد قديم طويل قصير سريع بطيء سهل صعب مهم مفيد واضح قريب بعيد
كتب قرأ ذهب جاء قال رأى سمع عرف فهم درس عمل سكن سافر رجع فتح أغلق بدأ انتهى
يكتب يقرأ يذهب يأتي يقول يرى يسمع يعرف يفهم يدرس يعمل يسكن يسافر يرجع يبحث
الكتاب المدرسة الطالب المعلم البيت المدينة الشارع الطريق الدرس العلم التاريخ
اللغة العربية الشعر القصة الرواية الصحيفة الخبر العالم البلد الوطن الحكومة
الأرض السماء البحر النهر الجبل الشمس القمر الماء السوق العمل الشركة المشروع
الفكرة المشكلة النتيجة اليوم الصباح المساء الأسبوع الشهر السنة الوقت العائلة
والكتاب والمدرسة والطالب بالعلم بالعمل للطالب للمدرسة فالعلم كالبحر وبالتالي
""".split()

AR_STOP = "في من إلى على عن مع هذا هذه ذلك التي الذي هو هي كان قد ثم أو و لا ما".split()

EN_WORDS = """
book school student teacher house city street car road door window pen paper
lesson science history language poem story novel writer newspaper news world
country people government minister council law right justice peace army land
sky sea river mountain desert sun moon star rain wind tree flower garden food
bread water milk coffee tea market trader money work worker factory company
office project plan idea question answer problem solution result beginning end
day night morning evening week month year time hour minute family father mother
brother sister son daughter friend neighbor guest doctor hospital medicine health
sport ball team player stadium match victory beautiful large small new old long
short fast slow easy hard important useful clear near far wrote read went came
said saw heard knew understood studied worked lived traveled returned opened
closed started finished writes reads goes comes says sees hears knows studies
builds carries measures improves compares explains describes considers follows
""".split()

EN_STOP = "the of and to in a is that for it on with as was at by this from or".split()


def zipf_choice(rng, words, s=1.1):
    weights = [1.0 / (i + 1) ** s for i in range(len(words))]
    return rng.choices(words, weights=weights)[0]


def sentence(rng, content, stop, n, punct):
    out = []
    for _ in range(n):
        if rng.random() < 0.3:
            out.append(rng.choice(stop))
        else:
            out.append(zipf_choice(rng, content))
    text = " ".join(out)
    if punct:
        text += rng.choice(punct)
    return text


def paragraph(rng, lang, words):
    content, stop, punct = (
        (AR_WORDS, AR_STOP, ["،", "؛", ""]) if lang == "ar" else (EN_WORDS, EN_STOP, [".", ",", ""])
    )
    parts = []
    left = words
    while left > 0:
        n = min(left, rng.randint(6, 14))
        parts.append(sentence(rng, content, stop, n, punct))
        left -= n
    return " ".join(parts)


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def write_json(path, value):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(value, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")


def doc(i, lang, text, url=None, score=0.99, domain="web", origin="natural"):
    d = {
        "id": i,
        "text": text,
        "lang": lang,
        "lang_score": score,
        "domain": domain,
        "origin": origin,
    }
    if url is not None:
        d["url"] = url
    return d


def corpora():
    for lang, seed in (("ar", 1), ("en", 2)):
        rng = random.Random(seed)
        rows = [
            doc(f"{lang}-{i:04d}", lang, paragraph(rng, lang, rng.randint(30, 90)),
                url=f"https://{lang}.example.org/{i}")
            for i in range(1000)
        ]
        write_jsonl(ROOT / "corpus" / f"{lang}_1000.jsonl", rows)
        rng = random.Random(seed + 100)
        rows = [doc(f"{lang}-train-{i:04d}", lang, paragraph(rng, lang, rng.randint(30, 90))) for i in range(400)]
        write_jsonl(ROOT / "corpus" / f"{lang}_train.jsonl", rows)


def filter_fixture():
    """100 documents: 62 clean, the rest with one planted violation each,
    plus boundary documents that must survive."""
    rng = random.Random(3)
    rows = []
    clean = []

    def fresh(i, words=None, **kw):
        lang = rng.choice(["ar", "en"])
        text = paragraph(rng, lang, words or rng.randint(35, 80))
        return doc(f"f-{i:03d}", lang, text, **kw)

    i = 0
    for _ in range(62):
        d = fresh(i, url=f"https://site.example/{i}", score=round(rng.uniform(0.96, 1.0), 3))
        rows.append(d)
        clean.append(d)
        i += 1
    # Boundaries that are kept: score exactly 0.95, exactly 30 words.
    rows.append(fresh(i, url=f"https://site.example/{i}", score=0.95)); i += 1
    rows.append(fresh(i, words=30, url=f"https://site.example/{i}")); i += 1
    # Low language score.
    for score in [0.94, 0.9, 0.5, 0.2, 0.0, 0.949, 0.8, 0.7, 0.6, 0.93]:
        rows.append(fresh(i, url=f"https://site.example/{i}", score=score)); i += 1
    # Short documents.
    for words in [29, 1, 5, 10, 20, 28, 15]:
        rows.append(fresh(i, words=words, url=f"https://site.example/{i}")); i += 1
    rows.append(doc(f"f-{i:03d}", "en", "", url=f"https://site.example/{i}")); i += 1
    # Duplicate URLs of earlier clean documents, with new text.
    for k in range(9):
        rows.append(fresh(i, url=clean[k * 5]["url"])); i += 1
    # Exact duplicate texts of earlier clean documents, new ids and URLs.
    for k in range(9):
        src = clean[k * 6 + 1]
        rows.append(doc(f"f-{i:03d}", src["lang"], src["text"], url=f"https://mirror.example/{i}")); i += 1
    assert len(rows) == 100, len(rows)
    order = list(range(62, 100))
    rng.shuffle(order)
    # Planted documents go after the clean ones they duplicate.
    write_jsonl(ROOT / "corpus" / "filter_100.jsonl", rows[:62] + [rows[j] for j in order])


def mixture_fixtures():
    B = 10**9
    write_json(ROOT / "mixture" / "sources.json", [
        {"name": "en", "language": "english", "origin": "natural", "domain": "web", "available_tokens": 660 * B},
        {"name": "ar-natural", "language": "arabic", "origin": "natural", "domain": "web", "available_tokens": 270 * B},
        {"name": "ar-translated", "language": "arabic", "origin": "translated", "domain": "web", "available_tokens": 270 * B},
    ])
    columns = [
        ("en", "english", "natural", 660, {"web": 31, "books": 9, "science": 16, "code": 39, "math": 5}),
        ("ar-natural", "arabic", "natural", 270,
         {"web": 71, "books": 13, "wiki": 0.7, "news": 14, "other": 1.3}),
        ("ar-translated", "arabic", "translated", 270,
         {"web": 65, "books": 12, "wiki": 0.61, "science": 22, "other": 0.39}),
    ]
    rows = []
    for prefix, lang, origin, total, shares in columns:
        for domain, pct in shares.items():
            rows.append({
                "name": f"{prefix}-{domain}",
                "language": lang,
                "origin": origin,
                "domain": domain,
                "available_tokens": round(total * B * pct / 100),
            })
    write_json(ROOT / "mixture" / "table1_sources.json", rows)


def conversation(rng, lang, turns):
    conv = []
    for _ in range(turns):
        conv.append({"role": "user", "text": paragraph(rng, lang, rng.randint(4, 20))})
        conv.append({"role": "assistant", "text": paragraph(rng, lang, rng.randint(8, 40))})
    return conv


def sft_fixtures():
    rng = random.Random(4)
    small = []
    for i in range(20):
        lang = "ar" if i % 2 else "en"
        small.append({"id": f"q-{i:02d}", "language": lang, "source": "synthetic",
                      "conversation": conversation(rng, lang, rng.randint(1, 3))})
    write_jsonl(ROOT / "sft" / "sft_20.jsonl", small)

    rows = []
    for i in range(200):
        lang = rng.choice(["ar", "en"])
        rows.append({"id": f"n-{i:03d}", "language": lang, "source": "synthetic",
                     "conversation": conversation(rng, lang, rng.randint(1, 4))})
    rows[57]["conversation"][-1]["text"] = "   "
    rows[143]["conversation"][1]["text"] = "```python\nprint(1)\n``` then ```"
    write_jsonl(ROOT / "sft" / "sft_noise_200.jsonl", rows)
    write_json(ROOT / "sft" / "sft_noise_200.expected.json",
               {"empty_response": ["n-057"], "unbalanced_markup": ["n-143"]})


def pref_fixture():
    rng = random.Random(5)
    n_seeds, per_seed = 1000, 10
    slots = [(s, c) for s in range(n_seeds) for c in range(per_seed)]
    planted = rng.sample(slots, 800)
    empty = set(planted[:500])
    equal = set(planted[500:])
    seeds = []
    for s in range(n_seeds):
        lang = rng.choice(["ar", "en"])
        accepted = paragraph(rng, lang, rng.randint(8, 25))
        cands = []
        for c in range(per_seed):
            if (s, c) in empty:
                text = rng.choice(["", " ", "\n"])
            elif (s, c) in equal:
                text = rng.choice([accepted.upper(), accepted + "!", "  " + accepted])
            else:
                text = f"{paragraph(rng, lang, rng.randint(6, 20))} {c}"
            cands.append({
                "text": text,
                "temperature": rng.choice([0.3, 0.7, 1.0, 1.2]),
                "top_p": rng.choice([0.8, 0.9, 0.95, 1.0]),
                "policy": "on_policy" if c < 5 else "off_policy",
            })
        seeds.append({"id": f"p-{s:04d}",
                      "prompt": [{"role": "user", "text": paragraph(rng, lang, rng.randint(5, 15))}],
                      "accepted": accepted, "candidates": cands})
    write_jsonl(ROOT / "pref" / "seeds_1000.jsonl", seeds)
    write_json(ROOT / "pref" / "seeds_1000.planted.json",
               {"seeds": n_seeds, "candidates": n_seeds * per_seed, "empty": len(empty), "equal_to_accepted": len(equal)})


def arena_fixture():
    rng = random.Random(6)
    strength = {"model-a": 1.0, "model-b": 0.6, "model-c": 0.3, "model-d": 0.0, "model-e": -0.4}
    models = sorted(strength)
    verdicts = ["a_wins", "b_wins", "tie", "both_bad"]
    rows = []
    for p in range(500):
        a, b = rng.sample(models, 2)
        gap = strength[a] - strength[b]
        pa = 0.35 + 0.25 * gap
        weights = [max(pa, 0.05), max(0.7 - pa, 0.05), 0.15, 0.1]
        votes = rng.choices(verdicts, weights=weights, k=3)
        if len(set(votes)) == 3:
            votes.append(rng.choices(verdicts, weights=weights)[0])
        for e, v in enumerate(votes):
            rows.append({"prompt_id": f"prompt-{p:03d}", "model_a": a, "model_b": b,
                         "evaluator_id": f"eval-{e}", "verdict": v})
    write_jsonl(ROOT / "arena" / "votes_500.jsonl", rows)


def templates():
    write_json(ROOT / "sft" / "template.json", {
        "bos": "<s>", "eos": "</s>",
        "role_prefixes": {"user": "User:", "assistant": "Assistant:"},
        "eos_after_intermediate": True, "max_len": None,
    })


def main():
    corpora()
    filter_fixture()
    mixture_fixtures()
    sft_fixtures()
    pref_fixture()
    arena_fixture()
    templates()


if __name__ == "__main__":
    main()
