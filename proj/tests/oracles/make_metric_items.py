"""Writes the ten-item metric fixture used by the acceptance run."""
import json
import sys

FULL = (
    "[Recommended Formula] Ginger Decoction\n"
    "[Herbal Ingredients] dried ginger (sovereign); licorice (minister); jujube (assistant); scallion (courier)\n"
    "[Applicable Symptoms and Population] cold limbs\n"
    "[Pulse and Tongue Diagnosis] slow pulse\n"
    "[Contraindications] heat patterns\n"
    "[Preparation Methods] decoct in water"
)

ITEMS = [
    # identical answer
    (FULL, FULL),
    # two sections missing, one role wrong, one herb missing
    (
        "[Recommended Formula] Ginger Decoction\n"
        "[Herbal Ingredients] dried ginger (sovereign); licorice (assistant); jujube (assistant)\n"
        "[Applicable Symptoms and Population] cold limbs",
        FULL,
    ),
    # five herbs with the licorice-kansui pair
    (
        "[Recommended Formula] Water Drain Powder\n"
        "[Herbal Ingredients] kansui (sovereign); licorice (minister); poria; alisma; atractylodes\n"
        "[Contraindications] pregnancy. Use the formula with care.",
        "[Recommended Formula] Water Drain Powder\n"
        "[Herbal Ingredients] kansui (sovereign); poria (minister); alisma (assistant); atractylodes (courier)\n"
        "[Contraindications] pregnancy",
    ),
    # hallucinated formula name
    (
        "[Recommended Formula] Moonbeam Decoction\n"
        "[Herbal Ingredients] dried ginger (sovereign); licorice\n"
        "The pulse is slow. Ginger warms the middle.",
        FULL,
    ),
    # plain sentences only
    (
        "Ginger Decoction treats cold limbs. Ginger Decoction contains licorice. The pulse is slow. Rest well.",
        "Ginger Decoction treats cold limbs. Ginger Decoction contains dried ginger. The pulse is slow and deep.",
    ),
    # a single sentence
    ("Take ginger", "Take ginger tea daily"),
    # sovereign and minister swapped
    (
        "[Recommended Formula] Ginger Decoction\n"
        "[Herbal Ingredients] licorice (sovereign); dried ginger (minister); jujube (assistant); scallion (courier)\n"
        "[Preparation Methods] decoct in water",
        FULL,
    ),
    # reference without role annotations
    (
        "[Recommended Formula] Cough Syrup Formula\n"
        "[Herbal Ingredients] apricot kernel (sovereign); licorice\n"
        "[Applicable Symptoms and Population] cough with phlegm. Licorice soothes the cough.",
        "[Recommended Formula] Cough Syrup Formula\n"
        "[Herbal Ingredients] apricot kernel; licorice; platycodon\n"
        "[Applicable Symptoms and Population] cough with phlegm",
    ),
    # aconite-pinellia and veratrum-ginseng
    (
        "[Recommended Formula] Mixed Pill\n"
        "[Herbal Ingredients] aconite (sovereign); pinellia (minister); ginseng (assistant); veratrum (courier)\n"
        "[Pulse and Tongue Diagnosis] wiry pulse",
        "[Recommended Formula] Mixed Pill\n"
        "[Herbal Ingredients] aconite (sovereign); ginseng (minister)\n"
        "[Pulse and Tongue Diagnosis] wiry pulse",
    ),
    # token-disjoint text
    (
        "Rest and drink warm water. Sleep early tonight!",
        "[Recommended Formula] Ginger Decoction\n[Herbal Ingredients] dried ginger (sovereign)",
    ),
]

if __name__ == "__main__":
    out = sys.argv[1]
    with open(out, "w", encoding="utf-8") as f:
        for o, r in ITEMS:
            f.write(json.dumps({"output": o, "reference": r}, ensure_ascii=False) + "\n")
