"""Deterministic synthetic corpora in two contrasting styles.

Self-contained demos and tests need stylistically distinct text without
touching the network. Both generators expand seeded sentence templates, so
the same (seed, size) always yields byte-identical text. The chivalric
generator leans on archaic phrasing; the headline generator on terse,
verb-fronted news fragments. Their vocabularies overlap only partially.
"""
from __future__ import annotations

import random

_KNIGHTS = (
    "knight", "squire", "duke", "friar", "shepherd", "innkeeper", "barber",
    "curate", "herald", "pilgrim", "countess", "damsel", "page", "steward",
)
_ARCHAIC_ADJ = (
    "valorous", "woeful", "enchanted", "rusty", "noble", "errant", "sorrowful",
    "gallant", "ancient", "weary", "fabled", "courteous", "grievous", "humble",
)
_PLACES = (
    "castle", "meadow", "windmill", "village", "mountain", "crossroads",
    "chapel", "orchard", "tavern", "bridge", "forest", "plain", "tower",
)
_DEEDS = (
    "did battle with", "swore an oath to", "rode forth against",
    "took counsel with", "kept vigil over", "made amends to",
    "gave alms to", "broke a lance with", "paid homage to",
)
_CHIVALRIC_TEMPLATES = (
    "thou art a {adj} {who} , and thy {thing} shall be sung in every {place} .",
    "the {adj} {who} {deed} the {who2} beside the {place} .",
    "verily , quoth the {who} , never was there so {adj} a {thing} in all the realm .",
    "it came to pass that the {who} rode unto the {place} , seeking his {adj} {thing} .",
    "woe unto the {who2} , for the {adj} {who} hath taken the {thing} from the {place} .",
    "by my faith , said the {who} , i shall not rest until the {thing} is restored .",
    "the {who} and the {who2} tarried at the {place} , speaking of {adj} deeds .",
    "meseems the {thing} of the {who} was more {adj} than any in the {place} .",
)
_THINGS = (
    "helmet", "lance", "steed", "fortune", "honour", "lineage", "armour",
    "banner", "quest", "legend", "sword", "shield", "promise",
)

_SUBJECTS = (
    "officials", "markets", "lawmakers", "regulators", "scientists",
    "investors", "voters", "researchers", "companies", "residents",
    "ministers", "analysts", "unions", "courts",
)
_VERBS = (
    "approve", "reject", "probe", "warn of", "unveil", "delay", "boost",
    "slash", "back", "halt", "weigh", "announce", "dispute", "demand",
)
_OBJECTS = (
    "tax plan", "trade deal", "budget cuts", "energy policy", "merger",
    "rate hike", "health bill", "data breach", "port strike", "wage deal",
    "climate accord", "housing scheme", "export ban", "funding round",
)
_QUALIFIERS = (
    "amid protests", "after record losses", "despite warnings",
    "in surprise vote", "as talks stall", "ahead of summit",
    "following inquiry", "under new rules", "amid uncertainty",
)
_HEADLINE_TEMPLATES = (
    "{subj} {verb} {obj} {qual}",
    "{subj} {verb} {obj}",
    "breaking : {subj} {verb} {obj} {qual}",
    "{obj} in doubt as {subj} {verb} review",
    "why {subj} now {verb} the {obj}",
    "{subj} set to {verb} {obj} , sources say",
)


def chivalric_text(min_tokens: int, seed: int = 0) -> str:
    """Archaic narrative prose with at least ``min_tokens`` word tokens."""
    rng = random.Random(seed)
    sentences: list[str] = []
    count = 0
    while count < min_tokens:
        template = rng.choice(_CHIVALRIC_TEMPLATES)
        sentence = template.format(
            who=rng.choice(_KNIGHTS),
            who2=rng.choice(_KNIGHTS),
            adj=rng.choice(_ARCHAIC_ADJ),
            place=rng.choice(_PLACES),
            deed=rng.choice(_DEEDS),
            thing=rng.choice(_THINGS),
        )
        sentences.append(sentence)
        count += len(sentence.split())
    return "\n".join(sentences)


def headline_text(min_tokens: int, seed: int = 0) -> str:
    """Terse one-line news headlines with at least ``min_tokens`` word tokens."""
    rng = random.Random(seed)
    lines: list[str] = []
    count = 0
    while count < min_tokens:
        template = rng.choice(_HEADLINE_TEMPLATES)
        line = template.format(
            subj=rng.choice(_SUBJECTS),
            verb=rng.choice(_VERBS),
            obj=rng.choice(_OBJECTS),
            qual=rng.choice(_QUALIFIERS),
        )
        lines.append(line)
        count += len(line.split())
    return "\n".join(lines)
