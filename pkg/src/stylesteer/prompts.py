"""Default evaluation prompt set and steering-strength grid.

Twenty generic prompts across four categories (narrative, dialogue,
expository, technical) so sweeps probe qualitatively different inputs, and
the default fourteen-point lambda grid: dense below 0.3, coarser above.
"""
from __future__ import annotations

DEFAULT_LAMBDA_GRID = (
    0.00, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30,
    0.40, 0.50, 0.60, 0.70, 0.80, 0.90, 1.00,
)

NARRATIVE_PROMPTS = (
    "I still remember the moment when everything began to change",
    "At the edge of the city, far from the noise and lights",
    "She had promised herself she would never return to this place",
    "By the time anyone noticed the mistake, it was already too late",
    "The evening air carried a quiet sense of anticipation",
)

DIALOGUE_PROMPTS = (
    '"Are you sure this is the right decision?" he asked',
    '"If we don\'t act now, we may lose our only chance," she replied',
    '"That\'s not what I meant," they said patiently',
    '"Listen carefully, because I won\'t repeat this again,"',
    '"Look, here\'s the thing nobody wants to admit,"',
)

EXPOSITORY_PROMPTS = (
    "There are three main reasons why this issue is important.",
    "At first glance, it might seem that nothing unusual is happening.",
    "In recent years, many people have argued that this trend is accelerating.",
    "From a practical point of view, the situation can be summarized as follows.",
    "However, this explanation leaves out an important detail:",
)

TECHNICAL_PROMPTS = (
    "First, we outline the basic idea of the method.",
    "The system consists of three main components:",
    "The goal of this section is to show that the proposed approach is effective.",
    "If we compare these two approaches, we find that several key differences emerge.",
    "To understand this more clearly, consider the following example:",
)

DEFAULT_PROMPTS = (
    NARRATIVE_PROMPTS + DIALOGUE_PROMPTS + EXPOSITORY_PROMPTS + TECHNICAL_PROMPTS
)
