"""Off-screen speaker supplementation.

Each turn-detected group is standardized to a main speaker chosen by vote.
Groups whose average novelty score falls below the threshold eta register a
new speaker from their mean timbre, or merge into an already-supplemented
speaker when the prototype similarity reaches epsilon. Active lines always
keep their visual anchor.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .features import LineFeatures
from .model import (
    Assignment,
    Origin,
    SpeakerId,
    Stage,
    cosine_similarity,
    mean_embedding,
)
from .registration import RegisteredSpeaker, SpeakerRegistry
from .turns import Group

ACTION_KEEP = "keep"
ACTION_NEW_SPEAKER = "new_speaker"
ACTION_MERGED = "merged"


@dataclass(frozen=True)
class GroupVerdict:
    """Audit record for one group's supplementation decision."""

    group: Group
    main_speaker: int
    novelty: float
    action: str
    assigned_speaker: int

    def __post_init__(self):
        if self.action not in (ACTION_KEEP, ACTION_NEW_SPEAKER, ACTION_MERGED):
            raise ValueError(f"unknown action {self.action!r}")


def line_novelty_score(
    line_id: int, features: dict[int, LineFeatures], registry: SpeakerRegistry
) -> float:
    """Novelty score for one line.

    Active lines score 1.0 (the visual anchor is trusted); the rest score
    their best timbre-prototype cosine over the visual-anchored speakers,
    so values near -1 mean "sounds like nobody registered".
    """
    anchored = registry.visual_anchored()
    if not anchored:
        raise ValueError("novelty scoring requires a non-empty anchored registry")
    f = features[line_id]
    if f.active:
        return 1.0
    return max(cosine_similarity(f.timbre_embedding, s.prototype) for s in anchored)


def group_novelty_score(sigmas: Sequence[float]) -> float:
    """Arithmetic mean of the per-line novelty scores of a group."""
    if len(sigmas) == 0:
        raise ValueError("novelty of an empty group is undefined")
    return sum(sigmas) / len(sigmas)


def group_main_speaker(
    group: Group,
    assignments: dict[int, Assignment],
    features: dict[int, LineFeatures],
    registry: SpeakerRegistry,
) -> int:
    """Main speaker of a group by plurality vote over initial assignments.

    Active-line votes count double. Ties break by the highest summed timbre
    similarity between the group's lines and the candidate's prototype, then
    by the smallest speaker id.
    """
    votes: Counter[int] = Counter()
    for line_id in group.line_ids:
        weight = 2 if features[line_id].active else 1
        votes[assignments[line_id].speaker.id] += weight
    top = max(votes.values())
    tied = sorted(c for c, v in votes.items() if v == top)
    if len(tied) == 1:
        return tied[0]
    best, best_sum = tied[0], -float("inf")
    for candidate in tied:
        proto = registry.get(candidate).prototype
        total = sum(
            cosine_similarity(features[s].timbre_embedding, proto)
            for s in group.line_ids
        )
        if total > best_sum:
            best, best_sum = candidate, total
    return best


def supplement(
    groups: Sequence[Group],
    initial: dict[int, Assignment],
    features: dict[int, LineFeatures],
    registry: SpeakerRegistry,
    eta: float,
    epsilon: float,
) -> tuple[SpeakerRegistry, dict[int, Assignment], list[GroupVerdict]]:
    """Standardize groups and register/merge off-screen speakers.

    Groups are processed in time order. Novel groups (novelty < eta) register
    their mean timbre as a new speaker, unless it matches an existing
    supplemented prototype at cosine >= epsilon, in which case the group
    merges into that speaker (prototype updated by support-size-weighted
    mean). Active lines are never reassigned.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be in [0, 1], got {eta}")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")

    final = dict(initial)
    verdicts: list[GroupVerdict] = []
    for group in groups:
        sigmas = [line_novelty_score(s, features, registry) for s in group.line_ids]
        novelty = group_novelty_score(sigmas)
        main = group_main_speaker(group, initial, features, registry)
        inactive = [s for s in group.line_ids if not features[s].active]

        if novelty < eta:
            mu_g = mean_embedding([features[s].timbre_embedding for s in group.line_ids])
            target: RegisteredSpeaker | None = None
            best_sim = -float("inf")
            for s in sorted(registry.supplemented(), key=lambda s: s.speaker.id):
                sim = cosine_similarity(mu_g, s.prototype)
                if sim > best_sim:
                    target, best_sim = s, sim
            if target is not None and best_sim >= epsilon:
                merged_support = target.support | frozenset(group.line_ids)
                n_old, n_new = len(target.support), len(group.line_ids)
                updated_proto = (
                    n_old * target.prototype + n_new * mu_g
                ) / (n_old + n_new)
                registry = registry.with_updated(
                    target.speaker.id, updated_proto, merged_support
                )
                speaker = target.speaker
                action = ACTION_MERGED
            else:
                speaker = SpeakerId(id=registry.next_id(), origin=Origin.SUPPLEMENTED)
                registry = registry.with_speaker(
                    RegisteredSpeaker(
                        speaker=speaker,
                        prototype=mu_g,
                        support=frozenset(group.line_ids),
                    )
                )
                action = ACTION_NEW_SPEAKER
            for s in inactive:
                final[s] = Assignment(
                    line_id=s,
                    speaker=speaker,
                    confidence=cosine_similarity(features[s].timbre_embedding, mu_g),
                    stage=Stage.SUPPLEMENTED,
                )
            assigned = speaker.id
        else:
            main_entry = registry.get(main)
            for s in inactive:
                final[s] = Assignment(
                    line_id=s,
                    speaker=main_entry.speaker,
                    confidence=cosine_similarity(
                        features[s].timbre_embedding, main_entry.prototype
                    ),
                    stage=Stage.GROUP_STANDARDIZED,
                )
            action = ACTION_KEEP
            assigned = main

        verdicts.append(
            GroupVerdict(
                group=group,
                main_speaker=main,
                novelty=novelty,
                action=action,
                assigned_speaker=assigned,
            )
        )
    return registry, final, verdicts
