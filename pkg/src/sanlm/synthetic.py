"""Synthetic desk-scale data: a templated grammar and corrupted N-best lists.

Sentences come from a fixed topic-structured grammar over ~200 word
types: a handful of function words plus topic clusters of content words.
Every content word in a sentence is drawn from one topic, so a masked or
next word is strongly predictable from its neighbours — a small model
can learn the corpus quickly, which is what the trend experiments need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import RngState

FUNCTION_WORDS = ["the", "a", "near", "with", "then", "now", "very", "so"]

N_TOPICS = 24
WORDS_PER_TOPIC = 8  # 3 nouns, 3 verbs, 2 adjectives


@dataclass(frozen=True)
class Grammar:
    topics: tuple  # per topic: (nouns, verbs, adjectives)

    @property
    def content_words(self) -> list[str]:
        out = []
        for nouns, verbs, adjs in self.topics:
            out.extend(nouns + verbs + adjs)
        return out

    @property
    def all_words(self) -> list[str]:
        return FUNCTION_WORDS + self.content_words


def default_grammar() -> Grammar:
    topics = []
    for t in range(N_TOPICS):
        nouns = tuple(f"noun{t}{chr(ord('a') + i)}" for i in range(3))
        verbs = tuple(f"verb{t}{chr(ord('a') + i)}" for i in range(3))
        adjs = tuple(f"adj{t}{chr(ord('a') + i)}" for i in range(2))
        topics.append((nouns, verbs, adjs))
    return Grammar(tuple(topics))


def generate_sentence(grammar: Grammar, rng: RngState) -> list[str]:
    """One templated sentence, all content words from a single topic."""
    nouns, verbs, adjs = grammar.topics[int(rng.integers(0, len(grammar.topics)))]

    def pick(words):
        return words[int(rng.integers(0, len(words)))]

    template = int(rng.integers(0, 3))
    if template == 0:   # the ADJ NOUN VERB the NOUN
        return ["the", pick(adjs), pick(nouns), pick(verbs), "the", pick(nouns)]
    if template == 1:   # the NOUN VERB the ADJ NOUN now
        return ["the", pick(nouns), pick(verbs), "the", pick(adjs),
                pick(nouns), "now"]
    # the ADJ NOUN VERB near the ADJ NOUN
    return ["the", pick(adjs), pick(nouns), pick(verbs), "near", "the",
            pick(adjs), pick(nouns)]


def generate_corpus(grammar: Grammar, n_sentences: int, seed: int) -> list[str]:
    rng = RngState(seed)
    return [" ".join(generate_sentence(grammar, rng))
            for _ in range(n_sentences)]


def part_of_speech(grammar: Grammar, word: str) -> str:
    """'n', 'v' or 'a' for content words, 'f' for everything else."""
    for nouns, verbs, adjs in grammar.topics:
        if word in nouns:
            return "n"
        if word in verbs:
            return "v"
        if word in adjs:
            return "a"
    return "f"


def _pos_pool(grammar: Grammar, pos: str) -> list[str]:
    index = {"n": 0, "v": 1, "a": 2}[pos]
    pool = []
    for topic in grammar.topics:
        pool.extend(topic[index])
    return pool


def corrupt_sentence(tokens: list[str], grammar: Grammar, rng: RngState,
                     n_substitutions: int, early: bool = False,
                     same_pos: bool = False) -> list[str]:
    """Replace words with random content words (positions uniform or early).

    With same_pos=True only content-word positions are touched and the
    replacement keeps the original word's part of speech, which makes the
    corruption much harder to spot than a crude cross-category swap.
    """
    out = list(tokens)
    n = len(out)
    limit = min(n, 4) if early else n
    if same_pos:
        candidates = [i for i in range(limit)
                      if part_of_speech(grammar, out[i]) != "f"]
        if not candidates:
            candidates = [i for i in range(n)
                          if part_of_speech(grammar, out[i]) != "f"][:1]
    else:
        candidates = list(range(limit))
    n_substitutions = min(n_substitutions, len(candidates))
    positions = rng.choice(len(candidates), size=n_substitutions)
    for p in positions:
        pos = candidates[int(p)]
        if same_pos:
            pool = _pos_pool(grammar, part_of_speech(grammar, out[pos]))
        else:
            pool = grammar.content_words
        replacement = pool[int(rng.integers(0, len(pool)))]
        while replacement == out[pos]:
            replacement = pool[int(rng.integers(0, len(pool)))]
        out[pos] = replacement
    return out


def make_nbest_lists(grammar: Grammar, n_lists: int, seed: int,
                     n_corrupted: int = 4, corrupt_top_fraction: float = 0.4,
                     early: bool = False, same_pos: bool = False,
                     sub_count_weights: tuple = (1.0, 1.0, 1.0),
                     id_prefix: str = "utt"):
    """Synthetic N-best lists: the true sentence plus corrupted variants.

    Acoustic scores are arranged so a corrupted hypothesis outranks the
    truth in about `corrupt_top_fraction` of the lists. Each hypothesis
    carries 1 to 3 substitutions, drawn with sub_count_weights.
    """
    from .rescoring import NBestEntry, NBestList  # avoid an import cycle

    weights = np.asarray(sub_count_weights, dtype=float)
    weights = weights / weights.sum()
    rng = RngState(seed)
    lists = []
    for idx in range(n_lists):
        truth = generate_sentence(grammar, rng)
        truth_am = -0.3 * len(truth) + 0.05 * float(rng.normal(()))
        entries = [NBestEntry(" ".join(truth), truth_am)]
        corrupted_beats_truth = float(rng.uniform(())) < corrupt_top_fraction
        winner = int(rng.integers(0, n_corrupted)) if corrupted_beats_truth else -1
        for c in range(n_corrupted):
            u = float(rng.uniform(()))
            n_subs = 1 + int(np.searchsorted(np.cumsum(weights), u))
            n_subs = min(n_subs, 3)
            hyp = corrupt_sentence(truth, grammar, rng, n_subs, early, same_pos)
            gap = 0.2 + 0.3 * float(rng.uniform(()))
            am = truth_am + gap if c == winner else truth_am - gap
            entries.append(NBestEntry(" ".join(hyp), am))
        entries.sort(key=lambda e: -e.am_score)
        lists.append(NBestList(f"{id_prefix}{idx:04d}", entries,
                               reference=" ".join(truth)))
    return lists
