"""Name-based gender labelling and per-class gender distributions."""

from __future__ import annotations

import re
import unicodedata
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .dataset import EntityRegistry, GenderLabel, NameDictionary
from .validation import check_tau

_PAREN_RE = re.compile(r"\([^()]*\)")

DEFAULT_TAU = 0.1


@dataclass(frozen=True)
class ClassifierConfig:
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        check_tau(self.tau)


def normalize_given_name(label: str) -> str | None:
    """Reduce an article title or label to a dictionary lookup key.

    Parenthetical disambiguators are removed, underscores become spaces and
    the first whitespace-delimited token is NFKC-normalised and case-folded.
    Multi-word given names keep only their first word.

    Returns ``None`` when nothing usable is left.
    """
    text = label
    while True:
        stripped = _PAREN_RE.sub(" ", text)
        if stripped == text:
            break
        text = stripped
    text = text.replace("_", " ")
    tokens = text.split()
    if not tokens:
        return None
    key = unicodedata.normalize("NFKC", tokens[0]).casefold()
    return key or None


def classify_gender(name_key: str | None, dictionary: NameDictionary, cfg: ClassifierConfig = ClassifierConfig()) -> GenderLabel:
    """Threshold a name's female probability into female / male / undefined.

    Names missing from the dictionary are ``undefined``, like names whose
    probability falls strictly between ``tau`` and ``1 - tau``.
    """
    if name_key is None:
        return GenderLabel.UNDEFINED
    p = dictionary.lookup(name_key)
    if p is None:
        return GenderLabel.UNDEFINED
    if p >= 1.0 - cfg.tau:
        return GenderLabel.FEMALE
    if p <= cfg.tau:
        return GenderLabel.MALE
    return GenderLabel.UNDEFINED


def classify_registry(registry: EntityRegistry, dictionary: NameDictionary, cfg: ClassifierConfig = ClassifierConfig()) -> EntityRegistry:
    """Return a copy of ``registry`` with every entity's gender label (re)computed."""
    genders = {}
    for entity_id, entry in registry.items():
        label = entry.label or entity_id
        genders[entity_id] = classify_gender(normalize_given_name(label), dictionary, cfg)
    return registry.with_genders(genders)


@dataclass(frozen=True)
class GenderCounts:
    female: int = 0
    male: int = 0
    undefined: int = 0

    @property
    def total(self) -> int:
        return self.female + self.male + self.undefined


def gender_distribution(registry: EntityRegistry) -> dict[str, GenderCounts]:
    """Count female / male / undefined entities per class, classes sorted by id.

    An entity in several classes is counted once in each of them.
    """
    counts: dict[str, dict[GenderLabel, int]] = {}
    for entry in registry.values():
        for class_id in set(entry.class_ids):
            c = counts.setdefault(class_id, {g: 0 for g in GenderLabel})
            c[entry.gender] += 1
    return {
        class_id: GenderCounts(
            female=counts[class_id][GenderLabel.FEMALE],
            male=counts[class_id][GenderLabel.MALE],
            undefined=counts[class_id][GenderLabel.UNDEFINED],
        )
        for class_id in sorted(counts)
    }


def write_distribution_csv(distribution: dict[str, GenderCounts], sink) -> None:
    sink.write("class_id,female,male,undefined,total\n")
    for class_id, c in distribution.items():
        sink.write(f"{class_id},{c.female},{c.male},{c.undefined},{c.total}\n")


class GenderClassifier(TransformerMixin, BaseEstimator):
    """scikit-learn transformer mapping person names to gender labels.

    Parameters
    ----------
    dictionary : mapping of str to float
        Normalised given name -> probability of being female.
    tau : float, default=0.1
        Width of each confident band; probabilities in ``(tau, 1 - tau)``
        are left ``undefined``.

    Examples
    --------
    >>> clf = GenderClassifier({"samantha": 0.98, "alex": 0.5}).fit()
    >>> clf.transform(["Samantha_Cristoforetti", "Alex Smith", "Zzyzx"]).tolist()
    ['female', 'undefined', 'undefined']
    """

    def __init__(self, dictionary=None, tau=DEFAULT_TAU):
        self.dictionary = dictionary
        self.tau = tau

    def fit(self, X=None, y=None):
        check_tau(self.tau)
        d = self.dictionary if self.dictionary is not None else {}
        self.dictionary_ = d if isinstance(d, NameDictionary) else NameDictionary(d)
        self.config_ = ClassifierConfig(self.tau)
        return self

    def _labels(self, X: Iterable[str]) -> list[GenderLabel]:
        if not hasattr(self, "dictionary_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("GenderClassifier is not fitted yet; call fit() first")
        if isinstance(X, str):
            raise TypeError("expected an iterable of names, got a single string")
        return [classify_gender(normalize_given_name(str(x)), self.dictionary_, self.config_) for x in np.ravel(np.asarray(list(X), dtype=object))]

    def transform(self, X):
        return np.array([g.value for g in self._labels(X)], dtype=object)

    predict = transform
