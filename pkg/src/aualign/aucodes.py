"""AU vocabulary, movement descriptions, prompt templates, tokenizer, and
the frozen deterministic text embedder.

The 18 recognized action units and the 10 prompt templates ship as data
files (``data/au_table.tsv``, ``data/templates.txt``); the default
template bank is the first seven entries. Prompts are capped at 77
tokens. The embedder is a frozen stand-in for a pretrained sentence
encoder: it hash-expands token ids into unit vectors and mean-pools, so
identical text always maps to the identical vector while distinct AU
sets separate with high probability.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ContractError

MAX_TOKENS = 77
DEFAULT_TEMPLATE_COUNT = 7
DEFAULT_TEXT_DIM = 64

STYLE_ACTION = "action"
STYLE_FACS = "facs"
ORDER_FIXED = "fixed"
ORDER_SHUFFLED = "shuffled"


@dataclass(frozen=True)
class AuCode:
    id: int
    facs_name: str
    action_description: str


def _load_au_table() -> dict[int, AuCode]:
    table: dict[int, AuCode] = {}
    text = resources.files("aualign").joinpath("data/au_table.tsv").read_text("utf-8")
    for line in text.splitlines():
        if not line.strip():
            continue
        raw_id, facs_name, description = line.split("\t")
        code = AuCode(int(raw_id), facs_name, description)
        table[code.id] = code
    if len(table) != 18:
        raise ContractError(f"AU table must hold 18 entries, found {len(table)}")
    return table


AU_TABLE: dict[int, AuCode] = _load_au_table()
VALID_AU_IDS: tuple[int, ...] = tuple(sorted(AU_TABLE))


def _load_templates() -> tuple[str, ...]:
    text = resources.files("aualign").joinpath("data/templates.txt").read_text("utf-8")
    templates = tuple(line for line in text.splitlines() if line.strip())
    for tpl in templates:
        if tpl.count("{}") != 1:
            raise ContractError(f"template must contain exactly one placeholder: {tpl!r}")
    return templates


ALL_TEMPLATES: tuple[str, ...] = _load_templates()


@dataclass(frozen=True)
class AuAnnotation:
    """The AU ids active in one sample, kept in canonical ascending order."""

    codes: tuple[int, ...]

    def __init__(self, codes):
        ordered = tuple(sorted(codes))
        if not ordered:
            raise ContractError("AuAnnotation: empty AU set")
        if len(set(ordered)) != len(ordered):
            raise ContractError(f"AuAnnotation: duplicate AU ids in {ordered}")
        unknown = [c for c in ordered if c not in AU_TABLE]
        if unknown:
            raise ContractError(
                f"AuAnnotation: unknown AU ids {unknown}; valid ids are {list(VALID_AU_IDS)}"
            )
        object.__setattr__(self, "codes", ordered)


def describe(
    annotation: AuAnnotation,
    style: str = STYLE_ACTION,
    order: str = ORDER_FIXED,
    rng: np.random.Generator | None = None,
) -> str:
    """Join the per-AU movement phrases into one description.

    Two or more AUs become "a combination of ..." with an Oxford comma,
    keeping ascending AU order unless ``order`` asks for a shuffle.
    """
    if style == STYLE_ACTION:
        parts = [AU_TABLE[c].action_description for c in annotation.codes]
    elif style == STYLE_FACS:
        parts = [AU_TABLE[c].facs_name for c in annotation.codes]
    else:
        raise ContractError(f"describe: unknown style {style!r}")
    if order == ORDER_SHUFFLED:
        if rng is None:
            raise ContractError("describe: shuffled order needs an rng")
        parts = [parts[i] for i in rng.permutation(len(parts))]
    elif order != ORDER_FIXED:
        raise ContractError(f"describe: unknown order mode {order!r}")

    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return f"a combination of {parts[0]} and {parts[1]}"
    return "a combination of " + ", ".join(parts[:-1]) + f", and {parts[-1]}"


@dataclass(frozen=True)
class TemplateBank:
    """An ordered subset of the shipped templates (default: the first 7)."""

    templates: tuple[str, ...] = field(default=ALL_TEMPLATES[:DEFAULT_TEMPLATE_COUNT])

    def __post_init__(self):
        if not self.templates:
            raise ContractError("TemplateBank: empty bank")
        for tpl in self.templates:
            if tpl.count("{}") != 1:
                raise ContractError(f"TemplateBank: bad placeholder count in {tpl!r}")

    @classmethod
    def first(cls, count: int) -> "TemplateBank":
        if not 1 <= count <= len(ALL_TEMPLATES):
            raise ContractError(f"TemplateBank.first: count {count} outside 1..{len(ALL_TEMPLATES)}")
        return cls(ALL_TEMPLATES[:count])


@dataclass(frozen=True)
class PromptText:
    text: str
    token_ids: tuple[int, ...]


def render(
    bank: TemplateBank,
    description: str,
    template_index: int | None = None,
    rng: np.random.Generator | None = None,
) -> PromptText:
    """Fill one template with a movement description.

    ``template_index`` is the published 1-based template number; pass an
    rng instead to draw uniformly (the training-time behaviour).
    """
    if not description:
        raise ContractError("render: empty description")
    if template_index is None:
        if rng is None:
            raise ContractError("render: need a template index or an rng")
        template_index = int(rng.integers(1, len(bank.templates) + 1))
    if not 1 <= template_index <= len(bank.templates):
        raise ContractError(
            f"render: template {template_index} outside 1..{len(bank.templates)}"
        )
    text = bank.templates[template_index - 1].replace("{}", description)
    return PromptText(text=text, token_ids=tokenize(text))


_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> tuple[int, ...]:
    """Lowercase, split on whitespace/punctuation, hash each token to a
    stable 32-bit id (first four SHA-256 bytes), truncate to 77 ids."""
    ids = []
    for token in _TOKEN_RE.findall(text.lower()):
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        ids.append(int.from_bytes(digest[:4], "big"))
        if len(ids) == MAX_TOKENS:
            break
    return tuple(ids)


class FrozenTextEmbedder:
    """Deterministic text embedder; never updated during training."""

    def __init__(self, dim: int = DEFAULT_TEXT_DIM, seed: int = 0):
        if dim < 1:
            raise ContractError(f"FrozenTextEmbedder: dim must be positive, got {dim}")
        self.dim = dim
        self.seed = seed
        self._token_vecs: dict[int, np.ndarray] = {}

    def _token_vector(self, token_id: int) -> np.ndarray:
        vec = self._token_vecs.get(token_id)
        if vec is None:
            rng = np.random.default_rng([self.seed, token_id])
            vec = rng.standard_normal(self.dim)
            vec /= np.linalg.norm(vec)
            self._token_vecs[token_id] = vec
        return vec

    def embed(self, token_ids) -> np.ndarray:
        if not token_ids:
            raise ContractError("embed_frozen: empty token list")
        pooled = np.zeros(self.dim)
        for tid in token_ids:
            pooled += self._token_vector(int(tid))
        pooled /= len(token_ids)
        length = np.linalg.norm(pooled)
        if length == 0.0:
            raise ContractError("embed_frozen: token vectors cancelled out")
        return pooled / length


def embed_frozen(token_ids, embedder_seed: int, dim: int = DEFAULT_TEXT_DIM) -> np.ndarray:
    """Unit-norm sequence embedding; pure in (token_ids, embedder_seed)."""
    return FrozenTextEmbedder(dim=dim, seed=embedder_seed).embed(token_ids)
