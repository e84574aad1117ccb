"""LLMQuery rendering and Yes/No response parsing."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Literal

from .context import Context, triple_line
from .kg import KnowledgeGraph, Triplet
from .logic import And, Atom, Exists, Fact, ForAllNeg, Not, Or, fact_from_obj, fact_to_obj

TemplateKind = Literal["base", "instruction", "two_shot", "cot"]
TEMPLATE_KINDS = ("base", "instruction", "two_shot", "cot")

NOT_PREFIX = "it is not the case that "
EXISTS_PHRASE = "There exists an entity x such that"
FORALL_PHRASE = "For all entity x such that"


class Unparseable(ValueError):
    """A response with no decodable Yes/No token."""


@lru_cache(maxsize=None)
def _template_text(name: str) -> str:
    path = resources.files("logicheck") / "templates" / f"{name}.txt"
    return path.read_text(encoding="utf-8").replace("\r\n", "\n").rstrip("\n")


@dataclass(frozen=True)
class PromptTemplate:
    kind: TemplateKind = "base"

    def __post_init__(self):
        if self.kind not in TEMPLATE_KINDS:
            raise ValueError(f"unknown template {self.kind!r}")

    @property
    def system_text(self) -> str:
        return _template_text("system")

    @property
    def body(self) -> str:
        return _template_text(self.kind)

    def render(self, context_text: str, fact_text: str, chat_markers: bool = True) -> str:
        user = Template(self.body).substitute(context=context_text, fact=fact_text)
        if not chat_markers:
            return user
        return f"<<SYS>> {self.system_text} <</SYS>>\n\n{user}"


def split_chat_markers(prompt: str) -> tuple[str | None, str]:
    """Split a ``<<SYS>> ... <</SYS>>`` prefix into (system, user)."""
    m = re.match(r"<<SYS>>\s*(.*?)\s*<</SYS>>\n*", prompt, re.S)
    if not m:
        return None, prompt
    return m.group(1), prompt[m.end() :]


def render_fact_text(fact: Fact, kg: KnowledgeGraph | None = None) -> str:
    """Natural-language rendering with 'and'/'or' and triple lines for atoms."""

    def line(t: Triplet) -> str:
        return triple_line(kg, t)

    def ent(e: str) -> str:
        return kg.entity_name(e) if kg else e

    def rel(r: str) -> str:
        return kg.relation_name(r) if kg else r

    def nested(f: Fact) -> str:
        text = walk(f)
        return f"({text})" if isinstance(f, (And, Or)) else text

    def walk(f: Fact) -> str:
        if isinstance(f, Atom):
            return line(f.triplet)
        if isinstance(f, Not):
            return NOT_PREFIX + nested(f.child)
        if isinstance(f, And):
            return " and ".join(nested(c) for c in f.children)
        if isinstance(f, Or):
            return " or ".join(nested(c) for c in f.children)
        if isinstance(f, Exists):
            return (
                f"{EXISTS_PHRASE} {ent(f.subject)} | {rel(f.r1)} | x and "
                f"x | {rel(f.r2)} | {ent(f.object)}"
            )
        if isinstance(f, ForAllNeg):
            return (
                f"{FORALL_PHRASE} {NOT_PREFIX}{ent(f.subject)} | {rel(f.r1)} | x or "
                f"{NOT_PREFIX}x | {rel(f.r2)} | {ent(f.object)}"
            )
        raise TypeError(f"not a fact: {f!r}")

    return walk(fact)


def render_query(
    context: Context | str,
    fact_text: str,
    template: PromptTemplate = PromptTemplate(),
    chat_markers: bool = True,
) -> str:
    text = context if isinstance(context, str) else context.rendered
    return template.render(text, fact_text, chat_markers=chat_markers)


_MARKUP = re.compile(r"<[^>]*>|[*_`#>\[\]()\"']")
_FINAL = re.compile(r"the answer is\W*(yes|no)\b", re.I)
_WORD = re.compile(r"[a-z]+")


def parse_response(raw: str) -> int:
    """Decode a Yes/No answer to 1/0; raises :class:`Unparseable` otherwise.

    A final "The answer is Yes|No" (chain-of-thought style) wins; otherwise
    the first yes/no word decides.
    """
    text = _MARKUP.sub(" ", raw)
    finals = _FINAL.findall(text)
    if finals:
        return int(finals[-1].lower() == "yes")
    for word in _WORD.findall(text.lower()):
        if word == "yes":
            return 1
        if word == "no":
            return 0
    raise Unparseable(f"no yes/no token in {raw[:80]!r}")


@dataclass
class QueryRecord:
    id: str
    fact: Fact
    fact_text: str
    context: Context
    prompt: str
    label: bool
    group: str
    fact_type: str
    role: str
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "prompt": self.prompt,
            "label": self.label,
            "group": self.group,
            "fact_type": self.fact_type,
            "role": self.role,
            "fact": fact_to_obj(self.fact),
            "fact_text": self.fact_text,
            "context": [list(t) for t in self.context.triples],
            "context_tokens": self.context.token_count,
            **self.extra,
        }

    @classmethod
    def from_json(cls, obj: dict) -> QueryRecord:
        known = {
            "id", "prompt", "label", "group", "fact_type", "role",
            "fact", "fact_text", "context", "context_tokens",
        }
        triples = [Triplet(*t) for t in obj.get("context", [])]
        return cls(
            id=obj["id"],
            fact=fact_from_obj(obj["fact"], "/fact"),
            fact_text=obj.get("fact_text", ""),
            context=Context(triples, "", obj.get("context_tokens", 0)),
            prompt=obj["prompt"],
            label=bool(obj["label"]),
            group=obj["group"],
            fact_type=obj["fact_type"],
            role=obj.get("role", ""),
            extra={k: v for k, v in obj.items() if k not in known},
        )
