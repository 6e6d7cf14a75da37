"""Prompt rendering for generation families and the pairwise judge.

Templates live as UTF-8 text assets next to this module (one file per
family plus the judge template) so new families can be registered without
code changes. Placeholders use {name} markers and are substituted in a
single pass, so substituted content is never re-scanned.

The judge template wording, including the 1-10 scale sentence, is frozen
under TEMPLATE_VERSION; any edit requires a version bump recorded in run
metadata.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .corpus import HsInstance
from .errors import SchemaError, TemplateNotFoundError

TEMPLATE_VERSION = "v1"

GENERATION_INSTRUCTION = (
    "Provide a brief counter-narrative in response to the user's hate speech. "
    "Ensure the output does not contain line breaks."
)

BUILTIN_FAMILIES = ("mistral", "mistral-instruct", "zephyr", "llama-chat")

SYSTEM_MODES = ("zs", "ft", "gold")

GOLD_SYSTEM_ID = "gold standard"

_PLACEHOLDER = re.compile(r"\{(instruction|hs|answer_a|answer_b)\}")

_JUDGE_ANSWER_MARKERS = (
    "[The Start of Assistant 1's Answer]\n",
    "\n[The End of Assistant 1's Answer]\n",
    "[The Start of Assistant 2's Answer]\n",
    "\n[The End of Assistant 2's Answer]\n",
)


@dataclass(frozen=True)
class SystemDescriptor:
    """One entrant in the tournament."""

    id: str
    family: str
    mode: str
    endpoint: str | None = None

    def __post_init__(self):
        if self.mode not in SYSTEM_MODES:
            raise SchemaError(f"unknown system mode {self.mode!r}")
        if (self.family == "gold") != (self.mode == "gold"):
            raise SchemaError("gold family and gold mode must be used together")


@dataclass(frozen=True)
class PromptTemplate:
    family: str
    text: str

    def render(self, **values: str) -> str:
        def sub(match: re.Match) -> str:
            name = match.group(1)
            if name not in values:
                raise SchemaError(f"template placeholder {{{name}}} has no value")
            return values[name]

        return _PLACEHOLDER.sub(sub, self.text)


class TemplateRegistry:
    """Maps family tags to prompt templates loaded from text assets."""

    def __init__(self):
        self._templates: dict[str, PromptTemplate] = {}

    @classmethod
    def builtin(cls) -> "TemplateRegistry":
        reg = cls()
        base = resources.files("cnrank") / "templates"
        for family in BUILTIN_FAMILIES:
            reg.register(family, (base / f"{family}.txt").read_text(encoding="utf-8"))
        reg.register("judge", (base / "judge.txt").read_text(encoding="utf-8"))
        return reg

    def register(self, family: str, text: str) -> None:
        self._templates[family] = PromptTemplate(family=family, text=text)

    def register_file(self, family: str, path: str | Path) -> None:
        self.register(family, Path(path).read_text(encoding="utf-8"))

    def get(self, family: str) -> PromptTemplate:
        try:
            return self._templates[family]
        except KeyError:
            raise TemplateNotFoundError(f"no template registered for family {family!r}") from None

    def families(self) -> list[str]:
        return sorted(self._templates)


_default_registry: TemplateRegistry | None = None


def default_registry() -> TemplateRegistry:
    global _default_registry
    if _default_registry is None:
        _default_registry = TemplateRegistry.builtin()
    return _default_registry


def render_generation_prompt(
    system: SystemDescriptor,
    hs: HsInstance,
    registry: TemplateRegistry | None = None,
) -> str:
    """Render the family-specific generation prompt for one HS instance.

    The rendered prompt ends at the family's assistant cue; nothing
    follows it.
    """
    if not hs.text.strip():
        raise SchemaError("hs text is empty")
    registry = registry or default_registry()
    template = registry.get(system.family)
    return template.render(instruction=GENERATION_INSTRUCTION, hs=hs.text)


def render_judge_prompt(
    hs: HsInstance,
    cn_a: str,
    cn_b: str,
    registry: TemplateRegistry | None = None,
) -> str:
    """Render the pairwise judge prompt with answers in A-then-B order."""
    if not hs.text.strip():
        raise SchemaError("hs text is empty")
    if not cn_a.strip() or not cn_b.strip():
        raise SchemaError("judge prompt requires two non-empty counter-narratives")
    registry = registry or default_registry()
    template = registry.get("judge")
    return template.render(hs=hs.text, answer_a=cn_a, answer_b=cn_b)


def parse_judge_prompt(prompt: str, registry: TemplateRegistry | None = None) -> tuple[str, str, str]:
    """Recover (hs, cn_a, cn_b) from a rendered judge prompt.

    Inverse of render_judge_prompt; the fixed scaffolding makes the three
    slots recoverable by position even when field contents quote template
    markers.
    """
    registry = registry or default_registry()
    template = registry.get("judge").text
    pattern = "^" + "".join(
        f"(?P<{m.group(1)}>.*?)" if m else re.escape(part)
        for part, m in _split_template(template)
    ) + "$"
    match = re.match(pattern, prompt, re.DOTALL)
    if match is None:
        raise SchemaError("text does not match the judge template")
    return match.group("hs"), match.group("answer_a"), match.group("answer_b")


def _split_template(template: str):
    """Yield (literal, None) and (placeholder_text, match) segments in order."""
    pos = 0
    for m in _PLACEHOLDER.finditer(template):
        if m.start() > pos:
            yield template[pos:m.start()], None
        yield m.group(0), m
        pos = m.end()
    if pos < len(template):
        yield template[pos:], None
