"""Clause translators.

Two implementations of the translator contract (``supports(kind)`` +
``translate(clause, variant)``):

* :class:`TemplateTranslator` — table-driven English templates, fully
  deterministic, optionally extended with learned paraphrases mined from
  labeled data (variant 0 stays the first built-in template; learned texts
  take the next indices, then the remaining built-ins).
* :class:`SubprocessTranslator` — line protocol to an external process
  (JSON request in, plain-text fragment out) so a trained model can serve
  translations.
"""

from __future__ import annotations

import json
import logging
import subprocess
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .clauses import (
    CLAUSE_KINDS,
    Clause,
    TranslationFailed,
    UnsupportedClauseKind,
)

log = logging.getLogger(__name__)


def load_templates(path: Union[str, Path, None] = None) -> dict:
    """Load a template pack; the bundled English pack by default."""
    if path is None:
        text = (resources.files("sqlaug") / "data" / "templates_en.json"
                ).read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    pack = json.loads(text)
    for field in ("pack", "templates", "phrases"):
        if field not in pack:
            raise ValueError(f"template pack missing {field!r}")
    return pack


def load_learned_variants(path: Union[str, Path]) -> dict[str, list[str]]:
    """Read a mined clause/subquestion corpus (JSONL) into a paraphrase
    table keyed by concrete clause token text."""
    table: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            key = " ".join(record["clause_tokens"]).lower()
            text = record["subquestion"].strip()
            if text and text not in table.setdefault(key, []):
                table[key].append(text)
    return table


def _join_list(parts: list[str]) -> str:
    if len(parts) <= 1:
        return "".join(parts)
    return ", ".join(parts[:-1]) + " and " + parts[-1]


class TemplateTranslator:
    """Deterministic slot-filling translator over a template pack."""

    thread_safe = True

    def __init__(self, templates: Optional[dict] = None,
                 learned: Optional[dict[str, list[str]]] = None):
        pack = templates if templates is not None else load_templates()
        self.pack_name = pack["pack"]
        self.templates: dict[str, list[str]] = pack["templates"]
        self.phrases: dict = pack["phrases"]
        self.learned = learned or {}
        suffix = "+learned" if self.learned else ""
        self.translator_id = f"template:{self.pack_name}{suffix}"

    def supports(self, kind: str) -> bool:
        return kind in self.templates

    def variant_count(self, clause: Clause) -> int:
        return (len(self.templates[clause.kind])
                + len(self.learned.get(clause.text_key(), [])))

    def translate(self, clause: Clause, variant: Optional[int] = None) -> str:
        if clause.kind not in self.templates:
            raise UnsupportedClauseKind(clause.kind)
        builtin = self.templates[clause.kind]
        learned = self.learned.get(clause.text_key(), [])
        options: list[tuple[str, str]] = [("template", builtin[0])]
        options += [("learned", text) for text in learned]
        options += [("template", t) for t in builtin[1:]]
        source, chosen = options[(variant or 0) % len(options)]
        if source == "learned":
            return chosen
        try:
            return chosen.format_map(self._slots(clause))
        except (KeyError, IndexError, TypeError) as exc:
            raise TranslationFailed(
                f"template {chosen!r} for {clause.kind}: {exc}") from exc

    # -- phrase rendering ----------------------------------------------

    def _bare(self, entry: dict) -> str:
        """Expression as an article-free noun phrase."""
        if entry["kind"] == "calc":
            arith = entry.get("op_lhs", entry.get("op"))
            calc = self.phrases["calc"][arith].format(
                a=entry["column"], b=entry["column2"])
            return calc[4:] if calc.startswith("the ") else calc
        if entry["column"] == "*":
            return self.phrases["star_in_agg"]
        return entry["column"]

    def _item_np(self, item: dict) -> str:
        if item.get("agg"):
            return self.phrases["agg"][item["agg"]].format(x=self._bare(item))
        if item["kind"] == "calc":
            return self.phrases["calc"][item["op"]].format(
                a=item["column"], b=item["column2"])
        if item["column"] == "*":
            return self.phrases["star"]
        if item.get("distinct"):
            return self.phrases["distinct"].format(x=item["column"])
        return "the " + item["column"]

    def _cond_phrase(self, cond: dict) -> str:
        if cond.get("agg"):
            lhs = self.phrases["agg"][cond["agg"]].format(x=self._bare(cond))
        elif cond["kind"] == "calc":
            lhs = self.phrases["calc"][cond["op_lhs"]].format(
                a=cond["column"], b=cond["column2"])
        else:
            lhs = cond["column"] if cond["column"] != "*" else \
                self.phrases["star_in_agg"]
        op = cond["op"]
        if op == "between":
            return f"{lhs} between {cond['low']} and {cond['high']}"
        op_phrase = self.phrases["op"][op]
        if "value" in cond:
            rhs = cond["value"]
        elif "rhs_column" in cond:
            rhs = "the " + cond["rhs_column"]
        elif "rhs_calc" in cond:
            rhs = self._item_np(cond["rhs_calc"])
        elif "inner" in cond:
            rhs = self._inner_np(cond["inner"])
        else:
            raise TranslationFailed(f"condition without right side: {cond}")
        return f"{lhs} {op_phrase} {rhs}"

    def _conds_phrase(self, conds: list[dict]) -> str:
        parts = []
        for cond in conds:
            phrase = self._cond_phrase(cond)
            if cond.get("connector"):
                parts.append(self.phrases["connector"][cond["connector"]])
            parts.append(phrase)
        return " ".join(parts)

    def _inner_np(self, payload: dict) -> str:
        """Embedded query as a noun phrase, inner content first."""
        sel = payload["select"]
        np = (_join_list([self._item_np(i) for i in sel["items"]])
              + " of "
              + _join_list(["the " + t for t in sel["tables"]]))
        if payload.get("conds"):
            np += " with " + self._conds_phrase(payload["conds"])
        if payload.get("group"):
            np += f" for each {payload['group']}"
        if payload.get("having"):
            np += " having " + self._cond_phrase(payload["having"])
        if payload.get("order"):
            order = payload["order"]
            key = self._order_key(order)
            np += (f" in {self.phrases['direction'][order['direction']]} "
                   f"order of {key}")
            if order.get("limit"):
                np += f" keeping the first {order['limit']}"
        return np

    def _order_key(self, payload: dict) -> str:
        return self._item_np(payload)

    def _slots(self, clause: Clause) -> dict:
        p = clause.payload
        kind = clause.kind
        if kind in ("SELECT", "SELECT+GROUP_BY"):
            slots = {
                "items": _join_list([self._item_np(i) for i in p["items"]]),
                "tables": _join_list(["the " + t for t in p["tables"]]),
            }
            if "group" in p:
                slots["group"] = p["group"]
            return slots
        if kind in ("WHERE", "WHERE+NESTED_SELECT"):
            return {"conds": self._conds_phrase(p["conds"])}
        if kind == "GROUP_BY+HAVING":
            return {"group": p["group"],
                    "having": self._cond_phrase(p["having"])}
        if kind in ("ORDER_BY", "ORDER_BY+LIMIT", "ORDER_BY+GROUP_BY"):
            slots = {
                "key": self._order_key(p),
                "direction": self.phrases["direction"][p["direction"]],
                "direction_tail": self.phrases["direction_tail"][p["direction"]],
            }
            if p.get("limit") is not None:
                slots["limit"] = str(p["limit"])
            if p.get("group"):
                slots["group"] = p["group"]
            return slots
        if kind == "SET_OP":
            return {"set_phrase": self.phrases["set"][p["op"]],
                    "set_phrase_alt": self.phrases["set_alt"][p["op"]]}
        raise UnsupportedClauseKind(kind)


class SubprocessTranslator:
    """Bridges to an external translation process over stdin/stdout.

    Requests are single JSON lines {"kind", "tokens", "types", "variant"};
    the process answers each with one plain-text line (the fragment).
    """

    thread_safe = False

    def __init__(self, cmd: list[str], translator_id: Optional[str] = None,
                 kinds: tuple[str, ...] = CLAUSE_KINDS):
        self.cmd = list(cmd)
        self.kinds = kinds
        self.translator_id = translator_id or f"subprocess:{self.cmd[0]}"
        self._proc: Optional[subprocess.Popen] = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)
        return self._proc

    def supports(self, kind: str) -> bool:
        return kind in self.kinds

    def translate(self, clause: Clause, variant: Optional[int] = None) -> str:
        if clause.kind not in self.kinds:
            raise UnsupportedClauseKind(clause.kind)
        request = {
            "kind": clause.kind,
            "tokens": [t.text for t in clause.tokens],
            "types": [t.ttype for t in clause.tokens],
            "variant": variant,
        }
        proc = self._ensure()
        try:
            proc.stdin.write(json.dumps(request) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise TranslationFailed(f"translator process failed: {exc}") from exc
        if not line:
            raise TranslationFailed("translator process closed its output")
        text = line.rstrip("\n").strip()
        if not text:
            raise TranslationFailed("translator returned an empty fragment")
        return text

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:  # pragma: no cover - already gone
                pass
            self._proc.wait(timeout=5)
        self._proc = None

    def __enter__(self) -> "SubprocessTranslator":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
