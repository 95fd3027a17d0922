"""LLM labeler: prompt construction, endpoint client, response parsing.

Four prompt families are supported: chain-of-thought image-only (optionally
with few-shot exemplars inserted just before "Let's think step by step"),
structural + coordinate prompts (edge list, adjacency list, node2vec or
spectral embeddings, plus per-candidate coordinates), and an
image-embedding memory bank.  One OpenAI-compatible chat endpoint is used;
a deterministic mock client serves offline tests.

The token budget is enforced with a conservative characters/4 estimate
because the true tokenizer is endpoint-specific.
"""

from __future__ import annotations

import base64
import json
import math
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_TOKEN_BUDGET = 120_000

STRUCTURAL_ENCODINGS = ("edge_list", "adjacency", "node2vec", "spectral")

ZERO_SHOT_TEMPLATE = (
    "You are an expert in human aesthetics. I want you to evaluate the graph's layout "
    "primarily from an aesthetic perspective. Based on your aesthetic judgment, select "
    "the layout that best aligns with human preferences. Let's think step by step. "
    'Give me the answer with the style: "Reason: Result: layout ?" '
    "Just give me plain text, do not add emphasize markdown."
)

FEW_SHOT_BLOCK = (
    "To systematically analyze the layout preferences, we provided multiple exemplar "
    "images for layout assessment and human aesthetic preference exploration:\n\n"
    "{selections}\n\n"
    "We request a comprehensive analysis of the aesthetic criteria that influenced these "
    "layout selections. It is important to note that the preference is independent of the "
    "absolute layout numbering.\n\n"
)

ORDINALS = ("first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth")

STRUCTURAL_TEMPLATE = (
    "You are an expert in human aesthetics. I want you to evaluate the graph's layout "
    "primarily from an aesthetic perspective.\n\n"
    'Below are examples of layouts labeled as "good" or "bad" based on human feedback:\n\n'
    "{examples}\n\n"
    "Now, please evaluate the new graph:\n\n"
    "Graph Structure:\n"
    "{graph_structure}\n\n"
    "Layout Coordinates to Evaluate:\n"
    "{features}\n\n"
    "Based on your aesthetic judgment, select the layout that best aligns with human "
    "preferences.\n\n"
    'And the last sentence must start with "In conclusion, I will pick layout X" where X '
    "is a number without any other symbols around."
)

MEMORY_BANK_TEMPLATE = (
    'You are an expert in human aesthetics. Below are examples of layouts labeled as '
    '"good" or "bad" based on human feedback:\n\n'
    "Good Layouts:\n"
    "{good_layouts}\n\n"
    "Bad Layouts:\n"
    "{bad_layouts}\n\n"
    "Now, evaluate the following layouts and select the one that is most aligned with "
    "human aesthetics:\n"
    "Features: {features}\n\n"
    'And the last sentence must start with "In conclusion, I will pick layout X".'
)


class PromptError(ValueError):
    pass


class UnparseableResponse(ValueError):
    pass


class LLMTransportError(RuntimeError):
    pass


class LLMAuthError(LLMTransportError):
    pass


class LLMRateLimitError(LLMTransportError):
    pass


@dataclass
class PromptStrategy:
    kind: str  # zero_shot_image | few_shot_image | structural | memory_bank
    shots: int = 0
    structural_encoding: str = "edge_list"  # structural kind only
    embedding_dim: int = None  # memory_bank: dims of the embedding source

    def __post_init__(self):
        if self.kind not in ("zero_shot_image", "few_shot_image", "structural", "memory_bank"):
            raise PromptError(f"unknown prompt kind {self.kind!r}")
        if self.kind == "zero_shot_image" and self.shots != 0:
            raise PromptError("zero_shot_image requires shots=0")
        if not 0 <= self.shots <= 10:
            raise PromptError("shots must be in 0..10")
        if self.kind == "structural" and self.structural_encoding not in STRUCTURAL_ENCODINGS:
            raise PromptError(f"unknown structural encoding {self.structural_encoding!r}")


@dataclass
class MemoryBank:
    """Repository of per-layout image embeddings with good/bad verdicts."""

    entries: list = field(default_factory=list)  # (np.ndarray, "good"|"bad")
    dim: int = None

    def add(self, embedding, verdict: str) -> None:
        embedding = np.asarray(embedding, dtype=float)
        if verdict not in ("good", "bad"):
            raise PromptError(f"verdict must be good or bad, got {verdict!r}")
        if self.dim is None:
            self.dim = embedding.shape[0]
        elif embedding.shape[0] != self.dim:
            raise PromptError(f"embedding dim {embedding.shape[0]} != bank dim {self.dim}")
        self.entries.append((embedding, verdict))

    def add_shot(self, embeddings, chosen_position: int) -> None:
        """One past graph: 8 embeddings, the chosen one good, the rest bad."""
        for pos, emb in enumerate(embeddings, start=1):
            self.add(emb, "good" if pos == chosen_position else "bad")

    @property
    def good(self) -> list:
        return [e for e, v in self.entries if v == "good"]

    @property
    def bad(self) -> list:
        return [e for e, v in self.entries if v == "bad"]


def format_vector(vec, decimals: int = 4) -> str:
    return "[" + ", ".join(f"{x:.{decimals}f}" for x in np.asarray(vec).ravel()) + "]"


def format_coords(coords) -> str:
    return "\n".join(f"({x:.4f}, {y:.4f})" for x, y in np.asarray(coords))


def estimate_tokens(messages) -> int:
    """Conservative characters/4 estimate over all text content."""
    chars = 0
    for msg in messages:
        content = msg["content"]
        if isinstance(content, str):
            chars += len(content)
        else:
            for part in content:
                if part.get("type") == "text":
                    chars += len(part["text"])
    return math.ceil(chars / 4)


def _image_part(png_bytes: bytes) -> dict:
    b64 = base64.b64encode(png_bytes).decode("ascii")
    return {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{b64}"}}


def _shots_block(shot_choices) -> str:
    lines = []
    for i, pos in enumerate(shot_choices):
        lines.append(f"In the {ORDINALS[i]} set of eight layouts, the human selected layout {pos}.")
    return FEW_SHOT_BLOCK.format(selections="\n".join(lines))


def _structural_examples(shots) -> str:
    """shots: list of (coords_by_position, chosen_position)."""
    blocks = []
    for coords_list, chosen in shots:
        for pos, coords in enumerate(coords_list, start=1):
            verdict = "good" if pos == chosen else "bad"
            blocks.append(f"Layout ({verdict}):\n{format_coords(coords)}")
    return "\n\n".join(blocks)


def build_prompt(
    strategy: PromptStrategy,
    graph=None,
    layout_set=None,
    shot_images=None,
    shot_choices=None,
    shot_coords=None,
    query_images=None,
    structure_text: str = None,
    bank: MemoryBank = None,
    query_embeddings=None,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> list:
    """Build the chat message sequence for one graph under a strategy.

    Pure: identical inputs yield byte-identical messages.  Raises when the
    chars/4 estimate exceeds the token budget.
    """
    if strategy.kind in ("zero_shot_image", "few_shot_image"):
        if query_images is None:
            raise PromptError("image strategies require query_images (8 rasters in display order)")
        text = ZERO_SHOT_TEMPLATE
        parts = []
        if strategy.kind == "few_shot_image":
            if not shot_choices or len(shot_choices) != strategy.shots:
                raise PromptError(f"few_shot_image requires {strategy.shots} shot choices")
            anchor = "Let's think step by step."
            text = text.replace(anchor, _shots_block(shot_choices) + anchor)
            for image_set in shot_images or []:
                parts.extend(_image_part(png) for png in image_set)
        parts.insert(0, {"type": "text", "text": text})
        parts.extend(_image_part(png) for png in query_images)
        messages = [{"role": "user", "content": parts}]
    elif strategy.kind == "structural":
        if structure_text is None or layout_set is None:
            raise PromptError("structural strategy requires structure_text and layout_set")
        from gdpref.layouts import normalize

        features = "\n\n".join(
            f"Layout {pos + 1}:\n{format_coords(normalize(layout_set.at_position(pos)).coords)}"
            for pos in range(8)
        )
        examples = _structural_examples(shot_coords or [])
        text = STRUCTURAL_TEMPLATE.format(
            examples=examples, graph_structure=structure_text, features=features
        )
        messages = [{"role": "user", "content": [{"type": "text", "text": text}]}]
    elif strategy.kind == "memory_bank":
        if bank is None:
            raise PromptError("memory_bank strategy requires a bank")
        if not bank.good:
            raise PromptError("memory bank has no good entries")
        if query_embeddings is None:
            raise PromptError("memory_bank strategy requires query_embeddings (8 vectors)")
        text = MEMORY_BANK_TEMPLATE.format(
            good_layouts="\n".join(format_vector(e) for e in bank.good),
            bad_layouts="\n".join(format_vector(e) for e in bank.bad),
            features="\n".join(
                f"Layout {i + 1}: {format_vector(e)}" for i, e in enumerate(query_embeddings)
            ),
        )
        messages = [{"role": "user", "content": [{"type": "text", "text": text}]}]
    else:  # pragma: no cover - guarded in PromptStrategy
        raise PromptError(strategy.kind)

    estimate = estimate_tokens(messages)
    if estimate > token_budget:
        raise PromptError(
            f"prompt estimate {estimate} tokens exceeds the budget of {token_budget}"
        )
    return messages


def structure_text_for(graph, encoding: str, seed: int = 0) -> str:
    from gdpref.embeddings import node2vec_embedding, spectral_embedding
    from gdpref.graphs import serialize_adjacency_list, serialize_edge_list

    if encoding == "edge_list":
        return serialize_edge_list(graph)
    if encoding == "adjacency":
        return serialize_adjacency_list(graph)
    if encoding == "node2vec":
        emb = node2vec_embedding(graph, dim=32, seed=seed)
        return "\n".join(f"{i}: {format_vector(v)}" for i, v in enumerate(emb.vectors))
    if encoding == "spectral":
        emb = spectral_embedding(graph, k=min(8, graph.n - 1))
        return "\n".join(f"{i}: {format_vector(v)}" for i, v in enumerate(emb.vectors))
    raise PromptError(f"unknown structural encoding {encoding!r}")


# -- clients -------------------------------------------------------------------

CHOICE_PATTERN = re.compile(r"(?:In conclusion, I will pick layout|Result:\s*layout)\s*#?\s*([1-8])\b")


def parse_choice(text: str) -> int:
    """Last anchor-phrase occurrence followed by an integer 1..8."""
    if not text:
        raise UnparseableResponse("empty response")
    matches = CHOICE_PATTERN.findall(text)
    if not matches:
        raise UnparseableResponse(f"no parsable choice in response: {text[:120]!r}")
    return int(matches[-1])


def choice_confidence(token_logprobs, choice: int) -> float | None:
    """exp(log-probability) of the chosen digit token; None when absent."""
    target = str(choice)
    found = None
    for entry in token_logprobs or []:
        if entry.get("token", "").strip() == target:
            found = entry
    if found is None:
        return None
    lp = found["logprob"]
    if lp == float("-inf") or (isinstance(lp, str) and lp == "-inf"):
        raise ValueError("choice token has -inf log-probability")
    return math.exp(float(lp))


@dataclass
class LLMResponse:
    text: str
    token_logprobs: list  # [{token, logprob}]


@dataclass
class LLMClientConfig:
    base_url: str = "http://localhost:8000/v1"
    model: str = "gpt-4o-mini"
    api_key_env: str = "GDPREF_API_KEY"
    max_retries: int = 3
    timeout: float = 60.0
    max_in_flight: int = 4


class MockLLMClient:
    """Deterministic offline client: a script maps graph_id to a verbatim
    response (and optional per-token logprobs)."""

    def __init__(self, script: dict):
        self.script = script

    @classmethod
    def load(cls, path) -> "MockLLMClient":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def complete(self, messages, request_id: str) -> LLMResponse:
        if request_id not in self.script:
            raise LLMTransportError(f"mock script has no entry for {request_id!r}")
        entry = self.script[request_id]
        if isinstance(entry, str):
            entry = {"text": entry}
        return LLMResponse(text=entry["text"], token_logprobs=entry.get("token_logprobs", []))


class HTTPLLMClient:
    """OpenAI-compatible chat-completions client with retry/backoff."""

    def __init__(self, config: LLMClientConfig):
        self.config = config
        key = os.environ.get(config.api_key_env)
        if not key:
            raise LLMAuthError(f"credential missing: set ${config.api_key_env}")
        self._headers = {"Authorization": f"Bearer {key}"}

    def complete(self, messages, request_id: str) -> LLMResponse:
        import httpx

        payload = {
            "model": self.config.model,
            "messages": messages,
            "logprobs": True,
            "top_logprobs": 1,
        }
        url = f"{self.config.base_url.rstrip('/')}/chat/completions"
        last_exc = None
        for attempt in range(self.config.max_retries):
            try:
                resp = httpx.post(url, json=payload, headers=self._headers, timeout=self.config.timeout)
            except httpx.TransportError as exc:
                last_exc = exc
                time.sleep(2**attempt * 0.5)
                continue
            if resp.status_code in (401, 403):
                raise LLMAuthError(f"authentication failed ({resp.status_code})")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_exc = LLMRateLimitError(f"status {resp.status_code}")
                time.sleep(2**attempt * 0.5)
                continue
            try:
                body = resp.json()
                choice = body["choices"][0]
                text = choice["message"]["content"]
                lp = choice.get("logprobs") or {}
                token_logprobs = [
                    {"token": t["token"], "logprob": t["logprob"]} for t in lp.get("content", [])
                ]
            except (KeyError, IndexError, ValueError) as exc:
                raise LLMTransportError(f"malformed response: {exc}") from None
            return LLMResponse(text=text, token_logprobs=token_logprobs)
        if isinstance(last_exc, LLMRateLimitError):
            raise last_exc
        raise LLMTransportError(f"transport failed after {self.config.max_retries} retries: {last_exc}")


# -- labeling driver ------------------------------------------------------------


@dataclass
class LLMLabel:
    graph_id: str
    choice: str  # canonical algorithm
    raw_choice_position: int  # 1..8
    confidence: float | None
    transcript: dict


def label_with_llm(
    strategy: PromptStrategy,
    tasks,
    client,
    prompt_builder,
    transcript_dir=None,
) -> tuple:
    """Label each (graph_id, layout_set) task.

    ``prompt_builder(graph_id, layout_set)`` returns the message sequence;
    unparseable responses are logged and dropped, never guessed.
    """
    labels = []
    unparseable = []
    for graph_id, layout_set in tasks:
        messages = prompt_builder(graph_id, layout_set)
        response = client.complete(messages, request_id=graph_id)
        transcript = {
            "graph_id": graph_id,
            "messages": messages,
            "response": response.text,
            "token_logprobs": response.token_logprobs,
        }
        if transcript_dir is not None:
            path = Path(transcript_dir) / f"{graph_id}.json"
            path.write_text(json.dumps(transcript, indent=1), encoding="utf-8")
        try:
            position = parse_choice(response.text)
        except UnparseableResponse:
            unparseable.append(graph_id)
            continue
        confidence = choice_confidence(response.token_logprobs, position)
        labels.append(
            LLMLabel(
                graph_id=graph_id,
                choice=layout_set.algorithm_at(position - 1),
                raw_choice_position=position,
                confidence=confidence,
                transcript=transcript,
            )
        )
    summary = {"labeled": len(labels), "unparseable": unparseable}
    return labels, summary
