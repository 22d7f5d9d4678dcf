"""Rule-based screening chatbot.

Utterances are classified by token overlap against each intent's sample
phrases; the dialog walks greeting -> ask_vaccination -> ask_symptoms ->
advise -> done. Only intents listed for the current state are considered.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import yaml

FALLBACK_REPLY = "I'm sorry I didn't understand what you said"
MATCH_THRESHOLD = 0.5

STATES = ("greeting", "ask_vaccination", "ask_symptoms", "advise", "done")
# allowed successor states; the graph is acyclic apart from FALLBACK self-loops
FLOW = {
    "greeting": {"ask_vaccination", "done"},
    "ask_vaccination": {"ask_symptoms", "done"},
    "ask_symptoms": {"advise", "done"},
    "advise": {"done"},
    "done": set(),
}


class ChatError(Exception):
    pass


class IntentConfigError(ChatError):
    pass


class SessionError(ChatError):
    pass


@dataclass(frozen=True)
class Intent:
    name: str
    sample_phrases: tuple
    response: str
    next_state: str
    states: tuple = STATES[:-1]

    def __post_init__(self):
        n = len(self.sample_phrases)
        if not 10 <= n <= 15:
            raise IntentConfigError(f"intent {self.name!r}: needs 10-15 sample phrases, has {n}")
        if self.next_state not in STATES:
            raise IntentConfigError(f"intent {self.name!r}: unknown next_state {self.next_state!r}")
        for s in self.states:
            if s not in STATES or s == "done":
                raise IntentConfigError(f"intent {self.name!r}: bad state {s!r}")
            if self.next_state not in FLOW[s]:
                raise IntentConfigError(f"intent {self.name!r}: {s} -> {self.next_state} is not in the flow")


class _Fallback:
    name = "FALLBACK"

    def __repr__(self):
        return "FALLBACK"

    def __bool__(self):
        return False


FALLBACK = _Fallback()


def tokenize(text: str) -> list:
    return re.sub(r"[^\w\s]", "", text.lower()).split()


def intent_score(tokens: set, intent: Intent) -> float:
    best = 0.0
    for phrase in intent.sample_phrases:
        pt = set(tokenize(phrase))
        if pt:
            best = max(best, len(tokens & pt) / len(pt))
    return best


def match_intent(utterance: str, intents: Sequence[Intent]):
    """Best-scoring intent, or FALLBACK when nothing reaches the threshold.

    Ties go to the intent defined first.
    """
    if not intents:
        raise ValueError("intent list is empty")
    tokens = set(tokenize(utterance))
    if not tokens:
        return FALLBACK
    best, best_score = FALLBACK, -1.0
    for intent in intents:
        s = intent_score(tokens, intent)
        if s > best_score:
            best, best_score = intent, s
    return best if best_score >= MATCH_THRESHOLD else FALLBACK


@dataclass(frozen=True)
class Session:
    person_id: int
    reading: float
    state: str = "greeting"
    transcript: tuple = ()  # ((speaker, text), ...)

    @property
    def done(self) -> bool:
        return self.state == "done"


def load_intents(path=None) -> tuple:
    """Load (intents, prompts) from a YAML intent file; default is the bundled set."""
    if path is None:
        text = resources.files("feverbot").joinpath("data/intents.yaml").read_text(encoding="utf-8")
        where = "intents.yaml"
    else:
        where = str(path)
        try:
            text = Path(path).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise IntentConfigError(f"cannot read {where}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" line {mark.line + 1}" if mark is not None else ""
        raise IntentConfigError(f"{where}:{line} {exc}") from exc
    if not isinstance(doc, dict) or "intents" not in doc:
        raise IntentConfigError(f"{where}: missing 'intents'")
    if doc.get("schema", 1) != 1:
        raise IntentConfigError(f"{where}: unsupported schema {doc.get('schema')!r}")
    if not isinstance(doc["intents"], list):
        raise IntentConfigError(f"{where}: 'intents' must be a list")
    prompts = dict(doc.get("prompts") or {})
    intents = []
    for i, raw in enumerate(doc["intents"]):
        try:
            intents.append(Intent(
                name=str(raw["name"]),
                sample_phrases=tuple(str(p) for p in raw["sample_phrases"]),
                response=str(raw["response"]),
                next_state=str(raw["next_state"]),
                states=tuple(raw.get("states", STATES[:-1])),
            ))
        except KeyError as exc:
            raise IntentConfigError(f"{where}: intents[{i}] missing field {exc}") from exc
        except (TypeError, AttributeError) as exc:
            raise IntentConfigError(f"{where}: intents[{i}] is malformed") from exc
    names = [it.name for it in intents]
    if len(set(names)) != len(names):
        raise IntentConfigError(f"{where}: duplicate intent names")
    return tuple(intents), prompts


class Chatbot:
    """Holds the intent set and the active session per person."""

    def __init__(self, intents: Sequence[Intent] = None, prompts: dict = None,
                 threshold: float = 38.0):
        if intents is None:
            intents, loaded = load_intents()
            prompts = loaded if prompts is None else prompts
        self.intents = tuple(intents)
        self.prompts = dict(prompts or {})
        self.threshold = threshold
        self.active = {}

    @classmethod
    def from_file(cls, path, threshold: float = 38.0) -> "Chatbot":
        intents, prompts = load_intents(path)
        return cls(intents, prompts, threshold)

    def prompt(self, state: str) -> str:
        return self.prompts.get(state, "")

    def start_session(self, person_id: int, reading: float) -> Session:
        if reading <= self.threshold:
            raise SessionError(f"reading {reading:.2f} does not exceed {self.threshold:.1f}")
        if person_id in self.active:
            raise SessionError(f"person {person_id} already has an active session")
        opening = (f"Your temperature is {reading:.1f} °C, above the {self.threshold:.1f} °C "
                   f"fever threshold. I have a few short questions for you. {self.prompt('greeting')}").strip()
        session = Session(person_id, reading, "greeting", (("bot", opening),))
        self.active[person_id] = session
        return session

    def respond(self, session: Session, utterance: str) -> tuple:
        """Returns (session, reply). A FALLBACK returns the session untouched."""
        if session.done:
            raise SessionError(f"session for person {session.person_id} is finished")
        allowed = [it for it in self.intents if session.state in it.states]
        intent = match_intent(utterance, allowed) if allowed else FALLBACK
        if intent is FALLBACK:
            return session, FALLBACK_REPLY
        transcript = session.transcript + (("user", utterance), ("bot", intent.response))
        session = replace(session, state=intent.next_state, transcript=transcript)
        if session.done:
            self.active.pop(session.person_id, None)
        else:
            self.active[session.person_id] = session
        return session, intent.response
