"""Solution planning agent: decompose the question step by step, finalize when ready."""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    UNRESOLVED,
    AskSubQuestion,
    FinalAnswer,
    PlannerAction,
    Question,
    ReasoningContext,
    Role,
)
from .llm import LlmGateway, system, user
from .prompts import load_prompt
from .trace import EventKind, TraceRecorder

_FINALIZE_NUDGE = (
    "This is the last planning step: produce the final answer now "
    "(a FINAL line) based on everything gathered so far."
)

_REPROMPT = (
    "Your previous reply could not be parsed. Reply again and end with "
    "exactly one line starting with 'SUBQ: ' or 'FINAL: '."
)


class PlanParseError(Exception):
    """Planner completion stayed unparseable after one reprompt."""


@dataclass(frozen=True)
class PlannerState:
    context: ReasoningContext
    step: int
    max_steps: int

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.step != len(self.context.history):
            raise ValueError("step must equal the number of solved pairs")
        if self.step > self.max_steps:
            raise ValueError("step exceeds max_steps")


def initial_state(question: Question, max_steps: int) -> PlannerState:
    return PlannerState(ReasoningContext(question), 0, max_steps)


def render_context(ctx: ReasoningContext) -> str:
    """Deterministic transcript: the question, then numbered sub-question/answer blocks."""
    blocks = [f"Question: {ctx.question.text}"]
    for pair in ctx.history:
        answer = pair.answer
        if answer == UNRESOLVED:
            answer = f"{UNRESOLVED} (unanswered)"
        blocks.append(
            f"Sub-question {pair.step_index}: {pair.sub_question}\n"
            f"Answer {pair.step_index}: {answer}"
        )
    return "\n\n".join(blocks)


def _parse_action(text: str) -> tuple[PlannerAction, str] | None:
    """First SUBQ/FINAL line wins; everything before it is free-form reasoning."""
    lines = text.splitlines()
    for index, line in enumerate(lines):
        stripped = line.strip()
        if stripped.startswith("SUBQ:"):
            payload = stripped[len("SUBQ:"):].strip()
            if payload:
                return AskSubQuestion(payload), "\n".join(lines[:index]).strip()
        elif stripped.startswith("FINAL:"):
            payload = stripped[len("FINAL:"):].strip()
            if payload:
                return FinalAnswer(payload), "\n".join(lines[:index]).strip()
    return None


class Planner:
    """ReAct-style loop over the reasoning context; one action per call."""

    def __init__(self, gateway: LlmGateway, trace: TraceRecorder | None = None) -> None:
        self._gateway = gateway
        self._trace = trace
        self._prompt = load_prompt("planner.txt")
        self._pending: str | None = None

    def plan_next(self, state: PlannerState) -> PlannerAction:
        if state.step >= state.max_steps:
            raise ValueError("plan_next called at or past max_steps")
        transcript = render_context(state.context)
        request = transcript
        if state.step == state.max_steps - 1:
            request = f"{transcript}\n\n{_FINALIZE_NUDGE}"
        messages = [system(self._prompt), user(request)]

        result = self._gateway.chat(Role.PLANNER, messages)
        parsed = _parse_action(result.text) if result.ok else None
        reprompted = False
        if parsed is None:
            reprompted = True
            retry = messages + [user(_REPROMPT)]
            result = self._gateway.chat(Role.PLANNER, retry)
            parsed = _parse_action(result.text) if result.ok else None
        if parsed is None:
            self._record(state.step, "parse_failure", {"raw": result.text}, reprompted)
            raise PlanParseError("planner reply unparseable after one reprompt")

        action, reasoning = parsed
        if isinstance(action, AskSubQuestion):
            self._pending = action.sub_question
            self._record(
                state.step,
                "ask_sub_question",
                {"sub_question": action.sub_question, "reasoning": reasoning},
                reprompted,
            )
        else:
            self._pending = None
            self._record(
                state.step,
                "final_answer",
                {"answer": action.answer, "reasoning": reasoning},
                reprompted,
            )
        return action

    def append_result(self, state: PlannerState, sub_question: str, answer: str) -> PlannerState:
        """Record a solved pair; sub_question must match the most recent plan_next output."""
        if sub_question != self._pending:
            raise ValueError(
                f"append_result got {sub_question!r} but the pending "
                f"sub-question is {self._pending!r}"
            )
        self._pending = None
        context = state.context.append(sub_question, answer)
        return PlannerState(context, state.step + 1, state.max_steps)

    def _record(self, step: int, decision: str, payload: dict, reprompted: bool) -> None:
        if self._trace is None:
            return
        event = {"step": step, "decision": decision, **payload}
        if reprompted:
            event["reprompted"] = True
        self._trace.record(EventKind.PLANNER_STEP, event)
