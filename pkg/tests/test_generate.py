"""Prompt construction and answer-record tests."""

import pytest

from augrag.augment import FailingLlmClient, LlmClientError, StubLlmClient
from augrag.corpus import ContextPassage
from augrag.generate import Answer, GenConfig, build_prompt, generate_answer


def _passages():
    return [
        ContextPassage(1, [0, 1, 2], "first passage text", score=0.9),
        ContextPassage(7, [6, 7], "second passage text", score=0.5),
    ]


class TestGenConfig:
    def test_placeholders_required(self):
        with pytest.raises(ValueError):
            GenConfig(prompt_template="{query} {context}")
        with pytest.raises(ValueError):
            GenConfig(max_words=0)


class TestBuildPrompt:
    def test_contains_passages_and_word_limit(self):
        prompt = build_prompt("what is x?", _passages())
        assert "first passage text" in prompt
        assert "second passage text" in prompt
        assert "60 words" in prompt

    def test_no_context_block(self):
        prompt = build_prompt("what is x?", [])
        assert "(no context available)" in prompt

    def test_renders_in_score_order(self):
        reversed_input = list(reversed(_passages()))
        prompt = build_prompt("q?", reversed_input)
        assert prompt.index("first passage text") < prompt.index("second passage text")

    def test_pure_function(self):
        assert build_prompt("q?", _passages()) == build_prompt("q?", _passages())

    def test_char_budget_drops_lowest_score_first(self):
        big = ContextPassage(1, [1], "x" * 300, score=0.9)
        small = ContextPassage(5, [5], "keep me", score=0.95)
        cfg = GenConfig(max_prompt_chars=250)
        prompt = build_prompt("q?", [big, small], cfg)
        assert "keep me" in prompt
        assert "x" * 300 not in prompt

    def test_empty_query_rejected(self):
        with pytest.raises(ValueError):
            build_prompt(" ", [])


class TestGenerateAnswer:
    def test_stub_completion(self):
        client = StubLlmClient(reply="five words in this answer")
        answer = generate_answer(
            client, "prompt text", "q?", mode="rag_raw", retriever="tfidf",
            passages=_passages(),
        )
        assert answer.text == "five words in this answer"
        assert answer.retriever == "tfidf"
        assert len(answer.passages_used) == 2

    def test_client_failure_propagates(self):
        with pytest.raises(LlmClientError):
            generate_answer(FailingLlmClient(), "prompt", "q", mode="no_rag", retriever="none")

    def test_no_rag_forbids_passages(self):
        with pytest.raises(ValueError):
            Answer(text="t", mode="no_rag", retriever="none", passages_used=_passages())

    def test_round_trip(self):
        answer = Answer(
            text="some answer", mode="rag_augmented", retriever="pvec",
            passages_used=_passages(), query="q?",
        )
        restored = Answer.from_dict(answer.to_dict())
        assert restored.text == answer.text
        assert restored.mode == answer.mode
        assert restored.retriever == answer.retriever
        assert restored.query == answer.query
        assert [p.member_chunk_ids for p in restored.passages_used] == [
            p.member_chunk_ids for p in answer.passages_used
        ]
        assert [p.score for p in restored.passages_used] == [
            p.score for p in answer.passages_used
        ]
