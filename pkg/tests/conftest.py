"""Session fixtures over the shared fixture world."""

from __future__ import annotations

import pytest

from cmpsynth.corpus import Context, Document, split_contexts
from cmpsynth.kb import KnowledgeBase, read_dump
from cmpsynth.linking import MODE_CORPUS, MODE_WIKI, build_alias_index, link_corpus
from fixture_world import (
    BLACKPOOL_ARTICLE,
    CODY_ARTICLE,
    EIFFEL_ARTICLE,
    NEWS_DOC_TEXT,
    PAULUS_ARTICLE,
    TOWER_DOC_TEXT,
    fixture_dump_lines,
)


@pytest.fixture(scope="session")
def fixture_kb() -> KnowledgeBase:
    kb, counters = read_dump(fixture_dump_lines())
    assert counters.parse_errors == 0
    return kb


@pytest.fixture(scope="session")
def news_docs() -> list[Document]:
    return [
        Document("news1", "news", None, NEWS_DOC_TEXT),
        Document("news2", "news", None, TOWER_DOC_TEXT),
    ]


@pytest.fixture(scope="session")
def wiki_docs() -> list[Document]:
    return [
        Document("wiki-q101", "wiki", "Diablo Cody", CODY_ARTICLE),
        Document("wiki-q102", "wiki", "Diane Paulus", PAULUS_ARTICLE),
        Document("wiki-q150", "wiki", "Eiffel Tower", EIFFEL_ARTICLE),
        Document("wiki-q151", "wiki", "Blackpool Tower", BLACKPOOL_ARTICLE),
    ]


@pytest.fixture(scope="session")
def news_contexts(news_docs) -> list[Context]:
    contexts = []
    for doc in news_docs:
        contexts.extend(split_contexts(doc, "paragraph"))
    return contexts


@pytest.fixture(scope="session")
def wiki_contexts(wiki_docs) -> list[Context]:
    contexts = []
    for doc in wiki_docs:
        contexts.extend(split_contexts(doc, "fixed10"))
    return contexts


@pytest.fixture(scope="session")
def wiki_titles(wiki_docs) -> dict[str, str | None]:
    return {doc.doc_id: doc.title for doc in wiki_docs}


@pytest.fixture(scope="session")
def alias_index(fixture_kb):
    return build_alias_index(fixture_kb)


@pytest.fixture(scope="session")
def corpus_links(news_contexts, fixture_kb, alias_index):
    return link_corpus(news_contexts, fixture_kb, alias_index, MODE_CORPUS)


@pytest.fixture(scope="session")
def wiki_links(wiki_contexts, fixture_kb, alias_index, wiki_titles):
    return link_corpus(
        wiki_contexts, fixture_kb, alias_index, MODE_WIKI, doc_titles=wiki_titles
    )
