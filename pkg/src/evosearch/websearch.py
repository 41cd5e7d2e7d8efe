"""Literature and web search behind one normalized interface.

Three backends (arXiv, Semantic Scholar, Tavily) share a result shape and an
injectable transport so tests never hit the network. Offline or unconfigured
backends report an explicit unavailable outcome instead of crashing.
"""

from __future__ import annotations

import logging
import os
import xml.etree.ElementTree as ElementTree
from dataclasses import dataclass, field
from typing import Callable, Optional

logger = logging.getLogger(__name__)

BACKENDS = ("arxiv", "semantic_scholar", "tavily")
SNIPPET_CHARS = 300

ARXIV_URL = "http://export.arxiv.org/api/query"
SEMANTIC_SCHOLAR_URL = "https://api.semanticscholar.org/graph/v1/paper/search"
TAVILY_URL = "https://api.tavily.com/search"

TAVILY_KEY_ENV = "TAVILY_API_KEY"
SEMANTIC_SCHOLAR_KEY_ENV = "SEMANTIC_SCHOLAR_API_KEY"


class SearchParameterError(ValueError):
    pass


@dataclass(frozen=True)
class SearchResult:
    title: str
    snippet: str
    identifier: str


@dataclass(frozen=True)
class SearchOutcome:
    backend: str
    status: str  # ok | unavailable | error | rate_limited
    results: tuple[SearchResult, ...] = ()
    detail: str = ""
    retry_after: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class TransportRequest:
    method: str
    url: str
    params: dict = field(default_factory=dict)
    headers: dict = field(default_factory=dict)
    json_body: Optional[dict] = None


@dataclass(frozen=True)
class TransportResponse:
    status_code: int
    text: str
    headers: dict = field(default_factory=dict)


class TransportUnavailable(RuntimeError):
    """Network-level failure (DNS, refused connection, offline host)."""


Transport = Callable[[TransportRequest], TransportResponse]


def requests_transport(request: TransportRequest) -> TransportResponse:
    import requests

    try:
        response = requests.request(
            request.method,
            request.url,
            params=request.params or None,
            headers=request.headers or None,
            json=request.json_body,
            timeout=20,
        )
    except requests.RequestException as exc:
        raise TransportUnavailable(str(exc)) from exc
    return TransportResponse(
        status_code=response.status_code,
        text=response.text,
        headers=dict(response.headers),
    )


def web_search(
    backend: str,
    query: str,
    max_results: int = 5,
    transport: Optional[Transport] = None,
    offline: bool = False,
) -> SearchOutcome:
    if backend not in BACKENDS:
        raise SearchParameterError(
            f"unknown backend {backend!r}; expected one of {', '.join(BACKENDS)}"
        )
    if not query or not query.strip():
        raise SearchParameterError("query must be non-empty")
    if max_results < 1:
        raise SearchParameterError("max_results must be >= 1")
    if offline:
        return SearchOutcome(
            backend=backend, status="unavailable", detail="offline mode"
        )
    if backend == "tavily" and not os.environ.get(TAVILY_KEY_ENV):
        return SearchOutcome(
            backend=backend,
            status="unavailable",
            detail=f"missing credentials; set {TAVILY_KEY_ENV}",
        )
    send = transport or requests_transport
    request = _build_request(backend, query.strip(), max_results)
    try:
        response = send(request)
    except TransportUnavailable as exc:
        return SearchOutcome(backend=backend, status="unavailable", detail=str(exc))
    if response.status_code == 429:
        retry_after = _parse_retry_after(response.headers)
        return SearchOutcome(
            backend=backend,
            status="rate_limited",
            detail="rate limited",
            retry_after=retry_after,
        )
    if response.status_code != 200:
        return SearchOutcome(
            backend=backend,
            status="error",
            detail=f"{backend} returned HTTP {response.status_code}",
        )
    try:
        results = _parse_results(backend, response.text, max_results)
    except Exception as exc:
        return SearchOutcome(
            backend=backend,
            status="error",
            detail=f"{backend} response could not be parsed: {exc}",
        )
    return SearchOutcome(backend=backend, status="ok", results=tuple(results))


def _build_request(backend: str, query: str, max_results: int) -> TransportRequest:
    if backend == "arxiv":
        return TransportRequest(
            method="GET",
            url=ARXIV_URL,
            params={"search_query": f"all:{query}", "max_results": max_results},
        )
    if backend == "semantic_scholar":
        headers = {}
        key = os.environ.get(SEMANTIC_SCHOLAR_KEY_ENV)
        if key:
            headers["x-api-key"] = key
        return TransportRequest(
            method="GET",
            url=SEMANTIC_SCHOLAR_URL,
            params={
                "query": query,
                "limit": max_results,
                "fields": "title,abstract,url,externalIds",
            },
            headers=headers,
        )
    return TransportRequest(
        method="POST",
        url=TAVILY_URL,
        json_body={
            "api_key": os.environ.get(TAVILY_KEY_ENV, ""),
            "query": query,
            "max_results": max_results,
        },
    )


def _parse_results(backend: str, body: str, max_results: int) -> list[SearchResult]:
    if backend == "arxiv":
        return _parse_arxiv(body, max_results)
    import json

    payload = json.loads(body)
    if backend == "semantic_scholar":
        rows = payload.get("data") or []
        return [
            SearchResult(
                title=row.get("title") or "(untitled)",
                snippet=_snippet(row.get("abstract") or ""),
                identifier=row.get("url") or row.get("paperId") or "",
            )
            for row in rows[:max_results]
        ]
    rows = payload.get("results") or []
    return [
        SearchResult(
            title=row.get("title") or "(untitled)",
            snippet=_snippet(row.get("content") or ""),
            identifier=row.get("url") or "",
        )
        for row in rows[:max_results]
    ]


def _parse_arxiv(body: str, max_results: int) -> list[SearchResult]:
    ns = {"atom": "http://www.w3.org/2005/Atom"}
    root = ElementTree.fromstring(body)
    results = []
    for entry in root.findall("atom:entry", ns)[:max_results]:
        title = _text(entry.find("atom:title", ns))
        summary = _text(entry.find("atom:summary", ns))
        identifier = _text(entry.find("atom:id", ns))
        results.append(
            SearchResult(
                title=" ".join(title.split()),
                snippet=_snippet(summary),
                identifier=identifier,
            )
        )
    return results


def _text(node: Optional[ElementTree.Element]) -> str:
    return (node.text or "") if node is not None else ""


def _snippet(text: str) -> str:
    collapsed = " ".join(text.split())
    if len(collapsed) <= SNIPPET_CHARS:
        return collapsed
    return collapsed[: SNIPPET_CHARS - 3] + "..."


def _parse_retry_after(headers: dict) -> Optional[float]:
    for key, value in headers.items():
        if key.lower() == "retry-after":
            try:
                return float(value)
            except (TypeError, ValueError):
                return None
    return None
