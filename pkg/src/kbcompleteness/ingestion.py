"""Clients that build the dataset: Person sub-classes and their instances from
a SPARQL endpoint, and article revision histories from the MediaWiki action API.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from urllib.parse import unquote

import requests

from . import __version__
from .dataset import EditRecord, EntityRegistry, RegistryEntry, format_timestamp, parse_timestamp

logger = logging.getLogger(__name__)

DBPEDIA_ONTOLOGY = "http://dbpedia.org/ontology/"
PERSON_CLASS = DBPEDIA_ONTOLOGY + "Person"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"

DEFAULT_PERIOD = (
    datetime(2019, 1, 1, tzinfo=timezone.utc),
    datetime(2024, 1, 1, tzinfo=timezone.utc),
)
USER_AGENT_ENV = "KBCOMPLETENESS_USER_AGENT"


class IngestionError(Exception):
    pass


class NetworkError(IngestionError):
    """A request still failed after the configured number of retries."""


class MalformedResponseError(IngestionError):
    pass


class PagingLoopError(IngestionError):
    """The server handed back a page or continuation token already seen."""


@dataclass(frozen=True)
class ClassDescriptor:
    class_id: str
    label: str
    uri: str = ""
    instance_count_hint: int | None = None


@dataclass(frozen=True)
class EntityDescriptor:
    entity_id: str
    label: str


@dataclass(frozen=True)
class FetchPolicy:
    max_in_flight: int = 4
    requests_per_second: float = 5.0
    retry_limit: int = 3
    period: tuple[datetime, datetime] = DEFAULT_PERIOD
    backoff_seconds: float = 1.0
    timeout: float = 60.0

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        if not self.requests_per_second > 0:
            raise ValueError("requests_per_second must be positive")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be non-negative")
        start, end = self.period
        if not start < end:
            raise ValueError("period start must precede period end")


def default_user_agent() -> str:
    return os.environ.get(USER_AGENT_ENV) or f"kbcompleteness/{__version__} (set {USER_AGENT_ENV} to identify yourself)"


class RateLimiter:
    """Token bucket: ``rate`` tokens per second, holding at most ``burst`` tokens."""

    def __init__(self, rate: float, burst: int = 1, clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        self.rate = rate
        self.burst = burst
        self._clock = clock
        self._sleep = sleep
        self._tokens = float(burst)
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.burst, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


_RETRY_STATUS = {429, 500, 502, 503, 504}
_RETRY_API_CODES = {"ratelimited", "maxlag", "readonly", "internal_api_error_DBQueryTimeoutError"}


class HttpClient:
    """JSON-over-HTTP with a shared rate limiter, bounded concurrency and retries.

    One instance should be shared by all threads talking to the same host.
    """

    def __init__(self, policy: FetchPolicy, session: requests.Session | None = None, user_agent: str | None = None, sleep: Callable[[float], None] = time.sleep):
        self.policy = policy
        self.session = session or requests.Session()
        self.session.headers["User-Agent"] = user_agent or default_user_agent()
        self.limiter = RateLimiter(policy.requests_per_second, policy.max_in_flight, sleep=sleep)
        self._slots = threading.BoundedSemaphore(policy.max_in_flight)
        self._sleep = sleep
        self.requests_made = 0

    def get_json(self, url: str, params: dict, *, method: str = "GET", headers: dict | None = None) -> dict:
        attempt = 0
        while True:
            delay = None
            try:
                self.limiter.acquire()
                with self._slots:
                    self.requests_made += 1
                    if method == "POST":
                        resp = self.session.post(url, data=params, headers=headers, timeout=self.policy.timeout)
                    else:
                        resp = self.session.get(url, params=params, headers=headers, timeout=self.policy.timeout)
                if resp.status_code in _RETRY_STATUS:
                    delay = _retry_after(resp)
                    problem = f"HTTP {resp.status_code}"
                else:
                    resp.raise_for_status()
                    try:
                        payload = resp.json()
                    except ValueError:
                        raise MalformedResponseError(f"{url}: response is not JSON") from None
                    code = payload.get("error", {}).get("code") if isinstance(payload, dict) and isinstance(payload.get("error"), dict) else None
                    if code in _RETRY_API_CODES:
                        problem = f"API error {code}"
                    else:
                        return payload
            except (requests.ConnectionError, requests.Timeout) as exc:
                problem = type(exc).__name__
            except requests.HTTPError as exc:
                raise NetworkError(f"{url}: {exc}") from exc
            if attempt >= self.policy.retry_limit:
                raise NetworkError(f"{url}: {problem} after {attempt + 1} attempt(s)")
            attempt += 1
            wait = delay if delay is not None else self.policy.backoff_seconds * 2 ** (attempt - 1)
            logger.info("%s: %s, retry %d/%d in %.1fs", url, problem, attempt, self.policy.retry_limit, wait)
            self._sleep(wait)


def _retry_after(resp) -> float | None:
    value = resp.headers.get("Retry-After")
    try:
        return max(0.0, float(value)) if value is not None else None
    except ValueError:
        return None


def local_name(uri: str) -> str:
    cut = max(uri.rfind("/"), uri.rfind("#"))
    return unquote(uri[cut + 1:])


def _bindings(payload: dict) -> list[dict]:
    try:
        rows = payload["results"]["bindings"]
    except (KeyError, TypeError):
        raise MalformedResponseError("not a SPARQL JSON result set") from None
    if not isinstance(rows, list):
        raise MalformedResponseError("SPARQL bindings are not a list")
    return rows


def _value(row: dict, var: str) -> str | None:
    cell = row.get(var)
    if cell is None:
        return None
    if not isinstance(cell, dict) or "value" not in cell:
        raise MalformedResponseError(f"malformed binding for ?{var}")
    return cell["value"]


def _label_clause(var: str) -> str:
    return f'OPTIONAL {{ {var} <{RDFS}label> ?label . FILTER(langMatches(lang(?label), "en")) }}'


def subclass_query(root: str = PERSON_CLASS, transitive: bool = True) -> str:
    path = f"<{RDFS}subClassOf>" + ("+" if transitive else "")
    return f"SELECT DISTINCT ?class ?label WHERE {{ ?class {path} <{root}> . {_label_clause('?class')} }}"


def instance_query(class_uri: str, limit: int, offset: int) -> str:
    return (
        f"SELECT DISTINCT ?entity ?label WHERE {{ ?entity a <{class_uri}> . {_label_clause('?entity')} }} "
        f"ORDER BY ?entity LIMIT {limit} OFFSET {offset}"
    )


def sparql_select(client: HttpClient, endpoint: str, query: str) -> list[dict]:
    payload = client.get_json(
        endpoint,
        {"query": query, "format": "application/sparql-results+json"},
        headers={"Accept": "application/sparql-results+json"},
    )
    return _bindings(payload)


def fetch_person_subclasses(endpoint: str, policy: FetchPolicy = FetchPolicy(), *, root: str = PERSON_CLASS, depth: int | None = None, client: HttpClient | None = None) -> list[ClassDescriptor]:
    """Sub-classes of ``root``, transitively by default, sorted by class id.

    ``depth`` limits the closure to that many ``subClassOf`` steps; it is
    resolved level by level with direct sub-class queries.
    """
    client = client or HttpClient(policy)
    found: dict[str, ClassDescriptor] = {}
    if depth is None:
        for row in sparql_select(client, endpoint, subclass_query(root, transitive=True)):
            _add_class(found, row)
    else:
        frontier = [root]
        visited = {root}
        for _ in range(depth):
            nxt = []
            for parent in frontier:
                for row in sparql_select(client, endpoint, subclass_query(parent, transitive=False)):
                    d = _add_class(found, row)
                    if d and d.uri not in visited:
                        visited.add(d.uri)
                        nxt.append(d.uri)
            frontier = nxt
    return [found[k] for k in sorted(found)]


def _add_class(found: dict[str, ClassDescriptor], row: dict) -> ClassDescriptor | None:
    uri = _value(row, "class")
    if not uri:
        raise MalformedResponseError("sub-class row without ?class")
    class_id = local_name(uri)
    if class_id in found:
        return None
    d = ClassDescriptor(class_id, _value(row, "label") or class_id, uri)
    found[class_id] = d
    return d


def fetch_class_instances(endpoint: str, class_id: str | ClassDescriptor, policy: FetchPolicy = FetchPolicy(), *, page_size: int = 10000, namespace: str = DBPEDIA_ONTOLOGY, client: HttpClient | None = None) -> list[EntityDescriptor]:
    """All instances of a class, paging with LIMIT/OFFSET until a short page.

    A page identical to the previous one means the endpoint ignores OFFSET
    and raises :class:`PagingLoopError` rather than looping forever.
    """
    client = client or HttpClient(policy)
    uri = class_id.uri if isinstance(class_id, ClassDescriptor) and class_id.uri else namespace + str(getattr(class_id, "class_id", class_id))
    out: dict[str, EntityDescriptor] = {}
    seen_pages: set[str] = set()
    offset = 0
    while True:
        rows = sparql_select(client, endpoint, instance_query(uri, page_size, offset))
        if rows:
            digest = hashlib.sha1(json.dumps(rows, sort_keys=True).encode()).hexdigest()
            if digest in seen_pages:
                raise PagingLoopError(f"{uri}: page at offset {offset} repeats an earlier page")
            seen_pages.add(digest)
        for row in rows:
            e_uri = _value(row, "entity")
            if not e_uri:
                raise MalformedResponseError("instance row without ?entity")
            entity_id = local_name(e_uri)
            if entity_id and entity_id not in out:
                out[entity_id] = EntityDescriptor(entity_id, _value(row, "label") or entity_id.replace("_", " "))
        if len(rows) < page_size:
            break
        offset += page_size
    return list(out.values())


def build_registry(instances: dict[str, Sequence[EntityDescriptor]]) -> EntityRegistry:
    """Merge per-class instance lists into one registry (gender left undefined)."""
    labels: dict[str, str] = {}
    classes: dict[str, list[str]] = {}
    for class_id in sorted(instances):
        for d in instances[class_id]:
            labels.setdefault(d.entity_id, d.label)
            cl = classes.setdefault(d.entity_id, [])
            if class_id not in cl:
                cl.append(class_id)
    return EntityRegistry({e: RegistryEntry(e, labels[e], tuple(classes[e])) for e in sorted(labels)})


def load_class_allow_list(lines: Iterable[str]) -> set[str]:
    allow = set()
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            allow.add(line)
    return allow


@dataclass
class EditHistory:
    entity_id: str
    records: list[EditRecord]
    missing: bool = False


def _mw_pages(payload: dict) -> list[dict]:
    pages = payload.get("query", {}).get("pages")
    if pages is None:
        return []
    if isinstance(pages, dict):
        return list(pages.values())
    if isinstance(pages, list):
        return pages
    raise MalformedResponseError("query.pages is neither a list nor an object")


def fetch_edit_history(api: str, entity_id: str, policy: FetchPolicy = FetchPolicy(), class_ids: Sequence[str] = ("unknown",), *, client: HttpClient | None = None) -> EditHistory:
    """Revisions of one article inside ``policy.period``, oldest first.

    Follows ``continue`` tokens; a token seen twice raises
    :class:`PagingLoopError`. A missing article is reported through
    ``EditHistory.missing`` with no records.
    """
    client = client or HttpClient(policy)
    start, end = policy.period
    base = {
        "action": "query",
        "prop": "revisions",
        "rvprop": "ids|timestamp",
        "rvlimit": "max",
        "rvdir": "newer",
        "rvstart": format_timestamp(start),
        "rvend": format_timestamp(end - timedelta(seconds=1)),
        "titles": entity_id,
        "format": "json",
        "formatversion": "2",
    }
    cont: dict = {}
    seen_tokens: set[str] = set()
    by_rev: dict[int, EditRecord] = {}
    missing = False
    while True:
        payload = client.get_json(api, {**base, **cont})
        if "error" in payload:
            err = payload["error"]
            raise MalformedResponseError(f"{entity_id}: API error {err.get('code')}: {err.get('info')}")
        for page in _mw_pages(payload):
            if "missing" in page or "invalid" in page:
                missing = True
                continue
            for rev in page.get("revisions", []):
                try:
                    revid = int(rev["revid"])
                    ts = parse_timestamp(rev["timestamp"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise MalformedResponseError(f"{entity_id}: bad revision entry {rev!r}") from exc
                if start <= ts < end:
                    by_rev.setdefault(revid, EditRecord(entity_id, ts, revid, tuple(class_ids)))
        nxt = payload.get("continue")
        if not nxt:
            break
        token = json.dumps(nxt, sort_keys=True)
        if token in seen_tokens:
            raise PagingLoopError(f"{entity_id}: continuation token repeated: {token}")
        seen_tokens.add(token)
        cont = {k: v for k, v in nxt.items()}
    if missing and not by_rev:
        logger.info("%s: no article", entity_id)
    records = sorted(by_rev.values(), key=lambda r: r.sort_key)
    return EditHistory(entity_id, records, missing and not records)


@dataclass
class BatchResult:
    records: list[EditRecord]
    missing: list[str] = field(default_factory=list)
    failed: dict[str, str] = field(default_factory=dict)


def fetch_edit_histories(api: str, registry: EntityRegistry, policy: FetchPolicy = FetchPolicy(), *, entity_ids: Iterable[str] | None = None, client: HttpClient | None = None) -> BatchResult:
    """Revision histories for many entities with at most ``max_in_flight`` requests outstanding.

    Missing articles and entities whose requests keep failing are skipped
    and listed; the batch carries on.
    """
    client = client or HttpClient(policy)
    ids = sorted(entity_ids if entity_ids is not None else registry)

    def one(entity_id: str):
        try:
            return fetch_edit_history(api, entity_id, policy, registry[entity_id].class_ids, client=client), None
        except IngestionError as exc:
            logger.warning("%s: %s", entity_id, exc)
            return None, str(exc)

    with ThreadPoolExecutor(max_workers=policy.max_in_flight) as pool:
        results = list(pool.map(one, ids))
    out = BatchResult([])
    for entity_id, (hist, err) in zip(ids, results):
        if err is not None:
            out.failed[entity_id] = err
        elif hist.missing:
            out.missing.append(entity_id)
        else:
            out.records.extend(hist.records)
    return out
