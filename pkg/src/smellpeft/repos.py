"""Repository selection over pluggable metadata providers.

Two providers ship: :class:`FixtureProvider` reads JSON-lines metadata
records (the offline default) and :class:`GitHubProvider` pages through the
public search endpoint of the GitHub REST API.
"""

from __future__ import annotations

import datetime as dt
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Protocol

import requests


class ProviderError(RuntimeError):
    """Transport-level failure while fetching metadata; safe to retry."""

    retriable = True


@dataclass(frozen=True)
class RepoCriteria:
    created_after: dt.date = dt.date(2020, 1, 1)
    created_before: dt.date = dt.date(2024, 4, 30)
    min_stars: int = 1000
    min_loc: int = 1000
    exclude_forks: bool = True

    def __post_init__(self):
        if not self.created_after < self.created_before:
            raise ValueError("created_after must precede created_before")
        if self.min_stars < 0 or self.min_loc < 0:
            raise ValueError("min_stars and min_loc must be non-negative")

    def accepts(self, repo: "RepoRecord") -> bool:
        # Both ends inclusive.
        return (
            self.created_after <= repo.created_at <= self.created_before
            and not (self.exclude_forks and repo.fork)
            and repo.stars >= self.min_stars
            and repo.loc >= self.min_loc
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["created_after"] = self.created_after.isoformat()
        d["created_before"] = self.created_before.isoformat()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RepoCriteria":
        d = dict(d)
        for key in ("created_after", "created_before"):
            if isinstance(d.get(key), str):
                d[key] = dt.date.fromisoformat(d[key])
        return cls(**d)


@dataclass(frozen=True)
class RepoRecord:
    full_name: str
    created_at: dt.date
    fork: bool
    stars: int
    loc: int
    clone_url: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "RepoRecord":
        created = d["created_at"]
        if isinstance(created, str):
            created = dt.date.fromisoformat(created[:10])
        return cls(
            full_name=d["full_name"],
            created_at=created,
            fork=bool(d.get("fork", False)),
            stars=int(d.get("stars", d.get("stargazers_count", 0))),
            loc=int(d.get("loc", 0)),
            clone_url=d.get("clone_url", ""),
        )


class MetadataProvider(Protocol):
    def records(self, criteria: RepoCriteria) -> Iterable[RepoRecord]: ...


class FixtureProvider:
    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)

    def records(self, criteria: RepoCriteria) -> Iterator[RepoRecord]:
        try:
            lines = self.path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise ProviderError(f"cannot read metadata fixture {self.path}: {exc}") from exc
        for line in lines:
            if line.strip():
                yield RepoRecord.from_dict(json.loads(line))


def estimate_loc_from_bytes(java_bytes: int) -> int:
    # ~35 bytes per line of Java, a rough figure; the REST API reports bytes only.
    return java_bytes // 35


class GitHubProvider:
    """Live search over ``GET /search/repositories``.

    The search query already applies the date, star and fork criteria; line
    counts are estimated from the per-language byte counts of each hit.
    """

    api = "https://api.github.com"

    def __init__(
        self,
        token: str | None = None,
        session: requests.Session | None = None,
        loc_estimator: Callable[[int], int] = estimate_loc_from_bytes,
        per_page: int = 100,
        max_pages: int = 10,
    ):
        self.token = token if token is not None else os.environ.get("GITHUB_TOKEN")
        self.session = session or requests.Session()
        self.loc_estimator = loc_estimator
        self.per_page = per_page
        self.max_pages = max_pages

    def _get(self, url: str, params: dict | None = None) -> dict:
        headers = {"Accept": "application/vnd.github+json", "X-GitHub-Api-Version": "2022-11-28"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            resp = self.session.get(url, params=params, headers=headers, timeout=30)
        except requests.RequestException as exc:
            raise ProviderError(f"GET {url} failed: {exc}") from exc
        if resp.status_code in (403, 429) or resp.status_code >= 500:
            raise ProviderError(f"GET {url} returned HTTP {resp.status_code}")
        resp.raise_for_status()
        return resp.json()

    def query(self, criteria: RepoCriteria) -> str:
        q = [
            "language:Java",
            f"created:{criteria.created_after.isoformat()}..{criteria.created_before.isoformat()}",
            f"stars:>={criteria.min_stars}",
        ]
        if criteria.exclude_forks:
            q.append("fork:false")
        return " ".join(q)

    def records(self, criteria: RepoCriteria) -> Iterator[RepoRecord]:
        for page in range(1, self.max_pages + 1):
            data = self._get(
                f"{self.api}/search/repositories",
                {"q": self.query(criteria), "per_page": self.per_page, "page": page, "sort": "stars"},
            )
            items = data.get("items", [])
            for item in items:
                langs = self._get(item["languages_url"]) if "languages_url" in item else {}
                yield RepoRecord(
                    full_name=item["full_name"],
                    created_at=dt.date.fromisoformat(item["created_at"][:10]),
                    fork=bool(item.get("fork", False)),
                    stars=int(item.get("stargazers_count", 0)),
                    loc=self.loc_estimator(int(langs.get("Java", 0))),
                    clone_url=item.get("clone_url", ""),
                )
            if len(items) < self.per_page:
                return


def select_repositories(criteria: RepoCriteria, provider: MetadataProvider) -> list[RepoRecord]:
    return [r for r in provider.records(criteria) if criteria.accepts(r)]
