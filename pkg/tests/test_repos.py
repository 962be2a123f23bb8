import datetime as dt
import json

import pytest
import requests

from smellpeft.repos import (
    FixtureProvider,
    GitHubProvider,
    ProviderError,
    RepoCriteria,
    RepoRecord,
    select_repositories,
)


def rec(name, *, created="2021-06-01", fork=False, stars=5000, loc=20000):
    return {"full_name": name, "created_at": created, "fork": fork, "stars": stars, "loc": loc}


@pytest.fixture
def fixture_file(tmp_path):
    rows = [
        rec("a/keep"),
        rec("a/fork", fork=True),
        rec("b/few-stars", stars=999),
        rec("b/edge-stars", stars=1000),
        rec("c/small", loc=999),
        rec("c/too-old", created="2019-12-31"),
        rec("c/first-day", created="2020-01-01"),
        rec("c/last-day", created="2024-04-30"),
        rec("c/too-new", created="2024-05-01"),
    ]
    path = tmp_path / "repos.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def test_fixture_selection(fixture_file):
    got = [r.full_name for r in select_repositories(RepoCriteria(), FixtureProvider(fixture_file))]
    assert got == ["a/keep", "b/edge-stars", "c/first-day", "c/last-day"]


def test_fork_exclusion_is_configurable(fixture_file):
    got = select_repositories(RepoCriteria(exclude_forks=False), FixtureProvider(fixture_file))
    assert "a/fork" in [r.full_name for r in got]


def test_criteria_invariants():
    with pytest.raises(ValueError):
        RepoCriteria(created_after=dt.date(2024, 1, 1), created_before=dt.date(2020, 1, 1))
    with pytest.raises(ValueError):
        RepoCriteria(min_stars=-1)
    c = RepoCriteria(min_stars=3)
    assert RepoCriteria.from_dict(c.to_dict()) == c


class FakeResponse:
    def __init__(self, status, payload):
        self.status_code = status
        self._payload = payload

    def json(self):
        return self._payload

    def raise_for_status(self):
        if self.status_code >= 400:
            raise requests.HTTPError(str(self.status_code))


class FakeSession:
    def __init__(self, routes):
        self.routes = routes
        self.calls = []

    def get(self, url, params=None, headers=None, timeout=None):
        self.calls.append((url, params, headers))
        out = self.routes[url]
        if isinstance(out, Exception):
            raise out
        return out


def test_github_provider_pages_and_estimates_loc():
    search = "https://api.github.com/search/repositories"
    items = [
        {
            "full_name": "o/r",
            "created_at": "2022-03-04T10:00:00Z",
            "fork": False,
            "stargazers_count": 1500,
            "languages_url": "https://api.github.com/repos/o/r/languages",
            "clone_url": "https://example.invalid/o/r.git",
        }
    ]
    session = FakeSession(
        {
            search: FakeResponse(200, {"items": items}),
            "https://api.github.com/repos/o/r/languages": FakeResponse(200, {"Java": 70_000}),
        }
    )
    provider = GitHubProvider(token="t0k", session=session)
    (r,) = list(provider.records(RepoCriteria()))
    assert r == RepoRecord("o/r", dt.date(2022, 3, 4), False, 1500, 2000, "https://example.invalid/o/r.git")
    url, params, headers = session.calls[0]
    assert "stars:>=1000" in params["q"] and "fork:false" in params["q"] and "language:Java" in params["q"]
    assert headers["Authorization"] == "Bearer t0k"


@pytest.mark.parametrize("failure", [FakeResponse(403, {}), FakeResponse(502, {}), requests.ConnectionError("down")])
def test_transport_failures_are_retriable(failure):
    session = FakeSession({"https://api.github.com/search/repositories": failure})
    with pytest.raises(ProviderError) as err:
        list(GitHubProvider(token="", session=session).records(RepoCriteria()))
    assert err.value.retriable


def test_token_from_environment(monkeypatch):
    monkeypatch.setenv("GITHUB_TOKEN", "from-env")
    assert GitHubProvider(session=FakeSession({})).token == "from-env"
