import json

import pytest

from scimigrate.ingest import PublicationRecord, Window, build_snapshot


def rec(paper: str, author: str, year: int, *countries: str) -> PublicationRecord:
    normalized = tuple(sorted({c.strip().upper() for c in countries}))
    return PublicationRecord(paper, author, year, normalized)


def row_line(paper, author, year, countries) -> str:
    return json.dumps(
        {"paper_id": paper, "author_id": author, "year": year, "countries": countries}
    )


@pytest.fixture
def window() -> Window:
    return Window(2001, 2011)


def snapshot_of(records, window=Window(2001, 2011)):
    return build_snapshot(records, window)
