"""Turn ratings tables and preference lists into urn datasets.

File formats (UTF-8, comma separated, header row first):

* category map: ``item,category``
* ratings: ``user,item,rating[,timestamp]`` (extra columns ignored)
* preference lists: ``respondent,item``, one row per listed item
* priority order: plain text, one category per line, least general first
* frequency data: a ``#m=m_1,...,m_c`` line, then ``n,<category names>``,
  then one row per respondent
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .abc import Dataset

log = logging.getLogger(__name__)

JOURNAL_CATEGORIES = (
    "Methodology",
    "Probability",
    "Applied Statistics",
    "Computational Statistics",
    "Econometrics and Finance",
)
NO_GENRE = "(no genres listed)"


class IngestError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class CategoryMap:
    categories: tuple[str, ...]
    item_to_category: Mapping[str, str]
    priority_order: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.categories:
            raise IngestError("category map has no categories")
        if len(set(self.categories)) != len(self.categories):
            raise IngestError("duplicate category names")
        known = set(self.categories)
        for item, cat in self.item_to_category.items():
            if cat not in known:
                raise IngestError(f"item {item!r} refers to unknown category {cat!r}")
        if self.priority_order is not None and sorted(self.priority_order) != sorted(self.categories):
            raise IngestError("priority order must be a permutation of the categories")

    @property
    def c(self) -> int:
        return len(self.categories)

    @property
    def multiplicities(self) -> np.ndarray:
        index = {cat: j for j, cat in enumerate(self.categories)}
        m = np.zeros(self.c, dtype=np.int64)
        for cat in self.item_to_category.values():
            m[index[cat]] += 1
        return m

    def index_of(self, item: str) -> int:
        try:
            cat = self.item_to_category[item]
        except KeyError:
            raise IngestError(f"item {item!r} is not in the category map") from None
        return self.categories.index(cat)


@dataclass(frozen=True)
class RatingRecord:
    user: str
    item: str
    rating: float
    scale: tuple[float, float] = field(default=(0.5, 5.0), compare=False)

    def __post_init__(self) -> None:
        lo, hi = self.scale
        if not lo <= self.rating <= hi:
            raise IngestError(f"rating {self.rating} for item {self.item!r} outside scale [{lo}, {hi}]")


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise IngestError(f"{path}: empty file")
    return [h.strip() for h in rows[0]], rows[1:]


def load_priority_order(path) -> tuple[str, ...]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    order = tuple(s.strip() for s in lines if s.strip() and not s.lstrip().startswith("#"))
    if not order:
        raise IngestError(f"{path}: empty priority order")
    return order


def resolve_by_priority(tags: Iterable[str], priority: Sequence[str]) -> str | None:
    """Least general tag, i.e. the one earliest in ``priority``; None if no tag is ranked."""
    rank = {cat: i for i, cat in enumerate(priority)}
    ranked = [t for t in tags if t in rank]
    return min(ranked, key=rank.__getitem__) if ranked else None


def build_category_map(
    pairs: Iterable[tuple[str, str]],
    categories: Sequence[str] | None = None,
    priority_order: Sequence[str] | None = None,
) -> CategoryMap:
    """Build a map from ``(item, category)`` pairs.

    Repeated items are an error unless a priority order is given, in which
    case the least general of the item's categories wins.
    """
    tagged: dict[str, list[str]] = {}
    seen: list[str] = []
    for item, cat in pairs:
        tagged.setdefault(item, []).append(cat)
        if cat not in seen:
            seen.append(cat)
    if categories is None:
        categories = tuple(priority_order) if priority_order else tuple(seen)
    mapping: dict[str, str] = {}
    for item, cats in tagged.items():
        if len(cats) > 1 and priority_order is None:
            raise IngestError(f"duplicate item id {item!r}")
        if priority_order is None:
            mapping[item] = cats[0]
            continue
        unknown = [cat for cat in cats if cat not in priority_order]
        if unknown:
            raise IngestError(f"item {item!r} refers to unknown category {unknown[0]!r}")
        mapping[item] = resolve_by_priority(cats, priority_order)
    return CategoryMap(tuple(categories), mapping, tuple(priority_order) if priority_order else None)


def load_category_map(path, priority_path=None, categories: Sequence[str] | None = None) -> CategoryMap:
    header, rows = _read_rows(path)
    if header[:2] != ["item", "category"]:
        raise IngestError(f"{path}: expected header 'item,category', got {','.join(header)}")
    if not rows:
        raise IngestError(f"{path}: no items")
    pairs = [(r[0].strip(), r[1].strip()) for r in rows]
    priority = load_priority_order(priority_path) if priority_path else None
    return build_category_map(pairs, categories, priority)


def journals_map() -> CategoryMap:
    """The bundled map of 124 statistics journals onto five categories."""
    ref = resources.files(__package__) / "data" / "journals.csv"
    with resources.as_file(ref) as path:
        return load_category_map(path, categories=JOURNAL_CATEGORIES)


def movie_genre_order() -> tuple[str, ...]:
    """The 18 MovieLens genres from least to most general."""
    ref = resources.files(__package__) / "data" / "movie_genres.txt"
    with resources.as_file(ref) as path:
        return load_priority_order(path)


def load_movielens_movies(path, priority: Sequence[str] | None = None) -> tuple[CategoryMap, set[str]]:
    """Read a MovieLens ``movies.csv`` (``movieId,title,genres``).

    Each movie gets its least general genre. Genres outside ``priority`` are
    ignored; movies left with no usable genre are returned as excluded ids.
    """
    priority = tuple(priority) if priority else movie_genre_order()
    header, rows = _read_rows(path)
    try:
        i_id, i_genres = header.index("movieId"), header.index("genres")
    except ValueError:
        raise IngestError(f"{path}: expected movieId and genres columns") from None
    mapping: dict[str, str] = {}
    excluded: set[str] = set()
    for r in rows:
        item = r[i_id].strip()
        if item in mapping or item in excluded:
            raise IngestError(f"duplicate item id {item!r}")
        genre = resolve_by_priority(r[i_genres].split("|"), priority)
        if genre is None:
            excluded.add(item)
        else:
            mapping[item] = genre
    if excluded:
        log.info("%d movies have no ranked genre and are excluded", len(excluded))
    return CategoryMap(priority, mapping, priority), excluded


def read_ratings_csv(path, scale: tuple[float, float] = (0.5, 5.0)) -> list[RatingRecord]:
    header, rows = _read_rows(path)
    cols = {h: i for i, h in enumerate(header)}
    user_col = cols.get("user", cols.get("userId"))
    item_col = cols.get("item", cols.get("movieId"))
    if user_col is None or item_col is None or "rating" not in cols:
        raise IngestError(f"{path}: expected user,item,rating columns")
    try:
        return [RatingRecord(r[user_col].strip(), r[item_col].strip(), float(r[cols["rating"]]), scale) for r in rows]
    except (ValueError, IndexError) as exc:
        if isinstance(exc, IngestError):
            raise
        raise IngestError(f"{path}: malformed rating row ({exc})") from exc


def ratings_to_frequencies(
    records: Iterable[RatingRecord],
    cmap: CategoryMap,
    threshold: float,
    ignore: Iterable[str] = (),
) -> Dataset:
    """One count vector per user: items rated at least ``threshold``, by category.

    Users are kept in order of first appearance; users with no item at or
    above the threshold are dropped. Items in ``ignore`` are skipped silently;
    any other unmapped item is an error.
    """
    ignore = set(ignore)
    rows: dict[str, np.ndarray] = {}
    for rec in records:
        lo, hi = rec.scale
        if not lo <= threshold <= hi:
            raise IngestError(f"threshold {threshold} outside rating scale [{lo}, {hi}]")
        if rec.item in ignore:
            continue
        j = cmap.index_of(rec.item)
        row = rows.setdefault(rec.user, np.zeros(cmap.c, dtype=np.int64))
        if rec.rating >= threshold:
            row[j] += 1
    kept = [row for row in rows.values() if row.sum() > 0]
    dropped = len(rows) - len(kept)
    if dropped:
        log.info("dropped %d users with no rating at or above %s", dropped, threshold)
    if not kept:
        raise IngestError("no user has a rating at or above the threshold")
    return Dataset(np.array(kept), cmap.multiplicities, cmap.categories)


def read_preference_lists(path) -> dict[str, list[str]]:
    header, rows = _read_rows(path)
    if header[:2] != ["respondent", "item"]:
        raise IngestError(f"{path}: expected header 'respondent,item'")
    lists: dict[str, list[str]] = {}
    for r in rows:
        lists.setdefault(r[0].strip(), []).append(r[1].strip())
    return lists


def preference_lists_to_frequencies(
    lists: Mapping[str, Sequence[str]] | Sequence[Sequence[str]],
    cmap: CategoryMap,
    bounds: tuple[int, int] = (10, 20),
) -> Dataset:
    """Category counts of each respondent's list of chosen items."""
    items = lists.items() if isinstance(lists, Mapping) else enumerate(lists, start=1)
    rows = []
    outside = 0
    for who, chosen in items:
        if not chosen:
            raise IngestError(f"respondent {who}: empty list")
        if len(set(chosen)) != len(chosen):
            dup = next(i for i in chosen if list(chosen).count(i) > 1)
            raise IngestError(f"respondent {who}: item {dup!r} listed twice")
        row = np.zeros(cmap.c, dtype=np.int64)
        for item in chosen:
            row[cmap.index_of(item)] += 1
        if not bounds[0] <= len(chosen) <= bounds[1]:
            outside += 1
        rows.append(row)
    if outside:
        log.warning("%d respondents listed a number of items outside %s", outside, list(bounds))
    return Dataset(np.array(rows), cmap.multiplicities, cmap.categories)


def write_frequency_csv(data: Dataset, path) -> None:
    names = data.categories or tuple(f"cat_{j + 1}" for j in range(data.c))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("#m=" + ",".join(str(int(v)) for v in data.m) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", *names])
        for n, row in zip(data.n, data.counts):
            w.writerow([int(n), *(int(v) for v in row)])


def read_frequency_csv(path) -> Dataset:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    if not lines or not lines[0].startswith("#m="):
        raise IngestError(f"{path}: missing '#m=' multiplicity line")
    try:
        m = [int(v) for v in lines[0][3:].split(",")]
    except ValueError:
        raise IngestError(f"{path}: bad multiplicity line {lines[0]!r}") from None
    rows = list(csv.reader(lines[1:]))
    header = rows[0] if rows else []
    if not header or header[0] != "n" or len(header) != len(m) + 1:
        raise IngestError(f"{path}: header must be n followed by {len(m)} category names")
    counts = []
    for lineno, r in enumerate(rows[1:], start=3):
        if not r:
            continue
        try:
            n, *xs = (int(v) for v in r)
        except ValueError:
            raise IngestError(f"{path}:{lineno}: non-integer entry") from None
        if len(xs) != len(m) or sum(xs) != n:
            raise IngestError(f"{path}:{lineno}: counts do not match n or the category count")
        counts.append(xs)
    if not counts:
        raise IngestError(f"{path}: no respondents")
    names = tuple(header[1:])
    if names == tuple(f"cat_{j + 1}" for j in range(len(m))):
        names = None
    return Dataset(np.array(counts, dtype=np.int64), np.array(m), names)
