"""Option quotes, option surfaces and calibration weights.

Quote files are plain CSV with the header ``strike,maturity,bid,ask``.
Surface-level metadata (spot, rate, valuation date) lives in a JSON
sidecar or is passed explicitly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CSV_HEADER = ("strike", "maturity", "bid", "ask")


class QuoteParseError(ValueError):
    """A quote file row could not be parsed."""


class QuoteValidationError(ValueError):
    """A quote or surface violates its invariants."""


class ZeroSpreadError(QuoteValidationError):
    """A quote has ask == bid, so its calibration weight is undefined."""

    def __init__(self, index: int, quote: "OptionQuote"):
        self.index = index
        self.quote = quote
        super().__init__(
            f"zero bid-ask spread for option {index} "
            f"(K={quote.strike!r}, T={quote.maturity!r}, bid=ask={quote.bid!r})"
        )


@dataclass(frozen=True)
class OptionQuote:
    """A single traded European call."""

    strike: float
    maturity: float
    bid: float
    ask: float

    def __post_init__(self):
        problems = []
        if not self.strike > 0:
            problems.append("strike must be positive")
        if not self.maturity > 0:
            problems.append("maturity must be positive")
        if not self.bid >= 0:
            problems.append("bid must be non-negative")
        if not self.ask > 0:
            problems.append("ask must be positive")
        if self.bid > self.ask:
            problems.append("bid exceeds ask")
        if problems:
            raise QuoteValidationError(f"{self}: " + "; ".join(problems))

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid + self.ask)


@dataclass(frozen=True)
class OptionSurface:
    """An ordered collection of call quotes on one underlying.

    The position of a quote in ``quotes`` identifies the option for the rest
    of the pipeline; the constructor never reorders.
    """

    spot: float
    rate: float
    quotes: tuple[OptionQuote, ...]
    valuation_date: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "quotes", tuple(self.quotes))
        if len(self.quotes) == 0:
            raise QuoteValidationError("no quotes")
        if not self.spot > 0:
            raise QuoteValidationError(f"spot must be positive, got {self.spot!r}")
        if not math.isfinite(self.rate):
            raise QuoteValidationError(f"rate must be finite, got {self.rate!r}")

    def __len__(self) -> int:
        return len(self.quotes)

    @property
    def strikes(self) -> np.ndarray:
        return np.array([q.strike for q in self.quotes], dtype=float)

    @property
    def maturities(self) -> np.ndarray:
        return np.array([q.maturity for q in self.quotes], dtype=float)

    @property
    def bids(self) -> np.ndarray:
        return np.array([q.bid for q in self.quotes], dtype=float)

    @property
    def asks(self) -> np.ndarray:
        return np.array([q.ask for q in self.quotes], dtype=float)

    def take(self, indices: Sequence[int]) -> "OptionSurface":
        """Surface made of the quotes at ``indices`` (duplicates allowed), in that order."""
        return OptionSurface(
            spot=self.spot,
            rate=self.rate,
            quotes=tuple(self.quotes[int(i)] for i in indices),
            valuation_date=self.valuation_date,
        )

    def meta(self) -> dict:
        return {"spot": self.spot, "rate": self.rate, "valuation_date": self.valuation_date}


@dataclass(frozen=True)
class WeightVector:
    weights: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.weights)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)


def mid_prices(surface: OptionSurface) -> np.ndarray:
    """Bid-ask midpoints, in quote order."""
    return np.array([q.mid for q in surface.quotes], dtype=float)


def compute_weights(surface: OptionSurface) -> WeightVector:
    """Inverse squared bid-ask spread for every quote.

    Raises :class:`ZeroSpreadError` for the first quote with ``ask == bid``.
    """
    spreads = surface.asks - surface.bids
    for j, s in enumerate(spreads):
        if not s > 0:
            raise ZeroSpreadError(j, surface.quotes[j])
    w = 1.0 / spreads**2
    w.setflags(write=False)
    return WeightVector(w)


def _parse_float(text: str, lineno: int, column: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise QuoteParseError(f"line {lineno}: cannot parse {column}={text!r} as a number") from None
    if not math.isfinite(value):
        raise QuoteParseError(f"line {lineno}: {column}={text!r} is not finite")
    return value


def read_quotes(path: str | Path) -> list[OptionQuote]:
    """Parse a quote CSV into quotes, in file order."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise QuoteValidationError(f"{path}: no quotes") from None
        header = tuple(h.strip() for h in header)
        if header != CSV_HEADER:
            raise QuoteParseError(f"line 1: expected header {','.join(CSV_HEADER)}, got {','.join(header)}")
        quotes = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise QuoteParseError(f"line {lineno}: expected 4 fields, got {len(row)}")
            values = [_parse_float(c.strip(), lineno, name) for c, name in zip(row, CSV_HEADER)]
            try:
                quotes.append(OptionQuote(*values))
            except QuoteValidationError as exc:
                raise QuoteValidationError(f"line {lineno}: {exc}") from None
    return quotes


def load_meta(path: str | Path) -> dict:
    with Path(path).open(encoding="utf-8") as fh:
        meta = json.load(fh)
    missing = {"spot", "rate"} - set(meta)
    if missing:
        raise QuoteValidationError(f"{path}: sidecar missing {sorted(missing)}")
    return meta


def load_surface(
    path: str | Path,
    spot: float,
    rate: float,
    valuation_date: str | None = None,
) -> OptionSurface:
    """Load a quote CSV, sorted by (maturity, strike).

    The sort is stable, so equal (maturity, strike) rows keep file order.
    Quotes with ``ask == bid`` raise :class:`ZeroSpreadError`.
    """
    quotes = read_quotes(path)
    if not quotes:
        raise QuoteValidationError(f"{path}: no quotes")
    quotes.sort(key=lambda q: (q.maturity, q.strike))
    surface = OptionSurface(spot=float(spot), rate=float(rate), quotes=tuple(quotes), valuation_date=valuation_date)
    # zero spreads have no weight; reject here instead of changing N later
    compute_weights(surface)
    return surface


def write_surface(surface: OptionSurface, path: str | Path, meta_path: str | Path | None = None) -> None:
    """Write quotes as CSV (full float precision) and optionally the JSON sidecar."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for q in surface.quotes:
            writer.writerow([repr(float(q.strike)), repr(float(q.maturity)), repr(float(q.bid)), repr(float(q.ask))])
    if meta_path is not None:
        with Path(meta_path).open("w", encoding="utf-8") as fh:
            json.dump(surface.meta(), fh, indent=2)
            fh.write("\n")
