"""Option-chain ingestion and normalization.

One expiry's quotes for either market (the equity underlier or its
volatility index) are normalized into an immutable :class:`OptionSlice`.
Everything downstream (strips, tail estimators, smile fits) consumes
slices, never raw CSV.

CSV schema (one header row, UTF-8, decimal point):

    market,expiry_years,valuation_years,rate,forward,strike,kind,bid,ask,mid

``kind`` is ``C`` or ``P``; ``bid``/``ask``/``mid`` may be empty but at
least one usable price per row is required.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace

__all__ = [
    "Kind",
    "Market",
    "OptionQuote",
    "OptionSlice",
    "Tenor",
    "SplitResult",
    "ChainError",
    "parse_chain",
    "serialize_chain",
    "put_call_split",
]

DEFAULT_TAU = 30.0 / 365.0

CSV_COLUMNS = (
    "market", "expiry_years", "valuation_years", "rate", "forward",
    "strike", "kind", "bid", "ask", "mid",
)


class ChainError(ValueError):
    """Malformed or inconsistent chain input."""


class Kind(str, enum.Enum):
    CALL = "call"
    PUT = "put"


class Market(str, enum.Enum):
    UNDERLIER = "underlier"
    VOLINDEX = "volindex"


@dataclass(frozen=True)
class Tenor:
    """The volatility-index window, in years (default 30/365)."""

    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tenor must be positive, got {self.tau}")


@dataclass(frozen=True)
class OptionQuote:
    """A single European option quote.

    Parameters
    ----------
    strike : float
        Strike in index points, > 0.
    price : float
        Mid price, >= 0.
    kind : Kind
        Call or put.
    market : Market
        Which market the quote belongs to.
    bid, ask : float or None
        Optional side quotes kept for weighting downstream fits.
    """

    strike: float
    price: float
    kind: Kind
    market: Market
    bid: float | None = None
    ask: float | None = None

    def __post_init__(self):
        if not self.strike > 0:
            raise ChainError(f"non-positive strike {self.strike}")
        if self.price < 0:
            raise ChainError(f"negative price {self.price} at strike {self.strike}")
        if self.bid is not None and self.ask is not None and self.bid > self.ask:
            raise ChainError(
                f"crossed market at strike {self.strike}: bid {self.bid} > ask {self.ask}"
            )


@dataclass(frozen=True)
class OptionSlice:
    """All quotes of one market for a single expiry.

    Invariants enforced at construction: strikes strictly increasing with
    no duplicates per kind, ``expiry > valuation_time``, positive forward,
    and discount consistent with the flat rate.

    Value type: immutable after construction, safe to share across
    threads.
    """

    market: Market
    valuation_time: float
    expiry: float
    rate: float
    forward: float
    quotes: tuple[OptionQuote, ...]
    discount: float = None  # type: ignore[assignment]
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.expiry > self.valuation_time:
            raise ChainError(
                f"expiry {self.expiry} must exceed valuation time {self.valuation_time}"
            )
        if not self.forward > 0:
            raise ChainError(f"forward must be positive, got {self.forward}")
        if self.rate < 0:
            raise ChainError(f"negative rate {self.rate}")
        implied = math.exp(-self.rate * self.ttm)
        if self.discount is None:
            object.__setattr__(self, "discount", implied)
        else:
            if not 0 < self.discount <= 1:
                raise ChainError(f"discount must lie in (0, 1], got {self.discount}")
            if abs(self.discount - implied) > 1e-10:
                raise ChainError(
                    f"discount {self.discount} inconsistent with flat rate {self.rate} "
                    f"(expected {implied})"
                )
        ordered = tuple(sorted(self.quotes, key=lambda q: (q.strike, q.kind.value)))
        object.__setattr__(self, "quotes", ordered)
        for kind in Kind:
            strikes = [q.strike for q in ordered if q.kind is kind]
            for lo, hi in zip(strikes, strikes[1:]):
                if lo == hi:
                    raise ChainError(f"duplicate strike {lo} for kind {kind.value}")
        for q in ordered:
            if q.market is not self.market:
                raise ChainError(
                    f"quote market {q.market.value} does not match slice market "
                    f"{self.market.value}"
                )

    @property
    def ttm(self) -> float:
        return self.expiry - self.valuation_time

    def strikes(self, kind: Kind | None = None) -> list[float]:
        if kind is None:
            seen = sorted({q.strike for q in self.quotes})
            return seen
        return [q.strike for q in self.quotes if q.kind is kind]

    def prices(self, kind: Kind) -> list[float]:
        return [q.price for q in self.quotes if q.kind is kind]

    def quote_at(self, strike: float, kind: Kind) -> OptionQuote | None:
        for q in self.quotes:
            if q.kind is kind and q.strike == strike:
                return q
        return None

    def with_quotes(self, quotes, warnings=None) -> "OptionSlice":
        return replace(
            self,
            quotes=tuple(quotes),
            warnings=self.warnings if warnings is None else tuple(warnings),
        )


@dataclass(frozen=True)
class SplitResult:
    """Out-of-the-money split of a slice at its forward."""

    puts: tuple[OptionQuote, ...]
    calls: tuple[OptionQuote, ...]
    flags: tuple[str, ...] = ()


def _parse_float(raw: str, row_idx: int, column: str, required: bool = True):
    raw = raw.strip() if raw is not None else ""
    if raw == "":
        if required:
            raise ChainError(f"row {row_idx}: missing value in column '{column}'")
        return None
    try:
        return float(raw)
    except ValueError as exc:
        raise ChainError(
            f"row {row_idx}: malformed value {raw!r} in column '{column}'"
        ) from exc


def parse_chain(data: bytes | str, market: Market | str | None = None) -> OptionSlice:
    """Parse a chain CSV into a validated :class:`OptionSlice`.

    Mid prices are ``(bid + ask) / 2`` when both sides are present,
    otherwise the ``mid`` column.  Quotes violating the static
    no-arbitrage bounds (call <= forward * discount, put <= strike *
    discount) are rejected but recorded on ``slice.warnings`` so the
    arbitrage modules can still inspect them.

    Raises
    ------
    ChainError
        On malformed rows (the message names the row and column), crossed
        markets, non-positive strikes, metadata inconsistencies, or fewer
        than 3 distinct strikes.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    reader = csv.DictReader(io.StringIO(data))
    if reader.fieldnames is None:
        raise ChainError("empty chain input")
    missing = [c for c in CSV_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise ChainError(f"missing columns: {', '.join(missing)}")

    if isinstance(market, str):
        market = Market(market)

    meta: dict[str, float] = {}
    rows: list[tuple[int, OptionQuote]] = []
    row_market: Market | None = None
    for row_idx, row in enumerate(reader, start=1):
        raw_market = (row.get("market") or "").strip().lower()
        if not raw_market:
            raise ChainError(f"row {row_idx}: missing value in column 'market'")
        try:
            this_market = Market(raw_market)
        except ValueError as exc:
            raise ChainError(
                f"row {row_idx}: unknown market {raw_market!r}"
            ) from exc
        if market is not None and this_market is not market:
            raise ChainError(
                f"row {row_idx}: market {this_market.value} does not match "
                f"requested {market.value}"
            )
        if row_market is None:
            row_market = this_market
        elif this_market is not row_market:
            raise ChainError(f"row {row_idx}: mixed markets in one chain")

        expiry = _parse_float(row.get("expiry_years", ""), row_idx, "expiry_years")
        valuation = _parse_float(row.get("valuation_years", ""), row_idx, "valuation_years")
        rate = _parse_float(row.get("rate", ""), row_idx, "rate")
        forward = _parse_float(row.get("forward", ""), row_idx, "forward")
        if forward is None or rate is None:
            raise ChainError(f"row {row_idx}: missing forward/discount metadata")
        for key, val in (("expiry", expiry), ("valuation", valuation),
                         ("rate", rate), ("forward", forward)):
            if key in meta:
                if abs(meta[key] - val) > 1e-12:
                    raise ChainError(
                        f"row {row_idx}: inconsistent {key} metadata "
                        f"({val} vs {meta[key]})"
                    )
            else:
                meta[key] = val

        strike = _parse_float(row.get("strike", ""), row_idx, "strike")
        if strike is None or strike <= 0:
            raise ChainError(f"row {row_idx}: non-positive strike {strike}")
        kind_raw = (row.get("kind") or "").strip().upper()
        if kind_raw not in ("C", "P"):
            raise ChainError(f"row {row_idx}: malformed value {kind_raw!r} in column 'kind'")
        kind = Kind.CALL if kind_raw == "C" else Kind.PUT

        bid = _parse_float(row.get("bid", ""), row_idx, "bid", required=False)
        ask = _parse_float(row.get("ask", ""), row_idx, "ask", required=False)
        mid = _parse_float(row.get("mid", ""), row_idx, "mid", required=False)
        if bid is not None and ask is not None:
            if bid > ask:
                raise ChainError(
                    f"row {row_idx}: crossed market (bid {bid} > ask {ask})"
                )
            price = 0.5 * (bid + ask)
        elif mid is not None:
            price = mid
        else:
            raise ChainError(f"row {row_idx}: missing value in column 'mid'")
        if price < 0:
            raise ChainError(f"row {row_idx}: negative price {price}")
        rows.append(
            (row_idx, OptionQuote(strike=strike, price=price, kind=kind,
                                  market=row_market, bid=bid, ask=ask))
        )

    if row_market is None:
        raise ChainError("chain has no data rows")

    n_strikes = len({q.strike for _, q in rows})
    if n_strikes < 3:
        raise ChainError(f"at least 3 strikes required, got {n_strikes}")

    discount = math.exp(-meta["rate"] * (meta["expiry"] - meta["valuation"]))
    warnings: list[str] = []
    kept: list[OptionQuote] = []
    for row_idx, q in rows:
        if q.kind is Kind.CALL:
            bound = meta["forward"] * discount
            label = "forward * discount"
        else:
            bound = q.strike * discount
            label = "strike * discount"
        if q.price > bound * (1 + 1e-12):
            warnings.append(
                f"row {row_idx}: {q.kind.value} at strike {q.strike} rejected, "
                f"price {q.price} exceeds static bound {label} = {bound:.10g}"
            )
        else:
            kept.append(q)

    if len({q.strike for q in kept}) < 3:
        raise ChainError(
            "fewer than 3 strikes survive static-bound filtering; "
            "offending quotes: " + "; ".join(warnings)
        )

    return OptionSlice(
        market=row_market,
        valuation_time=meta["valuation"],
        expiry=meta["expiry"],
        rate=meta["rate"],
        forward=meta["forward"],
        quotes=tuple(kept),
        warnings=tuple(warnings),
    )


def serialize_chain(chain: OptionSlice) -> str:
    """Inverse of :func:`parse_chain` on normalized slices."""
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(CSV_COLUMNS)
    for q in chain.quotes:
        writer.writerow([
            chain.market.value,
            repr(chain.expiry),
            repr(chain.valuation_time),
            repr(chain.rate),
            repr(chain.forward),
            repr(q.strike),
            "C" if q.kind is Kind.CALL else "P",
            "" if q.bid is None else repr(q.bid),
            "" if q.ask is None else repr(q.ask),
            repr(q.price),
        ])
    return out.getvalue()


def put_call_split(chain: OptionSlice) -> SplitResult:
    """Split a slice into out-of-the-money sides at the forward.

    Puts keep strikes <= forward, calls keep strikes > forward (a strike
    exactly at the forward goes to the put side).  Each strike lands on
    exactly one side; strikes quoted only in-the-money are unusable for
    strip work and are flagged rather than silently swallowed.
    """
    fwd = chain.forward
    puts = tuple(q for q in chain.quotes if q.kind is Kind.PUT and q.strike <= fwd)
    calls = tuple(q for q in chain.quotes if q.kind is Kind.CALL and q.strike > fwd)
    flags = []
    if not puts:
        flags.append("empty put side")
    if not calls:
        flags.append("empty call side")
    used = {q.strike for q in puts} | {q.strike for q in calls}
    skipped = sorted({q.strike for q in chain.quotes} - used)
    if skipped:
        flags.append(
            "strikes quoted only in-the-money, unused: "
            + ", ".join(f"{k:g}" for k in skipped)
        )
    return SplitResult(puts=puts, calls=calls, flags=tuple(flags))
