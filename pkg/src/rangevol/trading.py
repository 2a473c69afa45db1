"""Mispricing-band trading in European calls.

When the model price of a call falls below (1 - band) * bid, the call is
sold at the bid and bought back at the ask on the first quote where the
model price is no longer that low.  When the model price rises above
(1 + band) * ask, the call is bought at the ask and sold at the bid on the
first quote where the signal has gone.  A position still open at expiry
settles at its intrinsic value: a short delivers S - K when S > K and a
long is exercised for S - K when S > K.  Positions are naked (no hedge).

All money is ``decimal.Decimal``, quantized to cents, so replayed profits
are exact.
"""

from __future__ import annotations

import datetime as dt
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import estimators, pricing
from .errors import ParameterError, ValidationError

CENT = Decimal("0.01")
DEFAULT_BAND = 0.10
EXPIRY_TIME = dt.time(16, 0)

SELL = "sell"
BUY = "buy"
NONE = "none"

ACTIONS = ("sell_open", "buy_open", "buy_close", "sell_close", "exercise", "deliver", "expire_worthless")


def money(value) -> Decimal:
    """Round a price to cents."""
    if isinstance(value, float):
        value = repr(value)
    return Decimal(value).quantize(CENT, rounding=ROUND_HALF_EVEN)


@dataclass(frozen=True)
class OptionQuote:
    timestamp: dt.datetime
    expiry: dt.date
    strike: Decimal
    bid: Decimal
    ask: Decimal

    def __post_init__(self):
        if self.strike <= 0:
            raise ValidationError(f"{self.timestamp}: strike must be positive")
        if self.bid < 0 or self.ask < 0:
            raise ValidationError(f"{self.timestamp}: bid and ask must be nonnegative")
        if self.bid > self.ask:
            raise ValidationError(f"{self.timestamp}: bid {self.bid} exceeds ask {self.ask}")

    @property
    def contract(self) -> tuple[dt.date, Decimal]:
        return self.expiry, self.strike


@dataclass(frozen=True)
class TradeEvent:
    timestamp: dt.datetime
    strike: Decimal
    action: str
    cash_flow: Decimal
    position: int


@dataclass(frozen=True)
class Position:
    """One round trip: its opening and closing events."""

    index: int
    strike: Decimal
    side: str
    opened: TradeEvent
    closed: TradeEvent

    @property
    def profit(self) -> Decimal:
        return self.opened.cash_flow + self.closed.cash_flow


@dataclass
class TradeLedger:
    events: list[TradeEvent] = field(default_factory=list)
    positions: list[Position] = field(default_factory=list)

    @property
    def total(self) -> Decimal:
        return ledger_total(self)


def ledger_total(ledger: TradeLedger) -> Decimal:
    """Sum of all cash flows."""
    return sum((e.cash_flow for e in ledger.events), Decimal("0.00"))


def detect_signal(model_price: float, q: OptionQuote, band: float = DEFAULT_BAND) -> str:
    """``sell`` below (1 - band) * bid, ``buy`` above (1 + band) * ask, else ``none``."""
    if not 0.0 <= band < 1.0:
        raise ParameterError("band must lie in [0, 1)")
    model = Decimal(repr(float(model_price)))
    b = Decimal(repr(float(band)))
    if model < (1 - b) * q.bid:
        return SELL
    if model > (1 + b) * q.ask:
        return BUY
    return NONE


def stop_rule(prev_spot: float, spot: float, margin: float) -> bool:
    """True when the relative move from ``prev_spot`` to ``spot`` exceeds ``margin``."""
    if margin <= 0:
        raise ParameterError("margin must be positive")
    return abs(spot / prev_spot - 1.0) > margin


def settle(side: str, spot, strike: Decimal) -> tuple[str, Decimal]:
    """Expiry action and cash flow for a position held to expiry."""
    intrinsic = money(spot) - strike
    if intrinsic <= 0:
        return "expire_worthless", Decimal("0.00")
    if side == SELL:
        return "deliver", -intrinsic
    return "exercise", intrinsic


def _expiry_instant(expiry: dt.date) -> dt.datetime:
    return dt.datetime.combine(expiry, EXPIRY_TIME)


class _Book:
    """Builds a ledger event by event."""

    def __init__(self):
        self.ledger = TradeLedger()
        self._open: dict[int, TradeEvent] = {}
        self._side: dict[int, str] = {}

    def open(self, ts, strike, side, cash) -> int:
        index = len(self._open) + len(self.ledger.positions)
        event = TradeEvent(ts, strike, "sell_open" if side == SELL else "buy_open", cash, index)
        self.ledger.events.append(event)
        self._open[index] = event
        self._side[index] = side
        return index

    def close(self, index, ts, action, cash) -> None:
        opened = self._open.pop(index)
        event = TradeEvent(ts, opened.strike, action, cash, index)
        self.ledger.events.append(event)
        self.ledger.positions.append(Position(index, opened.strike, self._side.pop(index), opened, event))

    def finish(self) -> TradeLedger:
        self.ledger.positions.sort(key=lambda p: p.index)
        return self.ledger


def run_strategy(quotes: Iterable[OptionQuote], model_prices: Mapping[tuple, float],
                 spot_at_expiry, band: float = DEFAULT_BAND,
                 suppressed: Iterable[dt.date] = ()) -> TradeLedger:
    """Run the band strategy over a quote series.

    ``model_prices`` maps (timestamp, expiry, strike) of every quote to the model
    call price.  Contracts (expiry, strike) are traded independently, one
    position at a time, one action per quote row: the row that closes a
    position cannot also open the next one.  ``spot_at_expiry`` is a price,
    or a mapping from expiry date to price, used to settle positions still
    open at the 16:00 expiry.  No position is opened on ``suppressed`` dates.
    """
    by_contract: dict[tuple, list[OptionQuote]] = defaultdict(list)
    for q in quotes:
        by_contract[q.contract].append(q)
    suppressed = set(suppressed)
    book = _Book()
    for contract in sorted(by_contract):
        expiry, strike = contract
        series = by_contract[contract]
        end = _expiry_instant(expiry)
        position = None
        side = None
        for i, q in enumerate(series):
            if i and q.timestamp <= series[i - 1].timestamp:
                raise ValidationError(f"quotes for strike {strike} are not in time order at {q.timestamp}")
            if q.timestamp > end:
                raise ValidationError(f"quote at {q.timestamp} is after the {end} expiry")
            key = (q.timestamp, expiry, strike)
            if key not in model_prices:
                raise ValidationError(f"no model price for strike {strike} at {q.timestamp}")
            signal = detect_signal(model_prices[key], q, band)
            if position is None:
                if signal != NONE and q.timestamp.date() not in suppressed:
                    side = signal
                    cash = q.bid if side == SELL else -q.ask
                    position = book.open(q.timestamp, strike, side, cash)
            elif signal != side:
                if side == SELL:
                    book.close(position, q.timestamp, "buy_close", -q.ask)
                else:
                    book.close(position, q.timestamp, "sell_close", q.bid)
                position = None
        if position is not None:
            spot = spot_at_expiry.get(expiry) if isinstance(spot_at_expiry, Mapping) else spot_at_expiry
            if spot is None:
                raise ValidationError(f"no spot price to settle strike {strike} at {expiry}")
            action, cash = settle(side, spot, strike)
            book.close(position, end, action, cash)
    ledger = book.finish()
    ledger.events.sort(key=lambda e: (e.timestamp, e.strike, e.position))
    return ledger


@dataclass(frozen=True)
class PositionRecord:
    """A round trip as printed in a trade table.

    ``close_bid``/``close_ask`` are None for a position settled at expiry,
    in which case ``settle_spot`` gives the underlying price.
    """

    open_time: dt.datetime
    strike: Decimal
    side: str
    open_bid: Decimal
    open_ask: Decimal
    close_time: dt.datetime
    close_bid: Decimal | None = None
    close_ask: Decimal | None = None
    settle_spot: Decimal | None = None
    model_price: float | None = None
    reported_profit: Decimal | None = None


def replay_positions(records: Sequence[PositionRecord]) -> TradeLedger:
    """Recompute cash flows for round trips given by their open and close quotes."""
    book = _Book()
    for rec in records:
        if rec.side not in (SELL, BUY):
            raise ValidationError(f"unknown side {rec.side!r}")
        if rec.close_time < rec.open_time:
            raise ValidationError(f"position opened {rec.open_time} closes before it opens")
        cash = rec.open_bid if rec.side == SELL else -rec.open_ask
        index = book.open(rec.open_time, rec.strike, rec.side, cash)
        if rec.close_bid is None or rec.close_ask is None:
            if rec.settle_spot is None:
                raise ValidationError(f"position opened {rec.open_time} has neither close quote nor settlement")
            action, cash = settle(rec.side, rec.settle_spot, rec.strike)
        elif rec.side == SELL:
            action, cash = "buy_close", -rec.close_ask
        else:
            action, cash = "sell_close", rec.close_bid
        book.close(index, rec.close_time, action, cash)
    return book.finish()


# ---------------------------------------------------------------------------
# backtest over historical data


@dataclass(frozen=True)
class BacktestResult:
    ledger: TradeLedger
    model_prices: dict
    suppressed: tuple


def rate_on(rates: Sequence[tuple[dt.date, float]], day: dt.date) -> float:
    """Rate of the most recent date strictly before ``day``."""
    best = None
    for d, r in rates:
        if d < day:
            best = r
        else:
            break
    if best is None:
        raise ValidationError(f"no rate dated before {day}")
    return best


def backtest(bars: Sequence[estimators.OhlcBar], quotes: Sequence[OptionQuote],
             rates: Sequence[tuple[dt.date, float]], band: float = DEFAULT_BAND,
             window: int = estimators.DEFAULT_WINDOW, stop_margin: float | None = None,
             annualization: int = estimators.TRADING_DAYS, rate_mode: str = "quoted",
             use_total_vol: bool = False) -> BacktestResult:
    """Model prices from the previous day's rolling estimate, then :func:`run_strategy`.

    The spot for a quote is the close of its date's bar, the volatility is
    the intraday annualized estimate of the latest window ending before
    that date (``use_total_vol`` switches to the one including overnight
    variance), the rate is the previous date's, and the time to expiry is
    the count of weekdays from the quote date to expiry over 252.
    """
    closes = {b.date: b.close for b in bars}
    dates = [b.date for b in bars]
    series = estimators.rolling_estimate(bars, window, annualization)
    est_dates = [d for d, _ in series]
    model = {}
    for q in quotes:
        day = q.timestamp.date()
        if day not in closes:
            raise ValidationError(f"no bar for quote date {day}")
        idx = int(np.searchsorted(np.array(est_dates, dtype="datetime64[D]"), np.datetime64(day, "D"))) - 1
        if idx < 0:
            raise ValidationError(f"no volatility estimate before {day}")
        est = series[idx][1]
        vol = est.sigma_annual if use_total_vol else est.sigma_annual_intraday
        rate = pricing.continuous_rate(rate_on(rates, day), rate_mode)
        days = int(np.busday_count(np.datetime64(day, "D"), np.datetime64(q.expiry, "D")))
        tau = pricing.year_fraction(max(days, 0), annualization)
        inputs = pricing.PricingInputs(closes[day], float(q.strike), rate, vol, tau)
        model[(q.timestamp, q.expiry, q.strike)] = pricing.bs_call(inputs)
    suppressed = []
    if stop_margin is not None:
        for prev, cur in zip(dates, dates[1:]):
            if stop_rule(closes[prev], closes[cur], stop_margin):
                suppressed.append(cur)
    spots = {q.expiry: closes.get(q.expiry) for q in quotes}
    ledger = run_strategy(quotes, model, spots, band, suppressed)
    return BacktestResult(ledger, model, tuple(suppressed))

