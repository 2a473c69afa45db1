"""Strict CSV readers and writers.

Files are UTF-8 with LF or CRLF line endings, comma separated, with an
exact header.  Numbers use a dot as decimal separator; non-finite values
are rejected.  Errors name the file line.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from decimal import Decimal, InvalidOperation
from typing import Iterable, Sequence

from .errors import ValidationError
from .estimators import OhlcBar, VolEstimate
from .trading import CENT, EXPIRY_TIME, OptionQuote, PositionRecord, TradeLedger

OHLC_HEADER = ["date", "open", "high", "low", "close"]
QUOTE_HEADER = ["timestamp", "expiry", "strike", "bid", "ask"]
RATE_HEADER = ["date", "rate"]
POSITION_HEADER = ["open_time", "strike", "side", "open_bid", "open_ask", "close_time",
                   "close_bid", "close_ask", "settle_spot", "model_price", "reported_profit"]
LEDGER_HEADER = ["timestamp", "strike", "action", "cash_flow", "position"]

SIG_DIGITS = 12


def fmt(value: float) -> str:
    """A number with 12 significant digits."""
    return format(float(value), f".{SIG_DIGITS}g")


def fmt_money(value) -> str:
    """A cash amount with two decimals."""
    return str(Decimal(value).quantize(CENT))


def _rows(path, header: Sequence[str]):
    """Yield (line number, row) after checking the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, strict=True)
        try:
            first = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file, expected header {','.join(header)}") from None
        if first != list(header):
            raise ValidationError(f"{path}: line 1: expected header {','.join(header)}, got {','.join(first)}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            yield line, row


def _float(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"{where}: not a number: {text!r}") from None
    if not math.isfinite(value) or text.strip() != text:
        raise ValidationError(f"{where}: not a finite number: {text!r}")
    return value


def _decimal(text: str, where: str) -> Decimal:
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise ValidationError(f"{where}: not a decimal: {text!r}") from None
    if not value.is_finite():
        raise ValidationError(f"{where}: not a finite decimal: {text!r}")
    return value


def _date(text: str, where: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise ValidationError(f"{where}: not an ISO date: {text!r}") from None


def parse_timestamp(text: str, where: str = "timestamp") -> dt.datetime:
    """ISO-8601 date or date-time; a bare date means the 16:00 close."""
    try:
        if len(text) == 10:
            return dt.datetime.combine(dt.date.fromisoformat(text), EXPIRY_TIME)
        return dt.datetime.fromisoformat(text)
    except ValueError:
        raise ValidationError(f"{where}: not an ISO timestamp: {text!r}") from None


def parse_ohlc(path) -> list[OhlcBar]:
    """Bars from a ``date,open,high,low,close`` file with strictly increasing dates."""
    bars: list[OhlcBar] = []
    for line, row in _rows(path, OHLC_HEADER):
        where = f"{path}: line {line}"
        day = _date(row[0], where)
        o, h, l, c = (_float(v, where) for v in row[1:])
        if bars and day <= bars[-1].date:
            kind = "duplicate" if day == bars[-1].date else "unsorted"
            raise ValidationError(f"{where}: {kind} date {day}")
        try:
            bars.append(OhlcBar(day, o, h, l, c))
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
    return bars


def write_ohlc(path, bars: Iterable[OhlcBar]) -> None:
    """Write bars with shortest round-trip float formatting, so parsing returns identical bars."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OHLC_HEADER)
        for b in bars:
            writer.writerow([b.date.isoformat(), repr(b.open), repr(b.high), repr(b.low), repr(b.close)])


def parse_quotes(path) -> list[OptionQuote]:
    """Quotes from a ``timestamp,expiry,strike,bid,ask`` file."""
    quotes = []
    for line, row in _rows(path, QUOTE_HEADER):
        where = f"{path}: line {line}"
        ts = parse_timestamp(row[0], where)
        expiry = _date(row[1], where)
        strike, bid, ask = (_decimal(v, where) for v in row[2:])
        try:
            quotes.append(OptionQuote(ts, expiry, strike, bid, ask))
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
    return quotes


def parse_rates(path) -> list[tuple[dt.date, float]]:
    """Rates from a ``date,rate`` file (annualized decimals), strictly increasing dates."""
    rates: list[tuple[dt.date, float]] = []
    for line, row in _rows(path, RATE_HEADER):
        where = f"{path}: line {line}"
        day = _date(row[0], where)
        if rates and day <= rates[-1][0]:
            raise ValidationError(f"{where}: dates must increase, got {day}")
        rates.append((day, _float(row[1], where)))
    return rates


def parse_positions(path) -> list[PositionRecord]:
    """Round trips for :func:`rangevol.trading.replay_positions`."""
    out = []
    for line, row in _rows(path, POSITION_HEADER):
        where = f"{path}: line {line}"

        def opt_decimal(text):
            return _decimal(text, where) if text else None

        out.append(PositionRecord(
            open_time=parse_timestamp(row[0], where),
            strike=_decimal(row[1], where),
            side=row[2],
            open_bid=_decimal(row[3], where),
            open_ask=_decimal(row[4], where),
            close_time=parse_timestamp(row[5], where),
            close_bid=opt_decimal(row[6]),
            close_ask=opt_decimal(row[7]),
            settle_spot=opt_decimal(row[8]),
            model_price=_float(row[9], where) if row[9] else None,
            reported_profit=opt_decimal(row[10]),
        ))
    return out


def write_ledger(fh, ledger: TradeLedger) -> None:
    """Ledger events as CSV followed by a ``total`` row."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(LEDGER_HEADER)
    for e in ledger.events:
        writer.writerow([e.timestamp.isoformat(timespec="minutes"), str(e.strike), e.action,
                         fmt_money(e.cash_flow), e.position])
    writer.writerow(["total", "", "", fmt_money(ledger.total), ""])


def estimate_record(day: dt.date, est: VolEstimate) -> str:
    """One JSON line for a dated estimate."""
    fields = {
        "date": day.isoformat(),
        "n": est.n,
        "v_i": est.v_intraday,
        "v0": est.v_overnight,
        "v_z": est.v_z,
        "sigma_annual": est.sigma_annual,
        "sigma_annual_intraday": est.sigma_annual_intraday,
        "v_yz": est.v_yz,
        "v_rs": est.v_rs,
        "v_c": est.v_close_open,
    }
    return json.dumps({k: (float(fmt(v)) if isinstance(v, float) else v) for k, v in fields.items()})
