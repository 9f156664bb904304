import math

import pytest

from vixlink.market_data import (
    ChainError, Kind, Market, OptionQuote, OptionSlice, Tenor, parse_chain,
    put_call_split, serialize_chain,
)

HEADER = "market,expiry_years,valuation_years,rate,forward,strike,kind,bid,ask,mid\n"


def _row(strike, kind, mid, bid="", ask="", market="underlier",
         expiry=37 / 365, valuation=0.0, rate=0.0028, forward=1101.97):
    return (f"{market},{expiry},{valuation},{rate},{forward},"
            f"{strike},{kind},{bid},{ask},{mid}\n")


def test_parse_three_put_rows_spx_forward():
    csv = HEADER + _row(700, "P", 0.35) + _row(800, "P", 1.10) + _row(900, "P", 4.25)
    slc = parse_chain(csv.encode())
    assert slc.forward == 1101.97
    assert slc.rate == 0.0028
    assert slc.market is Market.UNDERLIER
    assert len(slc.quotes) == 3
    assert math.isclose(slc.discount, math.exp(-0.0028 * 37 / 365))


def test_parse_rejects_fewer_than_three_strikes():
    csv = HEADER + _row(800, "P", 1.10)
    with pytest.raises(ChainError, match="at least 3 strikes"):
        parse_chain(csv)


def test_parse_rejects_duplicate_strike_same_kind():
    csv = HEADER + _row(800, "P", 1.1) + _row(800, "P", 1.2) \
        + _row(900, "P", 4.0) + _row(1000, "P", 9.0)
    with pytest.raises(ChainError, match="duplicate strike 800"):
        parse_chain(csv)


def test_parse_crossed_market_names_row():
    csv = HEADER + _row(700, "P", "", bid=2.0, ask=1.0) + _row(800, "P", 1.1) \
        + _row(900, "P", 4.0)
    with pytest.raises(ChainError, match="row 1.*crossed"):
        parse_chain(csv)


def test_parse_malformed_value_names_row_and_column():
    csv = HEADER + _row("oops", "P", 1.0) + _row(800, "P", 1.1) + _row(900, "P", 4.0)
    with pytest.raises(ChainError, match="row 1.*column 'strike'"):
        parse_chain(csv)


def test_parse_missing_forward_metadata():
    csv = HEADER + _row(700, "P", 1.0, forward="") + _row(800, "P", 1.1)
    with pytest.raises(ChainError, match="row 1"):
        parse_chain(csv)


def test_parse_mid_from_bid_ask_when_both_present():
    csv = HEADER + _row(700, "P", 99.0, bid=1.0, ask=2.0) + _row(800, "P", 1.1) \
        + _row(900, "P", 4.0)
    slc = parse_chain(csv)
    assert slc.quotes[0].price == 1.5  # (bid+ask)/2 wins over the mid column


def test_parse_static_bound_violation_goes_to_warnings():
    # put price above strike * discount is rejected but recorded
    csv = HEADER + _row(700, "P", 800.0) + _row(800, "P", 1.1) \
        + _row(900, "P", 4.0) + _row(1000, "P", 9.0)
    slc = parse_chain(csv)
    assert len(slc.quotes) == 3
    assert len(slc.warnings) == 1
    assert "700" in slc.warnings[0]


def test_parse_mixed_markets_rejected():
    csv = HEADER + _row(700, "P", 1.0) + _row(800, "P", 1.1, market="volindex") \
        + _row(900, "P", 4.0)
    with pytest.raises(ChainError, match="mixed markets"):
        parse_chain(csv)


def test_roundtrip_parse_serialize_parse_identity():
    csv = HEADER + _row(700, "P", "", bid=1.0, ask=2.0) + _row(800, "P", 1.1) \
        + _row(900, "C", 210.0) + _row(900, "P", 4.0)
    one = parse_chain(csv)
    two = parse_chain(serialize_chain(one))
    assert one == two


def test_slice_validates_discount_consistency():
    with pytest.raises(ChainError, match="inconsistent"):
        OptionSlice(market=Market.UNDERLIER, valuation_time=0.0, expiry=1.0,
                    rate=0.05, forward=100.0, quotes=(), discount=0.99)


def test_tenor_default_and_validation():
    assert Tenor().tau == pytest.approx(30 / 365)
    with pytest.raises(ValueError):
        Tenor(0.0)


def _quote(strike, kind, price=1.0):
    return OptionQuote(strike=strike, price=price, kind=kind,
                       market=Market.UNDERLIER)


def _slice_with(quotes, forward=100.0):
    return OptionSlice(market=Market.UNDERLIER, valuation_time=0.0,
                       expiry=0.1, rate=0.0, forward=forward, quotes=quotes)


def test_split_boundary_strike_goes_to_put_side():
    quotes = (_quote(90, Kind.PUT), _quote(100, Kind.PUT),
              _quote(110, Kind.CALL))
    res = put_call_split(_slice_with(quotes))
    assert [q.strike for q in res.puts] == [90, 100]
    assert [q.strike for q in res.calls] == [110]


def test_split_flags_empty_put_side():
    quotes = (_quote(110, Kind.CALL), _quote(120, Kind.CALL))
    res = put_call_split(_slice_with(quotes))
    assert not res.puts
    assert any("empty put side" in f for f in res.flags)


def test_split_all_puts_low_strikes():
    quotes = tuple(_quote(k, Kind.PUT) for k in (600, 700, 800, 900))
    res = put_call_split(_slice_with(quotes, forward=1101.97))
    assert len(res.puts) == 4 and not res.calls


def test_split_partitions_strikes():
    quotes = []
    for k in range(80, 125, 5):
        quotes.append(_quote(k, Kind.PUT))
        quotes.append(_quote(k, Kind.CALL))
    res = put_call_split(_slice_with(tuple(quotes)))
    put_ks = {q.strike for q in res.puts}
    call_ks = {q.strike for q in res.calls}
    assert not put_ks & call_ks
    assert put_ks | call_ks == {float(k) for k in range(80, 125, 5)}
    assert all(q.strike <= 100 for q in res.puts)
    assert all(q.strike > 100 for q in res.calls)
