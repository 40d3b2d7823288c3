from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svrobust.market_data import (
    OptionQuote,
    OptionSurface,
    QuoteParseError,
    QuoteValidationError,
    ZeroSpreadError,
    compute_weights,
    load_meta,
    load_surface,
    mid_prices,
    read_quotes,
    write_surface,
)


def write_csv(path, rows, header="strike,maturity,bid,ask"):
    path.write_text("\n".join([header, *rows]) + "\n")
    return path


class TestOptionQuote:
    def test_mid(self):
        assert OptionQuote(100, 0.25, 4.90, 5.10).mid == pytest.approx(5.00, abs=1e-15)

    @pytest.mark.parametrize(
        "fields, message",
        [
            ((0.0, 1.0, 1.0, 1.1), "strike"),
            ((100.0, 0.0, 1.0, 1.1), "maturity"),
            ((100.0, 1.0, -0.1, 1.1), "bid"),
            ((100.0, 1.0, 0.0, 0.0), "ask must be positive"),
            ((100.0, 1.0, 5.10, 4.90), "bid exceeds ask"),
        ],
    )
    def test_invariants(self, fields, message):
        with pytest.raises(QuoteValidationError, match=message):
            OptionQuote(*fields)

    def test_zero_bid_allowed(self):
        assert OptionQuote(100, 1.0, 0.0, 0.10).mid == pytest.approx(0.05)


class TestLoadSurface:
    def test_single_row(self, tmp_path):
        path = write_csv(tmp_path / "q.csv", ["100,0.25,4.90,5.10"])
        surface = load_surface(path, spot=100.0, rate=0.01)
        assert len(surface) == 1
        assert mid_prices(surface)[0] == pytest.approx(5.00)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "q.csv"
        path.write_text("")
        with pytest.raises(QuoteValidationError, match="no quotes"):
            load_surface(path, 100.0, 0.0)

    def test_header_only(self, tmp_path):
        path = write_csv(tmp_path / "q.csv", [])
        with pytest.raises(QuoteValidationError, match="no quotes"):
            load_surface(path, 100.0, 0.0)

    def test_bid_above_ask(self, tmp_path):
        path = write_csv(tmp_path / "q.csv", ["100,0.25,5.10,4.90"])
        with pytest.raises(QuoteValidationError, match="bid exceeds ask"):
            load_surface(path, 100.0, 0.0)

    def test_malformed_row_names_line(self, tmp_path):
        path = write_csv(tmp_path / "q.csv", ["100,0.25,4.9,5.1", "110,abc,1,2"])
        with pytest.raises(QuoteParseError, match="line 3"):
            load_surface(path, 100.0, 0.0)

    def test_wrong_field_count(self, tmp_path):
        path = write_csv(tmp_path / "q.csv", ["100,0.25,4.9"])
        with pytest.raises(QuoteParseError, match="line 2"):
            read_quotes(path)

    def test_bad_header(self, tmp_path):
        path = write_csv(tmp_path / "q.csv", ["100,0.25,4.9,5.1"], header="K,T,bid,ask")
        with pytest.raises(QuoteParseError, match="header"):
            read_quotes(path)

    def test_sorted_by_maturity_then_strike(self, tmp_path):
        rows = ["110,1.0,1,1.2", "90,1.0,12,12.2", "100,0.5,5,5.2", "90,0.5,11,11.2"]
        surface = load_surface(write_csv(tmp_path / "q.csv", rows), 100.0, 0.0)
        assert list(zip(surface.maturities, surface.strikes)) == [(0.5, 90), (0.5, 100), (1.0, 90), (1.0, 110)]

    def test_zero_spread_rejected_at_load(self, tmp_path):
        path = write_csv(tmp_path / "q.csv", ["100,0.25,4.9,5.1", "110,0.25,2.00,2.00"])
        with pytest.raises(ZeroSpreadError) as info:
            load_surface(path, 100.0, 0.0)
        assert info.value.index == 1

    def test_meta_sidecar(self, tmp_path):
        (tmp_path / "m.json").write_text('{"spot": 101.5, "rate": 0.03, "valuation_date": "2015-04-01"}')
        assert load_meta(tmp_path / "m.json")["spot"] == 101.5
        (tmp_path / "bad.json").write_text('{"spot": 101.5}')
        with pytest.raises(QuoteValidationError, match="rate"):
            load_meta(tmp_path / "bad.json")

    def test_empty_surface_constructor(self):
        with pytest.raises(QuoteValidationError, match="no quotes"):
            OptionSurface(100.0, 0.0, ())


class TestWeightsAndMids:
    @pytest.mark.parametrize("bid, ask, weight", [(1.00, 1.10, 100.0), (4.90, 5.10, 25.0)])
    def test_weight_examples(self, bid, ask, weight):
        surface = OptionSurface(100.0, 0.0, (OptionQuote(100, 1.0, bid, ask),))
        assert np.asarray(compute_weights(surface))[0] == pytest.approx(weight, rel=1e-12)

    def test_zero_spread(self):
        surface = OptionSurface(100.0, 0.0, (OptionQuote(100, 1.0, 1.0, 1.1), OptionQuote(90, 1.0, 2.0, 2.0)))
        with pytest.raises(ZeroSpreadError, match="option 1"):
            compute_weights(surface)

    @pytest.mark.parametrize("bid, ask, mid", [(4.90, 5.10, 5.00), (0.00, 0.10, 0.05)])
    def test_mid_examples(self, bid, ask, mid):
        surface = OptionSurface(100.0, 0.0, (OptionQuote(100, 1.0, bid, ask),))
        assert mid_prices(surface)[0] == pytest.approx(mid, abs=1e-15)

    def test_mid_length_and_order(self, small_surface):
        mids = mid_prices(small_surface)
        assert mids.shape == (len(small_surface),)
        assert np.array_equal(mids, [q.mid for q in small_surface.quotes])


quote_rows = st.lists(
    st.tuples(
        st.floats(1.0, 500.0),
        st.floats(0.01, 5.0),
        st.floats(0.0, 50.0),
        st.floats(1e-3, 5.0),
    ).map(lambda t: OptionQuote(t[0], t[1], t[2], t[2] + t[3])),
    min_size=1,
    max_size=12,
)


class TestProperties:
    @given(quotes=quote_rows, data=st.data())
    @settings(max_examples=60, deadline=None)
    def test_weights_permutation_equivariant(self, quotes, data):
        perm = data.draw(st.permutations(range(len(quotes))))
        surface = OptionSurface(100.0, 0.0, tuple(quotes))
        w = np.asarray(compute_weights(surface))
        w_perm = np.asarray(compute_weights(surface.take(perm)))
        assert np.array_equal(w_perm, w[list(perm)])

    @given(quotes=quote_rows)
    @settings(max_examples=40, deadline=None)
    def test_write_load_round_trip(self, tmp_path_factory, quotes):
        quotes = sorted(quotes, key=lambda q: (q.maturity, q.strike))
        surface = OptionSurface(123.25, 0.015, tuple(quotes))
        path = tmp_path_factory.mktemp("rt") / "q.csv"
        write_surface(surface, path)
        again = load_surface(path, surface.spot, surface.rate)
        assert again.quotes == surface.quotes
        path2 = path.with_name("q2.csv")
        write_surface(again, path2)
        assert path2.read_bytes() == path.read_bytes()

    def test_load_deterministic(self, tmp_path):
        path = write_csv(tmp_path / "q.csv", ["100,0.25,4.9,5.1", "90,0.25,11,11.3", "95,1,8,8.4"])
        a = mid_prices(load_surface(path, 100.0, 0.0))
        b = mid_prices(load_surface(path, 100.0, 0.0))
        assert np.array_equal(a, b)
