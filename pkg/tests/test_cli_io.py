import datetime as dt
import io as stdio
import json
import subprocess
import sys
from decimal import Decimal

import pytest

from rangevol import io, trading
from rangevol.cli import cli_dispatch
from rangevol.config import RunConfig
from rangevol.errors import ParameterError, ValidationError
from rangevol.estimators import OhlcBar
from rangevol.mc_oracle import SimConfig, simulate_ohlc

HEADER = "date,open,high,low,close\n"


def write(tmp_path, name, text, newline="\n"):
    path = tmp_path / name
    path.write_bytes(text.replace("\n", newline).encode())
    return path


class TestOhlcParsing:
    def test_basic(self, tmp_path):
        path = write(tmp_path, "b.csv", HEADER + "2010-06-17,129.5,130.2,128.9,130.0\n2010-06-18,130.0,131,129.8,130.14\n")
        bars = io.parse_ohlc(path)
        assert bars[1] == OhlcBar(dt.date(2010, 6, 18), 130.0, 131.0, 129.8, 130.14)

    def test_crlf(self, tmp_path):
        text = HEADER + "2010-06-17,129.5,130.2,128.9,130.0\n"
        assert io.parse_ohlc(write(tmp_path, "a.csv", text)) == io.parse_ohlc(write(tmp_path, "b.csv", text, "\r\n"))

    def test_header_only(self, tmp_path):
        assert io.parse_ohlc(write(tmp_path, "h.csv", HEADER)) == []

    @pytest.mark.parametrize("body,match", [
        ("2010-06-17,129.5,130.2,129.6,130.0\n", "line 2"),
        ("2010-06-17,129.5,130.2,128.9,130.0\n2010-06-16,129.5,130.2,128.9,130.0\n", "unsorted"),
        ("2010-06-17,129.5,130.2,128.9,130.0\n2010-06-17,129.5,130.2,128.9,130.0\n", "duplicate"),
        ("2010-06-17,129.5,130.2,128.9\n", "fields"),
        ("2010-06-17,129.5,nan,128.9,130.0\n", "finite"),
        ("2010-06-17,129.5,1e999,128.9,130.0\n", "finite"),
        ("17/06/2010,129.5,130.2,128.9,130.0\n", "ISO"),
        ("2010-06-17,129.5,abc,128.9,130.0\n", "number"),
    ])
    def test_rejects(self, tmp_path, body, match):
        with pytest.raises(ValidationError, match=match):
            io.parse_ohlc(write(tmp_path, "bad.csv", HEADER + body))

    def test_wrong_header(self, tmp_path):
        with pytest.raises(ValidationError, match="header"):
            io.parse_ohlc(write(tmp_path, "bad.csv", "date,o,h,l,c\n"))
        with pytest.raises(ValidationError, match="empty"):
            io.parse_ohlc(write(tmp_path, "empty.csv", ""))

    def test_round_trip(self, tmp_path):
        bars = simulate_ohlc(0.0003, 0.017, SimConfig(seed=3, f=0.3, steps_per_unit=100), 40)
        path = tmp_path / "rt.csv"
        io.write_ohlc(path, bars)
        assert io.parse_ohlc(path) == bars


class TestOtherFiles:
    def test_quotes(self, tmp_path):
        path = write(tmp_path, "q.csv", "timestamp,expiry,strike,bid,ask\n"
                     "2010-06-17,2010-06-18,130,0.90,0.94\n2010-06-18T12:27,2010-06-18,130,0.48,0.51\n")
        q = io.parse_quotes(path)
        assert q[0].timestamp == dt.datetime(2010, 6, 17, 16, 0)
        assert q[1].timestamp == dt.datetime(2010, 6, 18, 12, 27)
        assert q[1].bid == Decimal("0.48")

    def test_bid_above_ask(self, tmp_path):
        path = write(tmp_path, "q.csv", "timestamp,expiry,strike,bid,ask\n2010-06-17,2010-06-18,130,0.95,0.94\n")
        with pytest.raises(ValidationError, match="line 2"):
            io.parse_quotes(path)

    def test_rates(self, tmp_path):
        path = write(tmp_path, "r.csv", "date,rate\n2010-06-16,0.0012\n2010-06-17,0.0013\n")
        rates = io.parse_rates(path)
        assert trading.rate_on(rates, dt.date(2010, 6, 18)) == 0.0013
        assert trading.rate_on(rates, dt.date(2010, 6, 17)) == 0.0012
        with pytest.raises(ValidationError, match="no rate"):
            trading.rate_on(rates, dt.date(2010, 6, 16))

    def test_rates_order(self, tmp_path):
        path = write(tmp_path, "r.csv", "date,rate\n2010-06-17,0.0012\n2010-06-16,0.0013\n")
        with pytest.raises(ValidationError):
            io.parse_rates(path)

    def test_timestamps(self):
        assert io.parse_timestamp("2010-06-18") == dt.datetime(2010, 6, 18, 16, 0)
        with pytest.raises(ValidationError):
            io.parse_timestamp("June 18")

    def test_ledger_writer(self, data_dir):
        ledger = trading.replay_positions(io.parse_positions(data_dir / "ibm_june2010_positions.csv"))
        buf = stdio.StringIO()
        io.write_ledger(buf, ledger)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "timestamp,strike,action,cash_flow,position"
        assert lines[1] == "2010-05-26T16:00,130,sell_open,1.16,0"
        assert lines[-1] == "total,,,-0.76,"
        assert len(lines) == 2 + 18

    def test_formatting(self):
        assert io.fmt(1.5957691216057308) == "1.59576912161"
        assert io.fmt_money(Decimal("-0.1")) == "-0.10"


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig.from_env({})
        assert (cfg.window, cfg.band, cfg.annualization, cfg.rate_convention) == (63, 0.10, 252, "quoted")

    def test_environment(self):
        env = {"RANGEVOL_WINDOW": "126", "RANGEVOL_BAND": "0.2", "RANGEVOL_RATE_CONVENTION": "log",
               "RANGEVOL_YZ_K": "0.3"}
        cfg = RunConfig.from_env(env)
        assert (cfg.window, cfg.band, cfg.rate_convention, cfg.yz_k) == (126, 0.2, "log", 0.3)
        assert RunConfig.from_env(env, window=21).window == 21

    @pytest.mark.parametrize("env", [{"RANGEVOL_WINDOW": "x"}, {"RANGEVOL_BAND": "1.5"},
                                     {"RANGEVOL_RATE_SOURCE": "file"}, {"RANGEVOL_WINDOW": "2"}])
    def test_invalid(self, env):
        with pytest.raises(ParameterError):
            RunConfig.from_env(env)


def run(argv, capsys):
    code = cli_dispatch(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestCli:
    def test_unknown_command(self, capsys):
        code, _, _ = run(["frobnicate"], capsys)
        assert code != 0

    def test_missing_argument(self, capsys):
        code, _, _ = run(["expected-range", "--mu", "0"], capsys)
        assert code == 2

    def test_expected_range(self, capsys):
        assert run(["expected-range", "--mu", "0", "--sigma", "1"], capsys) == (0, "1.59576912161\n", "")

    def test_domain_error(self, capsys):
        code, _, err = run(["expected-range", "--mu", "0", "--sigma", "-1"], capsys)
        assert code == 1 and "error" in err

    def test_price(self, capsys):
        code, out, _ = run(["price", "--spot", "100", "--strike", "100", "--vol", "0.2", "--tau", "1"], capsys)
        assert code == 0 and out == "7.96556745541\n"
        code, out, _ = run(["price", "--spot", "100", "--strike", "100", "--vol", "0.2", "--days", "252"], capsys)
        assert out == "7.96556745541\n"

    def test_density(self, capsys):
        code, out, _ = run(["density", "range", "--mu", "0.3", "--sigma", "0.25", "--points", "5"], capsys)
        lines = out.splitlines()
        assert code == 0 and lines[0] == "x,density" and len(lines) == 6
        code, out, _ = run(["density", "joint", "--mu", "0", "--sigma", "1", "--points", "3"], capsys)
        assert code == 0 and len(out.splitlines()) == 10

    def test_estimate_golden(self, data_dir, capsys):
        code, out, _ = run(["estimate", "--bars", str(data_dir / "synthetic_bars.csv")], capsys)
        assert code == 0
        assert out == (data_dir / "synthetic_estimates.jsonl").read_text()

    def test_estimate_full(self, data_dir, capsys):
        code, out, _ = run(["estimate", "--bars", str(data_dir / "synthetic_bars.csv"), "--full"], capsys)
        record = json.loads(out)
        assert code == 0 and record["n"] == 300

    def test_bad_bars(self, tmp_path, capsys):
        path = write(tmp_path, "bad.csv", HEADER + "2010-06-17,129.5,130.2,129.6,130.0\n")
        code, _, err = run(["estimate", "--bars", str(path)], capsys)
        assert code == 1 and "line 2" in err

    def test_simulate_matches_library(self, tmp_path, capsys):
        out = tmp_path / "sim.csv"
        code, _, _ = run(["simulate", "--sigma", "0.02", "--f", "0.3", "--days", "30", "--seed", "5",
                          "--steps", "100", "--out", str(out)], capsys)
        assert code == 0
        assert io.parse_ohlc(out) == simulate_ohlc(0.0, 0.02, SimConfig(seed=5, f=0.3, steps_per_unit=100), 30)

    def test_replay(self, data_dir, capsys):
        code, out, err = run(["replay", "--positions", str(data_dir / "ibm_june2010_positions.csv")], capsys)
        assert code == 0
        assert out.splitlines()[-1] == "total,,,-0.76,"
        assert "recomputed -1.85, reported -1.77" in err

    def test_backtest(self, tmp_path, capsys):
        bars = simulate_ohlc(0.0, 0.015, SimConfig(seed=9, f=0.3, steps_per_unit=200), 80,
                             s0=130.0, start=dt.date(2010, 3, 1))
        io.write_ohlc(tmp_path / "bars.csv", bars)
        rows = [f"{b.date}T11:00,{bars[-1].date},130,1.00,1.10" for b in bars[70:]]
        write(tmp_path, "quotes.csv", "timestamp,expiry,strike,bid,ask\n" + "\n".join(rows) + "\n")
        write(tmp_path, "rates.csv", f"date,rate\n{bars[0].date},0.001\n")
        argv = ["backtest", "--bars", str(tmp_path / "bars.csv"), "--quotes", str(tmp_path / "quotes.csv"),
                "--rates", str(tmp_path / "rates.csv")]
        code, out, _ = run(argv, capsys)
        assert code == 0 and out.splitlines()[-1].startswith("total,,,")
        assert run(argv, capsys)[1] == out

    def test_console_script_bytes(self, tmp_path):
        """Two runs of the installed command write identical bytes."""
        outs = []
        for name in ("a.csv", "b.csv"):
            path = tmp_path / name
            subprocess.run([sys.executable, "-m", "rangevol", "simulate", "--sigma", "0.02", "--days", "20",
                            "--seed", "1", "--steps", "50", "--out", str(path)], check=True)
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]
