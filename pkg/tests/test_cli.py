import io
import os

import pytest

from pvrec.cli import main
from pvrec.core import parse_recordings


def run(args, capsys=None):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def small_flags():
    return ["--users", "120", "--programs", "40", "--channels", "5",
            "--communities", "4", "--span-days", "40"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory, small_flags):
    out = tmp_path_factory.mktemp("data")
    assert run(["synth", "-o", out, "--seed", "5", *small_flags]) == 0
    return out


class TestSynth:
    def test_outputs_exist_with_config_echo(self, dataset):
        recs = (dataset / "recordings.csv").read_text()
        truth = (dataset / "truth.csv").read_text()
        assert recs.startswith("# pvrec synth seed=5 ")
        assert truth.startswith("# pvrec synth seed=5 ")
        parsed, errors = parse_recordings(io.StringIO(recs))
        assert errors == [] and len(parsed) > 100

    def test_deterministic_across_runs(self, dataset, tmp_path, small_flags):
        # the echoed config names the output dir, so compare data rows only
        assert run(["synth", "-o", tmp_path, "--seed", "5", *small_flags]) == 0
        first = (dataset / "recordings.csv").read_text().splitlines()[1:]
        second = (tmp_path / "recordings.csv").read_text().splitlines()[1:]
        assert first == second


class TestExtract:
    def test_smoke_produces_events(self, dataset, tmp_path):
        out = tmp_path / "events.csv"
        assert run(["extract", "-i", dataset / "recordings.csv", "-o", out]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# pvrec extract ")
        assert lines[1] == "id,channel,periodicity,title,start,end,supporters,member_count,created_at"
        assert len(lines) > 2

    def test_missing_input_fails(self, tmp_path, capsys):
        code = run(["extract", "-i", tmp_path / "nope.csv", "-o", tmp_path / "out.csv"])
        assert code == 2
        assert "nope.csv" in capsys.readouterr().err

    def test_malformed_rows_fail_with_line_numbers(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("id,user,channel,periodicity,title,start,end,created_at\n"
                       "r1,u1,ch1,biweekly,News,0,60,5\n")
        code = run(["extract", "-i", bad, "-o", tmp_path / "out.csv"])
        assert code == 2
        err = capsys.readouterr().err
        assert "bad.csv" in err and "line 2" in err


@pytest.fixture(scope="module")
def events_file(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("events") / "events.csv"
    assert run(["extract", "-i", dataset / "recordings.csv", "-o", out]) == 0
    return out


class TestRecommend:
    def test_writes_ranked_rows(self, events_file, tmp_path):
        out = tmp_path / "recs.csv"
        assert run(["recommend", "-i", events_file, "-o", out, "--t", "46000",
                    "--algo", "user-knn", "--k", "30", "--n", "5"]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# pvrec recommend ")
        assert lines[1] == "user,rank,event,weight"
        body = [l.split(",") for l in lines[2:]]
        assert body and all(1 <= int(row[1]) <= 5 for row in body)

    def test_unknown_algorithm_lists_choices(self, events_file, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["recommend", "-i", events_file, "-o", tmp_path / "r.csv",
                 "--t", "46000", "--algo", "svd++"])
        assert exc.value.code == 2
        err = capsys.readouterr().err
        assert "user-knn" in err and "mostpopular" in err

    def test_graph_dump(self, events_file, tmp_path):
        out = tmp_path / "recs.csv"
        dump = tmp_path / "graph.csv"
        assert run(["recommend", "-i", events_file, "-o", out, "--t", "46000",
                    "--algo", "item-knn", "--dump-graph", dump]) == 0
        lines = dump.read_text().splitlines()
        assert lines[1] == "node,neighbor,weight,level"
        assert len(lines) > 2


class TestEvaluate:
    def test_oracle_reaches_full_recall(self, dataset, tmp_path, capsys):
        out = tmp_path / "eval"
        assert run(["evaluate", "-i", dataset / "recordings.csv", "-o", out,
                    "--algo", "oracle", "--n", "60"]) == 0
        report = (out / "report.csv").read_text().splitlines()
        assert report[0].startswith("# pvrec evaluate ")
        rows = [l.split(",") for l in report[2:]]
        assert all(float(r[5]) == 1.0 for r in rows)
        assert (out / "recall_overall.svg").exists()

    def test_unknown_algo_fails_listing_valid(self, dataset, tmp_path, capsys):
        code = run(["evaluate", "-i", dataset / "recordings.csv", "-o", tmp_path,
                    "--algo", "svd++"])
        assert code == 2
        err = capsys.readouterr().err
        assert "svd++" in err and "mostpopular" in err and "oracle" in err

    def test_byte_identical_across_threads(self, dataset, tmp_path):
        args = ["evaluate", "-i", dataset / "recordings.csv",
                "--algo", "mostpopular,random,user-knn", "--k", "30",
                "--n", "5,10", "--seed", "3"]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run([*args, "-o", out1, "--threads", "1"]) == 0
        assert run([*args, "-o", out2, "--threads", "4"]) == 0
        for name in ["report.csv", "recall_overall.svg"]:
            a = (out1 / name).read_bytes().replace(str(out1).encode(), b"OUT")
            b = (out2 / name).read_bytes().replace(str(out2).encode(), b"OUT")
            assert a == b, name


def test_entrypoint_is_installed():
    import shutil
    path = shutil.which("pvrec")
    assert path is not None
