import json

import pytest

from modalroute.cli import main
from modalroute.evaluation.corpus import load_corpus


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_classify_dump_tables(capsys):
    code, out = run(capsys, "classify", "--dump-tables")
    assert code == 0
    tables = json.loads(out.out)
    assert tables


def test_classify_text(capsys):
    code, out = run(capsys, "classify", "--text", "Write a python function to reverse a linked list")
    assert code == 0
    d = json.loads(out.out)
    assert d["modality"] == "text"
    assert 0.0 <= d["complexity"]["score"] <= 1.0
    assert d["intent"]["category"]


def test_route_with_attachment(capsys, tmp_path):
    img = tmp_path / "x.png"
    img.write_bytes(b"\x89PNG\r\n\x1a\n" + b"\0" * 32)
    code, out = run(capsys, "route", "--text", "What is in this picture?", "--attach", str(img))
    assert code == 0
    d = json.loads(out.out)
    assert d["category"] == "vision"


def test_run_jsonl_with_explain(capsys, tmp_path):
    src = tmp_path / "q.jsonl"
    rows = [{"id": "a", "text": "Summarize the plot of a short story about a lighthouse keeper."},
            {"id": "b", "text": "Solve for x: 3x + 7 = 22"}]
    src.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    dst = tmp_path / "out.jsonl"
    code, _ = run(capsys, "run", "-i", str(src), "-o", str(dst), "--explain")
    assert code == 0
    got = [json.loads(l) for l in dst.read_text().splitlines()]
    assert [g["query_id"] for g in got] == ["a", "b"]
    assert all("decision" in json.dumps(g) for g in got)


def test_run_writes_refusal_row(capsys, tmp_path, corpus):
    from modalroute.core import PolicyMode, UserPolicy
    rec = next(r for r in corpus if r.gold_category.value == "image_gen")
    src = tmp_path / "q.jsonl"
    src.write_text(json.dumps(rec.query(policy=UserPolicy(PolicyMode.OPEN_SOURCE_ONLY)).to_dict()) + "\n")
    dst = tmp_path / "out.jsonl"
    code, _ = run(capsys, "run", "-i", str(src), "-o", str(dst))
    row = json.loads(dst.read_text())
    assert code == 0
    assert row["refused"] is True and row["route"] is None and row["cost_charged"] == 0.0


def test_feedback_reroutes(capsys, tmp_path, corpus):
    rec = next(r for r in corpus if r.gold_category.value == "math" and r.gold_tier == "efficient")
    src = tmp_path / "q.jsonl"
    src.write_text(json.dumps(rec.query().to_dict()) + "\n")
    log = tmp_path / "fb.jsonl"
    code, out = run(capsys, "feedback", rec.id, "unsatisfactory", "--queries", str(src), "--log", str(log))
    assert code == 0
    d = json.loads(out.out)
    assert d["retry"]["route"].startswith("prem:")
    assert log.read_text().strip()


def test_eval_and_report(capsys, tmp_path, corpus):
    from modalroute.evaluation.corpus import dump_corpus
    small = tmp_path / "small.jsonl"
    dump_corpus(corpus[::20], small)
    out_dir = tmp_path / "rep"
    code, out = run(capsys, "eval", "--corpus", str(small), "--out", str(out_dir))
    assert code == 0 and "accuracy" in out.out
    assert (out_dir / "metrics.csv").is_file()
    code, again = run(capsys, "report", str(out_dir))
    assert code == 0
    assert again.out == (out_dir / "summary.txt").read_text()


def test_unknown_route_is_an_engine_error(capsys):
    code, out = run(capsys, "route", "--text", "hello", "--route", "no-such-route")
    assert code == 2
    assert "error" in out.err
