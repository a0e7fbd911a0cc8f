import pytest

from shiftlab.utils.output_manager import STAGING_PREFIX, OutputError, OutputManager


def test_commit_publishes_staged_files(tmp_path):
    out = tmp_path / "run"
    manager = OutputManager(out)
    final = manager.stage_text("report.jsonl", "{}\n")
    assert final == out / "report.jsonl"
    assert not final.exists()
    assert (out / f"{STAGING_PREFIX}report.jsonl").exists()
    assert manager.commit() == [final]
    assert final.read_text(encoding="utf-8") == "{}\n"
    assert not (out / f"{STAGING_PREFIX}report.jsonl").exists()


def test_context_manager_discards_on_error(tmp_path):
    with pytest.raises(RuntimeError):
        with OutputManager(tmp_path) as manager:
            manager.stage_text("a.csv", "x\n1\n")
            raise RuntimeError("boom")
    assert list(tmp_path.iterdir()) == []


def test_context_manager_commits_on_success(tmp_path):
    with OutputManager(tmp_path) as manager:
        manager.stage_text("a.csv", "x\n1\n")
        manager.stage("b.txt", lambda path: path.write_text("b", encoding="utf-8"))
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.csv", "b.txt"]


def test_failing_writer_leaves_nothing_behind(tmp_path):
    manager = OutputManager(tmp_path)

    def writer(path):
        path.write_text("half", encoding="utf-8")
        raise ValueError("bad data")

    with pytest.raises(ValueError):
        manager.stage("c.csv", writer)
    assert list(tmp_path.iterdir()) == []


def test_double_staging_rejected(tmp_path):
    manager = OutputManager(tmp_path)
    manager.stage_text("a.csv", "1")
    with pytest.raises(OutputError, match="staged twice"):
        manager.stage_text("a.csv", "2")


@pytest.mark.parametrize("name", ["", "..", "sub/file.csv"])
def test_invalid_names_rejected(tmp_path, name):
    with pytest.raises(OutputError, match="Invalid output file name"):
        OutputManager(tmp_path).stage_text(name, "x")


def test_output_path_must_be_a_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(OutputError):
        OutputManager(blocker)
