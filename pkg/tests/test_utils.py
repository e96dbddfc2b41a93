from pathlib import Path

from src.utils import format_seconds, prepare_output


def test_prepare_output_creates_nested_parents(tmp_path):
    target = prepare_output(str(tmp_path / "runs" / "fig4" / "curves.csv"))
    assert isinstance(target, Path)
    assert target.parent.is_dir()
    assert not target.exists()
    assert prepare_output(target) == target


def test_format_seconds_picks_prefix():
    assert format_seconds(5.53e-7) == "0.553 us"
    assert format_seconds(2.5e-3) == "2.5 ms"
    assert format_seconds(3.0) == "3 s"
