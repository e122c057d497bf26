import runpy
import sys
from pathlib import Path

import pytest

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


@pytest.mark.parametrize(
    "name, argv",
    [
        ("register_table.py", ["--max-sites", "2", "--max-fields", "1"]),
        ("many_worlds_demo.py", ["--branchings", "3"]),
        ("collapse_placement.py", ["--n-seeds", "2", "--csv"]),
    ],
)
def test_script_runs(name, argv, monkeypatch, capsys):
    monkeypatch.setattr(sys, "argv", [name] + argv)
    runpy.run_path(str(SCRIPTS / name), run_name="__main__")
    assert capsys.readouterr().out.strip()
