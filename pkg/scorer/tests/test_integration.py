"""Integration with the corpus engine through its external interfaces only:
the ndjson example schema on disk and the stdio scorer protocol under
`linkforge rank --method external`."""
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

linkforge_cli = pytest.importorskip(
    "linkforge.cli", reason="corpus engine not installed; protocol tests cover the contract"
)

CORPUS = Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "corpus"


@pytest.mark.skipif(not CORPUS.exists(), reason="fixture corpus not present")
def test_rank_external_with_trained_checkpoint(tmp_path):
    corpus = tmp_path / "corpus"
    shutil.copytree(CORPUS, corpus)
    run = subprocess.run(
        [sys.executable, "-m", "linkforge.cli", "run", "--config", str(corpus / "pipeline.cfg")],
        capture_output=True, text=True,
    )
    assert run.returncode == 0, run.stderr

    (corpus / "train.toml").write_text(
        """
[model]
d_model = 32
layers = 1
heads = 2
ffn = 64
max_len = 96

[training]
encoder_lr = 1e-3
head_lr = 3e-3
stage1_points = 5
stage1_epochs = 1
stage2_epochs = 1
batch_examples = 2
seed = 7

[data]
stage1 = "out/train.examples.ndjson"
stage2 = "out/train.examples.ndjson"

[output]
checkpoint = "locei.ckpt"
""",
        encoding="utf-8",
    )
    trained = subprocess.run(
        [sys.executable, "-m", "locei_scorer.cli", "train", "--config", str(corpus / "train.toml")],
        capture_output=True, text=True,
    )
    assert trained.returncode == 0, trained.stderr

    scorer_cmd = f"{sys.executable} -m locei_scorer.cli serve --checkpoint {corpus / 'locei.ckpt'}"
    ranked = subprocess.run(
        [sys.executable, "-m", "linkforge.cli", "rank",
         "--method", "external", "--scorer-cmd", scorer_cmd,
         "--in", str(corpus / "out" / "eval.examples.ndjson"),
         "--out", str(corpus / "out" / "rankings.locei.ndjson")],
        capture_output=True, text=True,
    )
    assert ranked.returncode == 0, ranked.stderr

    lines = (corpus / "out" / "rankings.locei.ndjson").read_text(encoding="utf-8").splitlines()
    header = json.loads(lines[0])
    assert header == {"kind": "ranking", "schema": "linkforge/v1"}
    rankings = [json.loads(line) for line in lines[1:]]
    assert len(rankings) == 4
    assert all(len(r["scores"]) == len(r["order"]) for r in rankings)
