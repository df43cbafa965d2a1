from fundustrain.cli import main
from fundustrain.files import read_meta

from harness_data import cohort_files


def run(*argv):
    return main([str(a) for a in argv])


class TestCli:
    def test_train_then_predict(self, tmp_path):
        tensors, manifest, split = cohort_files(tmp_path, n=15, seed=1)
        ck = tmp_path / "ck"
        assert run("train", "--task", "age", "--tensors", tensors,
                   "--manifest", manifest, "--split", split, "--out", ck,
                   "--max-epochs", 3, "--no-augment") == 0
        meta = read_meta(ck / "checkpoint.meta")
        assert meta["task"] == "age" and meta["regime"] == "full_finetune"

        out = tmp_path / "preds.csv"
        assert run("predict", "--checkpoint", ck, "--tensors", tensors,
                   "--manifest", manifest, "--split", split,
                   "--subset", "test", "--out", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "participant_id,eye,task,value,model_id,split"
        assert len(lines) > 1

    def test_missing_files_exit_code(self, tmp_path):
        assert run("train", "--task", "age", "--tensors", tmp_path,
                   "--manifest", tmp_path / "nope.csv",
                   "--split", tmp_path / "nope2.csv",
                   "--out", tmp_path / "ck") == 3
