"""Smoke test for the tweetprobe extension module.

Build and install first:
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/tweetprobe-*.whl
"""
import os
import sys
import tempfile

import tweetprobe as tp


def main():
    corpus = tp.synth(400, seed=3)
    assert len(corpus) == 400
    assert tp.synth(400, seed=3).fingerprint() == corpus.fingerprint()

    assert [k for _, k in tp.tokenize("see #this @you")] == ["word", "hashtag", "mention"]
    assert len(tp.task_names()) == 13

    ds = tp.build_task(corpus, "hashtag", seed=3)
    assert len(ds) == len(ds.train) + len(ds.val) + len(ds.test)
    assert set(ds.labels) <= set(range(ds.class_count))

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "c.jsonl")
        corpus.save(path)
        assert tp.Corpus.load(path).fingerprint() == corpus.fingerprint()

        # An outside encoder would write this file; here vectors come from Python.
        table = tp.EmbeddingTable("py_len", 2)
        for i in corpus.ids():
            table.insert(i, [float(len(corpus.text(i).split())), 1.0])
        ext = os.path.join(d, "ext.txt")
        table.save(ext)
        with open(ext) as f:
            assert f.readline().split() == ["400", "2"]
        loaded = tp.EmbeddingTable.load("py_len", ext)
        res = tp.probe(corpus, "length", seed=3, table=loaded)
        assert res.model == "py_len" and 0.0 <= res.macro_f1 <= 1.0

    lda = tp.embed(corpus, "lda", seed=3)
    assert len(lda) == 400
    res = tp.probe(corpus, "is_reply", model="random", seed=3)
    assert res.task == "is_reply"

    assert tp.classify_trend([0.5, 0.505, 0.51]) == "invariant"
    assert tp.kendall_tau([1, 2, 3], [1, 2, 3]) == 1.0
    assert "**" in tp.reference_grid()

    try:
        tp.probe(corpus, "no_such_task")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown task accepted")

    print("smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
