#!/usr/bin/env python3
"""Builds data/desk_corpus.txt from two public-domain English Bible texts.

Sources (both public domain, fetched from the npm registry):
  kjv@1.0.0                  King James Version (1769 Blayney text)
  world-english-bible@1.0.1  World English Bible

Output: one sentence per line, tokens separated by single spaces, with
punctuation split off as separate tokens. The result is what the C++
corpus reader expects; it does no further normalization beyond lowercasing.

Usage: tools/make_desk_corpus.py [--workdir DIR] [--out data/desk_corpus.txt]
"""

import argparse
import glob
import json
import os
import re
import subprocess
import tarfile

PACKAGES = {"kjv": "kjv@1.0.0", "web": "world-english-bible@1.0.1"}

DROP = re.compile(r"[\[\]()“”\"‘*#֐-׿]")
SPLIT_PUNCT = re.compile(r"([.,;:!?])")
SENT_END = {".", "!", "?"}


def fetch(workdir):
    roots = {}
    for key, spec in PACKAGES.items():
        dest = os.path.join(workdir, key)
        if not os.path.isdir(dest):
            os.makedirs(dest, exist_ok=True)
            out = subprocess.run(["npm", "pack", spec], cwd=dest, check=True,
                                 capture_output=True, text=True).stdout.split()[-1]
            with tarfile.open(os.path.join(dest, out)) as tar:
                tar.extractall(dest)
        roots[key] = os.path.join(dest, "package")
    return roots


def kjv_passages(root):
    verses = json.load(open(os.path.join(root, "json", "verses-1769.json")))
    for ref in verses:  # insertion order is canonical book order
        yield verses[ref]


def web_passages(root):
    for path in sorted(glob.glob(os.path.join(root, "json", "*.json"))):
        buf = []
        for item in json.load(open(path)):
            if "value" in item:
                buf.append(item["value"])
            elif item["type"] in ("paragraph end", "stanza end", "break"):
                if buf:
                    yield " ".join(buf)
                buf = []
        if buf:
            yield " ".join(buf)


def sentences(text):
    text = text.replace(" ", " ").replace("’", "'").replace("—", " ").replace("-", " ")
    text = DROP.sub(" ", text)
    toks = SPLIT_PUNCT.sub(r" \1 ", text).split()
    sent = []
    for t in toks:
        sent.append(t)
        if t in SENT_END:
            yield sent
            sent = []
    if sent:
        yield sent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--workdir", default="/tmp/primeprobe-corpus")
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "desk_corpus.txt"))
    args = ap.parse_args()
    roots = fetch(args.workdir)
    n_tok = n_sent = 0
    with open(args.out, "w", encoding="utf-8") as out:
        for passages in (kjv_passages(roots["kjv"]), web_passages(roots["web"])):
            for passage in passages:
                for sent in sentences(passage):
                    if len(sent) < 2:
                        continue
                    out.write(" ".join(sent) + "\n")
                    n_tok += len(sent)
                    n_sent += 1
    print(f"{n_sent} sentences, {n_tok} tokens -> {args.out}")


if __name__ == "__main__":
    main()
