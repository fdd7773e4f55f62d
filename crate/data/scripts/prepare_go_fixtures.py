#!/usr/bin/env python3
"""Derive the bundled GO fixtures from a pinned GO release and a GOA file.

usage: prepare_go_fixtures.py GO_OBO GOA_GAF OUT_DIR

Writes:
  OUT_DIR/go/go-subset.obo           every [Term] stanza reachable (is_a/part_of)
                                     from the fixture proteins' annotations
  OUT_DIR/mock/base_annotations.tsv  GOA annotations of the fixture proteins
"""
import re
import sys
from pathlib import Path

PROTEINS = ["P14679", "P31785", "O00206"]


def stanzas(text):
    header, _, body = text.partition("\n[")
    chunks = ("[" + body).split("\n\n")
    return header, [c.strip("\n") for c in chunks if c.strip()]


def main(obo_path, gaf_path, out_dir):
    text = Path(obo_path).read_text()
    header, chunks = stanzas(text)
    terms = {}
    for c in chunks:
        if not c.startswith("[Term]"):
            continue
        tid = re.search(r"^id: (GO:\d{7})", c, re.M).group(1)
        terms[tid] = c

    parents = {}
    for tid, c in terms.items():
        ps = re.findall(r"^is_a: (GO:\d{7})", c, re.M)
        ps += re.findall(r"^relationship: part_of (GO:\d{7})", c, re.M)
        parents[tid] = ps

    annotations = set()
    for line in Path(gaf_path).read_text().splitlines():
        if line.startswith("!"):
            continue
        cols = line.split("\t")
        if cols[1] in PROTEINS and "NOT" not in cols[3]:
            annotations.add((cols[1], cols[4]))
    annotations = {(p, t) for p, t in annotations if t in terms and "is_obsolete: true" not in terms[t]}

    keep = set()
    stack = [t for _, t in annotations] + ["GO:0003674", "GO:0008150", "GO:0005575"]
    while stack:
        t = stack.pop()
        if t in keep:
            continue
        keep.add(t)
        stack.extend(parents[t])

    out = [header.rstrip("\n"), ""]
    for tid in sorted(keep):
        lines = []
        for line in terms[tid].splitlines():
            m = re.match(r"^(is_a|relationship|intersection_of): .*?(GO:\d{7})", line)
            if m and m.group(2) not in keep:
                continue
            lines.append(line)
        out.append("\n".join(lines))
        out.append("")
    Path(out_dir, "go").mkdir(parents=True, exist_ok=True)
    Path(out_dir, "go", "go-subset.obo").write_text("\n".join(out))

    Path(out_dir, "mock").mkdir(parents=True, exist_ok=True)
    rows = ["# protein_id\tgo_term\tscore"]
    rows += [f"{p}\t{t}\t1.00" for p, t in sorted(annotations)]
    Path(out_dir, "mock", "base_annotations.tsv").write_text("\n".join(rows) + "\n")
    print(f"{len(keep)} terms, {len(annotations)} annotations")


if __name__ == "__main__":
    main(*sys.argv[1:4])
