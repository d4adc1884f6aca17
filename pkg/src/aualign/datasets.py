"""Dataset directory layout shared by the generator and any ingestion
adapter: a ``manifest.tsv`` with one record per sample, a ``meta.json``
with split-level facts, and one tensor file per sample.

Manifest record (tab-separated):
``path  subject_id  emotion  au_ids  onset  apex  offset  shape``
where ``au_ids`` and ``shape`` are comma-joined integers.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .aucodes import AuAnnotation
from .errors import ContractError
from .sampling import KeyFrames, MeSequence
from .tensor import read_tensor, write_tensor

MANIFEST = "manifest.tsv"
META = "meta.json"


def save_dataset(directory: str, sequences: list[MeSequence], meta: dict) -> None:
    if not sequences:
        raise ContractError("save_dataset: nothing to write")
    os.makedirs(os.path.join(directory, "tensors"), exist_ok=True)
    records = []
    for i, seq in enumerate(sequences):
        rel = f"tensors/sample_{i:04d}.bin"
        write_tensor(os.path.join(directory, rel), seq.frames)
        au_ids = ",".join(str(c) for c in seq.au_set.codes) if seq.au_set else ""
        shape = ",".join(str(d) for d in seq.frames.shape)
        kf = seq.keyframes
        records.append(
            f"{rel}\t{seq.subject_id}\t{seq.emotion}\t{au_ids}\t{kf.onset}\t{kf.apex}\t{kf.offset}\t{shape}"
        )
    with open(os.path.join(directory, MANIFEST), "w", encoding="utf-8") as fh:
        fh.write("\n".join(records) + "\n")
    with open(os.path.join(directory, META), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(directory: str) -> tuple[list[MeSequence], dict]:
    manifest_path = os.path.join(directory, MANIFEST)
    if not os.path.exists(manifest_path):
        raise ContractError(f"load_dataset: no {MANIFEST} in {directory}")
    with open(os.path.join(directory, META), encoding="utf-8") as fh:
        meta = json.load(fh)
    sequences: list[MeSequence] = []
    with open(manifest_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 8:
                raise ContractError(f"{MANIFEST}:{line_no}: expected 8 fields, got {len(fields)}")
            rel, subject_id, emotion, au_ids, onset, apex, offset, shape = fields
            frames = read_tensor(os.path.join(directory, rel))
            expected = tuple(int(d) for d in shape.split(","))
            if frames.shape != expected:
                raise ContractError(f"{MANIFEST}:{line_no}: tensor shape {frames.shape} vs manifest {expected}")
            if frames.shape[1] % 4 or frames.shape[2] % 4:
                raise ContractError(
                    f"{MANIFEST}:{line_no}: spatial size {frames.shape[1]}x{frames.shape[2]} "
                    "must be divisible by 4"
                )
            if not np.isfinite(frames).all() or frames.min() < 0.0 or frames.max() > 1.0:
                raise ContractError(f"{MANIFEST}:{line_no}: frame values outside [0, 1]")
            sequences.append(
                MeSequence(
                    frames=frames,
                    subject_id=subject_id,
                    emotion=int(emotion),
                    au_set=AuAnnotation(int(c) for c in au_ids.split(",")) if au_ids else None,
                    keyframes=KeyFrames(onset=int(onset), apex=int(apex), offset=int(offset)),
                )
            )
    if not sequences:
        raise ContractError(f"load_dataset: empty manifest in {directory}")
    return sequences, meta
