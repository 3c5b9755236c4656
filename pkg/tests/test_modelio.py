import json
import logging
import struct
import zlib

import numpy as np
import pytest

from fedlab.errors import (
    ArchitectureMismatch,
    CorruptCheckpoint,
    DimensionError,
    EmptyPopulation,
    IoError,
    VersionError,
)
from fedlab.metrics import MetricConfig, genotype_of
from fedlab.modelio import (
    MetadataSidecar,
    encode_checkpoint,
    extract_metadata,
    ingest_population,
    is_close_genotype,
    read_checkpoint,
    read_sidecar,
    sidecar_path,
    write_checkpoint,
    write_model,
)


def test_round_trip_is_exact_after_quantization(tmp_path):
    w = np.random.default_rng(0).normal(size=1000)
    path = tmp_path / "m.ckpt"
    write_checkpoint(w, [9, 100], "m", path)
    back, manifest = read_checkpoint(path)
    np.testing.assert_array_equal(back, w.astype(np.float32).astype(np.float64))
    assert manifest["element_count"] == back.size == 1000
    assert manifest["layer_dims"] == [9, 100] and manifest["model_id"] == "m"


def test_layout_is_documented_bytes(tmp_path):
    path = tmp_path / "m.ckpt"
    write_checkpoint([1.0, -2.0], None, "x", path)
    data = path.read_bytes()
    magic, mlen = struct.unpack_from("<8sI", data)
    assert magic == b"FEDLABCK"
    manifest = json.loads(data[12:12 + mlen])
    blob = data[12 + mlen:]
    assert blob == struct.pack("<2f", 1.0, -2.0)
    assert manifest["checksum"] == "crc32:%08x" % zlib.crc32(blob)


def test_corrupted_blob_byte_fails_checksum(tmp_path):
    path = tmp_path / "m.ckpt"
    write_checkpoint(np.arange(1.0, 9.0), None, "m", path)
    data = bytearray(path.read_bytes())
    data[-3] ^= 0x40
    path.write_bytes(bytes(data))
    with pytest.raises(CorruptCheckpoint, match="checksum"):
        read_checkpoint(path)


def test_empty_vector_rejected(tmp_path):
    with pytest.raises(DimensionError):
        write_checkpoint([], None, "m", tmp_path / "m.ckpt")
    assert not (tmp_path / "m.ckpt").exists()


def test_truncated_blob(tmp_path):
    path = tmp_path / "m.ckpt"
    write_checkpoint(np.ones(16), None, "m", path)
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(CorruptCheckpoint):
        read_checkpoint(path)


@pytest.mark.parametrize("data", [b"", b"FEDLAB", b"NOTACKPT\x00\x00\x00\x00"])
def test_garbage_is_corrupt(tmp_path, data):
    path = tmp_path / "m.ckpt"
    path.write_bytes(data)
    with pytest.raises(CorruptCheckpoint):
        read_checkpoint(path)


def test_future_version(tmp_path):
    ckpt = encode_checkpoint([1.0, 2.0], None, "m")
    ckpt.manifest["format_version"] = 2
    path = tmp_path / "m.ckpt"
    path.write_bytes(ckpt.to_bytes())
    with pytest.raises(VersionError):
        read_checkpoint(path)


def test_missing_file(tmp_path):
    with pytest.raises(IoError):
        read_checkpoint(tmp_path / "absent.ckpt")


def test_refuses_overwrite(tmp_path):
    path = tmp_path / "m.ckpt"
    write_checkpoint([1.0, 2.0], None, "m", path)
    before = path.read_bytes()
    with pytest.raises(IoError):
        write_checkpoint([3.0, 4.0], None, "m", path)
    assert path.read_bytes() == before
    write_checkpoint([3.0, 4.0], None, "m", path, overwrite=True)
    assert read_checkpoint(path)[0].tolist() == [3.0, 4.0]


def test_rewrite_is_byte_identical(tmp_path):
    rng = np.random.default_rng(1)
    for k in range(20):
        w = rng.normal(0, 10.0 ** rng.integers(-3, 3), rng.integers(1, 300))
        a, b = tmp_path / f"a{k}.ckpt", tmp_path / f"b{k}.ckpt"
        write_checkpoint(w, None, f"id-{k}", a)
        back, manifest = read_checkpoint(a)
        write_checkpoint(back, manifest["layer_dims"], manifest["model_id"], b)
        assert a.read_bytes() == b.read_bytes()


# -- sidecars ------------------------------------------------------------------


def test_extract_with_identical_prev(tmp_path):
    write_checkpoint([0.3, -0.2, 0.5], None, "a", tmp_path / "a.ckpt")
    write_checkpoint([0.3, -0.2, 0.5], None, "b", tmp_path / "b.ckpt")
    side = extract_metadata(tmp_path / "a.ckpt", tmp_path / "b.ckpt")
    assert side.stability == 1.0 and not side.stability_assumed
    assert read_sidecar(sidecar_path(tmp_path / "a.ckpt")) == side


def test_extract_without_prev(tmp_path):
    write_checkpoint([0.3, -0.2, 0.5], None, "a", tmp_path / "a.ckpt")
    side = extract_metadata(tmp_path / "a.ckpt")
    assert side.stability == 1.0 and side.stability_assumed


def test_extract_one_hot(tmp_path):
    write_checkpoint([0.0, 0.0, 0.0, 2.5], None, "a", tmp_path / "a.ckpt")
    assert extract_metadata(tmp_path / "a.ckpt").sparsity == 1.0


def test_extract_length_mismatch(tmp_path):
    write_checkpoint([1.0, 2.0], None, "a", tmp_path / "a.ckpt")
    write_checkpoint([1.0, 2.0, 3.0], None, "b", tmp_path / "b.ckpt")
    with pytest.raises(ArchitectureMismatch):
        extract_metadata(tmp_path / "a.ckpt", tmp_path / "b.ckpt")
    assert not sidecar_path(tmp_path / "a.ckpt").exists()


def test_sidecar_matches_fresh_metrics(tmp_path):
    rng = np.random.default_rng(2)
    cfg = MetricConfig(sigma_target=0.05)
    for k in range(10):
        w, prev = rng.normal(0, 0.1, 50), rng.normal(0, 0.1, 50)
        path = tmp_path / f"m{k}.ckpt"
        _, side = write_model(w, None, f"m{k}", path, cfg, w_prev=prev)
        stored, _ = read_checkpoint(path)
        fresh = genotype_of(stored, prev.astype(np.float32).astype(np.float64), cfg)
        assert is_close_genotype(read_sidecar(sidecar_path(path)).genotype(), fresh, 1e-9)
        assert side.sigma_target == 0.05


def test_sidecar_json_is_canonical():
    side = MetadataSidecar(sparsity=0.1, stability=0.9, stability_assumed=False, health=-1.0,
                           sigma_target=0.1, source_checksum="crc32:00000000")
    text = side.to_json()
    assert MetadataSidecar.from_json(text) == side
    assert list(json.loads(text)) == sorted(json.loads(text))


def test_sidecar_version_and_fields():
    doc = json.loads(MetadataSidecar(0.1, 0.9, False, -1.0, 0.1, "crc32:00000000").to_json())
    with pytest.raises(VersionError):
        MetadataSidecar.from_json(json.dumps({**doc, "format_version": 9}))
    with pytest.raises(CorruptCheckpoint):
        MetadataSidecar.from_json(json.dumps({**doc, "surprise": 1}))
    with pytest.raises(CorruptCheckpoint):
        MetadataSidecar.from_json(json.dumps({**doc, "sparsity": 1.5}))


# -- ingestion -----------------------------------------------------------------


def write_population(directory, n, length=20, seed=0):
    rng = np.random.default_rng(seed)
    for i in range(n):
        w = rng.normal(0, 0.3, length)
        write_model(w, None, f"model-{i:02d}", directory / f"model-{i:02d}.ckpt",
                    w_prev=w + rng.normal(0, 0.02, length), training_meta={"num_samples": 10 + i})


def test_ingest_thirty(tmp_path):
    write_population(tmp_path, 30)
    pop = ingest_population(tmp_path)
    assert len(pop) == 30
    assert [p.id for p in pop] == sorted(p.id for p in pop)
    assert pop[3].num_samples == 13
    assert all(not p.genotype.stability_assumed for p in pop)


def test_ingest_empty(tmp_path):
    with pytest.raises(EmptyPopulation):
        ingest_population(tmp_path)


def test_ingest_regenerates_missing_sidecar(tmp_path, caplog):
    write_population(tmp_path, 5)
    sidecar_path(tmp_path / "model-02.ckpt").unlink()
    with caplog.at_level(logging.WARNING):
        pop = ingest_population(tmp_path)
    assert len(pop) == 5 and "model-02" in caplog.text
    assert pop[2].genotype.stability_assumed
    assert sidecar_path(tmp_path / "model-02.ckpt").exists()


def test_ingest_regenerates_stale_sidecar(tmp_path, caplog):
    write_population(tmp_path, 3)
    write_checkpoint(np.full(20, 0.5), None, "model-01", tmp_path / "model-01.ckpt", overwrite=True)
    with caplog.at_level(logging.WARNING):
        pop = ingest_population(tmp_path)
    assert "does not match" in caplog.text
    assert pop[1].genotype.sparsity == pytest.approx(0.0, abs=1e-12)


def test_ingest_mixed_lengths(tmp_path):
    write_population(tmp_path, 3)
    write_checkpoint(np.ones(7), None, "zz", tmp_path / "zz.ckpt")
    with pytest.raises(ArchitectureMismatch):
        ingest_population(tmp_path)


def test_ingest_orders_by_model_id_not_filename(tmp_path):
    rng = np.random.default_rng(3)
    for name, mid in [("a.ckpt", "m3"), ("b.ckpt", "m1"), ("c.ckpt", "m2")]:
        write_model(rng.normal(size=4), None, mid, tmp_path / name)
    assert [p.id for p in ingest_population(tmp_path)] == ["m1", "m2", "m3"]
