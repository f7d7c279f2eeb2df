"""Binary container round-trips and corruption diagnostics."""

import numpy as np
import pytest

from neurodecode import eegb
from neurodecode.errors import (
    BadMagicError,
    DataError,
    MetaMismatchError,
    TruncatedPayloadError,
    VersionMismatchError,
)


def _tensor(seed=0, shape=(5, 3, 4), dtype=np.float32):
    return np.random.default_rng(seed).standard_normal(shape).astype(dtype)


def _meta(n):
    return [{"trial_id": i, "label": i % 2} for i in range(n)]


class TestEpochFile:
    def test_round_trip_bitwise(self, tmp_path):
        path = tmp_path / "epochs.eegb"
        t = _tensor()
        eegb.write_tensor_file(path, t, _meta(5))
        back, meta = eegb.read_tensor_file(path)
        assert back.dtype == t.dtype
        assert back.shape == t.shape
        assert np.array_equal(back.view(np.uint8), t.view(np.uint8))
        assert meta == _meta(5)

    def test_round_trip_float64(self, tmp_path):
        path = tmp_path / "epochs.eegb"
        t = _tensor(dtype=np.float64)
        eegb.write_tensor_file(path, t, _meta(5))
        back, _ = eegb.read_tensor_file(path)
        assert back.dtype == np.float64
        assert np.array_equal(back, t)

    def test_sidecar_lives_next_to_payload(self, tmp_path):
        path = tmp_path / "epochs.eegb"
        eegb.write_tensor_file(path, _tensor(), _meta(5))
        assert eegb.sidecar_path(path).exists()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "epochs.eegb"
        eegb.write_tensor_file(path, _tensor(), _meta(5))
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(BadMagicError):
            eegb.read_tensor_file(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "epochs.eegb"
        eegb.write_tensor_file(path, _tensor(), _meta(5))
        raw = bytearray(path.read_bytes())
        raw[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(VersionMismatchError):
            eegb.read_tensor_file(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "epochs.eegb"
        eegb.write_tensor_file(path, _tensor(), _meta(5))
        raw = path.read_bytes()
        path.write_bytes(raw[:-7])
        with pytest.raises(TruncatedPayloadError):
            eegb.read_tensor_file(path)

    def test_trailing_garbage_detected(self, tmp_path):
        path = tmp_path / "epochs.eegb"
        eegb.write_tensor_file(path, _tensor(), _meta(5))
        with open(path, "ab") as fh:
            fh.write(b"\x00\x01")
        with pytest.raises(DataError):
            eegb.read_tensor_file(path)

    def test_meta_count_mismatch(self, tmp_path):
        # the raw variant stores header+event lines, so the reader stays
        # generic; the per-trial count contract belongs to the epoch layer
        path = tmp_path / "epochs.eegb"
        eegb.write_tensor_file(path, _tensor(), _meta(5))
        side = eegb.sidecar_path(path)
        lines = side.read_text().splitlines()
        side.write_text("\n".join(lines[:-1]) + "\n")
        _, meta = eegb.read_tensor_file(path)
        with pytest.raises(MetaMismatchError):
            eegb.check_meta_length(path, 5, len(meta))

    def test_missing_sidecar(self, tmp_path):
        path = tmp_path / "epochs.eegb"
        eegb.write_tensor_file(path, _tensor(), _meta(5))
        eegb.sidecar_path(path).unlink()
        with pytest.raises(DataError):
            eegb.read_tensor_file(path)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        path = tmp_path / "model.ckpt"
        tensors = {
            "param:w": _tensor(1, (4, 7), np.float64),
            "param:b": _tensor(2, (7,), np.float32),
            "buffer:running": _tensor(3, (7,), np.float64),
        }
        desc = {"arch": "eegnet", "size": "small", "seed": 3}
        eegb.save_checkpoint(path, desc, tensors)
        back_desc, back = eegb.load_checkpoint(path)
        assert back_desc == desc
        assert set(back) == set(tensors)
        for k in tensors:
            assert back[k].dtype == tensors[k].dtype
            assert np.array_equal(back[k], tensors[k])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "model.ckpt"
        eegb.save_checkpoint(path, {}, {"param:w": _tensor()})
        raw = bytearray(path.read_bytes())
        raw[:4] = b"EEGX"
        path.write_bytes(bytes(raw))
        with pytest.raises(BadMagicError):
            eegb.load_checkpoint(path)

    def test_truncation(self, tmp_path):
        path = tmp_path / "model.ckpt"
        eegb.save_checkpoint(path, {}, {"param:w": _tensor()})
        raw = path.read_bytes()
        path.write_bytes(raw[:-11])
        with pytest.raises(TruncatedPayloadError):
            eegb.load_checkpoint(path)

    def test_preserves_insertion_order(self, tmp_path):
        path = tmp_path / "model.ckpt"
        tensors = {f"param:{i}": _tensor(i, (2,)) for i in range(6)}
        eegb.save_checkpoint(path, {}, tensors)
        _, back = eegb.load_checkpoint(path)
        assert list(back) == list(tensors)
