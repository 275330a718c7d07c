import numpy as np
import pytest

from genrb.artifact import crc64, from_bytes, load_rom, read_header, save_rom, to_bytes
from genrb.errors import ArtifactError
from genrb.rom import offline_build, online_solve


@pytest.fixture(scope="module")
def rm(convdiff_small):
    pts = np.array([[0, 0], [50, 50], [50, 0], [0, 50], [20, 30]], dtype=float)
    return offline_build(convdiff_small, pts, "softplus", 3, 9, 12)


def test_crc64_check_value():
    assert crc64(b"123456789") == 0x995DC9BBDF1939FA
    assert crc64(b"") == 0


def test_round_trip_bitwise(rm, tmp_path):
    p1, p2 = tmp_path / "a.grb", tmp_path / "b.grb"
    save_rom(rm, p1)
    back = load_rom(p1)
    save_rom(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    for mu in ([3.0, 4.0], [49.0, 17.0]):
        assert online_solve(back, mu).output == online_solve(rm, mu).output
    np.testing.assert_array_equal(back.phi, rm.phi)
    assert back.theta_names == rm.theta_names and back.box == rm.box


def test_header(rm, tmp_path):
    p = tmp_path / "m.grb"
    save_rom(rm.without_bases(), p)
    h = read_header(p)
    assert h["format_version"] == 1 and h["Q"] == 3
    assert h["M1"] == rm.M1 and h["M2"] == rm.M2 and h["N"] == 5
    assert h["flags"]["bases"] is False
    assert h["theta"] == ["1", "mu1", "mu2"]
    assert not load_rom(p).has_bases


def test_truncated_and_corrupt(rm):
    blob = to_bytes(rm)
    with pytest.raises(ArtifactError):
        from_bytes(blob[:-20])
    bad = bytearray(blob)
    bad[-100] ^= 0xFF
    with pytest.raises(ArtifactError, match="checksum"):
        from_bytes(bytes(bad))
    with pytest.raises(ArtifactError, match="magic"):
        from_bytes(b"XXXX" + blob[4:])
    with pytest.raises(ArtifactError):
        load_rom("/nonexistent/model.grb")


def test_wrong_version(rm):
    blob = to_bytes(rm)
    blob = blob.replace(b'"format_version":1', b'"format_version":9')
    with pytest.raises(ArtifactError, match="version"):
        from_bytes(blob)
