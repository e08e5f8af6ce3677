"""Model archive format: round trips, corruption detection, kind checks."""

import numpy as np
import pytest

from ringadvisory import advisory, archive, dti


def _policy(kind="pcp", seed=0):
    return advisory.make_policy(kind, 50, np.random.default_rng(seed))


def test_policy_round_trip_byte_identical(tmp_path):
    policy = _policy()
    path = tmp_path / "p.rap"
    archive.save_policy(policy, path)
    loaded = archive.load_policy(path)
    assert loaded.kind == "pcp" and loaded.delta == 50
    for a, b in zip(policy.net.parameters(), loaded.net.parameters()):
        assert a.data.tobytes() == b.data.tobytes()


def test_residual_round_trip_reproduces_actions(tmp_path):
    policy = _policy("rp", seed=3)
    path = tmp_path / "rp.rap"
    archive.save_policy(policy, path)
    loaded = archive.load_policy(path)
    obs = np.array([0.3, 0.2, 0.1])
    a = advisory.residual_act(policy, obs, 8.0, rng=np.random.default_rng(1))
    b = advisory.residual_act(loaded, obs, 8.0, rng=np.random.default_rng(1))
    assert a == b


def test_osl_round_trip(tmp_path):
    path = tmp_path / "osl.rap"
    archive.save_policy(advisory.make_policy("osl", 70), path)
    loaded = archive.load_policy(path)
    assert loaded.kind == "osl" and loaded.delta == 70 and loaded.net is None


def test_flipped_bit_rejected(tmp_path):
    path = tmp_path / "p.rap"
    archive.save_policy(_policy(), path)
    raw = bytearray(path.read_bytes())
    raw[len(raw) // 2] ^= 0x01
    path.write_bytes(bytes(raw))
    with pytest.raises(archive.ArchiveError):
        archive.load_policy(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.rap"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(archive.ArchiveError):
        archive.load_archive(path)


def test_kind_mismatch_rejected(tmp_path):
    path = tmp_path / "p.rap"
    archive.save_policy(_policy("pcp"), path)
    with pytest.raises(archive.ArchiveError):
        archive.load_policy(path, expect_kind="rp")


def test_layout_version_mismatch_rejected(tmp_path):
    path = tmp_path / "p.rap"
    policy = _policy()
    policy.layout_version = "v0:something-else"
    archive.save_policy(policy, path)
    with pytest.raises(archive.ArchiveError):
        archive.load_policy(path)


def test_dti_round_trip_identical_inference(tmp_path):
    model = dti.DtiModel(seed=5, hidden=4, window=6)
    path = tmp_path / "m.rad"
    archive.save_dti(model, path)
    loaded = archive.load_dti(path)
    x = np.random.default_rng(0).uniform(0, 1, (2, 6, 3))
    _, mu_a, sig_a = model.infer(x)
    _, mu_b, sig_b = loaded.infer(x)
    assert np.array_equal(mu_a, mu_b) and np.array_equal(sig_a, sig_b)


def test_dti_archive_not_a_policy(tmp_path):
    path = tmp_path / "m.rad"
    archive.save_dti(dti.DtiModel(seed=0, hidden=4, window=6), path)
    with pytest.raises(archive.ArchiveError):
        archive.load_policy(path)
    # and the reverse direction
    p_path = tmp_path / "p.rap"
    archive.save_policy(_policy(), p_path)
    with pytest.raises(archive.ArchiveError):
        archive.load_dti(p_path)


def test_header_extra_preserved(tmp_path):
    path = tmp_path / "p.rap"
    archive.save_policy(_policy(), path, extra={"note": 7})
    header, _ = archive.load_archive(path)
    assert header["extra"] == {"note": 7}
