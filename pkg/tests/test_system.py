import numpy as np
import pytest
import torch

from turbolab.interleaving import apply, apply_inverse
from turbolab.networks import ConvStackConfig, DccnnConfig, ModelParameters
from turbolab.signals import bpsk_map, extrinsic, hard_decision
from turbolab.system import (
    SerialTurboAE,
    bundle_hash,
    encode,
    inner_soft_pass,
    iterative_decode,
    load_bundle,
    new_system,
    outer_codeword,
    outer_soft_pass,
    retarget_length,
    save_bundle,
)

TINY_ENC = ConvStackConfig(layers=2, feature_maps=8, kernel=5)
TINY_DEC = DccnnConfig(blocks=((8, 6, 5), (8, 6, 5)), layers_per_block=2)


@pytest.fixture(scope="module")
def tiny_system():
    return new_system(k=64, encoder_cfg=TINY_ENC, decoder_cfg=TINY_DEC, n_iters=3, seed=0).eval()


def random_bits(shape, seed=0):
    return torch.from_numpy(np.random.default_rng(seed).integers(0, 2, shape))


class TestEncode:
    @pytest.mark.parametrize(
        "mode,threshold",
        [("training_real", None), ("training_clipped", 1.2), ("inference_binary", None)],
    )
    def test_unit_power_all_modes(self, tiny_system, mode, threshold):
        u = random_bits((8, 64), 1)
        with torch.no_grad():
            x = encode(tiny_system, u, mode=mode, clip_threshold=threshold)
        assert x.shape == (8, 128)
        assert float((x.pow(2).mean(dim=-1) - 1).abs().max()) < 1e-6
        assert float(x.mean(dim=-1).abs().max()) < 1e-6

    def test_inference_codeword_is_antipodal(self, tiny_system):
        u = random_bits((4, 64), 2)
        with torch.no_grad():
            c = outer_codeword(tiny_system.outer_enc, bpsk_map(u), "inference_binary")
        assert bool(((c == 1.0) | (c == -1.0)).all())

    def test_single_block_shape(self, tiny_system):
        with torch.no_grad():
            x = encode(tiny_system, random_bits(64, 3))
        assert x.shape == (128,)

    def test_mode_threshold_mismatch(self, tiny_system):
        u = random_bits((2, 64), 4)
        with pytest.raises(ValueError):
            encode(tiny_system, u, mode="training_real", clip_threshold=1.0)
        with pytest.raises(ValueError):
            encode(tiny_system, u, mode="training_clipped")
        with pytest.raises(ValueError):
            encode(tiny_system, u, mode="bogus")

    def test_wrong_length_rejected(self, tiny_system):
        with pytest.raises(ValueError):
            encode(tiny_system, random_bits((2, 63), 5))


class TestIterativeDecode:
    def test_single_iteration_is_one_pass(self, tiny_system):
        u = random_bits((4, 64), 6)
        with torch.no_grad():
            y = encode(tiny_system, u)
            res = iterative_decode(tiny_system, y, n_iters=1)
            # manual single inner-then-outer pass with zero a-priori
            la = torch.zeros_like(y)
            lt = inner_soft_pass(tiny_system.inner_dec, y, la)
            le = extrinsic(lt, la)
            la_nat = apply_inverse(tiny_system.interleaver, le)
            lt_u, _ = outer_soft_pass(tiny_system.outer_dec, la_nat)
        assert res.iterations_run == 1
        assert torch.equal(res.llr_u, lt_u)

    def test_hard_decision_contract(self, tiny_system):
        u = random_bits((4, 64), 7)
        with torch.no_grad():
            res = iterative_decode(tiny_system, encode(tiny_system, u), n_iters=2)
        assert torch.equal(res.u_hat, hard_decision(res.llr_u))
        assert res.u_hat.shape == (4, 64)

    def test_deterministic(self, tiny_system):
        with torch.no_grad():
            y = encode(tiny_system, random_bits((3, 64), 8))
            r1 = iterative_decode(tiny_system, y, n_iters=3)
            r2 = iterative_decode(tiny_system, y, n_iters=3)
        assert torch.equal(r1.llr_u, r2.llr_u)

    def test_extrinsic_bookkeeping_every_half_iteration(self, tiny_system):
        with torch.no_grad():
            y = encode(tiny_system, random_bits((2, 64), 9))
            res = iterative_decode(tiny_system, y, n_iters=3, record=True)
            assert len(res.exchanges) == 6
            for rec in res.exchanges:
                if rec.role == "inner":
                    total = inner_soft_pass(tiny_system.inner_dec, y, rec.apriori)
                else:
                    _, total = outer_soft_pass(tiny_system.outer_dec, rec.apriori)
                assert torch.equal(rec.extrinsic, extrinsic(total, rec.apriori))

    def test_per_iteration_llrs_recorded(self, tiny_system):
        with torch.no_grad():
            y = encode(tiny_system, random_bits((2, 64), 10))
            res = iterative_decode(tiny_system, y, n_iters=4)
        assert len(res.per_iteration_llrs) == 4
        assert torch.equal(res.per_iteration_llrs[-1], res.llr_u)

    def test_wrong_length_rejected(self, tiny_system):
        with pytest.raises(ValueError):
            iterative_decode(tiny_system, torch.zeros(2, 127))

    def test_invalid_iters(self, tiny_system):
        with pytest.raises(ValueError):
            iterative_decode(tiny_system, torch.zeros(2, 128), n_iters=0)


class TestRetarget:
    def test_identity_retarget(self, tiny_system):
        same = retarget_length(tiny_system, 64)
        assert same.outer_enc is tiny_system.outer_enc
        assert same.interleaver == tiny_system.interleaver
        assert same.k == 64 and same.n == 128

    def test_shapes_at_1024(self, tiny_system):
        longer = retarget_length(tiny_system, 1024)
        u = random_bits((2, 1024), 11)
        with torch.no_grad():
            x = encode(longer, u)
            res = iterative_decode(longer, x, n_iters=1)
        assert x.shape == (2, 2048)
        assert res.u_hat.shape == (2, 1024)

    def test_unsupported_interleaver_size(self, tiny_system):
        with pytest.raises(ValueError, match="nearest supported"):
            retarget_length(tiny_system, 50)

    def test_tiled_input_gives_tiled_codeword(self, tiny_system):
        # circular convolutions: tiling the message must tile the codeword,
        # so interior positions match the short-block outputs exactly
        u = random_bits(64, 12)
        u_long = u.repeat(16)
        longer = retarget_length(tiny_system, 1024)
        with torch.no_grad():
            c_short = outer_codeword(tiny_system.outer_enc, bpsk_map(u[None]), "inference_binary")
            c_long = outer_codeword(longer.outer_enc, bpsk_map(u_long[None]), "inference_binary")
        assert torch.equal(c_long.reshape(16, 128), c_short.expand(16, 128))


class TestBundle:
    def test_round_trip(self, tiny_system, tmp_path):
        save_bundle(tiny_system, tmp_path / "bundle")
        loaded = load_bundle(tmp_path / "bundle")
        u = random_bits((3, 64), 13)
        with torch.no_grad():
            y = encode(tiny_system, u)
            r1 = iterative_decode(tiny_system, y, n_iters=2)
            r2 = iterative_decode(loaded, y, n_iters=2)
        assert loaded.k == tiny_system.k and loaded.n_iters == tiny_system.n_iters
        assert torch.equal(r1.llr_u, r2.llr_u)

    def test_hash_changes_with_checkpoint(self, tiny_system, tmp_path):
        save_bundle(tiny_system, tmp_path / "a")
        h1 = bundle_hash(tmp_path / "a")
        with torch.no_grad():
            next(tiny_system.inner_enc.parameters()).add_(0.25)
        try:
            save_bundle(tiny_system, tmp_path / "b")
        finally:
            with torch.no_grad():
                next(tiny_system.inner_enc.parameters()).sub_(0.25)
        assert bundle_hash(tmp_path / "b") != h1

    def test_invariants_checked(self, tiny_system):
        with pytest.raises(ValueError):
            SerialTurboAE(
                k=64,
                n=130,
                n_iters=2,
                interleaver=tiny_system.interleaver,
                outer_enc=tiny_system.outer_enc,
                inner_enc=tiny_system.inner_enc,
                outer_dec=tiny_system.outer_dec,
                inner_dec=tiny_system.inner_dec,
            )
