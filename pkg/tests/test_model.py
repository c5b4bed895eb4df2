import math
import random
from types import SimpleNamespace

import numpy as np
import pytest
import torch

from vmtlab.errors import ConfigError, DataError
from vmtlab.model import (
    BOS,
    EOS,
    PAD,
    UNK,
    Batch,
    FeatureSequence,
    FeatureStore,
    Sample,
    VideoGuidedTransformer,
    Vocab,
    beam_decode,
    beam_decode_sample,
    ce_loss,
    collate,
    compute_losses,
    ctr_loss,
    decode_to_text,
    derangement,
    desk_config,
    desk_train_config,
    generate_toy_corpus,
    grad_check,
    incongruent_probe,
    load_checkpoint,
    load_model,
    lr_at,
    make_sample,
    masked_mean,
    mean_ce,
    full_config,
    read_feature,
    sample_frames,
    save_checkpoint,
    train,
    write_bundle,
    write_feature,
)
from vmtlab.model.config import ModelConfig, TrainConfig
from vmtlab.model.features import read_manifest, write_manifest

from oracles import softmax_nll


# ---------------------------------------------------------------- fixtures

def _toy_samples(corpus, src_vocab, tgt_vocab, split):
    out = []
    for r in corpus.records:
        if r.split != split:
            continue
        out.append(Sample(
            record_id=r.id,
            src_ids=tuple(src_vocab.encode(r.src.split())),
            tgt_ids=tuple(tgt_vocab.encode(r.tgt.split())),
            feats=corpus.features[r.id],
        ))
    return out


@pytest.fixture(scope="module")
def toy():
    corpus = generate_toy_corpus(seed=7, size=8)
    train_records = [r for r in corpus.records if r.split == "train"]
    src_vocab = Vocab.build([r.src.split() for r in train_records])
    tgt_vocab = Vocab.build([r.tgt.split() for r in train_records])
    return SimpleNamespace(
        corpus=corpus,
        src_vocab=src_vocab,
        tgt_vocab=tgt_vocab,
        train=_toy_samples(corpus, src_vocab, tgt_vocab, "train"),
        test=_toy_samples(corpus, src_vocab, tgt_vocab, "test-ambiguous"),
    )


def tiny_config(toy, **overrides):
    params = dict(enc_layers=1, dec_layers=1, d_model=32, d_ffn=64,
                  max_text_len=32, seed=3)
    params.update(overrides)
    return desk_config(len(toy.src_vocab), len(toy.tgt_vocab), **params)


@pytest.fixture()
def tiny_model(toy):
    return VideoGuidedTransformer(tiny_config(toy))


# ------------------------------------------------------------------ config

class TestConfig:
    def test_heads_must_divide_d_model(self):
        with pytest.raises(ConfigError, match="divisible"):
            ModelConfig(src_vocab=10, tgt_vocab=10, d_model=30, heads=4)

    def test_tau_positive(self):
        with pytest.raises(ConfigError, match="tau"):
            ModelConfig(src_vocab=10, tgt_vocab=10, tau=0.0)

    def test_alpha_non_negative(self):
        with pytest.raises(ConfigError, match="alpha"):
            ModelConfig(src_vocab=10, tgt_vocab=10, alpha=-0.1)

    def test_norm_style_fixed(self):
        with pytest.raises(ConfigError, match="post"):
            ModelConfig(src_vocab=10, tgt_vocab=10, norm_style="pre")

    def test_pooling_source_choices(self):
        with pytest.raises(ConfigError, match="pooling_source"):
            ModelConfig(src_vocab=10, tgt_vocab=10, pooling_source="decoder")

    def test_dropout_range(self):
        with pytest.raises(ConfigError, match="dropout"):
            ModelConfig(src_vocab=10, tgt_vocab=10, dropout=1.0)

    def test_profiles(self):
        desk = desk_config(10, 10)
        assert (desk.d_model, desk.dropout, desk.label_smoothing) == (64, 0.0, 0.0)
        full = full_config(10, 10)
        assert (full.d_model, full.enc_layers, full.d_feature) == (512, 6, 768)
        assert full.label_smoothing == 0.1

    def test_train_config_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(warmup_steps=0)
        with pytest.raises(ConfigError):
            TrainConfig(peak_lr=-1.0)
        assert desk_train_config(steps=5).steps == 5


# ------------------------------------------------------------------ frames

class TestSampleFrames:
    def test_short_clip_kept_whole(self):
        assert sample_frames(5, 12) == [0, 1, 2, 3, 4]

    def test_exact_fit(self):
        assert sample_frames(12, 12) == list(range(12))

    def test_double_length_takes_stratum_centers(self):
        assert sample_frames(24, 12) == list(range(1, 24, 2))

    def test_awkward_length_stays_strictly_increasing(self):
        picked = sample_frames(13, 12)
        assert len(picked) == 12
        assert all(a < b for a, b in zip(picked, picked[1:]))
        assert picked[0] >= 0 and picked[-1] <= 12

    def test_errors(self):
        with pytest.raises(ValueError):
            sample_frames(0, 12)
        with pytest.raises(ValueError):
            sample_frames(5, 0)


# ------------------------------------------------------------------- vocab

class TestVocab:
    def test_reserved_tokens_rejected(self):
        with pytest.raises(DataError, match="reserved"):
            Vocab(["<pad>"])

    def test_duplicates_rejected(self):
        with pytest.raises(DataError, match="duplicate"):
            Vocab(["a", "a"])

    def test_special_ids(self):
        v = Vocab(["a"])
        assert (PAD, BOS, EOS, UNK) == (0, 1, 2, 3)
        assert v.stoi["a"] == 4

    def test_unknown_maps_to_unk(self):
        v = Vocab(["a"])
        assert v.encode(["a", "zzz"]) == [4, UNK]

    def test_decode_strips_specials(self):
        v = Vocab(["a"])
        assert v.decode([BOS, 4, EOS, PAD]) == ["a"]
        assert v.decode([BOS, 4], strip_specials=False) == ["<bos>", "a"]

    def test_build_sorts_and_dedups(self):
        v = Vocab.build([["b", "a"], ["a", "c"]])
        assert v.itos[4:] == ["a", "b", "c"]

    def test_save_load_round_trip(self, tmp_path):
        v = Vocab(["x", "y"])
        path = tmp_path / "vocab.json"
        with open(path, "w") as f:
            v.save(f)
        with open(path) as f:
            again = Vocab.load(f)
        assert again.itos == v.itos


# ---------------------------------------------------------------- features

class TestFeatures:
    def test_round_trip_exact(self, tmp_path):
        data = np.random.default_rng(0).normal(size=(5, 4)).astype(np.float32)
        write_feature(str(tmp_path), "clip1", data)
        seq = read_feature(str(tmp_path), "clip1")
        assert seq.frames == 5 and seq.dim == 4
        assert np.array_equal(seq.data, data)

    def test_missing_metadata(self, tmp_path):
        with pytest.raises(DataError, match="missing feature metadata"):
            read_feature(str(tmp_path), "nope")

    def test_corrupt_metadata(self, tmp_path):
        (tmp_path / "c.meta.json").write_text("{oops")
        with pytest.raises(DataError, match="invalid metadata"):
            read_feature(str(tmp_path), "c")

    def test_size_mismatch(self, tmp_path):
        data = np.zeros((3, 4), dtype=np.float32)
        write_feature(str(tmp_path), "c", data)
        (tmp_path / "c.meta.json").write_text('{"frames": 9, "dim": 4}')
        with pytest.raises(DataError, match="expected 36"):
            read_feature(str(tmp_path), "c")

    def test_non_finite_rejected(self):
        bad = np.full((2, 2), np.nan, dtype=np.float32)
        with pytest.raises(DataError, match="non-finite"):
            FeatureSequence(video_id="v", frames=2, dim=2, data=bad)

    def test_manifest_round_trip_and_duplicates(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        with open(path, "w") as f:
            write_manifest({"r1": "a.f32", "r2": "b.f32"}, f)
        with open(path) as f:
            assert read_manifest(f) == {"r1": "a.f32", "r2": "b.f32"}
        path.write_text('{"id": "r1", "path": "a.f32"}\n{"id": "r1", "path": "b.f32"}\n')
        with open(path) as f:
            with pytest.raises(DataError, match="duplicate"):
                read_manifest(f)

    def test_store_lookup(self, tmp_path):
        data = np.ones((2, 3), dtype=np.float32)
        raw = write_feature(str(tmp_path), "clip9", data)
        manifest = tmp_path / "manifest.jsonl"
        with open(manifest, "w") as f:
            write_manifest({"rec9": raw}, f)
        store = FeatureStore.open(str(tmp_path), str(manifest))
        assert store.get("rec9").frames == 2
        with pytest.raises(DataError, match="no features"):
            store.get("other")


# ---------------------------------------------------------------- batching

class TestBatching:
    def test_collate_layout(self, toy):
        batch = collate(toy.train[:3])
        n = 3
        assert len(batch) == n
        assert batch.tgt_in[:, 0].tolist() == [BOS] * n
        for i, s in enumerate(toy.train[:3]):
            t = len(s.tgt_ids)
            assert batch.tgt_out[i, t].item() == EOS
            assert batch.tgt_in[i, 1 : t + 1].tolist() == list(s.tgt_ids)
            assert batch.tgt_mask[i].sum().item() == t + 1
            assert batch.src_mask[i].sum().item() == len(s.src_ids)
            assert batch.feat_mask[i].sum().item() == s.feats.shape[0]

    def test_collate_empty(self):
        with pytest.raises(DataError, match="empty batch"):
            collate([])

    def test_collate_dim_mismatch_names_record(self, toy):
        bad = Sample("oddball", (4,), (4,), np.zeros((2, 3), dtype=np.float32))
        with pytest.raises(DataError, match="oddball"):
            collate([toy.train[0], bad])

    def test_to_converts_features_only(self, toy):
        batch = collate(toy.train[:2]).to(torch.float64)
        assert batch.feats.dtype == torch.float64
        assert batch.src_ids.dtype == torch.long

    def test_make_sample_empty_source_names_record(self, toy, tmp_path):
        from vmtlab.corpus import CorpusRecord
        rec = CorpusRecord(id="empty1", video_id="v", clip_start_ms=0,
                           clip_end_ms=10, src="   ", tgt="w00")
        store = FeatureStore(str(tmp_path), {"empty1": "x.f32"})
        with pytest.raises(DataError, match="empty1.*empty source"):
            make_sample(rec, toy.src_vocab, toy.tgt_vocab, store, 12)


# ------------------------------------------------------------- transformer

class TestEmbedInputs:
    def test_concat_is_video_first(self, toy, tiny_model):
        batch = collate(toy.train[:2])
        x, mask, video_len = tiny_model.embed_inputs(
            batch.feats, batch.feat_mask, batch.src_ids, batch.src_mask)
        frames = batch.feats.shape[1]
        assert video_len == frames
        assert x.shape == (2, frames + batch.src_ids.shape[1], 32)
        assert mask.shape == (2, frames + batch.src_ids.shape[1])
        assert torch.equal(mask[:, :frames], batch.feat_mask)

    def test_three_frames_four_tokens_gives_seven(self, toy, tiny_model):
        feats = torch.zeros(1, 3, 16)
        feat_mask = torch.ones(1, 3, dtype=torch.bool)
        src = torch.full((1, 4), 4, dtype=torch.long)
        src_mask = torch.ones(1, 4, dtype=torch.bool)
        x, mask, video_len = tiny_model.embed_inputs(feats, feat_mask, src, src_mask)
        assert x.shape[1] == 7 and video_len == 3

    def test_feature_dim_mismatch(self, toy, tiny_model):
        feats = torch.zeros(1, 3, 8)
        with pytest.raises(DataError, match="feature dim"):
            tiny_model.embed_inputs(
                feats, torch.ones(1, 3, dtype=torch.bool),
                torch.full((1, 2), 4, dtype=torch.long),
                torch.ones(1, 2, dtype=torch.bool))

    def test_empty_source_rejected(self, toy, tiny_model):
        with pytest.raises(DataError, match="empty source"):
            tiny_model.embed_inputs(
                torch.zeros(1, 2, 16), torch.ones(1, 2, dtype=torch.bool),
                torch.full((1, 2), PAD, dtype=torch.long),
                torch.zeros(1, 2, dtype=torch.bool))

    def test_too_many_frames(self, toy, tiny_model):
        frames = tiny_model.config.max_frames + 1
        with pytest.raises(DataError, match="max_frames"):
            tiny_model.embed_inputs(
                torch.zeros(1, frames, 16), torch.ones(1, frames, dtype=torch.bool),
                torch.full((1, 2), 4, dtype=torch.long),
                torch.ones(1, 2, dtype=torch.bool))

    def test_fully_masked_video_row_rejected(self, toy, tiny_model):
        feat_mask = torch.tensor([[False, False]])
        with pytest.raises(DataError, match="at least one video frame"):
            tiny_model.embed_inputs(
                torch.zeros(1, 2, 16), feat_mask,
                torch.full((1, 2), 4, dtype=torch.long),
                torch.ones(1, 2, dtype=torch.bool))


class TestMaskedMean:
    def test_hand_computation(self):
        states = torch.tensor([[[1.0, 2.0], [3.0, 4.0], [100.0, 100.0]]])
        mask = torch.tensor([[True, True, False]])
        assert torch.allclose(masked_mean(states, mask), torch.tensor([[2.0, 3.0]]))

    def test_duplicated_rows_average_to_themselves(self):
        row = torch.randn(1, 1, 8)
        stacked = row.expand(1, 5, 8)
        mask = torch.ones(1, 5, dtype=torch.bool)
        assert torch.allclose(masked_mean(stacked, mask), row.squeeze(1))

    def test_fully_masked_row_rejected(self):
        with pytest.raises(DataError, match="fully masked"):
            masked_mean(torch.zeros(1, 2, 4), torch.zeros(1, 2, dtype=torch.bool))


class TestPooling:
    def test_single_position_pools_to_itself_before_heads(self, toy):
        model = VideoGuidedTransformer(tiny_config(toy, pooling_source="input_embedding"))
        model.eval()
        feats = torch.randn(1, 1, 16)
        feat_mask = torch.ones(1, 1, dtype=torch.bool)
        src = torch.tensor([[4]])
        src_mask = torch.ones(1, 1, dtype=torch.bool)
        with torch.no_grad():
            enc_out, mask, video_len, enc_in = model.encode(feats, feat_mask, src, src_mask)
            pooled = model.pool_and_project(enc_out, enc_in, mask, video_len)
            assert torch.allclose(pooled.video, model.video_head(enc_in[:, 0]))
            assert torch.allclose(pooled.text, model.text_head(enc_in[:, 1]))

    def test_masked_padding_never_leaks_into_pooling(self, toy, tiny_model):
        tiny_model.eval()
        sample = toy.train[0]
        alone = collate([sample])
        padded = collate([sample, toy.train[1]])
        with torch.no_grad():
            out_a = tiny_model.encode(alone.feats, alone.feat_mask,
                                      alone.src_ids, alone.src_mask)
            pooled_a = tiny_model.pool_and_project(out_a[0], out_a[3], out_a[1], out_a[2])
            out_b = tiny_model.encode(padded.feats, padded.feat_mask,
                                      padded.src_ids, padded.src_mask)
            pooled_b = tiny_model.pool_and_project(out_b[0], out_b[3], out_b[1], out_b[2])
        assert torch.allclose(pooled_a.video[0], pooled_b.video[0], atol=1e-5)
        assert torch.allclose(pooled_a.text[0], pooled_b.text[0], atol=1e-5)


# ------------------------------------------------------------------ losses

class TestCtrLoss:
    def test_single_sample_is_exactly_zero(self):
        text = torch.randn(1, 8, requires_grad=True)
        video = torch.randn(1, 8)
        loss = ctr_loss(text, video, tau=0.5)
        assert loss.item() == 0.0
        assert loss.grad_fn is not None  # stays connected to the graph

    def test_non_negative(self):
        g = torch.Generator().manual_seed(0)
        for _ in range(10):
            text = torch.randn(4, 8, generator=g)
            video = torch.randn(4, 8, generator=g)
            assert ctr_loss(text, video, tau=0.1).item() >= 0.0

    def test_orthonormal_pair_closed_form(self):
        eye = torch.eye(2)
        loss = ctr_loss(eye, eye, tau=1.0)
        assert loss.item() == pytest.approx(2 * math.log(1 + math.exp(-1)), abs=1e-7)

    def test_cosine_scale_invariance(self):
        g = torch.Generator().manual_seed(1)
        text = torch.randn(5, 16, generator=g)
        video = torch.randn(5, 16, generator=g)
        base = ctr_loss(text, video, tau=0.07)
        scaled = ctr_loss(text * 37.0, video * 0.004, tau=0.07)
        assert abs(base.item() - scaled.item()) < 1e-4

    def test_tiny_temperature_stays_finite(self):
        g = torch.Generator().manual_seed(2)
        text = torch.randn(6, 8, generator=g)
        video = torch.randn(6, 8, generator=g)
        assert math.isfinite(ctr_loss(text, video, tau=0.002).item())

    def test_zero_norm_rejected(self):
        text = torch.zeros(2, 4)
        video = torch.ones(2, 4)
        with pytest.raises(DataError, match="zero-norm"):
            ctr_loss(text, video, tau=1.0)

    def test_shape_mismatch(self):
        with pytest.raises(DataError, match="matching shapes"):
            ctr_loss(torch.ones(2, 4), torch.ones(2, 8), tau=1.0)

    def test_empty_batch(self):
        with pytest.raises(DataError, match="empty"):
            ctr_loss(torch.ones(0, 4), torch.ones(0, 4), tau=1.0)


class TestCeLoss:
    def test_uniform_logits_give_log_vocab(self):
        logits = torch.zeros(1, 3, 8)
        targets = torch.tensor([[4, 5, 6]])
        loss = ce_loss(logits, targets)
        assert loss.item() == pytest.approx(math.log(8), abs=1e-7)
        assert math.log(8) == pytest.approx(2.0794415416798357)

    def test_sum_is_mean_times_tokens(self):
        g = torch.Generator().manual_seed(3)
        logits = torch.randn(2, 4, 9, generator=g)
        targets = torch.tensor([[4, 5, PAD, PAD], [6, 7, 8, PAD]])
        mean = ce_loss(logits, targets, reduction="mean")
        total = ce_loss(logits, targets, reduction="sum")
        assert total.item() == pytest.approx(mean.item() * 5, rel=1e-6)

    def test_matches_direct_probability_arithmetic(self):
        g = torch.Generator().manual_seed(4)
        logits = torch.randn(1, 3, 6, generator=g)
        targets = torch.tensor([[2, 4, 5]])
        want = sum(
            softmax_nll(logits[0, t].tolist(), int(targets[0, t]))
            for t in range(3)
        ) / 3
        got = ce_loss(logits, targets)
        assert got.item() == pytest.approx(want, rel=1e-6)

    def test_label_smoothing_mixes_uniform_term(self):
        g = torch.Generator().manual_seed(5)
        logits = torch.randn(1, 2, 7, generator=g)
        targets = torch.tensor([[3, 4]])
        eps = 0.1
        logp = torch.log_softmax(logits, dim=-1)[0]
        want = 0.0
        for t in range(2):
            nll = -logp[t, targets[0, t]].item()
            uniform = -logp[t].mean().item()
            want += (1 - eps) * nll + eps * uniform
        want /= 2
        got = ce_loss(logits, targets, label_smoothing=eps)
        assert got.item() == pytest.approx(want, rel=1e-6)

    def test_all_pad_targets_rejected(self):
        with pytest.raises(DataError, match="no non-pad"):
            ce_loss(torch.zeros(1, 2, 5), torch.full((1, 2), PAD))

    def test_unknown_reduction(self):
        with pytest.raises(ValueError):
            ce_loss(torch.zeros(1, 1, 5), torch.tensor([[4]]), reduction="max")


class TestCombinedLoss:
    @pytest.mark.parametrize("alpha", [0.0, 0.5, 2.0])
    def test_total_is_ce_plus_alpha_ctr(self, toy, alpha):
        model = VideoGuidedTransformer(tiny_config(toy, alpha=alpha))
        total, breakdown = compute_losses(model, collate(toy.train[:4]))
        # the graph combines in float32, so the detached floats recombine
        # only to float32 precision
        assert breakdown.total == pytest.approx(
            breakdown.ce + alpha * breakdown.ctr, rel=1e-6)
        assert total.item() == pytest.approx(breakdown.total)

    def test_alpha_zero_total_equals_ce_exactly(self, toy):
        model = VideoGuidedTransformer(tiny_config(toy, alpha=0.0))
        _, breakdown = compute_losses(model, collate(toy.train[:4]))
        assert breakdown.total == breakdown.ce

    @pytest.mark.parametrize("alpha,expect_zero", [(0.0, True), (1.0, False)])
    def test_zero_features_head_grads_follow_alpha(self, toy, alpha, expect_zero):
        model = VideoGuidedTransformer(tiny_config(toy, alpha=alpha))
        batch = collate(toy.train[:4])
        batch = Batch(**{**batch.__dict__, "feats": torch.zeros_like(batch.feats)})
        total, _ = compute_losses(model, batch)
        total.backward()
        grads = [p.grad for p in model.video_head.parameters()]
        assert all(g is not None for g in grads)
        if expect_zero:
            assert all(torch.all(g == 0) for g in grads)
        else:
            assert any(torch.any(g != 0) for g in grads)


# ------------------------------------------------------------------ decode

def _greedy(model, sample, max_len):
    model.eval()
    with torch.no_grad():
        batch = collate([sample])
        enc_out, enc_mask, _, _ = model.encode(
            batch.feats, batch.feat_mask, batch.src_ids, batch.src_mask)
        ids = [BOS]
        for _ in range(max_len):
            tgt_in = torch.tensor([ids])
            logits = model.decode(enc_out, enc_mask, tgt_in,
                                  torch.ones_like(tgt_in, dtype=torch.bool))
            logp = torch.log_softmax(logits[0, -1], dim=-1)
            logp[PAD] = -math.inf
            logp[BOS] = -math.inf
            tok = int(logp.argmax())
            ids.append(tok)
            if tok == EOS:
                break
    return tuple(t for t in ids if t not in (BOS, EOS))


class TestDecode:
    def test_beam_one_equals_greedy(self, toy, tiny_model):
        for sample in toy.train[:3]:
            result = beam_decode_sample(tiny_model, sample, beam_size=1, max_len=8)
            assert result.token_ids == _greedy(tiny_model, sample, 8)

    def test_decode_is_deterministic(self, toy, tiny_model):
        a = beam_decode_sample(tiny_model, toy.train[0], beam_size=4, max_len=8)
        b = beam_decode_sample(tiny_model, toy.train[0], beam_size=4, max_len=8)
        assert a == b

    def test_batch_decode_matches_per_sample(self, toy, tiny_model):
        batched = beam_decode(tiny_model, toy.train[:3], beam_size=2, max_len=6)
        singles = [beam_decode_sample(tiny_model, s, beam_size=2, max_len=6)
                   for s in toy.train[:3]]
        assert batched == singles

    def test_truncation_flag(self, toy, tiny_model):
        with torch.no_grad():
            tiny_model.out_proj.bias[EOS] = -100.0
        result = beam_decode_sample(tiny_model, toy.train[0], beam_size=2, max_len=3)
        assert result.truncated
        assert len(result.token_ids) == 3

    def test_immediate_eos_is_not_truncated(self, toy, tiny_model):
        with torch.no_grad():
            tiny_model.out_proj.bias[EOS] = 100.0
        result = beam_decode_sample(tiny_model, toy.train[0], beam_size=2, max_len=5)
        assert not result.truncated
        assert result.token_ids == ()

    def test_score_is_a_log_probability(self, toy, tiny_model):
        result = beam_decode_sample(tiny_model, toy.train[0], beam_size=2, max_len=6)
        assert result.score <= 0.0

    def test_bad_beam_size(self, toy, tiny_model):
        with pytest.raises(ValueError):
            beam_decode_sample(tiny_model, toy.train[0], beam_size=0)

    def test_decode_to_text(self, toy, tiny_model):
        result = beam_decode_sample(tiny_model, toy.train[0], beam_size=1, max_len=4)
        text = decode_to_text(result, toy.tgt_vocab)
        assert isinstance(text, str)
        assert text == " ".join(toy.tgt_vocab.decode(result.token_ids))


# -------------------------------------------------------------- checkpoint

class TestCheckpoint:
    def test_round_trip_bit_identical(self, toy, tiny_model, tmp_path):
        path = tmp_path / "model.bin"
        save_checkpoint(path, tiny_model)
        again = load_model(path)
        assert again.config.as_dict() == tiny_model.config.as_dict()
        state_a = tiny_model.state_dict()
        state_b = again.state_dict()
        assert set(state_a) == set(state_b)
        for name in state_a:
            assert torch.equal(state_a[name], state_b[name]), name

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTCKPT0" + b"\x00" * 64)
        with pytest.raises(DataError, match="bad magic"):
            load_checkpoint(path)

    def test_truncated_file(self, toy, tiny_model, tmp_path):
        path = tmp_path / "model.bin"
        save_checkpoint(path, tiny_model)
        blob = path.read_bytes()
        path.write_bytes(blob[:-17])
        with pytest.raises(DataError, match="truncated"):
            load_checkpoint(path)

    def test_trailing_bytes(self, toy, tiny_model, tmp_path):
        path = tmp_path / "model.bin"
        save_checkpoint(path, tiny_model)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(DataError, match="trailing"):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_checkpoint(tmp_path / "nope.bin")


# ---------------------------------------------------------------- training

class TestSchedule:
    def test_warmup_and_decay_values(self):
        assert lr_at(100, 3e-3, 200) == pytest.approx(1.5e-3)
        assert lr_at(200, 3e-3, 200) == pytest.approx(3e-3)
        assert lr_at(800, 3e-3, 200) == pytest.approx(1.5e-3)

    def test_peak_is_at_warmup(self):
        peak = lr_at(200, 3e-3, 200)
        for step in (1, 50, 199, 201, 1000, 10000):
            assert lr_at(step, 3e-3, 200) <= peak

    def test_step_below_one_rejected(self):
        with pytest.raises(ValueError):
            lr_at(0, 3e-3, 200)


class TestTrain:
    def test_same_seed_runs_are_bit_identical(self, toy):
        cfg = desk_train_config(steps=10, batch_size=4, log_every=5, seed=11)
        models = []
        for _ in range(2):
            model = VideoGuidedTransformer(tiny_config(toy))
            train(model, toy.train, cfg)
            models.append(model)
        state_a, state_b = models[0].state_dict(), models[1].state_dict()
        for name in state_a:
            assert torch.equal(state_a[name], state_b[name]), name

    def test_loss_decreases(self, toy):
        model = VideoGuidedTransformer(tiny_config(toy))
        cfg = desk_train_config(steps=50, batch_size=8, log_every=1)
        history = train(model, toy.train, cfg)
        assert history[-1]["total"] < history[0]["total"]

    def test_history_rows_and_logging(self, toy, tmp_path):
        import io
        import json
        model = VideoGuidedTransformer(tiny_config(toy))
        stream = io.StringIO()
        history = train(model, toy.train,
                        desk_train_config(steps=5, batch_size=4, log_every=2),
                        log_stream=stream)
        assert [row["step"] for row in history] == [2, 4, 5]
        assert all({"step", "ce", "ctr", "total", "lr"} <= set(row) for row in history)
        logged = [json.loads(line) for line in stream.getvalue().splitlines()]
        assert logged == history

    def test_non_finite_gradient_names_step(self, toy):
        model = VideoGuidedTransformer(tiny_config(toy))
        with torch.no_grad():
            model.out_proj.weight[0, 0] = float("nan")
        with pytest.raises(DataError, match="non-finite gradient.*at step 1"):
            train(model, toy.train, desk_train_config(steps=3, batch_size=4))

    def test_no_samples(self, toy):
        model = VideoGuidedTransformer(tiny_config(toy))
        with pytest.raises(DataError, match="no training samples"):
            train(model, [], desk_train_config(steps=1))

    def test_mean_ce_is_batch_size_invariant(self, toy, tiny_model):
        a = mean_ce(tiny_model, toy.train, batch_size=2)
        b = mean_ce(tiny_model, toy.train, batch_size=64)
        assert a == pytest.approx(b, rel=1e-5)


# -------------------------------------------------------------- grad check

class TestGradCheck:
    def test_autograd_matches_finite_differences(self, toy):
        model = VideoGuidedTransformer(tiny_config(toy))
        report = grad_check(model, collate(toy.train[:2]), coords_per_tensor=1)
        assert report.max_rel_err <= 1e-3, report.worst()


# ------------------------------------------------------------------- probe

class TestDerangement:
    @pytest.mark.parametrize("n", [2, 3, 5, 17])
    def test_no_fixed_points(self, n):
        for seed in range(5):
            perm = derangement(n, seed)
            assert sorted(perm) == list(range(n))
            assert all(perm[i] != i for i in range(n))

    def test_deterministic(self):
        assert derangement(9, 4) == derangement(9, 4)

    def test_too_small(self):
        with pytest.raises(DataError, match="at least two"):
            derangement(1, 0)


class TestProbe:
    def test_untrained_model_sees_no_real_gap(self, toy):
        model = VideoGuidedTransformer(tiny_config(toy))
        anns = {rid: tuple(a) for rid, a in toy.corpus.annotations.items()}
        report = incongruent_probe(model, toy.train[:6], toy.tgt_vocab,
                                   annotations_by_id=anns, beam_size=2, seed=0)
        assert abs(report.deltas["bleu"]) <= 2.0
        payload = report.as_dict()
        assert set(payload) == {"congruent", "incongruent", "deltas"}

    def test_swap_changes_features_not_text(self, toy):
        # the derangement must reassign every feature matrix
        perm = derangement(len(toy.train), 3)
        for i, j in enumerate(perm):
            assert j != i


# ------------------------------------------------------------------- synth

class TestSynth:
    def test_same_seed_same_bundle_bytes(self, tmp_path):
        paths = []
        for name in ("a", "b"):
            corpus = generate_toy_corpus(seed=5, size=8)
            paths.append(write_bundle(corpus, str(tmp_path / name)))
        for key in ("corpus", "manifest", "annotations"):
            with open(paths[0][key], "rb") as fa, open(paths[1][key], "rb") as fb:
                assert fa.read() == fb.read(), key
        rid = generate_toy_corpus(seed=5, size=8).records[0].id
        import os
        fa = os.path.join(paths[0]["features"], rid.replace(os.sep, "_") + ".f32")
        fb = os.path.join(paths[1]["features"], rid.replace(os.sep, "_") + ".f32")
        with open(fa, "rb") as f1, open(fb, "rb") as f2:
            assert f1.read() == f2.read()

    def test_size_and_rate_validation(self):
        with pytest.raises(DataError, match="size"):
            generate_toy_corpus(seed=0, size=1)
        with pytest.raises(DataError, match="ambiguity_rate"):
            generate_toy_corpus(seed=0, size=4, ambiguity_rate=1.5)

    def test_ambiguous_records_come_in_sense_pairs(self):
        corpus = generate_toy_corpus(seed=1, size=12, ambiguity_rate=0.5)
        train = [r for r in corpus.records if r.split == "train"]
        amb = [r for r in train if r.id in corpus.annotations]
        assert len(amb) == 6  # round(12 * 0.5) made even
        for a, b in zip(amb[0::2], amb[1::2]):
            assert a.src == b.src
            assert a.tgt != b.tgt
            assert a.tgt.count("_x") == 1 and b.tgt.count("_y") == 1

    def test_annotations_list_only_the_correct_rendering(self):
        corpus = generate_toy_corpus(seed=2, size=6)
        for rid, anns in corpus.annotations.items():
            record = next(r for r in corpus.records if r.id == rid)
            assert len(anns) == 1
            (variant,) = anns[0].tgt_variants
            assert len(variant) == 1
            assert variant[0] in record.tgt.split()

    def test_sense_offset_lives_in_leading_dims(self):
        corpus = generate_toy_corpus(seed=3, size=8)
        for rid, anns in corpus.annotations.items():
            feats = corpus.features[rid]
            sense = 1 if anns[0].tgt_variants[0][0].endswith("_y") else 0
            lead = feats[:, :4].mean()
            rest = feats[:, 4:].mean()
            assert abs(lead - (1.2 if sense else -1.2)) < 0.2
            assert abs(rest) < 0.2

    def test_splits_and_test_reuses_train_sources(self):
        corpus = generate_toy_corpus(seed=4, size=16)
        splits = {r.split for r in corpus.records}
        assert splits == {"train", "test-ambiguous"}
        train_sources = {r.src for r in corpus.records if r.split == "train"}
        for r in corpus.records:
            if r.split == "test-ambiguous":
                assert r.src in train_sources

    def test_rate_zero_has_no_ambiguity(self):
        corpus = generate_toy_corpus(seed=5, size=6, ambiguity_rate=0.0)
        assert corpus.annotations == {}
        assert {r.split for r in corpus.records} == {"train", "test-unambiguous"}
        for r in corpus.records:
            assert r.src == r.tgt

    def test_feature_frame_counts_match_clip_length(self):
        corpus = generate_toy_corpus(seed=6, size=4)
        for r in corpus.records:
            feats = corpus.features[r.id]
            assert 4 <= feats.shape[0] <= 10
            assert feats.shape[1] == 16
            assert r.clip_end_ms == feats.shape[0] * 500
