"""
Tests for the cyclic spectral model: latent sampling, KL, cycle flow, loss,
training steps and conversion
"""

import numpy as np
import pytest
from scipy import integrate

from cyclevc.config import ModelConfig
from cyclevc.error_handling import DataError, ShapeError, SignalError, SpeakerError
from cyclevc.modules.autodiff import Adam, Tape, Tensor, numerical_gradient
from cyclevc.modules.cyclevae import (
    CycleNoise,
    CycleVAE,
    FeatureNormalizer,
    LatentPosterior,
    LossReport,
    SpeakerCode,
    TrainingItem,
    convert,
    converted_excitation,
    cycle_forward,
    draw_cycle_noise,
    elbo_loss,
    encode,
    evaluate_batch,
    kl_laplace,
    kl_laplace_frames,
    reconstruct_variants,
    reparameterize,
    sample_pivot,
    spectral_distance_frames,
    train_step,
)
from cyclevc.modules.dsp import mcd, transform_log_f0

from tests.helpers import random_sequence


def numerical_kl(mu: float, scale: float) -> float:
    def integrand(x):
        log_p = -np.log(2.0 * scale) - abs(x - mu) / scale
        log_q = -np.log(2.0) - abs(x)
        return np.exp(log_p) * (log_p - log_q)

    lo, hi = min(mu, 0.0), max(mu, 0.0)
    pieces = [integrate.quad(integrand, -np.inf, lo)[0], integrate.quad(integrand, hi, np.inf)[0]]
    if hi > lo:
        pieces.append(integrate.quad(integrand, lo, hi)[0])
    return sum(pieces)


class TestSpeakerCode:

    def test_one_hot(self):
        np.testing.assert_array_equal(SpeakerCode(1, 3).one_hot, [0.0, 1.0, 0.0])
        assert SpeakerCode(2, 3).tile(4).shape == (4, 3)

    def test_out_of_range(self):
        with pytest.raises(SpeakerError):
            SpeakerCode(3, 3)
        with pytest.raises(SpeakerError):
            SpeakerCode(0, 0)


class TestPivotSampling:

    def test_pivot_is_never_the_source_and_covers_the_rest(self, rng):
        source = SpeakerCode(1, 4)
        draws = [sample_pivot(source, rng).index for _ in range(600)]
        counts = np.bincount(draws, minlength=4)

        assert counts[1] == 0
        assert np.all(counts[[0, 2, 3]] > 150)

    def test_single_speaker(self, rng):
        with pytest.raises(SpeakerError):
            sample_pivot(SpeakerCode(0, 1), rng)

    def test_cycle_noise_shapes(self, rng):
        noise = draw_cycle_noise(3, 5, 2, rng)
        assert len(noise) == 3
        assert noise[0].eps_x.shape == noise[0].eps_y.shape == (5, 2)
        assert not np.array_equal(noise[0].eps_x, noise[0].eps_y)


class TestLatent:

    def posterior(self, mu, log_scale) -> LatentPosterior:
        return LatentPosterior(Tensor(mu), Tensor(log_scale), Tensor(np.zeros((np.shape(mu)[0], 2))))

    def test_reparameterization(self):
        post = self.posterior(np.array([[1.0, -2.0]]), np.log([[0.5, 2.0]]))
        z = reparameterize(post, np.array([[2.0, 1.0]]))
        np.testing.assert_allclose(z.numpy(), [[0.0, -4.0]])

    def test_zero_noise_gives_location(self):
        post = self.posterior(np.array([[0.3, 0.7]]), np.zeros((1, 2)))
        np.testing.assert_array_equal(reparameterize(post, np.zeros((1, 2))).numpy(), post.mu.numpy())

    def test_noise_shape_mismatch(self):
        with pytest.raises(ShapeError):
            reparameterize(self.posterior(np.zeros((2, 2)), np.zeros((2, 2))), np.zeros((2, 3)))

    @pytest.mark.parametrize("mu,scale", [(0.0, 1.0), (0.7, 0.5), (-1.2, 2.0), (0.05, 0.3)])
    def test_closed_form_kl_matches_integration(self, mu, scale):
        assert kl_laplace(mu, scale) == pytest.approx(numerical_kl(mu, scale), abs=1e-6)

    def test_kl_is_zero_only_at_prior(self):
        assert kl_laplace(0.0, 1.0) == pytest.approx(0.0, abs=1e-12)
        assert np.all(kl_laplace(np.array([0.5, 0.0]), np.array([1.0, 0.4])) > 0)

    def test_kl_rejects_non_positive_scale(self):
        with pytest.raises(SignalError):
            kl_laplace(0.0, 0.0)

    def test_frame_kl_sums_latent_dimensions(self, rng):
        mu = rng.standard_normal((4, 3))
        log_scale = 0.3 * rng.standard_normal((4, 3))
        frames = kl_laplace_frames(self.posterior(mu, log_scale)).numpy()
        np.testing.assert_allclose(frames, kl_laplace(mu, np.exp(log_scale)).sum(axis=1))


class TestSpectralDistance:

    def test_matches_mcd_away_from_zero(self, rng):
        a = rng.standard_normal((5, 6))
        b = rng.standard_normal((5, 6))
        np.testing.assert_allclose(spectral_distance_frames(Tensor(a), b).numpy(), mcd(a, b), rtol=1e-9)

    def test_perfect_reconstruction_is_finite(self):
        a = np.ones((3, 4))
        tape = Tape()
        estimate = tape.variable(a)
        frames = spectral_distance_frames(estimate, a)
        assert np.all(frames.numpy() < 1e-4)
        grads = tape.gradients(frames.sum())
        assert np.all(np.isfinite(grads[id(estimate)]))

    def test_power_term(self):
        a = np.zeros((2, 3))
        b = a.copy()
        b[:, 0] = 2.0
        np.testing.assert_allclose(spectral_distance_frames(Tensor(a), b, power_weight=0.5).numpy(), 1.0,
                                   atol=1e-4)


class TestCycleFlow:

    def test_structure(self, tiny_model, tiny_sequence, source_code, speaker_stats, rng):
        pivots = [SpeakerCode(1, 3), SpeakerCode(2, 3)]
        noise = draw_cycle_noise(2, tiny_sequence.n_frames, 3, rng)
        outputs = cycle_forward(tiny_model, tiny_sequence, source_code, pivots, noise, speaker_stats)

        assert outputs.n_cycles == 2
        np.testing.assert_array_equal(outputs.cyclic_spectra(0), tiny_sequence.mcep)
        assert outputs.steps[1].input_spectra is outputs.steps[0].cyclic
        assert outputs.cyclic_spectra(2) is outputs.steps[1].cyclic
        for step in outputs.steps:
            np.testing.assert_array_equal(step.input_excitation, tiny_sequence.excitation())
            assert step.pivot.index != source_code.index
            assert step.converted.shape == step.cyclic.shape == tiny_sequence.mcep.shape

    def test_converted_excitation_keeps_voicing_and_aperiodicity(self, tiny_sequence, source_code,
                                                                 speaker_stats):
        target = SpeakerCode(1, 3)
        excitation = converted_excitation(tiny_sequence, source_code, target, speaker_stats)

        np.testing.assert_array_equal(excitation[:, 1], tiny_sequence.uv)
        np.testing.assert_array_equal(excitation[:, 2:], tiny_sequence.coded_ap)
        np.testing.assert_allclose(excitation[:, 0],
                                   transform_log_f0(tiny_sequence.log_f0, speaker_stats[0], speaker_stats[1]))

    def test_pivot_equal_to_source(self, tiny_model, tiny_sequence, source_code, speaker_stats):
        noise = [CycleNoise.zeros(tiny_sequence.n_frames, 3)]
        with pytest.raises(SpeakerError, match="equals the source"):
            cycle_forward(tiny_model, tiny_sequence, source_code, [source_code], noise, speaker_stats)

    def test_noise_count_mismatch(self, tiny_model, tiny_sequence, source_code, speaker_stats):
        with pytest.raises(ShapeError):
            cycle_forward(tiny_model, tiny_sequence, source_code, [SpeakerCode(1, 3)], [], speaker_stats)

    def test_missing_speaker_statistics(self, tiny_sequence, source_code):
        with pytest.raises(SpeakerError, match="statistics"):
            converted_excitation(tiny_sequence, source_code, SpeakerCode(1, 3), {0: None})

    def test_wrong_speaker_count(self, tiny_model):
        with pytest.raises(SpeakerError):
            tiny_model.decode(tiny_model.params(), np.zeros((2, 3)), SpeakerCode(0, 2))


class TestLoss:

    def forward(self, model, seq, source, stats, params=None):
        pivots = [SpeakerCode(1, 3), SpeakerCode(2, 3)]
        noise = draw_cycle_noise(2, seq.n_frames, 3, np.random.default_rng(9))
        return cycle_forward(model, seq, source, pivots, noise, stats, params)

    @pytest.mark.parametrize("name", ["decoder.gru.out.weight", "encoder.conv.weight", "encoder.gru.w_hh"])
    def test_gradient_matches_finite_differences(self, tiny_model, tiny_sequence, source_code, speaker_stats,
                                                 name):
        config = tiny_model.config

        tape = Tape()
        outputs = self.forward(tiny_model, tiny_sequence, source_code, speaker_stats, tiny_model.params(tape))
        loss, _ = elbo_loss(outputs, tiny_sequence.mcep, source_code, config)
        tape.backward(loss)
        analytic = tiny_model.store.grad(name).copy()

        def value(_):
            outputs = self.forward(tiny_model, tiny_sequence, source_code, speaker_stats)
            return elbo_loss(outputs, tiny_sequence.mcep, source_code, config)[0].item()

        numeric = numerical_gradient(value, tiny_model.store.value(name))
        np.testing.assert_allclose(analytic, numeric, atol=1e-5, rtol=1e-4)

    def test_report_is_finite_and_consistent(self, tiny_model, tiny_sequence, source_code, speaker_stats):
        outputs = self.forward(tiny_model, tiny_sequence, source_code, speaker_stats)
        loss, report = elbo_loss(outputs, tiny_sequence.mcep, source_code, tiny_model.config)

        assert report.total == pytest.approx(loss.item())
        assert all(np.isfinite(v) for v in report.to_dict().values())
        assert 0.0 <= report.spk_acc_x <= 1.0
        assert report.kl_x > 0 and report.kl_y > 0

    def test_loss_weights_select_terms(self, tiny_model, tiny_sequence, source_code, speaker_stats):
        only_rec = ModelConfig(latent_dim=3, n_speakers=3, weight_cyc=0.0, weight_power=0.0, weight_kl_x=0.0,
                               weight_kl_y=0.0, weight_spk_x=0.0, weight_spk_y=0.0)
        outputs = self.forward(tiny_model, tiny_sequence, source_code, speaker_stats)
        loss, report = elbo_loss(outputs, tiny_sequence.mcep, source_code, only_rec)
        assert loss.item() == pytest.approx(report.rec_mcd * outputs.n_cycles)

    def test_zero_frame_weights(self, tiny_model, tiny_sequence, source_code, speaker_stats):
        outputs = self.forward(tiny_model, tiny_sequence, source_code, speaker_stats)
        with pytest.raises(ShapeError, match="positive sum"):
            elbo_loss(outputs, tiny_sequence.mcep, source_code, tiny_model.config, np.zeros(6))

    def test_frame_weights_mask_frames(self, tiny_model, tiny_sequence, source_code, speaker_stats):
        outputs = self.forward(tiny_model, tiny_sequence, source_code, speaker_stats)
        weights = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
        target = tiny_sequence.mcep.copy()
        _, masked = elbo_loss(outputs, target, source_code, tiny_model.config, weights)
        target[3:] += 5.0
        _, changed = elbo_loss(outputs, target, source_code, tiny_model.config, weights)
        assert changed.rec_mcd == pytest.approx(masked.rec_mcd)

    def test_mean_report(self):
        mean = LossReport.mean([LossReport(total=1.0, rec_mcd=2.0), LossReport(total=3.0, rec_mcd=4.0)])
        assert (mean.total, mean.rec_mcd) == (2.0, 3.0)
        assert LossReport.mean([]).total == 0.0


class TestTraining:

    def test_steps_reduce_reconstruction_distortion(self, tiny_model, tiny_sequence, source_code,
                                                    speaker_stats):
        item = TrainingItem(tiny_sequence, source_code)
        optimizer = Adam(tiny_model.store, lr=1e-2)
        before = evaluate_batch(tiny_model, [item], np.random.default_rng(0), speaker_stats)

        reports = [train_step(tiny_model, [item], optimizer, np.random.default_rng(step), speaker_stats)
                   for step in range(60)]
        after = evaluate_batch(tiny_model, [item], np.random.default_rng(0), speaker_stats)

        assert optimizer.step_count == 60
        assert all(np.isfinite(r.total) and r.grad_norm > 0 for r in reports)
        assert after.rec_mcd < before.rec_mcd

    def test_evaluation_does_not_touch_parameters(self, tiny_model, tiny_sequence, source_code, speaker_stats):
        before = {name: tiny_model.store.value(name).copy() for name in tiny_model.store}
        evaluate_batch(tiny_model, [TrainingItem(tiny_sequence, source_code)], np.random.default_rng(0),
                       speaker_stats)
        for name, value in before.items():
            np.testing.assert_array_equal(tiny_model.store.value(name), value)

    def test_empty_batch(self, tiny_model, speaker_stats, rng):
        with pytest.raises(DataError):
            train_step(tiny_model, [], Adam(tiny_model.store), rng, speaker_stats)

    def test_speaker_count_mismatch(self, tiny_model, tiny_sequence, speaker_stats, rng):
        item = TrainingItem(tiny_sequence, SpeakerCode(0, 2))
        with pytest.raises(SpeakerError):
            train_step(tiny_model, [item], Adam(tiny_model.store), rng, speaker_stats)

    def test_frame_weight_length(self, tiny_sequence, source_code):
        with pytest.raises(ShapeError):
            TrainingItem(tiny_sequence, source_code, frame_weights=np.ones(2)).weights()


class TestConversion:

    def test_converted_sequence(self, tiny_model, tiny_sequence, source_code, speaker_stats):
        target = SpeakerCode(2, 3)
        converted = convert(tiny_model, tiny_sequence, source_code, target, speaker_stats)

        assert converted.mcep.shape == tiny_sequence.mcep.shape
        np.testing.assert_array_equal(converted.uv, tiny_sequence.uv)
        np.testing.assert_array_equal(converted.coded_ap, tiny_sequence.coded_ap)
        np.testing.assert_allclose(converted.log_f0,
                                   transform_log_f0(tiny_sequence.log_f0, speaker_stats[0], speaker_stats[2]))

    def test_conversion_uses_latent_location(self, tiny_model, tiny_sequence, source_code, speaker_stats):
        target = SpeakerCode(1, 3)
        expected = tiny_model.decode(tiny_model.params(), encode(tiny_model, tiny_sequence).mu, target).numpy()
        np.testing.assert_allclose(convert(tiny_model, tiny_sequence, source_code, target, speaker_stats).mcep,
                                   expected)

    def test_unknown_target_statistics(self, tiny_model, tiny_sequence, source_code):
        with pytest.raises(SpeakerError):
            convert(tiny_model, tiny_sequence, source_code, SpeakerCode(1, 3), {0: None})

    def test_variants_match_zero_noise_cycle(self, tiny_model, tiny_sequence, source_code, speaker_stats):
        pivot = SpeakerCode(2, 3)
        recon, cyclic = reconstruct_variants(tiny_model, tiny_sequence, source_code, [pivot], speaker_stats)
        outputs = cycle_forward(tiny_model, tiny_sequence, source_code, [pivot],
                                [CycleNoise.zeros(tiny_sequence.n_frames, 3)], speaker_stats)

        np.testing.assert_allclose(recon, outputs.steps[0].reconstructed.numpy())
        np.testing.assert_allclose(cyclic[2], outputs.steps[0].cyclic.numpy())


class TestNormalization:

    def test_fit_standardizes_inputs(self, rng):
        sequences = [random_sequence(rng, 20, 4, 2), random_sequence(rng, 10, 4, 2)]
        normalizer = FeatureNormalizer.fit(sequences)
        data = np.concatenate([s.to_array() for s in sequences])
        normalized = normalizer.normalize_input(data)

        np.testing.assert_allclose(normalized.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(normalizer.output_mean, data[:, :4].mean(axis=0))
        # constant U/V channel is floored
        assert normalizer.input_std[5] == 1e-3

    def test_fit_on_nothing(self):
        with pytest.raises(ShapeError):
            FeatureNormalizer.fit([])

    def test_state_arrays_round_trip(self, tiny_model_config, rng):
        model = CycleVAE(tiny_model_config, mcep_dim=4, excitation_dim=4, seed=3)
        model.normalizer = FeatureNormalizer.fit([random_sequence(rng, 8, 4, 2)])
        other = CycleVAE(tiny_model_config, mcep_dim=4, excitation_dim=4, seed=3)
        other.load_state_arrays(model.state_arrays())
        np.testing.assert_array_equal(other.normalizer.input_std, model.normalizer.input_std)

    def test_state_arrays_dimension_check(self, tiny_model_config):
        model = CycleVAE(tiny_model_config, mcep_dim=4, excitation_dim=4)
        with pytest.raises(ShapeError):
            model.load_state_arrays(FeatureNormalizer.identity(3, 4).to_arrays())

    def test_seeded_initialization(self, tiny_model_config):
        a = CycleVAE(tiny_model_config, mcep_dim=4, excitation_dim=4, seed=5)
        b = CycleVAE(tiny_model_config, mcep_dim=4, excitation_dim=4, seed=5)
        for name in a.store:
            np.testing.assert_array_equal(a.store.value(name), b.store.value(name))
