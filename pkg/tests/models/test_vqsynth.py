import os
import tempfile
import unittest
import warnings
from unittest import mock
import numpy as np
import torch
from src.models.codebook import Codebook
from src.models.synthesizer import load_synth, sample
from src.models.vqsynth import (Decoder, Encoder, VQConfig, VQSynth, train_prior, train_prior_tokens,
                                train_vqvae)
from src.utils.errors import (ClassTooSmall, CodebookCollapse, EmptyDataset, InvalidConfig, UnfittedModel,
                              UnknownClass)
from src.utils.seriestools import SERIES_LENGTH

def make_series(n, seed=0):
    """Senos escalados con fase aleatoria y etiqueta alternada"""
    rng = np.random.default_rng(seed)
    t = np.arange(SERIES_LENGTH) / 40.0
    series = np.stack([np.sin(t + p) for p in rng.uniform(0.0, 6.0, n)])
    return series, [k % 3 for k in range(n)]

class TestArchitecture(unittest.TestCase):
    def setUp(self):
        """Configuración inicial para las pruebas"""
        self.cfg = VQConfig(n_codes=8, code_dim=4, downsample=8, hidden_channels=6)

    def test_shapes(self):
        """Prueba 240 muestras -> 30 tokens de dimensión d -> 240 muestras"""
        x = torch.zeros((3, SERIES_LENGTH), dtype=torch.float64)
        z = Encoder(self.cfg)(x)
        self.assertEqual(tuple(z.shape), (3, 30, 4))
        self.assertEqual(tuple(Decoder(self.cfg)(z).shape), (3, SERIES_LENGTH))
        self.assertEqual(self.cfg.n_tokens, 30)

    def test_autoencoder_gradients(self):
        """Prueba los gradientes del codificador y decodificador por diferencias finitas"""
        cfg = VQConfig(n_codes=4, code_dim=2, downsample=2, hidden_channels=2)
        torch.manual_seed(0)
        encoder, decoder = Encoder(cfg), Decoder(cfg)
        x = torch.randn(1, SERIES_LENGTH, dtype=torch.float64, requires_grad=True)
        self.assertTrue(torch.autograd.gradcheck(lambda v: decoder(encoder(v)).sum(), (x,)))

    def test_invalid_config(self):
        """Prueba configuraciones inválidas"""
        with self.assertRaises(InvalidConfig):
            VQConfig(downsample=3)
        with self.assertRaises(InvalidConfig):
            VQConfig(n_codes=1)

class TestTraining(unittest.TestCase):
    def setUp(self):
        """Configuración inicial para las pruebas"""
        self.cfg = VQConfig(n_codes=8, code_dim=4, downsample=8, hidden_channels=8, vq_epochs=3,
                            prior_epochs=3, prior_hidden=8, prior_embedding=4, batch_size=8, log_every=0)
        self.series, self.labels = make_series(12)

    def test_memorize_single_series(self):
        """Prueba que con la configuración por defecto el autoencoder memoriza una serie repetida"""
        cfg = VQConfig(log_every=0)
        data = np.repeat(self.series[:1], 8, axis=0)
        model = train_vqvae(data, cfg, seed=0)
        self.assertLess(model.reconstruction_mse(data[:1]), 1e-3)
        self.assertGreaterEqual(model.report["codes_used"], 2)

    def test_fit_deterministic(self):
        """Prueba que el ajuste y el muestreo se reproducen con la misma semilla"""
        a = VQSynth(self.cfg).fit(self.series, self.labels, seed=5)
        b = VQSynth(self.cfg).fit(self.series, self.labels, seed=5)
        np.testing.assert_array_equal(a.sample(4, 1, seed=2), b.sample(4, 1, seed=2))
        np.testing.assert_array_equal(a.tokens(self.series), b.tokens(self.series))

    def test_sample_shape_and_class_freq(self):
        """Prueba la forma de las muestras y las frecuencias de clase del prior"""
        model = VQSynth(self.cfg).fit(self.series, self.labels, seed=1)
        out = sample(model, 5, None, seed=3)
        self.assertEqual(out.shape, (5, SERIES_LENGTH))
        self.assertTrue(np.all(np.isfinite(out)))
        np.testing.assert_array_almost_equal(model.class_freq, [1 / 3, 1 / 3, 1 / 3])
        self.assertEqual(sample(model, 0, 2).shape, (0, SERIES_LENGTH))

    def test_unlabeled_prior(self):
        """Prueba que un prior sin etiquetas no admite muestreo condicionado"""
        model = VQSynth(self.cfg).fit(self.series, None, seed=1)
        self.assertIsNone(model.class_freq)
        self.assertEqual(model.sample(2, None, seed=0).shape, (2, SERIES_LENGTH))
        with self.assertRaises(UnknownClass):
            model.sample(2, 0, seed=0)

    def test_unfitted(self):
        """Prueba los errores de uso antes del entrenamiento"""
        model = VQSynth(self.cfg)
        with self.assertRaises(UnfittedModel):
            model.sample(1)
        with self.assertRaises(UnfittedModel):
            train_prior(model, self.series, self.labels)
        with self.assertRaises(EmptyDataset):
            train_vqvae(self.series[:7], self.cfg)

    def test_collapse_warning(self):
        """Prueba el aviso cuando el entrenamiento termina con un solo código en uso"""
        cfg = VQConfig(n_codes=4, code_dim=2, downsample=8, hidden_channels=4, vq_epochs=2, decay=1.0,
                       dead_code_threshold=0.0, batch_size=8, log_every=0)

        def identical_codes(codebook, flat, generator):
            codebook.set_codes(flat[:1].repeat(codebook.n_codes, 1))

        with mock.patch.object(Codebook, "init_from", identical_codes):
            with self.assertWarns(CodebookCollapse):
                model = train_vqvae(self.series[:8], cfg, seed=0)
        self.assertEqual(model.report["codes_used"], 1)

    def test_no_collapse_warning(self):
        """Prueba que un entrenamiento normal no emite el aviso de colapso"""
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            model = train_vqvae(self.series, self.cfg, seed=0)
        self.assertGreaterEqual(model.report["codes_used"], 2)
        self.assertFalse(any(issubclass(w.category, CodebookCollapse) for w in caught))

    def test_absent_class(self):
        """Prueba que no se muestrea una clase ausente del entrenamiento"""
        model = VQSynth(self.cfg).fit(self.series, [k % 2 for k in range(12)], seed=1)
        self.assertEqual(model.class_freq[2], 0.0)
        with self.assertRaises(ClassTooSmall):
            model.sample(2, 2, seed=0)
        self.assertEqual(model.sample(2, 1, seed=0).shape, (2, SERIES_LENGTH))

    def test_save_load(self):
        """Prueba que el checkpoint reproduce exactamente el muestreo"""
        model = VQSynth(self.cfg).fit(self.series, self.labels, seed=1)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "vq.ckpt")
            model.save(path, scaler={"mean": 20.0, "std": 2.0})
            loaded = load_synth(path)
        self.assertIsInstance(loaded, VQSynth)
        self.assertEqual(loaded.scaler, {"mean": 20.0, "std": 2.0})
        np.testing.assert_array_equal(loaded.sample(3, 0, seed=9), model.sample(3, 0, seed=9))

class TestPrior(unittest.TestCase):
    def setUp(self):
        """Configuración inicial para las pruebas"""
        self.cfg = VQConfig(n_codes=32, code_dim=4, downsample=8, hidden_channels=4, prior_epochs=300,
                            prior_lr=1e-2, prior_hidden=32, prior_embedding=16, log_every=0)

    def test_deterministic_sequence(self):
        """Prueba que el prior aprende una secuencia de tokens fija"""
        model = VQSynth(self.cfg)
        tokens = np.tile(np.arange(30), (4, 1))
        train_prior_tokens(model, tokens, None, self.cfg, seed=0)
        self.assertGreaterEqual(model.sequence_probability(np.arange(30)), 0.9)

    def test_class_conditioning(self):
        """Prueba que la condición de clase cambia la distribución de tokens"""
        model = VQSynth(self.cfg)
        tokens = np.concatenate([np.full((4, 30), 1), np.full((4, 30), 2)])
        train_prior_tokens(model, tokens, [0] * 4 + [1] * 4, self.cfg, seed=0)
        self.assertGreater(model.next_token_distributions(np.full(30, 1), 0)[0, 1], 0.9)
        self.assertGreater(model.next_token_distributions(np.full(30, 2), 1)[0, 2], 0.9)
        np.testing.assert_array_almost_equal(model.class_freq, [0.5, 0.5, 0.0])

if __name__ == '__main__':
    unittest.main()
