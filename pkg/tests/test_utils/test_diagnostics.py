import math
import os
import tempfile
import unittest
import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist
from src.utils.diagnostics import (conditional_probabilities, joint_probabilities, pca_project, row_perplexities,
                                   tsne_embed, write_coordinates)
from src.utils.errors import DegenerateData, InvalidConfig, PerplexityTooLarge, RankDeficient

class TestPCA(unittest.TestCase):
    def setUp(self):
        """Configuración inicial para las pruebas"""
        rng = np.random.default_rng(0)
        self.X = rng.normal(size=(50, 4)) * np.array([5.0, 2.0, 1.0, 0.5])

    def test_line_data(self):
        """Prueba puntos sobre una recta: una sola componente con toda la varianza"""
        t = np.linspace(-1.0, 1.0, 11)
        X = np.stack([t, 2.0 * t, -t], axis=1)
        coords, components, eigenvalues = pca_project(X, k=1)
        np.testing.assert_array_almost_equal(components[0], np.array([1.0, 2.0, -1.0]) / math.sqrt(6.0))
        self.assertAlmostEqual(eigenvalues[1], 0.0)
        np.testing.assert_array_almost_equal(coords[:, 0], t * math.sqrt(6.0))
        with self.assertRaises(RankDeficient):
            pca_project(X, k=2)

    def test_eigenvalues_and_orthonormality(self):
        """Prueba autovalores ordenados y componentes ortonormales"""
        coords, components, eigenvalues = pca_project(self.X, k=3)
        self.assertTrue(np.all(np.diff(eigenvalues) <= 0))
        np.testing.assert_array_almost_equal(components @ components.T, np.eye(3))
        np.testing.assert_array_almost_equal(coords.var(axis=0, ddof=1), eigenvalues[:3])
        self.assertAlmostEqual(eigenvalues.sum(), np.trace(np.cov(self.X, rowvar=False)))

    def test_sign_convention(self):
        """Prueba que la entrada de mayor magnitud de cada componente es positiva"""
        _, components, _ = pca_project(-self.X, k=2)
        for c in components:
            self.assertGreater(c[np.argmax(np.abs(c))], 0.0)

    def test_full_rank_preserves_distances(self):
        """Prueba que con k = p la proyección conserva las distancias entre pares"""
        coords, _, _ = pca_project(self.X, k=4)
        np.testing.assert_allclose(pdist(coords), pdist(self.X), rtol=1e-9, atol=1e-12)

    def test_invalid(self):
        """Prueba entradas inválidas"""
        with self.assertRaises(DegenerateData):
            pca_project(self.X[:1], k=1)
        with self.assertRaises(InvalidConfig):
            pca_project(self.X, k=5)

class TestTSNE(unittest.TestCase):
    def setUp(self):
        """Configuración inicial para las pruebas"""
        rng = np.random.default_rng(1)
        self.X = np.concatenate([rng.normal(0.0, 0.1, (20, 5)), rng.normal(5.0, 0.1, (20, 5))])

    def test_perplexity_calibration(self):
        """Prueba que cada fila alcanza la perplejidad pedida"""
        P = conditional_probabilities(self.X, perplexity=10.0)
        np.testing.assert_allclose(P.sum(axis=1), 1.0)
        np.testing.assert_allclose(row_perplexities(P), 10.0, rtol=0.0, atol=1e-5)
        self.assertTrue(np.all(np.diag(P) == 0.0))

    def test_perplexity_random_data(self):
        """Prueba la perplejidad de cada fila sobre datos aleatorios"""
        X = np.random.default_rng(2).normal(size=(60, 5))
        for perplexity in (5.0, 15.0, 30.0):
            P = conditional_probabilities(X, perplexity=perplexity)
            np.testing.assert_allclose(row_perplexities(P), perplexity, rtol=0.0, atol=1e-5)

    def test_bisection_not_converged(self):
        """Prueba el aviso cuando puntos idénticos impiden alcanzar la perplejidad"""
        with self.assertLogs("src.utils.diagnostics", level="WARNING") as logs:
            P = conditional_probabilities(np.zeros((10, 3)), perplexity=5.0)
        self.assertIn("did not converge on 10/10 rows", logs.output[0])
        np.testing.assert_allclose(P.sum(axis=1), 1.0)

    def test_joint_symmetric(self):
        """Prueba que las afinidades conjuntas son simétricas y suman 1"""
        P = joint_probabilities(self.X, perplexity=10.0)
        np.testing.assert_allclose(P, P.T)
        self.assertAlmostEqual(P.sum(), 1.0, places=6)

    def test_perplexity_too_large(self):
        """Prueba el rechazo de una perplejidad >= m - 1"""
        with self.assertRaises(PerplexityTooLarge):
            conditional_probabilities(self.X[:10], perplexity=9.0)

    def test_embedding_separates_clusters(self):
        """Prueba que t-SNE mantiene separados dos grupos lejanos y es determinista"""
        Y = tsne_embed(self.X, perplexity=10.0, iters=300, seed=4)
        self.assertEqual(Y.shape, (40, 2))
        gap = np.linalg.norm(Y[:20].mean(axis=0) - Y[20:].mean(axis=0))
        spread = max(Y[:20].std(axis=0).max(), Y[20:].std(axis=0).max())
        self.assertGreater(gap, 2.0 * spread)
        np.testing.assert_array_equal(Y, tsne_embed(self.X, perplexity=10.0, iters=300, seed=4))

    def test_duplicated_pair(self):
        """Prueba que un punto duplicado queda junto a su copia en tres grupos"""
        rng = np.random.default_rng(3)
        centers = np.array([[0.0] * 5, [6.0] * 5, [-6.0, 6.0, -6.0, 6.0, -6.0]])
        X = np.concatenate([c + rng.normal(0.0, 0.3, (10, 5)) for c in centers])
        X = np.concatenate([X, X[:1]])
        P = conditional_probabilities(X, perplexity=5.0)
        self.assertEqual(int(np.argmax(P[0])), 30)
        self.assertEqual(int(np.argmax(P[30])), 0)
        Y = tsne_embed(X, perplexity=5.0, iters=500, seed=1)
        pair = np.linalg.norm(Y[0] - Y[30])
        others = np.linalg.norm(Y[10:30] - Y[0], axis=1)
        self.assertLess(pair, others.min())

    def test_write_coordinates(self):
        """Prueba la exportación de coordenadas con su origen"""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "coords.csv")
            write_coordinates(np.zeros((3, 2)), ["real", "real", "synthetic"], path)
            frame = pd.read_csv(path)
        self.assertEqual(list(frame.columns), ["source", "c1", "c2"])
        self.assertEqual(frame["source"].tolist(), ["real", "real", "synthetic"])

if __name__ == '__main__':
    unittest.main()
