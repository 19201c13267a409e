import unittest
import numpy as np
from src.utils.errors import InvalidConfig, UnknownClass
from src.models.testcell import PhasePlan, SimConfig, generate_rico_like
from src.utils.dataio import SeriesRecord
from src.utils.labeling import (TrendClass, as_trend_class, class_histogram, label_records, label_series,
                                label_values, smooth_ma)
from src.utils.seriestools import SERIES_LENGTH

class TestLabeling(unittest.TestCase):
    def setUp(self):
        """Configuración inicial para las pruebas"""
        self.t = np.arange(SERIES_LENGTH, dtype=float)  # Tiempo [min]

    def test_monotonic_positive(self):
        """Prueba una rampa creciente (calefacción)"""
        self.assertEqual(label_values(20.0 + 0.05 * self.t), TrendClass.MonotonicPositive)

    def test_monotonic_negative(self):
        """Prueba un enfriamiento exponencial"""
        values = 15.0 + 10.0 * np.exp(-self.t / 60.0)
        self.assertEqual(label_values(values), TrendClass.MonotonicNegative)

    def test_non_monotonic(self):
        """Prueba una subida seguida de bajada"""
        values = 20.0 + 3.0 * np.sin(np.pi * self.t / 180.0)
        self.assertEqual(label_values(values), TrendClass.NonMonotonic)

    def test_flat_is_non_monotonic(self):
        """Prueba que una serie plana no es monótona"""
        self.assertEqual(label_values(np.full(SERIES_LENGTH, 21.0)), TrendClass.NonMonotonic)

    def test_last_hour_ignored(self):
        """Prueba que solo se leen las primeras 3 horas"""
        values = 20.0 + 0.05 * self.t
        values[180:] = 0.0
        self.assertEqual(label_values(values), TrendClass.MonotonicPositive)

    def test_noise_tolerance(self):
        """Prueba la tolerancia de pendiente ante ruido pequeño"""
        rng = np.random.default_rng(0)
        values = 20.0 + 0.03 * self.t + rng.normal(0.0, 0.005, SERIES_LENGTH)
        self.assertEqual(label_values(values), TrendClass.MonotonicPositive)

    def test_invalid_inputs(self):
        """Prueba tolerancias negativas y clases desconocidas"""
        with self.assertRaises(InvalidConfig):
            label_values(self.t, eps_slope=-1.0)
        with self.assertRaises(UnknownClass):
            as_trend_class(3)
        self.assertEqual(as_trend_class(1), TrendClass.MonotonicNegative)

    def test_label_records_histogram(self):
        """Prueba el etiquetado de registros y su histograma"""
        records = [SeriesRecord(1, k, 1, (np.nan,) * 4, 20.0 + 0.05 * self.t) for k in range(2)]
        labeled = label_records(records)
        self.assertEqual(class_histogram(labeled), {0: 2, 1: 0, 2: 0})
        self.assertIsNone(records[0].label)

class TestLabelProperties(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        """1000 series simuladas con los parámetros por defecto"""
        cfg = SimConfig(phase_plan=(PhasePlan(phase=1, n_series=1000),), seed=11)
        cls.series = [r.values for r in generate_rico_like(cfg)]
        cls.labels = [label_values(v) for v in cls.series]

    def test_smooth_spike(self):
        """Prueba la media móvil de 5 sobre un pico aislado"""
        # Cada salida promedia x[i-2..i+2]: el pico entra en las posiciones 1 a 5
        np.testing.assert_allclose(smooth_ma([0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0], 5),
                                   [0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0], atol=1e-12)
        np.testing.assert_array_equal(smooth_ma([3.0, 1.0, 2.0], 1), [3.0, 1.0, 2.0])

    def test_all_classes_present(self):
        """Prueba que la simulación por defecto produce las tres clases"""
        self.assertTrue(all(self.labels.count(c) > 0 for c in TrendClass))
        for seed in (1, 2024):
            records = label_records(generate_rico_like(SimConfig(seed=seed)))
            self.assertTrue(all(n > 0 for n in class_histogram(records).values()), msg=f"seed {seed}")

    def test_antisymmetry(self):
        """Prueba que invertir el signo intercambia las clases 0 y 1"""
        swap = {TrendClass.MonotonicPositive: TrendClass.MonotonicNegative,
                TrendClass.MonotonicNegative: TrendClass.MonotonicPositive,
                TrendClass.NonMonotonic: TrendClass.NonMonotonic}
        for values, label in zip(self.series, self.labels):
            self.assertEqual(label_values(-values), swap[label])

    def test_shift_invariance(self):
        """Prueba que sumar una constante no cambia la clase"""
        for values, label in zip(self.series, self.labels):
            self.assertEqual(label_values(values + 7.5), label)

    def test_last_hour_irrelevant(self):
        """Prueba que perturbar la última hora no cambia la clase"""
        rng = np.random.default_rng(3)
        for values, label in zip(self.series, self.labels):
            perturbed = values.copy()
            perturbed[180:] = rng.normal(0.0, 50.0, SERIES_LENGTH - 180)
            self.assertEqual(label_series(perturbed), label)

if __name__ == '__main__':
    unittest.main()
