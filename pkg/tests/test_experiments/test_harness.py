import json
import math
import os
import random
import tempfile
import unittest
from unittest import mock
import numpy as np
from src.experiments import harness
from src.experiments.harness import AblationSpec, ablate, aggregate, assert_no_leakage, run_exp1, run_exp2
from src.models.forecaster import ForecastConfig
from src.models.synthesizer import build_synth
from src.utils.dataio import SeriesRecord, split_by_phase, values_matrix
from src.utils.errors import DataLeakage, EmptyArm, InvalidConfig, NonFiniteLoss, OutputExists, UnfittedModel
from src.utils.labeling import class_histogram
from src.utils.seriestools import SERIES_LENGTH

def make_split(labeled=True, seed=0):
    """Partición pequeña con las tres clases de tendencia en ambas fases"""
    rng = np.random.default_rng(seed)
    t = np.arange(SERIES_LENGTH, dtype=float)
    shapes = (lambda a: 20.0 + a * t / 60.0,
              lambda a: 30.0 - a * t / 60.0,
              lambda a: 25.0 + a * np.sin(np.pi * t / 120.0))
    records = []
    for phase, n in ((1, 15), (4, 9)):
        for step in range(n):
            c = step % 3
            values = shapes[c](rng.uniform(1.0, 3.0)) + rng.normal(0.0, 0.01, SERIES_LENGTH)
            records.append(SeriesRecord(phase=phase, step=step, flag=1, setpoints=(np.nan,) * 4, values=values,
                                        label=c if labeled else None))
    return split_by_phase(records, seed=seed)

class TestHarnessBase(unittest.TestCase):
    def setUp(self):
        """Configuración inicial para las pruebas"""
        self.split = make_split()
        self.cfg = ForecastConfig(hidden_size=4, epochs=2, batch_size=8, patience=5)
        self.synth = build_synth("bootstrap")
        train = self.split.scaler.apply(values_matrix(self.split.train))
        self.synth.fit(train, [r.label for r in self.split.train], seed=0)

class TestExperiment1(TestHarnessBase):
    def test_rows_and_sizes(self):
        """Prueba una fila por (estrategia, corrida) y el tamaño de cada conjunto de entrenamiento"""
        manifest = run_exp1(self.split, self.synth, runs=2, synth_n=10, seed=1, forecast_cfg=self.cfg)
        self.assertEqual(len(manifest.rows), 6)
        self.assertEqual(manifest.arms, ["trstr", "trtr", "tstr"])
        sizes = {r["arm"]: r["train_size"] for r in manifest.rows}
        n_real = len(self.split.train)
        self.assertEqual(sizes, {"trtr": n_real, "tstr": 10, "trstr": n_real + 10})
        self.assertEqual(manifest.failures, 0)
        self.assertEqual({a["arm"] for a in manifest.aggregates}, {"trtr", "tstr", "trstr"})

    def test_deterministic_and_parallel(self):
        """Prueba que los resultados no dependen de la repetición ni del número de procesos"""
        kwargs = dict(runs=2, synth_n=8, seed=3, forecast_cfg=self.cfg, strategies=("trtr", "trstr"))
        a = run_exp1(self.split, self.synth, jobs=1, **kwargs)
        b = run_exp1(self.split, self.synth, jobs=1, **kwargs)
        c = run_exp1(self.split, self.synth, jobs=2, **kwargs)
        text = json.dumps(a.to_dict(), sort_keys=True)
        self.assertEqual(text, json.dumps(b.to_dict(), sort_keys=True))
        self.assertEqual(a.rows, c.rows)

    def test_unfitted_synth(self):
        """Prueba el error con un sintetizador sin ajustar"""
        with self.assertRaises(UnfittedModel):
            run_exp1(self.split, build_synth("bootstrap"), runs=1, forecast_cfg=self.cfg)

    def test_failed_runs(self):
        """Prueba que un entrenamiento divergente queda registrado como fallido"""
        with mock.patch.object(harness, "train_forecaster", side_effect=NonFiniteLoss("loss became nan")):
            row = harness.run_task(harness.ForecastTask(
                arm="trtr", run=0, seed=1, real=np.zeros((4, SERIES_LENGTH)), synthetic=None,
                test_inputs=np.zeros((2, 21)), test_targets=np.ones((2, 3)), config=self.cfg))
        self.assertEqual(row["status"], "failed")
        self.assertTrue(math.isnan(row["mae"]))
        with self.assertRaises(EmptyArm):
            aggregate([row])

    def test_task_train_set(self):
        """Prueba que cada tarea arma su conjunto de entrenamiento al ejecutarse"""
        real, synthetic = np.zeros((3, SERIES_LENGTH)), np.ones((2, SERIES_LENGTH))
        task = harness.ForecastTask(arm="trstr", run=0, seed=1, real=real, synthetic=synthetic,
                                    test_inputs=np.zeros((1, 21)), test_targets=np.ones((1, 3)), config=self.cfg)
        self.assertEqual(task.train_size, 5)
        np.testing.assert_array_equal(task.train_set(), np.concatenate([real, synthetic]))
        only_real = harness.ForecastTask(arm="trtr", run=0, seed=1, real=real, synthetic=None,
                                         test_inputs=np.zeros((1, 21)), test_targets=np.ones((1, 3)), config=self.cfg)
        self.assertIs(only_real.train_set(), real)

    def test_outputs_and_report(self):
        """Prueba los archivos de salida, la protección contra sobrescritura y el reporte"""
        manifest = run_exp1(self.split, self.synth, runs=2, synth_n=8, seed=1, forecast_cfg=self.cfg,
                            strategies=("trtr",))
        with tempfile.TemporaryDirectory() as tmp:
            out = os.path.join(tmp, "exp1")
            harness.write_outputs(manifest, out)
            for name in ("manifest.json", "rows.csv", "aggregates.csv", "hist_mae.csv"):
                self.assertTrue(os.path.exists(os.path.join(out, name)))
            with self.assertRaises(OutputExists):
                harness.write_outputs(manifest, out)
            summary = harness.report_from_rows(os.path.join(out, "rows.csv"), os.path.join(tmp, "report"))
        mae = next(a for a in manifest.aggregates if a["metric"] == "mae")
        self.assertAlmostEqual(float(summary["mae_mean"].iloc[0]), mae["mean"])

class TestExperiment2(TestHarnessBase):
    def test_ablation(self):
        """Prueba la eliminación de series de una clase y la ausencia de fuga"""
        histogram = class_histogram(self.split.train)
        spec = AblationSpec(class_index=1, ratio=0.5, n_init=histogram[1])
        kept, removed = ablate(list(self.split.train), spec, seed=2)
        self.assertEqual(len(removed), spec.n_missing)
        self.assertEqual(class_histogram(kept)[1], spec.n_ablated)
        self.assertEqual(class_histogram(kept)[0], histogram[0])
        self.assertFalse(set(map(tuple, removed)) & self.split.test_keys())

    def test_ablation_counts(self):
        """Prueba el redondeo de la cantidad conservada"""
        self.assertEqual(AblationSpec(0, 0.25, 5).n_ablated, 1)
        self.assertEqual(AblationSpec(0, 0.5, 5).n_ablated, 3)
        self.assertEqual(AblationSpec(0, 1.0, 5).n_missing, 0)
        # Una clase con una sola serie la conserva con cualquier razón
        self.assertEqual(AblationSpec(2, 0.25, 1).n_ablated, 1)
        self.assertEqual(AblationSpec(2, 0.25, 1).n_missing, 0)
        self.assertEqual(AblationSpec(2, 0.25, 0).n_ablated, 0)
        with self.assertRaises(InvalidConfig):
            AblationSpec(0, 0.0, 5)

    def test_scenarios(self):
        """Prueba un sintetizador por escenario y el histograma restaurado"""
        manifest = run_exp2(self.split, ratios=(0.5, 1.0), runs=1, seed=4,
                            synth_factory=lambda i, r: build_synth("bootstrap"), forecast_cfg=self.cfg)
        self.assertEqual(manifest.extra["n_synthesizers"], 6)
        self.assertEqual(len(manifest.rows), 12)
        for scenario in manifest.extra["scenarios"]:
            self.assertEqual(scenario["augmented_histogram"], manifest.extra["train_histogram"])
        sizes = {(r["class_index"], r["ratio"], r["arm"]): r["train_size"] for r in manifest.rows}
        n_train = len(self.split.train)
        self.assertEqual(sizes[(0, 1.0, "baseline")], n_train)
        self.assertEqual(sizes[(2, 0.5, "augmented")], n_train)
        self.assertLess(sizes[(2, 0.5, "baseline")], n_train)
        self.assertEqual({(a["arm"], a["ratio"]) for a in manifest.extra["aggregates_by_ratio"]},
                         {("baseline", 0.5), ("baseline", 1.0), ("augmented", 0.5), ("augmented", 1.0)})

    def test_single_series_class(self):
        """Prueba una clase con una sola serie de entrenamiento y razón 0.25"""
        first = next(r for r in self.split.train if r.label == 2)
        split = self.split.with_train([r for r in self.split.train if r.label != 2 or r is first])
        manifest = run_exp2(split, ratios=(0.25,), runs=1, seed=5, classes=(2,),
                            synth_factory=lambda i, r: build_synth("bootstrap"), forecast_cfg=self.cfg)
        scenario = manifest.extra["scenarios"][0]
        self.assertEqual((scenario["n_init"], scenario["n_ablated"], scenario["n_missing"]), (1, 1, 0))
        self.assertEqual(scenario["augmented_histogram"], manifest.extra["train_histogram"])
        self.assertEqual(manifest.failures, 0)

    def test_unlabeled_split(self):
        """Prueba que el experimento 2 exige etiquetas"""
        with self.assertRaises(InvalidConfig):
            run_exp2(make_split(labeled=False), runs=1, forecast_cfg=self.cfg)

class TestAggregation(unittest.TestCase):
    def setUp(self):
        """Configuración inicial para las pruebas"""
        self.rows = [{"arm": "a", "status": "ok", "mse": v, "mae": v, "mape": v, "mase": v,
                      "mape_defined": True, "mase_defined": True} for v in (1.0, 2.0, 3.0, 6.0)]

    def test_mean_std(self):
        """Prueba media y desviación muestral (denominador n - 1)"""
        entry = next(e for e in aggregate(self.rows) if e["metric"] == "mae")
        self.assertAlmostEqual(entry["mean"], 3.0)
        self.assertAlmostEqual(entry["std"], math.sqrt(14.0 / 3.0))
        self.assertEqual(entry["n"], 4)
        self.assertFalse(entry["degenerate"])

    def test_permutation_invariant(self):
        """Prueba que el orden de las filas no cambia los agregados"""
        shuffled = list(self.rows)
        random.Random(0).shuffle(shuffled)
        self.assertEqual(aggregate(self.rows), aggregate(shuffled))

    def test_single_run(self):
        """Prueba el caso degenerado de una sola corrida"""
        entry = aggregate(self.rows[:1])[0]
        self.assertEqual(entry["std"], 0.0)
        self.assertTrue(entry["degenerate"])

    def test_undefined_metric_excluded(self):
        """Prueba que MAPE indefinido no entra en el promedio"""
        rows = [dict(self.rows[0]), dict(self.rows[1], mape=math.nan, mape_defined=False)]
        entry = next(e for e in aggregate(rows) if e["metric"] == "mape")
        self.assertEqual(entry["n"], 1)
        self.assertEqual(entry["mean"], 1.0)

    def test_leakage(self):
        """Prueba la detección de series de test en el entrenamiento"""
        split = make_split()
        with self.assertRaises(DataLeakage):
            assert_no_leakage(list(split.train) + [split.test[0]], split.test_keys())

if __name__ == '__main__':
    unittest.main()
