import json
import os
import tempfile
import unittest
from unittest import mock
from src.models.testcell import SimConfig
from src.utils.config import CONFIG_DIR, deep_merge, load_json, resolve_config
from src.utils.errors import InvalidConfig

class TestConfig(unittest.TestCase):
    def setUp(self):
        """Configuración inicial para las pruebas"""
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, data):
        path = os.path.join(self.tmp.name, "config.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f)
        return path

    def test_shipped_configs_valid(self):
        """Prueba que las configuraciones incluidas cumplen sus schemas"""
        cfg = resolve_config(CONFIG_DIR / "exp1_desk.json")
        self.assertEqual(cfg.exp1_config().runs, 20)
        self.assertEqual(cfg.synth_kind(), "vq")
        self.assertEqual(resolve_config(CONFIG_DIR / "exp2_desk.json").exp2_config().ratios, (0.25, 0.5, 0.75, 1.0))
        sim = SimConfig.from_dict(load_json(CONFIG_DIR / "testcell_default.json", "simulation"))
        self.assertEqual(sum(p.n_series for p in sim.phase_plan), 147)

    def test_overrides_win(self):
        """Prueba que los argumentos de línea de comandos priman sobre el archivo"""
        path = self.write({"seed": 1, "exp1": {"runs": 5, "synth_n": 8}})
        cfg = resolve_config(path, {"seed": 9, "exp1": {"runs": 2}})
        self.assertEqual(cfg.seed, 9)
        self.assertEqual(cfg.exp1_config().runs, 2)
        self.assertEqual(cfg.exp1_config().synth_n, 8)

    def test_default_seed(self):
        """Prueba la semilla por defecto desde el entorno"""
        with mock.patch.dict(os.environ, {"WORKBENCH_SEED": "33"}):
            self.assertEqual(resolve_config().seed, 33)

    def test_schema_violation(self):
        """Prueba el rechazo de valores fuera de rango y claves desconocidas"""
        with self.assertRaises(InvalidConfig):
            resolve_config(self.write({"split": {"fraction": 1.5}}))
        with self.assertRaises(InvalidConfig):
            resolve_config(self.write({"forecaster": {"hiden_size": 3}}))
        with self.assertRaises(InvalidConfig):
            resolve_config(self.write({"simulation": {"noise_std": -1.0}}))

    def test_semantic_validation(self):
        """Prueba la validación de las dataclasses de configuración"""
        cfg = resolve_config(None, {"forecaster": {"input_len": 20}})
        with self.assertRaises(InvalidConfig):
            cfg.forecast_config()
        cfg = resolve_config(None, {"simulation": {"room_capacitance": 1000.0}})
        with self.assertRaises(InvalidConfig):
            cfg.sim_config()

    def test_deep_merge(self):
        """Prueba la mezcla recursiva ignorando valores None"""
        merged = deep_merge({"a": {"b": 1, "c": 2}, "d": 3}, {"a": {"b": 5}, "d": None})
        self.assertEqual(merged, {"a": {"b": 5, "c": 2}, "d": 3})

if __name__ == '__main__':
    unittest.main()
