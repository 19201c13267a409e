import json
import os
import sys

from jsonschema import validate, ValidationError

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.utils.config import CONFIG_DIR, load_schema  # noqa: E402

# Tipo de esquema según el prefijo del archivo
SCHEMA_BY_PREFIX = {
    'testcell': 'simulation',
    'exp': 'experiment',
}


def schema_for(filename):
    """Esquema que corresponde a un archivo de configuración"""
    for prefix, schema_name in SCHEMA_BY_PREFIX.items():
        if filename.startswith(prefix):
            return schema_name
    return None


def validate_file(file_path, schema_name):
    """Valida un archivo contra un esquema dado"""
    try:
        schema = load_schema(schema_name)
        with open(file_path, 'r', encoding='utf-8') as f:
            data = json.load(f)

        validate(instance=data, schema=schema)
        if schema_name == 'experiment' and data.get('simulation'):
            validate(instance=data['simulation'], schema=load_schema('simulation'))
        print(f"✅ Archivo válido: {os.path.basename(file_path)}")
        return True
    except ValidationError as e:
        print(f"❌ Error en {os.path.basename(file_path)}:")
        print(f"   {e.message}")
        return False
    except Exception as e:
        print(f"❌ Error inesperado en {os.path.basename(file_path)}:")
        print(f"   {str(e)}")
        return False


def validate_all_configs(configs_dir=CONFIG_DIR):
    """Valida todos los archivos de configuración"""
    valid_count = 0
    total_count = 0

    for filename in sorted(os.listdir(configs_dir)):
        if not filename.endswith('.json'):
            continue
        schema_name = schema_for(filename)
        if schema_name is None:
            print(f"⚠️  Sin esquema para {filename}, se omite")
            continue
        total_count += 1
        if validate_file(os.path.join(configs_dir, filename), schema_name):
            valid_count += 1

    print(f"\nResumen: {valid_count}/{total_count} archivos válidos")
    return valid_count == total_count


if __name__ == '__main__':
    sys.exit(0 if validate_all_configs() else 1)
