import os
import logging
from dotenv import load_dotenv

# Загружаем переменные окружения из .env файла
load_dotenv()

# Настройка логирования
LOG_LEVEL = os.getenv("HOIF_LOG_LEVEL", "INFO").upper()
logging.basicConfig(
    level=getattr(logging, LOG_LEVEL, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

# Генератор случайных чисел
RNG_ALGORITHM = "Philox4x64-10"
DEFAULT_SEED = int(os.getenv("HOIF_SEED", "20240101"))

# Допуски для точных квадратур и проверок
QUAD_TOL = 1e-12            # Ортонормальность базиса
PROJECTION_TOL = 1e-9       # Идемпотентность, след, ортогональность остатков
DEGENERACY_TOL = 1e-8       # Условные средние вырожденных ядер
CHAIN_RTOL = 1e-10          # Быстрый путь против перебора кортежей
DERIVATIVE_RTOL = 1e-5      # Центральная разность производной ядра по весу
WEIGHT_FLOOR = 1e-12        # Вес проекции должен быть отделен от нуля

# Ограничения U-статистик
NAIVE_MAX_N = 60            # Перебор всех кортежей только для малых выборок
CHAIN_MAX_ORDER = 4         # Таблицы разбиений заданы до четвертого порядка
DEGENERATE_MAX_ORDER = 3    # Вырожденная часть и разложение Хёфдинга
HOEFFDING_MAX_SPACE = 8     # Размер конечного пространства для разложения Хёфдинга
NAIVE_BATCH = 200_000       # Размер пакета кортежей при переборе

# Параметры модели по умолчанию
MODEL_LEVEL = 6             # Уровень дискретизации a, b, f
MODEL_ETA = 0.1             # Отступ от границ
CLAMP_FILL = 0.8            # Доля допустимой полосы, заполняемая функцией
MIN_CLAMP_SCALE = 1e-3      # Меньшее сжатие означает вырождение функции в константу

# Параметры эксперимента
WORKERS = int(os.getenv("HOIF_WORKERS", "1"))
OUTPUT_DIR = os.getenv("HOIF_OUTPUT_DIR", "results")
CSV_FLOAT_FORMAT = "%.17g"
SCHEMA_VERSION = 1
MIN_RATE_REPLICATIONS = 100
MIN_RATE_POINTS = 4

# Долгие статистические тесты включаются только явно
RUN_SLOW_TESTS = os.getenv("HOIF_RUN_SLOW", "0") == "1"

# Объем случайных проверок тождеств
CHECK_PAIRS = 30            # Пары (вес, префикс) для тождеств проекций
CHECK_MODELS = 10           # Случайные модели для тождеств условных средних
