"""
Иерархия исключений библиотеки.

Все исключения наследуются от ValueError, поэтому вызывающий код
с обычным `except ValueError` продолжает работать.
"""


class HoifError(ValueError):
    """Базовое исключение библиотеки."""


class DomainError(HoifError):
    """Точка, индекс или параметр вне своей области определения."""


class ProjectionError(HoifError):
    """Вес не отделен от нуля, матрица Грама вырождена или веса не совпадают."""


class DegeneracyError(HoifError):
    """Ядро не прошло проверку на вырожденность."""


class OrderError(HoifError):
    """Порядок U-статистики не поддерживается или превышен предел перебора."""


class ConfigError(HoifError):
    """Некорректная конфигурация эксперимента или несовпадение сетки."""
