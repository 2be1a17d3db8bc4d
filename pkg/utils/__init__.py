# Модуль утилит: ошибки и генераторы случайных чисел
