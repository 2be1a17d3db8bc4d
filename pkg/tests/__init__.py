# Модуль с тестами оценщиков функций влияния высших порядков
