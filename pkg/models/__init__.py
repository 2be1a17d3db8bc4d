# Модуль с моделью пропусков данных и предварительными оценками
