# Модуль оценщиков функционала среднего отклика
