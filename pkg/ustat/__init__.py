# Модуль вычисления U-статистик
