# Модуль экспериментов Монте-Карло и проверок
