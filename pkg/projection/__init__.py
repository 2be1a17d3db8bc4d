# Модуль взвешенных проекций и их ядер
