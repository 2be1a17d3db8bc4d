# Модуль с базисом Хаара, квадратурой и сетками блоков
