#!/usr/bin/env python3
import os
import sys
import json
import argparse
import logging

# Добавляем каталог проекта в пути импорта
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config import DEFAULT_SEED, MODEL_ETA, MODEL_LEVEL, WORKERS
from basis.grid import ceil_admissible, default_k, grid_build
from estimators.influence import EstimatorConfig
from estimators.pipeline import estimate
from harness.checks import invariant_suite
from harness.rates import fit_rate, rates_table
from harness.runner import load_config, read_results, run_experiment, summarize
from models import io
from models.mar import draw_sample, synthesize_model
from models.preliminary import make_preliminary
from utils.errors import HoifError

# Настройка логирования
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler(),
        logging.FileHandler("hoif.log")
    ],
    force=True
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK_FAILED = 2


class UsageParser(argparse.ArgumentParser):
    """Ошибки разбора аргументов завершаются кодом 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: ошибка: {message}\n")


def _smoothness(text: str) -> float:
    return float("inf") if text.lower() in ("inf", "infinity") else float(text)


def _emit(payload, as_json: bool):
    if as_json:
        print(json.dumps(payload, ensure_ascii=False, indent=2, default=float))
    elif isinstance(payload, dict):
        for key, value in payload.items():
            print(f"{key}: {value}")
    else:
        print(payload)


def cmd_simulate(args) -> int:
    """Модель, выборка и (по желанию) предварительные оценки в файлы."""
    model = synthesize_model(args.model_seed, args.alpha, args.beta, args.gamma_f, args.d,
                             args.eta, args.level, args.amplitude)
    sample = draw_sample(model, args.n, args.seed)
    out = args.out or "sample.csv"
    io.write_sample(sample, out)
    io.save_model(model, f"{out}.model.json", seed=args.model_seed, alpha=args.alpha, beta=args.beta)
    payload = {"data": out, "model": f"{out}.model.json", "n": args.n}
    if args.prelim:
        gamma = min(args.gamma_f, args.alpha)
        fit = make_preliminary(args.prelim, model, args.n_aux or args.n, args.alpha, args.beta, gamma,
                               seed=args.seed + 1)
        io.save_fit(fit, f"{out}.fit.json")
        payload["fit"] = f"{out}.fit.json"
    logger.info(f"Сгенерирована выборка из {args.n} наблюдений: {out}")
    _emit(payload, args.json)
    return EXIT_OK


def cmd_estimate(args) -> int:
    """Однократная оценка по файлам выборки и предварительных оценок."""
    sample = io.read_sample(args.data)
    fit = io.load_fit(args.fit)
    model = io.load_model(args.model) if args.model else None
    grid = None
    if args.truncated:
        grid = grid_build(len(sample), args.k, args.alpha, args.beta, sample.d, args.D,
                          default_cutoff=args.D is None)
    if grid is not None:
        k = grid.k
    elif args.k is None and args.order >= 2:
        k = max(default_k(len(sample), args.alpha, args.beta, sample.d), ceil_admissible(len(sample), sample.d))
    else:
        k = args.k or 0
    config = EstimatorConfig(order=args.order, k=k, truncated=args.truncated, grid=grid,
                             gram=args.gram, engine=args.engine)
    report = estimate(sample, fit, config, model)
    report.seed = args.seed
    payload = report.to_dict()
    _emit(payload if args.json else {"estimate": report.value, **report.diagnostics}, args.json)
    return EXIT_OK


def cmd_experiment(args) -> int:
    if not args.config:
        raise HoifError("Для эксперимента нужен --config")
    config = load_config(args.config)
    if args.seed is not None:
        config = config.model_copy(update={"base_seed": args.seed})
    frame = run_experiment(config, workers=args.workers, out=args.out)
    summary = summarize(frame)
    if args.json:
        _emit(summary.to_dict(orient="records"), True)
    else:
        print(summary.to_string(index=False))
    return EXIT_OK


def cmd_rates(args) -> int:
    frame = read_results(args.results)
    if args.estimator:
        fit = fit_rate(frame, args.estimator)
        _emit({"estimator": args.estimator, "slope": fit.slope, "stderr": fit.stderr, "points": fit.points},
              args.json)
        return EXIT_OK
    table = rates_table(summarize(frame))
    if args.json:
        _emit(table.to_dict(orient="records"), True)
    else:
        print(table.to_string(index=False))
    return EXIT_OK


def cmd_check(args) -> int:
    results = invariant_suite(args.seed if args.seed is not None else DEFAULT_SEED)
    if args.json:
        _emit([r.to_dict() for r in results], True)
    else:
        for r in results:
            print(f"{'OK  ' if r.passed else 'FAIL'} {r.name}: {r.value:.3g} (допуск {r.tolerance:.1g})")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = UsageParser(add_help=False)
    common.add_argument("--config", help="JSON-конфигурация эксперимента")
    common.add_argument("--seed", type=int, default=None, help="Базовое зерно генератора")
    common.add_argument("--out", help="Путь к выходному файлу")
    common.add_argument("--workers", type=int, default=WORKERS, help="Число процессов")
    common.add_argument("--json", action="store_true", help="Машиночитаемый вывод")

    parser = UsageParser(prog="hoif", description="Оценки функций влияния высших порядков для среднего отклика")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=UsageParser)

    p = sub.add_parser("simulate", parents=[common], help="Сгенерировать выборку")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=_smoothness, required=True)
    p.add_argument("--beta", type=_smoothness, required=True)
    p.add_argument("--gamma-f", dest="gamma_f", type=_smoothness, default=float("inf"))
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--eta", type=float, default=MODEL_ETA)
    p.add_argument("--level", type=int, default=MODEL_LEVEL)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--model-seed", dest="model_seed", type=int, default=1)
    p.add_argument("--prelim", choices=["synthetic", "fitted"], default=None)
    p.add_argument("--n-aux", dest="n_aux", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="Оценка по файлам")
    p.add_argument("--data", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--truncated", action="store_true")
    p.add_argument("--D", type=int, default=None)
    p.add_argument("--alpha", type=_smoothness, default=1.0)
    p.add_argument("--beta", type=_smoothness, default=1.0)
    p.add_argument("--gram", choices=["known", "estimated"], default="estimated")
    p.add_argument("--engine", choices=["cells", "dense"], default="cells")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("experiment", parents=[common], help="Эксперимент Монте-Карло")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("rates", parents=[common], help="Наклоны log RMSE по log n")
    p.add_argument("--results", required=True)
    p.add_argument("--estimator", default=None)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("check", parents=[common], help="Проверка тождеств")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate" and args.seed is None:
        args.seed = DEFAULT_SEED
    try:
        return args.func(args)
    except HoifError as e:
        logger.error(f"Ошибка команды {args.command}: {str(e)}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
