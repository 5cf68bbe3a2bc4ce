from __future__ import annotations

import logging
import math
import pathlib
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .. import TOOL_NAME, __version__
from ..config import settings
from ..models.config import LabConfig, config_hash
from ..models.reports import CheckEntry, OutputEntry, RunManifest
from .codes_binned import TALLY_COLUMNS, binned_code_schedule
from .codes_point import point_code_schedule
from .errors import ConfigError, DimensionMismatchError, VerificationFailure
from .export import emit_document, emit_results
from .optimizers import AuxSpec
from .probability import (ChainModel, ProbabilityTable, bsc_channel, chain_identity_check, compose_chain,
                          conditional_entropy, constant_channel, dsbs, identity_channel, random_chain_model,
                          validate_channel)
from .regions import (Region, region_from_corners, side_info_region, single_letterization_check,
                      berger_yeung_region, conditional_rd, joint_inner_region, partial_inner_region, shannon_rd,
                      wyner_ziv_region)
from .two_terminal import (EXPERIMENT_COLUMNS, PROBLEMS, CodingEpsilons, DistortionCriterion, ReconstructionMap,
                           corner_rates, corner_sizings, optimal_reconstruction, run_rd_experiment)
from .typicality import check_markov_lemma, sandwich_schedule

logger = logging.getLogger(__name__)

COMMANDS = ('info', 'region', 'simulate', 'verify')
SUITES = ('typicality', 'identities', 'containment', 'coding')
REGION_PROBLEMS = ('shannon', 'conditional', 'wynerZiv', 'sideInfo', 'bergerYeung', 'joint', 'partial',
                   'singleLetter', 'corners')
SIMULATE_PROBLEMS = ('point', 'binned') + PROBLEMS
REGION_COLUMNS = ['problem', 'order', 'r1', 'r2', 'd', 'witnessId']
INFO_COLUMNS = ['quantity', 'bitsPerBlock', 'bitsPerSymbol']
IDENTITY_MODELS = 100
SANDWICH_LENGTHS = (8, 12)
SLEPIAN_WOLF_SUCCESS = 0.8


@dataclass(frozen=True)
class LabInputs:
    source: ProbabilityTable
    model: ChainModel
    criterion: Optional[DistortionCriterion]
    psi: Optional[ReconstructionMap]
    epsilons: Optional[CodingEpsilons]
    aux: AuxSpec


def _channel(spec, rows: int, name: str) -> np.ndarray:
    if spec.kind == 'identity':
        return identity_channel(rows)
    if spec.kind == 'constant':
        return constant_channel(rows)
    if spec.kind == 'bsc':
        if rows != 2:
            raise DimensionMismatchError(f'{name}: bsc necesita un bloque binario, el bloque tiene {rows} símbolos')
        return bsc_channel(spec.crossover)
    return validate_channel(spec.matrix, rows, name)


def build_inputs(cfg: LabConfig) -> LabInputs:
    """Construye tablas, canales, criterio y ψ; falla con el nombre de la tabla cuando algo no cuadra."""
    if cfg.source.dsbs is not None:
        source = dsbs(cfg.source.dsbs)
    else:
        source = ProbabilityTable(cfg.source.table, name='source')
    n = cfg.order
    a, b = source.shape
    model = compose_chain(source, _channel(cfg.aux1, a ** n, 'aux1'), _channel(cfg.aux2, b ** n, 'aux2'), n)
    criterion = None
    if cfg.distortion is not None:
        spec = cfg.distortion
        if spec.hamming:
            size = int(np.prod([a, b] if spec.target == 'joint' else [a if spec.target == 'x1' else b]))
            criterion = DistortionCriterion(1.0 - np.eye(size), spec.target, spec.d_max or 1.0)
        else:
            criterion = DistortionCriterion(np.array(spec.matrix, float), spec.target, spec.d_max)
        criterion.check_sizes(source.shape)
    psi = None
    if cfg.psi is not None:
        if criterion is None:
            raise ConfigError(['psi: necesita "distortion" para conocer el objetivo'])
        psi = ReconstructionMap(np.array(cfg.psi), criterion.target, source.shape, n)
        if psi.table.shape != model.aux_sizes:
            raise DimensionMismatchError(f'psi: forma {psi.table.shape}, se esperaba Z1 x Z2 = {model.aux_sizes}')
    epsilons = None
    if cfg.epsilons is not None:
        e = cfg.epsilons
        epsilons = CodingEpsilons(e.epsilon, e.epsilon1, e.epsilon4, e.support_restricted)
    a_spec = cfg.aux
    aux = AuxSpec(card_z1=a_spec.card_z1, card_z2=a_spec.card_z2, grid_step=a_spec.grid_step,
                  restarts=a_spec.restarts, max_iterations=a_spec.max_iterations, tolerance=a_spec.tolerance,
                  seed=cfg.seed)
    return LabInputs(source, model, criterion, psi, epsilons, aux)


@dataclass
class RunResult:
    tables: Dict[str, Tuple[List[dict], Optional[List[str]]]] = field(default_factory=dict)
    documents: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    checks: List[CheckEntry] = field(default_factory=list)

    def check(self, name: str, passed: bool, detail: Optional[str] = None, required: bool = True) -> None:
        self.checks.append(CheckEntry(name=name, passed=bool(passed), required=required, detail=detail))
        if not passed:
            logger.warning('verificación %s fallida: %s', name, detail)


class LabPipeline:
    def __init__(self, cfg: LabConfig, threads: Optional[int] = None):
        self.cfg = cfg
        self.threads = max(1, threads or settings.threads)
        self.inputs = build_inputs(cfg)
        self.config_hash = config_hash(cfg)
        # resultados por (comando, suite); los hilos no alteran los números
        self._cache: Dict[Tuple, RunResult] = {}

    def _cache_key(self, command: str, suite: Optional[str]) -> Tuple:
        return (command, suite if command == 'verify' else None, self.config_hash)

    # --- requisitos -------------------------------------------------------

    def _need_criterion(self) -> DistortionCriterion:
        if self.inputs.criterion is None:
            raise ConfigError([f'distortion: obligatorio para el problema {self.cfg.problem}'])
        return self.inputs.criterion

    def _need_epsilons(self) -> CodingEpsilons:
        if self.inputs.epsilons is None:
            raise ConfigError([f'epsilons: obligatorio para {self.cfg.problem}'])
        return self.inputs.epsilons

    def _need_schedule(self) -> List[int]:
        if not self.cfg.schedule:
            raise ConfigError(['schedule: se necesita al menos un n\''])
        return list(self.cfg.schedule)

    def _targets(self, crit: DistortionCriterion) -> List[float]:
        if self.cfg.targets:
            return list(self.cfg.targets)
        points = self.inputs.aux.sweep_points
        return [crit.d_max * k / (points - 1) for k in range(points)]

    # --- comandos ---------------------------------------------------------

    def info(self) -> RunResult:
        model = self.inputs.model
        n = model.block_order
        out = RunResult()
        rows = [{'quantity': k, 'bitsPerBlock': v, 'bitsPerSymbol': v / n}
                for k, v in model.info_summary().as_dict().items() if k != 'block_order']
        c = corner_rates(model)
        for name, value in (('corner0_r1', c.corner0[0]), ('corner0_r2', c.corner0[1]),
                            ('corner1_r1', c.corner1[0]), ('corner1_r2', c.corner1[1]), ('sum_rate', c.sum_rate)):
            rows.append({'quantity': name, 'bitsPerBlock': value, 'bitsPerSymbol': value / n})
        if self.inputs.criterion is not None:
            psi = self.inputs.psi or optimal_reconstruction(model, self.inputs.criterion)
            dist = self.inputs.criterion.expected(model, psi)
            rows.append({'quantity': 'expected_distortion', 'bitsPerBlock': None, 'bitsPerSymbol': dist})
        out.tables['info'] = (rows, INFO_COLUMNS)
        return out

    def _curve(self, problem: str, fn, source, crit: DistortionCriterion) -> Region:
        targets = self._targets(crit)
        rates = [fn(source, crit, t) for t in targets]
        pts = [[r, t] for r, t in zip(rates, targets) if math.isfinite(r)]
        return Region(problem, 1, ('r1', 'd'), np.array(pts, float).reshape(-1, 2),
                      meta={'targets': targets})

    def region(self) -> RunResult:
        problem = self.cfg.problem
        if problem not in REGION_PROBLEMS:
            raise ConfigError([f'problem: {problem} no es un problema de región ({", ".join(REGION_PROBLEMS)})'])
        src, aux, order = self.inputs.source, self.inputs.aux, self.cfg.order
        out = RunResult()
        if problem == 'sideInfo':
            region = side_info_region(src, aux, self.cfg.targets or None)
        elif problem == 'corners':
            crit = self.inputs.criterion
            d = None
            if crit is not None:
                d = crit.expected(self.inputs.model, self.inputs.psi or optimal_reconstruction(self.inputs.model, crit))
            region = region_from_corners(corner_rates(self.inputs.model), d)
        else:
            crit = self._need_criterion()
            targets = self._targets(crit)
            if problem == 'shannon':
                marginal = {'x1': src.marginal_array(0), 'x2': src.marginal_array(1), 'joint': src.mass}[crit.target]
                region = self._curve('shannon', shannon_rd, marginal, crit)
            elif problem == 'conditional':
                region = self._curve('conditional', conditional_rd, src, crit)
            elif problem == 'wynerZiv':
                region = wyner_ziv_region(src, crit, aux, targets, order)
            elif problem == 'bergerYeung':
                region = berger_yeung_region(src, crit, aux, targets)
            elif problem == 'joint':
                region = joint_inner_region(src, crit, order, aux, targets)
            elif problem == 'partial':
                region = partial_inner_region(src, crit, order, aux, targets)
            else:
                report = single_letterization_check(src, crit, targets, aux)
                out.tables['singleLetter'] = (report.rows(), ['d', 'r1Order1', 'r1Order2'])
                out.check('singleLetterization', report.holds,
                          f'violación máxima {report.containment.worst_violation:.3g}')
                return out
        out.tables[problem] = (region.rows(), REGION_COLUMNS)
        if region.witnesses:
            out.documents[f'{problem}-witnesses'] = {'meta': region.meta, 'witnesses': region.witness_json()}
        return out

    def simulate(self) -> RunResult:
        problem = self.cfg.problem
        if problem not in SIMULATE_PROBLEMS:
            raise ConfigError([f'problem: {problem} no se simula ({", ".join(SIMULATE_PROBLEMS)})'])
        eps, schedule = self._need_epsilons(), self._need_schedule()
        cfg, model = self.cfg, self.inputs.model
        budget = settings.codebook_budget
        out = RunResult()
        if problem == 'point':
            rep = point_code_schedule(model.block.marginal(0), model.aux1, eps.epsilon, eps.e1, schedule, cfg.trials,
                                      cfg.seed, eps.support_restricted, budget=budget, threads=self.threads)
            out.tables['point'] = (rep.rows(), None)
            out.check('pointMonotone', rep.monotone, 'tasa de fallo no creciente dentro de 2 sigma', required=False)
        elif problem == 'binned':
            rep = binned_code_schedule(model.block, model.aux1, eps.epsilon, eps.e1, eps.e4, schedule, cfg.trials,
                                       cfg.seed, eps.support_restricted, budget=budget, threads=self.threads)
            out.tables['binned'] = (rep.rows(), TALLY_COLUMNS)
            out.check('binnedMonotone', rep.monotone, 'error global no creciente dentro de 2 sigma', required=False)
            out.check('unionBound', all(p.tally.union_violations == 0 for p in rep.points), required=False)
        else:
            crit = None if problem == 'slepianWolf' else self._need_criterion()
            rep = run_rd_experiment(problem, model, self.inputs.psi, crit, eps, schedule, cfg.trials, cfg.seed,
                                    cfg.corner, cfg.lam, cfg.blocks, budget, self.threads)
            out.tables[problem] = (rep.rows(), EXPERIMENT_COLUMNS)
            out.check('errorMonotone', rep.error_monotone, required=False)
            if problem != 'slepianWolf':
                out.check('distortionGapNonincreasing', rep.delta_nonincreasing, required=False)
        return out

    # --- suites de verificación ---------------------------------------------

    def _verify_typicality(self, out: RunResult) -> None:
        eps = self._need_epsilons()
        lengths = self.cfg.schedule or list(SANDWICH_LENGTHS)
        sandwich = sandwich_schedule(self.inputs.source, lengths, eps.epsilon, eps.support_restricted)
        rows = [{'n': p.n, 'epsilon': p.epsilon, 'probability': p.probability, 'lower': p.lower, 'upper': p.upper,
                 'epsilon1': p.epsilon1, 'mutualInformation': p.mutual_information} for p in sandwich.points]
        out.tables['sandwich'] = (rows, None)
        out.check('sandwichHolds', all(p.holds for p in sandwich.points))
        out.check('sandwichShrinking', sandwich.shrinking,
                  'eps1 ' + ', '.join(f'{p.epsilon1:.6g}' for p in sandwich.points))
        markov = check_markov_lemma(self.inputs.model, eps.epsilon, lengths, self.cfg.trials, self.cfg.seed,
                                    eps.support_restricted, self.threads)
        out.tables['markov'] = (markov.rows(), None)
        out.check('markovMonotone', markov.monotone)

    def _verify_identities(self, out: RunResult) -> None:
        rows, worst = [], 0.0
        for i in range(IDENTITY_MODELS):
            model = random_chain_model(self.cfg.seed, i)
            rep = chain_identity_check(model)
            c = corner_rates(model)
            gap = max(abs(sum(c.corner0) - c.sum_rate), abs(sum(c.corner1) - c.sum_rate))
            worst = max(worst, gap)
            rows.append({'model': i, **rep.residuals, 'cornerGap': gap, 'passed': rep.passed and gap <= 1e-10})
        out.tables['identities'] = (rows, None)
        out.check('chainIdentities', all(r['passed'] for r in rows), f'brecha de esquinas máxima {worst:.3g}')

    def _verify_containment(self, out: RunResult) -> None:
        crit = self._need_criterion()
        report = single_letterization_check(self.inputs.source, crit, self._targets(crit), self.inputs.aux)
        out.tables['containment'] = (report.rows(), ['d', 'r1Order1', 'r1Order2'])
        out.check('singleLetterization', report.holds, f'violación máxima {report.containment.worst_violation:.3g}')

    def _verify_coding(self, out: RunResult) -> None:
        eps, schedule = self._need_epsilons(), self._need_schedule()
        cfg, model, budget = self.cfg, self.inputs.model, settings.codebook_budget
        point = point_code_schedule(model.block.marginal(0), model.aux1, eps.epsilon, eps.e1, schedule, cfg.trials,
                                    cfg.seed, eps.support_restricted, budget=budget, threads=self.threads)
        out.tables['point'] = (point.rows(), None)
        out.check('pointMonotone', point.monotone)
        binned = binned_code_schedule(model.block, model.aux1, eps.epsilon, eps.e1, eps.e4, schedule, cfg.trials,
                                      cfg.seed, eps.support_restricted, budget=budget, threads=self.threads)
        out.tables['binned'] = (binned.rows(), TALLY_COLUMNS)
        out.check('binnedMonotone', binned.monotone)
        out.check('unionBound', all(p.tally.union_violations == 0 for p in binned.points))
        a, b = self.inputs.source.shape
        sw_model = compose_chain(self.inputs.source, identity_channel(a), identity_channel(b), 1)
        n_sw = max(schedule)
        _, bins = corner_sizings(sw_model, 0, eps, n_sw, budget)
        bound = conditional_entropy(self.inputs.source, 1, 0) + 3 * eps.e1 + 3 * eps.e4
        out.check('slepianWolfBinning', bins.log2_k2 < bins.log2_k1 and bins.rate <= bound + 1e-12,
                  f'log2 K1={bins.log2_k1} log2 K2={bins.log2_k2} R2={bins.rate:.4f} cota {bound:.4f}')
        sw = run_rd_experiment('slepianWolf', sw_model, None, None, eps, [n_sw], cfg.trials, cfg.seed,
                               budget=budget, threads=self.threads)
        out.tables['slepianWolf'] = (sw.rows(), EXPERIMENT_COLUMNS)
        last = sw.points[-1]
        out.check('slepianWolfExactOnSuccess', last.inexact_successes == 0)
        success = 1.0 - last.error_rate
        # con binning real y tipicidad fuerte a n' corto la tasa queda lejos de 0.8: se informa, no se exige
        out.check('slepianWolfSuccessRate', success > SLEPIAN_WOLF_SUCCESS,
                  f'reconstrucción exacta {success:.4f} a n\'={n_sw} (referencia {SLEPIAN_WOLF_SUCCESS})',
                  required=False)

    def verify(self, suite: str) -> RunResult:
        handlers = {'typicality': self._verify_typicality, 'identities': self._verify_identities,
                    'containment': self._verify_containment, 'coding': self._verify_coding}
        if suite not in handlers:
            raise ConfigError([f'suite: desconocida {suite} ({", ".join(SUITES)})'])
        out = RunResult()
        handlers[suite](out)
        return out

    def execute(self, command: str, suite: Optional[str] = None) -> RunResult:
        key = self._cache_key(command, suite)
        if key in self._cache:
            return self._cache[key]
        if command == 'info':
            result = self.info()
        elif command == 'region':
            result = self.region()
        elif command == 'simulate':
            result = self.simulate()
        elif command == 'verify':
            result = self.verify(suite or '')
        else:
            raise ConfigError([f'comando desconocido: {command}'])
        self._cache[key] = result
        return result


def run(command: str, cfg: LabConfig, out_dir=None, fmt: str = 'csv', threads: Optional[int] = None,
        suite: Optional[str] = None) -> RunManifest:
    """Ejecuta un comando, escribe los artefactos en `out_dir` y devuelve el manifiesto.

    Raises:
        VerificationFailure: alguna comprobación falló; los artefactos y el manifiesto ya están escritos.
    """
    t0 = time.time()
    pipeline = LabPipeline(cfg, threads)
    result = pipeline.execute(command, suite)
    out = pathlib.Path(out_dir or cfg.output or settings.output_dir)
    stem = command if command != 'verify' else f'verify-{suite}'
    outputs = []
    for name, (rows, columns) in result.tables.items():
        path = out / f'{stem}-{name}.{fmt}'
        count = emit_results(rows, fmt, path, pipeline.config_hash, columns, name)
        outputs.append(OutputEntry(name=name, path=str(path), format=fmt, rows=count))
    for name, doc in result.documents.items():
        path = out / f'{stem}-{name}.json'
        emit_document(doc, path)
        outputs.append(OutputEntry(name=name, path=str(path), format='json', rows=len(doc.get('witnesses', {}))))
    manifest = RunManifest(tool=TOOL_NAME, version=__version__, command=command, suite=suite,
                           config_hash=pipeline.config_hash, seed=cfg.seed, threads=pipeline.threads, format=fmt,
                           config=cfg.model_dump(mode='json', by_alias=True), settings=settings.as_dict(),
                           outputs=outputs, checks=result.checks, wall_time_sec=round(time.time() - t0, 3))
    emit_document(manifest.model_dump(mode='json', by_alias=True), out / f'{stem}-manifest.json')
    logger.info('%s terminado en %.2fs: %d artefactos', stem, manifest.wall_time_sec, len(outputs))
    if not manifest.passed:
        failed = [c.name for c in manifest.checks if not c.passed]
        raise VerificationFailure(f'comprobaciones fallidas: {", ".join(failed)}', report=manifest)
    return manifest
