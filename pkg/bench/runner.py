"""
Benchmark runner.

For every (model, setting, shuffled) cell each question is turned into a
prompt from the (possibly donor's) birth data, sent to the provider and
scored against the question's own gold answer. Questions run concurrently;
aggregation is ordered by person_id and question_id regardless of completion
order.
"""

import asyncio
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import structlog

from bazi.analysis import AnalysisBundle, Analyzer
from bazi.chart import FourPillarsChart, chart_builder
from bazi.cycles import CyclesReport, cycle_engine
from bazi.persona import (
    SECTION_KEYS,
    PersonaBuilder,
    QuestionContext,
    TimeWindow,
    choice_letter,
    get_template,
)
from bench.dataset import PersonRecord, Question
from bench.report import EvalReport, EvalSetting, ReportCell
from bench.shuffle import ShuffleMode, ShufflePlan, birth_inputs
from config import GlobalConfig
from errors import TransportError
from llm.cache import ResponseCache, cached_complete
from llm.client import ChatClient, ChatRequest, ProviderConfig
from llm.extract import extract_choice

logger = structlog.get_logger(__name__)

STATUS_OK = "ok"
STATUS_EXTRACTION_FAILURE = "extraction_failure"
STATUS_TRANSPORT_ERROR = "transport_error"

RULE_KNOWLEDGE_TITLE = "BaZi rule knowledge"
KNOWLEDGE_NOTES_TITLE = "Knowledge analysis"
KNOWLEDGE_INSTRUCTION = (
    "Using the chart, rules and period above, write a concise BaZi knowledge analysis of this "
    "person's {domain} prospects for {period}. Do not answer any question yet."
)


@dataclass(frozen=True)
class ModelSpec:
    """
    One model under test. ``knowledge_*`` configure the first stage of the
    full model and default to the answering model.
    """
    model_id: str
    provider: ProviderConfig
    knowledge_model_id: Optional[str] = None
    knowledge_provider: Optional[ProviderConfig] = None

    def describe(self) -> Dict[str, Any]:
        return {
            "model_id": self.model_id,
            "provider": self.provider.describe(),
            "knowledge_model_id": self.knowledge_model_id or self.model_id,
            "knowledge_provider": (self.knowledge_provider or self.provider).describe(),
        }


@dataclass(frozen=True)
class QuestionOutcome:
    model_id: str
    setting: EvalSetting
    shuffled: bool
    person_id: str
    question_id: str
    dimension: str
    predicted_index: Optional[int]
    gold_index: int
    status: str
    prompt_hash: str
    error: Optional[str] = None

    @property
    def correct(self) -> bool:
        return self.status == STATUS_OK and self.predicted_index == self.gold_index

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model_id": self.model_id,
            "setting": self.setting.value,
            "shuffled": self.shuffled,
            "person_id": self.person_id,
            "question_id": self.question_id,
            "dimension": self.dimension,
            "predicted_index": self.predicted_index,
            "gold_index": self.gold_index,
            "correct": self.correct,
            "status": self.status,
        }


@dataclass(frozen=True)
class SubjectView:
    """What the model sees about one person: chart, analysis and cycles per window."""
    chart: FourPillarsChart
    bundle: AnalysisBundle


class BenchmarkRunner:
    """Runs benchmark cells and collects per-question outcomes."""

    def __init__(self, config: GlobalConfig, cache: Optional[ResponseCache] = None):
        self.config = config
        self.cache = cache
        self.analyzer = Analyzer.from_config(config)
        self.persona = PersonaBuilder.from_config(config)
        self.template = get_template(config.template_version)
        self.outcomes: List[QuestionOutcome] = []
        self._clients: Dict[ProviderConfig, ChatClient] = {}
        self._views: Dict[Tuple[str, bool], SubjectView] = {}
        self._cycles: Dict[Tuple[str, bool, int, int], CyclesReport] = {}
        self._knowledge: Dict[str, "asyncio.Task[str]"] = {}

    def client_for(self, provider: ProviderConfig) -> ChatClient:
        client = self._clients.get(provider)
        if client is None:
            client = self._clients[provider] = ChatClient(provider)
        return client

    # ==================== Subjects ====================

    def subject_view(self, record: PersonRecord, by_id: Dict[str, PersonRecord],
                     shuffle: Optional[ShufflePlan]) -> SubjectView:
        key = (record.person_id, shuffle is not None)
        view = self._views.get(key)
        if view is None:
            if shuffle is None:
                birth, place = record.birth, record.place
            else:
                donor = by_id[shuffle.donor_of(record.person_id)]
                birth, place = birth_inputs(record, donor, ShuffleMode(self.config.shuffle_mode))
            chart = chart_builder.build_chart_from_config(birth, place.location, record.gender, self.config)
            view = self._views[key] = SubjectView(chart, self.analyzer.analyze(chart))
        return view

    def cycles_for(self, person_id: str, shuffled: bool, view: SubjectView, window: TimeWindow) -> CyclesReport:
        key = (person_id, shuffled, window.start_year, window.end_year)
        report = self._cycles.get(key)
        if report is None:
            report = self._cycles[key] = cycle_engine.cycles_report(
                view.chart, window.start_year, window.end_year,
                count=self.config.luck_pillar_count,
                include_months=self.config.include_flowing_month,
                include_days=self.config.include_flowing_day,
            )
        return report

    # ==================== Prompts ====================

    def question_prompt(self, view: SubjectView, cycles: CyclesReport, question: Question,
                        window: TimeWindow, setting: EvalSetting, knowledge: Optional[str] = None) -> str:
        context = QuestionContext(question.text, question.choices)
        if setting is EvalSetting.VANILLA_BAZI:
            include, extra = ("chart",), ()
        elif setting is EvalSetting.BAZI_RULE_KNOWLEDGE:
            include, extra = ("chart",), ((RULE_KNOWLEDGE_TITLE, self.persona.rule_knowledge()),)
        else:
            include, extra = SECTION_KEYS, ((KNOWLEDGE_NOTES_TITLE, (knowledge or "").strip() or "none"),)
        prompt = self.persona.render_prompt(
            view.chart, view.bundle, cycles, [question.dimension], context,
            template_version=self.config.template_version, window=window, include=include, extra_sections=extra,
        )
        return prompt.rendered_text

    def knowledge_prompt(self, view: SubjectView, cycles: CyclesReport, question: Question, window: TimeWindow) -> str:
        instruction = KNOWLEDGE_INSTRUCTION.format(domain=question.dimension.value.lower(), period=window.label())
        prompt = self.persona.render_prompt(
            view.chart, view.bundle, cycles, [question.dimension],
            template_version=self.config.template_version, window=window,
            extra_sections=(("Task", instruction),),
        )
        return prompt.rendered_text

    def _request(self, model_id: str, user_text: str, metadata: Dict[str, Any]) -> ChatRequest:
        return ChatRequest(
            model_id=model_id,
            system_text=self.template.system_text,
            user_text=user_text,
            temperature=self.config.llm_temperature,
            max_output_tokens=self.config.llm_max_output_tokens,
            metadata=metadata,
        )

    async def _knowledge_notes(self, spec: ModelSpec, user_text: str) -> str:
        """First stage of the full model, shared by every question with the same knowledge prompt."""
        model_id = spec.knowledge_model_id or spec.model_id
        request = self._request(model_id, user_text, {"stage": "knowledge"})
        task = self._knowledge.get(request.request_hash)
        if task is None:
            client = self.client_for(spec.knowledge_provider or spec.provider)
            task = asyncio.ensure_future(cached_complete(request, client, self.cache))
            self._knowledge[request.request_hash] = task
        return (await task).text

    # ==================== Evaluation ====================

    async def evaluate_question(self, record: PersonRecord, question: Question, spec: ModelSpec,
                                setting: EvalSetting, view: SubjectView, shuffled: bool) -> QuestionOutcome:
        window = self.persona.window_for(view.chart, question.period_year, self.config.reference_age)
        cycles = self.cycles_for(record.person_id, shuffled, view, window)
        base = dict(model_id=spec.model_id, setting=setting, shuffled=shuffled, person_id=record.person_id,
                    question_id=question.question_id, dimension=question.dimension.value,
                    gold_index=question.gold_index)
        try:
            knowledge = None
            if setting is EvalSetting.FULL_MODEL:
                knowledge = await self._knowledge_notes(spec, self.knowledge_prompt(view, cycles, question, window))
            user_text = self.question_prompt(view, cycles, question, window, setting, knowledge)
            request = self._request(spec.model_id, user_text, {
                "stage": "answer",
                "n_choices": len(question.choices),
                "gold_letter": choice_letter(question.gold_index),
            })
            response = await cached_complete(request, self.client_for(spec.provider), self.cache)
        except TransportError as e:
            logger.warning("question_transport_error", person=record.person_id, question=question.question_id,
                           model=spec.model_id, error=str(e))
            return QuestionOutcome(predicted_index=None, status=STATUS_TRANSPORT_ERROR, prompt_hash="",
                                   error=str(e), **base)

        predicted = extract_choice(response.text, len(question.choices))
        status = STATUS_OK if predicted is not None else STATUS_EXTRACTION_FAILURE
        if predicted is None:
            logger.info("answer_unparsed", person=record.person_id, question=question.question_id, model=spec.model_id)
        return QuestionOutcome(predicted_index=predicted, status=status, prompt_hash=request.request_hash, **base)

    async def run_cell(self, records: Sequence[PersonRecord], spec: ModelSpec, setting: EvalSetting,
                       shuffle: Optional[ShufflePlan]) -> ReportCell:
        by_id = {r.person_id: r for r in records}
        shuffled = shuffle is not None
        jobs = []
        for record in sorted(records, key=lambda r: r.person_id):
            view = self.subject_view(record, by_id, shuffle)
            for question in sorted(record.questions, key=lambda q: q.question_id):
                jobs.append(self.evaluate_question(record, question, spec, setting, view, shuffled))
        outcomes = await asyncio.gather(*jobs)
        outcomes = sorted(outcomes, key=lambda o: (o.person_id, o.question_id))
        self.outcomes.extend(outcomes)

        per_dimension: Dict[str, Dict[str, int]] = {}
        for o in outcomes:
            entry = per_dimension.setdefault(o.dimension, {"n": 0, "correct": 0})
            entry["n"] += 1
            entry["correct"] += int(o.correct)
        cell = ReportCell(
            model_id=spec.model_id,
            setting=setting,
            shuffled=shuffled,
            n_questions=len(outcomes),
            correct=sum(1 for o in outcomes if o.correct),
            extraction_failures=sum(1 for o in outcomes if o.status == STATUS_EXTRACTION_FAILURE),
            transport_errors=sum(1 for o in outcomes if o.status == STATUS_TRANSPORT_ERROR),
            per_dimension={dim: per_dimension[dim] for dim in sorted(per_dimension)},
        )
        logger.info("eval_cell_done", model=spec.model_id, setting=setting.value, shuffled=shuffled,
                    accuracy=cell.accuracy, n=cell.n_questions)
        return cell

    async def run(
        self,
        records: Sequence[PersonRecord],
        settings: Sequence[EvalSetting],
        models: Sequence[ModelSpec],
        shuffle: Optional[ShufflePlan] = None,
        include_unshuffled: bool = True,
    ) -> EvalReport:
        plans: List[Optional[ShufflePlan]] = []
        if shuffle is None or include_unshuffled:
            plans.append(None)
        if shuffle is not None:
            plans.append(shuffle)

        cells = []
        for spec in models:
            for setting in settings:
                for plan in plans:
                    cells.append(await self.run_cell(records, spec, setting, plan))

        report = EvalReport(cells, self._metadata(records, settings, models, shuffle))
        report.sort_cells()
        report.apply_baselines()

        total = sum(c.n_questions for c in report.cells)
        errors = sum(c.transport_errors for c in report.cells)
        if total and errors / total > self.config.invalid_run_threshold:
            report.valid = False
            report.invalid_reasons.append(
                f"{errors} of {total} questions hit transport errors "
                f"(threshold {self.config.invalid_run_threshold:.0%})"
            )
            logger.error("eval_run_invalid", transport_errors=errors, total=total)
        return report

    def _metadata(self, records: Sequence[PersonRecord], settings: Sequence[EvalSetting],
                  models: Sequence[ModelSpec], shuffle: Optional[ShufflePlan]) -> Dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "dataset": {"persons": len(records), "questions": sum(len(r.questions) for r in records)},
            "settings": [s.value for s in settings],
            "models": [m.describe() for m in models],
            "shuffle": None if shuffle is None else {**shuffle.to_dict(), "mode": self.config.shuffle_mode},
            "template_version": self.config.template_version,
            "rule_profile_version": self.analyzer.profile.version,
            "shensha_catalog_version": self.analyzer.catalog.version,
            "trait_lexicon_version": self.persona.lexicon_version,
            "domain_map_version": self.persona.domain_map_version,
            "cache": {"enabled": self.cache is not None},
        }


async def run_eval(
    records: Sequence[PersonRecord],
    setting: EvalSetting,
    providers: Sequence[ModelSpec],
    shuffle: Optional[ShufflePlan],
    config: GlobalConfig,
    cache: Optional[ResponseCache] = None,
) -> EvalReport:
    """One setting over one or more models; with a shuffle plan both the real and shuffled cells run."""
    runner = BenchmarkRunner(config, cache)
    return await runner.run(records, [setting], providers, shuffle)
