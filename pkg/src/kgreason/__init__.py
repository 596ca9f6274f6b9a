"""Plan, retrieve and reason over knowledge graphs.

Relation-path plans are mined as shortest paths between question and answer
entities, learned by a planner, grounded in the graph with a constrained
breadth-first search, and turned into answers.
"""

__version__ = "0.1.0"

from .graph import GraphLookupError, KnowledgeGraph, Triple, TripleParseError, Vocabulary, build_graph, read_triples
from .paths import (PlanParseError, ReasoningPath, RelationPath, parse_plan, parse_reasoning_path,
                    serialize_plan, serialize_reasoning_path)
from .retrieval import RetrievalResult, retrieve_for_plans, retrieve_paths
from .mining import MinedPlans, mine_shortest_relation_paths, planning_targets
from .planning import (STOP, BeamConfig, CountPlanner, UniformPlanner, fit_count_planner, generate_plans,
                       llm_generate_plans, plan_logprob, planning_loss)
from .reasoning import (AnswerSet, FrequencyScorer, answers_all, answers_vote, combined_objective,
                        llm_reason, reasoning_loss)
from .qa import QAExample, load_qa
from .datasets import InstructionRecord, build_planning_dataset, build_reasoning_dataset
from .evaluation import EvalReport, evaluate_run, f1_set, hits_at_1, normalize_answer
from .llm import GenerationRequest, HttpGenerationClient, ScriptedClient, scripted_mock
