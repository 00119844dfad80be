from fla_slt.evaluation.beam_search import TranslationHypothesis, beam_search, greedy_decode
from fla_slt.evaluation.evaluator import EvalReport, evaluate_model, score_hypotheses
from fla_slt.evaluation.metrics import bleu, rouge_l, sentence_bleu
