from fla_slt.diagnostics.dominance import DominanceReport, dominance_report
from fla_slt.diagnostics.norm_trace import NormRecord, NormTrace, export_trace, load_trace
from fla_slt.diagnostics.watcher import BACKEND_LAST, ENCODER_LAST, NormWatch, record_step, watch
