from magnet.metrics.report import Comparison, EvalReport, evaluate, render_table
from magnet.metrics.scores import ConfusionCounts, auc, confusion, nrmse, rates, ssim
