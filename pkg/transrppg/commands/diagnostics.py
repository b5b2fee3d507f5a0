"""Model diagnostics: attention export, gradient suite, parameter and FLOP budget."""
import argparse

from ..decorators.commands import arg, command
from ..mstmap.pipeline import prepare_sample
from ..mstmap.traces import read_traces
from ..model.attention import export_attention
from ..model.diagnostics import run_gradient_suite
from ..model.transrppg import REFERENCE_FLOPS, flop_count, forward
from ..model.weights import init_weights, load_weights, param_count
from ..tensor import no_grad
from ..utils.logging import get_logger
from ._common import out_dir, run_config

logger = get_logger(__name__)

# Published parameter figure, compared against the backbone count.
REFERENCE_PARAMS = 547_000


@command(
    name="attn",
    help="Export fusion-layer attention of the combined class token for one sample",
    arguments=[
        arg("trace", help="trace file"),
        arg("--checkpoint", default=None, help="weights (default: fresh initialization from the seed)"),
    ],
)
def cmd_attn(args: argparse.Namespace) -> int:
    cfg = run_config(args)
    if args.checkpoint:
        weights = load_weights(cfg.model, args.checkpoint)
    else:
        weights = init_weights(cfg.model, seed=cfg.model_seed())
    sample = prepare_sample(read_traces(args.trace), cfg.color, cfg.model)
    with no_grad():
        out = forward(sample.face, sample.bg, weights, record_attention=True)
    for path in export_attention(out.attention, out_dir(args)):
        print(path)
    return 0


@command(name="gradcheck", help="Finite-difference check of every op and the model loss")
def cmd_gradcheck(args: argparse.Namespace) -> int:
    results = run_gradient_suite()
    for result in results:
        print(result.format())
    worst = max(r.worst for r in results)
    print(f"worst_rel_err={worst:.3e}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"❌ Gradient check failed for: {', '.join(failed)}")
        return 1
    return 0


@command(name="params", help="Print the trainable-parameter breakdown and the FLOP estimate")
def cmd_params(args: argparse.Namespace) -> int:
    cfg = run_config(args)
    counts = param_count(cfg.model)
    for line in counts.lines():
        print(line)
    flops = flop_count(cfg.model)
    for line in flops.lines():
        print(f"flops_{line}")
    deviation = abs(counts.backbone - REFERENCE_PARAMS) / REFERENCE_PARAMS
    logger.info(f"📊 Backbone {counts.backbone:,} parameters ({deviation:.2%} from {REFERENCE_PARAMS:,})")
    logger.info(
        f"📊 Forward {flops.total:,} FLOPs at 2*m*k*n per product "
        f"({flops.total / REFERENCE_FLOPS:.2f}x the published {REFERENCE_FLOPS:,})"
    )
    return 0
