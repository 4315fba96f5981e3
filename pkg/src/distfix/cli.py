"""Command-line pipelines: gen, corrupt, correct, eval, test.

Exact mode consumes a pmf JSON file and emits a corrected pmf JSON; sample
mode consumes a newline-delimited sample stream (plus a tabulated cdf for
the waterfill method) and emits a stream.  The mode is always stated
explicitly, never inferred from file contents.  Every run writes a
machine-readable report when asked; outputs are byte-identical across runs
with the same arguments and seed.

Exit codes: 0 ok, 1 probability-contract failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fixtures, meta, missing_data, mono_correct, uniformity
from .birge import birge_partition
from .dist_core import DistAccess, Pmf, load_pmf_dict, make_rng, tv_distance
from .errors import DistfixError, ParameterError
from .isotonic import ORACLE_MAX_N, distance_to_monotone_exact

EXIT_OK = 0
EXIT_CONTRACT = 1
EXIT_USAGE = 2

CORRECT_METHODS = (
    "learned", "oblivious", "waterfill", "missing-data",
    "vn", "convolution", "hybrid", "bootstrap", "subgroup", "mono-extract",
)
_MONOTONE_METHODS = {"learned", "oblivious", "waterfill", "missing-data"}


@dataclass
class RunReport:
    """Envelope written next to every artifact; schema version 1."""

    schema: int = 1
    method: str = ""
    mode: str = ""
    params: dict = field(default_factory=dict)
    seed: int = 0
    input_digest: str = ""
    output_digest: str = ""
    tv_to_input: float | None = None
    tv_to_property: float | None = None
    empirical: bool = False
    draws_consumed: int = 0
    cdf_queries: int = 0
    fail_count: int = 0
    restarts: int = 0
    external_random_bits: int | None = None
    wall_time_ms: float = 0.0


def _digest(payload: str) -> str:
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _dump_json(path: str, obj: dict) -> str:
    payload = json.dumps(obj, sort_keys=True, indent=1)
    with open(path, "w") as fh:
        fh.write(payload + "\n")
    return payload


def _read_pmf(path: str, renormalize: bool = False) -> Pmf:
    with open(path) as fh:
        return load_pmf_dict(json.load(fh), renormalize=renormalize)


def _write_pmf(path: str, pmf: Pmf) -> str:
    return _dump_json(path, pmf.to_json_dict())


def _write_stream(path: str, samples) -> str:
    payload = "\n".join(str(int(s)) for s in samples)
    with open(path, "w") as fh:
        fh.write(payload + "\n")
    return payload


def _read_stream(path: str):
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield int(line)


def _finish(args, report: RunReport, t0: float) -> int:
    report.wall_time_ms = (time.time() - t0) * 1000.0
    if args.report:
        _dump_json(args.report, asdict(report))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Commands


def cmd_gen(args) -> int:
    t0 = time.time()
    params = {}
    for key in ("eps", "dist", "s", "r", "steps"):
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            params[key] = val
    pmf = fixtures.generate(args.kind, args.n, seed=args.seed, **params)
    payload = _write_pmf(args.out, pmf)
    report = RunReport(method=f"gen:{args.kind}", mode="exact", params={"n": args.n, **params},
                       seed=args.seed, output_digest=_digest(payload))
    if args.kind == "perturbed-monotone" and args.n <= ORACLE_MAX_N:
        report.tv_to_property = distance_to_monotone_exact(pmf)
    return _finish(args, report, t0)


def cmd_corrupt(args) -> int:
    t0 = time.time()
    if args.model != "missing":
        raise ParameterError("only the 'missing' corruption model exists")
    pmf = _read_pmf(args.pmf)
    out, w = missing_data.inject_missing(pmf, args.frm, args.to)
    payload = _write_pmf(args.out, out)
    report = RunReport(method="corrupt:missing", mode="exact",
                       params={"from": args.frm, "to": args.to, "deleted_weight": w},
                       seed=args.seed, input_digest=_digest(json.dumps(pmf.to_json_dict())),
                       output_digest=_digest(payload))
    return _finish(args, report, t0)


def _correct_exact(args, pmf: Pmf, report: RunReport) -> Pmf:
    method = args.method
    access = DistAccess.from_pmf(pmf, seed=args.seed)
    if method == "learned":
        built = mono_correct.learned_corrector_build(access, eps=args.eps, c=args.c,
                                                     delta=args.delta, exact=True)
        return built.pmf
    if method == "oblivious":
        return mono_correct.oblivious_corrected_pmf(pmf, eps_prime=args.eps)
    if method == "waterfill":
        state = mono_correct.waterfill_preprocess(access, pmf.n, eps=args.eps, m=args.queries)
        out = mono_correct.waterfill_exact_pmf(state)
        report.cdf_queries = state.queries_used
        return out
    if method == "missing-data":
        batch = missing_data.missing_data_improver(
            access, eps=args.eps, eps2=args.eps2, delta=args.delta,
            batch=args.queries, rng=make_rng(args.seed + 1), exact=True)
        return batch.exact_pmf()
    if method == "convolution":
        k = uniformity.convolution_order(args.eps, args.eps2)
        from .dist_core import convolve_power
        return convolve_power(pmf, k)
    if method == "hybrid":
        return uniformity.hybrid_exact_pmf(pmf)
    if method == "bootstrap":
        out, _ = uniformity.bootstrap_exact_pmf(pmf, args.eps, args.eps2)
        return out
    raise ParameterError(f"method {method!r} has no exact mode; use --mode sample")


def _correct_sample(args, report: RunReport) -> list[int]:
    method = args.method
    n = args.n
    if n is None:
        raise ParameterError("--n is required in sample mode")
    rng = make_rng(args.seed)
    if args.stream:
        cdf_table = None
        if args.ceval_file:
            with open(args.ceval_file) as fh:
                cdf_table = json.load(fh)["cdf"]
        access = DistAccess.from_stream(_read_stream(args.stream), n, cdf_table=cdf_table)
    elif args.ceval_file:
        with open(args.ceval_file) as fh:
            table = np.asarray(json.load(fh)["cdf"], dtype=float)
        pmf = Pmf.make(np.diff(table, prepend=0.0), renormalize=True)
        access = DistAccess.from_pmf(pmf, seed=args.seed + 17)
    else:
        raise ParameterError("sample mode needs --stream and/or --ceval-file")

    count = args.count
    out: list[int] = []
    if method == "waterfill":
        if not access.has_ceval:
            raise ParameterError("waterfill needs --ceval-file (cdf-query capability)")
        state = mono_correct.waterfill_preprocess(access, n, eps=args.eps, m=count)
        out = [mono_correct.waterfill_sample(state, rng) for _ in range(count)]
        report.cdf_queries = state.queries_used
        report.restarts = state.restarts
    elif method == "oblivious":
        out = list(mono_correct.oblivious_corrector_sample(access, n, args.eps, rng, count=count))
    elif method == "missing-data":
        batch = missing_data.missing_data_improver(
            access, eps=args.eps, eps2=args.eps2, delta=args.delta, batch=count, rng=rng)
        out = list(batch.take(count))
    elif method == "learned":
        built = mono_correct.learned_corrector_build(access, eps=args.eps, c=args.c,
                                                     delta=args.delta)
        stream = DistAccess.from_pmf(built.pmf, seed=args.seed + 1)
        out = list(stream.draw_many(count))
    elif method in ("vn", "convolution", "hybrid", "bootstrap", "subgroup", "mono-extract"):
        report.external_random_bits = 0
        fails = 0
        if method == "subgroup":
            imp = uniformity.subgroup_uniformity_improve(access, n, args.eps, args.eps2,
                                                         batch=count)
            for _ in range(count):
                s = imp.draw()
                if s is uniformity.FAIL:
                    fails += 1
                else:
                    out.append(int(s))
        else:
            for _ in range(count):
                if method == "vn":
                    s = uniformity.vn_sample(access, n, args.eps, args.delta)
                elif method == "convolution":
                    s = uniformity.convolution_improve(access, n, args.eps, args.eps2)
                elif method == "hybrid":
                    s = uniformity.hybrid_improve(access, n, args.eps)
                elif method == "bootstrap":
                    s = uniformity.bootstrap_improve(access, n, args.eps, args.eps2)
                else:
                    s = uniformity.randomness_from_monotone(access, n, args.eps, args.delta)
                if isinstance(s, uniformity.Special):
                    fails += 1
                else:
                    out.append(int(s))
        report.fail_count = fails
        if count and fails > max(args.delta * count * 2.0, 10):
            report.params["contract_breach"] = True
    else:
        raise ParameterError(f"unknown method {args.method!r}")
    report.draws_consumed = access.draws
    return out


def cmd_correct(args) -> int:
    t0 = time.time()
    report = RunReport(method=args.method, mode=args.mode, seed=args.seed,
                       params={k: getattr(args, k) for k in
                               ("eps", "eps1", "eps2", "delta", "queries", "count", "c")
                               if getattr(args, k, None) is not None})
    if args.method not in CORRECT_METHODS:
        raise ParameterError(f"unknown method {args.method!r}; choose from {CORRECT_METHODS}")
    if args.mode == "exact":
        if not args.pmf:
            raise ParameterError("exact mode needs --pmf")
        pmf = _read_pmf(args.pmf)
        report.input_digest = _digest(json.dumps(pmf.to_json_dict()))
        out = _correct_exact(args, pmf, report)
        payload = _write_pmf(args.out, out)
        report.output_digest = _digest(payload)
        report.tv_to_input = tv_distance(pmf, out)
        if args.method in _MONOTONE_METHODS and out.n <= ORACLE_MAX_N:
            report.tv_to_property = distance_to_monotone_exact(out)
        elif args.method in ("convolution", "hybrid", "bootstrap"):
            report.tv_to_property = tv_distance(out, Pmf.uniform(out.n))
    else:
        samples = _correct_sample(args, report)
        payload = _write_stream(args.out, samples)
        report.output_digest = _digest(payload)
        report.empirical = True
    code = _finish(args, report, t0)
    if report.params.get("contract_breach"):
        return EXIT_CONTRACT
    return code


def cmd_eval(args) -> int:
    t0 = time.time()
    pmf = _read_pmf(args.pmf)
    if args.what == "dist-to-monotone":
        value = distance_to_monotone_exact(pmf)
    elif args.what == "dist-to-uniform":
        value = tv_distance(pmf, Pmf.uniform(pmf.n))
    elif args.what == "tv":
        if not args.pmf2:
            raise ParameterError("eval tv needs --pmf2")
        value = tv_distance(pmf, _read_pmf(args.pmf2))
    else:
        raise ParameterError(f"unknown eval target {args.what!r}")
    print(f"{value:.12g}")
    report = RunReport(method=f"eval:{args.what}", mode="exact", seed=args.seed,
                       params={"value": value},
                       input_digest=_digest(json.dumps(pmf.to_json_dict())))
    return _finish(args, report, t0)


def cmd_test(args) -> int:
    t0 = time.time()
    if args.what != "tolerant-monotone":
        raise ParameterError("only 'tolerant-monotone' is wired")
    pmf = _read_pmf(args.pmf)
    access = DistAccess.from_pmf(pmf, seed=args.seed)
    part = birge_partition(pmf.n, max(args.eps_lo / 2.0, 0.02))
    result = meta.tolerant_tester_from_corrector(
        meta.monotone_batch_corrector,
        meta.surrogate_distance_estimator(part),
        meta.surrogate_monotonicity_tester(part),
        eps_lo=args.eps_lo, eps_hi=args.eps_hi, delta=args.delta,
        access=access, seed=args.seed + 1,
    )
    print(result.verdict)
    report = RunReport(method="test:tolerant-monotone", mode="sample", seed=args.seed,
                       params={"eps_lo": args.eps_lo, "eps_hi": args.eps_hi,
                               "estimate": result.estimate, "verdict": result.verdict},
                       draws_consumed=result.input_draws)
    return _finish(args, report, t0)


# ---------------------------------------------------------------------------
# Argument wiring


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="distfix",
                                  description="sampling correctors for discrete distributions")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out.json")
        p.add_argument("--report", default=None)

    g = sub.add_parser("gen", help="generate a fixture pmf")
    g.add_argument("kind", choices=fixtures.KINDS)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--eps", type=float, default=None)
    g.add_argument("--dist", type=float, default=None)
    g.add_argument("--s", type=float, default=None)
    g.add_argument("--r", type=float, default=None)
    g.add_argument("--steps", type=int, default=None)
    common(g)
    g.set_defaults(fn=cmd_gen)

    c = sub.add_parser("corrupt", help="inject an error model into a pmf")
    c.add_argument("model", choices=["missing"])
    c.add_argument("--pmf", required=True)
    c.add_argument("--from", dest="frm", type=int, required=True)
    c.add_argument("--to", dest="to", type=int, required=True)
    common(c)
    c.set_defaults(fn=cmd_corrupt)

    r = sub.add_parser("correct", help="run a corrector/improver")
    r.add_argument("--method", required=True, choices=CORRECT_METHODS)
    r.add_argument("--mode", required=True, choices=["exact", "sample"])
    r.add_argument("--pmf", default=None, help="input pmf (exact mode)")
    r.add_argument("--stream", default=None, help="input sample stream (sample mode)")
    r.add_argument("--ceval-file", default=None, help="tabulated cdf JSON (waterfill)")
    r.add_argument("--n", type=int, default=None)
    r.add_argument("--eps", type=float, required=True)
    r.add_argument("--eps1", type=float, default=None)
    r.add_argument("--eps2", type=float, default=None)
    r.add_argument("--delta", type=float, default=0.1)
    r.add_argument("--c", type=float, default=1.0)
    r.add_argument("--queries", type=int, default=32,
                   help="committed batch size m (waterfill, missing-data)")
    r.add_argument("--count", type=int, default=1000,
                   help="samples to emit in sample mode")
    common(r)
    r.set_defaults(fn=cmd_correct)

    e = sub.add_parser("eval", help="exact-mode evaluations")
    e.add_argument("what", choices=["dist-to-monotone", "dist-to-uniform", "tv"])
    e.add_argument("--pmf", required=True)
    e.add_argument("--pmf2", default=None)
    common(e)
    e.set_defaults(fn=cmd_eval)

    t = sub.add_parser("test", help="property-testing harnesses")
    t.add_argument("what", choices=["tolerant-monotone"])
    t.add_argument("--pmf", required=True)
    t.add_argument("--eps-lo", type=float, required=True)
    t.add_argument("--eps-hi", type=float, required=True)
    t.add_argument("--delta", type=float, default=0.1)
    common(t)
    t.set_defaults(fn=cmd_test)
    return top


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except DistfixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
