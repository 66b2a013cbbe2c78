"""Command-line front end.

Exit codes: 0 on success, 2 for configuration or input errors, 3 for runtime failures.
"""
from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

from raremotif import presets
from raremotif.errors import ConfigurationError, RareMotifError
from raremotif.estimators import (
    AdaptivePolicy,
    ConstantPolicy,
    EstimateReport,
    InsertionPolicy,
    TablePolicy,
    algorithm_a,
    algorithm_b,
    combined,
    direct_mc,
    huang_approx,
)
from raremotif.markov import Alphabet, MarkovModel
from raremotif.oracle import exact_pvalue
from raremotif.patterns import (
    CoOccurrence,
    ExplicitSet,
    InvertedRepeat,
    Palindrome,
    PatternFamily,
    Pswm,
    PswmMotif,
    StructuredMotif,
    count_nonoverlapping,
    load_pswm,
)
from raremotif.rng import auxiliary_stream
from raremotif.wordbank import JOINED, SEPARATE, WordSampler, sampler_for

ALGORITHMS = ("direct", "is-a", "is-b", "combined")
SEED_ENV = "RAREMOTIF_SEED"
DEFAULT_SEED = 0


# --- model, pattern and policy specs ---------------------------------------------


def load_model(spec: str) -> MarkovModel:
    """A chain preset name or a transition-matrix file."""
    if spec in presets.CHAINS:
        return presets.model(spec)
    path = Path(spec)
    if not path.is_file():
        raise ConfigurationError(f"no chain preset or matrix file named {spec!r}")
    return MarkovModel.from_file(path)


def load_pswm_spec(spec: str, alphabet: Alphabet) -> Pswm:
    if spec in presets.PSWMS:
        return presets.pswm(spec)
    path = Path(spec)
    if not path.is_file():
        raise ConfigurationError(f"no PSWM preset or file named {spec!r}")
    return load_pswm(path, alphabet)


def _ints(parts: list[str], what: str) -> list[int]:
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise ConfigurationError(f"{what} needs integer parameters, got {parts}") from None


def _number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"expected a number, got {text!r}") from None


def parse_pattern(spec: str, alphabet: Alphabet) -> PatternFamily:
    """Pattern mini-language.

    explicit:w1,w2,...   palindrome:m   inverted:m:d1:d2   pswm:NAME_OR_FILE:t
    structured:x:y:d1:d2   cooccurrence:PSWM1:t1:PSWM2:t2:d1:d2

    ``cooccurrence-any`` (same parameters) is expanded by :func:`expand_patterns`.
    """
    kind, _, rest = spec.strip().partition(":")
    parts = rest.split(":") if rest else []
    kind = kind.lower()
    if kind == "explicit" and len(parts) == 1:
        return ExplicitSet(alphabet.encode(w) for w in parts[0].split(",") if w)
    if kind == "palindrome" and len(parts) == 1:
        return Palindrome(*_ints(parts, kind), alphabet)
    if kind == "inverted" and len(parts) == 3:
        return InvertedRepeat(*_ints(parts, kind), alphabet)
    if kind == "pswm" and len(parts) == 2:
        return PswmMotif(load_pswm_spec(parts[0], alphabet), _number(parts[1]))
    if kind == "structured" and len(parts) == 4:
        d1, d2 = _ints(parts[2:], kind)
        return StructuredMotif(alphabet.encode(parts[0]), alphabet.encode(parts[1]), d1, d2)
    if kind == "cooccurrence" and len(parts) == 6:
        first = PswmMotif(load_pswm_spec(parts[0], alphabet), _number(parts[1]))
        second = PswmMotif(load_pswm_spec(parts[2], alphabet), _number(parts[3]))
        d1, d2 = _ints(parts[4:], kind)
        return CoOccurrence(first, second, d1, d2)
    raise ConfigurationError(f"cannot parse pattern {spec!r}")


def expand_patterns(specs: list[str]) -> list[str]:
    """Rewrite each ``cooccurrence-any`` spec as the two fixed-order co-occurrences."""
    out = []
    for spec in specs:
        kind, _, rest = spec.strip().partition(":")
        parts = rest.split(":")
        if kind.lower() == "cooccurrence-any":
            if len(parts) != 6:
                raise ConfigurationError(f"cannot parse pattern {spec!r}")
            p1, t1, p2, t2, d1, d2 = parts
            out.append(f"cooccurrence:{p1}:{t1}:{p2}:{t2}:{d1}:{d2}")
            out.append(f"cooccurrence:{p2}:{t2}:{p1}:{t1}:{d1}:{d2}")
        else:
            out.append(spec)
    return out


def parse_policy(spec: str) -> InsertionPolicy:
    kind, _, arg = spec.strip().partition(":")
    if kind == "adaptive":
        return AdaptivePolicy(_ints([arg], "adaptive policy")[0] if arg else None)
    if kind == "constant":
        return ConstantPolicy(_number(arg) if arg else None)
    if kind == "table" and arg:
        return TablePolicy(_number(x) for x in arg.split(","))
    raise ConfigurationError(f"cannot parse insertion policy {spec!r}")


# --- run configuration --------------------------------------------------------------


@dataclass
class RunConfig:
    model: str = "uniform"
    patterns: list[str] = field(default_factory=list)
    variant: str = ""
    delta: float = 0.0
    xi: str = "estimate"
    n: int = 100
    c: int = 1
    algorithm: str = "is-a"
    combine_with: str = "A"
    policy: str = "adaptive"
    replicates: int = 1000
    seed: int = DEFAULT_SEED
    threads: int = 1
    output: str = "block"

    SECTIONS = {
        "model": ("model",),
        "pattern": ("patterns", "variant", "delta", "xi"),
        "run": ("n", "c", "algorithm", "combine_with", "policy", "replicates", "seed", "threads", "output"),
    }
    KEYS = {"model": "matrix", "patterns": "spec"}

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.patterns:
            raise ConfigurationError("no pattern given")
        if self.algorithm != "combined" and len(expand_patterns(self.patterns)) != 1:
            raise ConfigurationError("several patterns (or cooccurrence-any) need --algorithm combined")
        if self.algorithm == "is-a" and self.c != 1:
            raise ConfigurationError("algorithm A supports c = 1 only")
        if self.algorithm == "combined" and self.combine_with.upper() == "A" and self.c != 1:
            raise ConfigurationError("combined estimation with algorithm A supports c = 1 only")
        if self.combine_with.upper() not in ("A", "B"):
            raise ConfigurationError("combine_with must be A or B")
        if self.n < 1 or self.c < 1 or self.replicates < 1 or self.threads < 1:
            raise ConfigurationError("n, c, replicates and threads must be positive")
        if self.output not in ("tsv", "block"):
            raise ConfigurationError("output must be tsv or block")
        if self.variant not in ("", JOINED, SEPARATE):
            raise ConfigurationError(f"variant must be {JOINED} or {SEPARATE}")

    def to_ini(self) -> str:
        lines = []
        for section, names in self.SECTIONS.items():
            lines.append(f"[{section}]")
            for name in names:
                value = getattr(self, name)
                if name == "patterns":
                    value = "\n    ".join(value)
                lines.append(f"{self.KEYS.get(name, name)} = {value}".rstrip())
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigurationError(f"malformed config: {exc}") from None
        types = {f.name: f.type for f in fields(cls)}
        cfg = cls()
        for section, names in cls.SECTIONS.items():
            if not parser.has_section(section):
                continue
            known = {cls.KEYS.get(n, n): n for n in names}
            for key, raw in parser[section].items():
                if key not in known:
                    raise ConfigurationError(f"unknown key {key!r} in [{section}]")
                name = known[key]
                setattr(cfg, name, _coerce(name, raw, types[name]))
        return cfg


def _coerce(name: str, raw: str, typ: str):
    if name == "patterns":
        return [ln.strip() for ln in raw.splitlines() if ln.strip()]
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be a number, got {raw!r}") from None
    return raw.strip()


def build_sampler(model: MarkovModel, family: PatternFamily, cfg: RunConfig) -> WordSampler:
    kwargs = {"delta": cfg.delta, "seed": cfg.seed}
    if cfg.variant:
        kwargs["variant"] = cfg.variant
    xi = cfg.xi
    kwargs["xi"] = xi if xi in ("estimate", "exact") else _number(xi)
    return sampler_for(model, family, **kwargs)


def beta_diagnostics(sampler: WordSampler, seed: int, draws: int = 1000) -> dict:
    stream = auxiliary_stream(seed, 1)
    betas = [sampler.beta(sampler.draw(stream)) for _ in range(draws)]
    return {"beta_min_sampled": f"{min(betas):.6e}", "beta_max_sampled": f"{max(betas):.6e}"}


def execute(cfg: RunConfig, diagnostics: bool = False) -> EstimateReport:
    cfg.validate()
    model = load_model(cfg.model)
    families = [parse_pattern(p, model.alphabet) for p in expand_patterns(cfg.patterns)]
    workers = cfg.threads
    if cfg.algorithm == "direct":
        return direct_mc(model, families[0], cfg.n, cfg.c, cfg.replicates, cfg.seed, workers)
    samplers = [build_sampler(model, f, cfg) for f in families]
    if cfg.algorithm == "is-a":
        report = algorithm_a(model, samplers[0], cfg.n, cfg.replicates, cfg.seed, workers)
    elif cfg.algorithm == "is-b":
        policy = parse_policy(cfg.policy)
        report = algorithm_b(model, samplers[0], policy, cfg.n, cfg.c, cfg.replicates, cfg.seed, workers)
    else:
        policies = [parse_policy(cfg.policy) for _ in samplers]
        report = combined(
            model, samplers, [cfg.c] * len(samplers), cfg.combine_with, cfg.n, cfg.replicates, cfg.seed,
            policies, workers,
        )
    if diagnostics:
        for s in samplers:
            report.diagnostics.update(beta_diagnostics(s, cfg.seed))
    else:
        report.diagnostics.clear()
    return report


# --- argument parsing ---------------------------------------------------------------


def _seed_default() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _run_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, help=f"master seed (falls back to ${SEED_ENV}, then {DEFAULT_SEED})")
    p.add_argument("--replicates", "-K", type=int, help="number of replicates K")
    p.add_argument("--threads", type=int, help="maximum worker processes")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="raremotif", description="Rare word-pattern p-values by importance sampling.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _run_options()

    run = sub.add_parser("run", parents=[common], help="estimate P{N >= c} for a configured pattern")
    run.add_argument("--config", type=Path, help="INI file with [model], [pattern], [run] sections")
    run.add_argument("--model", help="chain preset or transition-matrix file")
    run.add_argument("--pattern", action="append", help="pattern spec; repeat for combined runs")
    run.add_argument("--algorithm", choices=ALGORITHMS)
    run.add_argument("--combine-with", choices=("A", "B"), help="algorithm used inside combined runs")
    run.add_argument("--policy", help="adaptive[:m] | constant[:rho] | table:r1,r2,...")
    run.add_argument("--variant", choices=(JOINED, SEPARATE), help="palindrome sampler variant")
    run.add_argument("--delta", type=float, help="tilt target shift for PSWM samplers")
    run.add_argument("--xi", help="estimate | exact | a fixed number")
    run.add_argument("--c", type=int)
    run.add_argument("--n", type=int)
    run.add_argument("--output", choices=("tsv", "block"))
    run.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    run.add_argument("--diagnostics", action="store_true", help="include sampler diagnostics")

    score = sub.add_parser("score", help="PSWM score of a word")
    score.add_argument("--pswm", required=True, help="PSWM preset or file")
    score.add_argument("--word", required=True)

    count = sub.add_parser("count", help="non-overlapping count N of a pattern in a sequence")
    count.add_argument("--pattern", required=True)
    count.add_argument("--seq", help="sequence string")
    count.add_argument("--seq-file", type=Path, help="file with the sequence; '#' lines ignored")

    bank = sub.add_parser("bank", help="draw words from a sampler with their q and beta")
    bank.add_argument("--pattern", required=True)
    bank.add_argument("--model", default="uniform")
    bank.add_argument("--draws", type=int, default=10)
    bank.add_argument("--seed", type=int)
    bank.add_argument("--variant", choices=(JOINED, SEPARATE))

    oracle = sub.add_parser("oracle", help="exact P{N >= c} by enumerating every sequence")
    oracle.add_argument("--pattern", required=True)
    oracle.add_argument("--model", default="uniform")
    oracle.add_argument("--n", type=int, required=True)
    oracle.add_argument("--c", type=int, default=1)

    t1 = sub.add_parser("table1", parents=[common], help="PSWM motifs, uniform chain, algorithm A")
    t1.add_argument("--direct", action="store_true", help="also run direct Monte Carlo")
    t2 = sub.add_parser("table2", parents=[common], help="SWI5 motif, algorithm B, c = 1..4")
    t2.add_argument("--direct", action="store_true", help="also run direct Monte Carlo")
    t3 = sub.add_parser("table3", parents=[common], help="structured motifs, algorithm A")
    t3.add_argument("--gap", default="16,18", help="d1,d2 (16,18 or 5,50)")
    t3.add_argument("--motif", action="append", help="x:y; repeat to select several (default: all eight)")
    t3.add_argument("--no-combined", action="store_true", help="skip the combined p-value")
    return parser


def _resolve_seed(arg: int | None, fallback: int | None = None) -> int:
    if arg is not None:
        return arg
    env = _seed_default()
    if env is not None:
        return env
    return DEFAULT_SEED if fallback is None else fallback


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_ini(args.config.read_text()) if args.config else RunConfig()
    overrides = {
        "model": args.model,
        "patterns": args.pattern,
        "algorithm": args.algorithm,
        "combine_with": args.combine_with,
        "policy": args.policy,
        "variant": args.variant,
        "delta": args.delta,
        "xi": args.xi,
        "c": args.c,
        "n": args.n,
        "output": args.output,
        "replicates": args.replicates,
        "threads": args.threads,
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(cfg, name, value)
    if args.seed is not None:
        cfg.seed = args.seed
    elif not (args.config and "seed" in _config_keys(args.config)):
        cfg.seed = _resolve_seed(None)
    return cfg


def _config_keys(path: Path) -> set[str]:
    parser = configparser.ConfigParser()
    parser.read_string(path.read_text())
    return {k for s in parser.sections() for k in parser[s]}


def cmd_run(args) -> int:
    if args.config is not None and not args.config.is_file():
        raise ConfigurationError(f"config file {args.config} not found")
    cfg = config_from_args(args)
    cfg.validate()
    if args.dump_config:
        print(cfg.to_ini(), end="")
        return 0
    report = execute(cfg, args.diagnostics)
    if cfg.output == "tsv":
        print(report.to_tsv(header=True))
        for key, val in report.diagnostics.items():
            print(f"# {key} = {val}", file=sys.stderr)
    else:
        print(report.to_block())
    return 0


def cmd_score(args) -> int:
    alphabet = Alphabet.dna()
    pswm = load_pswm_spec(args.pswm, alphabet)
    score = pswm.score(alphabet.encode(args.word))
    print(int(score) if float(score).is_integer() else score)
    return 0


def _read_sequence(args) -> str:
    if args.seq is not None:
        return args.seq
    if args.seq_file is not None:
        lines = [ln.split("#", 1)[0] for ln in args.seq_file.read_text().splitlines()]
        return "".join("".join(ln.split()) for ln in lines)
    raise ConfigurationError("give --seq or --seq-file")


def cmd_count(args) -> int:
    alphabet = Alphabet.dna()
    family = parse_pattern(args.pattern, alphabet)
    print(count_nonoverlapping(family, alphabet.encode(_read_sequence(args))))
    return 0


def cmd_bank(args) -> int:
    model = load_model(args.model)
    family = parse_pattern(args.pattern, model.alphabet)
    seed = _resolve_seed(args.seed)
    kwargs = {"seed": seed}
    if args.variant:
        kwargs["variant"] = args.variant
    sampler = sampler_for(model, family, **kwargs)
    stream = auxiliary_stream(seed, 2)
    print("word\tq\tbeta")
    for _ in range(args.draws):
        w = sampler.draw(stream)
        print(f"{model.alphabet.decode(w)}\t{sampler.q(w):.6e}\t{sampler.beta(w):.6e}")
    return 0


def cmd_oracle(args) -> int:
    model = load_model(args.model)
    family = parse_pattern(args.pattern, model.alphabet)
    print(exact_pvalue(model, family, args.n, args.c).to_text())
    return 0


def _z(est: float, se: float, ref: float, ref_se: float) -> float:
    scale = math.hypot(se, ref_se)
    return (est - ref) / scale if scale > 0 else math.inf * (est != ref)


def cmd_table1(args) -> int:
    seed = _resolve_seed(args.seed)
    K = args.replicates or 1000
    workers = args.threads or 1
    model = presets.model("uniform")
    print("pswm\tt\tanalytic_published\tanalytic\tis_a_published\tis_a\tse\tz")
    for name in ("w_rep", "w_norep"):
        pswm = presets.pswm(name)
        for t, ana, (ref, ref_se) in zip(
            presets.TABLE1_THRESHOLDS, presets.TABLE1_ANALYTIC, presets.TABLE1_ALGORITHM_A[name]
        ):
            approx = huang_approx(model, pswm, t, presets.TABLE1_N)
            sampler = sampler_for(model, PswmMotif(pswm, t), seed=seed)
            rep = algorithm_a(model, sampler, presets.TABLE1_N, K, seed, workers)
            print(
                f"{name}\t{t}\t{ana:.2g}\t{approx:.3e}\t{ref:.3g}\t{rep.p_hat:.4e}\t{rep.se:.2e}"
                f"\t{_z(rep.p_hat, rep.se, ref, ref_se):+.2f}"
            )
            if args.direct:
                d = direct_mc(model, PswmMotif(pswm, t), presets.TABLE1_N, 1, K, seed, workers)
                print(f"{name}\t{t}\tdirect\t\t\t{d.p_hat:.4e}\t{d.se:.2e}\t")
    return 0


def cmd_table2(args) -> int:
    seed = _resolve_seed(args.seed)
    K = args.replicates or 1000
    workers = args.threads or 1
    model = presets.model("swi5-background")
    family = PswmMotif(presets.pswm("swi5"), presets.TABLE2_THRESHOLD)
    sampler = sampler_for(model, family, seed=seed)
    print("c\tis_b_published\tis_b\tse\tz")
    for c, (ref, ref_se) in zip(presets.TABLE2_COUNTS, presets.TABLE2_ALGORITHM_B):
        rep = algorithm_b(model, sampler, AdaptivePolicy(), presets.TABLE2_N, c, K, seed, workers)
        print(f"{c}\t{ref:.3g}\t{rep.p_hat:.4e}\t{rep.se:.2e}\t{_z(rep.p_hat, rep.se, ref, ref_se):+.2f}")
        if args.direct:
            d = direct_mc(model, family, presets.TABLE2_N, c, K, seed, workers)
            print(f"{c}\tdirect\t{d.p_hat:.4e}\t{d.se:.2e}\t")
    return 0


def cmd_table3(args) -> int:
    seed = _resolve_seed(args.seed)
    K = args.replicates or 10_000
    workers = args.threads or 1
    d1, d2 = _ints(args.gap.split(","), "--gap")
    if (d1, d2) not in presets.TABLE3:
        raise ConfigurationError(f"published gaps are {list(presets.TABLE3)}")
    model = presets.model("motif-background")
    refs = {(r.x, r.y): r for r in presets.TABLE3[(d1, d2)]}
    wanted = [tuple(m.split(":")) for m in args.motif] if args.motif else list(refs)
    for key in wanted:
        if key not in refs:
            raise ConfigurationError(f"motif {':'.join(key)} is not in the published table")
    print("x\ty\tis_a_published\tanalytic_published\tis_a\tse\tz")
    samplers = []
    for x, y in wanted:
        ref = refs[(x, y)]
        sampler = sampler_for(model, StructuredMotif(model.encode(x), model.encode(y), d1, d2))
        samplers.append(sampler)
        rep = algorithm_a(model, sampler, presets.TABLE3_N, K, seed, workers)
        ana = f"{ref.analytic:.3g}" if ref.analytic else "-"
        z = _z(rep.p_hat, rep.se, *ref.algorithm_a)
        print(f"{x}\t{y}\t{ref.algorithm_a[0]:.4g}\t{ana}\t{rep.p_hat:.4e}\t{rep.se:.2e}\t{z:+.2f}")
    if not args.no_combined and len(samplers) > 1:
        rep = combined(model, samplers, [1] * len(samplers), "A", presets.TABLE3_N, K, seed, workers=workers)
        direct_ref, is_ref = presets.TABLE3_COMBINED[(d1, d2)]
        label = "combined" if len(samplers) == len(refs) else f"combined({len(samplers)})"
        ref_txt = f"{is_ref[0]:.3g}" if len(samplers) == len(refs) else "-"
        print(f"{label}\t\t{ref_txt}\t-\t{rep.p_hat:.4e}\t{rep.se:.2e}\t")
    return 0


COMMANDS = {
    "run": cmd_run,
    "score": cmd_score,
    "count": cmd_count,
    "bank": cmd_bank,
    "oracle": cmd_oracle,
    "table1": cmd_table1,
    "table2": cmd_table2,
    "table3": cmd_table3,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args)
    except RareMotifError as exc:
        print(f"raremotif: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, configparser.Error) as exc:
        print(f"raremotif: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single-line report, distinct exit code
        print(f"raremotif: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
