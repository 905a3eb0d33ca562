"""End-to-end experiment presets behind the ``reproduce`` subcommand.

Each runner is a pure function of its seed (and trial count), returns a
JSON-ready metrics document with a ``checks`` list of named assertions
against expected ranges, and is reused verbatim by the acceptance test
suite.  Keep anything nondeterministic (timestamps, absolute paths) out
of the returned document: reproduce runs must be byte-identical.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import datagen, fisher, model, transition
from .adult import (
    DEFAULT_SOURCE_URL,
    TabularSchema,
    build_direct_task,
    build_llp_task,
    fetch,
    preprocess_cached,
)
from .model import Architecture
from .objective import WeakDataset, pooled_objective
from .optimizer import ExpDecaySchedule, OptimizerConfig, WarmupExpSchedule, train
from .seeding import substream
from .transition import SimplexVector, TransitionMatrix


def trial_seed(master_seed: int, trial: int) -> int:
    """Per-trial seed derivation used by every preset."""
    return int(master_seed) + 1000 * (trial + 1)


def accuracy(params, features, targets) -> float:
    logits = model.forward_logits_batch(params, features)
    return float((logits.argmax(axis=1) == np.asarray(targets)).mean())


def fit(init_params, datasets, opt_config):
    fn, n_total = pooled_objective(datasets)
    return train(init_params, fn, n_total, opt_config)


def _check(name: str, value, expected: str, ok: bool) -> dict:
    return {"name": name, "value": value, "expected": expected, "ok": bool(ok)}


# ---------------------------------------------------------------------------
# synthetic-llp: 3-class, 2-D mixture; labels replaced by group draws from
# the fixed 4-group conditional; group statistics re-estimated from the
# sample; trained classifier compared against the direct baseline.
# ---------------------------------------------------------------------------


def run_synthetic_llp(seed: int = 2026, trials: int = 10) -> tuple[dict, dict]:
    spec = datagen.default_mixture()
    gen_m = datagen.default_llp_transition()
    opt = OptimizerConfig(kind="gd", learning_rate=0.1, epochs=500, batch_size=0)
    arch = Architecture(kind="linear")
    acc_llp = []
    acc_direct = []
    first_trial = None
    for t in range(trials):
        s = trial_seed(seed, t)
        train_sample = datagen.sample_mixture(spec, 1000, s)
        test_sample = datagen.sample_mixture(spec, 1000, s + 1)
        groups = datagen.sample_indirect(train_sample.true_targets, gen_m, s + 2)
        props, priors = datagen.estimate_llp_statistics(
            train_sample.true_targets, groups, n_classes=3, n_groups=gen_m.n_y
        )
        est_m = transition.llp_from_proportions(props, priors)
        llp_data = WeakDataset(train_sample.features, groups, est_m, name="llp")
        direct_data = datagen.direct_dataset(train_sample, 3)
        params0 = model.init(arch, 2, 3, s + 3)
        llp_fit = fit(params0, [llp_data], opt)
        direct_fit = fit(params0, [direct_data], opt)
        acc_llp.append(accuracy(llp_fit.params, test_sample.features, test_sample.true_targets))
        acc_direct.append(accuracy(direct_fit.params, test_sample.features, test_sample.true_targets))
        if first_trial is None:
            first_trial = {
                "llp": llp_fit,
                "direct": direct_fit,
                "train_sample": train_sample,
                "estimated_transition": est_m,
            }
    mean_llp = float(np.mean(acc_llp))
    mean_direct = float(np.mean(acc_direct))
    gap_points = abs(mean_direct - mean_llp) * 100.0
    doc = {
        "experiment": "synthetic-llp",
        "seed": seed,
        "trials": trials,
        "metrics": {
            "accuracy_llp": acc_llp,
            "accuracy_direct": acc_direct,
            "mean_accuracy_llp": mean_llp,
            "mean_accuracy_direct": mean_direct,
            "gap_points": gap_points,
        },
        "checks": [
            _check(
                "llp within 3 points of direct",
                gap_points,
                "<= 3.0",
                gap_points <= 3.0,
            )
        ],
    }
    doc["ok"] = all(c["ok"] for c in doc["checks"])
    return doc, first_trial


# ---------------------------------------------------------------------------
# coarse-combo: 10-class ring mixture; compares coarse-only,
# complementary-only, coarse plus a 10% direct subset, and direct-only.
# ---------------------------------------------------------------------------

COARSE_PARTITION = ((0, 1), (2, 3), (4, 5, 6), (7, 8, 9))


def run_coarse_combo(seed: int = 2026, trials: int = 3) -> dict:
    k = 10
    spec = datagen.ring_mixture(k)
    coarse_m = transition.coarse_partition(k, COARSE_PARTITION)
    comp_m = transition.uniform_complementary(k)
    opt = OptimizerConfig(
        kind="sgd_momentum",
        learning_rate=0.1,
        momentum=0.9,
        weight_decay=5e-4,
        schedule=WarmupExpSchedule(warmup_epochs=15, peak_lr=0.1, decay_rate=0.95),
        batch_size=128,
        epochs=50,
    )
    arch = Architecture(kind="linear")
    n_train, n_test, direct_fraction = 6000, 2000, 0.1
    accs = {"coarse": [], "complementary": [], "coarse+direct": [], "direct": []}
    for t in range(trials):
        s = trial_seed(seed, t)
        train_sample = datagen.sample_mixture(spec, n_train, s)
        test_sample = datagen.sample_mixture(spec, n_test, s + 1)
        coarse_data = datagen.relabel(train_sample, coarse_m, s + 2, name="coarse")
        comp_data = datagen.relabel(train_sample, comp_m, s + 3, name="complementary")
        n_direct = int(direct_fraction * n_train)
        subset = datagen.LabeledSample(
            features=train_sample.features[:n_direct],
            true_targets=train_sample.true_targets[:n_direct],
        )
        direct_subset = datagen.direct_dataset(subset, k, name="direct-subset")
        direct_full = datagen.direct_dataset(train_sample, k)
        params0 = model.init(arch, 2, k, s + 4)
        runs = {
            "coarse": [coarse_data],
            "complementary": [comp_data],
            "coarse+direct": [coarse_data, direct_subset],
            "direct": [direct_full],
        }
        for name, datasets in runs.items():
            cfg = replace(opt, seed=s + 5)
            result = fit(params0, datasets, cfg)
            accs[name].append(
                accuracy(result.params, test_sample.features, test_sample.true_targets)
            )
    means = {name: float(np.mean(v)) for name, v in accs.items()}
    recovery = means["coarse+direct"] / means["direct"] if means["direct"] > 0 else 0.0
    checks = [
        _check(
            "coarse-only below complementary-only",
            [means["coarse"], means["complementary"]],
            "coarse < complementary",
            means["coarse"] < means["complementary"],
        ),
        _check(
            "complementary-only below coarse+direct",
            [means["complementary"], means["coarse+direct"]],
            "complementary < coarse+direct",
            means["complementary"] < means["coarse+direct"],
        ),
        _check(
            "coarse+10%direct recovers >= 85% of direct",
            recovery,
            ">= 0.85",
            recovery >= 0.85,
        ),
    ]
    doc = {
        "experiment": "coarse-combo",
        "seed": seed,
        "trials": trials,
        "metrics": {
            "accuracies": accs,
            "mean_accuracies": means,
            "recovery_ratio": recovery,
        },
        "checks": checks,
    }
    doc["ok"] = all(c["ok"] for c in checks)
    return doc


# ---------------------------------------------------------------------------
# fisher-suite: numeric verification battery for the information tooling.
# ---------------------------------------------------------------------------


def random_transition(rng: np.random.Generator, n_y: int, n_z: int) -> TransitionMatrix:
    cols = rng.dirichlet(np.ones(n_y), size=n_z).T
    m = TransitionMatrix(cols)
    transition.validate(m, tol=1e-9)
    return m


def random_interior_simplex(rng: np.random.Generator, k: int) -> SimplexVector:
    # Blend with uniform to stay safely inside the simplex.
    raw = rng.dirichlet(np.ones(k))
    return SimplexVector(0.9 * raw + 0.1 / k, tol=1e-9)


def run_fisher_suite(seed: int = 2026, n_random: int = 100, n_psd: int = 1000) -> dict:
    rng = substream(seed, "fisher-suite")
    max_oracle_diff = 0.0
    for _ in range(n_random):
        n_z = int(rng.integers(2, 9))
        n_y = int(rng.integers(2, 9))
        m = random_transition(rng, n_y, n_z)
        p = random_interior_simplex(rng, n_z)
        a = fisher.fisher_indirect(p, m)
        b = fisher.fisher_bruteforce(p, m)
        max_oracle_diff = max(max_oracle_diff, float(np.max(np.abs(a - b))))

    min_margin = np.inf
    min_diag_slack = np.inf
    for _ in range(n_psd):
        n_z = int(rng.integers(2, 9))
        n_y = int(rng.integers(2, 9))
        m = random_transition(rng, n_y, n_z)
        p = random_interior_simplex(rng, n_z)
        min_margin = min(min_margin, fisher.verify_loewner(p, m))
        info_y = fisher.fisher_indirect(p, m)
        var_y = fisher.asymptotic_variance(info_y)
        if np.all(np.isfinite(var_y)):
            min_diag_slack = min(min_diag_slack, float(np.min(var_y - p.probs)))

    verdicts = {
        "identity_k4": fisher.check_identifiability(transition.identity(4)).identifiable,
        "ccn_k3_rho03": fisher.check_identifiability(
            transition.class_conditional_noise(3, 0.3)
        ).identifiable,
        "complementary_k10": fisher.check_identifiability(
            transition.uniform_complementary(10)
        ).identifiable,
        "pu_c04": fisher.check_identifiability(transition.pu_censoring(0.4)).identifiable,
        "llp_default": fisher.check_identifiability(
            datagen.default_llp_transition()
        ).identifiable,
        "coarse_4_of_10": fisher.check_identifiability(
            transition.coarse_partition(10, COARSE_PARTITION)
        ).identifiable,
    }
    expected_verdicts = {
        "identity_k4": True,
        "ccn_k3_rho03": True,
        "complementary_k10": True,
        "pu_c04": True,
        "llp_default": True,
        "coarse_4_of_10": False,
    }
    report = fisher.fisher_report(
        SimplexVector.uniform(10), transition.uniform_complementary(10)
    )
    checks = [
        _check("oracle equivalence max |diff|", max_oracle_diff, "<= 1e-10", max_oracle_diff <= 1e-10),
        _check("information loss margin min eig", float(min_margin), ">= -1e-9", min_margin >= -1e-9),
        _check(
            "indirect variance floor min slack",
            float(min_diag_slack),
            ">= -1e-9",
            min_diag_slack >= -1e-9,
        ),
        _check(
            "identifiability verdicts",
            verdicts,
            str(expected_verdicts),
            verdicts == expected_verdicts,
        ),
        _check(
            "complementary k10 uniform variance floor",
            float(np.min(report.asym_var_indirect)),
            ">= 0.1 - 1e-9",
            bool(np.min(report.asym_var_indirect) >= 0.1 - 1e-9),
        ),
    ]
    doc = {
        "experiment": "fisher-suite",
        "seed": seed,
        "n_random": n_random,
        "n_psd": n_psd,
        "metrics": {
            "max_oracle_diff": max_oracle_diff,
            "min_psd_margin": float(min_margin),
            "min_diag_slack": float(min_diag_slack),
            "identifiability": verdicts,
            "complementary_k10_uniform_report": report.to_dict(),
        },
        "checks": checks,
    }
    doc["ok"] = all(c["ok"] for c in checks)
    return doc


# ---------------------------------------------------------------------------
# adult-llp: real-data label-proportion runs against the published
# reference accuracies.  Requires fetched (or cached) raw files.
# ---------------------------------------------------------------------------

ADULT_TASKS = (
    {"target": "income", "grouping": "education", "reference": 76.73, "tolerance": 3.0},
    {"target": "income", "grouping": "occupation", "reference": 78.02, "tolerance": 3.0},
    {"target": "income", "grouping": "relationship", "reference": 77.60, "tolerance": 3.0},
    {"target": "income", "grouping": None, "reference": 80.42, "tolerance": 1.5},
    {"target": "marital-status", "grouping": "relationship", "reference": 67.90, "tolerance": 3.0},
)


def adult_optimizer(seed: int) -> OptimizerConfig:
    return OptimizerConfig(
        kind="adam",
        learning_rate=1e-4,
        beta1=0.9,
        beta2=0.999,
        schedule=ExpDecaySchedule(rate=0.98),
        batch_size=128,
        epochs=50,
        seed=seed,
    )


def run_adult_llp(
    seed: int = 2026,
    trials: int = 10,
    source_url: str | None = None,
    cache_dir=None,
) -> dict:
    raw = fetch(source_url or DEFAULT_SOURCE_URL, cache_dir)
    table = preprocess_cached(raw, cache_dir)
    results = {}
    checks = []
    for task in ADULT_TASKS:
        target, grouping = task["target"], task["grouping"]
        key = f"{target}|{grouping or 'direct'}"
        if grouping is None:
            built = build_direct_task(table, TabularSchema(target=target, grouping="relationship"))
        else:
            built = build_llp_task(table, TabularSchema(target=target, grouping=grouping))
        accs = []
        for t in range(trials):
            s = trial_seed(seed, t)
            params0 = model.init(
                Architecture(kind="linear"),
                built.train.input_dim,
                built.train.n_z,
                s,
            )
            result = fit(params0, [built.train], adult_optimizer(s + 1))
            accs.append(
                accuracy(result.params, built.test.features, built.test.true_targets)
            )
        mean_pct = float(np.mean(accs) * 100.0)
        std_pct = float(np.std(accs) * 100.0)
        results[key] = {"accuracies": accs, "mean_pct": mean_pct, "std_pct": std_pct}
        lo = task["reference"] - task["tolerance"]
        hi = task["reference"] + task["tolerance"]
        checks.append(
            _check(
                f"{key} accuracy vs reference {task['reference']}",
                mean_pct,
                f"[{lo}, {hi}] (level-grouping maps are package conventions; "
                "deviations beyond tolerance are reported, see notes)",
                lo <= mean_pct <= hi,
            )
        )
    doc = {
        "experiment": "adult-llp",
        "seed": seed,
        "trials": trials,
        "metrics": results,
        "checks": checks,
        "notes": (
            "Reference values come from published 10-trial means; the exact "
            "level-grouping maps behind them are not public, so this package "
            "uses its own fixed maps and tolerates small deviations."
        ),
    }
    doc["ok"] = all(c["ok"] for c in checks)
    return doc
