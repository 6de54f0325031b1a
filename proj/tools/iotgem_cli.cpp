#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "iotgem/iotgem.hpp"

namespace fs = std::filesystem;
using namespace iotgem;
using iotgem::cli::Manifest;
using iotgem::cli::OutputSet;

namespace {

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(errc::invalid_argument, path + " is not valid JSON: " + e.what());
    }
}

std::string manifest_path_for(const std::string& explicit_path, const std::string& primary) {
    return explicit_path.empty() ? primary + ".manifest.json" : explicit_path;
}

void write_json(OutputSet& outs, const std::string& path, const nlohmann::json& j) {
    outs.write(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

/// Writes the manifest next to the other outputs and commits them all.
void finish(OutputSet& outs, Manifest& m, const std::string& manifest_path) {
    const auto j = m.to_json(outs, iotgem::version);
    OutputSet manifest_out;
    write_json(manifest_out, manifest_path, j);
    outs.commit();
    manifest_out.commit();
}

/// Role-tagged CSV inputs given on the command line.
struct RoleFlags {
    std::string train, hpo, validation, session_test, dataset_test;

    void add_to(CLI::App* cmd, const std::string& train_help = "TRAIN_CV feature table (CSV)") {
        cmd->add_option("--train", train, train_help);
        cmd->add_option("--hpo", hpo, "HPO feature table (CSV)");
        cmd->add_option("--validation", validation, "VALIDATION feature table (CSV)");
        cmd->add_option("--session-test", session_test, "SESSION_TEST feature table (CSV)");
        cmd->add_option("--dataset-test", dataset_test, "DATASET_TEST feature table (CSV)");
    }

    /// Loads every supplied table, tags it, and applies the stage's role rule.
    std::vector<TaggedTable> load(Stage stage, Manifest& m) const {
        std::vector<TaggedTable> out;
        const std::pair<DataRole, const std::string*> flags[] = {{DataRole::train_cv, &train},
                                                                 {DataRole::hpo, &hpo},
                                                                 {DataRole::validation, &validation},
                                                                 {DataRole::session_test, &session_test},
                                                                 {DataRole::dataset_test, &dataset_test}};
        // Role rule first: a test table handed to a selection stage is refused before anything is read.
        for (const auto& [role, path] : flags)
            if (!path->empty() && !role_permitted(stage, role))
                enforce_roles(stage, std::vector<TaggedTable>{{role, *path, nullptr}});
        for (const auto& [role, path] : flags) {
            if (path->empty()) continue;
            auto t = m.timings.time("load " + std::string(to_string(role)), [&] { return load_csv(*path); });
            t.role = role;
            m.inputs.push_back({*path, std::string(to_string(role))});
            m.schema_hashes[std::string(to_string(role))] = t.schema_hash;
            out.push_back({role, *path, std::make_shared<const FeatureTable>(std::move(t))});
        }
        enforce_roles(stage, out);
        return out;
    }
};

const FeatureTable& need(const std::vector<TaggedTable>& tables, DataRole role, const std::string& flag) {
    for (const auto& t : tables)
        if (t.role == role) return *t.table;
    fail(errc::invalid_argument, flag + " is required");
}

void print_bundle(const std::string& label, const MetricBundle& b) {
    std::printf("%-14s f1 %.4f  kappa %.4f  accuracy %.4f  precision %.4f  recall %.4f\n", label.c_str(), b.f1, b.kappa,
                b.accuracy, b.precision, b.recall);
}

std::vector<ml::ClassifierSpec> parse_models(const std::vector<std::string>& names, std::uint64_t seed) {
    std::vector<ml::ClassifierSpec> out;
    for (const auto& n : names) {
        auto kind = ml::parse_model_kind(n);
        if (!kind) fail(errc::invalid_argument, "unknown model '" + n + "' (expected dt, et, rf, nb, knn or lr)");
        auto spec = ml::ClassifierSpec::defaults(*kind, seed);
        spec.seed.reset();
        out.push_back(eval::seeded_spec(spec, seed));
    }
    return out;
}

std::optional<std::vector<std::string>> load_mask(const std::string& path, Manifest& m) {
    if (path.empty()) return std::nullopt;
    m.inputs.push_back({path, std::nullopt});
    auto features = select::mask_from_json(read_json_file(path));
    m.schema_hashes["mask"] = schema_hash(features);
    return features;
}

// ---- subcommands -----------------------------------------------------------

struct Common {
    std::uint64_t seed = 0;
    unsigned jobs = 0;
    std::string manifest;

    void add_to(CLI::App* cmd, bool seeded = true) {
        if (seeded) cmd->add_option("--seed", seed, "Random seed (printed; default 0)")->capture_default_str();
        cmd->add_option("--jobs", jobs, "Worker threads; 0 = one per logical core")->capture_default_str();
        cmd->add_option("--manifest", manifest, "Run manifest path (default: <primary output>.manifest.json)");
    }
};

struct ExtractArgs {
    std::vector<std::string> pcaps;
    std::string rules, out, default_label = "BENIGN";
    std::vector<int> windows{2, 6, 9};
    std::vector<std::string> features;
    Common common;
};

int run_extract(const ExtractArgs& a, Manifest& m) {
    WindowConfig wc;
    wc.sizes = a.windows;
    wc.validate();
    const Label fallback = a.default_label == "ATTACK" ? Label::attack : Label::benign;
    if (a.default_label != "ATTACK" && a.default_label != "BENIGN")
        fail(errc::invalid_argument, "--default-label must be ATTACK or BENIGN");
    m.jobs = resolve_jobs(a.common.jobs);
    m.config = {{"windows", a.windows}, {"features", a.features}, {"default_label", a.default_label}};
    const auto rules = load_rules(a.rules);
    m.inputs.push_back({a.rules, std::nullopt});

    std::vector<ExtractResult> parts(a.pcaps.size());
    parallel_for(a.pcaps.size(), a.common.jobs, [&](std::size_t i) {
        const auto cap = read_pcap(a.pcaps[i]);
        parts[i] = extract_table(apply_rules(cap.packets, rules, fallback), a.features, wc);
    });
    FeatureTable table = std::move(parts[0].table);
    table.sources = {fs::path(a.pcaps[0]).filename().string()};
    m.inputs.push_back({a.pcaps[0], std::nullopt});
    for (std::size_t i = 1; i < parts.size(); ++i) {
        auto& t = parts[i].table;
        table.values.insert(table.values.end(), t.values.begin(), t.values.end());
        table.labels.insert(table.labels.end(), t.labels.begin(), t.labels.end());
        table.sources.push_back(fs::path(a.pcaps[i]).filename().string());
        m.inputs.push_back({a.pcaps[i], std::nullopt});
    }
    m.schema_hashes["table"] = table.schema_hash;

    OutputSet outs;
    outs.write(a.out, [&](std::ostream& o) { write_csv(table, o); });
    finish(outs, m, manifest_path_for(a.common.manifest, a.out));
    std::printf("extract: %zu rows, %zu columns, %zu attack, schema %s\n", table.rows(), table.cols(), table.positives(),
                table.schema_hash.c_str());
    return 0;
}

struct EliminateArgs {
    RoleFlags roles;
    std::string out, out_votes;
    int folds = 5;
    std::vector<std::string> drop;
    bool keep_identifiers = false;
    Common common;
};

int run_eliminate(const EliminateArgs& a, Manifest& m) {
    const auto tables = a.roles.load(Stage::elimination, m);
    const auto& train = need(tables, DataRole::train_cv, "--train");
    const auto& hpo = need(tables, DataRole::hpo, "--hpo");
    const auto& validation = need(tables, DataRole::validation, "--validation");
    select::EliminationConfig cfg;
    cfg.cv_folds = a.folds;
    cfg.seed = a.common.seed;
    cfg.jobs = a.common.jobs;
    if (a.keep_identifiers) cfg.manual_drop = std::vector<std::string>{};
    else if (!a.drop.empty()) cfg.manual_drop = a.drop;
    m.seed = cfg.seed;
    m.jobs = resolve_jobs(cfg.jobs);
    m.config = cfg.to_json();

    OutputSet outs;
    const auto r = m.timings.time("eliminate", [&] { return select::eliminate(train, hpo, validation, cfg); });
    write_json(outs, a.out, select::to_json(r));
    outs.write(a.out_votes, [&](std::ostream& o) { select::write_votes_csv(r, o); });
    m.schema_hashes["survivors"] = r.survivor_schema_hash;
    finish(outs, m, manifest_path_for(a.common.manifest, a.out));
    std::printf("eliminate: seed %llu, %zu manual drops, %zu voted, %zu survivors\n",
                static_cast<unsigned long long>(cfg.seed), r.manually_dropped.size(), r.votes.size(), r.survivors.size());
    return 0;
}

struct SelectArgs {
    RoleFlags roles;
    std::string survivors, out, out_trace;
    select::GAConfig ga;
    double mutation = -1.0;
    int fitness_depth = 8;
    Common common;
};

int run_select(SelectArgs a, Manifest& m) {
    const auto tables = a.roles.load(Stage::ga_fitness, m);
    const auto& train = need(tables, DataRole::train_cv, "--train");
    const auto& validation = need(tables, DataRole::validation, "--validation");
    std::vector<std::string> survivors;
    if (!a.survivors.empty()) {
        m.inputs.push_back({a.survivors, std::nullopt});
        const auto j = read_json_file(a.survivors);
        if (!j.contains("survivors")) fail(errc::invalid_argument, a.survivors + " has no 'survivors' list");
        survivors = j.at("survivors").get<std::vector<std::string>>();
    } else {
        survivors = train.columns;
    }
    if (a.mutation >= 0.0) a.ga.mutation_probability = a.mutation;
    a.ga.fitness_model = ml::ClassifierSpec::decision_tree(a.fitness_depth, a.common.seed);
    a.ga.seed = a.common.seed;
    a.ga.jobs = a.common.jobs;
    a.ga.validate();
    m.seed = a.ga.seed;
    m.jobs = resolve_jobs(a.ga.jobs);
    m.config = a.ga.to_json();

    OutputSet outs;
    const auto r = m.timings.time("ga", [&] { return select::ga_select(survivors, train, validation, a.ga); });
    write_json(outs, a.out, select::mask_to_json(r, a.ga));
    outs.write(a.out_trace, [&](std::ostream& o) { select::write_trace_csv(r, o); });
    m.schema_hashes["mask"] = schema_hash(r.features);
    finish(outs, m, manifest_path_for(a.common.manifest, a.out));
    std::printf("select: seed %llu, %zu of %zu features, validation F1 %.4f (generation %d, %zu evaluations)\n",
                static_cast<unsigned long long>(a.ga.seed), r.features.size(), survivors.size(), r.fitness,
                r.found_in_generation, r.evaluations);
    return 0;
}

struct EvaluateArgs {
    RoleFlags roles;
    std::string mask, attack = "attack", out, out_csv, out_md;
    std::vector<std::string> models{"dt", "rf", "nb"};
    int folds = 10;
    Common common;
};

int run_evaluate(const EvaluateArgs& a, Manifest& m) {
    const auto tables = a.roles.load(Stage::evaluation, m);
    need(tables, DataRole::train_cv, "--train");
    const auto features = load_mask(a.mask, m);
    const auto specs = parse_models(a.models, a.common.seed);
    eval::EvalConfig cfg;
    cfg.folds = a.folds;
    cfg.seed = a.common.seed;
    cfg.jobs = a.common.jobs;
    m.seed = cfg.seed;
    m.jobs = resolve_jobs(cfg.jobs);
    nlohmann::json spec_json = nlohmann::json::array();
    for (const auto& s : specs) spec_json.push_back(s.to_json());
    m.config = {{"attack", a.attack}, {"folds", cfg.folds}, {"models", spec_json}};

    auto reports = m.timings.time("evaluate", [&] { return eval::evaluate(a.attack, specs, features, tables, cfg); });
    const std::string manifest = manifest_path_for(a.common.manifest, a.out);
    for (auto& r : reports) {
        r.manifest = fs::path(manifest).filename().string();
        const std::string key = ml::short_name(r.spec.kind).data();
        m.timings.add(key + " cv", r.timings.cv_seconds);
        m.timings.add(key + " full fit", r.timings.full_fit_seconds);
        if (r.session_test) m.timings.add(key + " session test", r.timings.session_test_seconds);
        if (r.dataset_test) m.timings.add(key + " dataset test", r.timings.dataset_test_seconds);
    }
    OutputSet outs;
    write_json(outs, a.out, eval::to_json(reports));
    if (!a.out_csv.empty()) outs.write(a.out_csv, [&](std::ostream& o) { eval::write_table_csv(reports, o); });
    if (!a.out_md.empty()) outs.write(a.out_md, [&](std::ostream& o) { eval::write_table_markdown(reports, o); });
    finish(outs, m, manifest);
    std::printf("evaluate: seed %llu, %d folds\n", static_cast<unsigned long long>(cfg.seed), cfg.folds);
    std::ostringstream md;
    eval::write_table_markdown(reports, md);
    std::fputs(md.str().c_str(), stdout);
    return 0;
}

struct ProbeArgs {
    std::string feature, train, test, out;
    Common common;
};

int run_probe(const ProbeArgs& a, Manifest& m) {
    const auto train = load_csv(a.train);
    const auto test = load_csv(a.test);
    m.inputs.push_back({a.train, std::nullopt});
    m.inputs.push_back({a.test, std::nullopt});
    m.seed = a.common.seed;
    m.jobs = 1;
    m.config = {{"feature", a.feature}, {"model", select::single_feature_model(a.common.seed).to_json()}};
    const auto r = m.timings.time("probe", [&] { return eval::probe_single_feature(a.feature, train, test, a.common.seed); });
    std::printf("probe: feature %s, seed %llu, %zu train rows, %zu test rows\n", a.feature.c_str(),
                static_cast<unsigned long long>(a.common.seed), r.train_rows, r.test_rows);
    print_bundle("single feature", r.bundle);
    std::printf("chance F1 %.4f (%s)\n", r.chance_f1, eval::chance_f1_note.data());
    if (a.out.empty()) return 0;
    OutputSet outs;
    write_json(outs, a.out, eval::to_json(r));
    finish(outs, m, manifest_path_for(a.common.manifest, a.out));
    return 0;
}

struct AttributeArgs {
    RoleFlags roles;
    std::string mask, model = "rf", out, out_json;
    int repetitions = 5;
    eval::ShapleyConfig shapley;
    bool with_shapley = false;
    Common common;
};

int run_attribute(AttributeArgs a, Manifest& m) {
    const auto tables = a.roles.load(Stage::evaluation, m);
    const auto& train_raw = need(tables, DataRole::train_cv, "--train");
    const TaggedTable* held = nullptr;
    for (const auto& t : tables) {
        if (t.role == DataRole::train_cv) continue;
        if (held) fail(errc::invalid_argument, "give exactly one held-out table (--hpo, --validation, --session-test or --dataset-test)");
        held = &t;
    }
    if (!held) fail(errc::invalid_argument, "a held-out table is required (--hpo, --validation, --session-test or --dataset-test)");
    const auto features = load_mask(a.mask, m);
    FeatureTable train = features ? project(train_raw, *features) : train_raw;
    FeatureTable test = features ? project(*held->table, *features) : *held->table;
    const auto spec = parse_models({a.model}, a.common.seed).at(0);
    a.shapley.seed = a.common.seed;
    a.shapley.jobs = a.common.jobs;
    m.seed = a.common.seed;
    m.jobs = resolve_jobs(a.common.jobs);
    m.config = {{"model", spec.to_json()}, {"repetitions", a.repetitions}, {"held_out_role", to_string(held->role)}};
    if (a.with_shapley)
        m.config["shapley"] = {{"samples", a.shapley.samples}, {"background", a.shapley.background_size}, {"rows", a.shapley.max_rows}};

    const auto model = m.timings.time("fit", [&] { return ml::fit(spec, train); });
    auto rep = m.timings.time("permutation importance",
                              [&] { return eval::permutation_importance(model, test, a.repetitions, a.common.seed, a.common.jobs); });
    if (a.with_shapley) {
        const auto sh = m.timings.time("shapley", [&] { return eval::shapley_mc(model, test, a.shapley); });
        eval::attach_shapley(rep, sh);
        std::printf("attribute: Shapley efficiency within 3 SE on %.1f%% of %zu rows\n", 100.0 * sh.efficient_fraction(),
                    sh.rows.size());
    }
    OutputSet outs;
    outs.write(a.out, [&](std::ostream& o) { eval::write_attribution_csv(rep, o); });
    if (!a.out_json.empty()) write_json(outs, a.out_json, eval::to_json(rep));
    finish(outs, m, manifest_path_for(a.common.manifest, a.out));
    const auto order = eval::ranking(rep);
    std::printf("attribute: seed %llu, baseline F1 %.4f on %s; top features:\n", static_cast<unsigned long long>(a.common.seed),
                rep.baseline_f1, to_string(held->role).data());
    for (std::size_t i = 0; i < std::min<std::size_t>(5, order.size()); ++i)
        std::printf("  %zu. %s %.4f\n", i + 1, rep.features[order[i]].feature.c_str(), rep.features[order[i]].importance);
    return 0;
}

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string format = "md", out;
};

int run_report(const ReportArgs& a) {
    std::vector<eval::EvalReport> all;
    for (const auto& p : a.inputs) {
        auto r = eval::reports_from_json(read_json_file(p));
        all.insert(all.end(), r.begin(), r.end());
    }
    std::ostringstream body;
    if (a.format == "csv") eval::write_table_csv(all, body);
    else if (a.format == "md") eval::write_table_markdown(all, body);
    else fail(errc::invalid_argument, "--format must be md or csv");
    if (a.out.empty()) {
        std::fputs(body.str().c_str(), stdout);
        return 0;
    }
    OutputSet outs;
    outs.write(a.out, [&](std::ostream& o) { o << body.str(); });
    outs.commit();
    return 0;
}

int run(const std::vector<std::string>& args);

int run_rerun(const std::string& manifest_path) {
    const auto j = read_json_file(manifest_path);
    if (j.value("format", std::string()) != "iotgem-manifest") fail(errc::invalid_argument, manifest_path + " is not a run manifest");
    const auto argv = j.at("argv").get<std::vector<std::string>>();
    if (!argv.empty() && argv.front() == "rerun") fail(errc::invalid_argument, "a rerun manifest cannot be rerun");
    const int rc = run(argv);
    if (rc != 0) return rc;
    int mismatches = 0;
    for (const auto& o : j.at("outputs")) {
        const auto path = o.at("path").get<std::string>();
        if (cli::sha256_file(path) != o.at("sha256").get<std::string>()) {
            std::fprintf(stderr, "iotgem rerun: %s differs from the recorded output\n", path.c_str());
            ++mismatches;
        }
    }
    if (mismatches) return exit_code_for(errc::invariant_failure);
    std::printf("rerun: %zu outputs reproduced\n", j.at("outputs").size());
    return 0;
}

int run(const std::vector<std::string>& args) {
    CLI::App app{"Window-based feature extraction, leakage-safe feature selection and evaluation for network attack detection",
                 "iotgem"};
    app.set_version_flag("--version", std::string(iotgem::version));
    app.require_subcommand(1, 1);
    app.failure_message(CLI::FailureMessage::help);

    ExtractArgs ex;
    auto* c_extract = app.add_subcommand("extract", "Decode pcap files, label packets by rules and write the window feature table");
    c_extract->add_option("pcaps", ex.pcaps, "Input pcap files (rows are concatenated in the given order)")->required();
    c_extract->add_option("--rules", ex.rules, "Labelling rule file (JSON)")->required();
    c_extract->add_option("--out", ex.out, "Output feature table (CSV)")->required();
    c_extract->add_option("--windows", ex.windows, "Rolling window sizes, comma separated")->delimiter(',')->capture_default_str();
    c_extract->add_option("--features", ex.features, "Emit only these columns, comma separated (default: full schema)")->delimiter(',');
    c_extract->add_option("--default-label", ex.default_label, "Label for packets no rule matches (ATTACK or BENIGN)")->capture_default_str();
    ex.common.add_to(c_extract, false);

    EliminateArgs el;
    auto* c_elim = app.add_subcommand("eliminate", "Drop identifier columns and run kappa-vote feature elimination");
    el.roles.add_to(c_elim);
    c_elim->add_option("--out", el.out, "Survivor list and vote details (JSON)")->required();
    c_elim->add_option("--out-votes", el.out_votes, "Per-feature vote table (CSV)")->required();
    c_elim->add_option("--folds", el.folds, "Cross-validation folds for the TRAIN_CV vote")->capture_default_str();
    c_elim->add_option("--drop", el.drop, "Manual step-1 removals, comma separated (default: identifier columns)")->delimiter(',');
    c_elim->add_flag("--keep-identifiers", el.keep_identifiers, "Skip the manual step-1 removals");
    el.common.add_to(c_elim);

    SelectArgs se;
    auto* c_select = app.add_subcommand("select", "Genetic-algorithm feature selection scored on the VALIDATION table");
    se.roles.add_to(c_select);
    c_select->add_option("--survivors", se.survivors, "Survivor JSON from eliminate (default: every column of --train)");
    c_select->add_option("--out", se.out, "Selection mask (JSON)")->required();
    c_select->add_option("--out-trace", se.out_trace, "Per-generation fitness trace (CSV)")->required();
    c_select->add_option("--population", se.ga.population, "Population size")->capture_default_str();
    c_select->add_option("--generations", se.ga.generations, "Generation count")->capture_default_str();
    c_select->add_option("--crossover", se.ga.crossover_probability, "Per-bit probability of taking the first parent's bit")
        ->capture_default_str();
    c_select->add_option("--mutation", se.mutation, "Per-bit mutation probability (default: 1 / feature count)");
    c_select->add_option("--tournament", se.ga.tournament_size, "Tournament size")->capture_default_str();
    c_select->add_option("--elite", se.ga.elite, "Elite individuals copied unchanged")->capture_default_str();
    c_select->add_option("--patience", se.ga.degenerate_patience, "Consecutive all-zero generations before giving up")
        ->capture_default_str();
    c_select->add_option("--fitness-depth", se.fitness_depth, "Depth of the fitness decision tree")->capture_default_str();
    se.common.add_to(c_select);

    EvaluateArgs ev;
    auto* c_eval = app.add_subcommand("evaluate", "Cross-validation, cross-session and cross-dataset evaluation");
    ev.roles.add_to(c_eval);
    c_eval->add_option("--mask", ev.mask, "Selection mask from select (default: every column)");
    c_eval->add_option("--models", ev.models, "Models, comma separated: dt, et, rf, nb, knn, lr")->delimiter(',')->capture_default_str();
    c_eval->add_option("--attack", ev.attack, "Attack name for the report rows")->capture_default_str();
    c_eval->add_option("--folds", ev.folds, "Cross-validation folds")->capture_default_str();
    c_eval->add_option("--out", ev.out, "Evaluation report (JSON)")->required();
    c_eval->add_option("--out-csv", ev.out_csv, "Summary table (CSV)");
    c_eval->add_option("--out-md", ev.out_md, "Summary table (Markdown)");
    ev.common.add_to(c_eval);

    ProbeArgs pr;
    auto* c_probe = app.add_subcommand("probe", "Single-feature leakage probe with a one-column ExtraTree");
    c_probe->add_option("--feature", pr.feature, "Feature column to probe")->required();
    c_probe->add_option("--train", pr.train, "Table to fit on (CSV)")->required();
    c_probe->add_option("--test", pr.test, "Table to score on (CSV)")->required();
    c_probe->add_option("--out", pr.out, "Probe result (JSON)");
    pr.common.add_to(c_probe);

    AttributeArgs at;
    auto* c_attr = app.add_subcommand("attribute", "Permutation importance and Monte-Carlo Shapley attribution on a held-out table");
    at.roles.add_to(c_attr, "TRAIN_CV table the model is fitted on (CSV)");
    c_attr->add_option("--mask", at.mask, "Selection mask from select (default: every column)");
    c_attr->add_option("--model", at.model, "Model kind: dt, et, rf, nb, knn or lr")->capture_default_str();
    c_attr->add_option("--repetitions", at.repetitions, "Permutations per feature")->capture_default_str();
    c_attr->add_flag("--shapley", at.with_shapley, "Also estimate Monte-Carlo Shapley values");
    c_attr->add_option("--shapley-samples", at.shapley.samples, "Shapley samples per explained row")->capture_default_str();
    c_attr->add_option("--shapley-background", at.shapley.background_size, "Shapley background rows")->capture_default_str();
    c_attr->add_option("--shapley-rows", at.shapley.max_rows, "Explained rows")->capture_default_str();
    c_attr->add_option("--out", at.out, "Attribution table ranked by importance (CSV)")->required();
    c_attr->add_option("--out-json", at.out_json, "Attribution report (JSON)");
    at.common.add_to(c_attr);

    ReportArgs rp;
    auto* c_report = app.add_subcommand("report", "Render evaluation reports as one summary table");
    c_report->add_option("--in", rp.inputs, "Evaluation report files (JSON)")->required();
    c_report->add_option("--format", rp.format, "md or csv")->capture_default_str();
    c_report->add_option("--out", rp.out, "Output file (default: stdout)");

    std::string rerun_manifest;
    auto* c_rerun = app.add_subcommand("rerun", "Re-run the command recorded in a manifest and check its outputs");
    c_rerun->add_option("manifest", rerun_manifest, "Run manifest (JSON)")->required();

    std::vector<std::string> owned{"iotgem"};
    owned.insert(owned.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : owned) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    CLI::App* cmd = app.get_subcommands().front();
    Manifest m;
    m.command = cmd->get_name();
    m.argv = args;
    try {
        if (cmd == c_extract) return run_extract(ex, m);
        if (cmd == c_elim) return run_eliminate(el, m);
        if (cmd == c_select) return run_select(se, m);
        if (cmd == c_eval) return run_evaluate(ev, m);
        if (cmd == c_probe) return run_probe(pr, m);
        if (cmd == c_attr) return run_attribute(at, m);
        if (cmd == c_report) return run_report(rp);
        if (cmd == c_rerun) return run_rerun(rerun_manifest);
    } catch (const error& e) {
        std::fprintf(stderr, "iotgem %s: %s\n", m.command.c_str(), e.what());
        return exit_code_for(e.code());
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "iotgem %s: InvalidArgument: malformed JSON input: %s\n", m.command.c_str(), e.what());
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "iotgem %s: IoError: %s\n", m.command.c_str(), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "iotgem %s: InvariantFailure: %s\n", m.command.c_str(), e.what());
        return 4;
    }
    return 4;
}

}  // namespace

int main(int argc, char** argv) { return run(std::vector<std::string>(argv + 1, argv + argc)); }
