#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "../error.hpp"
#include "../metrics.hpp"
#include "../ml/model.hpp"
#include "../parallel.hpp"
#include "../rng.hpp"
#include "../roles.hpp"
#include "../schema.hpp"
#include "../table.hpp"

namespace iotgem::select {

using Mask = std::vector<bool>;

struct GAConfig {
    int population = 32;
    int generations = 25;
    double crossover_probability = 0.5;             // per-bit chance of taking the first parent's bit
    std::optional<double> mutation_probability;     // per bit; unset means 1 / feature count
    int tournament_size = 3;
    int elite = 1;
    int degenerate_patience = 5;                    // all-zero generations tolerated in a row
    ml::ClassifierSpec fitness_model = ml::ClassifierSpec::decision_tree(8, 0);
    std::uint64_t seed = 0;
    unsigned jobs = 1;

    void validate() const {
        auto bad = [](const std::string& what) { fail(errc::invalid_argument, "GA config: " + what); };
        if (population < 2) bad("population must be >= 2");
        if (generations < 1) bad("generations must be >= 1");
        if (!(crossover_probability >= 0 && crossover_probability <= 1)) bad("crossover probability must lie in [0, 1]");
        if (mutation_probability && !(*mutation_probability >= 0 && *mutation_probability <= 1))
            bad("mutation probability must lie in [0, 1]");
        if (tournament_size < 1) bad("tournament size must be >= 1");
        if (elite < 0 || elite >= population) bad("elite count must lie in [0, population)");
        if (degenerate_patience < 1) bad("degenerate patience must be >= 1");
        fitness_model.validate();
    }

    double mutation_for(std::size_t features) const {
        return mutation_probability.value_or(1.0 / static_cast<double>(std::max<std::size_t>(1, features)));
    }

    nlohmann::json to_json() const {
        return {{"population", population},
                {"generations", generations},
                {"crossover_probability", crossover_probability},
                {"mutation_probability", mutation_probability ? nlohmann::json(*mutation_probability) : nlohmann::json("1/n")},
                {"tournament_size", tournament_size},
                {"elite", elite},
                {"degenerate_patience", degenerate_patience},
                {"fitness_model", fitness_model.to_json()},
                {"fitness_metric", "f1"},
                {"seed", seed}};
    }
};

struct GenerationStats {
    int generation = 0;       // 1-based
    double best = 0.0;        // global best so far
    double generation_best = 0.0;
    double mean = 0.0;
};

struct GAResult {
    std::vector<std::string> survivors;  // the search space, in order
    Mask mask;
    std::vector<std::string> features;   // selected subset, in survivor order
    double fitness = 0.0;                // external F1 of `mask`
    int found_in_generation = 0;
    std::vector<GenerationStats> trace;
    std::size_t evaluations = 0;         // distinct masks fitted
    std::string source_schema_hash;
};

/// All individuals scored 0 for `degenerate_patience` generations in a row.
class DegenerateFitness : public error {
public:
    DegenerateFitness(std::vector<GenerationStats> trace, int patience)
        : error(errc::degenerate_fitness, "every individual scored F1 = 0 for " + std::to_string(patience) +
                                              " consecutive generations"),
          trace_(std::move(trace)) {}
    const std::vector<GenerationStats>& trace() const noexcept { return trace_; }

private:
    std::vector<GenerationStats> trace_;
};

inline std::vector<std::string> mask_features(const std::vector<std::string>& names, const Mask& m) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < names.size(); ++i)
        if (m[i]) out.push_back(names[i]);
    return out;
}

/// F1 on `external` of the fitness model trained on `train`, both restricted
/// to `features`. Every call re-checks that only the permitted roles are read.
inline double mask_fitness(const FeatureTable& train, const FeatureTable& external,
                           const std::vector<std::string>& features, const ml::ClassifierSpec& model) {
    require_role(Stage::ga_fitness, train, DataRole::train_cv, "fitness training");
    require_role(Stage::ga_fitness, external, DataRole::validation, "fitness scoring");
    const auto tr = project(train, features);
    const auto te = project(external, features);
    const auto m = ml::fit(model, tr);
    return f1_score(te.labels, ml::predict(m, te));
}

namespace detail {

inline void repair(Mask& m, rng& g) {
    if (std::find(m.begin(), m.end(), true) == m.end()) m[static_cast<std::size_t>(g.index(m.size()))] = true;
}

/// Highest fitness wins; ties go to the lower index.
inline std::size_t tournament(const std::vector<double>& fitness, int size, rng& g) {
    std::size_t best = static_cast<std::size_t>(g.index(fitness.size()));
    for (int k = 1; k < size; ++k) {
        const auto c = static_cast<std::size_t>(g.index(fitness.size()));
        if (fitness[c] > fitness[best] || (fitness[c] == fitness[best] && c < best)) best = c;
    }
    return best;
}

}  // namespace detail

/// Genetic search over subsets of `survivors`, scored by external F1.
inline GAResult ga_select(const std::vector<std::string>& survivors, const FeatureTable& train,
                          const FeatureTable& external, const GAConfig& cfg = {}) {
    cfg.validate();
    require_role(Stage::ga_fitness, train, DataRole::train_cv, "fitness training");
    require_role(Stage::ga_fitness, external, DataRole::validation, "fitness scoring");
    const std::vector<TaggedTable> tagged{
        {DataRole::train_cv, "train", std::shared_ptr<const FeatureTable>(&train, [](const FeatureTable*) {})},
        {DataRole::validation, "validation", std::shared_ptr<const FeatureTable>(&external, [](const FeatureTable*) {})}};
    enforce_roles(Stage::ga_fitness, tagged);
    if (survivors.empty()) fail(errc::empty_survivor_set, "GA needs at least one surviving feature");
    (void)FeatureSchema(survivors);  // rejects duplicates
    const FeatureSchema tr_schema(train.columns), ex_schema(external.columns);
    (void)tr_schema.positions(survivors);
    (void)ex_schema.positions(survivors);

    const std::size_t n = survivors.size();
    const auto pop = static_cast<std::size_t>(cfg.population);
    const double p_mut = cfg.mutation_for(n);
    rng g(derive_seed(cfg.seed, 0x4741ULL));

    std::vector<Mask> population;
    population.emplace_back(n, true);
    while (population.size() < pop) {
        const double density = g.uniform();
        Mask m(n);
        for (std::size_t b = 0; b < n; ++b) m[b] = g.bernoulli(density);
        detail::repair(m, g);
        population.push_back(std::move(m));
    }

    GAResult res;
    res.survivors = survivors;
    res.source_schema_hash = train.schema_hash;
    std::map<Mask, double> cache;
    double global_best = -1.0;
    int zero_streak = 0;

    for (int gen = 1; gen <= cfg.generations; ++gen) {
        std::vector<Mask> pending;
        for (const auto& m : population)
            if (!cache.count(m) && std::find(pending.begin(), pending.end(), m) == pending.end()) pending.push_back(m);
        std::vector<double> scores(pending.size());
        parallel_for(pending.size(), cfg.jobs, [&](std::size_t i) {
            scores[i] = mask_fitness(train, external, mask_features(survivors, pending[i]), cfg.fitness_model);
        });
        for (std::size_t i = 0; i < pending.size(); ++i) cache.emplace(pending[i], scores[i]);
        res.evaluations += pending.size();

        std::vector<double> fitness(pop);
        for (std::size_t i = 0; i < pop; ++i) fitness[i] = cache.at(population[i]);
        const auto best_it = std::max_element(fitness.begin(), fitness.end());
        const auto best_idx = static_cast<std::size_t>(best_it - fitness.begin());
        if (*best_it > global_best) {
            global_best = *best_it;
            res.mask = population[best_idx];
            res.fitness = *best_it;
            res.found_in_generation = gen;
        }
        double mean = 0.0;
        for (double f : fitness) mean += f;
        mean /= static_cast<double>(pop);
        res.trace.push_back({gen, global_best, *best_it, mean});

        zero_streak = *best_it == 0.0 ? zero_streak + 1 : 0;
        if (zero_streak >= cfg.degenerate_patience) throw DegenerateFitness(res.trace, cfg.degenerate_patience);
        if (gen == cfg.generations) break;

        std::vector<std::size_t> order(pop);
        for (std::size_t i = 0; i < pop; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fitness[a] > fitness[b]; });
        std::vector<Mask> next;
        next.reserve(pop);
        for (int e = 0; e < cfg.elite; ++e) next.push_back(population[order[static_cast<std::size_t>(e)]]);
        while (next.size() < pop) {
            const auto& a = population[detail::tournament(fitness, cfg.tournament_size, g)];
            const auto& b = population[detail::tournament(fitness, cfg.tournament_size, g)];
            Mask child(n);
            for (std::size_t bit = 0; bit < n; ++bit) {
                child[bit] = g.bernoulli(cfg.crossover_probability) ? a[bit] : b[bit];
                if (g.bernoulli(p_mut)) child[bit] = !child[bit];
            }
            detail::repair(child, g);
            next.push_back(std::move(child));
        }
        population = std::move(next);
    }
    res.features = mask_features(survivors, res.mask);
    return res;
}

/// GA trace: generation, best-so-far, generation best, mean fitness.
inline void write_trace_csv(const GAResult& r, std::ostream& out) {
    out << "generation,best,generation_best,mean\n";
    for (const auto& t : r.trace)
        out << t.generation << ',' << format_number(t.best) << ',' << format_number(t.generation_best) << ','
            << format_number(t.mean) << '\n';
}

inline constexpr std::string_view mask_format = "iotgem-mask";

/// Persisted selection: feature names, schema hashes, GA configuration, seed.
inline nlohmann::json mask_to_json(const GAResult& r, const GAConfig& cfg) {
    std::string bits;
    for (bool b : r.mask) bits += b ? '1' : '0';
    return {{"format", mask_format},
            {"version", 1},
            {"features", r.features},
            {"schema_hash", schema_hash(r.features)},
            {"source_schema_hash", r.source_schema_hash},
            {"survivors", r.survivors},
            {"bits", bits},
            {"fitness_f1", r.fitness},
            {"found_in_generation", r.found_in_generation},
            {"evaluations", r.evaluations},
            {"ga_config", cfg.to_json()},
            {"seed", cfg.seed}};
}

/// Feature list of a persisted mask; its schema hash must match the names.
inline std::vector<std::string> mask_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != mask_format) fail(errc::invalid_argument, "not an iotgem mask file");
    auto features = j.at("features").get<std::vector<std::string>>();
    if (features.empty()) fail(errc::invalid_argument, "mask selects no features");
    if (j.at("schema_hash").get<std::string>() != schema_hash(features))
        fail(errc::schema_hash_mismatch, "mask schema hash does not match its feature list");
    return features;
}

}  // namespace iotgem::select
